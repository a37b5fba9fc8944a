"""Provider access for chat-with-images and text-to-image models.

Remote providers speak the OpenAI-compatible chat-completions / image
generation wire format. Every call is identified by a request digest
(role, turn, canonicalized request JSON, credentials excluded), which a
record/replay provider uses to make full pipeline runs bit-reproducible
and to detect prompt drift between record and replay.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from PIL import Image

from .errors import ProviderError, ProviderHttpError, ProviderTimeout, ReplayMiss

DEFAULT_CREDENTIAL_ENV = "CARTOFORGE_API_KEY"

KIND_REMOTE_CHAT = "remote-chat"
KIND_REMOTE_IMAGE = "remote-image"
KIND_REPLAY = "replay"


@dataclass(frozen=True)
class ImageAttachment:
    data: bytes
    media_type: str = "image/png"

    def digest(self) -> str:
        return hashlib.sha256(self.data).hexdigest()


@dataclass(frozen=True)
class ChatMessage:
    author: str  # system | user | assistant
    text: str
    images: tuple[ImageAttachment, ...] = ()

    def __post_init__(self):
        if self.author not in ("system", "user", "assistant"):
            raise ValueError(f"unknown author {self.author!r}")
        if self.author == "system" and self.images:
            raise ValueError("system messages carry no images")
        object.__setattr__(self, "images", tuple(self.images))


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = KIND_REMOTE_CHAT
    endpoint: str = ""
    model: str = ""
    credential_env: str = DEFAULT_CREDENTIAL_ENV
    timeout_s: float = 60.0
    max_retries: int = 3
    temperature: float | None = None
    fixture_path: str | None = None  # required for replay kind
    max_image_edge: int = 1024

    def __post_init__(self):
        if self.kind not in (KIND_REMOTE_CHAT, KIND_REMOTE_IMAGE, KIND_REPLAY):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == KIND_REPLAY and not self.fixture_path:
            raise ValueError("replay provider requires a fixture path")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model": self.model,
            "credential_env": self.credential_env,
            "timeout_s": self.timeout_s,
            "max_retries": self.max_retries,
            "temperature": self.temperature,
            "fixture_path": self.fixture_path,
            "max_image_edge": self.max_image_edge,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProviderConfig":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__ if k in doc})


@dataclass
class ChatSession:
    session_id: str
    role_id: str
    transcript: list[ChatMessage]
    provider: "Provider"

    def user_turns(self) -> int:
        return sum(1 for m in self.transcript if m.author == "user")


def _downscale(att: ImageAttachment, max_edge: int) -> ImageAttachment:
    img = Image.open(io.BytesIO(att.data))
    if max(img.size) <= max_edge:
        return att
    img = img.convert("RGBA")
    scale = max_edge / max(img.size)
    img = img.resize((max(1, round(img.width * scale)), max(1, round(img.height * scale))))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return ImageAttachment(buf.getvalue(), "image/png")


def canonical_chat_request(
    role_id: str, turn: int, messages: list[ChatMessage], config: ProviderConfig
) -> dict:
    """Digest input: the full request minus credentials, images by hash."""
    return {
        "kind": "chat",
        "role_id": role_id,
        "turn": turn,
        "model": config.model,
        "temperature": config.temperature,
        "messages": [
            {"role": m.author, "text": m.text, "images": [a.digest() for a in m.images]}
            for m in messages
        ],
    }


def request_digest(canonical: dict) -> str:
    payload = json.dumps(canonical, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Provider:
    """One chat or image backend; subclasses implement the transport."""

    config: ProviderConfig

    def complete(self, role_id: str, turn: int, digest: str, messages: list[ChatMessage]) -> str:
        raise NotImplementedError

    def generate(self, digest: str, prompt: str, size_px: int) -> bytes:
        raise NotImplementedError


class RemoteProvider(Provider):
    """OpenAI-compatible HTTP provider with bounded retries.

    ``transport(url, headers, payload, timeout) -> (status, body_text)`` is
    injectable for tests; the default posts JSON via requests.
    """

    def __init__(
        self,
        config: ProviderConfig,
        transport: Callable[..., tuple[int, str]] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.transport = transport or _requests_transport
        self.sleep = sleep
        self.call_log: list[dict] = []

    def _credential(self) -> str:
        value = os.environ.get(self.config.credential_env, "")
        if not value:
            raise ProviderError(
                f"credential environment variable {self.config.credential_env!r} is not set"
            )
        return value

    def _send(self, payload: dict) -> dict:
        headers = {
            "Authorization": f"Bearer {self._credential()}",
            "Content-Type": "application/json",
        }
        attempts = max(1, self.config.max_retries)
        last_error: Exception | None = None
        for attempt in range(1, attempts + 1):
            try:
                status, body = self.transport(
                    self.config.endpoint, headers, payload, self.config.timeout_s
                )
            except TimeoutError as e:
                self.call_log.append({"attempt": attempt, "error": "timeout"})
                last_error = ProviderTimeout(f"request timed out after {self.config.timeout_s}s")
            except OSError as e:
                self.call_log.append({"attempt": attempt, "error": str(e)})
                last_error = ProviderError(f"transport failure: {e}")
            else:
                self.call_log.append({"attempt": attempt, "status": status})
                if status == 200:
                    return json.loads(body)
                last_error = ProviderHttpError(status, body)
                if status < 500 and status != 429:
                    raise last_error  # non-retryable client error
            if attempt < attempts:
                self.sleep(0.5 * 2 ** (attempt - 1))
        raise last_error if last_error else ProviderError("no attempts made")

    @staticmethod
    def _content_parts(message: ChatMessage):
        if not message.images:
            return message.text
        parts: list[dict] = [{"type": "text", "text": message.text}]
        for att in message.images:
            data_url = f"data:{att.media_type};base64,{base64.b64encode(att.data).decode('ascii')}"
            parts.append({"type": "image_url", "image_url": {"url": data_url}})
        return parts

    def complete(self, role_id: str, turn: int, digest: str, messages: list[ChatMessage]) -> str:
        payload: dict = {
            "model": self.config.model,
            "messages": [
                {"role": m.author, "content": self._content_parts(m)} for m in messages
            ],
        }
        if self.config.temperature is not None:
            payload["temperature"] = self.config.temperature
        body = self._send(payload)
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise ProviderError(f"malformed chat response: {e}") from e

    def generate(self, digest: str, prompt: str, size_px: int) -> bytes:
        payload = {
            "model": self.config.model,
            "prompt": prompt,
            "size": f"{size_px}x{size_px}",
            "response_format": "b64_json",
            "n": 1,
        }
        body = self._send(payload)
        try:
            return base64.b64decode(body["data"][0]["b64_json"])
        except (KeyError, IndexError, TypeError) as e:
            raise ProviderError(f"malformed image response: {e}") from e


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float) -> tuple[int, str]:
    import requests

    try:
        resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.exceptions.Timeout as e:
        raise TimeoutError(str(e)) from e
    except requests.exceptions.RequestException as e:
        raise OSError(str(e)) from e
    return resp.status_code, resp.text


class TranscriptRecorder:
    """Appends one JSON-lines record per provider call; images as sibling files.

    Records are written as calls happen, so a crashed run still leaves a
    replayable prefix. A header record carries the sampling parameters each
    role ran with, so replay providers can reproduce the request digests.
    """

    def __init__(self, fixture_path: str | Path, providers: dict[str, ProviderConfig] | None = None):
        self.path = Path(fixture_path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")
        if providers:
            self._append(
                {
                    "kind": "config",
                    "providers": {
                        role: {
                            "model": cfg.model,
                            "temperature": cfg.temperature,
                            "max_image_edge": cfg.max_image_edge,
                        }
                        for role, cfg in providers.items()
                    },
                }
            )

    def _append(self, record: dict) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def record_chat(self, role_id: str, turn: int, digest: str, response: str) -> None:
        self._append(
            {"kind": "chat", "role_id": role_id, "turn": turn, "digest": digest, "response": response}
        )

    def record_image(self, role_id: str, turn: int, digest: str, image: bytes) -> None:
        name = hashlib.sha256(image).hexdigest() + ".png"
        (self.path.parent / name).write_bytes(image)
        self._append(
            {"kind": "image", "role_id": role_id, "turn": turn, "digest": digest, "image_file": name}
        )


class RecordingProvider(Provider):
    """Delegates to a remote provider and records every exchange."""

    def __init__(self, inner: Provider, recorder: TranscriptRecorder):
        self.inner = inner
        self.recorder = recorder
        self._image_turns = 0

    @property
    def config(self) -> ProviderConfig:
        return self.inner.config

    def complete(self, role_id: str, turn: int, digest: str, messages: list[ChatMessage]) -> str:
        reply = self.inner.complete(role_id, turn, digest, messages)
        self.recorder.record_chat(role_id, turn, digest, reply)
        return reply

    def generate(self, digest: str, prompt: str, size_px: int) -> bytes:
        image = self.inner.generate(digest, prompt, size_px)
        self._image_turns += 1
        self.recorder.record_image("icon_designer", self._image_turns, digest, image)
        return image


class ReplayProvider(Provider):
    """Returns recorded responses keyed by (role, turn, request digest)."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self.path = Path(config.fixture_path)
        if not self.path.exists():
            raise ProviderError(f"fixture not found: {self.path}")
        self._chats: dict[tuple[str, int, str], str] = {}
        self._images: dict[str, str] = {}
        for line in self.path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            if record["kind"] == "chat":
                self._chats[(record["role_id"], record["turn"], record["digest"])] = record["response"]
            elif record["kind"] == "image":
                self._images[record["digest"]] = record["image_file"]

    def complete(self, role_id: str, turn: int, digest: str, messages: list[ChatMessage]) -> str:
        key = (role_id, turn, digest)
        if key not in self._chats:
            raise ReplayMiss(f"chat {role_id} turn {turn} digest {digest[:12]}")
        return self._chats[key]

    def generate(self, digest: str, prompt: str, size_px: int) -> bytes:
        if digest not in self._images:
            raise ReplayMiss(f"image digest {digest[:12]}")
        return (self.path.parent / self._images[digest]).read_bytes()


def replay_providers_from_fixture(fixture_path: str | Path) -> dict[str, ProviderConfig]:
    """Per-role replay configs reconstructed from a fixture's header record.

    Fixtures recorded without a header yield a single shared default entry.
    """
    path = Path(fixture_path)
    first = path.read_text("utf-8").splitlines()[:1]
    header = json.loads(first[0]) if first and first[0].strip() else {}
    if header.get("kind") != "config" or "providers" not in header:
        return {"default": ProviderConfig(kind=KIND_REPLAY, fixture_path=str(path))}
    return {
        role: ProviderConfig(
            kind=KIND_REPLAY,
            fixture_path=str(path),
            model=entry.get("model", ""),
            temperature=entry.get("temperature"),
            max_image_edge=entry.get("max_image_edge", 1024),
        )
        for role, entry in header["providers"].items()
    }


def make_provider(
    config: ProviderConfig,
    recorder: TranscriptRecorder | None = None,
    transport: Callable[..., tuple[int, str]] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Provider:
    if config.kind == KIND_REPLAY:
        return ReplayProvider(config)
    provider: Provider = RemoteProvider(config, transport=transport, sleep=sleep)
    if recorder is not None:
        provider = RecordingProvider(provider, recorder)
    return provider


# --- session operations -------------------------------------------------------

def open_session(role_id: str, system_prompt: str, provider: Provider) -> ChatSession:
    return ChatSession(
        session_id=uuid.uuid4().hex,
        role_id=role_id,
        transcript=[ChatMessage("system", system_prompt)],
        provider=provider,
    )


def chat(session: ChatSession, user_message: ChatMessage) -> ChatMessage:
    """Send one user turn; appends the user message and the reply to the transcript."""
    if user_message.author != "user":
        raise ValueError("chat expects a user message")
    if not session.transcript or session.transcript[0].author != "system":
        raise ValueError("session is not initialized with a system message")

    max_edge = session.provider.config.max_image_edge
    normalized = ChatMessage(
        "user", user_message.text, tuple(_downscale(a, max_edge) for a in user_message.images)
    )
    turn = session.user_turns() + 1
    messages = session.transcript + [normalized]
    digest = request_digest(
        canonical_chat_request(session.role_id, turn, messages, session.provider.config)
    )
    reply_text = session.provider.complete(session.role_id, turn, digest, messages)
    reply = ChatMessage("assistant", reply_text)
    session.transcript.append(normalized)
    session.transcript.append(reply)
    return reply


def generate_image(provider: Provider, prompt: str, size_px: int) -> bytes:
    """Produce a square raster of side size_px from a text prompt."""
    if size_px <= 0:
        raise ValueError("size_px must be positive")
    canonical = {
        "kind": "image",
        "model": provider.config.model,
        "prompt": prompt,
        "size_px": size_px,
    }
    return provider.generate(request_digest(canonical), prompt, size_px)


def reset_session(session: ChatSession) -> ChatSession:
    """Fresh session with the same role and system prompt, empty history."""
    return ChatSession(
        session_id=uuid.uuid4().hex,
        role_id=session.role_id,
        transcript=[session.transcript[0]],
        provider=session.provider,
    )
