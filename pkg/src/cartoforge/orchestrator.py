"""The design-review loop: caption, design, compile, render, evaluate, review.

One run advances strictly sequentially. The stylesheet designer keeps one
persistent chat session for the whole run (its memory carries prior
stylesheets and feedback); the map reviewer gets a fresh session for every
evaluation so each verdict is made from scratch.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from PIL import Image

from . import gateway
from .compiler import (
    CompiledStyle,
    SourceConfig,
    build_sprite,
    compile as compile_style,
    match_layers_to_sheet,
    validate_style,
)
from .dataset import MapDataset
from .errors import (
    AwaitingHumanVerdict,
    CartoforgeError,
    ImplementerOutputRejected,
    InvalidStylesheet,
    MalformedJson,
    NoJsonFound,
    SchemaViolation,
    SessionTerminated,
)
from .font5x7 import text_mask
from .gateway import ChatMessage, ImageAttachment, Provider, TranscriptRecorder, make_provider
from .metrics import (
    JOINT,
    MARGINAL,
    ColorHistogram,
    SimilarityScore,
    cosine_similarity,
    distinctness_lint,
    histogram,
)
from .prompts import (
    ImageCaption,
    PromptContext,
    ROLE_APPRECIATOR,
    ROLE_FILE_IMPLEMENTER,
    ROLE_ICON_DESIGNER,
    ROLE_REVIEWER,
    ROLE_STYLE_DESIGNER,
    RoleProfile,
    compose_design_request,
    compose_review_request,
    compose_revision_request,
    compose_schema_reminder,
    extract_json_block,
    load_role_profiles,
    parse_appreciator_reply,
    parse_reviewer_reply,
    render_role_prompt,
    serialize_verdict,
)
from .renderer import RenderedMap, Viewport, render
from .session import (
    DESIGNER_SCRIPTED,
    IMPLEMENTER_MLLM,
    derive_layer_index,
    ICONS_EVERY_ITERATION,
    IterationRecord,
    REVIEWER_HUMAN,
    REVIEWER_SCRIPTED,
    RunConfig,
    RunSession,
    SessionStore,
    TERMINATED_ACCEPT,
    TERMINATED_CAP,
    TERMINATED_ERROR,
)
from .stylesheet import (
    LayerManifest,
    ReviewVerdict,
    StyleSheet,
    apply_suggestions,
    parse_stylesheet,
    serialize_stylesheet,
    slugify,
    validate_completeness,
)

_STYLE_PARSE_ERRORS = (NoJsonFound, MalformedJson, SchemaViolation)


# --- role sources -------------------------------------------------------------

class CaptionSource:
    def caption(self, inspiration: bytes) -> ImageCaption:
        raise NotImplementedError


class DesignerSource:
    def initial(self, inspiration: bytes, caption: ImageCaption) -> StyleSheet:
        raise NotImplementedError

    def revise(self, sheet: StyleSheet, verdict: ReviewVerdict) -> StyleSheet:
        raise NotImplementedError


class ReviewerSource:
    def review(self, inspiration: bytes, map_png: bytes, iteration: int, similarity: float) -> ReviewVerdict:
        raise NotImplementedError


class IconSource:
    def generate(self, element: str, expectation: str) -> bytes:
        raise NotImplementedError


class StyleImplementer:
    def implement(self, sheet: StyleSheet, manifest: LayerManifest, src: SourceConfig,
                  label_attribute: str) -> CompiledStyle:
        raise NotImplementedError


class DeterministicImplementer(StyleImplementer):
    def implement(self, sheet, manifest, src, label_attribute):
        return compile_style(sheet, manifest, src, label_attribute=label_attribute)


class MllmImplementer(StyleImplementer):
    """Optional MLLM file-implementer path.

    The reply must be a Style Spec v8 document that passes structural
    validation and carries every IR value bit-exact, otherwise the run
    aborts rather than rendering an unfaithful style.
    """

    def __init__(self, provider: Provider, profile: RoleProfile):
        self.provider = provider
        self.profile = profile

    def implement(self, sheet, manifest, src, label_attribute):
        prompt = render_role_prompt(self.profile, PromptContext(prior_stylesheet=sheet))
        session = gateway.open_session(ROLE_FILE_IMPLEMENTER, prompt, self.provider)
        reply = gateway.chat(session, ChatMessage("user", "Please produce the style document now."))
        try:
            document = json.loads(extract_json_block(reply.text))
        except (NoJsonFound, json.JSONDecodeError) as e:
            raise ImplementerOutputRejected(f"implementer reply is not JSON: {e}") from e
        diagnostics = validate_style(document)
        index, fidelity = match_layers_to_sheet(document, sheet)
        problems = diagnostics + fidelity
        if problems:
            raise ImplementerOutputRejected(
                "implementer document rejected: " + "; ".join(str(d) for d in problems[:5])
            )
        return CompiledStyle(document, index)


class MllmCaptionSource(CaptionSource):
    def __init__(self, provider: Provider, profile: RoleProfile):
        self.provider = provider
        self.profile = profile

    def caption(self, inspiration: bytes) -> ImageCaption:
        session = gateway.open_session(
            ROLE_APPRECIATOR, render_role_prompt(self.profile, PromptContext()), self.provider
        )
        reply = gateway.chat(
            session,
            ChatMessage(
                "user",
                "Here is the image. Please describe it now.",
                (ImageAttachment(inspiration),),
            ),
        )
        return parse_appreciator_reply(reply.text)


class MllmDesigner(DesignerSource):
    """Persistent designer session; bounded re-prompts on malformed output."""

    MAX_REPROMPTS = 2

    def __init__(self, provider: Provider, profile: RoleProfile, manifest: LayerManifest):
        self.provider = provider
        self.profile = profile
        self.manifest = manifest
        self.session = None

    def _parse_with_reprompts(self, reply_text: str) -> StyleSheet:
        for attempt in range(self.MAX_REPROMPTS + 1):
            problem = None
            try:
                sheet = parse_stylesheet(extract_json_block(reply_text))
            except _STYLE_PARSE_ERRORS as e:
                problem = str(e)
            else:
                report = validate_completeness(sheet, self.manifest)
                if report.is_complete:
                    return sheet
                problem = (
                    f"stylesheet does not cover the map data: missing={list(report.missing)}, "
                    f"extraneous={list(report.extraneous)}"
                )
            if attempt == self.MAX_REPROMPTS:
                raise InvalidStylesheet(f"designer output unusable after re-prompts: {problem}")
            reply_text = gateway.chat(
                self.session, ChatMessage("user", f"{compose_schema_reminder()} ({problem})")
            ).text
        raise InvalidStylesheet("unreachable")

    def initial(self, inspiration: bytes, caption: ImageCaption) -> StyleSheet:
        system = render_role_prompt(self.profile, PromptContext(manifest=self.manifest))
        self.session = gateway.open_session(ROLE_STYLE_DESIGNER, system, self.provider)
        reply = gateway.chat(
            self.session,
            ChatMessage("user", compose_design_request(caption), (ImageAttachment(inspiration),)),
        )
        return self._parse_with_reprompts(reply.text)

    def revise(self, sheet: StyleSheet, verdict: ReviewVerdict) -> StyleSheet:
        if self.session is None:
            raise InvalidStylesheet("revise called before initial design")
        reply = gateway.chat(self.session, ChatMessage("user", compose_revision_request(verdict)))
        return self._parse_with_reprompts(reply.text)


class MllmReviewer(ReviewerSource):
    """One fresh session per review: no memory of earlier iterations."""

    def __init__(
        self,
        provider: Provider,
        profile: RoleProfile,
        manifest: LayerManifest,
        show_metrics: bool = False,
    ):
        self.provider = provider
        self.profile = profile
        self.manifest = manifest
        self.show_metrics = show_metrics

    def review(self, inspiration: bytes, map_png: bytes, iteration: int, similarity: float) -> ReviewVerdict:
        system = render_role_prompt(self.profile, PromptContext(manifest=self.manifest))
        session = gateway.open_session(ROLE_REVIEWER, system, self.provider)
        text = compose_review_request()
        if self.show_metrics:
            text += f"\n\nMeasured color-distribution similarity to the reference: {similarity:.4f}."
        reply = gateway.chat(
            session,
            ChatMessage("user", text, (ImageAttachment(inspiration), ImageAttachment(map_png))),
        )
        return parse_reviewer_reply(reply.text)


class MllmIconSource(IconSource):
    def __init__(self, provider: Provider, profile: RoleProfile, size_px: int = 64):
        self.provider = provider
        self.profile = profile
        self.size_px = size_px

    def generate(self, element: str, expectation: str) -> bytes:
        prompt = render_role_prompt(
            self.profile, PromptContext(icon_element=element, icon_expectation=expectation)
        )
        return gateway.generate_image(self.provider, prompt, self.size_px)


class ScriptedCaptionSource(CaptionSource):
    def __init__(self, caption: ImageCaption | None = None):
        self._caption = caption or ImageCaption(
            content="Scripted run: no image appreciator configured.",
            color="",
            theme_design="",
            raw="Scripted run: no image appreciator configured.",
            warning=True,
        )

    def caption(self, inspiration: bytes) -> ImageCaption:
        return self._caption


class ScriptedDesigner(DesignerSource):
    """Deterministic designer: fixed initial sheet, revisions via apply_suggestions."""

    def __init__(self, initial_sheet: StyleSheet):
        self.sheet = initial_sheet

    def initial(self, inspiration: bytes, caption: ImageCaption) -> StyleSheet:
        return self.sheet

    def revise(self, sheet: StyleSheet, verdict: ReviewVerdict) -> StyleSheet:
        return apply_suggestions(sheet, verdict)


class ScriptedReviewer(ReviewerSource):
    def __init__(self, verdicts: Sequence[ReviewVerdict] | Callable[[int], ReviewVerdict]):
        self.verdicts = verdicts

    def review(self, inspiration: bytes, map_png: bytes, iteration: int, similarity: float) -> ReviewVerdict:
        if callable(self.verdicts):
            return self.verdicts(iteration)
        return self.verdicts[min(iteration, len(self.verdicts) - 1)]


class HumanReviewer(ReviewerSource):
    """Verdicts arrive through a mailbox; empty mailbox raises AwaitingHumanVerdict."""

    def __init__(self):
        self._lock = threading.Lock()
        self._mailbox: list[ReviewVerdict] = []
        self.verdict_event = threading.Event()

    def post(self, verdict: ReviewVerdict) -> None:
        with self._lock:
            self._mailbox.append(verdict)
        self.verdict_event.set()

    def review(self, inspiration: bytes, map_png: bytes, iteration: int, similarity: float) -> ReviewVerdict:
        with self._lock:
            if not self._mailbox:
                self.verdict_event.clear()
                raise AwaitingHumanVerdict(f"iteration {iteration} awaits a human verdict")
            return self._mailbox.pop(0)


class PlaceholderIconSource(IconSource):
    """Local deterministic stand-in: a colored disc with the element's initial."""

    def __init__(self, size_px: int = 64):
        self.size_px = size_px

    def generate(self, element: str, expectation: str) -> bytes:
        size = self.size_px
        seed = hashlib.sha256(f"{element}\x00{expectation}".encode("utf-8")).digest()
        rgb = np.frombuffer(seed[:3], dtype=np.uint8)
        canvas = np.zeros((size, size, 4), dtype=np.uint8)
        yy, xx = np.mgrid[0:size, 0:size]
        disc = (xx - size / 2 + 0.5) ** 2 + (yy - size / 2 + 0.5) ** 2 <= (size * 0.44) ** 2
        canvas[disc, 0] = rgb[0]
        canvas[disc, 1] = rgb[1]
        canvas[disc, 2] = rgb[2]
        canvas[disc, 3] = 255
        initial = next((ch for ch in element if ch.isalnum()), "")
        glyph = text_mask(initial, scale=max(1, size // 16))
        if glyph.shape[1]:
            y0 = (size - glyph.shape[0]) // 2
            x0 = (size - glyph.shape[1]) // 2
            region = canvas[y0 : y0 + glyph.shape[0], x0 : x0 + glyph.shape[1]]
            fg = 255 if int(rgb.sum()) < 382 else 0
            region[glyph] = (fg, fg, fg, 255)
        buf = io.BytesIO()
        Image.fromarray(canvas, "RGBA").save(buf, format="PNG")
        return buf.getvalue()


@dataclass
class RoleBundle:
    captioner: CaptionSource
    designer: DesignerSource
    reviewer: ReviewerSource
    icon_source: IconSource
    implementer: StyleImplementer | None = None

    def __post_init__(self):
        if self.implementer is None:
            self.implementer = DeterministicImplementer()


def build_roles(
    config: RunConfig,
    manifest: LayerManifest,
    transport: Callable | None = None,
    sleep: Callable[[float], None] = time.sleep,
    reviewer: ReviewerSource | None = None,
) -> RoleBundle:
    """Assemble role sources from provider configs, with scripted fallbacks."""
    profiles = load_role_profiles()
    has_remote = any(cfg.kind != gateway.KIND_REPLAY for cfg in config.providers.values())
    recorder = (
        TranscriptRecorder(config.record_fixture, providers=config.providers)
        if config.record_fixture and has_remote
        else None
    )

    def provider_for(role: str) -> Provider | None:
        cfg = config.providers.get(role) or config.providers.get("default")
        if cfg is None:
            return None
        return make_provider(cfg, recorder=recorder, transport=transport, sleep=sleep)

    appreciator = provider_for(ROLE_APPRECIATOR)
    captioner: CaptionSource = (
        MllmCaptionSource(appreciator, profiles[ROLE_APPRECIATOR])
        if appreciator
        else ScriptedCaptionSource()
    )

    if config.designer_source == DESIGNER_SCRIPTED:
        if not config.initial_stylesheet:
            raise ValueError("scripted designer requires an initial stylesheet")
        designer: DesignerSource = ScriptedDesigner(parse_stylesheet(config.initial_stylesheet))
    else:
        designer_provider = provider_for(ROLE_STYLE_DESIGNER)
        if designer_provider is None:
            raise ValueError("mllm designer requires a provider config")
        designer = MllmDesigner(designer_provider, profiles[ROLE_STYLE_DESIGNER], manifest)

    if reviewer is not None:
        pass
    elif config.reviewer_source == REVIEWER_HUMAN:
        reviewer = HumanReviewer()
    elif config.reviewer_source == REVIEWER_SCRIPTED:
        raise ValueError("scripted reviewer must be injected, it has no config form")
    else:
        reviewer_provider = provider_for(ROLE_REVIEWER)
        if reviewer_provider is None:
            raise ValueError("mllm reviewer requires a provider config")
        reviewer = MllmReviewer(
            reviewer_provider, profiles[ROLE_REVIEWER], manifest, config.show_metrics_to_reviewer
        )

    icon_provider = provider_for(ROLE_ICON_DESIGNER)
    icon_source: IconSource = (
        MllmIconSource(icon_provider, profiles[ROLE_ICON_DESIGNER], config.icon_size_px)
        if icon_provider
        else PlaceholderIconSource(config.icon_size_px)
    )

    implementer: StyleImplementer = DeterministicImplementer()
    if config.implementer_source == IMPLEMENTER_MLLM:
        implementer_provider = provider_for(ROLE_FILE_IMPLEMENTER)
        if implementer_provider is None:
            raise ValueError("mllm implementer requires a provider config")
        implementer = MllmImplementer(implementer_provider, profiles[ROLE_FILE_IMPLEMENTER])
    return RoleBundle(captioner, designer, reviewer, icon_source, implementer)


def template_hashes() -> dict[str, str]:
    return {role_id: profile.template_hash for role_id, profile in load_role_profiles().items()}


# --- the loop -------------------------------------------------------------------


@dataclass
class _PendingIteration:
    index: int
    sheet: StyleSheet
    compiled_json: str
    icons: dict[str, str]
    map_png: bytes
    rendered: RenderedMap
    similarity: float
    similarity_marginal: float
    lints: tuple
    awaiting_announced: bool = False


class Orchestrator:
    """Advances one run; single-writer, step-at-a-time."""

    def __init__(
        self,
        inspiration: bytes,
        dataset: MapDataset,
        config: RunConfig,
        roles: RoleBundle,
        store: SessionStore,
        run_id: str,
        on_event: Callable[[dict], None] | None = None,
    ):
        self.inspiration = inspiration
        self.dataset = dataset
        self.config = config
        self.roles = roles
        self.store = store
        self.on_event = on_event or (lambda event: None)
        self.session = RunSession(
            run_id=run_id,
            inspiration=inspiration,
            caption=ScriptedCaptionSource().caption(inspiration),
            dataset=dataset,
            manifest=dataset.manifest,
            config=config,
            template_hashes=template_hashes(),
        )
        self.viewport = Viewport(*config.viewport)
        self._started = False
        self._sheet: StyleSheet | None = None
        self._pending: _PendingIteration | None = None
        self._icon_bytes: dict[str, bytes] = {}
        self._icon_expectations: dict[str, str] = {}
        self._inspiration_hist: ColorHistogram | None = None
        self._inspiration_hist_marginal: ColorHistogram | None = None

    # -- events ------------------------------------------------------------------

    def _emit(self, kind: str, iteration: int | None) -> None:
        self.on_event(
            {
                "kind": kind,
                "run_id": self.session.run_id,
                "iteration": iteration,
                "timestamp": time.time(),
            }
        )

    # -- lifecycle ----------------------------------------------------------------

    def _start(self) -> None:
        self.store.init_run(self.session)
        try:
            caption = self.roles.captioner.caption(self.inspiration)
            self.session.caption = caption
            self.store.update_caption(self.session.run_id, caption)
            self._sheet = self.roles.designer.initial(self.inspiration, caption)
            image = Image.open(io.BytesIO(self.inspiration)).convert("RGBA")
            B = self.config.bins_per_channel
            self._inspiration_hist = histogram(image, B, JOINT)
            self._inspiration_hist_marginal = histogram(image, B, MARGINAL)
        except CartoforgeError as e:
            self._terminate(TERMINATED_ERROR, str(e))
            raise
        self._started = True

    def _terminate(self, reason: str, error: str | None = None) -> None:
        self.session.terminated_by = reason
        self.session.error = error
        self.store.set_terminated(self.session.run_id, reason, error)
        self._emit("run-terminated", len(self.session.iterations) - 1 if self.session.iterations else None)

    def _ensure_icons(self, sheet: StyleSheet) -> dict[str, bytes]:
        for element in self.dataset.manifest.icon_elements:
            expectation = sheet.icons[element].expectation
            stale = (
                self.config.icon_regen_policy == ICONS_EVERY_ITERATION
                or element not in self._icon_bytes
                or self._icon_expectations.get(element) != expectation
            )
            if stale:
                self._icon_bytes[element] = self.roles.icon_source.generate(element, expectation)
                self._icon_expectations[element] = expectation
        return dict(self._icon_bytes)

    def _prepare_iteration(self) -> None:
        index = len(self.session.iterations)
        self._emit("iteration-started", index)
        sheet = self._sheet
        icons = self._ensure_icons(sheet)
        source = SourceConfig(inline_data=dict(self.dataset.layers))
        compiled = self.roles.implementer.implement(
            sheet, self.dataset.manifest, source, self.config.label_attribute
        )
        sprite = build_sprite(icons)
        rendered = render(self.dataset, sheet, icons, self.viewport, self.config.label_attribute)
        map_png = rendered.png_bytes()

        B = self.config.bins_per_channel
        map_hist = histogram(rendered.pixels, B, JOINT)
        map_hist_marginal = histogram(rendered.pixels, B, MARGINAL)
        similarity = cosine_similarity(self._inspiration_hist, map_hist).value
        similarity_marginal = cosine_similarity(
            self._inspiration_hist_marginal, map_hist_marginal
        ).value
        lints = tuple(
            distinctness_lint(sheet, self.config.lint_tau, self.config.lint_min_contrast)
        )

        metrics_doc = {
            "bins": B,
            "similarity": similarity,
            "similarity_marginal": similarity_marginal,
            "histogram_digest_inspiration": self._inspiration_hist.digest(),
            "histogram_digest_map": map_hist.digest(),
            "warnings": [w.to_dict() for w in lints],
        }
        files: dict[str, bytes] = {
            "stylesheet.json": serialize_stylesheet(sheet).encode("utf-8"),
            "style.json": compiled.to_json().encode("utf-8"),
            "sprite.png": sprite.atlas_png(),
            "sprite.json": sprite.index_json().encode("utf-8"),
            "map.png": map_png,
            "metrics.json": (json.dumps(metrics_doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8"),
        }
        icon_digests: dict[str, str] = {}
        for element, data in icons.items():
            files[f"icons/{slugify(element)}.png"] = data
            icon_digests[element] = hashlib.sha256(data).hexdigest()

        self.store.write_pending(self.session.run_id, index, files)
        self._pending = _PendingIteration(
            index=index,
            sheet=sheet,
            compiled_json=compiled.to_json(),
            icons=icon_digests,
            map_png=map_png,
            rendered=rendered,
            similarity=similarity,
            similarity_marginal=similarity_marginal,
            lints=lints,
        )

    def _finish_iteration(self) -> IterationRecord:
        pending = self._pending
        try:
            verdict = self.roles.reviewer.review(
                self.inspiration, pending.map_png, pending.index, pending.similarity
            )
        except AwaitingHumanVerdict:
            if not pending.awaiting_announced:
                pending.awaiting_announced = True
                self._emit("awaiting-verdict", pending.index)
            raise

        review_json = (serialize_verdict(verdict) + "\n").encode("utf-8")
        summary = {
            "similarity": pending.similarity,
            "similarity_marginal": pending.similarity_marginal,
            "decision": verdict.decision,
            "icons": pending.icons,
            "rendered": pending.rendered.digest(),
        }
        self.store.complete_iteration(self.session.run_id, pending.index, review_json, summary)

        record = IterationRecord(
            index=pending.index,
            stylesheet=pending.sheet,
            compiled=CompiledStyle(json.loads(pending.compiled_json), derive_layer_index(pending.sheet)),
            icons=pending.icons,
            rendered_digest=pending.rendered.digest(),
            verdict=verdict,
            similarity=SimilarityScore(pending.similarity, self.config.bins_per_channel, JOINT),
            similarity_marginal=pending.similarity_marginal,
            lint_warnings=pending.lints,
        )
        self.session.iterations.append(record)
        self._pending = None
        self._emit("iteration-completed", record.index)

        if verdict.is_accept:
            self._terminate(TERMINATED_ACCEPT)
        elif len(self.session.iterations) >= self.config.max_iterations:
            self._terminate(TERMINATED_CAP)
        else:
            self._sheet = self.roles.designer.revise(pending.sheet, verdict)
        return record

    def step(self) -> IterationRecord:
        """Advance exactly one iteration; raises AwaitingHumanVerdict in human mode."""
        if self.session.is_terminated:
            raise SessionTerminated(f"run {self.session.run_id} is {self.session.terminated_by}")
        try:
            if not self._started:
                self._start()
            if self._pending is None:
                self._prepare_iteration()
            return self._finish_iteration()
        except AwaitingHumanVerdict:
            raise
        except CartoforgeError as e:
            if self.session.terminated_by is None:
                self._terminate(TERMINATED_ERROR, str(e))
            raise

    def run(self) -> RunSession:
        """Loop until accept, cap, or error; every iteration persists before the next."""
        while not self.session.is_terminated:
            self.step()
        return self.session

    def post_verdict(self, verdict: ReviewVerdict) -> int:
        if not isinstance(self.roles.reviewer, HumanReviewer):
            raise CartoforgeError("run does not use a human reviewer")
        if self._pending is None:
            raise CartoforgeError("no iteration is awaiting a verdict")
        index = self._pending.index
        self._pending.awaiting_announced = False  # locked until the next awaiting event
        self.roles.reviewer.post(verdict)
        return index

    @property
    def awaiting_verdict(self) -> bool:
        return self._pending is not None and self._pending.awaiting_announced


def resolve_run_id(store: SessionStore, config: RunConfig, inspiration: bytes, manifest: LayerManifest) -> str:
    if config.run_id:
        return config.run_id
    seed = hashlib.sha256(inspiration + manifest.to_json().encode("utf-8")).hexdigest()[:12]
    run_id = seed
    n = 1
    while store.run_dir(run_id).exists():
        n += 1
        run_id = f"{seed}-{n}"
    return run_id


def run_transfer(
    inspiration: bytes,
    dataset: MapDataset,
    config: RunConfig,
    store: SessionStore,
    roles: RoleBundle | None = None,
    on_event: Callable[[dict], None] | None = None,
    transport: Callable | None = None,
) -> RunSession:
    """Execute the full transfer-evaluation loop and return the session."""
    roles = roles or build_roles(config, dataset.manifest, transport=transport)
    run_id = resolve_run_id(store, config, inspiration, dataset.manifest)
    orchestrator = Orchestrator(inspiration, dataset, config, roles, store, run_id, on_event)
    return orchestrator.run()
