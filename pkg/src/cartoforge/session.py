"""Run session model and on-disk persistence.

Layout of one run::

    runs/<run_id>/
      config.json  inspiration.png  caption.json  manifest.json
      data/<layer>.geojson ...
      iterations/<k>/{stylesheet.json, style.json, sprite.png, sprite.json,
                      icons/<slug>.png ..., map.png, review.json, metrics.json}
      session.json

session.json is the commit point: it indexes every iteration file by
sha256 digest and is replaced atomically (write + rename), so a crash
mid-iteration leaves a loadable prefix.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .compiler import CompiledStyle, layer_key
from .dataset import MapDataset, load_dataset, save_dataset
from .errors import CorruptSession
from .gateway import ProviderConfig
from .metrics import JOINT, LintWarning, SimilarityScore
from .prompts import ImageCaption, parse_reviewer_reply
from .stylesheet import (
    CATEGORY_BACKGROUND,
    CATEGORY_FILL,
    CATEGORY_ICON,
    CATEGORY_LABEL,
    CATEGORY_LINE,
    LayerManifest,
    ReviewVerdict,
    StyleSheet,
    parse_stylesheet,
)

TERMINATED_ACCEPT = "accept"
TERMINATED_CAP = "cap"
TERMINATED_ERROR = "error"

REVIEWER_MLLM = "mllm"
REVIEWER_HUMAN = "human"
REVIEWER_SCRIPTED = "scripted"

DESIGNER_MLLM = "mllm"
DESIGNER_SCRIPTED = "scripted"

IMPLEMENTER_DETERMINISTIC = "deterministic"
IMPLEMENTER_MLLM = "mllm"

ICONS_ON_CHANGE = "on-expectation-change"
ICONS_EVERY_ITERATION = "every-iteration"


@dataclass
class RunConfig:
    max_iterations: int = 25
    bins_per_channel: int = 20
    reviewer_source: str = REVIEWER_MLLM
    designer_source: str = DESIGNER_MLLM
    implementer_source: str = IMPLEMENTER_DETERMINISTIC
    icon_regen_policy: str = ICONS_ON_CHANGE
    viewport: tuple[int, int] = (1024, 768)
    label_attribute: str = "name"
    lint_tau: float = 0.08
    lint_min_contrast: float = 1.5
    show_metrics_to_reviewer: bool = False
    icon_size_px: int = 64
    providers: dict[str, ProviderConfig] = field(default_factory=dict)
    record_fixture: str | None = None
    initial_stylesheet: str | None = None  # JSON text, scripted designer only
    run_id: str | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "bins_per_channel": self.bins_per_channel,
            "reviewer_source": self.reviewer_source,
            "designer_source": self.designer_source,
            "implementer_source": self.implementer_source,
            "icon_regen_policy": self.icon_regen_policy,
            "viewport": list(self.viewport),
            "label_attribute": self.label_attribute,
            "lint_tau": self.lint_tau,
            "lint_min_contrast": self.lint_min_contrast,
            "show_metrics_to_reviewer": self.show_metrics_to_reviewer,
            "icon_size_px": self.icon_size_px,
            "providers": {role: cfg.to_dict() for role, cfg in self.providers.items()},
            "record_fixture": self.record_fixture,
            "initial_stylesheet": self.initial_stylesheet,
            "run_id": self.run_id,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        doc["viewport"] = tuple(doc.get("viewport", (1024, 768)))
        doc["providers"] = {
            role: ProviderConfig.from_dict(cfg) for role, cfg in doc.get("providers", {}).items()
        }
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class IterationRecord:
    index: int
    stylesheet: StyleSheet
    compiled: CompiledStyle
    icons: dict[str, str]  # element name -> image digest
    rendered_digest: str
    verdict: ReviewVerdict
    similarity: SimilarityScore
    similarity_marginal: float
    lint_warnings: tuple[LintWarning, ...] = ()


@dataclass
class RunSession:
    run_id: str
    inspiration: bytes
    caption: ImageCaption
    dataset: MapDataset
    manifest: LayerManifest
    config: RunConfig
    template_hashes: dict[str, str] = field(default_factory=dict)
    iterations: list[IterationRecord] = field(default_factory=list)
    terminated_by: str | None = None
    error: str | None = None

    @property
    def is_terminated(self) -> bool:
        return self.terminated_by is not None


def file_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def derive_layer_index(sheet: StyleSheet) -> dict[tuple[str, str], str]:
    """Layer ids are a pure function of the sheet; recomputed on load."""
    index: dict[tuple[str, str], str] = {(CATEGORY_BACKGROUND, "background"): "background"}
    for category, entries in (
        (CATEGORY_FILL, sheet.fills),
        (CATEGORY_LINE, sheet.lines),
        (CATEGORY_ICON, sheet.icons),
        (CATEGORY_LABEL, sheet.labels),
    ):
        for element in entries:
            index[(category, element)] = layer_key(category, element)
    return index


class SessionStore:
    """Reads and writes run directories under a single runs root."""

    def __init__(self, runs_dir: str | Path):
        self.runs_dir = Path(runs_dir)
        self.runs_dir.mkdir(parents=True, exist_ok=True)

    def run_dir(self, run_id: str) -> Path:
        return self.runs_dir / run_id

    def list_runs(self) -> list[str]:
        return sorted(
            p.name for p in self.runs_dir.iterdir() if (p / "session.json").exists()
        )

    # -- writing ---------------------------------------------------------------

    def _write_index(self, run_id: str, index: dict) -> None:
        path = self.run_dir(run_id) / "session.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(index, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def read_index(self, run_id: str) -> dict:
        path = self.run_dir(run_id) / "session.json"
        if not path.exists():
            raise FileNotFoundError(f"no session {run_id!r} under {self.runs_dir}")
        return json.loads(path.read_text("utf-8"))

    def init_run(self, session: RunSession) -> None:
        root = self.run_dir(session.run_id)
        root.mkdir(parents=True, exist_ok=True)
        (root / "config.json").write_text(
            json.dumps(session.config.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        (root / "inspiration.png").write_bytes(session.inspiration)
        (root / "caption.json").write_text(
            json.dumps(session.caption.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        (root / "manifest.json").write_text(session.manifest.to_json() + "\n", encoding="utf-8")
        save_dataset(session.dataset, root / "data")
        self._write_index(
            session.run_id,
            {
                "run_id": session.run_id,
                "terminated_by": None,
                "error": None,
                "template_hashes": session.template_hashes,
                "iterations": [],
                "pending": None,
            },
        )

    def update_caption(self, run_id: str, caption: ImageCaption) -> None:
        (self.run_dir(run_id) / "caption.json").write_text(
            json.dumps(caption.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )

    def write_pending(self, run_id: str, index: int, files: dict[str, bytes]) -> dict[str, str]:
        """Write an iteration's pre-verdict files and mark it pending."""
        iter_dir = self.run_dir(run_id) / "iterations" / str(index)
        digests: dict[str, str] = {}
        for rel, data in files.items():
            path = iter_dir / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            digests[rel] = file_digest(data)
        doc = self.read_index(run_id)
        doc["pending"] = {"index": index, "files": digests}
        self._write_index(run_id, doc)
        return digests

    def complete_iteration(self, run_id: str, index: int, review_json: bytes, summary: dict) -> None:
        iter_dir = self.run_dir(run_id) / "iterations" / str(index)
        (iter_dir / "review.json").write_bytes(review_json)
        doc = self.read_index(run_id)
        pending = doc.get("pending") or {}
        files = dict(pending.get("files", {}))
        files["review.json"] = file_digest(review_json)
        entry = {"index": index, "files": files}
        entry.update(summary)
        doc["iterations"].append(entry)
        doc["pending"] = None
        self._write_index(run_id, doc)

    def set_terminated(self, run_id: str, reason: str, error: str | None = None) -> None:
        doc = self.read_index(run_id)
        doc["terminated_by"] = reason
        doc["error"] = error
        self._write_index(run_id, doc)

    # -- loading ---------------------------------------------------------------

    def _verified_read(self, run_id: str, index: int, rel: str, digest: str) -> bytes:
        path = self.run_dir(run_id) / "iterations" / str(index) / rel
        if not path.exists():
            raise CorruptSession(f"{run_id}: iteration {index} file {rel!r} is missing")
        data = path.read_bytes()
        if file_digest(data) != digest:
            raise CorruptSession(f"{run_id}: iteration {index} file {rel!r} digest mismatch")
        return data

    def load(self, run_id: str) -> RunSession:
        """Reconstruct a RunSession; digest mismatches raise CorruptSession."""
        doc = self.read_index(run_id)
        root = self.run_dir(run_id)
        config = RunConfig.from_dict(json.loads((root / "config.json").read_text("utf-8")))
        caption = ImageCaption.from_dict(json.loads((root / "caption.json").read_text("utf-8")))
        manifest = LayerManifest.from_json((root / "manifest.json").read_text("utf-8"))
        dataset = load_dataset(root / "data", manifest)
        inspiration = (root / "inspiration.png").read_bytes()

        iterations: list[IterationRecord] = []
        for entry in doc.get("iterations", []):
            k = entry["index"]
            files = entry["files"]
            sheet = parse_stylesheet(
                self._verified_read(run_id, k, "stylesheet.json", files["stylesheet.json"]).decode("utf-8")
            )
            style_doc = json.loads(
                self._verified_read(run_id, k, "style.json", files["style.json"]).decode("utf-8")
            )
            verdict = parse_reviewer_reply(
                self._verified_read(run_id, k, "review.json", files["review.json"]).decode("utf-8")
            )
            metrics_doc = json.loads(
                self._verified_read(run_id, k, "metrics.json", files["metrics.json"]).decode("utf-8")
            )
            for rel, digest in files.items():
                if rel not in ("stylesheet.json", "style.json", "review.json", "metrics.json"):
                    self._verified_read(run_id, k, rel, digest)
            iterations.append(
                IterationRecord(
                    index=k,
                    stylesheet=sheet,
                    compiled=CompiledStyle(style_doc, derive_layer_index(sheet)),
                    icons=dict(entry.get("icons", {})),
                    rendered_digest=entry.get("rendered", files.get("map.png", "")),
                    verdict=verdict,
                    similarity=SimilarityScore(
                        metrics_doc["similarity"], metrics_doc["bins"], JOINT
                    ),
                    similarity_marginal=metrics_doc.get("similarity_marginal", 0.0),
                    lint_warnings=tuple(
                        LintWarning(w["code"], w["message"]) for w in metrics_doc.get("warnings", [])
                    ),
                )
            )

        return RunSession(
            run_id=run_id,
            inspiration=inspiration,
            caption=caption,
            dataset=dataset,
            manifest=manifest,
            config=config,
            template_hashes=dict(doc.get("template_hashes", {})),
            iterations=iterations,
            terminated_by=doc.get("terminated_by"),
            error=doc.get("error"),
        )


def load_session(runs_dir: str | Path, run_id: str) -> RunSession:
    return SessionStore(runs_dir).load(run_id)
