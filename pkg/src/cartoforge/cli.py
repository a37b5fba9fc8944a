"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 runtime error. ``--json`` switches
stdout to machine-readable JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from PIL import Image

from . import gateway
from .compiler import SourceConfig, build_sprite, compile as compile_style, validate_style
from .dataset import load_dataset
from .errors import CartoforgeError
from .metrics import JOINT, MARGINAL, cosine_similarity, distinctness_lint, histogram
from .orchestrator import MllmCaptionSource, MllmDesigner, run_transfer
from .prompts import load_role_profiles
from .renderer import Viewport, render
from .session import RunConfig, SessionStore
from .stylesheet import LayerManifest, parse_stylesheet, serialize_stylesheet, slugify


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _emit(payload: dict, as_json: bool, text_lines: list[str] | None = None) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        for line in text_lines if text_lines is not None else [f"{k}: {v}" for k, v in payload.items()]:
            print(line)


def _load_manifest(path: str) -> LayerManifest:
    return LayerManifest.from_json(Path(path).read_text("utf-8"))


def _load_sheet(path: str):
    return parse_stylesheet(Path(path).read_text("utf-8"))


def _load_icons(icons_dir: str | None, manifest: LayerManifest) -> dict[str, bytes]:
    icons: dict[str, bytes] = {}
    if not icons_dir:
        return icons
    root = Path(icons_dir)
    for element in manifest.icon_elements:
        path = root / f"{slugify(element)}.png"
        if path.exists():
            icons[element] = path.read_bytes()
    return icons


def _replay_config(args) -> RunConfig:
    config = RunConfig.from_dict(json.loads(Path(args.config).read_text("utf-8"))) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "replay", None):
        config.providers = gateway.replay_providers_from_fixture(args.replay)
        config.record_fixture = None  # never clobber the fixture being replayed
    if getattr(args, "run_id", None):
        config.run_id = args.run_id
    return config


def _provider_from(config: RunConfig, role: str):
    cfg = config.providers.get(role) or config.providers.get("default")
    if cfg is None:
        raise CartoforgeError(
            f"no provider configured for {role!r}; pass --replay or a config with providers"
        )
    return gateway.make_provider(cfg)


# --- subcommand implementations -------------------------------------------------

def _cmd_run(args) -> int:
    config = _replay_config(args)
    manifest = _load_manifest(args.manifest)
    dataset = load_dataset(args.data, manifest)
    inspiration = Path(args.inspiration).read_bytes()
    store = SessionStore(args.out)
    session = run_transfer(inspiration, dataset, config, store)
    payload = {
        "run_id": session.run_id,
        "iterations": len(session.iterations),
        "terminated_by": session.terminated_by,
        "final_similarity": session.iterations[-1].similarity.value if session.iterations else None,
        "out": str(store.run_dir(session.run_id)),
    }
    _emit(payload, args.json)
    return 0


def _cmd_caption(args) -> int:
    config = _replay_config(args)
    profiles = load_role_profiles()
    provider = _provider_from(config, "appreciator")
    caption = MllmCaptionSource(provider, profiles["appreciator"]).caption(
        Path(args.inspiration).read_bytes()
    )
    payload = caption.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    _emit(payload, args.json, [caption.raw])
    return 0


def _cmd_design(args) -> int:
    config = _replay_config(args)
    manifest = _load_manifest(args.manifest)
    profiles = load_role_profiles()
    inspiration = Path(args.inspiration).read_bytes()
    if args.caption:
        from .prompts import ImageCaption

        caption = ImageCaption.from_dict(json.loads(Path(args.caption).read_text("utf-8")))
    else:
        caption = MllmCaptionSource(
            _provider_from(config, "appreciator"), profiles["appreciator"]
        ).caption(inspiration)
    designer = MllmDesigner(_provider_from(config, "style_designer"), profiles["style_designer"], manifest)
    sheet = designer.initial(inspiration, caption)
    text = serialize_stylesheet(sheet)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text.rstrip("\n"))
    return 0


def _cmd_compile(args) -> int:
    manifest = _load_manifest(args.manifest)
    sheet = _load_sheet(args.stylesheet)
    if args.data:
        dataset = load_dataset(args.data, manifest)
        src = SourceConfig(inline_data=dict(dataset.layers))
    elif args.source_url:
        src = SourceConfig(kind="vector", url=args.source_url)
    else:
        raise CartoforgeError("compile needs --data (inline sources) or --source-url (vector)")
    compiled = compile_style(sheet, manifest, src, label_attribute=args.label_attribute)
    diagnostics = validate_style(compiled.document)
    if diagnostics:  # compile output must self-validate
        for d in diagnostics:
            print(str(d), file=sys.stderr)
        return 2
    Path(args.out).write_text(compiled.to_json(), encoding="utf-8")
    sprite_files = []
    icons = _load_icons(args.icons, manifest)
    if icons:
        sprite = build_sprite(icons)
        prefix = Path(args.sprite_out or str(Path(args.out).with_name("sprite")))
        prefix.with_suffix(".png").write_bytes(sprite.atlas_png())
        prefix.with_suffix(".json").write_text(sprite.index_json(), encoding="utf-8")
        sprite_files = [str(prefix.with_suffix(".png")), str(prefix.with_suffix(".json"))]
    _emit(
        {"style": args.out, "layers": len(compiled.document["layers"]), "sprite": sprite_files},
        args.json,
        [f"wrote {args.out} ({len(compiled.document['layers'])} layers)"],
    )
    return 0


def _cmd_render(args) -> int:
    manifest = _load_manifest(args.manifest)
    sheet = _load_sheet(args.stylesheet)
    dataset = load_dataset(args.data, manifest)
    icons = _load_icons(args.icons, manifest)
    rendered = render(dataset, sheet, icons, Viewport(args.width, args.height), args.label_attribute)
    Path(args.out).write_bytes(rendered.png_bytes())
    _emit(
        {"out": args.out, "width": rendered.width, "height": rendered.height, "digest": rendered.digest()},
        args.json,
        [f"wrote {args.out} ({rendered.width}x{rendered.height})"],
    )
    return 0


def _cmd_evaluate(args) -> int:
    mode = MARGINAL if args.marginal else JOINT
    image_a = Image.open(args.image_a)
    image_b = Image.open(args.image_b)
    hist_a = histogram(image_a, args.bins, mode)
    hist_b = histogram(image_b, args.bins, mode)
    score = cosine_similarity(hist_a, hist_b)
    payload = {
        "bins": args.bins,
        "mode": mode,
        "similarity": score.value,
        "histogram_digest_a": hist_a.digest(),
        "histogram_digest_b": hist_b.digest(),
        "warnings": [],
    }
    _emit(payload, args.json, [f"similarity (B={args.bins}, {mode}): {score.value:.6f}"])
    return 0


def _cmd_lint(args) -> int:
    sheet = _load_sheet(args.stylesheet)
    warnings = distinctness_lint(sheet, tau=args.tau, min_contrast=args.min_contrast)
    payload = {"warnings": [w.to_dict() for w in warnings]}
    _emit(payload, args.json, [w.message for w in warnings] or ["no warnings"])
    return 0


def _cmd_validate(args) -> int:
    document = json.loads(Path(args.style).read_text("utf-8"))
    diagnostics = validate_style(document)
    payload = {"valid": not diagnostics, "diagnostics": [str(d) for d in diagnostics]}
    _emit(payload, args.json, [str(d) for d in diagnostics] or ["valid"])
    return 0 if not diagnostics else 2


def _cmd_serve(args) -> int:
    from .server import serve

    serve(args.port, args.runs, host=args.host, ui_dir=args.ui)
    return 0


def _cmd_report(args) -> int:
    from .report import write_report

    run_dir = Path(args.run)
    if not (run_dir / "session.json").exists():
        raise CartoforgeError(f"{run_dir} is not a run directory (no session.json)")
    summary = write_report(run_dir, args.out or run_dir / "report")
    _emit(summary, args.json)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="cartoforge", description="Map style transfer and evaluation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="emit machine-readable JSON to stdout")

    p = sub.add_parser("run", help="execute the full transfer-evaluation loop")
    p.add_argument("--inspiration", required=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--replay", help="fixture file for replayed provider calls")
    p.add_argument("--out", required=True, help="runs directory")
    p.add_argument("--run-id")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("replay", help="run the loop from a recorded fixture")
    p.add_argument("--fixture", required=True)
    p.add_argument("--inspiration", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--run-id")
    common(p)
    p.set_defaults(func=lambda args: _cmd_run(_as_run_args(args)))

    p = sub.add_parser("caption", help="describe an inspiration image")
    p.add_argument("--inspiration", required=True)
    p.add_argument("--config")
    p.add_argument("--replay")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=_cmd_caption)

    p = sub.add_parser("design", help="produce an initial stylesheet")
    p.add_argument("--inspiration", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--caption", help="caption JSON from the caption command")
    p.add_argument("--config")
    p.add_argument("--replay")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("compile", help="compile a stylesheet to a style document")
    p.add_argument("--stylesheet", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--data", help="dataset directory for inline GeoJSON sources")
    p.add_argument("--source-url", help="vector tileset URL instead of inline data")
    p.add_argument("--icons", help="directory of <slug>.png icon images")
    p.add_argument("--sprite-out", help="sprite file prefix (default: next to --out)")
    p.add_argument("--label-attribute", default="name")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("render", help="rasterize a dataset under a stylesheet")
    p.add_argument("--stylesheet", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--icons")
    p.add_argument("--width", type=int, default=1024)
    p.add_argument("--height", type=int, default=768)
    p.add_argument("--label-attribute", default="name")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("evaluate", help="color-distribution similarity of two images")
    p.add_argument("--image-a", required=True)
    p.add_argument("--image-b", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--marginal", action="store_true", help="three 1-D histograms instead of joint")
    common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("lint", help="figure-ground distinctness checks")
    p.add_argument("--stylesheet", required=True)
    p.add_argument("--tau", type=float, default=0.08)
    p.add_argument("--min-contrast", type=float, default=1.5)
    common(p)
    p.set_defaults(func=_cmd_lint)

    p = sub.add_parser("validate", help="structural check of a style document")
    p.add_argument("--style", required=True)
    common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("serve", help="HTTP API over a runs directory")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--runs", required=True)
    p.add_argument("--ui", help="static studio UI directory to serve at /")
    common(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("report", help="figures and CSV metrics for a persisted run")
    p.add_argument("--run", required=True, help="one run directory (runs/<id>)")
    p.add_argument("--out", help="report output directory (default <run>/report)")
    common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def _as_run_args(args) -> argparse.Namespace:
    return argparse.Namespace(
        inspiration=args.inspiration,
        data=args.data,
        manifest=args.manifest,
        config=args.config,
        replay=args.fixture,
        out=args.out,
        run_id=args.run_id,
        json=args.json,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except CartoforgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
