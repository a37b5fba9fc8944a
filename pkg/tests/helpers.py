"""Shared builders for tests: manifests, sheets, datasets, fake transports."""

from __future__ import annotations

import hashlib
import io
import json
import math
from pathlib import Path

from PIL import Image

from cartoforge.compiler import layer_key
from cartoforge.dataset import build_dataset
from cartoforge.stylesheet import (
    BackgroundStyle,
    FillStyle,
    IconSpec,
    LabelStyle,
    LayerManifest,
    LineStyle,
    ReviewSuggestion,
    ReviewVerdict,
    StyleSheet,
)

DATA_DIR = Path(__file__).parent / "data"

NEIGHBORHOOD_MANIFEST = LayerManifest(
    icon_elements=("Oriental pearl tower", "Metro station"),
    label_elements=(
        "Natural landscape",
        "Cultural landscape",
        "Primary road",
        "Secondary road",
        "Tertiary road",
        "Street road",
    ),
    line_elements=("Ferry", "Primary road", "Secondary road", "Tertiary road", "Street", "Pedestrian"),
    fill_elements=("Park", "Grass", "Hospital", "School", "Commercial area", "Water"),
)

# The adjustments the reviewer proposed for the warm-palette run: element,
# category, and the exact replacement values.
WARM_PALETTE_SUGGESTIONS = [
    ReviewSuggestion(
        "Natural landscape", "label",
        {"text-color": "#6b8e23", "text-halo-color": "#faf3d3"},
        "earthy text with a light halo",
    ),
    ReviewSuggestion(
        "Primary road", "label",
        {"text-color": "#b74e3e", "text-halo-color": "#faf3d3"},
        "muted terracotta",
    ),
    ReviewSuggestion(
        "Primary road", "line",
        {"line-color": "#b74e3e", "line-opacity": 0.9},
        "soften the road color",
    ),
    ReviewSuggestion(
        "Street", "line",
        {"line-color": "#e3b55a", "line-opacity": 0.8},
        "lighten toward the background",
    ),
    ReviewSuggestion(
        "Park", "fill",
        {"fill-color": "#91a76f", "fill-opacity": 0.7, "fill-outline-color": "#6b8e23"},
        "muted organic green",
    ),
    ReviewSuggestion(
        "Water", "fill",
        {"fill-color": "#afcde7", "fill-opacity": 0.9, "fill-outline-color": "#87b0d9"},
        "softer pastel blue",
    ),
    ReviewSuggestion(
        "background", "background",
        {"background-color": "#faf3d3"},
        "warm canvas-like background",
    ),
]


def color_for(name: str, salt: str = "") -> str:
    return "#" + hashlib.sha256(f"{name}|{salt}".encode()).hexdigest()[:6]


def complete_sheet(manifest: LayerManifest, salt: str = "") -> StyleSheet:
    """Deterministic sheet covering every manifest element."""
    return StyleSheet(
        reasoning=f"test sheet {salt}",
        icons={
            n: IconSpec("icon", f"a simple {n.lower()} symbol") for n in manifest.icon_elements
        },
        labels={
            n: LabelStyle("label", color_for(n, "t" + salt), color_for(n, "h" + salt))
            for n in manifest.label_elements
        },
        lines={
            n: LineStyle("line", 0.9, color_for(n, "l" + salt)) for n in manifest.line_elements
        },
        fills={
            n: FillStyle("fill", 0.8, color_for(n, "f" + salt), color_for(n, "o" + salt))
            for n in manifest.fill_elements
        },
        background=BackgroundStyle("bg", color_for("background", salt)),
    )


def sunflowers_lines_text() -> str:
    return (DATA_DIR / "sunflowers_lines.json").read_text("utf-8")


# --- images ------------------------------------------------------------------

def solid_png(color: tuple[int, int, int], width: int = 16, height: int = 16) -> bytes:
    img = Image.new("RGBA", (width, height), color + (255,))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def collage_png(colors: list[tuple[int, int, int]], swatch: int = 64) -> bytes:
    """Flat 2x2 collage of four colors."""
    assert len(colors) == 4
    img = Image.new("RGBA", (swatch * 2, swatch * 2))
    for i, color in enumerate(colors):
        x = (i % 2) * swatch
        y = (i // 2) * swatch
        img.paste(color + (255,), (x, y, x + swatch, y + swatch))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def hex_rgb(color: str) -> tuple[int, int, int]:
    return (int(color[1:3], 16), int(color[3:5], 16), int(color[5:7], 16))


def composite_over(fg: str, alpha: float, bg: str) -> tuple[int, int, int]:
    """Source-over of a flat color at an opacity, mirroring the renderer math."""
    f, b = hex_rgb(fg), hex_rgb(bg)
    return tuple(int(math.floor(f[i] * alpha + b[i] * (1.0 - alpha) + 0.5)) for i in range(3))


# --- geometry ----------------------------------------------------------------

def rect_polygon(x0: float, y0: float, x1: float, y1: float) -> dict:
    return {
        "type": "Polygon",
        "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
    }


def feature(geometry: dict, **properties) -> dict:
    return {"type": "Feature", "properties": properties, "geometry": geometry}


def collection(*features: dict) -> dict:
    return {"type": "FeatureCollection", "features": list(features)}


def empty_dataset(bg_manifest: LayerManifest | None = None):
    """One empty line layer over a unit bbox: background-only rendering."""
    manifest = bg_manifest or LayerManifest(line_elements=("Road",))
    layers = {layer_key("line", n): collection() for n in manifest.line_elements}
    return build_dataset(manifest, layers, (0.0, 0.0, 1.0, 1.0))


# --- convergence scenario ------------------------------------------------------

SCENARIO_MANIFEST = LayerManifest(
    label_elements=("Natural landscape", "Primary road"),
    line_elements=("Primary road", "Street"),
    fill_elements=("Park", "Water"),
)


def scenario_initial_sheet() -> StyleSheet:
    """Deliberately mismatched neon palette."""
    return StyleSheet(
        reasoning="initial mismatched palette",
        labels={
            "Natural landscape": LabelStyle("", "#39ff14", "#ff006e"),
            "Primary road": LabelStyle("", "#00f0ff", "#ff006e"),
        },
        lines={
            "Primary road": LineStyle("", 1.0, "#00ffff"),
            "Street": LineStyle("", 0.8, "#ff0080"),
        },
        fills={
            "Park": FillStyle("", 0.7, "#ff00ff", "#ff44ff"),
            "Water": FillStyle("", 0.9, "#00ff00", "#44ff44"),
        },
        background=BackgroundStyle("", "#1a1a2e"),
    )


def scenario_dataset():
    park = collection(feature(rect_polygon(0.03, 0.25, 0.47, 0.80)))
    water = collection(feature(rect_polygon(0.53, 0.25, 0.97, 0.80)))
    primary = collection(
        feature({"type": "LineString", "coordinates": [[0.02, 0.12], [0.98, 0.12]]})
    )
    street = collection(
        feature({"type": "LineString", "coordinates": [[0.02, 0.88], [0.98, 0.88]]})
    )
    labels = {
        layer_key("label", "Natural landscape"): collection(
            feature({"type": "Point", "coordinates": [0.25, 0.52]}, name="Grove")
        ),
        layer_key("label", "Primary road"): collection(
            feature({"type": "Point", "coordinates": [0.5, 0.05]}, name="Main")
        ),
    }
    layers = {
        layer_key("fill", "Park"): park,
        layer_key("fill", "Water"): water,
        layer_key("line", "Primary road"): primary,
        layer_key("line", "Street"): street,
        **labels,
    }
    return build_dataset(SCENARIO_MANIFEST, layers, (0.0, 0.0, 1.0, 1.0))


def scenario_verdicts() -> list[ReviewVerdict]:
    """The warm-palette adjustments spread over three revision rounds."""
    rows = WARM_PALETTE_SUGGESTIONS
    return [
        ReviewVerdict("Revise", (rows[6],), "fix the background first"),
        ReviewVerdict("Revise", (rows[4], rows[5]), "retint the large fills"),
        ReviewVerdict("Revise", (rows[2], rows[3], rows[0], rows[1]), "retint roads and labels"),
        ReviewVerdict("Accept", (), "palette matches"),
    ]


def scenario_collage() -> bytes:
    """Flat 4-swatch collage of the final palette as it renders on the map."""
    bg = "#faf3d3"
    swatches = [
        hex_rgb(bg),
        composite_over("#afcde7", 0.9, bg),  # water over background
        composite_over("#91a76f", 0.7, bg),  # park over background
        composite_over("#b74e3e", 0.9, bg),  # primary road over background
    ]
    return collage_png(swatches, swatch=64)


# --- fake transport -------------------------------------------------------------

def chat_body(text: str) -> str:
    return json.dumps({"choices": [{"message": {"content": text}}]})


def image_body(png: bytes) -> str:
    import base64

    return json.dumps({"data": [{"b64_json": base64.b64encode(png).decode("ascii")}]})


class FakeTransport:
    """Canned HTTP bodies keyed by endpoint URL; records every payload."""

    def __init__(self, replies: dict[str, list[tuple[int, str]]]):
        self.replies = {url: list(queue) for url, queue in replies.items()}
        self.requests: list[tuple[str, dict]] = []

    def __call__(self, url: str, headers: dict, payload: dict, timeout: float):
        self.requests.append((url, payload))
        queue = self.replies[url]
        status, body = queue.pop(0) if len(queue) > 1 else queue[0]
        return status, body

    def payloads_for(self, url: str) -> list[dict]:
        return [p for u, p in self.requests if u == url]
