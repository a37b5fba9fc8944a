"""Deterministic stylesheet-to-style-document compiler and sprite packer.

Compiles the stylesheet IR plus a layer manifest into a Mapbox Style
Specification v8 document. Layer ids are ``<category>-<slug>`` (element
names may repeat across categories); z-order is fixed: background, fills,
lines, icon symbols, label symbols.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

from PIL import Image, UnidentifiedImageError

from .errors import IncompleteSheet, SlugCollision, SourceBindingMissing, UndecodableImage
from .stylesheet import (
    CATEGORY_BACKGROUND,
    CATEGORY_FILL,
    CATEGORY_ICON,
    CATEGORY_LABEL,
    CATEGORY_LINE,
    LayerManifest,
    StyleSheet,
    slugify,
    validate_completeness,
)

SOURCE_INLINE = "inline-geojson"
SOURCE_VECTOR = "vector"

ICON_SIZE = 64
SPRITE_COLUMNS = 8
SPRITE_WIDTH = SPRITE_COLUMNS * ICON_SIZE  # 512

DEFAULT_LABEL_ATTRIBUTE = "name"


def layer_key(category: str, element: str) -> str:
    return f"{category}-{slugify(element)}"


@dataclass
class SourceConfig:
    """Binds manifest elements to data sources.

    ``inline-geojson`` embeds one GeoJSON source per element (keyed by layer
    key) directly in the style document; ``vector`` references a tileset URL
    and maps each element to a source-layer name (defaulting to its slug).
    """

    source_id: str = "cartoforge"
    kind: str = SOURCE_INLINE
    url: str | None = None
    source_layers: dict[str, str] = field(default_factory=dict)
    inline_data: dict[str, dict] = field(default_factory=dict)  # layer key -> FeatureCollection

    def source_layer_for(self, element: str) -> str:
        return self.source_layers.get(element, slugify(element))


@dataclass
class CompiledStyle:
    document: dict
    layer_index: dict[tuple[str, str], str]  # (category, element) -> layer id

    def to_json(self) -> str:
        return json.dumps(self.document, indent=2, ensure_ascii=False) + "\n"


@dataclass
class SpriteBundle:
    atlas: Image.Image
    index: dict[str, dict]

    def index_json(self) -> str:
        return json.dumps(self.index, indent=2, ensure_ascii=False) + "\n"

    def atlas_png(self) -> bytes:
        buf = io.BytesIO()
        self.atlas.save(buf, format="PNG")
        return buf.getvalue()


def compile(
    sheet: StyleSheet,
    manifest: LayerManifest,
    src: SourceConfig,
    label_attribute: str = DEFAULT_LABEL_ATTRIBUTE,
    sprite_url: str | None = None,
) -> CompiledStyle:
    """Compile a complete stylesheet into a Style Spec v8 document.

    Colors and opacities are copied bit-exact; equal inputs produce
    byte-identical serialized documents.
    """
    report = validate_completeness(sheet, manifest)
    if not report.is_complete:
        raise IncompleteSheet(
            f"sheet does not cover the manifest: missing={list(report.missing)} "
            f"extraneous={list(report.extraneous)}"
        )

    sources: dict[str, dict] = {}
    layers: list[dict] = []
    layer_index: dict[tuple[str, str], str] = {}
    seen_ids: set[str] = set()

    def bind_source(category: str, element: str, layer: dict) -> None:
        key = layer_key(category, element)
        if src.kind == SOURCE_INLINE:
            if key not in src.inline_data:
                raise SourceBindingMissing(f"no inline data for {key!r}")
            sources[key] = {"type": "geojson", "data": src.inline_data[key]}
            layer["source"] = key
        elif src.kind == SOURCE_VECTOR:
            if not src.url:
                raise SourceBindingMissing("vector source config has no url")
            sources.setdefault(src.source_id, {"type": "vector", "url": src.url})
            layer["source"] = src.source_id
            layer["source-layer"] = src.source_layer_for(element)
        else:
            raise SourceBindingMissing(f"unknown source kind {src.kind!r}")

    def add_layer(category: str, element: str, layer: dict) -> None:
        if layer["id"] in seen_ids:
            raise SlugCollision(f"layer id {layer['id']!r} produced twice")
        seen_ids.add(layer["id"])
        layers.append(layer)
        layer_index[(category, element)] = layer["id"]

    layers.append(
        {
            "id": "background",
            "type": "background",
            "paint": {"background-color": sheet.background.background_color},
        }
    )
    seen_ids.add("background")

    for element, style in sheet.fills.items():
        layer = {"id": layer_key(CATEGORY_FILL, element), "type": "fill"}
        bind_source(CATEGORY_FILL, element, layer)
        layer["paint"] = {
            "fill-color": style.fill_color,
            "fill-opacity": style.fill_opacity,
            "fill-outline-color": style.fill_outline_color,
        }
        add_layer(CATEGORY_FILL, element, layer)

    for element, style in sheet.lines.items():
        layer = {"id": layer_key(CATEGORY_LINE, element), "type": "line"}
        bind_source(CATEGORY_LINE, element, layer)
        layer["paint"] = {"line-color": style.line_color, "line-opacity": style.line_opacity}
        add_layer(CATEGORY_LINE, element, layer)

    icon_slugs: dict[str, str] = {}
    for element in sheet.icons:
        slug = slugify(element)
        if slug in icon_slugs.values():
            raise SlugCollision(f"icon slug {slug!r} used by more than one element")
        icon_slugs[element] = slug
        layer = {"id": layer_key(CATEGORY_ICON, element), "type": "symbol"}
        bind_source(CATEGORY_ICON, element, layer)
        layer["layout"] = {"icon-image": slug}
        add_layer(CATEGORY_ICON, element, layer)

    for element, style in sheet.labels.items():
        layer = {"id": layer_key(CATEGORY_LABEL, element), "type": "symbol"}
        bind_source(CATEGORY_LABEL, element, layer)
        layer["layout"] = {"text-field": ["get", label_attribute]}
        layer["paint"] = {
            "text-color": style.text_color,
            "text-halo-color": style.text_halo_color,
            "text-halo-width": 1,
        }
        add_layer(CATEGORY_LABEL, element, layer)

    document: dict = {"version": 8, "name": src.source_id}
    if sprite_url:
        document["sprite"] = sprite_url
    document["sources"] = sources
    document["layers"] = layers
    return CompiledStyle(document, layer_index)


# --- structural validation ------------------------------------------------------

_PAINT_PROPS = {
    "background": {"background-color", "background-opacity", "background-pattern"},
    "fill": {
        "fill-color",
        "fill-opacity",
        "fill-outline-color",
        "fill-antialias",
        "fill-translate",
        "fill-translate-anchor",
        "fill-pattern",
    },
    "line": {
        "line-color",
        "line-opacity",
        "line-width",
        "line-blur",
        "line-dasharray",
        "line-gap-width",
        "line-offset",
        "line-translate",
        "line-translate-anchor",
        "line-pattern",
        "line-gradient",
    },
    "symbol": {
        "icon-color",
        "icon-opacity",
        "icon-halo-color",
        "icon-halo-width",
        "icon-halo-blur",
        "icon-translate",
        "icon-translate-anchor",
        "text-color",
        "text-opacity",
        "text-halo-color",
        "text-halo-width",
        "text-halo-blur",
        "text-translate",
        "text-translate-anchor",
    },
}

_LAYOUT_PROPS = {
    "background": {"visibility"},
    "fill": {"visibility", "fill-sort-key"},
    "line": {
        "visibility",
        "line-cap",
        "line-join",
        "line-miter-limit",
        "line-round-limit",
        "line-sort-key",
    },
    "symbol": {
        "visibility",
        "symbol-placement",
        "symbol-spacing",
        "symbol-sort-key",
        "symbol-avoid-edges",
        "symbol-z-order",
        "icon-image",
        "icon-size",
        "icon-anchor",
        "icon-offset",
        "icon-rotate",
        "icon-rotation-alignment",
        "icon-allow-overlap",
        "icon-ignore-placement",
        "icon-optional",
        "icon-padding",
        "icon-keep-upright",
        "icon-text-fit",
        "icon-text-fit-padding",
        "icon-pitch-alignment",
        "text-field",
        "text-font",
        "text-size",
        "text-anchor",
        "text-offset",
        "text-justify",
        "text-letter-spacing",
        "text-line-height",
        "text-max-width",
        "text-max-angle",
        "text-padding",
        "text-rotate",
        "text-transform",
        "text-allow-overlap",
        "text-ignore-placement",
        "text-optional",
        "text-keep-upright",
        "text-writing-mode",
        "text-rotation-alignment",
        "text-pitch-alignment",
        "text-variable-anchor",
        "text-radial-offset",
    },
}

_COLOR_PROPS = {
    "background-color",
    "fill-color",
    "fill-outline-color",
    "line-color",
    "icon-color",
    "icon-halo-color",
    "text-color",
    "text-halo-color",
}

_OPACITY_PROPS = {"background-opacity", "fill-opacity", "line-opacity", "icon-opacity", "text-opacity"}

_COLOR_FORMS = ("#",)  # hex; rgb()/rgba()/hsl()/hsla() also accepted below


@dataclass(frozen=True)
class Diagnostic:
    code: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.where}: {self.message}"


def _color_ok(value: object) -> bool:
    if not isinstance(value, str):
        return True  # expressions are out of validation scope
    s = value.strip().lower()
    if s.startswith("#"):
        body = s[1:]
        return len(body) in (3, 4, 6, 8) and all(c in "0123456789abcdef" for c in body)
    return s.startswith(("rgb(", "rgba(", "hsl(", "hsla(")) and s.endswith(")")


def validate_style(document: object) -> list[Diagnostic]:
    """Structural check of a style document; empty list means valid."""
    out: list[Diagnostic] = []
    if not isinstance(document, dict):
        return [Diagnostic("NotAnObject", "$", "style document must be a JSON object")]
    if document.get("version") != 8:
        out.append(Diagnostic("BadVersion", "$.version", f"expected 8, got {document.get('version')!r}"))
    for key in ("sources", "layers"):
        if key not in document:
            out.append(Diagnostic("MissingRootKey", f"$.{key}", f"document has no {key!r}"))
    layers = document.get("layers", [])
    if not isinstance(layers, list):
        return out + [Diagnostic("BadLayers", "$.layers", "layers must be a list")]

    seen_ids: set[str] = set()
    for i, layer in enumerate(layers):
        where = f"$.layers[{i}]"
        if not isinstance(layer, dict):
            out.append(Diagnostic("BadLayer", where, "layer must be an object"))
            continue
        layer_id = layer.get("id")
        if not isinstance(layer_id, str) or not layer_id:
            out.append(Diagnostic("MissingId", where, "layer has no id"))
        elif layer_id in seen_ids:
            out.append(Diagnostic("DuplicateId", where, f"layer id {layer_id!r} repeats"))
        else:
            seen_ids.add(layer_id)

        layer_type = layer.get("type")
        if layer_type not in _PAINT_PROPS:
            out.append(Diagnostic("UnknownLayerType", where, f"unknown layer type {layer_type!r}"))
            continue
        if layer_type != "background" and "source" not in layer:
            out.append(Diagnostic("MissingSource", where, f"{layer_type} layer needs a source"))

        for section, table in (("paint", _PAINT_PROPS), ("layout", _LAYOUT_PROPS)):
            props = layer.get(section, {})
            if not isinstance(props, dict):
                out.append(Diagnostic("BadSection", f"{where}.{section}", f"{section} must be an object"))
                continue
            legal = table[layer_type]
            for name, value in props.items():
                if name not in legal:
                    out.append(
                        Diagnostic("UnknownProperty", f"{where}.{section}.{name}", f"not a {layer_type} {section} property")
                    )
                    continue
                if name in _COLOR_PROPS and not _color_ok(value):
                    out.append(Diagnostic("BadColor", f"{where}.{section}.{name}", f"unparseable color {value!r}"))
                if name in _OPACITY_PROPS and isinstance(value, (int, float)) and not isinstance(value, bool):
                    if not 0.0 <= float(value) <= 1.0:
                        out.append(Diagnostic("BadOpacity", f"{where}.{section}.{name}", f"{value} outside [0, 1]"))
    return out


def match_layers_to_sheet(document: dict, sheet: StyleSheet) -> tuple[dict, list[Diagnostic]]:
    """Value-fidelity check for externally produced style documents.

    Every styled element must have a layer of the right type carrying the
    IR's values bit-exact; the background layer must come first. Returns the
    matched (category, element) -> layer id index plus diagnostics (empty
    means faithful).
    """
    out: list[Diagnostic] = []
    layers = document.get("layers", []) if isinstance(document, dict) else []
    index: dict[tuple[str, str], str] = {}
    unclaimed = list(range(len(layers)))

    def claim(predicate, what: str) -> dict | None:
        for i in unclaimed:
            layer = layers[i]
            if isinstance(layer, dict) and predicate(layer):
                unclaimed.remove(i)
                return layer
        out.append(Diagnostic("UnfaithfulValue", "$.layers", f"no layer carries {what}"))
        return None

    if not layers or layers[0].get("type") != "background":
        out.append(Diagnostic("BadZOrder", "$.layers[0]", "first layer must be the background"))
    bg = claim(
        lambda l: l.get("type") == "background"
        and l.get("paint", {}).get("background-color") == sheet.background.background_color,
        f"background {sheet.background.background_color}",
    )
    if bg:
        index[(CATEGORY_BACKGROUND, "background")] = bg.get("id", "")

    for element, style in sheet.fills.items():
        wanted = {
            "fill-color": style.fill_color,
            "fill-opacity": style.fill_opacity,
            "fill-outline-color": style.fill_outline_color,
        }
        layer = claim(
            lambda l, w=wanted: l.get("type") == "fill"
            and all(l.get("paint", {}).get(k) == v for k, v in w.items()),
            f"fill {element!r} {wanted}",
        )
        if layer:
            index[(CATEGORY_FILL, element)] = layer.get("id", "")
    for element, style in sheet.lines.items():
        wanted = {"line-color": style.line_color, "line-opacity": style.line_opacity}
        layer = claim(
            lambda l, w=wanted: l.get("type") == "line"
            and all(l.get("paint", {}).get(k) == v for k, v in w.items()),
            f"line {element!r} {wanted}",
        )
        if layer:
            index[(CATEGORY_LINE, element)] = layer.get("id", "")
    for element in sheet.icons:
        slug = slugify(element)
        layer = claim(
            lambda l, s=slug: l.get("type") == "symbol" and l.get("layout", {}).get("icon-image") == s,
            f"icon {element!r} with icon-image {slug!r}",
        )
        if layer:
            index[(CATEGORY_ICON, element)] = layer.get("id", "")
    for element, style in sheet.labels.items():
        wanted = {"text-color": style.text_color, "text-halo-color": style.text_halo_color}
        layer = claim(
            lambda l, w=wanted: l.get("type") == "symbol"
            and "text-field" in l.get("layout", {})
            and all(l.get("paint", {}).get(k) == v for k, v in w.items()),
            f"label {element!r} {wanted}",
        )
        if layer:
            index[(CATEGORY_LABEL, element)] = layer.get("id", "")
    return index, out


# --- sprite packing ----------------------------------------------------------------

def build_sprite(icons: dict[str, bytes]) -> SpriteBundle:
    """Shelf-pack icons into an atlas: 64x64 cells, rows of 8, width 512.

    Index entries are keyed by icon slug with pixelRatio 1.
    """
    resized: dict[str, Image.Image] = {}
    for name, data in icons.items():
        try:
            img = Image.open(io.BytesIO(data))
            img.load()
        except (UnidentifiedImageError, OSError) as e:
            raise UndecodableImage(f"icon {name!r}: {e}") from e
        resized[slugify(name)] = img.convert("RGBA").resize((ICON_SIZE, ICON_SIZE), Image.NEAREST)
    if len(resized) != len(icons):
        raise SlugCollision("two icon names share a slug")

    rows = max(1, -(-len(resized) // SPRITE_COLUMNS))
    atlas = Image.new("RGBA", (SPRITE_WIDTH, rows * ICON_SIZE), (0, 0, 0, 0))
    index: dict[str, dict] = {}
    for i, (slug, img) in enumerate(resized.items()):
        x = (i % SPRITE_COLUMNS) * ICON_SIZE
        y = (i // SPRITE_COLUMNS) * ICON_SIZE
        atlas.paste(img, (x, y))
        index[slug] = {"x": x, "y": y, "width": ICON_SIZE, "height": ICON_SIZE, "pixelRatio": 1}
    return SpriteBundle(atlas, index)
