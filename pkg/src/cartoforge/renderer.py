"""Deterministic built-in rasterizer plus an adapter hook for external renderers.

The built-in renderer trades cartographic niceties (label collision,
road casings, antialiasing) for byte-exact reproducibility: the reviewer
and the color metrics only need a faithful colorimetric rendering.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .compiler import CompiledStyle, SpriteBundle
from .dataset import MapDataset, save_dataset
from .errors import (
    AdapterFailed,
    AdapterNotFound,
    BadOutputSize,
    EmptyViewport,
    IncompleteSheet,
    MissingIcon,
    UndecodableImage,
)
from .stylesheet import (
    CATEGORY_FILL,
    CATEGORY_ICON,
    CATEGORY_LABEL,
    CATEGORY_LINE,
    StyleSheet,
    serialize_stylesheet,
    validate_completeness,
)
from .font5x7 import text_mask

ICON_DRAW_SIZE = 32
LINE_HALF_WIDTH = 1.0  # 2 px strokes
_MAX_MERC_LAT = 85.05112877980659


@dataclass(frozen=True)
class Viewport:
    width_px: int
    height_px: int

    def __post_init__(self):
        if self.width_px < 64 or self.height_px < 64:
            raise EmptyViewport(f"viewport {self.width_px}x{self.height_px} below 64px minimum")


@dataclass
class RenderedMap:
    pixels: np.ndarray  # (H, W, 4) uint8
    provenance: str
    style_digest: str

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, "RGBA").save(buf, format="PNG")
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.png_bytes()).hexdigest()


class _Projection:
    """Web-mercator fit of a bbox into a viewport, aspect preserved."""

    def __init__(self, bbox: tuple[float, float, float, float], vp: Viewport):
        lon0, lat0, lon1, lat1 = bbox
        self.mx0, self.my0 = self._merc(lon0, lat0)
        mx1, my1 = self._merc(lon1, lat1)
        spans = (mx1 - self.mx0, my1 - self.my0)
        self.scale = min(vp.width_px / spans[0], vp.height_px / spans[1])
        self.ox = (vp.width_px - self.scale * spans[0]) / 2.0
        self.oy = (vp.height_px - self.scale * spans[1]) / 2.0
        self.height = vp.height_px

    @staticmethod
    def _merc(lon: float, lat: float) -> tuple[float, float]:
        lat = min(max(lat, -_MAX_MERC_LAT), _MAX_MERC_LAT)
        return math.radians(lon), math.log(math.tan(math.pi / 4.0 + math.radians(lat) / 2.0))

    def to_pixels(self, positions) -> np.ndarray:
        """Project an iterable of [lon, lat] to an (N, 2) pixel-coordinates array."""
        pts = np.asarray([p[:2] for p in positions], dtype=np.float64)
        lon = np.radians(pts[:, 0])
        lat = np.radians(np.clip(pts[:, 1], -_MAX_MERC_LAT, _MAX_MERC_LAT))
        my = np.log(np.tan(np.pi / 4.0 + lat / 2.0))
        x = (lon - self.mx0) * self.scale + self.ox
        y = self.height - ((my - self.my0) * self.scale + self.oy)
        return np.stack([x, y], axis=1)


def _hex_rgb(color: str) -> np.ndarray:
    return np.array(
        [int(color[1:3], 16), int(color[3:5], 16), int(color[5:7], 16)], dtype=np.float64
    )


def _composite(canvas: np.ndarray, mask: np.ndarray, color: str, alpha: float) -> None:
    """Source-over a flat color at the given opacity onto masked pixels."""
    if alpha <= 0.0 or not mask.any():
        return
    rgb = _hex_rgb(color)
    region = canvas[mask][:, :3].astype(np.float64)
    blended = np.floor(rgb * alpha + region * (1.0 - alpha) + 0.5).astype(np.uint8)
    patch = canvas[mask]
    patch[:, :3] = blended
    patch[:, 3] = 255
    canvas[mask] = patch


def _polygon_rings(geometry: dict) -> list[list]:
    gtype = geometry.get("type")
    if gtype == "Polygon":
        return list(geometry.get("coordinates", []))
    if gtype == "MultiPolygon":
        return [ring for polygon in geometry.get("coordinates", []) for ring in polygon]
    return []


def _line_paths(geometry: dict) -> list[list]:
    gtype = geometry.get("type")
    if gtype == "LineString":
        return [geometry.get("coordinates", [])]
    if gtype == "MultiLineString":
        return list(geometry.get("coordinates", []))
    return []


def _points(geometry: dict) -> list[list]:
    gtype = geometry.get("type")
    if gtype == "Point":
        return [geometry.get("coordinates")]
    if gtype == "MultiPoint":
        return list(geometry.get("coordinates", []))
    return []


def _even_odd_fill(rings: list[np.ndarray], width: int, height: int) -> np.ndarray:
    """Scanline even-odd polygon fill over pixel centers."""
    mask = np.zeros((height, width), dtype=bool)
    edges = []
    for ring in rings:
        n = len(ring)
        for i in range(n):
            p, q = ring[i], ring[(i + 1) % n]
            if p[1] != q[1]:
                edges.append((p[0], p[1], q[0], q[1]))
    if not edges:
        return mask
    e = np.asarray(edges, dtype=np.float64)
    ex1, ey1, ex2, ey2 = e[:, 0], e[:, 1], e[:, 2], e[:, 3]
    ymin, ymax = np.minimum(ey1, ey2), np.maximum(ey1, ey2)
    row0 = max(0, int(math.floor(ymin.min() - 0.5)))
    row1 = min(height - 1, int(math.ceil(ymax.max())))
    for y in range(row0, row1 + 1):
        yc = y + 0.5
        hit = (ymin <= yc) & (yc < ymax)
        if not hit.any():
            continue
        xs = np.sort(ex1[hit] + (yc - ey1[hit]) * (ex2[hit] - ex1[hit]) / (ey2[hit] - ey1[hit]))
        for a, b in zip(xs[0::2], xs[1::2]):
            x0 = max(0, int(math.ceil(a - 0.5)))
            x1 = min(width - 1, int(math.ceil(b - 0.5)) - 1)
            if x1 >= x0:
                mask[y, x0 : x1 + 1] = True
    return mask


def _stroke(paths: list[np.ndarray], width: int, height: int, radius: float, mask: np.ndarray) -> None:
    """Mark pixels whose center lies within radius of any path segment."""
    for path in paths:
        for i in range(len(path) - 1):
            ax, ay = path[i]
            bx, by = path[i + 1]
            x0 = max(0, int(math.floor(min(ax, bx) - radius - 1)))
            x1 = min(width - 1, int(math.ceil(max(ax, bx) + radius + 1)))
            y0 = max(0, int(math.floor(min(ay, by) - radius - 1)))
            y1 = min(height - 1, int(math.ceil(max(ay, by) + radius + 1)))
            if x1 < x0 or y1 < y0:
                continue
            ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
            cx, cy = xs + 0.5, ys + 0.5
            dx, dy = bx - ax, by - ay
            seg2 = dx * dx + dy * dy
            if seg2 == 0.0:
                d2 = (cx - ax) ** 2 + (cy - ay) ** 2
            else:
                t = np.clip(((cx - ax) * dx + (cy - ay) * dy) / seg2, 0.0, 1.0)
                d2 = (cx - (ax + t * dx)) ** 2 + (cy - (ay + t * dy)) ** 2
            mask[y0 : y1 + 1, x0 : x1 + 1] |= d2 <= radius * radius


def _bresenham(paths: list[np.ndarray], width: int, height: int, mask: np.ndarray) -> None:
    """Crisp 1-px segments (used for fill outlines)."""

    def plot(x: int, y: int) -> None:
        if 0 <= x < width and 0 <= y < height:
            mask[y, x] = True

    for path in paths:
        for i in range(len(path) - 1):
            x0, y0 = int(math.floor(path[i][0])), int(math.floor(path[i][1]))
            x1, y1 = int(math.floor(path[i + 1][0])), int(math.floor(path[i + 1][1]))
            dx, dy = abs(x1 - x0), -abs(y1 - y0)
            sx = 1 if x0 < x1 else -1
            sy = 1 if y0 < y1 else -1
            err = dx + dy
            while True:
                plot(x0, y0)
                if x0 == x1 and y0 == y1:
                    break
                e2 = 2 * err
                if e2 >= dy:
                    err += dy
                    x0 += sx
                if e2 <= dx:
                    err += dx
                    y0 += sy


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    out[1:, 1:] |= mask[:-1, :-1]
    out[1:, :-1] |= mask[:-1, 1:]
    out[:-1, 1:] |= mask[1:, :-1]
    out[:-1, :-1] |= mask[1:, 1:]
    return out


def _decode_icon(name: str, data: bytes) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError) as e:
        raise UndecodableImage(f"icon {name!r}: {e}") from e
    img = img.convert("RGBA").resize((ICON_DRAW_SIZE, ICON_DRAW_SIZE), Image.NEAREST)
    return np.asarray(img, dtype=np.uint8)


def _blit(canvas: np.ndarray, sprite: np.ndarray, cx: float, cy: float) -> None:
    h, w = sprite.shape[:2]
    x0 = int(round(cx)) - w // 2
    y0 = int(round(cy)) - h // 2
    sx0, sy0 = max(0, -x0), max(0, -y0)
    dx0, dy0 = max(0, x0), max(0, y0)
    dx1 = min(canvas.shape[1], x0 + w)
    dy1 = min(canvas.shape[0], y0 + h)
    if dx1 <= dx0 or dy1 <= dy0:
        return
    src = sprite[sy0 : sy0 + (dy1 - dy0), sx0 : sx0 + (dx1 - dx0)].astype(np.float64)
    dst = canvas[dy0:dy1, dx0:dx1].astype(np.float64)
    a = src[:, :, 3:4] / 255.0
    out = dst.copy()
    out[:, :, :3] = np.floor(src[:, :, :3] * a + dst[:, :, :3] * (1.0 - a) + 0.5)
    canvas[dy0:dy1, dx0:dx1] = out.astype(np.uint8)


def render(
    dataset: MapDataset,
    sheet: StyleSheet,
    icons: dict[str, bytes],
    vp: Viewport,
    label_attribute: str = "name",
) -> RenderedMap:
    """Rasterize the dataset under the sheet: background, fills, lines, icons, labels.

    Output is byte-identical for identical inputs; no antialiasing anywhere.
    """
    report = validate_completeness(sheet, dataset.manifest)
    if not report.is_complete:
        raise IncompleteSheet(f"sheet incomplete for dataset manifest: missing={list(report.missing)}")

    W, H = vp.width_px, vp.height_px
    proj = _Projection(dataset.bbox, vp)
    canvas = np.empty((H, W, 4), dtype=np.uint8)
    bg = _hex_rgb(sheet.background.background_color).astype(np.uint8)
    canvas[:, :, 0] = bg[0]
    canvas[:, :, 1] = bg[1]
    canvas[:, :, 2] = bg[2]
    canvas[:, :, 3] = 255

    for element, style in sheet.fills.items():
        fill_mask = np.zeros((H, W), dtype=bool)
        edge_mask = np.zeros((H, W), dtype=bool)
        for feature in dataset.features(CATEGORY_FILL, element):
            rings = [proj.to_pixels(r) for r in _polygon_rings(feature.get("geometry") or {}) if len(r) >= 3]
            if not rings:
                continue
            fill_mask |= _even_odd_fill(rings, W, H)
            for ring in rings:
                closed = np.vstack([ring, ring[:1]])
                _bresenham([closed], W, H, edge_mask)
        _composite(canvas, fill_mask, style.fill_color, style.fill_opacity)
        _composite(canvas, edge_mask, style.fill_outline_color, style.fill_opacity)

    for element, style in sheet.lines.items():
        mask = np.zeros((H, W), dtype=bool)
        for feature in dataset.features(CATEGORY_LINE, element):
            paths = [proj.to_pixels(p) for p in _line_paths(feature.get("geometry") or {}) if len(p) >= 2]
            _stroke(paths, W, H, LINE_HALF_WIDTH, mask)
        _composite(canvas, mask, style.line_color, style.line_opacity)

    for element in sheet.icons:
        features = dataset.features(CATEGORY_ICON, element)
        if not features:
            continue
        if element not in icons:
            raise MissingIcon(f"no icon image supplied for element {element!r}")
        sprite = _decode_icon(element, icons[element])
        for feature in features:
            for pos in _points(feature.get("geometry") or {}):
                px = proj.to_pixels([pos])[0]
                _blit(canvas, sprite, px[0], px[1])

    for element, style in sheet.labels.items():
        for feature in dataset.features(CATEGORY_LABEL, element):
            props = feature.get("properties") or {}
            value = props.get(label_attribute)
            if value is None:
                continue
            glyphs = text_mask(str(value))
            if glyphs.shape[1] == 0:
                continue
            for pos in _points(feature.get("geometry") or {}):
                px = proj.to_pixels([pos])[0]
                gh, gw = glyphs.shape
                x0 = int(round(px[0])) - gw // 2
                y0 = int(round(px[1])) - gh // 2
                mask = np.zeros((H, W), dtype=bool)
                sx0, sy0 = max(0, -x0), max(0, -y0)
                dx0, dy0 = max(0, x0), max(0, y0)
                dx1, dy1 = min(W, x0 + gw), min(H, y0 + gh)
                if dx1 <= dx0 or dy1 <= dy0:
                    continue
                mask[dy0:dy1, dx0:dx1] = glyphs[sy0 : sy0 + (dy1 - dy0), sx0 : sx0 + (dx1 - dx0)]
                _composite(canvas, _dilate(mask), style.text_halo_color, 1.0)
                _composite(canvas, mask, style.text_color, 1.0)

    digest = hashlib.sha256(serialize_stylesheet(sheet).encode("utf-8")).hexdigest()
    return RenderedMap(canvas, "builtin", digest)


def external_render(
    style: CompiledStyle,
    sprite: SpriteBundle | None,
    dataset: MapDataset,
    vp: Viewport,
    adapter: list[str],
) -> RenderedMap:
    """Render through an external command.

    Contract: ``<command> --style <path> --data <dir> --width N --height N
    --out <png>``; exit 0 and a PNG of exactly the viewport size on success.
    """
    with tempfile.TemporaryDirectory(prefix="cartoforge-render-") as tmp:
        root = Path(tmp)
        (root / "style.json").write_text(style.to_json(), encoding="utf-8")
        if sprite is not None:
            (root / "sprite.png").write_bytes(sprite.atlas_png())
            (root / "sprite.json").write_text(sprite.index_json(), encoding="utf-8")
        save_dataset(dataset, root / "data")
        out_path = root / "out.png"
        cmd = list(adapter) + [
            "--style", str(root / "style.json"),
            "--data", str(root / "data"),
            "--width", str(vp.width_px),
            "--height", str(vp.height_px),
            "--out", str(out_path),
        ]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True)
        except FileNotFoundError as e:
            raise AdapterNotFound(f"adapter command not found: {adapter[0]}") from e
        if proc.returncode != 0:
            raise AdapterFailed(proc.returncode, proc.stderr)
        if not out_path.exists():
            raise AdapterFailed(0, "adapter exited 0 but wrote no output file")
        img = Image.open(out_path)
        img.load()
        if img.size != (vp.width_px, vp.height_px):
            raise BadOutputSize(
                f"adapter produced {img.size[0]}x{img.size[1]}, wanted {vp.width_px}x{vp.height_px}"
            )
        pixels = np.asarray(img.convert("RGBA"), dtype=np.uint8)
        digest = hashlib.sha256(style.to_json().encode("utf-8")).hexdigest()
        return RenderedMap(pixels, f"external:{Path(adapter[0]).name}", digest)
