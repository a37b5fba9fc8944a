"""Layered vector map data: GeoJSON feature collections grouped by category.

Layers are keyed by ``<category>-<slug>`` (see :func:`compiler.layer_key`)
because element names may repeat across categories. A dataset directory
holds one ``<key>.geojson`` per manifest element.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .compiler import layer_key
from .errors import SchemaViolation
from .stylesheet import CATEGORY_FILL, CATEGORY_ICON, CATEGORY_LABEL, CATEGORY_LINE, LayerManifest

_GEOM_CATEGORIES = (CATEGORY_ICON, CATEGORY_LABEL, CATEGORY_LINE, CATEGORY_FILL)


def _walk_positions(geometry: dict):
    if geometry is None:
        return
    gtype = geometry.get("type")
    coords = geometry.get("coordinates")
    if gtype == "GeometryCollection":
        for g in geometry.get("geometries", []):
            yield from _walk_positions(g)
        return
    if gtype == "Point":
        yield coords
    elif gtype in ("MultiPoint", "LineString"):
        yield from coords
    elif gtype in ("MultiLineString", "Polygon"):
        for part in coords:
            yield from part
    elif gtype == "MultiPolygon":
        for poly in coords:
            for ring in poly:
                yield from ring


@dataclass
class MapDataset:
    manifest: LayerManifest
    layers: dict[str, dict]  # layer key -> GeoJSON FeatureCollection
    bbox: tuple[float, float, float, float]  # min_lon, min_lat, max_lon, max_lat

    def __post_init__(self):
        for category in _GEOM_CATEGORIES:
            for element in self.manifest.elements(category):
                if layer_key(category, element) not in self.layers:
                    raise SchemaViolation(f"dataset has no layer for {category} {element!r}")
        lon0, lat0, lon1, lat1 = self.bbox
        if not (lon1 > lon0 and lat1 > lat0):
            raise SchemaViolation(f"degenerate bbox {self.bbox}")

    def layer(self, category: str, element: str) -> dict:
        return self.layers[layer_key(category, element)]

    def features(self, category: str, element: str) -> list[dict]:
        return self.layer(category, element).get("features", [])


def compute_bbox(layers: dict[str, dict], pad: float = 0.0005) -> tuple[float, float, float, float]:
    """Bounding box over all feature coordinates; degenerate extents get padded."""
    lons: list[float] = []
    lats: list[float] = []
    for collection in layers.values():
        for feature in collection.get("features", []):
            for pos in _walk_positions(feature.get("geometry")):
                lons.append(float(pos[0]))
                lats.append(float(pos[1]))
    if not lons:
        raise SchemaViolation("dataset has no coordinates to derive a bbox from")
    lon0, lon1 = min(lons), max(lons)
    lat0, lat1 = min(lats), max(lats)
    if lon1 - lon0 <= 0:
        lon0, lon1 = lon0 - pad, lon1 + pad
    if lat1 - lat0 <= 0:
        lat0, lat1 = lat0 - pad, lat1 + pad
    return (lon0, lat0, lon1, lat1)


def build_dataset(
    manifest: LayerManifest,
    layers: dict[str, dict],
    bbox: tuple[float, float, float, float] | None = None,
) -> MapDataset:
    return MapDataset(manifest, layers, bbox if bbox is not None else compute_bbox(layers))


def load_dataset(data_dir: str | Path, manifest: LayerManifest) -> MapDataset:
    """Read one <category>-<slug>.geojson per manifest element from a directory.

    An optional bbox.json (``[min_lon, min_lat, max_lon, max_lat]``) overrides
    the computed bounding box.
    """
    root = Path(data_dir)
    layers: dict[str, dict] = {}
    for category in _GEOM_CATEGORIES:
        for element in manifest.elements(category):
            key = layer_key(category, element)
            path = root / f"{key}.geojson"
            if not path.exists():
                raise FileNotFoundError(f"dataset layer file missing: {path}")
            layers[key] = json.loads(path.read_text("utf-8"))
    bbox = None
    bbox_path = root / "bbox.json"
    if bbox_path.exists():
        bbox = tuple(json.loads(bbox_path.read_text("utf-8")))
    return build_dataset(manifest, layers, bbox)


def save_dataset(dataset: MapDataset, data_dir: str | Path) -> None:
    root = Path(data_dir)
    root.mkdir(parents=True, exist_ok=True)
    for key, collection in dataset.layers.items():
        (root / f"{key}.geojson").write_text(
            json.dumps(collection, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    (root / "bbox.json").write_text(json.dumps(list(dataset.bbox)) + "\n", encoding="utf-8")
