/** Fallback rasterizer for compiled style documents (inline GeoJSON sources).
 *
 * Used when WebGL is unavailable and by node-side tests: it draws
 * background, fill, line, and icon-symbol layers into a plain RGBA buffer
 * with the same source-over math the pipeline's renderer uses. Text labels
 * are left to the WebGL engine.
 */

import type { GeoJsonFeature, SpriteIndexEntry, StyleDocument, StyleLayer } from "./types.js";

const MAX_MERC_LAT = 85.05112877980659;

export interface RenderView {
  /** extra zoom factor on top of the bbox fit */
  zoom: number;
  /** pan offset in pixels */
  panX: number;
  panY: number;
}

export interface SpriteData {
  pixels: Uint8ClampedArray; // RGBA atlas
  width: number;
  height: number;
  index: Record<string, SpriteIndexEntry>;
}

interface Projection {
  toPixel(lon: number, lat: number): [number, number];
}

function mercator(lon: number, lat: number): [number, number] {
  const clamped = Math.max(-MAX_MERC_LAT, Math.min(MAX_MERC_LAT, lat));
  return [(lon * Math.PI) / 180, Math.log(Math.tan(Math.PI / 4 + (clamped * Math.PI) / 360))];
}

function* walkPositions(geometry: { type: string; coordinates: unknown } | null): Generator<number[]> {
  if (!geometry) return;
  const coords = geometry.coordinates as unknown;
  switch (geometry.type) {
    case "Point":
      yield coords as number[];
      break;
    case "MultiPoint":
    case "LineString":
      yield* coords as number[][];
      break;
    case "MultiLineString":
    case "Polygon":
      for (const part of coords as number[][][]) yield* part;
      break;
    case "MultiPolygon":
      for (const poly of coords as number[][][][]) for (const ring of poly) yield* ring;
      break;
  }
}

export function styleBbox(style: StyleDocument): [number, number, number, number] | null {
  let lon0 = Infinity, lat0 = Infinity, lon1 = -Infinity, lat1 = -Infinity;
  for (const source of Object.values(style.sources)) {
    if (source.type !== "geojson" || !source.data) continue;
    for (const feature of source.data.features ?? []) {
      for (const pos of walkPositions(feature.geometry)) {
        lon0 = Math.min(lon0, pos[0]);
        lat0 = Math.min(lat0, pos[1]);
        lon1 = Math.max(lon1, pos[0]);
        lat1 = Math.max(lat1, pos[1]);
      }
    }
  }
  if (!Number.isFinite(lon0)) return null;
  if (lon1 - lon0 <= 0) { lon0 -= 0.0005; lon1 += 0.0005; }
  if (lat1 - lat0 <= 0) { lat0 -= 0.0005; lat1 += 0.0005; }
  return [lon0, lat0, lon1, lat1];
}

// content-fit leaves a margin so the background ring stays visible
const FIT_PADDING = 0.92;

function fitProjection(
  bbox: [number, number, number, number],
  width: number,
  height: number,
  view: RenderView,
): Projection {
  const [mx0, my0] = mercator(bbox[0], bbox[1]);
  const [mx1, my1] = mercator(bbox[2], bbox[3]);
  const scale = Math.min(width / (mx1 - mx0), height / (my1 - my0)) * FIT_PADDING * view.zoom;
  const ox = (width - scale * (mx1 - mx0)) / 2 + view.panX;
  const oy = (height - scale * (my1 - my0)) / 2 + view.panY;
  return {
    toPixel(lon: number, lat: number): [number, number] {
      const [mx, my] = mercator(lon, lat);
      return [(mx - mx0) * scale + ox, height - ((my - my0) * scale + oy)];
    },
  };
}

function parseHex(color: string): [number, number, number] {
  let c = color.trim().toLowerCase();
  if (/^#[0-9a-f]{3}$/.test(c)) c = "#" + [...c.slice(1)].map((ch) => ch + ch).join("");
  if (!/^#[0-9a-f]{6}/.test(c)) return [0, 0, 0];
  return [parseInt(c.slice(1, 3), 16), parseInt(c.slice(3, 5), 16), parseInt(c.slice(5, 7), 16)];
}

function blendPixel(buffer: Uint8ClampedArray, i: number, rgb: [number, number, number], alpha: number): void {
  buffer[i] = Math.floor(rgb[0] * alpha + buffer[i] * (1 - alpha) + 0.5);
  buffer[i + 1] = Math.floor(rgb[1] * alpha + buffer[i + 1] * (1 - alpha) + 0.5);
  buffer[i + 2] = Math.floor(rgb[2] * alpha + buffer[i + 2] * (1 - alpha) + 0.5);
  buffer[i + 3] = 255;
}

function fillPolygonEvenOdd(
  rings: [number, number][][],
  width: number,
  height: number,
  mark: (x: number, y: number) => void,
): void {
  const edges: [number, number, number, number][] = [];
  for (const ring of rings) {
    for (let i = 0; i < ring.length; i++) {
      const p = ring[i];
      const q = ring[(i + 1) % ring.length];
      if (p[1] !== q[1]) edges.push([p[0], p[1], q[0], q[1]]);
    }
  }
  if (!edges.length) return;
  const ys = edges.flatMap((e) => [e[1], e[3]]);
  const row0 = Math.max(0, Math.floor(Math.min(...ys) - 0.5));
  const row1 = Math.min(height - 1, Math.ceil(Math.max(...ys)));
  for (let y = row0; y <= row1; y++) {
    const yc = y + 0.5;
    const xs: number[] = [];
    for (const [x1, y1, x2, y2] of edges) {
      const lo = Math.min(y1, y2);
      const hi = Math.max(y1, y2);
      if (lo <= yc && yc < hi) {
        xs.push(x1 + ((yc - y1) * (x2 - x1)) / (y2 - y1));
      }
    }
    xs.sort((a, b) => a - b);
    for (let k = 0; k + 1 < xs.length; k += 2) {
      const x0 = Math.max(0, Math.ceil(xs[k] - 0.5));
      const x1 = Math.min(width - 1, Math.ceil(xs[k + 1] - 0.5) - 1);
      for (let x = x0; x <= x1; x++) mark(x, y);
    }
  }
}

function strokeSegment(
  a: [number, number],
  b: [number, number],
  radius: number,
  width: number,
  height: number,
  mark: (x: number, y: number) => void,
): void {
  const x0 = Math.max(0, Math.floor(Math.min(a[0], b[0]) - radius - 1));
  const x1 = Math.min(width - 1, Math.ceil(Math.max(a[0], b[0]) + radius + 1));
  const y0 = Math.max(0, Math.floor(Math.min(a[1], b[1]) - radius - 1));
  const y1 = Math.min(height - 1, Math.ceil(Math.max(a[1], b[1]) + radius + 1));
  const dx = b[0] - a[0];
  const dy = b[1] - a[1];
  const seg2 = dx * dx + dy * dy;
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const cx = x + 0.5;
      const cy = y + 0.5;
      let t = seg2 === 0 ? 0 : ((cx - a[0]) * dx + (cy - a[1]) * dy) / seg2;
      t = Math.max(0, Math.min(1, t));
      const px = a[0] + t * dx;
      const py = a[1] + t * dy;
      const d2 = (cx - px) * (cx - px) + (cy - py) * (cy - py);
      if (d2 <= radius * radius) mark(x, y);
    }
  }
}

function featuresFor(style: StyleDocument, layer: StyleLayer): GeoJsonFeature[] {
  if (!layer.source) return [];
  const source = style.sources[layer.source];
  if (!source || source.type !== "geojson" || !source.data) return [];
  return source.data.features ?? [];
}

function polygonRings(feature: GeoJsonFeature): number[][][] {
  const g = feature.geometry;
  if (!g) return [];
  if (g.type === "Polygon") return g.coordinates as number[][][];
  if (g.type === "MultiPolygon") return (g.coordinates as number[][][][]).flat();
  return [];
}

function linePaths(feature: GeoJsonFeature): number[][][] {
  const g = feature.geometry;
  if (!g) return [];
  if (g.type === "LineString") return [g.coordinates as number[][]];
  if (g.type === "MultiLineString") return g.coordinates as number[][][];
  return [];
}

function points(feature: GeoJsonFeature): number[][] {
  const g = feature.geometry;
  if (!g) return [];
  if (g.type === "Point") return [g.coordinates as number[]];
  if (g.type === "MultiPoint") return g.coordinates as number[][];
  return [];
}

export const DEFAULT_VIEW: RenderView = { zoom: 1, panX: 0, panY: 0 };

/** Rasterize a style document to an RGBA pixel buffer. */
export function renderStyleToBuffer(
  style: StyleDocument,
  width: number,
  height: number,
  sprite?: SpriteData,
  view: RenderView = DEFAULT_VIEW,
): Uint8ClampedArray {
  const buffer = new Uint8ClampedArray(width * height * 4);
  const bbox = styleBbox(style) ?? [0, 0, 1, 1];
  const proj = fitProjection(bbox, width, height, view);

  const backgroundLayer = style.layers.find((l) => l.type === "background");
  const bg = parseHex(String(backgroundLayer?.paint?.["background-color"] ?? "#ffffff"));
  for (let i = 0; i < buffer.length; i += 4) {
    buffer[i] = bg[0];
    buffer[i + 1] = bg[1];
    buffer[i + 2] = bg[2];
    buffer[i + 3] = 255;
  }

  const mask = new Uint8Array(width * height);
  for (const layer of style.layers) {
    if (layer.type === "fill") {
      mask.fill(0);
      const color = parseHex(String(layer.paint?.["fill-color"] ?? "#000000"));
      const outline = parseHex(String(layer.paint?.["fill-outline-color"] ?? layer.paint?.["fill-color"] ?? "#000000"));
      const opacity = Number(layer.paint?.["fill-opacity"] ?? 1);
      for (const feature of featuresFor(style, layer)) {
        const rings = polygonRings(feature).map(
          (ring) => ring.map(([lon, lat]) => proj.toPixel(lon, lat)) as [number, number][],
        );
        fillPolygonEvenOdd(rings, width, height, (x, y) => { mask[y * width + x] = 1; });
        for (const ring of rings) {
          for (let i = 0; i < ring.length; i++) {
            strokeSegment(ring[i], ring[(i + 1) % ring.length], 0.71, width, height,
              (x, y) => { mask[y * width + x] = 2; });
          }
        }
      }
      for (let p = 0; p < mask.length; p++) {
        if (mask[p] === 1) blendPixel(buffer, p * 4, color, opacity);
        else if (mask[p] === 2) blendPixel(buffer, p * 4, outline, opacity);
      }
    } else if (layer.type === "line") {
      mask.fill(0);
      const color = parseHex(String(layer.paint?.["line-color"] ?? "#000000"));
      const opacity = Number(layer.paint?.["line-opacity"] ?? 1);
      for (const feature of featuresFor(style, layer)) {
        for (const path of linePaths(feature)) {
          const pts = path.map(([lon, lat]) => proj.toPixel(lon, lat)) as [number, number][];
          for (let i = 0; i + 1 < pts.length; i++) {
            strokeSegment(pts[i], pts[i + 1], 1.0, width, height, (x, y) => { mask[y * width + x] = 1; });
          }
        }
      }
      for (let p = 0; p < mask.length; p++) {
        if (mask[p]) blendPixel(buffer, p * 4, color, opacity);
      }
    } else if (layer.type === "symbol" && layer.layout?.["icon-image"] && sprite) {
      const entry = sprite.index[String(layer.layout["icon-image"])];
      if (!entry) continue;
      for (const feature of featuresFor(style, layer)) {
        for (const pos of points(feature)) {
          const [cx, cy] = proj.toPixel(pos[0], pos[1]);
          blitSprite(buffer, width, height, sprite, entry, cx, cy);
        }
      }
    }
    // text symbol layers are drawn by the WebGL engine only
  }
  return buffer;
}

function blitSprite(
  buffer: Uint8ClampedArray,
  width: number,
  height: number,
  sprite: SpriteData,
  entry: SpriteIndexEntry,
  cx: number,
  cy: number,
): void {
  const drawW = 32;
  const drawH = 32;
  const left = Math.round(cx) - drawW / 2;
  const top = Math.round(cy) - drawH / 2;
  for (let y = 0; y < drawH; y++) {
    const ty = top + y;
    if (ty < 0 || ty >= height) continue;
    const sy = entry.y + Math.floor((y * entry.height) / drawH);
    for (let x = 0; x < drawW; x++) {
      const tx = left + x;
      if (tx < 0 || tx >= width) continue;
      const sx = entry.x + Math.floor((x * entry.width) / drawW);
      const s = (sy * sprite.width + sx) * 4;
      const alpha = sprite.pixels[s + 3] / 255;
      if (alpha > 0) {
        blendPixel(buffer, (ty * width + tx) * 4,
          [sprite.pixels[s], sprite.pixels[s + 1], sprite.pixels[s + 2]], alpha);
      }
    }
  }
}

export function samplePixel(
  buffer: Uint8ClampedArray,
  width: number,
  x: number,
  y: number,
): [number, number, number, number] {
  const i = (y * width + x) * 4;
  return [buffer[i], buffer[i + 1], buffer[i + 2], buffer[i + 3]];
}
