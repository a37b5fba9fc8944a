/** Live map panel: maplibre-gl when WebGL is available, canvas fallback
 * otherwise. Switching timeline entries swaps the style without reloading
 * the page. Optional north-arrow and scale-bar overlays ride on top.
 */

import type { StyleDocument } from "./types.js";
import { DEFAULT_VIEW, RenderView, renderStyleToBuffer, styleBbox } from "./styleRender.js";

declare global {
  interface Window {
    maplibregl?: any;
  }
}

export interface MapPanel {
  setStyle(styleUrl: string): Promise<void>;
  destroy(): void;
  readonly engine: "maplibre" | "fallback";
}

function webglAvailable(): boolean {
  try {
    const canvas = document.createElement("canvas");
    return Boolean(canvas.getContext("webgl2") || canvas.getContext("webgl"));
  } catch {
    return false;
  }
}

function addOverlays(container: HTMLElement): void {
  const north = document.createElement("div");
  north.className = "map-north-arrow";
  north.title = "North";
  north.innerHTML = "&#8593;<span>N</span>";
  container.appendChild(north);
}

class MaplibrePanel implements MapPanel {
  readonly engine = "maplibre" as const;
  private map: any;

  constructor(container: HTMLElement) {
    const maplibregl = window.maplibregl;
    this.map = new maplibregl.Map({
      container,
      style: { version: 8, sources: {}, layers: [] },
      attributionControl: false,
    });
    this.map.addControl(new maplibregl.NavigationControl(), "top-right");
    this.map.addControl(new maplibregl.ScaleControl({ maxWidth: 120 }), "bottom-left");
    addOverlays(container);
  }

  async setStyle(styleUrl: string): Promise<void> {
    const resp = await fetch(styleUrl);
    if (!resp.ok) {
      throw new Error(`style fetch failed: ${resp.status}`);
    }
    const doc = (await resp.json()) as StyleDocument;
    this.map.setStyle(doc);
    const bbox = styleBbox(doc);
    if (bbox) {
      this.map.fitBounds(
        [
          [bbox[0], bbox[1]],
          [bbox[2], bbox[3]],
        ],
        { padding: 16, duration: 0 },
      );
    }
  }

  destroy(): void {
    this.map.remove();
  }
}

class FallbackPanel implements MapPanel {
  readonly engine = "fallback" as const;
  private canvas: HTMLCanvasElement;
  private style: StyleDocument | null = null;
  private view: RenderView = { ...DEFAULT_VIEW };
  private dragging: { x: number; y: number } | null = null;

  constructor(private container: HTMLElement) {
    this.canvas = document.createElement("canvas");
    this.canvas.className = "map-fallback-canvas";
    container.appendChild(this.canvas);
    addOverlays(container);

    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.view.zoom *= e.deltaY < 0 ? 1.2 : 1 / 1.2;
      this.view.zoom = Math.max(0.5, Math.min(16, this.view.zoom));
      this.draw();
    });
    this.canvas.addEventListener("pointerdown", (e) => {
      this.dragging = { x: e.clientX, y: e.clientY };
      this.canvas.setPointerCapture(e.pointerId);
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      this.view.panX += e.clientX - this.dragging.x;
      this.view.panY -= e.clientY - this.dragging.y;
      this.dragging = { x: e.clientX, y: e.clientY };
      this.draw();
    });
    this.canvas.addEventListener("pointerup", () => {
      this.dragging = null;
    });
  }

  async setStyle(styleUrl: string): Promise<void> {
    const resp = await fetch(styleUrl);
    if (!resp.ok) {
      throw new Error(`style fetch failed: ${resp.status}`);
    }
    this.style = (await resp.json()) as StyleDocument;
    this.view = { ...DEFAULT_VIEW };
    this.draw();
  }

  private draw(): void {
    if (!this.style) return;
    const width = this.container.clientWidth || 640;
    const height = this.container.clientHeight || 480;
    this.canvas.width = width;
    this.canvas.height = height;
    const buffer = renderStyleToBuffer(this.style, width, height, undefined, this.view);
    const ctx = this.canvas.getContext("2d");
    if (ctx) {
      const image = ctx.createImageData(width, height);
      image.data.set(buffer);
      ctx.putImageData(image, 0, 0);
    }
  }

  destroy(): void {
    this.canvas.remove();
  }
}

export function createMapPanel(container: HTMLElement): MapPanel {
  if (window.maplibregl && webglAvailable()) {
    return new MaplibrePanel(container);
  }
  return new FallbackPanel(container);
}
