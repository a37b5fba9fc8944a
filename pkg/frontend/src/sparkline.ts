/** Tiny similarity sparkline: joint (solid) and marginal (dashed) curves. */

import type { TimelineEntry } from "./state.js";

export function drawSparkline(canvas: HTMLCanvasElement, timeline: TimelineEntry[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);

  const done = timeline.filter((t) => t.similarity !== null);
  if (done.length === 0) return;

  const x = (i: number) => (done.length === 1 ? w / 2 : 4 + (i * (w - 8)) / (done.length - 1));
  const y = (v: number) => h - 4 - v * (h - 8);

  const plot = (values: (number | null)[], dashed: boolean, color: string) => {
    ctx.beginPath();
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.setLineDash(dashed ? [4, 3] : []);
    let started = false;
    values.forEach((v, i) => {
      if (v === null) return;
      if (!started) {
        ctx.moveTo(x(i), y(v));
        started = true;
      } else {
        ctx.lineTo(x(i), y(v));
      }
    });
    ctx.stroke();
    ctx.setLineDash([]);
  };

  plot(done.map((t) => t.similarity), false, "#4da6ff");
  if (done.some((t) => t.similarityMarginal !== null)) {
    plot(done.map((t) => t.similarityMarginal), true, "#b48eff");
  }
  ctx.fillStyle = "#4da6ff";
  done.forEach((t, i) => {
    ctx.beginPath();
    ctx.arc(x(i), y(t.similarity as number), 2, 0, Math.PI * 2);
    ctx.fill();
  });
}
