// Pulse-pane render model: polyline paths for the traces at the suppression
// depth and at the focal depth, with an optional pinned overlay.

import type { PulsePayload } from "./api.js";

export interface TracePath {
  label: string;
  points: Array<[number, number]>; // canvas-fraction coordinates
  emphasis: "strong" | "thin" | "dashed";
}

export interface PulsePaneModel {
  title: string;
  traces: TracePath[];
  tRange: [number, number];
  amplitude: number;
}

function toPath(t: number[], y: number[], tLo: number, tHi: number,
                amp: number): Array<[number, number]> {
  const points: Array<[number, number]> = [];
  for (let i = 0; i < t.length; i++) {
    const x = (t[i] - tLo) / (tHi - tLo);
    points.push([x, 0.5 - y[i] / (2 * amp)]);
  }
  return points;
}

// Window the display onto the energetic part of the traces.
export function activeWindow(t: number[], traces: number[][], padFrac = 0.15):
    [number, number] {
  let lo = t.length - 1;
  let hi = 0;
  let peak = 0;
  for (const tr of traces) for (const v of tr) peak = Math.max(peak, Math.abs(v));
  const thresh = peak * 1e-3;
  for (const tr of traces) {
    for (let i = 0; i < tr.length; i++) {
      if (Math.abs(tr[i]) > thresh) {
        lo = Math.min(lo, i);
        hi = Math.max(hi, i);
      }
    }
  }
  if (hi <= lo) return [t[0], t[t.length - 1]];
  const pad = Math.round((hi - lo) * padFrac);
  lo = Math.max(0, lo - pad);
  hi = Math.min(t.length - 1, hi + pad);
  return [t[lo], t[hi]];
}

export function buildPulsePane(title: string, payload: PulsePayload,
                               pinned: PulsePayload | null): PulsePaneModel {
  const traces = [payload.s_plus, payload.s_minus_adj, payload.s_delta];
  const [tLo, tHi] = activeWindow(payload.t_us, traces);
  let amp = 0;
  for (const tr of traces) for (const v of tr) amp = Math.max(amp, Math.abs(v));
  if (pinned) for (const v of pinned.s_delta) amp = Math.max(amp, Math.abs(v));
  if (amp === 0) amp = 1;
  const model: PulsePaneModel = {
    title: `${title} (z = ${payload.z_mm.toFixed(1)} mm)`,
    tRange: [tLo, tHi],
    amplitude: amp,
    traces: [
      { label: "s+", points: toPath(payload.t_us, payload.s_plus, tLo, tHi, amp),
        emphasis: "strong" },
      { label: "adjusted s-", points: toPath(payload.t_us, payload.s_minus_adj, tLo, tHi, amp),
        emphasis: "thin" },
      { label: "difference", points: toPath(payload.t_us, payload.s_delta, tLo, tHi, amp),
        emphasis: "dashed" },
    ],
  };
  if (pinned) {
    model.traces.push({
      label: "pinned difference",
      points: toPath(pinned.t_us, pinned.s_delta, tLo, tHi, amp),
      emphasis: "dashed",
    });
  }
  return model;
}

const STYLE: Record<TracePath["emphasis"], { width: number; dash: number[]; color: string }> = {
  strong: { width: 2.0, dash: [], color: "#26323d" },
  thin: { width: 1.0, dash: [], color: "#4f8edc" },
  dashed: { width: 1.2, dash: [5, 3], color: "#d64550" },
};

export function paintPulsePane(canvas: HTMLCanvasElement, model: PulsePaneModel): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#d9dee3";
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
  for (const trace of model.traces) {
    const style = STYLE[trace.emphasis];
    ctx.strokeStyle = style.color;
    ctx.lineWidth = style.width;
    ctx.setLineDash(style.dash);
    ctx.beginPath();
    trace.points.forEach(([fx, fy], i) => {
      const x = fx * width;
      const y = fy * height;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);
  ctx.fillStyle = "#26323d";
  ctx.font = "11px sans-serif";
  ctx.fillText(model.title, 6, 14);
}
