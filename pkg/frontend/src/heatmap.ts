// Heatmap render model. The model computation is pure (payload -> pixels +
// axis ticks) so it can be tested without a DOM; the painter just blits.

import type { BeamPayload } from "./api.js";

// compact perceptual ramp (dark blue -> teal -> yellow), good enough for dB maps
const STOPS: Array<[number, number, number]> = [
  [13, 8, 135], [84, 2, 163], [156, 23, 158], [205, 62, 78],
  [237, 121, 83], [253, 180, 47], [240, 249, 33],
];

export function colormap(x: number): [number, number, number] {
  const t = Math.min(Math.max(x, 0), 1) * (STOPS.length - 1);
  const i = Math.min(Math.floor(t), STOPS.length - 2);
  const f = t - i;
  const a = STOPS[i];
  const b = STOPS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

export interface HeatmapModel {
  width: number;   // pixels = depth samples
  height: number;  // pixels = radial samples
  rgba: Uint8ClampedArray;
  dbMin: number;
  dbMax: number;
  zTicks: Array<{ frac: number; label: string }>;
  rTicks: Array<{ frac: number; label: string }>;
}

function ticks(axis: number[], count: number): Array<{ frac: number; label: string }> {
  const out: Array<{ frac: number; label: string }> = [];
  const lo = axis[0];
  const hi = axis[axis.length - 1];
  for (let i = 0; i < count; i++) {
    const v = lo + ((hi - lo) * i) / (count - 1);
    out.push({ frac: i / (count - 1), label: v.toFixed(0) });
  }
  return out;
}

// Rows are radii (axis up the screen), columns are depths.
export function buildHeatmapModel(payload: BeamPayload, floorDb = -60): HeatmapModel {
  const nz = payload.z_mm.length;
  const nr = payload.r_mm.length;
  let dbMax = -Infinity;
  for (const row of payload.values_db) {
    for (const v of row) if (v > dbMax) dbMax = v;
  }
  const dbMin = dbMax + floorDb;
  const rgba = new Uint8ClampedArray(nz * nr * 4);
  for (let ir = 0; ir < nr; ir++) {
    const y = nr - 1 - ir; // r = 0 at the bottom edge
    for (let iz = 0; iz < nz; iz++) {
      const v = payload.values_db[iz][ir];
      const [r, g, b] = colormap((v - dbMin) / (dbMax - dbMin));
      const o = (y * nz + iz) * 4;
      rgba[o] = r;
      rgba[o + 1] = g;
      rgba[o + 2] = b;
      rgba[o + 3] = 255;
    }
  }
  return {
    width: nz, height: nr, rgba, dbMin, dbMax,
    zTicks: ticks(payload.z_mm, 6),
    rTicks: ticks(payload.r_mm, 4),
  };
}

export function paintHeatmap(canvas: HTMLCanvasElement, model: HeatmapModel): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const image = new ImageData(new Uint8ClampedArray(model.rgba), model.width, model.height);
  const off = document.createElement("canvas");
  off.width = model.width;
  off.height = model.height;
  off.getContext("2d")!.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}
