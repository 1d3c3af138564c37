import { describe, expect, it } from "vitest";

import type { BeamPayload } from "../src/api.js";
import { buildHeatmapModel, colormap } from "../src/heatmap.js";

const PAYLOAD: BeamPayload = {
  effective: { adjust: "none" },
  mode: "max",
  norm: "peak",
  norm_ref: 1.0,
  z_mm: [0, 1, 2],
  r_mm: [0, 0.5],
  values_db: [
    [0, -10],
    [-20, -30],
    [-120, -120],
  ],
};

describe("heatmap model", () => {
  it("is a pure function of the payload (pixel-stable reload)", () => {
    const a = buildHeatmapModel(PAYLOAD);
    const b = buildHeatmapModel(PAYLOAD);
    expect(a.rgba).toEqual(b.rgba);
    expect(a.dbMin).toBe(b.dbMin);
    expect(a.zTicks).toEqual(b.zTicks);
  });

  it("spans the dynamic range from the map peak down to the floor", () => {
    const model = buildHeatmapModel(PAYLOAD, -60);
    expect(model.dbMax).toBe(0);
    expect(model.dbMin).toBe(-60);
    expect(model.width).toBe(3);
    expect(model.height).toBe(2);
  });

  it("puts the axis row (r = 0) at the bottom of the image", () => {
    const model = buildHeatmapModel(PAYLOAD);
    // bottom-left pixel = (z=0, r=0) = 0 dB -> warmest color
    const bottomLeft = model.rgba.slice((1 * 3 + 0) * 4, (1 * 3 + 0) * 4 + 3);
    const topLeft = model.rgba.slice(0, 3);
    const warm = colormap(1);
    expect([...bottomLeft]).toEqual(warm);
    expect([...topLeft]).not.toEqual(warm);
  });

  it("labels ticks in millimetres across the axis span", () => {
    const model = buildHeatmapModel(PAYLOAD);
    expect(model.zTicks[0].label).toBe("0");
    expect(model.zTicks[model.zTicks.length - 1].label).toBe("2");
  });
});

describe("colormap", () => {
  it("clamps and interpolates monotonically in brightness", () => {
    expect(colormap(-1)).toEqual(colormap(0));
    expect(colormap(2)).toEqual(colormap(1));
    const lum = (c: [number, number, number]) => 0.3 * c[0] + 0.6 * c[1] + 0.1 * c[2];
    let prev = -1;
    for (let i = 0; i <= 10; i++) {
      const l = lum(colormap(i / 10));
      expect(l).toBeGreaterThan(prev);
      prev = l;
    }
  });
});
