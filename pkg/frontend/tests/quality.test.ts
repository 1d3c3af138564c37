import { describe, expect, it, vi } from "vitest";

import type { ApiClient } from "../src/api.js";
import { formatQuality, runOptimize, sparklineTaus } from "../src/quality.js";
import { defaultState, RunInfo } from "../src/state.js";

const RUN: RunInfo = {
  id: "planedemo0001",
  grid: { nz: 131, dz_mm: 1.0, nr: 1, dr_mm: 0.15625, nt: 2048, dt_ns: 10,
          z_max_mm: 130 },
  pulse_spec: { f_h: 3.5e6, focus_h: 0.082 },
};

// closed-form inter-polarity shift of the constant-pressure demo run:
// 2 beta_n kappa p_L z / c0 with the workbench defaults
function demoTauNs(zaMm: number): number {
  return 2 * 3.5 * 400e-12 * 0.85e6 * (zaMm * 1e-3) / 1540 * 1e9;
}

function mockApi(): ApiClient {
  return {
    optimize: vi.fn(async (_run: string, zaMm: number) => ({
      za_mm: zaMm,
      // the service's optimizer lands on the null -tau(z_a); quantized echo
      tau_ns_opt: Math.round(-demoTauNs(zaMm) * 10000) / 10000,
      Q_za_dB: 83.2,
    })),
  } as unknown as ApiClient;
}

describe("formatQuality", () => {
  it("renders numbers and passes sentinels through", () => {
    expect(formatQuality({ effective: { adjust: "none", za_mm: 5 },
                           Q_za_dB: 12.3456, Q_dB: 3.2 }).text)
      .toBe("Q_za 12.35 dB | Q 3.20 dB");
    const sentinel = formatQuality({ effective: { adjust: "none", za_mm: 5 },
                                     Q_za_dB: "+inf", Q_dB: 3.0 });
    expect(sentinel.qZaDb).toBeNull();
    expect(sentinel.text).toContain("+inf");
  });
});

describe("sparklineTaus", () => {
  it("centers on the current delay, quantized to 0.1 ns", () => {
    const taus = sparklineTaus(10, 142.9);
    expect(taus).toContain(10);
    for (const tau of taus) {
      expect(Math.abs(tau * 10 - Math.round(tau * 10))).toBeLessThan(1e-9);
    }
  });

  it("clamps to the searchable range", () => {
    const taus = sparklineTaus(140, 142.9);
    expect(Math.max(...taus)).toBeLessThanOrEqual(142.9);
  });
});

describe("runOptimize", () => {
  it("snaps the slider to the server optimum (-tau(z_a) on the demo run)", async () => {
    const api = mockApi();
    const state = { ...defaultState(RUN), zaMm: 40, adjust: "none" as const };
    const { state: next, result } = await runOptimize(api, state);
    expect(next.adjust).toBe("delay");
    // the bundled plane-wave demo accumulates ~61.84 ns by 40 mm
    expect(next.tauNs).toBeCloseTo(-61.84, 1);
    expect(next.tauNs).toBeCloseTo(-demoTauNs(40), 1);
    expect(result.qZaDb).toBe(83.2);
    // the rest of the state is untouched
    expect(next.zaMm).toBe(40);
    expect(next.runId).toBe(state.runId);
  });
});
