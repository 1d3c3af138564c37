// Quality-strip logic: readouts, the local Q_za(tau_a) sparkline, and the
// optimize action that snaps the delay slider to the server's optimum.

import type { ApiClient, QualityPayload } from "./api.js";
import type { ViewState } from "./state.js";

export interface QualityReadout {
  qZaDb: number | null;  // null renders as "-inf"/"+inf" sentinel text
  qDb: number | null;
  text: string;
}

export function formatQuality(payload: QualityPayload): QualityReadout {
  const num = (v: number | string): number | null =>
    typeof v === "number" ? v : null;
  const show = (v: number | string): string =>
    typeof v === "number" ? `${v.toFixed(2)} dB` : v;
  return {
    qZaDb: num(payload.Q_za_dB),
    qDb: num(payload.Q_dB),
    text: `Q_za ${show(payload.Q_za_dB)} | Q ${show(payload.Q_dB)}`,
  };
}

export interface SparkPoint {
  tauNs: number;
  qDb: number | null;
}

export function sparklineTaus(centerNs: number, limitNs: number,
                              halfWidthNs = 12, count = 9): number[] {
  const out: number[] = [];
  for (let i = 0; i < count; i++) {
    const tau = centerNs - halfWidthNs + (2 * halfWidthNs * i) / (count - 1);
    out.push(Math.round(Math.min(Math.max(tau, -limitNs), limitNs) * 10) / 10);
  }
  return [...new Set(out)];
}

export async function fetchSparkline(api: ApiClient, state: ViewState,
                                     limitNs: number,
                                     signal?: AbortSignal): Promise<SparkPoint[]> {
  const taus = sparklineTaus(state.tauNs, limitNs);
  const points: SparkPoint[] = [];
  for (const tauNs of taus) {
    const payload = await api.quality(
      state.runId, { adjust: "delay", tauNs, zaMm: state.zaMm },
      state.zaMm, state.znMm, state.zfMm, signal);
    points.push({
      tauNs,
      qDb: typeof payload.Q_za_dB === "number" ? payload.Q_za_dB : null,
    });
  }
  return points;
}

export interface OptimizeResult {
  tauNs: number;
  qZaDb: number | null;
}

// POST /optimize and hand back the state update that snaps the slider to the
// server's optimum (quantized by the server, echoed verbatim here).
export async function runOptimize(api: ApiClient, state: ViewState):
    Promise<{ state: ViewState; result: OptimizeResult }> {
  const doc = await api.optimize(state.runId, state.zaMm);
  const tauNs = doc.tau_ns_opt;
  return {
    state: { ...state, adjust: "delay", tauNs },
    result: {
      tauNs,
      qZaDb: typeof doc.Q_za_dB === "number" ? doc.Q_za_dB : null,
    },
  };
}
