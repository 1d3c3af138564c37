// Persistent view state. Everything needed to reproduce the panels is
// URL-encoded, so reloading a shared link replays the identical queries.

export type AdjustVariant = "none" | "delay" | "equalizer";
export type NormMode = "peak" | "common";

export interface PinnedQuery {
  adjust: AdjustVariant;
  tauNs: number;
  zaMm: number;
}

export interface ViewState {
  runId: string;
  adjust: AdjustVariant;
  tauNs: number;
  zaMm: number;
  norm: NormMode;
  znMm: number;
  zfMm: number;
  pin: PinnedQuery | null;
}

export interface RunInfo {
  id: string;
  grid: {
    nz: number; dz_mm: number; nr: number; dr_mm: number;
    nt: number; dt_ns: number; z_max_mm: number;
  };
  pulse_spec: { f_h?: number; focus_h?: number };
}

export function tauLimitNs(run: RunInfo): number {
  const fh = run.pulse_spec?.f_h;
  return fh ? 1e9 / (2 * fh) : 100;
}

export function focusDepthMm(run: RunInfo): number {
  const f = run.pulse_spec?.focus_h;
  const zMax = run.grid.z_max_mm;
  return f ? Math.min(f * 1e3, zMax) : zMax / 2;
}

// Every field has a valid default derived from the run's metadata.
export function defaultState(run: RunInfo): ViewState {
  const zMax = run.grid.z_max_mm;
  return {
    runId: run.id,
    adjust: "none",
    tauNs: 0,
    zaMm: Math.round(zMax / 8),
    norm: "peak",
    znMm: Math.min(60, zMax / 2),
    zfMm: Math.min(130, zMax),
    pin: null,
  };
}

export function clampState(state: ViewState, run: RunInfo): ViewState {
  const lim = tauLimitNs(run);
  const zMax = run.grid.z_max_mm;
  const zn = Math.min(Math.max(state.znMm, run.grid.dz_mm), zMax);
  return {
    ...state,
    tauNs: Math.min(Math.max(state.tauNs, -lim), lim),
    zaMm: Math.min(Math.max(state.zaMm, 0), zMax),
    znMm: zn,
    zfMm: Math.min(Math.max(state.zfMm, zn), zMax),
  };
}

const NUMERIC_KEYS = ["tauNs", "zaMm", "znMm", "zfMm"] as const;

export function encodeState(state: ViewState): string {
  const params = new URLSearchParams();
  params.set("run", state.runId);
  params.set("adjust", state.adjust);
  for (const key of NUMERIC_KEYS) params.set(key, String(state[key]));
  params.set("norm", state.norm);
  if (state.pin) params.set("pin", JSON.stringify(state.pin));
  return params.toString();
}

export function decodeState(encoded: string, fallback: ViewState): ViewState {
  const params = new URLSearchParams(encoded.startsWith("#") ? encoded.slice(1) : encoded);
  const state: ViewState = { ...fallback };
  const run = params.get("run");
  if (run) state.runId = run;
  const adjust = params.get("adjust");
  if (adjust === "none" || adjust === "delay" || adjust === "equalizer") {
    state.adjust = adjust;
  }
  for (const key of NUMERIC_KEYS) {
    const raw = params.get(key);
    if (raw !== null && Number.isFinite(Number(raw))) state[key] = Number(raw);
  }
  const norm = params.get("norm");
  if (norm === "peak" || norm === "common") state.norm = norm;
  const pin = params.get("pin");
  if (pin) {
    try {
      const parsed = JSON.parse(pin);
      if (parsed && typeof parsed === "object"
          && ["none", "delay", "equalizer"].includes(parsed.adjust)
          && Number.isFinite(parsed.tauNs) && Number.isFinite(parsed.zaMm)) {
        state.pin = { adjust: parsed.adjust, tauNs: parsed.tauNs, zaMm: parsed.zaMm };
      }
    } catch {
      state.pin = null;
    }
  }
  return state;
}
