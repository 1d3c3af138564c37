// Typed client for the surfbeam service. The API base URL is the only
// configuration; all numeric payloads arrive as plain JSON.

import type { AdjustVariant, RunInfo } from "./state.js";

export interface BeamPayload {
  effective: { adjust: string; tau_ns?: number; za_mm?: number };
  mode: string;
  norm: string;
  norm_ref: number;
  z_mm: number[];
  r_mm: number[];
  values_db: number[][];
}

export interface PulsePayload {
  effective: { adjust: string; tau_ns?: number; za_mm?: number };
  z_mm: number;
  t_us: number[];
  s_plus: number[];
  s_minus_adj: number[];
  s_delta: number[];
}

export interface QualityPayload {
  effective: { adjust: string; tau_ns?: number; za_mm: number };
  Q_za_dB: number | string;
  Q_dB: number | string;
}

export interface OptimizePayload {
  za_mm: number;
  tau_ns_opt: number;
  Q_za_dB: number | string;
}

export interface AdjustParams {
  adjust: AdjustVariant;
  tauNs: number;
  zaMm: number;
}

function adjustQuery(params: AdjustParams): Record<string, string> {
  if (params.adjust === "delay") return { adjust: "delay", tau_ns: String(params.tauNs) };
  if (params.adjust === "equalizer") return { adjust: "equalizer", za_mm: String(params.zaMm) };
  return { adjust: "none" };
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private async get<T>(path: string, query: Record<string, string>,
                       signal?: AbortSignal): Promise<T> {
    const url = new URL(path, this.baseUrl);
    for (const [k, v] of Object.entries(query)) url.searchParams.set(k, v);
    const resp = await fetch(url.toString(), { signal });
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
    return resp.json() as Promise<T>;
  }

  async runs(signal?: AbortSignal): Promise<RunInfo[]> {
    const doc = await this.get<{ runs: RunInfo[] }>("/runs", {}, signal);
    return doc.runs;
  }

  beam(runId: string, params: AdjustParams, norm: string,
       signal?: AbortSignal): Promise<BeamPayload> {
    return this.get(`/runs/${runId}/beam`,
                    { ...adjustQuery(params), mode: "max", norm }, signal);
  }

  pulse(runId: string, zMm: number, params: AdjustParams,
        signal?: AbortSignal): Promise<PulsePayload> {
    return this.get(`/runs/${runId}/pulse`,
                    { ...adjustQuery(params), z_mm: String(zMm) }, signal);
  }

  quality(runId: string, params: AdjustParams, zaMm: number, znMm: number,
          zfMm: number, signal?: AbortSignal): Promise<QualityPayload> {
    return this.get(`/runs/${runId}/quality`, {
      ...adjustQuery(params),
      za_mm: String(zaMm), zn_mm: String(znMm), zf_mm: String(zfMm),
    }, signal);
  }

  async optimize(runId: string, zaMm: number,
                 signal?: AbortSignal): Promise<OptimizePayload> {
    const url = new URL(`/runs/${runId}/optimize`, this.baseUrl);
    const resp = await fetch(url.toString(), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ za_mm: zaMm }),
      signal,
    });
    if (!resp.ok) throw new Error(`/optimize: HTTP ${resp.status}`);
    return resp.json() as Promise<OptimizePayload>;
  }
}
