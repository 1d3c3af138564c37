// App wiring: one state object drives three panels; sliders are debounced;
// each panel holds one in-flight request with last-write-wins; errors show
// as a badge while the last good view stays on screen.

import { ApiClient, BeamPayload } from "./api.js";
import { debounce, LatestRequest } from "./debounce.js";
import { buildHeatmapModel, paintHeatmap } from "./heatmap.js";
import { buildPulsePane, paintPulsePane } from "./pulses.js";
import { fetchSparkline, formatQuality, runOptimize } from "./quality.js";
import {
  clampState,
  decodeState,
  defaultState,
  encodeState,
  focusDepthMm,
  RunInfo,
  tauLimitNs,
  ViewState,
} from "./state.js";

const API_BASE = (window as unknown as { SURFBEAM_API?: string }).SURFBEAM_API
  ?? "http://127.0.0.1:8787";

const api = new ApiClient(API_BASE);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class Panel<T> {
  private slot = new LatestRequest<T>();

  constructor(private badge: HTMLElement,
              private render: (payload: T) => void) {}

  refresh(fetcher: (signal: AbortSignal) => Promise<T>): void {
    this.slot.run(fetcher).then((payload) => {
      if (payload === null) return; // superseded by a newer request
      this.badge.textContent = "";
      this.render(payload);
    }).catch((err: Error) => {
      if (err.name === "AbortError") return;
      this.badge.textContent = `stale: ${err.message}`; // keep last good view
    });
  }
}

async function start(): Promise<void> {
  const runs = await api.runs();
  if (runs.length === 0) {
    el("status").textContent = "workspace has no runs";
    return;
  }
  const runSelect = el<HTMLSelectElement>("run-select");
  for (const run of runs) {
    const opt = document.createElement("option");
    opt.value = run.id;
    opt.textContent = `${run.id} (${run.grid.nz}x${run.grid.nr}x${run.grid.nt})`;
    runSelect.appendChild(opt);
  }

  const runById = new Map(runs.map((r) => [r.id, r]));
  let run: RunInfo = runs[0];
  let state: ViewState = decodeState(window.location.hash, defaultState(run));
  run = runById.get(state.runId) ?? runs[0];
  state = clampState({ ...state, runId: run.id }, run);

  const tauSlider = el<HTMLInputElement>("tau-slider");
  const zaSlider = el<HTMLInputElement>("za-slider");
  const tauLabel = el("tau-label");
  const zaLabel = el("za-label");
  const adjustSelect = el<HTMLSelectElement>("adjust-select");
  const normSelect = el<HTMLSelectElement>("norm-select");
  const znInput = el<HTMLInputElement>("zn-input");
  const zfInput = el<HTMLInputElement>("zf-input");

  const beamPanel = new Panel(el("beam-badge"), (payload: BeamPayload) => {
    const model = buildHeatmapModel(payload);
    paintHeatmap(el<HTMLCanvasElement>("beam-canvas"), model);
    el("beam-scale").textContent =
      `${model.dbMin.toFixed(0)} .. ${model.dbMax.toFixed(0)} dB re ` +
      `${payload.norm === "peak" ? "map peak" : "reference beam"}`;
    // the displayed effective values are always the server-quantized echo
    if (payload.effective.tau_ns !== undefined) {
      tauLabel.textContent = `${payload.effective.tau_ns.toFixed(1)} ns`;
    }
    if (payload.effective.za_mm !== undefined) {
      zaLabel.textContent = `${payload.effective.za_mm.toFixed(2)} mm`;
    }
  });

  const pulsePanel = new Panel(el("pulse-badge"),
    (pair: { za: ReturnType<typeof buildPulsePane>; focus: ReturnType<typeof buildPulsePane> }) => {
      paintPulsePane(el<HTMLCanvasElement>("pulse-za-canvas"), pair.za);
      paintPulsePane(el<HTMLCanvasElement>("pulse-focus-canvas"), pair.focus);
    });

  const qualityPanel = new Panel(el("quality-badge"),
    (doc: { text: string; spark: Array<{ tauNs: number; qDb: number | null }> }) => {
      el("quality-readout").textContent = doc.text;
      const values = doc.spark.filter((p) => p.qDb !== null) as
        Array<{ tauNs: number; qDb: number }>;
      const spark = el<HTMLCanvasElement>("spark-canvas");
      const ctx = spark.getContext("2d")!;
      ctx.clearRect(0, 0, spark.width, spark.height);
      if (values.length >= 2) {
        const lo = Math.min(...values.map((p) => p.qDb));
        const hi = Math.max(...values.map((p) => p.qDb));
        ctx.strokeStyle = "#4f8edc";
        ctx.beginPath();
        values.forEach((p, i) => {
          const x = (i / (values.length - 1)) * spark.width;
          const y = spark.height - ((p.qDb - lo) / Math.max(hi - lo, 1e-9)) * spark.height;
          if (i === 0) ctx.moveTo(x, y);
          else ctx.lineTo(x, y);
        });
        ctx.stroke();
      }
    });

  function adjustParams() {
    return { adjust: state.adjust, tauNs: state.tauNs, zaMm: state.zaMm };
  }

  function refreshAll(): void {
    state = clampState(state, run);
    window.history.replaceState(null, "", `#${encodeState(state)}`);
    tauSlider.min = String(-tauLimitNs(run));
    tauSlider.max = String(tauLimitNs(run));
    tauSlider.value = String(state.tauNs);
    zaSlider.max = String(run.grid.z_max_mm);
    zaSlider.value = String(state.zaMm);
    adjustSelect.value = state.adjust;
    normSelect.value = state.norm;
    znInput.value = String(state.znMm);
    zfInput.value = String(state.zfMm);
    tauLabel.textContent = `${state.tauNs.toFixed(1)} ns`;
    zaLabel.textContent = `${state.zaMm.toFixed(2)} mm`;

    beamPanel.refresh((signal) => api.beam(state.runId, adjustParams(), state.norm, signal));
    pulsePanel.refresh(async (signal) => {
      const za = await api.pulse(state.runId, state.zaMm, adjustParams(), signal);
      const focus = await api.pulse(state.runId, focusDepthMm(run), adjustParams(), signal);
      const pinned = state.pin
        ? await api.pulse(state.runId, state.zaMm,
                          { adjust: state.pin.adjust, tauNs: state.pin.tauNs,
                            zaMm: state.pin.zaMm }, signal)
        : null;
      return {
        za: buildPulsePane("suppression depth", za, pinned),
        focus: buildPulsePane("focal depth", focus, null),
      };
    });
    qualityPanel.refresh(async (signal) => {
      const payload = await api.quality(state.runId, adjustParams(), state.zaMm,
                                        state.znMm, state.zfMm, signal);
      const spark = state.adjust === "delay"
        ? await fetchSparkline(api, state, tauLimitNs(run), signal)
        : [];
      return { text: formatQuality(payload).text, spark };
    });
  }

  const debouncedRefresh = debounce(refreshAll, 150);

  runSelect.addEventListener("change", () => {
    run = runById.get(runSelect.value) ?? run;
    state = clampState({ ...defaultState(run), norm: state.norm }, run);
    refreshAll();
  });
  adjustSelect.addEventListener("change", () => {
    state.adjust = adjustSelect.value as ViewState["adjust"];
    refreshAll();
  });
  normSelect.addEventListener("change", () => {
    state.norm = normSelect.value as ViewState["norm"];
    refreshAll();
  });
  tauSlider.addEventListener("input", () => {
    state.tauNs = Number(tauSlider.value);
    tauLabel.textContent = `${state.tauNs.toFixed(1)} ns (pending)`;
    debouncedRefresh();
  });
  zaSlider.addEventListener("input", () => {
    state.zaMm = Number(zaSlider.value);
    zaLabel.textContent = `${state.zaMm.toFixed(2)} mm (pending)`;
    debouncedRefresh();
  });
  for (const input of [znInput, zfInput]) {
    input.addEventListener("change", () => {
      state.znMm = Number(znInput.value);
      state.zfMm = Number(zfInput.value);
      refreshAll();
    });
  }
  el("pin-button").addEventListener("click", () => {
    state.pin = { adjust: state.adjust, tauNs: state.tauNs, zaMm: state.zaMm };
    refreshAll();
  });
  el("unpin-button").addEventListener("click", () => {
    state.pin = null;
    refreshAll();
  });
  el("optimize-button").addEventListener("click", async () => {
    try {
      const { state: next, result } = await runOptimize(api, state);
      state = next;
      el("status").textContent =
        `optimum delay ${result.tauNs.toFixed(1)} ns` +
        (result.qZaDb !== null ? ` (Q_za ${result.qZaDb.toFixed(1)} dB)` : "");
      refreshAll();
    } catch (err) {
      el("status").textContent = `optimize failed: ${(err as Error).message}`;
    }
  });

  runSelect.value = state.runId;
  refreshAll();
}

start().catch((err) => {
  el("status").textContent = `cannot reach API at ${API_BASE}: ${err.message}`;
});
