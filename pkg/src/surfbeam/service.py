"""Read-mostly HTTP/JSON API over a workspace of run directories.

Heavy propagation never happens in-request: the service post-processes
stored runs (adjustments, difference beams, quality ratios) so a client can
steer tau_a / z_a interactively.  Responses are deterministic: parameters
are quantized (tau_ns to 0.1 ns, za_mm to the grid slice), payloads are
serialized once and cached, and identical requests return byte-identical
bodies whether served cold or from cache.  Concurrent misses on one key
compute once (single-flight).
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import adjust as adj
from . import metrics as mx
from .errors import SurfbeamError
from .fieldstore import FieldKind, read_run
from .metrics import BeamMode, ImagingRegion, TauSearch

DB_FLOOR = -200.0
MAP_LIMIT = 256      # beam maps ship full-resolution at desk scale
TAU_MAP_LIMIT = 101  # the shift map is explicitly downsampled


def _jsonify(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class RunState:
    """Lazily materialized per-run artifacts shared across requests."""

    def __init__(self, path: Path):
        self.path = path
        self.run = read_run(path)
        self.grid = self.run.manifest.grid
        pulse = self.run.manifest.pulse_spec or {}
        self.f_h = pulse.get("f_h")
        self.bw_h = pulse.get("bw_h")
        self._lock = threading.Lock()
        self._evaluator = None
        self._shift_map = None

    def cube(self, kind: FieldKind):
        if kind not in self.run.fields:
            raise HTTPException(422, f"run lacks field {kind.value}")
        return self.run.fields[kind]

    @property
    def evaluator(self) -> mx.DifferenceEvaluator:
        with self._lock:
            if self._evaluator is None:
                self._evaluator = mx.DifferenceEvaluator(
                    self.cube(FieldKind.HF_PLUS), self.cube(FieldKind.HF_MINUS))
            return self._evaluator

    @property
    def shift_map(self) -> adj.ShiftMap:
        with self._lock:
            if self._shift_map is None:
                f_c = self.f_h or 3.5e6
                self._shift_map = adj.estimate_shift_map(
                    self.cube(FieldKind.HF_PLUS), self.cube(FieldKind.HF_MINUS),
                    window=6.0 / f_c)
            return self._shift_map

    def band(self):
        if self.f_h and self.bw_h:
            return (self.f_h * (1 - self.bw_h), self.f_h * (1 + self.bw_h))
        return None

    def tau_limit(self) -> float:
        return 1.0 / (2.0 * self.f_h) if self.f_h else self.grid.dt * 8


class Workspace:
    def __init__(self, root: Path, cache_bytes: int = 256 << 20):
        self.root = Path(root)
        self.cache_bytes = cache_bytes
        self._runs: dict[str, RunState] = {}
        self._ids: dict[str, Path] = {}
        self._lock = threading.Lock()
        self._cache: OrderedDict[str, str] = OrderedDict()
        self._cache_size = 0
        self._key_locks: dict[str, threading.Lock] = {}
        self.rescan()

    def rescan(self):
        ids = {}
        for manifest in sorted(self.root.glob("*/manifest.json")):
            digest = hashlib.sha256(manifest.read_bytes()).hexdigest()[:12]
            ids[digest] = manifest.parent
        self._ids = ids

    def run_ids(self) -> list[str]:
        return sorted(self._ids)

    def state(self, run_id: str) -> RunState:
        with self._lock:
            if run_id in self._runs:
                return self._runs[run_id]
        if run_id not in self._ids:
            raise HTTPException(404, f"unknown run {run_id}")
        state = RunState(self._ids[run_id])
        with self._lock:
            return self._runs.setdefault(run_id, state)

    def cached_json(self, key: str, builder) -> str:
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
            lock = self._key_locks.setdefault(key, threading.Lock())
        with lock:
            with self._lock:
                if key in self._cache:
                    self._cache.move_to_end(key)
                    return self._cache[key]
            payload = _jsonify(builder())
            with self._lock:
                self._cache[key] = payload
                self._cache_size += len(payload)
                while self._cache_size > self.cache_bytes and len(self._cache) > 1:
                    _, old = self._cache.popitem(last=False)
                    self._cache_size -= len(old)
                self._key_locks.pop(key, None)
            return payload


def _quantize_tau_ns(tau_ns: float) -> float:
    return round(tau_ns, 1)


def _normalize_adjust(adjust: str, tau_q: float | None) -> tuple[str, float | None]:
    """A zero delay is no adjustment; fold it onto 'none' so the payload and
    cache key coincide."""
    if adjust == "delay" and tau_q == 0.0:
        return "none", None
    return adjust, tau_q


def _db_map(values: np.ndarray, ref: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(np.maximum(values, 0.0) / ref)
    return np.maximum(db, DB_FLOOR)


def _downsample(arr: np.ndarray, limit: int = MAP_LIMIT):
    sz = max(1, int(np.ceil(arr.shape[0] / limit)))
    sr = max(1, int(np.ceil(arr.shape[1] / limit)))
    return arr[::sz, ::sr], sz, sr


class OptimizeBody(BaseModel):
    za_mm: float
    range_ns: float | None = None


def create_app(workspace_root, cache_bytes: int = 256 << 20) -> FastAPI:
    ws = Workspace(Path(workspace_root), cache_bytes)
    app = FastAPI(title="surfbeam service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.workspace = ws

    def json_response(payload: str) -> Response:
        return Response(content=payload, media_type="application/json")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "runs": len(ws.run_ids())}

    @app.get("/runs")
    def runs():
        def build():
            out = []
            for run_id in ws.run_ids():
                st = ws.state(run_id)
                g = st.grid
                out.append({
                    "id": run_id,
                    "grid": {
                        "nz": g.nz, "dz_mm": g.dz * 1e3, "nr": g.nr, "dr_mm": g.dr * 1e3,
                        "nt": g.nt, "dt_ns": g.dt * 1e9,
                        "z_max_mm": (g.z0 + g.dz * (g.nz - 1)) * 1e3,
                    },
                    "pulse_spec": st.run.manifest.pulse_spec,
                    "fields": sorted(
                        e["kind"] for e in st.run.manifest.field_files if not e.get("tag")),
                })
            return {"runs": out}
        return json_response(ws.cached_json("runs:" + ",".join(ws.run_ids()), build))

    def _resolve_adjusted(st: RunState, adjust_name: str, tau_ns, za_mm, epsilon=1e-3):
        """Difference (or baseline) cube + echo of effective parameters."""
        s_plus = st.cube(FieldKind.HF_PLUS)
        s_minus = st.cube(FieldKind.HF_MINUS)
        effective = {"adjust": adjust_name}
        if adjust_name == "fundamental":
            return st.cube(FieldKind.HF_ZERO), effective
        if adjust_name == "none":
            return adj.surf_difference(s_plus, s_minus), effective
        if adjust_name == "delay":
            if tau_ns is None:
                raise HTTPException(422, "delay adjustment needs tau_ns")
            tau_ns = _quantize_tau_ns(tau_ns)
            if abs(tau_ns * 1e-9) > st.tau_limit() + 1e-15:
                raise HTTPException(422, f"tau_ns outside +-{st.tau_limit() * 1e9:.1f}")
            effective["tau_ns"] = tau_ns
            adjusted = adj.apply_delay(s_minus, tau_ns * 1e-9)
            return adj.surf_difference(s_plus, adjusted), effective
        if adjust_name == "equalizer":
            if za_mm is None:
                raise HTTPException(422, "equalizer adjustment needs za_mm")
            try:
                iza = st.grid.nearest_z_index(za_mm * 1e-3)
            except SurfbeamError:
                raise HTTPException(422, f"za_mm={za_mm} outside the grid")
            effective["za_mm"] = st.grid.z_axis()[iza] * 1e3
            effective["epsilon"] = epsilon
            from .fieldstore import slice_time_series

            eq = adj.design_equalizer(
                slice_time_series(s_plus, iza, 0), slice_time_series(s_minus, iza, 0),
                epsilon, z_a=za_mm * 1e-3, band=st.band())
            adjusted = adj.apply_equalizer(s_minus, eq)
            return adj.surf_difference(s_plus, adjusted), effective
        raise HTTPException(422, f"unknown adjust '{adjust_name}'")

    @app.get("/runs/{run_id}/beam")
    def beam(run_id: str, adjust: str = "none", tau_ns: float | None = None,
             za_mm: float | None = None, mode: str = "max", norm: str = "peak",
             epsilon: float = 1e-3):
        st = ws.state(run_id)
        if mode not in ("rms", "max"):
            raise HTTPException(422, "mode must be rms or max")
        if norm not in ("peak", "common"):
            raise HTTPException(422, "norm must be peak or common")
        tau_q = None if tau_ns is None else _quantize_tau_ns(tau_ns)
        adjust, tau_q = _normalize_adjust(adjust, tau_q)
        key = f"beam:{run_id}:{adjust}:{tau_q}:{za_mm}:{mode}:{norm}:{epsilon}"

        def build():
            cube, effective = _resolve_adjusted(st, adjust, tau_q, za_mm, epsilon)
            bm = mx.beam_map(cube, BeamMode(mode))
            if norm == "peak":
                ref = float(bm.values.max())
            else:
                base = mx.beam_map(st.cube(FieldKind.HF_ZERO), BeamMode(mode))
                ref = float(base.values.max())
            if ref <= 0:
                ref = 1.0
            vals, sz, sr = _downsample(_db_map(bm.values, ref))
            g = st.grid
            return {
                "effective": effective,
                "mode": mode, "norm": norm, "norm_ref": ref,
                "z_mm": (g.z_axis()[::sz] * 1e3).tolist(),
                "r_mm": (g.r_axis()[::sr] * 1e3).tolist(),
                "values_db": [[round(v, 4) for v in row] for row in vals.tolist()],
            }
        return json_response(ws.cached_json(key, build))

    @app.get("/runs/{run_id}/pulse")
    def pulse(run_id: str, z_mm: float, adjust: str = "none",
              tau_ns: float | None = None, za_mm: float | None = None,
              epsilon: float = 1e-3):
        st = ws.state(run_id)
        try:
            iz = st.grid.nearest_z_index(z_mm * 1e-3)
        except SurfbeamError:
            raise HTTPException(422, f"z_mm={z_mm} outside the grid")
        tau_q = None if tau_ns is None else _quantize_tau_ns(tau_ns)
        adjust, tau_q = _normalize_adjust(adjust, tau_q)
        key = f"pulse:{run_id}:{iz}:{adjust}:{tau_q}:{za_mm}:{epsilon}"

        def build():
            s_plus = st.cube(FieldKind.HF_PLUS)
            s_minus = st.cube(FieldKind.HF_MINUS)
            if adjust == "none":
                adjusted = s_minus
                effective = {"adjust": "none"}
            elif adjust == "delay":
                if tau_q is None:
                    raise HTTPException(422, "delay adjustment needs tau_ns")
                adjusted = adj.apply_delay(s_minus, tau_q * 1e-9)
                effective = {"adjust": "delay", "tau_ns": tau_q}
            elif adjust == "equalizer":
                if za_mm is None:
                    raise HTTPException(422, "equalizer adjustment needs za_mm")
                diff, effective = _resolve_adjusted(st, adjust, None, za_mm, epsilon)
                sp = s_plus.samples[iz, 0]
                sd = diff.samples[iz, 0]
                g = st.grid
                return {
                    "effective": effective,
                    "z_mm": g.z_axis()[iz] * 1e3,
                    "t_us": (g.t_axis() * 1e6).tolist(),
                    "s_plus": sp.tolist(),
                    "s_minus_adj": (sp - sd).tolist(),
                    "s_delta": sd.tolist(),
                }
            else:
                raise HTTPException(422, f"unknown adjust '{adjust}'")
            g = st.grid
            sp = s_plus.samples[iz, 0]
            sm = adjusted.samples[iz, 0]
            return {
                "effective": effective,
                "z_mm": g.z_axis()[iz] * 1e3,
                "t_us": (g.t_axis() * 1e6).tolist(),
                "s_plus": sp.tolist(),
                "s_minus_adj": sm.tolist(),
                "s_delta": (sp - sm).tolist(),
            }
        return json_response(ws.cached_json(key, build))

    @app.get("/runs/{run_id}/quality")
    def quality(run_id: str, adjust: str = "none", za_mm: float | None = None,
                tau_ns: float | None = None, zn_mm: float = 60.0, zf_mm: float = 130.0,
                epsilon: float = 1e-3):
        st = ws.state(run_id)
        g = st.grid
        z_max = (g.z0 + g.dz * (g.nz - 1)) * 1e3
        if not (0 < zn_mm < zf_mm <= z_max + 1e-9):
            raise HTTPException(422, f"need 0 < zn_mm < zf_mm <= {z_max:.2f}")
        if za_mm is None:
            raise HTTPException(422, "quality needs za_mm (reference depth)")
        try:
            iza = g.nearest_z_index(za_mm * 1e-3)
        except SurfbeamError:
            raise HTTPException(422, f"za_mm={za_mm} outside the grid")
        tau_q = None if tau_ns is None else _quantize_tau_ns(tau_ns)
        adjust, tau_q = _normalize_adjust(adjust, tau_q)
        key = f"quality:{run_id}:{adjust}:{tau_q}:{iza}:{zn_mm}:{zf_mm}:{epsilon}"

        def build():
            region = ImagingRegion(zn_mm * 1e-3, zf_mm * 1e-3)
            za_eff = g.z_axis()[iza]
            effective = {"adjust": adjust, "za_mm": za_eff * 1e3,
                         "zn_mm": zn_mm, "zf_mm": zf_mm}
            if adjust == "fundamental":
                emap = mx.energy_map(st.cube(FieldKind.HF_ZERO))
                q_za = mx.quality_specific(emap, region, za_eff)
                q = mx.quality_general(emap, region)
            elif adjust == "none":
                ev = st.evaluator
                q_za = ev.q_za_delay(0.0, region, za_eff)
                q = ev.q_general_delay(0.0, region)
            elif adjust == "delay":
                if tau_q is None:
                    raise HTTPException(422, "delay adjustment needs tau_ns")
                effective["tau_ns"] = tau_q
                ev = st.evaluator
                q_za = ev.q_za_delay(tau_q * 1e-9, region, za_eff)
                q = ev.q_general_delay(tau_q * 1e-9, region)
            elif adjust == "equalizer":
                effective["epsilon"] = epsilon
                from .fieldstore import slice_time_series

                eq = adj.design_equalizer(
                    slice_time_series(st.cube(FieldKind.HF_PLUS), iza, 0),
                    slice_time_series(st.cube(FieldKind.HF_MINUS), iza, 0),
                    epsilon, z_a=za_eff, band=st.band())
                ev = st.evaluator
                q_za = ev.q_za_equalizer(eq.response, region, za_eff)
                q = ev.q_general_equalizer(eq.response, region)
            else:
                raise HTTPException(422, f"unknown adjust '{adjust}'")

            def clean(x):
                if math.isinf(x):
                    return "+inf" if x > 0 else "-inf"
                return round(x, 6)
            return {"effective": effective, "Q_za_dB": clean(q_za), "Q_dB": clean(q)}
        return json_response(ws.cached_json(key, build))

    @app.get("/runs/{run_id}/tau-map")
    def tau_map(run_id: str):
        st = ws.state(run_id)
        key = f"taumap:{run_id}"

        def build():
            sm = st.shift_map
            g = st.grid
            tau, sz, sr = _downsample(sm.tau, TAU_MAP_LIMIT)
            conf, _, _ = _downsample(sm.confidence, TAU_MAP_LIMIT)
            return {
                "z_mm": (g.z_axis()[::sz] * 1e3).tolist(),
                "r_mm": (g.r_axis()[::sr] * 1e3).tolist(),
                "tau_ns": [[round(v * 1e9, 4) for v in row] for row in tau.tolist()],
                "confidence": [[round(v, 4) for v in row] for row in conf.tolist()],
            }
        return json_response(ws.cached_json(key, build))

    @app.post("/runs/{run_id}/optimize")
    def optimize(run_id: str, body: OptimizeBody):
        st = ws.state(run_id)
        try:
            iza = st.grid.nearest_z_index(body.za_mm * 1e-3)
        except SurfbeamError:
            raise HTTPException(422, f"za_mm={body.za_mm} outside the grid")
        lim_ns = (body.range_ns if body.range_ns is not None else st.tau_limit() * 1e9)
        if not (0 < lim_ns <= st.tau_limit() * 1e9 + 1e-9):
            raise HTTPException(422, "range_ns outside the searchable range")
        key = f"optimize:{run_id}:{iza}:{round(lim_ns, 3)}"

        def build():
            g = st.grid
            za_eff = g.z_axis()[iza]
            z_max = g.z0 + g.dz * (g.nz - 1)
            region = ImagingRegion(min(60e-3, z_max / 2), min(130e-3, z_max))
            ev = st.evaluator
            tau_opt = mx.optimize_tau(
                st.cube(FieldKind.HF_PLUS), st.cube(FieldKind.HF_MINUS),
                za_eff, region, TauSearch(-lim_ns * 1e-9, lim_ns * 1e-9),
                st.f_h, evaluator=ev)
            q_za = ev.q_za_delay(tau_opt, region, za_eff)
            return {
                "za_mm": za_eff * 1e3,
                "tau_ns_opt": round(tau_opt * 1e9, 4),
                "Q_za_dB": ("+inf" if math.isinf(q_za) and q_za > 0 else
                            "-inf" if math.isinf(q_za) else round(q_za, 6)),
            }
        return json_response(ws.cached_json(key, build))

    return app
