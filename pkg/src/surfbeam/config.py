"""Pipeline configuration: JSON with full defaulting.

Config files use bench-friendly units (mm, ns, us, MHz, MPa); everything is
converted to SI here.  Every field is optional; the defaults reproduce the
standard 3.5 MHz / 0.5 MHz transmit setup on the desk-scale grid.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .fieldstore import Grid, GridConfig, create_grid
from .metrics import ImagingRegion
from .propagator import (
    Absorption,
    ApertureWindow,
    MediumSpec,
    Mode,
    PropagationConfig,
    PulseComplexSpec,
)

DEFAULT_GRID = {
    "nz": 201, "dz_mm": 0.65, "z0_mm": 0.0,
    "nr": 128, "dr_mm": 0.15625,
    "nt": 2048, "dt_ns": 10.0, "t0_us": -10.24,
}
DEFAULT_PLANE_GRID = {
    "nz": 201, "dz_mm": 0.65, "z0_mm": 0.0,
    "nr": 1, "dr_mm": 0.15625,
    "nt": 2048, "dt_ns": 10.0, "t0_us": -10.24,
}
DEFAULT_MEDIUM = {"c0_m_s": 1540.0, "beta_n": 3.5, "kappa_per_pa": 400e-12, "absorption": None}
DEFAULT_PULSE = {
    "f_h_mhz": 3.5, "bw_h": 0.50, "f_l_mhz": 0.5, "bw_l": 0.25,
    "p0_h_mpa": 3.5, "p0_l_mpa": 0.85,
    "a_h_mm": 7.1, "a_l_mm": 10.0,
    "focus_h_mm": 82.0, "focus_l_mm": 82.0, "tau0_us": -0.2,
}
DEFAULT_WINDOW = {"hf_taper_start": 0.5, "lf_taper_start": 0.75}
DEFAULT_REGION = {"zn_mm": 60.0, "zf_mm": 130.0}

# Nyquist headroom: grids must resolve four times the HF carrier
F_MAX_FACTOR = 4.0


@dataclass
class PipelineConfig:
    grid: Grid
    medium: MediumSpec
    pulse: PulseComplexSpec
    propagation: PropagationConfig
    region: ImagingRegion
    epsilon: float = 1e-3
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _merge(defaults: dict, override: dict | None) -> dict:
    out = dict(defaults)
    if override:
        unknown = set(override) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        out.update(override)
    return out


def load_pipeline_config(doc: dict | None) -> PipelineConfig:
    doc = dict(doc or {})
    known = {"grid", "medium", "pulse", "mode", "window", "dz_step_mm", "store_lf",
             "region", "epsilon"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    try:
        mode = Mode(doc.get("mode", "full"))
    except ValueError as exc:
        raise ConfigError(f"mode must be 'full' or 'plane-wave': {exc}") from exc

    grid_defaults = DEFAULT_PLANE_GRID if mode is Mode.PLANE_WAVE else DEFAULT_GRID
    g = _merge(grid_defaults, doc.get("grid"))
    m = _merge(DEFAULT_MEDIUM, doc.get("medium"))
    p = _merge(DEFAULT_PULSE, doc.get("pulse"))

    try:
        pulse = PulseComplexSpec(
            f_h=p["f_h_mhz"] * 1e6, bw_h=p["bw_h"],
            f_l=p["f_l_mhz"] * 1e6, bw_l=p["bw_l"],
            p0_h=p["p0_h_mpa"] * 1e6, p0_l=p["p0_l_mpa"] * 1e6,
            a_h=p["a_h_mm"] * 1e-3, a_l=p["a_l_mm"] * 1e-3,
            focus_h=p["focus_h_mm"] * 1e-3, focus_l=p["focus_l_mm"] * 1e-3,
            tau0=p["tau0_us"] * 1e-6,
        )
        ab = m["absorption"]
        medium = MediumSpec(
            c0=m["c0_m_s"], beta_n=m["beta_n"], kappa=m["kappa_per_pa"],
            absorption=Absorption(ab["alpha0_db_cm_mhz"], ab.get("exponent", 1.0)) if ab else None,
        )
        grid = create_grid(GridConfig(
            nz=int(g["nz"]), dz=g["dz_mm"] * 1e-3, z0=g["z0_mm"] * 1e-3,
            nr=int(g["nr"]), dr=g["dr_mm"] * 1e-3,
            nt=int(g["nt"]), dt=g["dt_ns"] * 1e-9, t0=g["t0_us"] * 1e-6,
            f_max=F_MAX_FACTOR * p["f_h_mhz"] * 1e6,
        ))
        window_doc = doc.get("window", DEFAULT_WINDOW)
        if window_doc in (None, "none"):
            window = None
        else:
            w = _merge(DEFAULT_WINDOW, window_doc if isinstance(window_doc, dict) else None)
            window = ApertureWindow(w["hf_taper_start"], w["lf_taper_start"])
        dz_step = doc.get("dz_step_mm")
        propagation = PropagationConfig(
            mode=mode,
            dz_step=None if dz_step is None else dz_step * 1e-3,
            window=window,
            store_lf=bool(doc.get("store_lf", False)),
        )
        reg = _merge(DEFAULT_REGION, doc.get("region"))
        region = ImagingRegion(reg["zn_mm"] * 1e-3, reg["zf_mm"] * 1e-3)
        epsilon = float(doc.get("epsilon", 1e-3))
        if epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc

    return PipelineConfig(
        grid=grid, medium=medium, pulse=pulse, propagation=propagation,
        region=region, epsilon=epsilon, raw=doc,
    )


def load_pipeline_config_file(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return load_pipeline_config({})
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return load_pipeline_config(doc)
