"""Beam maps, energy maps, quality ratios and the adjustment sweep driver.

Quality ratios are energy ratios in dB (10 log10).  All radial sums use the
axisymmetric cylindrical weight 2 pi r dr, with the on-axis sample weighted
by its cell area pi (dr/2)^2; the azimuthal sum collapses to this weight.

The sweep driver evaluates difference-field energies in the frequency domain
from radially reduced auto/cross spectra (Parseval), which is algebraically
identical to building the adjusted cube and summing squares but lets the
tau_a optimizer run thousands of evaluations per second.  Equivalence with
the direct cube pipeline is covered by tests.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import adjust
from .errors import ConfigError, MissingField
from .fieldstore import FieldCube, FieldKind, Grid, Run, slice_time_series


def gain_factor(omega0: float, tau_total: float) -> float:
    """Narrowband difference-field amplitude gain 2 sin(omega0 tau / 2)."""
    return 2.0 * math.sin(omega0 * tau_total / 2.0)


def delay_phase_equiv(tau: float, f: float) -> float:
    """Phase shift in degrees equivalent to delay ``tau`` at frequency ``f``."""
    return 360.0 * f * tau


def predicted_difference_peak(s_zero_env_peak: float, g: float) -> float:
    """Temporal-maximum estimate of the difference field: |G| times the
    unmanipulated envelope peak."""
    return abs(g) * s_zero_env_peak


# --------------------------------------------------------------------------
# maps
# --------------------------------------------------------------------------

class BeamMode(enum.Enum):
    RMS = "rms"
    MAX = "max"


@dataclass(frozen=True)
class BeamMap:
    grid: Grid
    values: np.ndarray  # (nz, nr), >= 0
    mode: BeamMode
    normalization: str = "none"  # none | peak | common
    norm_ref: float | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class EnergyMap:
    grid: Grid
    values: np.ndarray  # (nz, nr), sum_t p^2 dt

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def beam_map(cube: FieldCube, mode: BeamMode = BeamMode.MAX) -> BeamMap:
    if mode is BeamMode.RMS:
        vals = np.sqrt(np.mean(cube.samples**2, axis=-1))
    else:
        vals = np.abs(cube.samples).max(axis=-1)
    return BeamMap(cube.grid, vals, mode)


def energy_map(cube: FieldCube) -> EnergyMap:
    return EnergyMap(cube.grid, (cube.samples**2).sum(axis=-1) * cube.grid.dt)


def normalize_beam(bm: BeamMap, how: str, ref: float | None = None) -> BeamMap:
    """PEAK normalizes to the map's own maximum (max becomes exactly 1);
    COMMON divides by a shared reference snapped to the nearest power of two,
    so the scaling is exact in IEEE arithmetic and inter-map ratios are
    preserved bit-for-bit."""
    if how == "peak":
        ref = float(bm.values.max())
    elif how != "common" or ref is None:
        raise ConfigError("normalization is 'peak' or 'common' with a reference")
    if ref <= 0:
        raise ConfigError("normalization reference must be positive")
    if how == "common":
        ref = float(2.0 ** round(math.log2(ref)))
    return BeamMap(bm.grid, bm.values / ref, bm.mode, how, ref)


@dataclass(frozen=True)
class ImagingRegion:
    z_n: float
    z_f: float

    def validate(self, grid: Grid) -> None:
        if not (0 < self.z_n < self.z_f):
            raise ConfigError("need 0 < z_n < z_f")
        if self.z_f > grid.z0 + grid.dz * (grid.nz - 1) + 1e-12:
            raise ConfigError("z_f beyond grid depth")


def radial_weights(grid: Grid) -> np.ndarray:
    """Cylindrical quadrature weights; on-axis cell pi (dr/2)^2."""
    w = 2.0 * np.pi * grid.r_axis() * grid.dr
    w[0] = np.pi * (grid.dr / 2.0) ** 2
    return w


def _region_masks(grid: Grid, region: ImagingRegion) -> tuple[np.ndarray, np.ndarray]:
    z = grid.z_axis()
    eps = 1e-9 * grid.dz
    imaging = (z >= region.z_n - eps) & (z <= region.z_f + eps)
    near = z < region.z_n - eps
    return imaging, near


def _ratio_db(num: float, den: float) -> float:
    if den == 0.0:
        return math.inf if num > 0 else -math.inf
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def quality_specific(emap: EnergyMap, region: ImagingRegion, z_a: float) -> float:
    """Imaging-region beam energy over the radially summed energy of the
    (nearest-slice snapped) z_a plane.  Returns +/-inf sentinels on zero
    numerator/denominator."""
    g = emap.grid
    region.validate(g)
    iza = g.nearest_z_index(z_a)
    w = radial_weights(g)
    slice_e = (emap.values * w[None, :]).sum(axis=-1)  # per depth, dz-free
    imaging, _ = _region_masks(g, region)
    num = slice_e[imaging].sum() * g.dz
    den = slice_e[iza] * g.dz
    return _ratio_db(num, den)


def quality_general(emap: EnergyMap, region: ImagingRegion) -> float:
    """Imaging-region energy over near-field ([0, z_n)) energy."""
    g = emap.grid
    region.validate(g)
    w = radial_weights(g)
    slice_e = (emap.values * w[None, :]).sum(axis=-1)
    imaging, near = _region_masks(g, region)
    return _ratio_db(slice_e[imaging].sum() * g.dz, slice_e[near].sum() * g.dz)


# --------------------------------------------------------------------------
# fast difference-energy evaluation
# --------------------------------------------------------------------------

class DifferenceEvaluator:
    """Radially reduced spectra of a field pair for fast adjusted-difference
    energies.

    For the delay adjustment, |S+ - e^{-iwt} S-|^2 expands into terms whose
    radial sums are precomputed once; every (tau_a, z_a) evaluation is then a
    single weighted sum over frequency bins.
    """

    def __init__(self, s_plus: FieldCube, s_minus: FieldCube):
        if s_plus.grid != s_minus.grid:
            raise ConfigError("evaluator needs a shared grid")
        g = s_plus.grid
        self.grid = g
        nf = g.nt // 2 + 1
        self.omega = 2.0 * np.pi * np.fft.rfftfreq(g.nt, g.dt)
        # rfft Parseval weights for real signals: sum_t x^2 = (1/nt) sum_k v_k |X_k|^2
        v = np.full(nf, 2.0)
        v[0] = 1.0
        if g.nt % 2 == 0:
            v[-1] = 1.0
        self._v = v
        self._scale = g.dt / g.nt
        w = radial_weights(g)
        self.p_plus = np.empty((g.nz, nf))
        self.p_minus = np.empty((g.nz, nf))
        self.cross = np.empty((g.nz, nf), dtype=np.complex128)
        self.onax_plus = np.empty((g.nz, nf), dtype=np.complex128)
        self.onax_minus = np.empty((g.nz, nf), dtype=np.complex128)
        for iz in range(g.nz):
            sp = np.fft.rfft(s_plus.samples[iz], axis=-1)
            sm = np.fft.rfft(s_minus.samples[iz], axis=-1)
            self.p_plus[iz] = (v * np.abs(sp) ** 2 * w[:, None]).sum(axis=0) * self._scale
            self.p_minus[iz] = (v * np.abs(sm) ** 2 * w[:, None]).sum(axis=0) * self._scale
            self.cross[iz] = (v * sp * np.conj(sm) * w[:, None]).sum(axis=0) * self._scale
            self.onax_plus[iz] = sp[0]
            self.onax_minus[iz] = sm[0]

    # -- radially summed slice energies (pascal^2 s m^2 per depth) ----------

    def slice_energies_delay(self, tau_a: float) -> np.ndarray:
        u = np.exp(-1j * self.omega * tau_a)
        e = (self.p_plus + self.p_minus).sum(axis=-1) \
            - 2.0 * (self.cross * np.conj(u)[None, :]).real.sum(axis=-1)
        return np.maximum(e, 0.0)

    def slice_energies_equalizer(self, response: np.ndarray) -> np.ndarray:
        h2 = np.abs(response) ** 2
        e = self.p_plus.sum(axis=-1) + (self.p_minus * h2[None, :]).sum(axis=-1) \
            - 2.0 * (self.cross * np.conj(response)[None, :]).real.sum(axis=-1)
        return np.maximum(e, 0.0)

    # -- on-axis energies ----------------------------------------------------

    def onaxis_energy_delay(self, iz: int, tau_a: float) -> float:
        u = np.exp(-1j * self.omega * tau_a)
        d = self.onax_plus[iz] - u * self.onax_minus[iz]
        return float((self._v * np.abs(d) ** 2).sum() * self._scale)

    def onaxis_energy_equalizer(self, iz: int, response: np.ndarray) -> float:
        d = self.onax_plus[iz] - response * self.onax_minus[iz]
        return float((self._v * np.abs(d) ** 2).sum() * self._scale)

    # -- quality ratios --------------------------------------------------------

    def _q_za(self, slice_e: np.ndarray, region: ImagingRegion, z_a: float) -> float:
        iza = self.grid.nearest_z_index(z_a)
        imaging, _ = _region_masks(self.grid, region)
        return _ratio_db(slice_e[imaging].sum(), slice_e[iza])

    def _q_general(self, slice_e: np.ndarray, region: ImagingRegion) -> float:
        imaging, near = _region_masks(self.grid, region)
        return _ratio_db(slice_e[imaging].sum(), slice_e[near].sum())

    def q_za_delay(self, tau_a: float, region: ImagingRegion, z_a: float) -> float:
        return self._q_za(self.slice_energies_delay(tau_a), region, z_a)

    def q_za_equalizer(self, response: np.ndarray, region: ImagingRegion, z_a: float) -> float:
        return self._q_za(self.slice_energies_equalizer(response), region, z_a)

    def q_general_delay(self, tau_a: float, region: ImagingRegion) -> float:
        return self._q_general(self.slice_energies_delay(tau_a), region)

    def q_general_equalizer(self, response: np.ndarray, region: ImagingRegion) -> float:
        return self._q_general(self.slice_energies_equalizer(response), region)


# --------------------------------------------------------------------------
# optimum delay search
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TauSearch:
    lo: float
    hi: float
    coarse: int = 65  # odd so tau_a = 0 and both endpoints are on the grid
    tol: float = 0.05e-9

    def validate(self, f_h: float | None) -> None:
        if not self.lo < self.hi:
            raise ConfigError("empty search range")
        if f_h and (self.lo < -1.0 / (2 * f_h) - 1e-15 or self.hi > 1.0 / (2 * f_h) + 1e-15):
            raise ConfigError("search range exceeds +-1/(2 f_H)")


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimize_tau(
    s_plus: FieldCube,
    s_minus: FieldCube,
    z_a: float,
    region: ImagingRegion,
    search: TauSearch,
    f_h: float | None = None,
    evaluator: DifferenceEvaluator | None = None,
) -> float:
    """Delay maximizing the depth-specific quality ratio at z_a: coarse grid
    then golden-section refinement; ties break toward the smallest |tau_a|."""
    search.validate(f_h)
    ev = evaluator or DifferenceEvaluator(s_plus, s_minus)

    def q(tau_a: float) -> float:
        return ev.q_za_delay(tau_a, region, z_a)

    taus = np.linspace(search.lo, search.hi, search.coarse)
    qs = np.array([q(t) for t in taus])
    best = np.flatnonzero(qs == qs.max())
    ibest = best[np.argmin(np.abs(taus[best]))]
    lo = taus[max(ibest - 1, 0)]
    hi = taus[min(ibest + 1, len(taus) - 1)]
    return _golden_max(q, lo, hi, search.tol)


# --------------------------------------------------------------------------
# sweep driver
# --------------------------------------------------------------------------

class Adjustment(enum.Enum):
    NONE = "none"
    DELAY = "delay"
    EQUALIZER = "equalizer"


@dataclass
class QualityReport:
    """Numbers behind the quality-vs-depth comparison figures."""

    region: ImagingRegion
    q_za_rows: list = field(default_factory=list)       # {za_mm, adjustment, q_db}
    tau_opt_rows: list = field(default_factory=list)    # {za_mm, tau_ns}
    q_vs_tau_rows: list = field(default_factory=list)   # {tau_ns, q_db}
    q_general: dict = field(default_factory=dict)       # adjustment tag -> dB
    beam_maps: dict = field(default_factory=dict)       # tag -> BeamMap

    def q_za_curve(self, adjustment: str) -> list:
        return [(r["za_mm"], r["q_db"]) for r in self.q_za_rows if r["adjustment"] == adjustment]


def _num(x: float) -> float | str:
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return x


def sweep(
    run: Run,
    za_list: list,
    adjustments: set | list,
    region: ImagingRegion,
    epsilon: float = 1e-3,
    search: TauSearch | None = None,
    q_vs_tau_points: int = 129,
) -> QualityReport:
    """Per-(z_a, adjustment) quality ratios plus optimum-delay and Q(tau_a)
    curves, with the unmanipulated-field baseline."""
    for kind in (FieldKind.HF_PLUS, FieldKind.HF_MINUS, FieldKind.HF_ZERO):
        if kind not in run.fields:
            raise MissingField(f"run lacks {kind.value}")
    s_plus = run.fields[FieldKind.HF_PLUS]
    s_minus = run.fields[FieldKind.HF_MINUS]
    s_zero = run.fields[FieldKind.HF_ZERO]
    grid = s_plus.grid
    region.validate(grid)
    adjustments = {Adjustment(a) if not isinstance(a, Adjustment) else a for a in adjustments}

    pulse = run.manifest.pulse_spec or {}
    f_h = pulse.get("f_h")
    bw_h = pulse.get("bw_h")
    band = (f_h * (1 - bw_h), f_h * (1 + bw_h)) if f_h and bw_h else None
    lim = 1.0 / (2.0 * f_h) if f_h else grid.dt * 8
    search = search or TauSearch(-lim, lim)

    ev = DifferenceEvaluator(s_plus, s_minus)
    report = QualityReport(region=region)

    # baselines: unmanipulated (fundamental) beam and the non-adjusted difference
    e_fund = energy_map(s_zero)
    report.q_general["fundamental"] = quality_general(e_fund, region)
    report.q_general["none"] = ev.q_general_delay(0.0, region)

    # Q(tau_a) curve for the delay adjustment
    for tau in np.linspace(search.lo, search.hi, q_vs_tau_points):
        report.q_vs_tau_rows.append(
            {"tau_ns": tau * 1e9, "q_db": _num(ev.q_general_delay(tau, region))}
        )

    for za in za_list:
        iza = grid.nearest_z_index(za)
        za_mm = grid.z_axis()[iza] * 1e3  # effective (snapped) depth
        report.q_za_rows.append({
            "za_mm": za_mm, "adjustment": "fundamental",
            "q_db": _num(quality_specific(e_fund, region, za)),
        })
        if Adjustment.NONE in adjustments:
            report.q_za_rows.append({
                "za_mm": za_mm, "adjustment": "none",
                "q_db": _num(ev.q_za_delay(0.0, region, za)),
            })
        if Adjustment.DELAY in adjustments:
            tau_opt = optimize_tau(s_plus, s_minus, za, region, search, f_h, ev)
            report.tau_opt_rows.append({"za_mm": za_mm, "tau_ns": tau_opt * 1e9})
            report.q_za_rows.append({
                "za_mm": za_mm, "adjustment": "delay",
                "q_db": _num(ev.q_za_delay(tau_opt, region, za)),
            })
        if Adjustment.EQUALIZER in adjustments:
            eq = adjust.design_equalizer(
                slice_time_series(s_plus, iza, 0),
                slice_time_series(s_minus, iza, 0),
                epsilon, z_a=za, band=band,
            )
            report.q_za_rows.append({
                "za_mm": za_mm, "adjustment": "equalizer",
                "q_db": _num(ev.q_za_equalizer(eq.response, region, za)),
            })
    return report


# --------------------------------------------------------------------------
# report serialization
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_quality_report(report: QualityReport, outdir) -> None:
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    doc = {
        "region": {"zn_mm": report.region.z_n * 1e3, "zf_mm": report.region.z_f * 1e3},
        "q_general_db": report.q_general,
        "q_za": report.q_za_rows,
        "tau_opt": report.tau_opt_rows,
        "q_vs_tau": report.q_vs_tau_rows,
    }
    (outdir / "quality.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8"
    )
    lines = ["z_a_mm,adjustment,Q_dB"]
    for r in report.q_za_rows:
        lines.append(f"{_fmt(r['za_mm'])},{r['adjustment']},{_fmt(r['q_db'])}")
    (outdir / "q_za.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if report.tau_opt_rows:
        lines = ["z_a_mm,tau_ns"]
        for r in report.tau_opt_rows:
            lines.append(f"{_fmt(r['za_mm'])},{_fmt(r['tau_ns'])}")
        (outdir / "tau_opt.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if report.q_vs_tau_rows:
        lines = ["tau_ns,Q_dB"]
        for r in report.q_vs_tau_rows:
            lines.append(f"{_fmt(r['tau_ns'])},{_fmt(r['q_db'])}")
        (outdir / "q_vs_tau.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_beam_csv(bm: BeamMap, path) -> None:
    z = bm.grid.z_axis() * 1e3
    r = bm.grid.r_axis() * 1e3
    lines = ["z_mm,r_mm,value"]
    for iz in range(bm.grid.nz):
        for ir in range(bm.grid.nr):
            lines.append(f"{_fmt(z[iz])},{_fmt(r[ir])},{_fmt(bm.values[iz, ir])}")
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
