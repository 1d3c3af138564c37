"""Post-processing adjustments of propagated HF fields.

Covers the two polarity-difference adjustments (constant time-shift and
on-axis Wiener equalizer), the inter-polarity delay estimation used to
characterize the accumulated shift map, difference-field synthesis, and
analytic-envelope extraction.

Sign conventions, used consistently everywhere:

* ``tau > 0`` in a ShiftMap means the positive-polarity field arrives
  earlier (speed-up under positive manipulation pressure).
* ``apply_delay(field, tau_a)`` with positive ``tau_a`` delays the field:
  multiplication by exp(-i omega tau_a).
* Hence the on-axis null at depth z_a is obtained with
  ``tau_a = -tau(z_a)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import hilbert

from .errors import ConfigError, DelayTooLarge, GridMismatch, SilentReference
from .fieldstore import FieldCube, FieldKind, Grid, TimeSeries

LOW_CONFIDENCE = 0.5


@dataclass(frozen=True)
class ShiftMap:
    """Estimated inter-polarity delay tau[z][r] with correlation confidence."""

    grid: Grid
    tau: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        for name in ("tau", "confidence"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.grid.nz, self.grid.nr):
                raise GridMismatch(f"{name} shape {arr.shape} != grid (nz, nr)")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not np.all(np.isfinite(self.confidence)):
            raise ConfigError("confidence must be finite")
        if np.abs(self.tau).max() >= self.grid.nt * self.grid.dt / 2:
            raise ConfigError("shift exceeds half the time window")

    @property
    def low_confidence(self) -> np.ndarray:
        """Mask of points whose correlation peak fell below 0.5 (flag, not failure)."""
        return self.confidence < LOW_CONFIDENCE

    def on_axis(self) -> np.ndarray:
        return self.tau[:, 0]


@dataclass(frozen=True)
class PureDelay:
    """Constant post-processing shift applied to the negative-polarity field."""

    tau_a: float
    z_a: float | None = None  # reference depth the shift was chosen for, if any

    variant = "delay"


@dataclass(frozen=True)
class Equalizer:
    """On-axis Wiener equalizer designed at reference depth z_a.

    ``response`` holds H on the rfft bins of an nt-sample window; zero outside
    the design band.
    """

    response: np.ndarray
    nt: int
    dt: float
    z_a: float
    epsilon: float
    band: tuple | None = None

    variant = "equalizer"

    def __post_init__(self):
        arr = np.ascontiguousarray(self.response, dtype=np.complex128)
        if arr.shape != (self.nt // 2 + 1,):
            raise ConfigError("response length must match rfft bins of nt")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("equalizer response must be finite at all bins")
        arr.flags.writeable = False
        object.__setattr__(self, "response", arr)


AdjustmentSpec = PureDelay | Equalizer


def adjustment_to_json(spec: AdjustmentSpec) -> str:
    if isinstance(spec, PureDelay):
        doc = {"variant": "delay", "tau_ns": spec.tau_a * 1e9,
               "za_mm": None if spec.z_a is None else spec.z_a * 1e3}
    else:
        freqs = np.fft.rfftfreq(spec.nt, spec.dt)
        doc = {
            "variant": "equalizer",
            "za_mm": spec.z_a * 1e3,
            "epsilon": spec.epsilon,
            "band_hz": list(spec.band) if spec.band else None,
            "nt": spec.nt,
            "dt_ns": spec.dt * 1e9,
            "response": [
                [f, h.real, h.imag]
                for f, h in zip(freqs.tolist(), spec.response.tolist())
            ],
        }
    return json.dumps(doc, indent=2, sort_keys=True)


def adjustment_from_json(text: str) -> AdjustmentSpec:
    doc = json.loads(text)
    if doc["variant"] == "delay":
        za = doc.get("za_mm")
        return PureDelay(doc["tau_ns"] * 1e-9, None if za is None else za * 1e-3)
    resp = np.array([complex(re, im) for _f, re, im in doc["response"]])
    band = doc.get("band_hz")
    return Equalizer(
        response=resp, nt=doc["nt"], dt=doc["dt_ns"] * 1e-9,
        z_a=doc["za_mm"] * 1e-3, epsilon=doc["epsilon"],
        band=tuple(band) if band else None,
    )


# --------------------------------------------------------------------------
# delay estimation
# --------------------------------------------------------------------------

def _window_bounds(energy: np.ndarray, wlen: int) -> np.ndarray:
    """Start index of the wlen-sample window centered on the dominant arrival
    (argmax of box-smoothed energy), per row."""
    nt = energy.shape[-1]
    smoothed = uniform_filter1d(energy, size=wlen, axis=-1, mode="constant")
    centers = np.argmax(smoothed, axis=-1)
    return np.clip(centers - wlen // 2, 0, nt - wlen)


def _parabolic_peak(c: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Refine integer argmax ``k`` of correlation rows by 3-point parabola."""
    n = c.shape[-1]
    k_in = np.clip(k, 1, n - 2)
    rows = np.arange(c.shape[0])
    y0 = c[rows, k_in]
    ym = c[rows, k_in - 1]
    yp = c[rows, k_in + 1]
    den = ym - 2.0 * y0 + yp
    frac = np.where(np.abs(den) > 0, 0.5 * (ym - yp) / np.where(den == 0, 1.0, den), 0.0)
    frac = np.clip(frac, -1.0, 1.0)
    return np.where((k > 0) & (k < n - 1), k + frac, k.astype(np.float64))


def estimate_shift_map(s_plus: FieldCube, s_minus: FieldCube, window: float) -> ShiftMap:
    """Per-(z, r) inter-polarity delay by windowed cross-correlation.

    The window is centered on the dominant arrival of the combined energy,
    the correlation peak is refined to sub-sample precision by parabolic
    interpolation, and the normalized peak value becomes the confidence
    channel.  tau > 0 means s_plus arrives earlier.
    """
    if s_plus.grid != s_minus.grid:
        raise GridMismatch("shift estimation needs a shared grid")
    g = s_plus.grid
    wlen = int(round(window / g.dt))
    wlen = max(4, min(wlen, g.nt))

    # window must span >= 3 carrier periods; carrier taken from the spectrum
    # of the strongest trace
    flat = s_plus.samples.reshape(-1, g.nt)
    energies = (flat**2).sum(axis=-1)
    if energies.max() > 0:
        ref = flat[int(np.argmax(energies))]
        spec = np.abs(np.fft.rfft(ref)) ** 2
        freqs = np.fft.rfftfreq(g.nt, g.dt)
        f_c = float((freqs * spec).sum() / spec.sum())
        if f_c > 0 and window < 3.0 / f_c:
            raise ConfigError(
                f"window {window:g} s shorter than 3 carrier periods ({3.0 / f_c:g} s)"
            )

    n2 = 1 << int(np.ceil(np.log2(2 * wlen)))
    lags = np.concatenate([np.arange(-(wlen - 1), 0), np.arange(0, wlen)])
    order = np.concatenate([np.arange(n2 - (wlen - 1), n2), np.arange(0, wlen)])

    tau = np.zeros((g.nz, g.nr))
    conf = np.zeros((g.nz, g.nr))
    cols = np.arange(wlen)
    for iz in range(g.nz):
        a = s_plus.samples[iz]
        b = s_minus.samples[iz]
        starts = _window_bounds(a**2 + b**2, wlen)
        idx = starts[:, None] + cols[None, :]
        aw = np.take_along_axis(a, idx, axis=-1)
        bw = np.take_along_axis(b, idx, axis=-1)
        # c[l] = sum_t aw[t] bw[t + l], all lags at once via FFT
        fa = np.fft.rfft(aw, n2, axis=-1)
        fb = np.fft.rfft(bw, n2, axis=-1)
        corr = np.fft.irfft(fb * np.conj(fa), n2, axis=-1)[:, order]
        kpk = np.argmax(corr, axis=-1)
        lag = _parabolic_peak(corr, kpk) + lags[0]
        norm = np.sqrt((aw**2).sum(-1) * (bw**2).sum(-1))
        ok = norm > 0
        rows = np.arange(g.nr)
        conf[iz, ok] = np.clip(corr[rows[ok], kpk[ok]] / norm[ok], 0.0, 1.0)
        tau[iz, ok] = lag[ok] * g.dt
    return ShiftMap(g, tau, conf)


# --------------------------------------------------------------------------
# adjustments
# --------------------------------------------------------------------------

def _per_slice_spectral(field: FieldCube, multiplier: np.ndarray, kind: FieldKind) -> FieldCube:
    g = field.grid
    out = np.empty_like(field.samples)
    for iz in range(g.nz):
        spec = np.fft.rfft(field.samples[iz], axis=-1)
        spec *= multiplier[None, :]
        out[iz] = np.fft.irfft(spec, g.nt, axis=-1)
    return field.with_samples(out, kind)


def apply_delay(field: FieldCube, tau_a: float) -> FieldCube:
    """Exact band-limited fractional delay: every trace multiplied by
    exp(-i omega tau_a) in the frequency domain."""
    g = field.grid
    if abs(tau_a) >= g.nt * g.dt / 4:
        raise DelayTooLarge(f"|tau_a|={abs(tau_a):g} s >= window/4")
    omega = 2.0 * np.pi * np.fft.rfftfreq(g.nt, g.dt)
    return _per_slice_spectral(field, np.exp(-1j * omega * tau_a), FieldKind.ADJUSTED)


def design_equalizer(
    ref_plus: TimeSeries,
    ref_minus: TimeSeries,
    epsilon: float,
    z_a: float = 0.0,
    band: tuple | None = None,
) -> Equalizer:
    """Wiener frequency response making the minus reference match the plus
    reference: H = S+ S-* / (|S-|^2 + epsilon max|S-|^2), zeroed outside the
    design band when one is given."""
    if epsilon <= 0:
        raise ConfigError("epsilon must be > 0")
    a = ref_plus.samples
    b = ref_minus.samples
    if a.shape != b.shape or ref_plus.dt != ref_minus.dt:
        raise GridMismatch("reference series must share sampling")
    if (a**2).sum() == 0 or (b**2).sum() == 0:
        raise SilentReference("reference series carries no energy")
    nt = a.shape[-1]
    sp = np.fft.rfft(a)
    sm = np.fft.rfft(b)
    peak_power = (np.abs(sm) ** 2).max()
    h = sp * np.conj(sm) / (np.abs(sm) ** 2 + epsilon * peak_power)
    if band is not None:
        freqs = np.fft.rfftfreq(nt, ref_plus.dt)
        lo, hi = band
        h = np.where((freqs >= lo) & (freqs <= hi), h, 0.0)
    return Equalizer(response=h, nt=nt, dt=ref_plus.dt, z_a=z_a, epsilon=epsilon, band=band)


def apply_equalizer(field: FieldCube, eq: Equalizer) -> FieldCube:
    """Apply the equalizer response to every trace of the field."""
    g = field.grid
    if eq.nt != g.nt or abs(eq.dt - g.dt) > 1e-15:
        raise GridMismatch("equalizer was designed for a different time grid")
    return _per_slice_spectral(field, eq.response, FieldKind.ADJUSTED)


def apply_adjustment(field: FieldCube, spec: AdjustmentSpec) -> FieldCube:
    if isinstance(spec, PureDelay):
        return apply_delay(field, spec.tau_a)
    return apply_equalizer(field, spec)


def surf_difference(s_plus: FieldCube, s_minus_adj: FieldCube) -> FieldCube:
    """Sample-wise difference field s_plus - s_minus_adj."""
    if s_plus.grid != s_minus_adj.grid:
        raise GridMismatch("difference needs a shared grid")
    return s_plus.with_samples(s_plus.samples - s_minus_adj.samples, FieldKind.DIFFERENCE)


# --------------------------------------------------------------------------
# analytic signal
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticSignal:
    """Complex envelope plus carrier: Re{envelope * exp(i w0 t)} rebuilds the
    original trace."""

    envelope: np.ndarray
    carrier_omega: float
    dt: float
    t0: float

    def reconstruct(self) -> np.ndarray:
        n = self.envelope.shape[-1]
        t = self.t0 + self.dt * np.arange(n)
        return np.real(self.envelope * np.exp(1j * self.carrier_omega * t))

    def magnitude(self) -> np.ndarray:
        return np.abs(self.envelope)


def analytic_envelope(ts: TimeSeries) -> AnalyticSignal:
    """One-sided-spectrum analytic signal; carrier at the spectral centroid."""
    x = ts.samples
    spec = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.shape[-1], ts.dt)
    total = spec.sum()
    f_c = float((freqs * spec).sum() / total) if total > 0 else 0.0
    analytic = hilbert(x)
    t = ts.t0 + ts.dt * np.arange(x.shape[-1])
    omega = 2.0 * np.pi * f_c
    return AnalyticSignal(analytic * np.exp(-1j * omega * t), omega, ts.dt, ts.t0)
