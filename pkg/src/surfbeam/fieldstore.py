"""Grid/field data model and bit-exact run persistence.

A run directory contains ``manifest.json`` plus one raw ``.f32`` file per
stored field: little-endian 32-bit floats in C order ``[z][r][t]``.  CRC-32
checksums over the raw bytes are recorded in the manifest and re-verified on
load.  Field samples live as float64 in memory for processing; the on-disk
format is float32.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumMismatch,
    InconsistentManifest,
    IndexOutOfRange,
    IoFailure,
    NonPositiveStep,
    UnderSampled,
    VersionUnsupported,
)

FORMAT_VERSION = 1


class FieldKind(enum.Enum):
    HF_PLUS = "hf_plus"
    HF_MINUS = "hf_minus"
    HF_ZERO = "hf_zero"
    LF = "lf"
    DIFFERENCE = "difference"
    ADJUSTED = "adjusted"


@dataclass(frozen=True)
class Grid:
    """Uniform (z, r, t) sampling; axes reconstruct exactly from the triples.

    The time axis is a single retarded-time window shared by all depths:
    t' = t - z/c0.
    """

    nz: int
    dz: float
    z0: float
    nr: int
    dr: float
    nt: int
    dt: float
    t0: float

    def __post_init__(self):
        for name in ("nz", "nr", "nt"):
            if getattr(self, name) < 1:
                raise NonPositiveStep(f"{name} must be >= 1")
        for name in ("dz", "dr", "dt"):
            if not getattr(self, name) > 0:
                raise NonPositiveStep(f"{name} must be > 0")

    def z_axis(self) -> np.ndarray:
        return self.z0 + self.dz * np.arange(self.nz)

    def r_axis(self) -> np.ndarray:
        return self.dr * np.arange(self.nr)

    def t_axis(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    def nearest_z_index(self, z: float) -> int:
        iz = int(round((z - self.z0) / self.dz))
        if iz < 0 or iz >= self.nz:
            raise IndexOutOfRange(f"z={z} outside grid")
        return iz

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(**{k: d[k] for k in ("nz", "dz", "z0", "nr", "dr", "nt", "dt", "t0")})


@dataclass(frozen=True)
class GridConfig:
    nz: int
    dz: float
    nr: int
    dr: float
    nt: int
    dt: float
    z0: float = 0.0
    t0: float = 0.0
    f_max: float = 0.0  # highest frequency the grid must resolve


def create_grid(config: GridConfig) -> Grid:
    """Build a validated Grid; rejects under-sampled time axes.

    The time step must satisfy dt <= 1/(2 f_max) for the configured maximum
    frequency.
    """
    if config.f_max <= 0:
        raise NonPositiveStep("f_max must be > 0")
    if config.dt > 1.0 / (2.0 * config.f_max):
        raise UnderSampled(
            f"dt={config.dt:g} s exceeds Nyquist limit {1.0 / (2.0 * config.f_max):g} s "
            f"for f_max={config.f_max:g} Hz"
        )
    return Grid(
        nz=config.nz, dz=config.dz, z0=config.z0,
        nr=config.nr, dr=config.dr,
        nt=config.nt, dt=config.dt, t0=config.t0,
    )


@dataclass(frozen=True)
class FieldCube:
    """Immutable sampled pressure p[z][r][t] in pascals on a Grid."""

    grid: Grid
    kind: FieldKind
    samples: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples, dtype=np.float64)
        if arr.shape != (self.grid.nz, self.grid.nr, self.grid.nt):
            raise IndexOutOfRange(
                f"samples shape {arr.shape} != grid shape "
                f"{(self.grid.nz, self.grid.nr, self.grid.nt)}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("field samples must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def with_samples(self, samples: np.ndarray, kind: FieldKind, provenance: str = "") -> "FieldCube":
        """Derived cube on the same grid (new array, this cube untouched)."""
        return FieldCube(self.grid, kind, samples, provenance or self.provenance)


@dataclass(frozen=True)
class TimeSeries:
    """Contiguous copy of one (z, r) trace."""

    samples: np.ndarray
    dt: float
    t0: float

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", arr)


def slice_time_series(cube: FieldCube, iz: int, ir: int) -> TimeSeries:
    g = cube.grid
    if not (0 <= iz < g.nz) or not (0 <= ir < g.nr):
        raise IndexOutOfRange(f"(iz={iz}, ir={ir}) outside ({g.nz}, {g.nr})")
    return TimeSeries(cube.samples[iz, ir].copy(), g.dt, g.t0)


@dataclass
class RunManifest:
    """Describes one simulation run directory."""

    grid: Grid
    pulse_spec: dict
    medium: dict
    field_files: list = field(default_factory=list)  # entries: {kind, file, crc32}
    adjustments: list = field(default_factory=list)  # entries: {tag, spec_file, ...}
    provenance: str = ""
    format_version: int = FORMAT_VERSION

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "grid": self.grid.to_dict(),
            "pulse_spec": self.pulse_spec,
            "medium": self.medium,
            "field_files": self.field_files,
            "adjustments": self.adjustments,
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        doc = json.loads(text)
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise VersionUnsupported(f"manifest format_version {version} unsupported")
        return cls(
            grid=Grid.from_dict(doc["grid"]),
            pulse_spec=doc.get("pulse_spec", {}),
            medium=doc.get("medium", {}),
            field_files=doc.get("field_files", []),
            adjustments=doc.get("adjustments", []),
            provenance=doc.get("provenance", ""),
            format_version=version,
        )


@dataclass
class Run:
    manifest: RunManifest
    fields: dict  # {FieldKind or tag-string: FieldCube}


def _entry_key(entry: dict):
    """Fields are keyed by kind, adjusted/difference cubes by their tag."""
    tag = entry.get("tag")
    if tag:
        return tag
    return FieldKind(entry["kind"])


def _field_bytes(cube: FieldCube) -> bytes:
    return np.ascontiguousarray(cube.samples, dtype="<f4").tobytes()


def write_run(run: Run, path: str | Path) -> None:
    """Write manifest + one .f32 per field; checksums recorded in the manifest."""
    path = Path(path)
    manifest = run.manifest
    for entry in manifest.field_files:
        key = _entry_key(entry)
        if key not in run.fields:
            raise InconsistentManifest(f"manifest lists {entry['file']} but field {key} absent")
        if run.fields[key].grid != manifest.grid:
            raise InconsistentManifest(f"field {key} grid differs from manifest grid")
    try:
        path.mkdir(parents=True, exist_ok=True)
        for entry in manifest.field_files:
            raw = _field_bytes(run.fields[_entry_key(entry)])
            entry["crc32"] = f"{zlib.crc32(raw) & 0xFFFFFFFF:08x}"
            (path / entry["file"]).write_bytes(raw)
        (path / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_run(path: str | Path) -> Run:
    """Load and validate a run directory (checksums, grid invariants)."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise IoFailure(f"no manifest.json in {path}")
    manifest = RunManifest.from_json(manifest_path.read_text(encoding="utf-8"))
    grid = manifest.grid  # reconstructing Grid re-runs its invariants
    fields = {}
    for entry in manifest.field_files:
        fpath = path / entry["file"]
        if not fpath.exists():
            raise InconsistentManifest(f"listed field file missing: {entry['file']}")
        raw = fpath.read_bytes()
        crc = f"{zlib.crc32(raw) & 0xFFFFFFFF:08x}"
        if crc != entry.get("crc32"):
            raise ChecksumMismatch(f"{entry['file']}: crc {crc} != recorded {entry.get('crc32')}")
        arr = np.frombuffer(raw, dtype="<f4")
        if arr.size != grid.nz * grid.nr * grid.nt:
            raise InconsistentManifest(f"{entry['file']}: size {arr.size} != grid volume")
        cube = FieldCube(
            grid, FieldKind(entry["kind"]),
            arr.reshape(grid.nz, grid.nr, grid.nt).astype(np.float64),
            provenance=manifest.provenance,
        )
        fields[_entry_key(entry)] = cube
    return Run(manifest, fields)
