"""Shared fixtures: small grids for unit tests, a constant-pressure
plane-wave run pair, and a reduced full-mode run for CLI/service tests."""

import numpy as np
import pytest

from surfbeam import propagator as pg
from surfbeam.config import load_pipeline_config
from surfbeam.fieldstore import FieldKind, Run, RunManifest, write_run


# plane-wave oracle setup: a 1 Hz "carrier" with a seconds-wide envelope is
# constant over the 20 us window, so the manipulation pressure is uniform
PLANE_DOC = {
    "mode": "plane-wave",
    "pulse": {"f_l_mhz": 1e-6, "bw_l": 0.5},
    "grid": {"nz": 131, "dz_mm": 1.0},
}

# reduced full-mode setup for fast integration tests; shorter LF pulse so the
# smaller window still holds everything
SMALL_FULL_DOC = {
    "grid": {"nz": 36, "dz_mm": 2.0, "nr": 48, "dr_mm": 0.4, "nt": 1024,
             "dt_ns": 10.0, "t0_us": -5.12},
    "pulse": {"f_l_mhz": 1.0, "bw_l": 0.5, "tau0_us": -0.1},
}


def simulate_all(cfg, store_lf=False):
    """HF+, HF-, HF0 cubes for one config."""
    import dataclasses

    prop = dataclasses.replace(cfg.propagation, store_lf=store_lf)
    out = {}
    lf = None
    for polarity in (+1, -1, 0):
        res = pg.simulate_pulse_complex(
            cfg.pulse.with_polarity(polarity), cfg.medium, cfg.grid, prop)
        out[res.hf.kind] = res.hf
        if polarity == +1:
            lf = res.lf
    return out, lf


def build_run(cfg, fields) -> Run:
    entries = [{"kind": kind.value, "file": f"{kind.value}.f32"} for kind in fields]
    manifest = RunManifest(
        grid=cfg.grid, pulse_spec=cfg.pulse.to_dict(), medium=cfg.medium.to_dict(),
        field_files=entries, provenance="test",
    )
    return Run(manifest, dict(fields))


@pytest.fixture(scope="session")
def plane_cfg():
    return load_pipeline_config(PLANE_DOC)


@pytest.fixture(scope="session")
def plane_fields(plane_cfg):
    fields, _ = simulate_all(plane_cfg)
    return fields


@pytest.fixture(scope="session")
def plane_run_dir(plane_cfg, plane_fields, tmp_path_factory):
    path = tmp_path_factory.mktemp("workspace") / "plane"
    write_run(build_run(plane_cfg, plane_fields), path)
    return path


@pytest.fixture(scope="session")
def small_full_cfg():
    return load_pipeline_config(SMALL_FULL_DOC)


@pytest.fixture(scope="session")
def small_full_fields(small_full_cfg):
    fields, _ = simulate_all(small_full_cfg)
    return fields


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_cube(grid, rng, kind=FieldKind.HF_PLUS):
    from surfbeam.fieldstore import FieldCube

    return FieldCube(grid, kind, rng.normal(size=(grid.nz, grid.nr, grid.nt)))
