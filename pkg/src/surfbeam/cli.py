"""Batch entry point: simulate | adjust | quality | sweep | serve.

Exit codes: 0 success, 2 usage/config error, 3 runtime/data error.  Every
command is deterministic for a fixed config; reruns produce byte-identical
CSV/JSON outputs.  ``SURFBEAM_THREADS`` caps internal parallelism (passed to
the HTTP server worker count; numerics are single-threaded BLAS/FFT calls).
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

# honor the thread cap before the numeric stack spins up its pools
_threads = os.environ.get("SURFBEAM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import click
import numpy as np

from . import adjust as adj
from . import metrics as mx
from .config import load_pipeline_config_file
from .errors import ConfigError, MissingField, SurfbeamError
from .fieldstore import FieldKind, Run, RunManifest, read_run, slice_time_series, write_run
from .metrics import Adjustment, BeamMode, ImagingRegion, TauSearch
from .propagator import Mode, simulate_pulse_complex


def _fail(exc: SurfbeamError):
    click.echo(f"error[{exc.code}]: {exc}", err=True)
    sys.exit(2 if isinstance(exc, ConfigError) else 3)


def _load_run(run_dir: str) -> Run:
    try:
        return read_run(run_dir)
    except SurfbeamError as exc:
        _fail(exc)


@click.group()
def main():
    """Dual-frequency transmit-beam workbench."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON pipeline config; defaults used when omitted.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--mode", type=click.Choice(["full", "plane-wave"]), default=None,
              help="Override the configured propagation mode.")
def simulate(config_path, out_dir, mode):
    """Run both polarities plus the reference (no manipulation) field and
    write a run directory."""
    try:
        cfg = load_pipeline_config_file(config_path)
        if mode is not None:
            doc = dict(cfg.raw)
            doc["mode"] = mode
            from .config import load_pipeline_config

            cfg = load_pipeline_config(doc)
        provenance = f"surfbeam simulate config={cfg.config_hash()}"
        fields = {}
        entries = []
        lf_cube = None
        for polarity in (+1, -1, 0):
            spec = cfg.pulse.with_polarity(polarity)
            result = simulate_pulse_complex(spec, cfg.medium, cfg.grid, cfg.propagation,
                                            provenance)
            fields[result.hf.kind] = result.hf
            entries.append({"kind": result.hf.kind.value, "file": f"{result.hf.kind.value}.f32"})
            if polarity == +1 and result.lf is not None:
                lf_cube = result.lf
        if lf_cube is not None:
            fields[FieldKind.LF] = lf_cube
            entries.append({"kind": "lf", "file": "lf.f32"})
        manifest = RunManifest(
            grid=cfg.grid,
            pulse_spec=cfg.pulse.to_dict(),
            medium=cfg.medium.to_dict(),
            field_files=entries,
            provenance=provenance,
        )
        write_run(Run(manifest, fields), out_dir)
    except SurfbeamError as exc:
        _fail(exc)
    click.echo(f"run written to {out_dir}")
    for entry in entries:
        click.echo(f"  {entry['kind']:10s} {entry['file']} crc32={entry['crc32']}")


def _adjustment_tag(variant: str, tau_ns: float | None, za_mm: float | None) -> str:
    if variant == "delay":
        return f"delay_{tau_ns:+.1f}ns"
    return f"eq_za{za_mm:.1f}mm"


@main.command("adjust")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--variant", type=click.Choice(["delay", "equalizer"]), required=True)
@click.option("--tau-ns", type=float, default=None, help="Delay in ns (delay variant).")
@click.option("--za-mm", type=float, default=None,
              help="Reference depth in mm (equalizer; optional for delay: optimizes tau).")
@click.option("--epsilon", type=float, default=1e-3, show_default=True)
def adjust_cmd(run_dir, variant, tau_ns, za_mm, epsilon):
    """Build the adjusted field and the difference field, append them to the
    run, and persist the adjustment description."""
    run = _load_run(run_dir)
    try:
        for kind in (FieldKind.HF_PLUS, FieldKind.HF_MINUS):
            if kind not in run.fields:
                raise MissingField(f"run lacks {kind.value}")
        s_plus = run.fields[FieldKind.HF_PLUS]
        s_minus = run.fields[FieldKind.HF_MINUS]
        grid = s_plus.grid
        pulse = run.manifest.pulse_spec or {}
        f_h, bw_h = pulse.get("f_h"), pulse.get("bw_h")

        if variant == "delay":
            if tau_ns is None and za_mm is None:
                raise ConfigError("delay variant needs --tau-ns or --za-mm")
            if tau_ns is None:
                lim = 1.0 / (2 * f_h) if f_h else grid.dt * 8
                region = ImagingRegion(60e-3, min(130e-3, grid.z_axis()[-1]))
                tau = mx.optimize_tau(s_plus, s_minus, za_mm * 1e-3, region,
                                      TauSearch(-lim, lim), f_h)
                tau_ns = tau * 1e9
            spec = adj.PureDelay(tau_ns * 1e-9, None if za_mm is None else za_mm * 1e-3)
        else:
            if za_mm is None:
                raise ConfigError("equalizer variant needs --za-mm")
            iza = grid.nearest_z_index(za_mm * 1e-3)
            band = (f_h * (1 - bw_h), f_h * (1 + bw_h)) if f_h and bw_h else None
            spec = adj.design_equalizer(
                slice_time_series(s_plus, iza, 0), slice_time_series(s_minus, iza, 0),
                epsilon, z_a=za_mm * 1e-3, band=band,
            )
        adjusted = adj.apply_adjustment(s_minus, spec)
        difference = adj.surf_difference(s_plus, adjusted)

        tag = _adjustment_tag(variant, tau_ns, za_mm)
        run_path = Path(run_dir)
        spec_file = f"adjustment_{tag}.json"
        (run_path / spec_file).write_text(adj.adjustment_to_json(spec), encoding="utf-8")
        existing = {e.get("tag") for e in run.manifest.adjustments}
        new_fields = [
            {"kind": "adjusted", "file": f"adjusted_{tag}.f32", "tag": f"adjusted_{tag}"},
            {"kind": "difference", "file": f"difference_{tag}.f32", "tag": f"difference_{tag}"},
        ]
        if tag not in existing:
            run.manifest.adjustments.append({
                "tag": tag, "variant": variant, "spec_file": spec_file,
                "adjusted_file": new_fields[0]["file"],
                "difference_file": new_fields[1]["file"],
            })
            run.manifest.field_files.extend(new_fields)
        run.fields[f"adjusted_{tag}"] = adjusted
        run.fields[f"difference_{tag}"] = difference
        write_run(run, run_dir)
    except SurfbeamError as exc:
        _fail(exc)
    click.echo(f"adjustment {tag} written")


def _parse_region(region: str | None, default=(60.0, 130.0)) -> ImagingRegion:
    if region is None:
        zn, zf = default
    else:
        try:
            zn, zf = (float(v) for v in region.split(","))
        except ValueError as exc:
            raise ConfigError(f"--region expects 'zn_mm,zf_mm': {exc}") from exc
    return ImagingRegion(zn * 1e-3, zf * 1e-3)


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--region", default=None, help="Imaging region 'zn_mm,zf_mm' (default 60,130).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Report directory (default: the run directory).")
def quality(run_dir, region, out_dir):
    """Quality ratios and beam CSVs for every stored adjustment."""
    run = _load_run(run_dir)
    try:
        reg = _parse_region(region)
        diffs = {e["tag"]: e for e in run.manifest.adjustments}
        if not diffs:
            raise MissingField("run has no stored adjustments (run 'adjust' first)")
        out = Path(out_dir or run_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = mx.QualityReport(region=reg)
        if FieldKind.HF_ZERO in run.fields:
            e_fund = mx.energy_map(run.fields[FieldKind.HF_ZERO])
            report.q_general["fundamental"] = mx.quality_general(e_fund, reg)
            mx.write_beam_csv(mx.beam_map(run.fields[FieldKind.HF_ZERO], BeamMode.MAX),
                              out / "beam_fundamental.csv")
        for tag, entry in sorted(diffs.items()):
            cube = run.fields.get(f"difference_{tag}")
            if cube is None:
                raise MissingField(f"difference cube for {tag} missing")
            emap = mx.energy_map(cube)
            report.q_general[tag] = mx.quality_general(emap, reg)
            spec = adj.adjustment_from_json(
                (Path(run_dir) / entry["spec_file"]).read_text(encoding="utf-8"))
            za = spec.z_a
            if za is not None:
                report.q_za_rows.append({
                    "za_mm": za * 1e3, "adjustment": tag,
                    "q_db": mx._num(mx.quality_specific(emap, reg, za)),
                })
            mx.write_beam_csv(mx.beam_map(cube, BeamMode.MAX), out / f"beam_{tag}.csv")
        mx.write_quality_report(report, out)
    except SurfbeamError as exc:
        _fail(exc)
    click.echo(f"quality report written to {out}")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--za-list", default=None, help="Comma-separated z_a values in mm.")
@click.option("--za-range", default=None, help="start:stop:step in mm (stop inclusive).")
@click.option("--adjustments", default="none,delay,equalizer", show_default=True)
@click.option("--region", default=None, help="Imaging region 'zn_mm,zf_mm'.")
@click.option("--epsilon", type=float, default=1e-3, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
def sweep(run_dir, za_list, za_range, adjustments, region, epsilon, out_dir):
    """Suppression-depth sweep: q_za.csv, tau_opt.csv, q_vs_tau.csv."""
    run = _load_run(run_dir)
    try:
        if za_list:
            zas = [float(v) * 1e-3 for v in za_list.split(",")]
        elif za_range:
            try:
                start, stop, step = (float(v) for v in za_range.split(":"))
            except ValueError as exc:
                raise ConfigError(f"--za-range expects start:stop:step: {exc}") from exc
            zas = list(np.arange(start, stop + step / 2, step) * 1e-3)
        else:
            raise ConfigError("need --za-list or --za-range")
        try:
            adjs = {Adjustment(a.strip()) for a in adjustments.split(",") if a.strip()}
        except ValueError as exc:
            raise ConfigError(f"unknown adjustment: {exc}") from exc
        reg = _parse_region(region)
        report = mx.sweep(run, zas, adjs, reg, epsilon=epsilon)
        out = Path(out_dir or run_dir)
        mx.write_quality_report(report, out)
    except SurfbeamError as exc:
        _fail(exc)
    click.echo(f"sweep report written to {out}")


@main.command()
@click.argument("workspace", type=click.Path(exists=True, file_okay=False))
@click.option("--port", type=int, default=8787, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(workspace, port, host):
    """Serve the read-only exploration API over a workspace of runs."""
    import errno
    import socket

    import uvicorn

    from .service import create_app

    # probe the port up front: uvicorn exits with its own code on bind failure
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        probe.close()
        if exc.errno == errno.EADDRINUSE:
            click.echo(f"error[PORT_IN_USE]: port {port} occupied", err=True)
            sys.exit(2)
        raise
    probe.close()
    try:
        app = create_app(workspace)
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except SurfbeamError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
