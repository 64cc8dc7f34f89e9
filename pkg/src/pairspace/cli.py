"""Command-line entry point.

Subcommands: ``run`` (execute a config or preset), ``presets`` (list the
catalog), ``validate`` (parse and echo a config), ``diff-spectra``
(compare two 1-D spectrum CSVs).  Exit codes: 0 success, 1 usage error,
2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config, serialize_config
from .dhw import DhwSystem
from .dop853 import StepUnderflowError
from .fields import FieldParams
from .grid import set_fft_workers
from .observables import (charge_density, coarse_grain, marginals,
                          number_density, reduce_density, species_split,
                          total_charge, total_number)
from .presets import get_preset, preset_catalog
from .qkt import solve_qkt_grid
from .runio import (RunManifest, write_density_map, write_events_csv,
                    write_marginal_csv)
from .trajectory import SampleWindow, ensemble_run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _load_config(args) -> RunConfig:
    if (args.config is None) == (args.preset is None):
        raise UsageError("exactly one of --config or --preset is required")
    if args.preset is not None:
        try:
            cfg = get_preset(args.preset)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    else:
        try:
            with open(args.config) as f:
                text = f.read()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        cfg = parse_config(text)
    if getattr(args, "out", None):
        cfg = replace(cfg, output_dir=args.out)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, traj=replace(cfg.traj, seed=args.seed))
    return cfg


class UsageError(Exception):
    pass


def _sample_window(cfg: RunConfig) -> SampleWindow:
    t = cfg.traj
    auto = SampleWindow.for_field(cfg.field)
    return SampleWindow(
        t_min=auto.t_min if t.t_min is None else t.t_min,
        t_max=auto.t_max if t.t_max is None else t.t_max,
        z_min=auto.z_min if t.z_min is None else t.z_min,
        z_max=auto.z_max if t.z_max is None else t.z_max,
        pz_min=t.pz_min, pz_max=t.pz_max)


def _dhw_outputs(cfg, out_dir, manifest):
    system = DhwSystem(cfg.grid, cfg.field, cfg.stepper)
    final, snapshots, stats = system.evolve(
        cfg.window.t_start, cfg.window.t_end,
        snapshot_times=cfg.window.snapshot_times)
    manifest.step_stats = {k: v for k, v in stats.items()}
    # charge bookkeeping straight from the raw component (valid at any t)
    from .observables import DensityMap
    neutrality = []
    for st in snapshots + [final]:
        cmap = DensityMap(st.v0, (("z", cfg.grid.z_phys),
                                  ("p_x", cfg.grid.p_x),
                                  ("p_z", cfg.grid.p_z)))
        q = total_charge(cmap, cfg.grid)
        absq = float(reduce_density(
            DensityMap(np.abs(st.v0), cmap.axes), cfg.grid, ()).values)
        neutrality.append({"t": st.t, "Q_total": q, "abs_c_integral": absq})
    manifest.metrics["charge_neutrality"] = neutrality

    n = number_density(final, cfg.grid, cfg.field)
    c = charge_density(final, cfg.grid, cfg.field)
    f_minus, f_plus = species_split(n, c)
    manifest.metrics["N_total"] = total_number(n, cfg.grid)
    manifest.metrics["Q_total"] = total_charge(c, cfg.grid)

    files = []
    files += write_density_map(os.path.join(out_dir, "n_z_px_pz"), n)
    files += write_density_map(os.path.join(out_dir, "c_z_px_pz"), c)
    files += write_density_map(os.path.join(out_dir, "f_minus"), f_minus)
    files += write_density_map(os.path.join(out_dir, "f_plus"), f_plus)
    margs = marginals(n, cfg.grid)
    files += write_marginal_csv(os.path.join(out_dir, "n_px.csv"),
                                margs["p_x"])
    files += write_marginal_csv(os.path.join(out_dir, "n_pz.csv"),
                                margs["p_z"])
    files += write_density_map(os.path.join(out_dir, "n_px_pz"),
                               margs["p_x,p_z"])
    n_zpz = margs["z,p_z"]
    files += write_density_map(os.path.join(out_dir, "n_z_pz"), n_zpz)
    files += write_density_map(os.path.join(out_dir, "n_z_pz_smooth"),
                               coarse_grain(n_zpz, cfg.coarse))
    manifest.add_files(files)
    return final


def _traj_outputs(cfg, out_dir, manifest, threads):
    window = _sample_window(cfg)
    bw = None
    if cfg.traj.bandwidth_px is not None and cfg.traj.bandwidth_pz is not None:
        bw = (cfg.traj.bandwidth_px, cfg.traj.bandwidth_pz)
    kde_axes = (("p_x", np.linspace(-cfg.grid.L_q, cfg.grid.L_q, 161)),
                ("p_z", np.linspace(-cfg.grid.L_pz, cfg.grid.L_pz, 121)))
    res = ensemble_run(
        cfg.field, cfg.traj.n_attempts, cfg.traj.t_end, cfg.traj.seed,
        toggles=cfg.traj.toggles, window=window, spin=cfg.traj.spin,
        kde_axes=kde_axes, bandwidth=bw,
        workers=max(threads, cfg.traj.workers), ode_tol=cfg.traj.ode_tol)
    manifest.metrics["acceptance_rate"] = res.acceptance_rate
    manifest.metrics["n_events"] = int(res.events.shape[0])
    manifest.metrics["peak_times"] = res.peak_times.tolist()
    counts = {int(k): int(v) for k, v in
              zip(*np.unique(res.peak_labels, return_counts=True))}
    manifest.metrics["per_peak_counts"] = counts
    files = write_events_csv(os.path.join(out_dir, "events.csv"),
                             res.events, cfg.traj.spin, res.electrons,
                             res.positrons, res.peak_labels)
    if res.kde_total is not None:
        files += write_density_map(os.path.join(out_dir, "kde_px_pz"),
                                   res.kde_total)
        for lab, dm in res.kde_per_peak.items():
            files += write_density_map(
                os.path.join(out_dir, f"kde_px_pz_peak{lab}"), dm)
    manifest.add_files(files)
    return res


def _qkt_spectrum(cfg):
    q = cfg.qkt
    px = np.linspace(-q.px_max, q.px_max, q.n_px)
    pz = np.full_like(px, q.p_z)
    f, _, _, res = solve_qkt_grid(px, pz, cfg.field, q.t_start, q.t_end)
    return px, f, float(res.max())


def _qkt_outputs(cfg, out_dir, manifest):
    from .observables import DensityMap
    px, f, residual = _qkt_spectrum(cfg)
    manifest.metrics["bloch_residual_max"] = residual
    manifest.metrics["f_max"] = float(f.max(initial=0.0))
    dm = DensityMap(f, (("p_x", px),), "homogeneous-oracle occupation")
    manifest.add_files(write_marginal_csv(
        os.path.join(out_dir, "qkt_spectrum.csv"), dm))


def _compare_outputs(cfg, out_dir, manifest, threads):
    from .observables import DensityMap
    final = _dhw_outputs(cfg, out_dir, manifest)
    n = number_density(final, cfg.grid, cfg.field)
    # marginal spectrum: integrated over z and p_z.  The z-integral (rather
    # than a z=0 slice) keeps the comparison transport-invariant: particles
    # stream away from the origin between creation and readout.
    n_px = reduce_density(n, cfg.grid, ("p_x",))
    # oracle integrated over the same transverse range
    pz = np.linspace(-cfg.grid.L_pz, cfg.grid.L_pz, 33)
    PX, PZ = np.meshgrid(cfg.grid.p_x, pz, indexing="ij")
    f, _, _, _ = solve_qkt_grid(PX, PZ, cfg.field, cfg.qkt.t_start,
                                cfg.qkt.t_end)
    f_px = np.trapezoid(f, pz, axis=1)
    a = np.maximum(n_px.values, 0.0)
    b = f_px
    wq = cfg.grid.w_qx
    a_norm = a / np.sum(a * wq)
    b_norm = b / np.sum(b * wq)
    l1 = float(np.sum(np.abs(a_norm - b_norm) * wq))
    manifest.metrics["l1_shape_deviation_dhw_vs_oracle"] = l1
    manifest.metrics["dhw_peak_px"] = float(cfg.grid.p_x[np.argmax(a)])
    manifest.metrics["oracle_peak_px"] = float(cfg.grid.p_x[np.argmax(b)])
    files = write_marginal_csv(
        os.path.join(out_dir, "dhw_n_px.csv"), n_px)
    files += write_marginal_csv(
        os.path.join(out_dir, "oracle_n_px.csv"),
        DensityMap(f_px, (("p_x", cfg.grid.p_x),)))
    manifest.add_files(files)


def run_config(cfg: RunConfig, threads=1) -> str:
    """Execute one run; returns the manifest path."""
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    set_fft_workers(threads)
    manifest = RunManifest(config_text=serialize_config(cfg),
                           code_version=__version__, mode=cfg.mode)
    t0 = time.perf_counter()
    if cfg.mode == "dhw":
        _dhw_outputs(cfg, out_dir, manifest)
    elif cfg.mode == "traj":
        _traj_outputs(cfg, out_dir, manifest, threads)
    elif cfg.mode == "qkt":
        _qkt_outputs(cfg, out_dir, manifest)
    else:
        _compare_outputs(cfg, out_dir, manifest, threads)
        _qkt_outputs(cfg, out_dir, manifest)
    manifest.wall_time_s = time.perf_counter() - t0
    return manifest.write(out_dir)


def _read_spectrum_csv(path):
    with open(path) as f:
        rows = list(csv.reader(f))
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return data[:, 0], data[:, 1]


def _cmd_diff_spectra(args):
    xa, ya = _read_spectrum_csv(args.spectra[0])
    xb, yb = _read_spectrum_csv(args.spectra[1])
    yb = np.interp(xa, xb, yb)
    denom = np.trapezoid(np.abs(ya), xa)
    l1 = np.trapezoid(np.abs(ya - yb), xa) / denom if denom > 0 else 0.0
    linf = float(np.max(np.abs(ya - yb)))
    print(f"l1_relative = {l1:.6g}")
    print(f"linf = {linf:.6g}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pairspace",
        description="Phase-space pair-production simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="execute a configuration or preset")
    p_run.add_argument("--config", help="path to a key=value config file")
    p_run.add_argument("--preset", help="name from the preset catalog")
    p_run.add_argument("--out", help="output directory override")
    p_run.add_argument("--seed", type=int, help="sampling seed override")
    p_run.add_argument("--threads", type=int, default=1)

    sub.add_parser("presets", help="list the preset catalog")

    p_val = sub.add_parser("validate", help="parse a config and echo it")
    p_val.add_argument("--config")
    p_val.add_argument("--preset")

    p_diff = sub.add_parser("diff-spectra", help="compare two spectrum CSVs")
    p_diff.add_argument("spectra", nargs=2)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage problems
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    try:
        if args.command == "run":
            cfg = _load_config(args)
            path = run_config(cfg, threads=args.threads)
            print(path)
            return EXIT_OK
        if args.command == "presets":
            for name in sorted(preset_catalog()):
                print(name)
            return EXIT_OK
        if args.command == "validate":
            cfg = _load_config(args)
            sys.stdout.write(serialize_config(cfg))
            return EXIT_OK
        if args.command == "diff-spectra":
            return _cmd_diff_spectra(args)
        parser.print_usage()
        return EXIT_USAGE
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, StepUnderflowError, RuntimeError,
            ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
