"""Command-line interface.

Subcommands:
    simulate    synthesize one snapshot batch and write it to an .npz file
    doa         estimate DOAs for one batch (synthesized or loaded)
    order       estimate the number of signals for one batch
    influence   influence-norm curves (CSV + SVG)
    bench       Monte Carlo sweep over GSNR/N grids (CSV + SVG)
    plot        re-render a plot from an existing bench CSV
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .doa import (
    SmoothingConfig,
    noise_subspace,
    pick_peaks,
    pseudo_spectrum,
    spatial_smooth_fb,
    spectrum_to_csv,
)
from .estimators import estimate_covariance
from .influence import curve_to_csv, influence_curve
from .order import estimate_order
from .simulate import UlaGeometry, synthesize_snapshots


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON bench config file")
    parser.add_argument("--preset", help="scenario preset name")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--gsnr", type=float, help="GSNR in dB (default: preset sweep center)")
    parser.add_argument("--n", type=int, help="snapshot count (default: preset n_grid[0])")


def _load_bench_config(args) -> bench_mod.BenchConfig:
    if args.config is not None:
        cfg = bench_mod.parse_config(args.config)
    elif args.preset is not None:
        cfg = bench_mod.preset(args.preset)
    else:
        raise ValueError("one of --config or --preset is required")
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, scenario=replace(cfg.scenario, master_seed=args.seed))
    return cfg


def _single_batch(args):
    """Synthesize (or load) one batch plus its pipeline settings."""
    cfg = _load_bench_config(args)
    scn = cfg.scenario
    gsnr = args.gsnr if args.gsnr is not None else scn.gsnr_grid_db[len(scn.gsnr_grid_db) // 2]
    n = args.n if args.n is not None else scn.n_grid[0]
    batch = synthesize_snapshots(
        scn.geometry, scn.sources, scn.noise, gsnr, n, (scn.master_seed, 0)
    )
    return batch, cfg


def _cmd_simulate(args) -> int:
    batch, _ = _single_batch(args)
    out = args.out if args.out is not None else Path("snapshots.npz")
    np.savez(
        out,
        x=batch.x,
        doas_deg=np.asarray(batch.truth.doas_deg),
        spacing_wavelengths=batch.geometry.spacing_wavelengths,
        gsnr_db=batch.gsnr_db,
        noise_family=batch.noise.family,
        dispersion=batch.noise.dispersion,
        seed=np.asarray(batch.seed),
    )
    print(f"wrote {batch.x.shape[0]}x{batch.x.shape[1]} snapshot batch to {out}")
    return 0


def _load_npz_batch(path: Path):
    with np.load(path, allow_pickle=False) as data:
        x = np.asarray(data["x"])
        doas = tuple(float(d) for d in data["doas_deg"])
        spacing = float(data["spacing_wavelengths"])
    geom = UlaGeometry(num_sensors=x.shape[0], spacing_wavelengths=spacing)
    return x, doas, geom


def _estimation_inputs(args):
    """(x, truth doas, subspace geometry, smoothing, cfg-ish settings)."""
    if args.input is not None:
        x, doas, geom = _load_npz_batch(args.input)
        smoothing = (
            SmoothingConfig(args.subarray_size) if args.subarray_size is not None else None
        )
        tau_selection = bench_mod.TauSelection()
        grid_step = args.grid_step if args.grid_step is not None else bench_mod.DEFAULT_GRID_STEP_DEG
        return x, doas, geom, smoothing, tau_selection, grid_step
    batch, cfg = _single_batch(args)
    smoothing = cfg.smoothing
    if args.subarray_size is not None:
        smoothing = SmoothingConfig(args.subarray_size)
    grid_step = args.grid_step if args.grid_step is not None else cfg.grid_step_deg
    return batch.x, batch.truth.doas_deg, batch.geometry, smoothing, cfg.tau_selection, grid_step


def _covariance_for(args, x, smoothing, tau_selection):
    tau_transform = None
    if smoothing is not None and args.estimator == "mt-gauss":
        tau_transform = lambda m: spatial_smooth_fb(m, smoothing)  # noqa: E731
    cov = estimate_covariance(
        x, args.estimator, tau_selection=tau_selection, tau_transform=tau_transform
    )
    working = cov.sigma if smoothing is None else spatial_smooth_fb(cov.sigma, smoothing)
    return cov, working


def _cmd_doa(args) -> int:
    x, doas, geom, smoothing, tau_selection, grid_step = _estimation_inputs(args)
    q = len(doas)
    cov, working = _covariance_for(args, x, smoothing, tau_selection)
    subspace_geom = geom if smoothing is None else UlaGeometry(
        num_sensors=smoothing.subarray_size, spacing_wavelengths=geom.spacing_wavelengths
    )
    spectrum = pseudo_spectrum(noise_subspace(working, q), subspace_geom, grid_step)
    peaks = pick_peaks(spectrum, q)
    print(f"estimator: {args.estimator}")
    if cov.tau_used is not None:
        print(f"tau: {cov.tau_used:.6g}")
    print("estimated DOAs (deg): " + ", ".join(f"{a:.4f}" for a in peaks.angles_deg))
    print("true DOAs (deg):      " + ", ".join(f"{a:.4f}" for a in doas))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        spectrum_to_csv(spectrum, args.out / "spectrum.csv")
        with open(args.out / "doas.json", "w") as fh:
            json.dump(
                {"estimator": args.estimator, "doas_deg": list(peaks.angles_deg)}, fh, indent=2
            )
        print(f"wrote {args.out / 'spectrum.csv'} and {args.out / 'doas.json'}")
    return 0


def _cmd_order(args) -> int:
    x, doas, _, smoothing, tau_selection, _ = _estimation_inputs(args)
    _, working = _covariance_for(args, x, smoothing, tau_selection)
    variant = "standard" if smoothing is None else "smoothed"
    q_hat = estimate_order(working, x.shape[1], variant)
    print(f"estimator: {args.estimator} ({variant} criterion)")
    print(f"estimated number of signals: {q_hat}")
    print(f"true number of signals: {len(doas)}")
    return 0


def _cmd_influence(args) -> int:
    curve = influence_curve(epsilon=args.epsilon, base_n=args.base_n, seed=args.seed)
    out = args.out if args.out is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "influence.csv"
    svg_path = out / "influence.svg"
    curve_to_csv(curve, csv_path)
    from .plotting import render_influence_plot

    render_influence_plot(curve, svg_path)
    print(f"wrote {csv_path} and {svg_path}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_bench_config(args)
    if args.full_fidelity:
        cfg = replace(cfg, grid_step_deg=bench_mod.FULL_FIDELITY_GRID_STEP_DEG)
        cfg = replace(cfg, scenario=replace(cfg.scenario, trials=bench_mod.FULL_FIDELITY_TRIALS))
    if args.trials is not None:
        cfg = replace(cfg, scenario=replace(cfg.scenario, trials=args.trials))
    if args.grid_step is not None:
        cfg = replace(cfg, grid_step_deg=args.grid_step)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    report = bench_mod.run_bench(cfg, workers=args.workers)
    csv_path = cfg.out_dir / "bench.csv"
    bench_mod.write_report_csv(report, csv_path)
    from .plotting import render_plot

    rmse_path = cfg.out_dir / "rmse.svg"
    order_path = cfg.out_dir / "order_error.svg"
    render_plot(report, "rmse", rmse_path)
    render_plot(report, "order_error", order_path)
    print(f"ran {len(report.rows)} cells x {cfg.scenario.trials} trials")
    print(f"wrote {csv_path}, {rmse_path}, {order_path}")
    return 0


def _cmd_plot(args) -> int:
    report = bench_mod.read_report_csv(args.input)
    from .plotting import render_plot

    render_plot(report, args.metric, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtmusic",
        description="Robust measure-transformed MUSIC: simulation, estimation, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize a snapshot batch to an .npz file")
    _add_scenario_args(p_sim)
    p_sim.add_argument("--out", type=Path, help="output .npz path (default snapshots.npz)")
    p_sim.set_defaults(func=_cmd_simulate)

    for name, func, extra_help in (
        ("doa", _cmd_doa, "estimate DOAs for one batch"),
        ("order", _cmd_order, "estimate the number of signals for one batch"),
    ):
        p = sub.add_parser(name, help=extra_help)
        _add_scenario_args(p)
        p.add_argument("--input", type=Path, help="snapshot .npz from the simulate subcommand")
        p.add_argument("--estimator", default="mt-gauss", help="estimator id (default mt-gauss)")
        p.add_argument("--grid-step", type=float, help="spectrum grid step in degrees")
        p.add_argument(
            "--subarray-size", type=int, help="spatial smoothing subarray size override"
        )
        if name == "doa":
            p.add_argument("--out", type=Path, help="directory for spectrum.csv / doas.json")
        p.set_defaults(func=func)

    p_inf = sub.add_parser("influence", help="influence-norm curves (CSV + SVG)")
    p_inf.add_argument("--out", type=Path, help="output directory (default .)")
    p_inf.add_argument("--epsilon", type=float, default=0.01, help="contamination fraction")
    p_inf.add_argument("--base-n", type=int, default=100_000, help="base batch size")
    p_inf.add_argument("--seed", type=int, default=7, help="base batch seed")
    p_inf.set_defaults(func=_cmd_influence)

    p_bench = sub.add_parser("bench", help="Monte Carlo sweep (CSV + SVG)")
    p_bench.add_argument("--config", type=Path, help="JSON bench config file")
    p_bench.add_argument("--preset", help="scenario preset name")
    p_bench.add_argument("--seed", type=int, help="master seed override")
    p_bench.add_argument("--trials", type=int, help="trials per cell override")
    p_bench.add_argument("--workers", type=int, default=1, help="parallel worker count")
    p_bench.add_argument("--grid-step", type=float, help="spectrum grid step in degrees")
    p_bench.add_argument(
        "--full-fidelity",
        action="store_true",
        help="full-fidelity settings: 0.0018 deg grid, 10000 trials",
    )
    p_bench.add_argument("--out", type=Path, help="output directory")
    p_bench.set_defaults(func=_cmd_bench)

    p_plot = sub.add_parser("plot", help="re-render a plot from a bench CSV")
    p_plot.add_argument("--input", type=Path, required=True, help="bench CSV path")
    p_plot.add_argument("--metric", choices=("rmse", "order_error"), default="rmse")
    p_plot.add_argument("--out", type=Path, required=True, help="output SVG path")
    p_plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
