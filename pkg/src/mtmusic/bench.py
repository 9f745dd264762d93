"""Monte Carlo benchmark harness: scenario presets, JSON configs, sweeps.

Runs the full estimation pipeline (estimate covariance, optionally smooth,
extract noise subspace with known q, scan the pseudo-spectrum, pick peaks,
score RMSE; independently estimate the model order) over GSNR x N grids for
each configured estimator, with per-trial counter-based seeding so results
are byte-identical regardless of worker count or scheduling.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .doa import (
    SmoothingConfig,
    TooFewPeaksError,
    doa_rmse,
    noise_subspace,
    pick_peaks,
    pseudo_spectrum,
    spatial_smooth_fb,
)
from .estimators import (
    ESTIMATOR_IDS,
    DegenerateWeightsError,
    NonFiniteIterateError,
    SingularIterateError,
    TauSelection,
    UnknownEstimatorError,
    estimate_covariance,
)
from .linalg import (
    NoConvergenceError,
    NotHermitianError,
    NotPositiveDefiniteError,
)
from .order import NonPositiveEigenvalueError, estimate_order
from .simulate import NoiseConfig, SourceConfig, UlaGeometry, synthesize_snapshots

REPORT_HEADER = (
    "estimator,gsnr_db,n,avg_rmse_deg,order_error_rate,mean_tau,mean_iterations,excluded,trials"
)

# Per-trial failures that count as excluded rather than aborting a sweep.
_TRIAL_ERRORS = (
    TooFewPeaksError,
    DegenerateWeightsError,
    NonFiniteIterateError,
    SingularIterateError,
    NotPositiveDefiniteError,
    NotHermitianError,
    NoConvergenceError,
    NonPositiveEigenvalueError,
)

DEFAULT_TRIALS = 200
DEFAULT_GRID_STEP_DEG = 0.01
DEFAULT_MASTER_SEED = 12345
FULL_FIDELITY_GRID_STEP_DEG = 0.0018
FULL_FIDELITY_TRIALS = 10_000

# Complex attenuations of the coherent five-source scenario.
COHERENT_ATTENUATIONS = (
    0.8 * np.exp(1j * np.pi / 3),
    1.0 + 0.0j,
    0.9 * np.exp(1j * np.pi / 4),
    0.7 * np.exp(1j * np.pi / 5),
    0.6 * np.exp(1j * np.pi / 6),
)

NONCOHERENT_DOAS = (-10.0, 0.0, 5.0, 15.0, 35.0)
COHERENT_DOAS = (-17.0, -3.0, 2.0, 13.0, 20.0)


class SchemaError(ValueError):
    """Config JSON violates the documented schema; message carries the path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownPresetError(ValueError):
    """Preset name not in the catalogue."""


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulated scenario plus the sweep grids run against it."""

    geometry: UlaGeometry
    sources: SourceConfig
    noise: NoiseConfig
    gsnr_grid_db: tuple[float, ...]
    n_grid: tuple[int, ...]
    trials: int = DEFAULT_TRIALS
    master_seed: int = DEFAULT_MASTER_SEED

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if len(self.gsnr_grid_db) == 0 or len(self.n_grid) == 0:
            raise ValueError("sweep grids must be non-empty")


@dataclass(frozen=True)
class BenchConfig:
    """Everything one sweep needs: scenario, estimators, pipeline settings."""

    scenario: ScenarioSpec
    estimators: tuple[str, ...] = ESTIMATOR_IDS
    grid_step_deg: float = DEFAULT_GRID_STEP_DEG
    smoothing: SmoothingConfig | None = None
    tau_selection: TauSelection = TauSelection()
    out_dir: Path = Path("bench-out")

    def __post_init__(self):
        if len(self.estimators) == 0:
            raise ValueError("estimator list must be non-empty")
        for est in self.estimators:
            if est not in ESTIMATOR_IDS:
                raise UnknownEstimatorError(f"unknown estimator id {est!r}")


@dataclass(frozen=True)
class BenchRow:
    """One (estimator, gsnr, N) cell of a report."""

    estimator: str
    gsnr_db: float
    n_snapshots: int
    avg_rmse_deg: float
    order_error_rate: float
    mean_tau: float
    mean_iterations: float
    excluded: int
    trials: int


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]


def _threshold_grid(center_db: float) -> tuple[float, ...]:
    return tuple(center_db + d for d in (-6.0, -3.0, 0.0, 3.0, 6.0))


def _noise_for(tag: str) -> NoiseConfig:
    if tag == "gauss":
        return NoiseConfig(family="gaussian")
    if tag == "cauchy":
        return NoiseConfig(family="cauchy")
    if tag == "k075":
        return NoiseConfig(family="k", shape=0.75)
    return NoiseConfig(family="inverse-gaussian", shape=0.1)


# Sweep centers: the per-scenario GSNR threshold points of the reference
# experiments (versus-snapshots operating points).
_PRESET_THRESHOLDS = {
    ("noncoherent", "gauss"): -11.0,
    ("noncoherent", "cauchy"): -11.0,
    ("noncoherent", "k075"): -19.0,
    ("noncoherent", "ig01"): -22.0,
    ("coherent", "gauss"): -12.0,
    ("coherent", "cauchy"): -14.0,
    ("coherent", "k075"): -25.0,
    ("coherent", "ig01"): -24.0,
}

PRESET_NAMES = tuple(f"{mode}-{tag}" for (mode, tag) in _PRESET_THRESHOLDS)


def preset(name: str) -> BenchConfig:
    """Build the named scenario preset with default pipeline settings.

    Non-coherent presets: 16-sensor half-wavelength ULA, five equal-power
    independent 4-QAM sources at (-10, 0, 5, 15, 35) degrees. Coherent
    presets: 22-sensor ULA, five coherent replicas at (-17, -3, 2, 13, 20)
    degrees with fixed complex attenuations, smoothed with subarray size 16.
    Noise tags: gauss, cauchy, k075 (K, shape 0.75), ig01 (inverse-Gaussian
    texture, shape 0.1).
    """
    try:
        mode, tag = name.split("-", 1)
        threshold = _PRESET_THRESHOLDS[(mode, tag)]
    except (ValueError, KeyError):
        raise UnknownPresetError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        ) from None
    if mode == "noncoherent":
        geometry = UlaGeometry(num_sensors=16)
        sources = SourceConfig(doas_deg=NONCOHERENT_DOAS)
        smoothing = None
    else:
        geometry = UlaGeometry(num_sensors=22)
        sources = SourceConfig(doas_deg=COHERENT_DOAS, attenuations=COHERENT_ATTENUATIONS)
        smoothing = SmoothingConfig(subarray_size=16)
    scenario = ScenarioSpec(
        geometry=geometry,
        sources=sources,
        noise=_noise_for(tag),
        gsnr_grid_db=_threshold_grid(threshold),
        n_grid=(1000,),
    )
    return BenchConfig(scenario=scenario, smoothing=smoothing)


def _require(mapping, key, path, typ=None):
    if key not in mapping:
        raise SchemaError(f"{path}.{key}", "missing required field")
    value = mapping[key]
    if typ is not None and not isinstance(value, typ):
        raise SchemaError(f"{path}.{key}", f"expected {typ}, got {type(value).__name__}")
    return value


def _scenario_from_dict(doc: dict, path: str) -> ScenarioSpec:
    geom_doc = _require(doc, "geometry", path, dict)
    sources_doc = _require(doc, "sources", path, dict)
    noise_doc = _require(doc, "noise", path, dict)
    try:
        geometry = UlaGeometry(
            num_sensors=int(_require(geom_doc, "num_sensors", f"{path}.geometry")),
            spacing_wavelengths=float(geom_doc.get("spacing_wavelengths", 0.5)),
        )
    except ValueError as exc:
        raise SchemaError(f"{path}.geometry", str(exc)) from exc
    try:
        attenuations = sources_doc.get("attenuations")
        if attenuations is not None:
            attenuations = tuple(complex(re, im) for re, im in attenuations)
        powers = sources_doc.get("powers")
        sources = SourceConfig(
            doas_deg=tuple(float(d) for d in _require(sources_doc, "doas_deg", f"{path}.sources")),
            powers=tuple(float(p) for p in powers) if powers is not None else None,
            attenuations=attenuations,
            base_power=float(sources_doc.get("base_power", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}.sources", str(exc)) from exc
    try:
        shape = noise_doc.get("shape")
        noise = NoiseConfig(
            family=str(_require(noise_doc, "family", f"{path}.noise")),
            dispersion=float(noise_doc.get("dispersion", 1.0)),
            shape=float(shape) if shape is not None else None,
        )
    except ValueError as exc:
        raise SchemaError(f"{path}.noise", str(exc)) from exc
    try:
        scenario = ScenarioSpec(
            geometry=geometry,
            sources=sources,
            noise=noise,
            gsnr_grid_db=tuple(float(g) for g in _require(doc, "gsnr_grid_db", path)),
            n_grid=tuple(int(n) for n in doc.get("n_grid", [1000])),
            trials=int(doc.get("trials", DEFAULT_TRIALS)),
            master_seed=int(doc.get("master_seed", DEFAULT_MASTER_SEED)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, str(exc)) from exc
    return scenario


def config_from_dict(doc: dict) -> BenchConfig:
    """Validate a parsed JSON document into a BenchConfig."""
    if not isinstance(doc, dict):
        raise SchemaError("$", "config root must be an object")
    if doc.get("schema") != 1:
        raise SchemaError("$.schema", "missing or unsupported schema version (expected 1)")
    scenario_doc = _require(doc, "scenario", "$")
    default_smoothing = None
    if isinstance(scenario_doc, str):
        base = preset(scenario_doc)
        scenario = base.scenario
        default_smoothing = base.smoothing
        overrides = {}
        if "gsnr_grid_db" in doc:
            overrides["gsnr_grid_db"] = tuple(float(g) for g in doc["gsnr_grid_db"])
        if "n_grid" in doc:
            overrides["n_grid"] = tuple(int(n) for n in doc["n_grid"])
        if "trials" in doc:
            overrides["trials"] = int(doc["trials"])
        if "master_seed" in doc:
            overrides["master_seed"] = int(doc["master_seed"])
        if overrides:
            scenario = replace(scenario, **overrides)
    elif isinstance(scenario_doc, dict):
        scenario = _scenario_from_dict(scenario_doc, "$.scenario")
    else:
        raise SchemaError("$.scenario", "must be a preset name or an object")

    estimators = doc.get("estimators", list(ESTIMATOR_IDS))
    if not isinstance(estimators, list) or not estimators:
        raise SchemaError("$.estimators", "must be a non-empty list")
    for est in estimators:
        if est not in ESTIMATOR_IDS:
            raise UnknownEstimatorError(f"unknown estimator id {est!r}")

    smoothing = default_smoothing
    if "smoothing" in doc:
        smoothing_doc = doc["smoothing"]
        if smoothing_doc is None:
            smoothing = None
        elif isinstance(smoothing_doc, dict):
            smoothing = SmoothingConfig(
                subarray_size=int(_require(smoothing_doc, "subarray_size", "$.smoothing"))
            )
        else:
            raise SchemaError("$.smoothing", "must be null or an object")

    tau_doc = doc.get("tau_selection", {})
    if not isinstance(tau_doc, dict):
        raise SchemaError("$.tau_selection", "must be an object")
    try:
        tau_selection = TauSelection(
            c=float(tau_doc.get("c", 5.0)),
            max_iters=int(tau_doc.get("max_iters", 100)),
            rel_tol=float(tau_doc.get("rel_tol", 1e-6)),
            init_factor=float(tau_doc.get("init_factor", 5.0)),
        )
    except ValueError as exc:
        raise SchemaError("$.tau_selection", str(exc)) from exc

    try:
        return BenchConfig(
            scenario=scenario,
            estimators=tuple(estimators),
            grid_step_deg=float(doc.get("grid_step_deg", DEFAULT_GRID_STEP_DEG)),
            smoothing=smoothing,
            tau_selection=tau_selection,
            out_dir=Path(doc.get("out_dir", "bench-out")),
        )
    except ValueError as exc:
        raise SchemaError("$", str(exc)) from exc


def parse_config(path) -> BenchConfig:
    """Load and validate a JSON bench config file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def _run_trial(cfg: BenchConfig, gsnr_db: float, n: int, trial_index: int) -> dict:
    """One synthesized batch pushed through every configured estimator.

    Returns per-estimator outcome dicts; failures of the per-trial error
    kinds are recorded as exclusions, not raised.
    """
    scn = cfg.scenario
    batch = synthesize_snapshots(
        scn.geometry, scn.sources, scn.noise, gsnr_db, n, (scn.master_seed, trial_index)
    )
    q = scn.sources.num_sources
    smoothing = cfg.smoothing
    if smoothing is not None:
        subspace_geom = UlaGeometry(
            num_sensors=smoothing.subarray_size,
            spacing_wavelengths=scn.geometry.spacing_wavelengths,
        )
        variant = "smoothed"
    else:
        subspace_geom = scn.geometry
        variant = "standard"
    outcomes = {}
    for est_id in cfg.estimators:
        try:
            tau_transform = None
            if smoothing is not None and est_id == "mt-gauss":
                tau_transform = lambda m: spatial_smooth_fb(m, smoothing)  # noqa: E731
            cov = estimate_covariance(
                batch.x,
                est_id,
                tau_selection=cfg.tau_selection,
                tau_transform=tau_transform,
            )
            working = cov.sigma
            if smoothing is not None:
                working = spatial_smooth_fb(working, smoothing)
            v_noise = noise_subspace(working, q)
            spectrum = pseudo_spectrum(v_noise, subspace_geom, cfg.grid_step_deg)
            peaks = pick_peaks(spectrum, q)
            q_hat = estimate_order(working, n, variant)
            outcomes[est_id] = {
                "angles": peaks.angles_deg,
                "order_error": q_hat != q,
                "tau": cov.tau_used,
                "iterations": cov.iterations,
            }
        except _TRIAL_ERRORS:
            outcomes[est_id] = None
    return outcomes


def _trial_star(args):
    return _run_trial(*args)


def run_bench(cfg: BenchConfig, workers: int = 1) -> BenchReport:
    """Run the configured sweep and aggregate per-cell statistics.

    Per-trial randomness is keyed by (master_seed, global trial index), and
    trial results are reduced in task order, so the report is identical for
    any worker count.
    """
    scn = cfg.scenario
    cells = [(gsnr, n) for gsnr in scn.gsnr_grid_db for n in scn.n_grid]
    tasks = []
    for cell_index, (gsnr, n) in enumerate(cells):
        for j in range(scn.trials):
            tasks.append((cfg, gsnr, n, cell_index * scn.trials + j))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(tasks) // (workers * 8))
            results = list(pool.map(_trial_star, tasks, chunksize=chunk))
    else:
        results = [_trial_star(task) for task in tasks]

    truth = scn.sources.doas_deg
    rows = []
    for est_id in cfg.estimators:
        for cell_index, (gsnr, n) in enumerate(cells):
            cell = results[cell_index * scn.trials : (cell_index + 1) * scn.trials]
            valid = [r[est_id] for r in cell if r[est_id] is not None]
            excluded = scn.trials - len(valid)
            if valid:
                rmse = doa_rmse([v["angles"] for v in valid], truth)
                order_rate = float(np.mean([v["order_error"] for v in valid]))
                taus = [v["tau"] for v in valid if v["tau"] is not None]
                iters = [v["iterations"] for v in valid if v["iterations"] is not None]
                mean_tau = float(np.mean(taus)) if taus else 0.0
                mean_iters = float(np.mean(iters)) if iters else 0.0
            else:
                rmse = float("nan")
                order_rate = float("nan")
                mean_tau = 0.0
                mean_iters = 0.0
            rows.append(
                BenchRow(
                    estimator=est_id,
                    gsnr_db=float(gsnr),
                    n_snapshots=int(n),
                    avg_rmse_deg=rmse,
                    order_error_rate=order_rate,
                    mean_tau=mean_tau,
                    mean_iterations=mean_iters,
                    excluded=excluded,
                    trials=scn.trials,
                )
            )
    return BenchReport(rows=tuple(rows))


def write_report_csv(report: BenchReport, path) -> None:
    """Emit the fixed-header CSV; floats use repr so parsing round-trips."""
    with open(path, "w", newline="") as fh:
        fh.write(REPORT_HEADER + "\n")
        for row in report.rows:
            fh.write(
                ",".join(
                    [
                        row.estimator,
                        repr(row.gsnr_db),
                        str(row.n_snapshots),
                        repr(row.avg_rmse_deg),
                        repr(row.order_error_rate),
                        repr(row.mean_tau),
                        repr(row.mean_iterations),
                        str(row.excluded),
                        str(row.trials),
                    ]
                )
                + "\n"
            )


def read_report_csv(path) -> BenchReport:
    """Parse a CSV written by write_report_csv back into a BenchReport."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != REPORT_HEADER:
            raise SchemaError("$.header", f"unexpected report header {header}")
        rows = tuple(
            BenchRow(
                estimator=rec[0],
                gsnr_db=float(rec[1]),
                n_snapshots=int(rec[2]),
                avg_rmse_deg=float(rec[3]),
                order_error_rate=float(rec[4]),
                mean_tau=float(rec[5]),
                mean_iterations=float(rec[6]),
                excluded=int(rec[7]),
                trials=int(rec[8]),
            )
            for rec in reader
        )
    return BenchReport(rows=rows)


def distinct_trial_seeds(cfg: BenchConfig) -> list[tuple[int, int]]:
    """The (master_seed, trial index) keys a sweep will consume, in order."""
    scn = cfg.scenario
    n_cells = len(scn.gsnr_grid_db) * len(scn.n_grid)
    return [(scn.master_seed, t) for t in range(n_cells * scn.trials)]
