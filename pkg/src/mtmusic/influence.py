"""Influence-function and Fisher-ratio diagnostics.

Quantifies estimator robustness under point contamination: closed-form
influence for the MT-covariance functional (analytic transformed moments for
proper complex normal inputs), a finite-contamination numerical influence for
estimators without closed forms, and the two-sided bound on the
transform-domain Fisher information ratio that motivates the scale selection
constant c.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .estimators import MtFunctionSpec, estimate_covariance
from .linalg import NotPositiveDefiniteError, frob_norm, hermitize
from .simulate import derive_rng

CURVE_NORM_RANGE = (0.1, 20.0)
CURVE_POINTS = 64


class EmptyBaseError(ValueError):
    """Numerical influence needs a large base batch."""


@dataclass(frozen=True)
class MtMoments:
    """Transformed-measure mean, covariance, and MT-function mass E[u]."""

    mt_mean: np.ndarray
    mt_cov: np.ndarray
    eu: float

    def __post_init__(self):
        if self.eu <= 0:
            raise ValueError("E[u] must be positive")


@dataclass(frozen=True)
class IfCurve:
    """Influence Frobenius norms over contamination norms, per estimator."""

    norms: np.ndarray
    if_fro: dict[str, np.ndarray]


def gaussian_analytic_mt_moments(sigma, tau: float) -> MtMoments:
    """Exact MT moments of a zero-mean proper complex normal input.

    For covariance `sigma` and the Gaussian MT-function at scale tau, the
    transformed mean is 0, the transformed covariance is
    (sigma^{-1} + tau^{-2} I)^{-1}, and E[u] is
    (pi tau^2)^{-p} / det(I + sigma / tau^2).

    Raises:
        NotPositiveDefiniteError: sigma is not positive definite.
    """
    sigma = hermitize(np.asarray(sigma, dtype=np.complex128))
    lam = np.linalg.eigvalsh(sigma)
    if lam[0] <= 0:
        raise NotPositiveDefiniteError("sigma must be positive definite")
    p = sigma.shape[0]
    mt_cov = hermitize(tau**2 * np.linalg.solve(tau**2 * np.eye(p) + sigma, sigma))
    log_det = float(np.sum(np.log1p(lam / tau**2)))
    eu = float((np.pi * tau**2) ** (-p) * math.exp(-log_det))
    return MtMoments(mt_mean=np.zeros(p, dtype=np.complex128), mt_cov=mt_cov, eu=eu)


def influence_mt(y, moments: MtMoments, u: MtFunctionSpec) -> np.ndarray:
    """Influence of point contamination at y on the MT-covariance functional.

    IF(y) = u(y) [ (y - mt_mean)(y - mt_mean)^H - mt_cov ] / E[u].
    Hermitian, not PSD in general; for the Gaussian MT-function its norm
    decays to 0 as ||y|| grows, while the unit kind reproduces the unbounded
    sample-covariance influence.
    """
    y = np.asarray(y, dtype=np.complex128).ravel()
    p = moments.mt_cov.shape[0]
    if y.size != p:
        raise ValueError(f"y has dimension {y.size}, moments have {p}")
    if u.kind == "gaussian" and u.dimension != p:
        raise ValueError("MT-function dimension does not match moments")
    u_val = float(u.evaluate(y[:, None])[0])
    d = y - moments.mt_mean
    return hermitize(u_val * (np.outer(d, d.conj()) - moments.mt_cov) / moments.eu)


def empirical_influence(
    estimator_id: str,
    y,
    base,
    epsilon: float,
    *,
    tau: float | None = None,
    sign_location: str = "zero",
) -> np.ndarray:
    """Finite-contamination numerical influence for a registered estimator.

    Appends ceil(epsilon * N) copies of y to the base batch and differences
    the two estimates, scaled by the realized contamination fraction.
    "mt-gauss" requires a fixed tau: a data-driven scale would change between
    the base and contaminated batches and pollute the finite difference.

    Args:
        estimator_id: One of the registered estimator ids.
        y: Contamination point, p-vector.
        base: Base batch (ndarray or SnapshotBatch), N >= 1000.
        epsilon: Contamination fraction in (0, 0.05].

    Returns:
        Matrix-valued influence estimate.
    """
    if not 0.0 < epsilon <= 0.05:
        raise ValueError("epsilon must lie in (0, 0.05]")
    arr = np.asarray(getattr(base, "x", base), dtype=np.complex128)
    n = arr.shape[1]
    if n < 1000:
        raise EmptyBaseError("base batch must have at least 1000 snapshots")
    if estimator_id == "mt-gauss" and tau is None:
        raise ValueError("mt-gauss numerical influence needs a fixed tau")
    y = np.asarray(y, dtype=np.complex128).ravel()
    m = math.ceil(epsilon * n)
    contaminated = np.concatenate([arr, np.tile(y[:, None], (1, m))], axis=1)
    kwargs = dict(tau=tau, sign_location=sign_location)
    base_est = estimate_covariance(arr, estimator_id, **kwargs)
    cont_est = estimate_covariance(contaminated, estimator_id, **kwargs)
    realized = m / (n + m)
    return (cont_est.sigma - base_est.sigma) / realized


def fisher_ratio_bounds(sigma, tau: float):
    """Two-sided bound on the transform-domain Fisher information ratio.

    lower = tau^4 / (lambda_max(sigma) + tau^2)^2,
    upper = tau^4 / (lambda_min(sigma) + tau^2)^2.
    With the fixed-point scale tau^2 = (c+1) lambda_max, the lower bound is
    at least (c/(1+c))^2 regardless of sigma.

    Raises:
        NotPositiveDefiniteError: sigma is not positive definite.
    """
    sigma = hermitize(np.asarray(sigma, dtype=np.complex128))
    lam = np.linalg.eigvalsh(sigma)
    if lam[0] <= 0:
        raise NotPositiveDefiniteError("sigma must be positive definite")
    lower = tau**4 / (lam[-1] + tau**2) ** 2
    upper = tau**4 / (lam[0] + tau**2) ** 2
    return float(lower), float(upper)


def standard_complex_normal(dimension: int, n: int, seed) -> np.ndarray:
    """Zero-mean proper complex normal batch with identity covariance."""
    rng = derive_rng(seed)
    scale = np.sqrt(0.5)
    return scale * (rng.standard_normal((dimension, n)) + 1j * rng.standard_normal((dimension, n)))


def influence_curve(
    *,
    norms=None,
    taus=(1.0, 1.5, 2.0),
    dimension: int = 2,
    baselines=("scm", "sign", "tyler"),
    epsilon: float = 0.01,
    base_n: int = 100_000,
    seed: int = 7,
    direction=None,
) -> IfCurve:
    """Influence Frobenius norm vs contamination norm, standard normal base.

    MT curves (one per tau) and the sample-covariance curve use the analytic
    influence with the population moments of the base distribution; "sign"
    and "tyler" use the numerical influence on a simulated base batch of
    base_n snapshots. Contamination moves along ``direction`` (default: the
    first coordinate axis; the base is spherical, so the choice is
    immaterial).
    """
    if norms is None:
        norms = np.logspace(
            np.log10(CURVE_NORM_RANGE[0]), np.log10(CURVE_NORM_RANGE[1]), CURVE_POINTS
        )
    norms = np.asarray(norms, dtype=float)
    if direction is None:
        direction = np.zeros(dimension, dtype=np.complex128)
        direction[0] = 1.0
    direction = np.asarray(direction, dtype=np.complex128).ravel()
    direction = direction / np.linalg.norm(direction)

    eye = np.eye(dimension, dtype=np.complex128)
    curves: dict[str, np.ndarray] = {}
    for tau in taus:
        moments = gaussian_analytic_mt_moments(eye, tau)
        spec = MtFunctionSpec.gaussian(tau, dimension)
        curves[f"mt-gauss(tau={tau:g})"] = np.array(
            [frob_norm(influence_mt(r * direction, moments, spec)) for r in norms]
        )
    if "scm" in baselines:
        unit_moments = MtMoments(
            mt_mean=np.zeros(dimension, dtype=np.complex128), mt_cov=eye, eu=1.0
        )
        unit_spec = MtFunctionSpec.unit()
        curves["scm"] = np.array(
            [frob_norm(influence_mt(r * direction, unit_moments, unit_spec)) for r in norms]
        )
    numeric = [b for b in baselines if b in ("sign", "tyler")]
    if numeric:
        base = standard_complex_normal(dimension, base_n, seed)
        for est in numeric:
            curves[est] = np.array(
                [
                    frob_norm(empirical_influence(est, r * direction, base, epsilon))
                    for r in norms
                ]
            )
    return IfCurve(norms=norms, if_fro=curves)


def curve_to_csv(curve: IfCurve, path) -> None:
    """Write an influence curve as CSV: norm, then one column per estimator."""
    labels = list(curve.if_fro)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["norm"] + labels)
        for i, r in enumerate(curve.norms):
            writer.writerow([repr(float(r))] + [repr(float(curve.if_fro[k][i])) for k in labels])
