"""Covariance and scatter estimators.

The measure-transformed (MT) covariance family with the Gaussian MT-function
and its data-driven scale selection, plus the robust baselines it is compared
against: unbiased sample covariance, spatial-sign covariance, Tyler's
M-estimator, and amplitude-clipped (ZMNL) sample covariance.

The MT-covariance of a batch is a weighted covariance whose weights are the
MT-function evaluated per snapshot and normalized to sum to one; a Gaussian
MT-function downweights large-norm snapshots exponentially, which bounds the
estimator's influence function under heavy-tailed noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .linalg import frob_norm, hermitize, solve_hpd

# Public estimator identity strings (CSV columns, CLI flags).
ESTIMATOR_IDS = ("scm", "mt-gauss", "sign", "tyler", "zmnl")

# MAD-to-sigma consistency constant for normal data: 1 / Phi^{-1}(3/4).
MAD_GAMMA = 1.0 / ndtri(0.75)


class DegenerateWeightsError(ValueError):
    """MT-weight normalizer vanished (non-finite data or zero mass)."""


class NonFiniteIterateError(RuntimeError):
    """A fixed-point iterate became inf or nan."""


class TauTooSmallError(ValueError):
    """Scale parameter too small to invert the MT-covariance relation."""


class SingularIterateError(RuntimeError):
    """Tyler iteration hit a numerically zero quadratic form."""


class UnknownEstimatorError(ValueError):
    """Estimator id not in the registry."""


@dataclass(frozen=True)
class MtFunctionSpec:
    """MT-function: constant unit weight or Gaussian radial weight.

    The Gaussian kind evaluates u(x) = (pi tau^2)^{-p} exp(-||x||^2 / tau^2);
    p is carried so the prefactor is well defined, though normalized weights
    never depend on it.
    """

    kind: str
    tau: float | None = None
    dimension: int | None = None

    def __post_init__(self):
        if self.kind not in ("unit", "gaussian"):
            raise ValueError(f"unknown MT-function kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.tau is None or self.tau <= 0:
                raise ValueError("gaussian MT-function needs tau > 0")
            if self.dimension is None or self.dimension < 1:
                raise ValueError("gaussian MT-function needs a positive dimension")

    @classmethod
    def unit(cls) -> "MtFunctionSpec":
        return cls(kind="unit")

    @classmethod
    def gaussian(cls, tau: float, dimension: int) -> "MtFunctionSpec":
        return cls(kind="gaussian", tau=float(tau), dimension=int(dimension))

    def evaluate(self, x) -> np.ndarray:
        """u at each column of x (prefactor included for the Gaussian kind)."""
        x = snapshot_array(x)
        if self.kind == "unit":
            return np.ones(x.shape[1])
        norms_sq = np.sum(np.abs(x) ** 2, axis=0)
        prefactor = (np.pi * self.tau**2) ** (-self.dimension)
        return prefactor * np.exp(-norms_sq / self.tau**2)


@dataclass(frozen=True)
class TauSelection:
    """Fixed-point settings for the data-driven Gaussian MT scale.

    c bounds the worst-case transform-domain Fisher information ratio from
    below by (c/(1+c))^2; the default c=5 allows at most ~30% loss.
    """

    c: float = 5.0
    max_iters: int = 100
    rel_tol: float = 1e-6
    init_factor: float = 5.0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class CovarianceEstimate:
    """A scatter estimate plus the location it was centered on.

    tau_used / iterations / converged are populated by the estimators that
    have them; n_skipped counts snapshots dropped by the sign estimator.
    """

    sigma: np.ndarray
    mu: np.ndarray
    estimator_id: str
    tau_used: float | None = None
    iterations: int | None = None
    converged: bool | None = None
    n_skipped: int = 0


def snapshot_array(x) -> np.ndarray:
    """Accept a SnapshotBatch or a bare p x N array."""
    arr = np.asarray(getattr(x, "x", x), dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"snapshots must be a p x N matrix, got shape {arr.shape}")
    return arr


def _gaussian_log_weights(norms_sq: np.ndarray, tau: float) -> np.ndarray:
    # Subtracting the smallest squared norm keeps the largest exponent at 0,
    # so the normalizer can never underflow to 0 on finite data.
    return -(norms_sq - norms_sq.min()) / tau**2


def mt_weights(u: MtFunctionSpec, x) -> np.ndarray:
    """Normalized MT weights, one per snapshot, summing to 1.

    Raises:
        DegenerateWeightsError: the weight mass is zero or non-finite.
    """
    arr = snapshot_array(x)
    n = arr.shape[1]
    if u.kind == "unit":
        return np.full(n, 1.0 / n)
    norms_sq = np.sum(np.abs(arr) ** 2, axis=0)
    raw = np.exp(_gaussian_log_weights(norms_sq, u.tau))
    total = raw.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateWeightsError("MT-weight normalizer is zero or non-finite")
    return raw / total


def mt_functional(weighted_mass: float, weighted_mean, weighted_second_moment):
    """MT moments from raw u-weighted integrals.

    Args:
        weighted_mass: E[u(x)].
        weighted_mean: E[x u(x)], a p-vector.
        weighted_second_moment: E[x x^H u(x)], a p x p matrix.

    Returns:
        (mt_mean, mt_cov): the transformed-measure mean and covariance.
    """
    mu = np.asarray(weighted_mean, dtype=np.complex128) / weighted_mass
    second = np.asarray(weighted_second_moment, dtype=np.complex128) / weighted_mass
    return mu, second - np.outer(mu, mu.conj())


def _weighted_scatter(arr: np.ndarray, weights: np.ndarray):
    mu = arr @ weights.astype(np.complex128)
    centered = arr - mu[:, None]
    sigma = (centered * weights[None, :]) @ centered.conj().T
    return mu, hermitize(sigma)


def empirical_mt_covariance(u: MtFunctionSpec, x) -> CovarianceEstimate:
    """Weight-normalized MT-covariance and MT-mean of one batch.

    With the unit MT-function this is the biased sample covariance; scaling
    by N/(N-1) recovers the unbiased SCM exactly.
    """
    arr = snapshot_array(x)
    if arr.shape[1] < 2:
        raise ValueError("need at least 2 snapshots")
    weights = mt_weights(u, arr)
    mu, sigma = _weighted_scatter(arr, weights)
    if u.kind == "gaussian":
        return CovarianceEstimate(sigma=sigma, mu=mu, estimator_id="mt-gauss", tau_used=u.tau)
    return CovarianceEstimate(sigma=sigma, mu=mu, estimator_id="mt-unit")


def sample_covariance(x) -> CovarianceEstimate:
    """Unbiased, sample-mean-centered sample covariance."""
    arr = snapshot_array(x)
    n = arr.shape[1]
    if n < 2:
        raise ValueError("need at least 2 snapshots")
    mu = arr.mean(axis=1)
    centered = arr - mu[:, None]
    sigma = hermitize(centered @ centered.conj().T / (n - 1))
    return CovarianceEstimate(sigma=sigma, mu=mu, estimator_id="scm")


def mad_variance(samples) -> float:
    """Robust variance of a complex sample via per-part MAD.

    sigma^2 = gamma^2 (MAD(Re)^2 + MAD(Im)^2) with the normal-consistency
    constant gamma ~ 1.4826, so the estimate matches the variance of a
    proper complex normal sample.
    """
    v = np.asarray(samples).ravel()
    if v.size < 2:
        raise ValueError("need at least 2 samples")

    def mad(part):
        return np.median(np.abs(part - np.median(part)))

    return float(MAD_GAMMA**2 * (mad(v.real) ** 2 + mad(v.imag) ** 2))


def _gaussian_mt_sigma(arr: np.ndarray, norms_sq: np.ndarray, tau: float) -> np.ndarray:
    raw = np.exp(_gaussian_log_weights(norms_sq, tau))
    total = raw.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise DegenerateWeightsError("MT-weight normalizer is zero or non-finite")
    _, sigma = _weighted_scatter(arr, raw / total)
    return sigma


def select_tau(
    x,
    sel: TauSelection = TauSelection(),
    transform: Callable[[np.ndarray], np.ndarray] | None = None,
):
    """Data-driven Gaussian MT scale via fixed-point iteration.

    Iterates tau^2 <- (c+1) * lambda_max(MT-covariance at tau) from the
    initial guess init_factor * sqrt(mean per-sensor MAD variance), stopping
    when the relative change drops below rel_tol. ``transform`` is applied to
    each iterate's MT-covariance before taking lambda_max (used to select the
    scale against a spatially smoothed covariance in the coherent pipeline).

    Returns:
        (tau, iterations, converged). tau is always positive; a degenerate
        batch (zero spread) floors tau and reports converged=False instead of
        producing a non-finite iterate.

    Raises:
        NonFiniteIterateError: an iterate became inf or nan.
    """
    arr = snapshot_array(x)
    if arr.shape[1] < 2:
        raise ValueError("need at least 2 snapshots")
    norms_sq = np.sum(np.abs(arr) ** 2, axis=0)
    mean_power = float(norms_sq.mean())
    tau0 = sel.init_factor * np.sqrt(np.mean([mad_variance(row) for row in arr]))
    if not np.isfinite(tau0):
        raise NonFiniteIterateError("non-finite initial tau")
    if tau0 <= 0.0:
        return float(np.finfo(float).tiny), 0, False
    tau = float(tau0)
    iterations = 0
    converged = False
    for _ in range(sel.max_iters):
        iterations += 1
        sigma = _gaussian_mt_sigma(arr, norms_sq, tau)
        if transform is not None:
            sigma = transform(sigma)
        lam_max = float(np.linalg.eigvalsh(hermitize(sigma))[-1])
        if lam_max <= 1e-12 * mean_power:
            # Degenerate spread: the exact iterate would collapse to 0.
            tau = max(1e-6 * tau0, float(np.finfo(float).tiny))
            converged = False
            break
        tau_new = float(np.sqrt((sel.c + 1.0) * lam_max))
        if not np.isfinite(tau_new):
            raise NonFiniteIterateError(f"tau iterate became {tau_new}")
        rel_change = abs(tau_new - tau) / tau
        tau = tau_new
        if rel_change < sel.rel_tol:
            converged = True
            break
    return tau, iterations, converged


def sigma_from_mt(mt_cov, tau: float) -> np.ndarray:
    """Pre-transform covariance recovered from a Gaussian MT-covariance.

    Inverts the population relation between the two:
    sigma = tau^2 * M (tau^2 I - M)^{-1}, valid when tau^2 > lambda_max(M).

    Raises:
        TauTooSmallError: tau^2 does not exceed the largest eigenvalue.
    """
    m = hermitize(np.asarray(mt_cov, dtype=np.complex128))
    lam_max = float(np.linalg.eigvalsh(m)[-1])
    if tau**2 <= lam_max:
        raise TauTooSmallError(
            f"tau^2 = {tau**2:g} must exceed lambda_max = {lam_max:g}"
        )
    p = m.shape[0]
    inv_part = np.linalg.solve(tau**2 * np.eye(p) - m, m)
    return hermitize(tau**2 * inv_part)


def _spatial_median(arr: np.ndarray, max_iters: int = 100, rel_tol: float = 1e-9) -> np.ndarray:
    m = arr.mean(axis=1)
    for _ in range(max_iters):
        d = arr - m[:, None]
        norms = np.linalg.norm(d, axis=0)
        mask = norms > 0
        if not mask.any():
            break
        inv = 1.0 / norms[mask]
        m_new = (arr[:, mask] @ inv.astype(np.complex128)) / inv.sum()
        step = np.linalg.norm(m_new - m)
        m = m_new
        if step <= rel_tol * max(np.linalg.norm(m), np.finfo(float).tiny):
            break
    return m


def sign_covariance(x, location: str = "spatial-median") -> CovarianceEstimate:
    """Spatial-sign covariance: average of projected unit directions.

    Snapshots are centered on the requested location ("zero" or
    "spatial-median"), normalized to the unit sphere, and averaged as
    rank-one outer products. Snapshots exactly at the location are skipped
    and counted in n_skipped. The trace is 1 by construction.
    """
    arr = snapshot_array(x)
    if arr.shape[1] < 2:
        raise ValueError("need at least 2 snapshots")
    if location == "zero":
        mu = np.zeros(arr.shape[0], dtype=np.complex128)
    elif location == "spatial-median":
        mu = _spatial_median(arr)
    else:
        raise ValueError(f"unknown location rule {location!r}")
    d = arr - mu[:, None]
    norms = np.linalg.norm(d, axis=0)
    keep = norms > 0
    n_used = int(keep.sum())
    if n_used == 0:
        sigma = np.zeros((arr.shape[0], arr.shape[0]), dtype=np.complex128)
    else:
        s = d[:, keep] / norms[keep][None, :]
        sigma = hermitize(s @ s.conj().T / n_used)
    return CovarianceEstimate(
        sigma=sigma, mu=mu, estimator_id="sign", n_skipped=arr.shape[1] - n_used
    )


def tyler_m_estimator(
    x, *, max_iters: int = 100, rel_tol: float = 1e-6
) -> CovarianceEstimate:
    """Tyler's distribution-free scatter M-estimator, trace-normalized to p.

    Fixed point of sigma <- (p/N) sum_n x_n x_n^H / (x_n^H sigma^{-1} x_n),
    started from the identity, renormalized each iteration, stopped on
    relative Frobenius change below rel_tol.

    Raises:
        SingularIterateError: some quadratic form fell to <= 1e-300.
    """
    arr = snapshot_array(x)
    p, n = arr.shape
    if n < p:
        raise ValueError("Tyler's estimator needs at least p snapshots")
    sigma = np.eye(p, dtype=np.complex128)
    iterations = 0
    converged = False
    for _ in range(max_iters):
        iterations += 1
        solved = solve_hpd(sigma, arr)
        quad = np.real(np.sum(arr.conj() * solved, axis=0))
        if np.any(quad <= 1e-300):
            raise SingularIterateError("quadratic form vanished for some snapshot")
        new = (arr / quad[None, :]) @ arr.conj().T * (p / n)
        new = hermitize(new)
        new *= p / np.real(np.trace(new))
        delta = frob_norm(new - sigma) / frob_norm(sigma)
        sigma = new
        if delta < rel_tol:
            converged = True
            break
    return CovarianceEstimate(
        sigma=sigma,
        mu=np.zeros(p, dtype=np.complex128),
        estimator_id="tyler",
        iterations=iterations,
        converged=converged,
    )


def zmnl_covariance(x, clip_factor: float = 3.0) -> CovarianceEstimate:
    """Unbiased SCM after hard amplitude clipping.

    Snapshot amplitudes are clipped (phase preserved) at clip_factor times
    the median snapshot norm before the usual sample covariance.
    """
    arr = snapshot_array(x)
    if arr.shape[1] < 2:
        raise ValueError("need at least 2 snapshots")
    norms = np.linalg.norm(arr, axis=0)
    kappa = clip_factor * float(np.median(norms))
    factors = np.ones_like(norms)
    np.divide(kappa, norms, out=factors, where=norms > kappa)
    est = sample_covariance(arr * factors[None, :])
    return CovarianceEstimate(sigma=est.sigma, mu=est.mu, estimator_id="zmnl")


def estimate_covariance(
    x,
    estimator_id: str,
    *,
    tau: float | None = None,
    tau_selection: TauSelection = TauSelection(),
    tau_transform: Callable[[np.ndarray], np.ndarray] | None = None,
    sign_location: str = "spatial-median",
    clip_factor: float = 3.0,
) -> CovarianceEstimate:
    """Dispatch a registered estimator id on one batch.

    For "mt-gauss", a fixed tau may be supplied; otherwise the data-driven
    selection runs first (with ``tau_transform`` applied inside the fixed
    point, see select_tau) and the reported iterations/converged describe
    that selection.

    Raises:
        UnknownEstimatorError: id not in ESTIMATOR_IDS.
    """
    arr = snapshot_array(x)
    if estimator_id == "scm":
        return sample_covariance(arr)
    if estimator_id == "mt-gauss":
        p = arr.shape[0]
        if tau is not None:
            return empirical_mt_covariance(MtFunctionSpec.gaussian(tau, p), arr)
        tau_sel, iterations, converged = select_tau(arr, tau_selection, tau_transform)
        est = empirical_mt_covariance(MtFunctionSpec.gaussian(tau_sel, p), arr)
        return CovarianceEstimate(
            sigma=est.sigma,
            mu=est.mu,
            estimator_id="mt-gauss",
            tau_used=tau_sel,
            iterations=iterations,
            converged=converged,
        )
    if estimator_id == "sign":
        return sign_covariance(arr, location=sign_location)
    if estimator_id == "tyler":
        return tyler_m_estimator(arr)
    if estimator_id == "zmnl":
        return zmnl_covariance(arr, clip_factor=clip_factor)
    raise UnknownEstimatorError(f"unknown estimator id {estimator_id!r}")
