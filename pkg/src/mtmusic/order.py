"""Model-order selection from covariance eigenvalues (MDL family).

Trades sphericity of the minor eigenvalue spectrum (geometric vs arithmetic
mean) against a parameter-count penalty. The standard penalty applies to
plain covariance estimates; the smoothed variant uses the halved penalty
appropriate after forward/backward spatial smoothing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

VARIANTS = ("standard", "smoothed")


class NonPositiveEigenvalueError(ValueError):
    """Criterion input eigenvalue is zero or negative."""


class UnsortedEigenvaluesError(ValueError):
    """Criterion input eigenvalues are not in non-increasing order."""


@dataclass(frozen=True)
class MdlResult:
    """Criterion value per candidate order k and the argmin order."""

    criterion_values: np.ndarray
    q_hat: int


def mdl_criterion(eigenvalues, n_snapshots: int, variant: str = "standard") -> MdlResult:
    """Evaluate the description-length criterion for every candidate order.

    For candidate k, the data term is (p-k) * N * log(AM/GM) of the p-k
    smallest eigenvalues (computed in log space), plus the penalty
    k(2p-k)/2 * log N ("standard") or k(2p-k+1)/4 * log N ("smoothed").

    Args:
        eigenvalues: Strictly positive values in non-increasing order.
        n_snapshots: Sample size N >= 2 behind the eigenvalues.
        variant: "standard" or "smoothed".

    Returns:
        MdlResult; q_hat is the argmin with ties toward smaller k.

    Raises:
        NonPositiveEigenvalueError, UnsortedEigenvaluesError.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size < 2:
        raise ValueError("need a vector of at least 2 eigenvalues")
    if n_snapshots < 2:
        raise ValueError("need n_snapshots >= 2")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if np.any(lam <= 0):
        raise NonPositiveEigenvalueError("eigenvalues must be strictly positive")
    if np.any(np.diff(lam) > 0):
        raise UnsortedEigenvaluesError("eigenvalues must be non-increasing")
    p = lam.size
    log_n = np.log(float(n_snapshots))
    log_lam = np.log(lam)
    values = np.empty(p)
    for k in range(p):
        minor = lam[k:]
        data = (p - k) * n_snapshots * (np.log(minor.mean()) - log_lam[k:].mean())
        if variant == "standard":
            penalty = 0.5 * k * (2 * p - k) * log_n
        else:
            penalty = 0.25 * k * (2 * p - k + 1) * log_n
        values[k] = data + penalty
    return MdlResult(criterion_values=values, q_hat=int(np.argmin(values)))


def estimate_order(cov, n_snapshots: int, variant: str = "standard") -> int:
    """Estimated number of signals from a covariance estimate.

    Accepts a CovarianceEstimate or a bare Hermitian matrix (e.g. a smoothed
    covariance). Eigenvalues below 1e-14 times the largest are clamped to
    that floor before the criterion, which is undefined at 0.
    """
    sigma = np.asarray(getattr(cov, "sigma", cov), dtype=np.complex128)
    lam = np.linalg.eigvalsh(0.5 * (sigma + sigma.conj().T))[::-1]
    if lam[0] <= 0:
        raise NonPositiveEigenvalueError("covariance has no positive eigenvalue")
    lam = np.maximum(lam, 1e-14 * lam[0])
    return mdl_criterion(lam, n_snapshots, variant).q_hat


def criterion_to_csv(result: MdlResult, path) -> None:
    """Write a criterion curve as two-column CSV (k, value)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "value"])
        for k, value in enumerate(result.criterion_values):
            writer.writerow([k, repr(float(value))])
