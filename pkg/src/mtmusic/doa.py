"""Noise-subspace DOA estimation (MUSIC) and spatial smoothing.

Extracts the minor eigenspace of a covariance estimate, scans the MUSIC
pseudo-spectrum over a uniform angle grid, picks the q largest local maxima,
and scores estimates against truth. Forward/backward spatial smoothing
restores the signal-subspace rank for coherent sources on a ULA before the
subspace step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .linalg import NotHermitianError, hermitian_asymmetry, hermitian_eig, hermitize
from .simulate import UlaGeometry, steering_matrix

# Pseudo-spectrum values are capped here: the spectrum is unbounded at exact
# orthogonality, and the cap preserves argmax structure on the grid.
SPECTRUM_CAP = 1e12


class TooFewPeaksError(ValueError):
    """Spectrum has fewer strict local maxima than requested sources."""

    def __init__(self, found: int, wanted: int):
        super().__init__(f"found {found} local maxima, need {wanted}")
        self.found = found
        self.wanted = wanted


class CardinalityMismatchError(ValueError):
    """A DOA estimate has a different cardinality than the truth set."""


class BadSubarraySizeError(ValueError):
    """Smoothing subarray size outside 1..p."""


@dataclass(frozen=True)
class PseudoSpectrum:
    """MUSIC pseudo-spectrum sampled on a uniform grid over [-90, 90)."""

    grid_deg: np.ndarray
    values: np.ndarray
    grid_step_deg: float


@dataclass(frozen=True)
class DoaSet:
    """Sorted direction estimates in degrees."""

    angles_deg: tuple[float, ...]

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        object.__setattr__(self, "angles_deg", angles)
        if sorted(angles) != list(angles):
            raise ValueError("angles must be sorted ascending")
        if any(not (-90.0 <= a < 90.0) for a in angles):
            raise ValueError("angles must lie in [-90, 90)")


@dataclass(frozen=True)
class SmoothingConfig:
    """Forward/backward spatial smoothing subarray size r (L = p - r + 1)."""

    subarray_size: int

    def __post_init__(self):
        if self.subarray_size < 1:
            raise BadSubarraySizeError("subarray size must be at least 1")


def noise_subspace(cov, q: int) -> np.ndarray:
    """Orthonormal basis of the minor eigenspace (p - q smallest eigenvalues).

    Args:
        cov: Hermitian p x p covariance estimate.
        q: Number of signals, 0 < q < p.

    Returns:
        p x (p - q) matrix with orthonormal columns.
    """
    cov = np.asarray(cov, dtype=np.complex128)
    p = cov.shape[0]
    if not 0 < q < p:
        raise ValueError(f"need 0 < q < p, got q={q}, p={p}")
    eig = hermitian_eig(cov)
    return eig.eigenvectors[:, q:]


def pseudo_spectrum(v_noise, geom: UlaGeometry, grid_step_deg: float) -> PseudoSpectrum:
    """MUSIC pseudo-spectrum 1 / ||V^H a(theta)||^2 on a uniform grid.

    Args:
        v_noise: p x (p-q) noise-subspace basis with orthonormal columns.
        geom: Array geometry matching the covariance the subspace came from.
        grid_step_deg: Grid spacing in degrees over [-90, 90).

    Returns:
        PseudoSpectrum with values capped at SPECTRUM_CAP where the
        projection underflows.
    """
    if grid_step_deg <= 0:
        raise ValueError("grid step must be positive")
    v_noise = np.asarray(v_noise, dtype=np.complex128)
    n_points = int(np.ceil(180.0 / grid_step_deg - 1e-9))
    grid = -90.0 + grid_step_deg * np.arange(n_points)
    steer = steering_matrix(geom, grid)
    proj = np.sum(np.abs(v_noise.conj().T @ steer) ** 2, axis=0)
    values = np.minimum(1.0 / np.maximum(proj, 1.0 / SPECTRUM_CAP), SPECTRUM_CAP)
    return PseudoSpectrum(grid_deg=grid, values=values, grid_step_deg=float(grid_step_deg))


def pick_peaks(spec: PseudoSpectrum, q: int) -> DoaSet:
    """The q strict local maxima with the largest values, sorted by angle.

    A local maximum is strictly greater than both neighbors (endpoints
    compare to their single neighbor). Value ties break toward the smaller
    angle.

    Raises:
        TooFewPeaksError: fewer than q local maxima exist.
    """
    v = np.asarray(spec.values)
    m = v.size
    if m == 1:
        idx = np.array([0])
    else:
        interior = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1
        ends = []
        if v[0] > v[1]:
            ends.append(0)
        if v[-1] > v[-2]:
            ends.append(m - 1)
        idx = np.sort(np.concatenate([interior, np.asarray(ends, dtype=int)]))
    if idx.size < q:
        raise TooFewPeaksError(found=int(idx.size), wanted=q)
    # Highest value first; ties resolved by grid order (smaller angle wins).
    order = np.lexsort((spec.grid_deg[idx], -v[idx]))
    chosen = idx[order[:q]]
    return DoaSet(angles_deg=tuple(np.sort(spec.grid_deg[chosen])))


def spatial_smooth_fb(cov, cfg: SmoothingConfig) -> np.ndarray:
    """Forward/backward spatially smoothed covariance.

    Averages the L = p - r + 1 forward subarray blocks and their
    conjugate/index-reversed backward counterparts:

        forward block l:  cov[l : l+r, l : l+r]
        backward block l: conj(cov[p-1-l-j, p-1-l-k]) at entry (j, k)

    Args:
        cov: Hermitian p x p covariance.
        cfg: Subarray size r with 1 <= r <= p.

    Returns:
        r x r Hermitian smoothed covariance (forward + backward) / 2.
    """
    cov = np.asarray(cov, dtype=np.complex128)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {cov.shape}")
    if hermitian_asymmetry(cov) > 1e-10:
        raise NotHermitianError("covariance is not Hermitian within 1e-10")
    p = cov.shape[0]
    r = cfg.subarray_size
    if not 1 <= r <= p:
        raise BadSubarraySizeError(f"subarray size {r} outside 1..{p}")
    n_sub = p - r + 1
    forward = np.zeros((r, r), dtype=np.complex128)
    backward = np.zeros((r, r), dtype=np.complex128)
    for l in range(n_sub):
        forward += cov[l : l + r, l : l + r]
        rev = (p - 1 - l) - np.arange(r)
        backward += np.conj(cov[np.ix_(rev, rev)])
    forward /= n_sub
    backward /= n_sub
    return hermitize(0.5 * (forward + backward))


def doa_rmse(estimates, truth) -> float:
    """RMSE in degrees over all (trial, source) pairs, rank-paired.

    Each estimate and the truth are sorted ascending and paired by rank; the
    result is the root mean square of every per-source error across trials.

    Raises:
        CardinalityMismatchError: some estimate's cardinality differs from
            the truth's.
    """
    truth_sorted = np.sort(np.asarray(getattr(truth, "angles_deg", truth), dtype=float))
    sq_errors = []
    for est in estimates:
        angles = np.asarray(getattr(est, "angles_deg", est), dtype=float)
        if angles.size != truth_sorted.size:
            raise CardinalityMismatchError(
                f"estimate has {angles.size} angles, truth has {truth_sorted.size}"
            )
        diff = np.sort(angles) - truth_sorted
        sq_errors.append(diff**2)
    return float(np.sqrt(np.mean(sq_errors)))


def spectrum_to_csv(spec: PseudoSpectrum, path) -> None:
    """Write a spectrum as two-column CSV (angle_deg, value)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_deg", "value"])
        for angle, value in zip(spec.grid_deg, spec.values):
            writer.writerow([repr(float(angle)), repr(float(value))])
