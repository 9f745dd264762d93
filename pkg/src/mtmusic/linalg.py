"""Dense complex Hermitian linear algebra shared by the estimation modules.

Thin, validating wrappers around numpy's LAPACK-backed routines that fix the
conventions everything downstream relies on: eigenvalues sorted descending,
Hermitian symmetry checked on entry, and positive-definite solves that fail
loudly instead of returning garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NotHermitianError(ValueError):
    """Input matrix is not Hermitian within tolerance."""


class NotPositiveDefiniteError(ValueError):
    """Input matrix is not positive definite enough to solve against."""


class NoConvergenceError(RuntimeError):
    """The backend eigenvalue iteration failed to converge."""


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.

    Column ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {m.shape}")
    return m


def hermitian_asymmetry(m) -> float:
    """Max elementwise deviation from Hermitian symmetry, relative to the
    largest entry magnitude (0 for the zero matrix)."""
    m = _as_square(m)
    scale = np.max(np.abs(m))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)) / scale)


def hermitize(m) -> np.ndarray:
    """Average a nearly-Hermitian matrix with its conjugate transpose."""
    m = np.asarray(m, dtype=np.complex128)
    return 0.5 * (m + m.conj().T)


def hermitian_eig(m, *, sym_tol: float = 1e-10) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, descending eigenvalue order.

    Args:
        m: Square matrix, Hermitian within ``sym_tol`` (relative to its
            largest entry magnitude).
        sym_tol: Symmetry tolerance for the entry check.

    Returns:
        EigenDecomposition with real eigenvalues sorted descending and
        orthonormal eigenvector columns aligned with them.

    Raises:
        NotHermitianError: the symmetry check fails.
        NoConvergenceError: the backend iteration does not converge.
    """
    m = _as_square(m)
    if hermitian_asymmetry(m) > sym_tol:
        raise NotHermitianError(
            f"matrix is not Hermitian within {sym_tol:g} relative tolerance"
        )
    try:
        w, v = np.linalg.eigh(hermitize(m))
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(str(exc)) from exc
    # eigh returns ascending order; flip to descending.
    return EigenDecomposition(eigenvalues=w[::-1].copy(), eigenvectors=v[:, ::-1].copy())


def solve_hpd(m, rhs, *, cond_floor: float = 1e-12) -> np.ndarray:
    """Solve m @ Y = rhs for Hermitian positive definite m.

    Args:
        m: Hermitian positive definite matrix; its smallest eigenvalue must
            exceed ``cond_floor`` times its largest.
        rhs: Right-hand side vector or matrix.

    Returns:
        Solution Y with the same trailing shape as rhs.

    Raises:
        NotPositiveDefiniteError: the eigenvalue check fails.
    """
    m = _as_square(m)
    try:
        w, v = np.linalg.eigh(hermitize(m))
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(str(exc)) from exc
    if w[-1] <= 0.0 or w[0] <= cond_floor * w[-1]:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (eigenvalue range [{w[0]:g}, {w[-1]:g}])"
        )
    rhs = np.asarray(rhs, dtype=np.complex128)
    proj = v.conj().T @ rhs
    scaled = proj / w if rhs.ndim == 1 else proj / w[:, None]
    return v @ scaled


def frob_norm(m) -> float:
    """Frobenius norm (root sum of squared entry magnitudes)."""
    return float(np.linalg.norm(np.asarray(m)))
