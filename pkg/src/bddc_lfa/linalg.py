"""Dense complex linear algebra used by every symbol builder.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; the
symbols handled here are at most a few thousand rows, so everything is dense.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "LinAlgArgumentError",
    "SingularMatrixError",
    "EigenvalueConvergenceError",
    "Spectrum",
    "as_complex_matrix",
    "dft_matrix",
    "eig",
    "eigvals_hermitian",
    "solve",
    "inv",
    "solve_hpd",
    "SOLVE_PIVOT_TOL",
]

# Relative pivot threshold below which ``solve`` refuses to proceed.
SOLVE_PIVOT_TOL = 1e-12


class LinAlgArgumentError(ValueError):
    """Raised when a matrix argument has the wrong shape or bad entries."""


class SingularMatrixError(ArithmeticError):
    """Raised when a matrix is singular to working tolerance.

    The smallest relative pivot is kept on ``pivot`` so callers can report it.
    """

    def __init__(self, msg: str, pivot: float):
        super().__init__(msg)
        self.pivot = pivot


class EigenvalueConvergenceError(ArithmeticError):
    """Raised when the QR iteration fails to converge."""


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square matrix, treated as a multiset."""

    eigenvalues: np.ndarray
    source_dim: int

    def __post_init__(self):
        if self.eigenvalues.shape != (self.source_dim,):
            raise LinAlgArgumentError(
                f"spectrum holds {self.eigenvalues.size} values for a "
                f"{self.source_dim}-dimensional source"
            )

    def sorted(self) -> np.ndarray:
        """Eigenvalues sorted by real part, then imaginary part."""
        return np.sort_complex(self.eigenvalues)

    @property
    def max_imag(self) -> float:
        return float(np.max(np.abs(self.eigenvalues.imag), initial=0.0))


def as_complex_matrix(m, square: bool = False) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise LinAlgArgumentError(f"expected a 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise LinAlgArgumentError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinAlgArgumentError("matrix has non-finite entries")
    return a


def dft_matrix(p: int) -> np.ndarray:
    """Return ``T = T1 (x) T1`` with ``(T1)[i, j] = z**(i*j)``, ``z = exp(2*pi*1j/p)``.

    ``T`` maps coefficients of the p**2 harmonic Fourier modes (first index
    fastest) to pointwise coefficients on one p-by-p block, and satisfies
    ``T @ T.conj().T == p**2 * I``.
    """
    if int(p) != p or p < 2:
        raise LinAlgArgumentError(f"period must be an integer >= 2, got {p!r}")
    k = np.arange(p)
    t1 = np.exp(2j * np.pi * np.outer(k, k) / p)
    return np.kron(t1, t1)


def eig(m) -> Spectrum:
    """All eigenvalues of a general complex square matrix.

    LAPACK ``zgeev`` (Hessenberg reduction followed by shifted QR) does the
    work; it is backward stable, so each eigenpair satisfies
    ``||m v - lam v|| <= c * eps * ||m||``.
    """
    a = as_complex_matrix(m, square=True)
    try:
        w = scipy.linalg.eigvals(a, check_finite=False, overwrite_a=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK info > 0
        raise EigenvalueConvergenceError(f"QR iteration failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise EigenvalueConvergenceError("QR iteration produced non-finite eigenvalues")
    return Spectrum(np.asarray(w, dtype=complex), a.shape[0])


def eigvals_hermitian(m) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix (only the lower triangle is read)."""
    a = np.asarray(m)
    try:
        return scipy.linalg.eigvalsh(a, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise EigenvalueConvergenceError(f"Hermitian eigensolver failed: {exc}") from exc


def _lu(m: np.ndarray):
    with warnings.catch_warnings():  # singularity is reported below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = np.max(np.abs(m)) if m.size else 0.0
    rel = float(diag.min() / scale) if scale > 0 else 0.0
    if rel < SOLVE_PIVOT_TOL:
        raise SingularMatrixError(
            f"matrix is singular to tolerance: smallest relative pivot {rel:.3e}", rel
        )
    return lu, piv


def solve(m, rhs) -> np.ndarray:
    """Solve ``m @ x = rhs`` by partial-pivoted LU.

    Raises :class:`SingularMatrixError` when the smallest pivot relative to
    ``max|m|`` drops below ``SOLVE_PIVOT_TOL``.
    """
    a = as_complex_matrix(m, square=True)
    b = np.asarray(rhs, dtype=complex)
    if b.shape[0] != a.shape[0]:
        raise LinAlgArgumentError(
            f"right-hand side has {b.shape[0]} rows, matrix has {a.shape[0]}"
        )
    return scipy.linalg.lu_solve(_lu(a), b, check_finite=False)


def inv(m) -> np.ndarray:
    a = as_complex_matrix(m, square=True)
    return solve(a, np.eye(a.shape[0], dtype=complex))


def solve_hpd(m, rhs) -> np.ndarray:
    """Solve ``m @ x = rhs`` for Hermitian positive definite ``m`` by Cholesky.

    Raises :class:`SingularMatrixError` when ``m`` is not numerically
    positive definite (failed factorization or a pivot ``L_ii**2`` below
    ``SOLVE_PIVOT_TOL * max|m|``).
    """
    a = as_complex_matrix(m, square=True)
    b = np.asarray(rhs, dtype=complex)
    if b.shape[0] != a.shape[0]:
        raise LinAlgArgumentError(
            f"right-hand side has {b.shape[0]} rows, matrix has {a.shape[0]}"
        )
    scale = np.max(np.abs(a)) if a.size else 0.0
    try:
        c, low = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"matrix is not positive definite: {exc}", 0.0) from exc
    rel = float(np.min(np.abs(np.diag(c))) ** 2 / scale) if scale > 0 else 0.0
    if rel < SOLVE_PIVOT_TOL:
        raise SingularMatrixError(
            f"matrix is singular to tolerance: smallest relative pivot {rel:.3e}", rel
        )
    return scipy.linalg.cho_solve((c, low), b, check_finite=False)
