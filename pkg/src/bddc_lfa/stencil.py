"""Nine-point stencils, their scalar symbols, and fine-grid block symbols.

Frequencies are always the coarse frequency ``theta`` in ``[-pi, pi)^2`` of a
p-periodic block; the base harmonic is ``theta / p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from .linalg import dft_matrix

__all__ = [
    "Stencil9",
    "Q1_LAPLACIAN",
    "Frequency",
    "HarmonicGrid",
    "classical_symbol",
    "fine_symbol",
    "fine_symbol_direct",
    "element_matrix",
    "ELEMENT_NODES",
]

Frequency = Tuple[float, float]

# Local node order of a bilinear element: (0,0), (1,0), (0,1), (1,1).
ELEMENT_NODES = ((0, 0), (1, 0), (0, 1), (1, 1))

_SYM_TOL = 1e-12


@dataclass(frozen=True)
class Stencil9:
    """A constant-coefficient 3x3 stencil.

    ``coeffs[dx + 1, dy + 1]`` is the weight of the neighbour at offset
    ``(dx, dy)``; the first axis is x.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (3, 3):
            raise ValueError(f"stencil must be 3x3, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("stencil has non-finite coefficients")
        if not np.allclose(c, c[::-1, ::-1], atol=_SYM_TOL, rtol=0):
            raise ValueError("stencil must be symmetric under (dx, dy) -> (-dx, -dy)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_rows(cls, rows) -> "Stencil9":
        """Build from the usual picture: ``rows[0]`` is the top row (dy = +1)."""
        r = np.asarray(rows, dtype=float)
        return cls(r[::-1, :].T)

    def __getitem__(self, offset: tuple[int, int]) -> float:
        dx, dy = offset
        return float(self.coeffs[dx + 1, dy + 1])

    def offsets(self) -> Iterator[tuple[int, int, float]]:
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                c = self.coeffs[dx + 1, dy + 1]
                if c != 0.0:
                    yield dx, dy, float(c)

    @property
    def center(self) -> float:
        return float(self.coeffs[1, 1])

    def is_d4_symmetric(self, tol: float = 1e-12) -> bool:
        """True when the stencil is invariant under all square symmetries."""
        c = self.coeffs
        return bool(
            np.allclose(c, c.T, atol=tol, rtol=0)
            and np.allclose(c, c[::-1, :], atol=tol, rtol=0)
        )

    def __eq__(self, other):
        return isinstance(other, Stencil9) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"Stencil9({self.coeffs.tolist()!r})"


Q1_LAPLACIAN = Stencil9(np.array([[-1.0, -1.0, -1.0], [-1.0, 8.0, -1.0], [-1.0, -1.0, -1.0]]) / 3.0)


def element_matrix(s: Stencil9) -> np.ndarray:
    """Split a stencil into the 4x4 matrix of one bilinear element.

    Each node collects a quarter of the centre weight from each of its four
    elements, axis neighbours are shared by two elements, and diagonal
    neighbours by one.  For the Q1 Laplacian this is the usual element
    stiffness matrix (2/3 on the diagonal, -1/6 along edges, -1/3 across).
    """
    e = np.zeros((4, 4))
    for i, (xi, yi) in enumerate(ELEMENT_NODES):
        for j, (xj, yj) in enumerate(ELEMENT_NODES):
            dx, dy = xj - xi, yj - yi
            if i == j:
                e[i, j] = s.center / 4.0
            elif dx == 0 or dy == 0:
                e[i, j] = s[dx, dy] / 2.0
            else:
                e[i, j] = s[dx, dy]
    return e


def classical_symbol(s: Stencil9, theta) -> complex:
    """``sum_k c_k exp(i theta . k)``; real for symmetric stencils."""
    t1, t2 = float(theta[0]), float(theta[1])
    return complex(sum(c * np.exp(1j * (t1 * dx + t2 * dy)) for dx, dy, c in s.offsets()))


@dataclass(frozen=True)
class HarmonicGrid:
    """The p**2 harmonics ``theta00 + 2*pi*(q, r)/p`` of a base frequency."""

    base: Frequency
    p: int

    @classmethod
    def from_coarse(cls, theta, p: int) -> "HarmonicGrid":
        return cls((float(theta[0]) / p, float(theta[1]) / p), p)

    def members(self) -> np.ndarray:
        """Array of shape (p*p, 2); index ``q + p*r`` (first index fastest)."""
        q = np.arange(self.p)
        t1 = self.base[0] + 2 * np.pi * q / self.p
        t2 = self.base[1] + 2 * np.pi * q / self.p
        g1, g2 = np.meshgrid(t1, t2, indexing="xy")
        return np.column_stack([g1.ravel(), g2.ravel()])

    def is_low(self) -> bool:
        lo, hi = -np.pi / self.p, np.pi / self.p
        return all(lo <= b < hi for b in self.base)


def fine_symbol(s: Stencil9, p: int, theta) -> np.ndarray:
    """Block symbol of the fine operator on one p-by-p block.

    Computed as ``T diag(L(theta^(q,r))) T^{-1}`` in lexicographic order
    (x fastest), with ``theta`` the coarse frequency.
    """
    grid = HarmonicGrid.from_coarse(theta, p)
    lam = np.array([classical_symbol(s, t) for t in grid.members()])
    t = dft_matrix(p)
    return (t * lam) @ t.conj().T / p**2


def fine_symbol_direct(s: Stencil9, p: int, theta) -> np.ndarray:
    """Same symbol assembled point by point with phase-shifted wrap-around.

    Applies the stencil to each sparse basis function ``exp(i theta.x/(p h))``
    restricted to one residue class; used to cross-check :func:`fine_symbol`.
    """
    t = np.asarray(theta, dtype=float) / p
    a = np.zeros((p * p, p * p), dtype=complex)
    for y in range(p):
        for x in range(p):
            row = x + p * y
            for dx, dy, c in s.offsets():
                col = (x + dx) % p + p * ((y + dy) % p)
                a[row, col] += c * np.exp(1j * (t[0] * dx + t[1] * dy))
    return a
