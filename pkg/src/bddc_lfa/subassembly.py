"""Symbols of the partially subassembled (broken) problem.

A :class:`CellLayout` describes one periodic cell of ``nsub x nsub``
subdomains, each ``p x p`` elements.  With ``nsub == 1`` the cell is the
single subdomain used by two-level analysis; with ``nsub == p`` it is the
subdomain array used for three-level analysis.

Every operator is stored as a :class:`PeriodicOperator`: couplings from a
row dof in the reference cell to a column dof in the cell shifted by
``(sx, sy)``.  Its symbol at coarse frequency ``theta`` is::

    S[a, b] = sum_shift M_shift[a, b] * exp(1j * theta . (x_b + P*shift - x_a) / P)

with ``x`` the physical grid position of a dof and ``P`` the cell width.
Pointwise operators (injection, jump) therefore have phase-free symbols.

Dof ordering inside a subdomain is row-wise lexicographic (x fastest).  The
broken space lists all r-dofs (subdomain by subdomain) followed by the
coarse dofs (one per subdomain, at its lower-left corner).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .linalg import SingularMatrixError, as_complex_matrix, solve, solve_hpd
from .stencil import ELEMENT_NODES, Stencil9, element_matrix

__all__ = [
    "INTERIOR",
    "EDGE",
    "COARSE",
    "BrokenIndexMap",
    "PeriodicOperator",
    "CellLayout",
    "LevelSymbols",
    "BlockSymbol",
    "SchurStencilCoeffs",
    "broken_blocks",
    "schur_stencil",
    "factor_symbols",
    "injection_symbol_R1",
    "jump_and_harmonic_symbols",
    "coarse_couplings",
    "neumann_matrix",
    "pinv_hermitian",
]

INTERIOR = "interior"
EDGE = "interface-edge"
COARSE = "coarse-corner"

# Eigenvalues of a coarse Schur symbol below this fraction of the stencil
# scale are treated as the (exact) null space of constants at theta = 0.
NULL_TOL = 1e-10


@dataclass(frozen=True)
class BrokenIndexMap:
    """Dofs of one subdomain in the broken space.

    ``dofs`` lists the r-dofs (interior and interface-edge) in lexicographic
    order followed by the coarse corner ``(0, 0)``.  The three far corners
    belong to neighbouring subdomains' coarse dofs.
    """

    p: int
    dofs: tuple = field(init=False)
    kinds: tuple = field(init=False)

    def __post_init__(self):
        p = self.p
        if p < 2:
            raise ValueError(f"period must be >= 2, got {p}")
        dofs, kinds = [], []
        for l in range(p + 1):
            for k in range(p + 1):
                if k in (0, p) and l in (0, p):
                    continue
                dofs.append((k, l))
                kinds.append(INTERIOR if 0 < k < p and 0 < l < p else EDGE)
        dofs.append((0, 0))
        kinds.append(COARSE)
        object.__setattr__(self, "dofs", tuple(dofs))
        object.__setattr__(self, "kinds", tuple(kinds))

    @property
    def n_r(self) -> int:
        return (self.p + 1) ** 2 - 4

    @property
    def n_total(self) -> int:
        return (self.p + 1) ** 2 - 3

    @cached_property
    def r_index(self) -> dict:
        return {d: i for i, d in enumerate(self.dofs[:-1])}

    def indices(self, kind: str) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k == kind], dtype=int)


def neumann_matrix(element: np.ndarray, p: int) -> np.ndarray:
    """Assemble the ``(p+1)^2`` subdomain matrix from p*p copies of ``element``.

    Node ``(k, l)`` has index ``k + (p+1)*l``.
    """
    n = p + 1
    a = np.zeros((n * n, n * n))
    loc = [ex + n * ey for ex, ey in ELEMENT_NODES]
    for ey in range(p):
        for ex in range(p):
            idx = [ex + n * ey + o for o in loc]
            a[np.ix_(idx, idx)] += element
    return a


class PeriodicOperator:
    """Translation-invariant coupling between two dof families of a cell lattice."""

    def __init__(self, shape, row_pos, col_pos, period, triplets):
        self.shape = tuple(shape)
        self.row_pos = np.asarray(row_pos, dtype=float)
        self.col_pos = np.asarray(col_pos, dtype=float)
        self.period = period
        grouped = defaultdict(lambda: ([], [], []))
        for r, c, sx, sy, v in triplets:
            g = grouped[(sx, sy)]
            g[0].append(r)
            g[1].append(c)
            g[2].append(v)
        self.parts = {
            s: sp.coo_matrix((v, (r, c)), shape=self.shape).tocsr() for s, (r, c, v) in grouped.items()
        }

    def cell_symbol(self, theta) -> sp.csr_matrix:
        """Symbol in the cell-index convention (phases only on wrapped couplings)."""
        t1, t2 = float(theta[0]), float(theta[1])
        out = sp.csr_matrix(self.shape, dtype=complex)
        for (sx, sy), m in self.parts.items():
            out = out + np.exp(1j * (t1 * sx + t2 * sy)) * m
        return out

    def row_phase(self, theta) -> np.ndarray:
        return np.exp(1j * (self.row_pos @ np.asarray(theta, dtype=float)) / self.period)

    def col_phase(self, theta) -> np.ndarray:
        return np.exp(1j * (self.col_pos @ np.asarray(theta, dtype=float)) / self.period)

    def symbol(self, theta) -> sp.csr_matrix:
        m = self.cell_symbol(theta)
        return sp.diags(self.row_phase(theta).conj()) @ m @ sp.diags(self.col_phase(theta))

    def dense_symbol(self, theta) -> np.ndarray:
        return self.symbol(theta).toarray()


class CellLayout:
    """Index bookkeeping and periodic operators for one analysis cell.

    Parameters
    ----------
    stencil : Stencil9
        Fine-grid operator of this level.
    p : int
        Subdomain width in elements.
    nsub : int
        Subdomains per cell side (1 for two-level symbols).
    element : ndarray, optional
        4x4 element matrix; defaults to :func:`element_matrix` of the stencil.
        The coarse level of a three-level method passes the macroelement
        Schur complement here.
    """

    def __init__(self, stencil: Stencil9, p: int, nsub: int = 1, element=None):
        if p < 2:
            raise ValueError(f"subdomain width must be >= 2, got {p}")
        if nsub < 1:
            raise ValueError(f"nsub must be >= 1, got {nsub}")
        self.stencil = stencil
        self.p = p
        self.nsub = nsub
        self.P = p * nsub
        self.element = element_matrix(stencil) if element is None else np.asarray(element, float)
        self.bmap = BrokenIndexMap(p)
        self.n_sub = nsub * nsub
        self.n_fine = self.P**2
        self.n_r_sub = self.bmap.n_r
        self.n_r = self.n_sub * self.n_r_sub
        self.n_c = self.n_sub
        self.n_broken = self.n_r + self.n_c
        self.neumann = neumann_matrix(self.element, p)
        self._build_positions()

    # ----------------------------------------------------------------- indices
    def _build_positions(self):
        P, p, ns = self.P, self.p, self.nsub
        fx, fy = np.meshgrid(np.arange(P), np.arange(P), indexing="xy")
        self.fine_pos = np.column_stack([fx.ravel(), fy.ravel()]).astype(float)
        pos = np.zeros((self.n_broken, 2))
        for sd in range(self.n_sub):
            a, b = sd % ns, sd // ns
            for i, (k, l) in enumerate(self.bmap.dofs[:-1]):
                pos[sd * self.n_r_sub + i] = (a * p + k, b * p + l)
            pos[self.n_r + sd] = (a * p, b * p)
        self.broken_pos = pos

    def fine_index(self, gx: int, gy: int):
        P = self.P
        return gx % P + P * (gy % P), gx // P, gy // P

    def sub_index(self, a: int, b: int):
        ns = self.nsub
        return a % ns + ns * (b % ns), a // ns, b // ns

    def local_to_broken(self, a: int, b: int, k: int, l: int):
        """Broken dof (index, cell shift) of local node ``(k, l)`` of subdomain ``(a, b)``."""
        p = self.p
        if k in (0, p) and l in (0, p):
            sd, sx, sy = self.sub_index(a + k // p, b + l // p)
            return self.n_r + sd, sx, sy
        sd, sx, sy = self.sub_index(a, b)
        return sd * self.n_r_sub + self.bmap.r_index[(k, l)], sx, sy

    def subdomain_kinds(self) -> np.ndarray:
        """Kind label of every broken dof."""
        kinds = list(self.bmap.kinds[:-1]) * self.n_sub + [COARSE] * self.n_c
        return np.array(kinds, dtype=object)

    # ---------------------------------------------------------------- operators
    def _op(self, shape, rpos, cpos, triplets):
        return PeriodicOperator(shape, rpos, cpos, self.P, triplets)

    @cached_property
    def A(self) -> PeriodicOperator:
        """Assembled fine operator."""
        trip = []
        e = self.element
        for y in range(self.P):
            for x in range(self.P):
                nodes = [self.fine_index(x + ex, y + ey) for ex, ey in ELEMENT_NODES]
                for i, (ri, rsx, rsy) in enumerate(nodes):
                    for j, (cj, csx, csy) in enumerate(nodes):
                        if e[i, j] != 0.0:
                            trip.append((ri, cj, csx - rsx, csy - rsy, e[i, j]))
        return self._op((self.n_fine,) * 2, self.fine_pos, self.fine_pos, trip)

    @cached_property
    def A_hat(self) -> PeriodicOperator:
        """Partially subassembled operator on the broken space."""
        n = self.p + 1
        loc = [(k, l) for l in range(n) for k in range(n)]
        trip = []
        nz = np.argwhere(self.neumann != 0.0)
        for sd in range(self.n_sub):
            a, b = sd % self.nsub, sd // self.nsub
            maps = [self.local_to_broken(a, b, k, l) for k, l in loc]
            for u, v in nz:
                ru, rsx, rsy = maps[u]
                cv, csx, csy = maps[v]
                trip.append((ru, cv, csx - rsx, csy - rsy, self.neumann[u, v]))
        return self._op((self.n_broken,) * 2, self.broken_pos, self.broken_pos, trip)

    @cached_property
    def R1(self) -> PeriodicOperator:
        """Scaled injection from the fine space into the broken space."""
        trip = []
        p = self.p
        for sd in range(self.n_sub):
            a, b = sd % self.nsub, sd // self.nsub
            for i, ((k, l), kind) in enumerate(zip(self.bmap.dofs[:-1], self.bmap.kinds[:-1])):
                f, sx, sy = self.fine_index(a * p + k, b * p + l)
                w = 1.0 if kind == INTERIOR else 0.5
                trip.append((sd * self.n_r_sub + i, f, sx, sy, w))
            f, sx, sy = self.fine_index(a * p, b * p)
            trip.append((self.n_r + sd, f, sx, sy, 1.0))
        return self._op((self.n_broken, self.n_fine), self.broken_pos, self.fine_pos, trip)

    def _partner(self, a, b, k, l):
        p = self.p
        if k == 0:
            return a - 1, b, p, l
        if k == p:
            return a + 1, b, 0, l
        if l == 0:
            return a, b - 1, k, p
        return a, b + 1, k, 0

    @cached_property
    def JDt(self) -> PeriodicOperator:
        """Transpose of the weighted jump operator (broken -> broken).

        ``(J_D^T v)^(i)(x) = 1/2 (v^(i)(x) - v^(j)(x))`` on every interface
        node shared by subdomains ``i`` and ``j``; zero elsewhere.
        """
        trip = []
        for sd in range(self.n_sub):
            a, b = sd % self.nsub, sd // self.nsub
            for i, ((k, l), kind) in enumerate(zip(self.bmap.dofs[:-1], self.bmap.kinds[:-1])):
                if kind != EDGE:
                    continue
                row = sd * self.n_r_sub + i
                trip.append((row, row, 0, 0, 0.5))
                col, sx, sy = self.local_to_broken(*self._partner(a, b, k, l))
                trip.append((row, col, sx, sy, -0.5))
        return self._op((self.n_broken,) * 2, self.broken_pos, self.broken_pos, trip)

    @cached_property
    def harmonic_local(self) -> np.ndarray:
        """``-A_II^{-1} A_IG`` for one subdomain (interior x interface-edge)."""
        n = self.p + 1
        dofs = self.bmap.dofs[:-1]
        node = [k + n * l for k, l in dofs]
        ii = [node[i] for i, kd in enumerate(self.bmap.kinds[:-1]) if kd == INTERIOR]
        gg = [node[i] for i, kd in enumerate(self.bmap.kinds[:-1]) if kd == EDGE]
        a_ii = self.neumann[np.ix_(ii, ii)]
        a_ig = self.neumann[np.ix_(ii, gg)]
        try:
            return -np.real(solve(a_ii, a_ig))
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"interior block is singular: {exc}", exc.pivot) from exc

    @cached_property
    def H(self) -> PeriodicOperator:
        """Discrete harmonic extension of interface values (broken -> fine interior)."""
        p = self.p
        kinds = self.bmap.kinds[:-1]
        i_loc = [i for i, kd in enumerate(kinds) if kd == INTERIOR]
        g_loc = [i for i, kd in enumerate(kinds) if kd == EDGE]
        h = self.harmonic_local
        trip = []
        for sd in range(self.n_sub):
            a, b = sd % self.nsub, sd // self.nsub
            rows = []
            for i in i_loc:
                k, l = self.bmap.dofs[i]
                rows.append(self.fine_index(a * p + k, b * p + l)[0])
            for ri, row in enumerate(rows):
                for gj, j in enumerate(g_loc):
                    if h[ri, gj] != 0.0:
                        trip.append((row, sd * self.n_r_sub + j, 0, 0, h[ri, gj]))
        return self._op((self.n_fine, self.n_broken), self.fine_pos, self.broken_pos, trip)

    # ---------------------------------------------------------------- evaluate
    def at(self, theta) -> "LevelSymbols":
        return LevelSymbols(self, theta)


def pinv_hermitian(s: np.ndarray, scale: float) -> np.ndarray:
    """Inverse of a Hermitian matrix, pseudo-inverting only its exact null space.

    Eigenvalues below ``NULL_TOL * scale`` are dropped; this happens only for
    the constant mode of a periodic coarse operator at ``theta = 0``.
    """
    s = 0.5 * (s + s.conj().T)
    w, q = np.linalg.eigh(s)
    keep = np.abs(w) > NULL_TOL * scale
    return (q[:, keep] / w[keep]) @ q[:, keep].conj().T


class LevelSymbols:
    """All per-frequency symbols of one :class:`CellLayout`."""

    def __init__(self, layout: CellLayout, theta):
        self.layout = layout
        self.theta = (float(theta[0]), float(theta[1]))
        lay = layout
        self.A = layout.A.symbol(self.theta).tocsr()
        ahat = layout.A_hat.symbol(self.theta).tocsr()
        nr, m = lay.n_r, lay.n_r_sub
        self.Arr_blocks = [ahat[s * m:(s + 1) * m, s * m:(s + 1) * m].toarray() for s in range(lay.n_sub)]
        self.Apr = ahat[nr:, :nr].toarray()
        self.App = ahat[nr:, nr:].toarray()
        self._ahat = ahat
        self._split = {}

    # ------------------------------------------------------------ broken parts
    @property
    def A_hat(self) -> np.ndarray:
        return self._ahat.toarray()

    @cached_property
    def Arr_inv_blocks(self):
        out = []
        for blk in self.Arr_blocks:
            try:
                out.append(solve_hpd(blk, np.eye(blk.shape[0])))
            except SingularMatrixError as exc:
                raise SingularMatrixError(
                    f"A_rr block is singular at theta={self.theta}: {exc}", exc.pivot
                ) from exc
        return out

    @cached_property
    def Arr_inv(self) -> sp.csr_matrix:
        return sp.block_diag(self.Arr_inv_blocks, format="csr")

    @cached_property
    def Arr_inv_ArP(self) -> np.ndarray:
        """``A_rr^{-1} A_Pr^H`` (r x coarse)."""
        return np.asarray(self.Arr_inv @ self.Apr.conj().T)

    @cached_property
    def S(self) -> np.ndarray:
        """Coarse Schur complement symbol ``A_PP - A_Pr A_rr^{-1} A_Pr^H``."""
        s = self.App - self.Apr @ self.Arr_inv_ArP
        return 0.5 * (s + s.conj().T)

    @cached_property
    def S_inv(self) -> np.ndarray:
        return pinv_hermitian(self.S, scale=abs(self.layout.stencil.center))

    # ------------------------------------------------------------- transfers
    @cached_property
    def R1(self) -> sp.csr_matrix:
        return self.layout.R1.symbol(self.theta).tocsr()

    @cached_property
    def JDt(self) -> sp.csr_matrix:
        return self.layout.JDt.symbol(self.theta).tocsr()

    @cached_property
    def H(self) -> sp.csr_matrix:
        return self.layout.H.symbol(self.theta).tocsr()

    @cached_property
    def R2(self) -> sp.csr_matrix:
        return (self.R1 - self.JDt @ self.H.conj().T).tocsr()

    def R(self, variant: int) -> sp.csr_matrix:
        if variant == 1:
            return self.R1
        if variant == 2:
            return self.R2
        raise ValueError(f"fine variant must be 1 or 2, got {variant}")

    # -------------------------------------------------------- preconditioner
    def split(self, variant: int):
        """``(head, W)`` with ``R^H Ahat_approx^{-1} R = head + W B W^H``.

        ``head = R_r^H A_rr^{-1} R_r`` and ``W = R_P^H - R_r^H A_rr^{-1} A_Pr^H``
        where ``B`` is whatever stands in for the coarse Schur inverse.
        """
        if variant not in self._split:
            r = self.R(variant)
            nr = self.layout.n_r
            r_r, r_c = r[:nr], r[nr:]
            r_rh = r_r.conj().T.tocsr()
            if self.layout.n_sub == 1:
                # one dense block: dense products beat sparse ones here
                t = np.asarray(r_rh @ self.Arr_inv_blocks[0])
                head = np.asarray((r_rh @ t.conj().T).conj().T)
            else:
                head = (r_rh @ self.Arr_inv @ r_r).toarray()
            w = r_c.conj().T.toarray() - r_rh @ self.Arr_inv_ArP
            self._split[variant] = (head, np.asarray(w))
        return self._split[variant]

    def preconditioner(self, variant: int, coarse_inverse=None) -> np.ndarray:
        """Symbol of ``R^H Ahat_approx^{-1} R`` on the fine space.

        ``coarse_inverse`` replaces the exact Schur inverse in the block
        factorization (three-level and coarse-multiplicative variants).
        Uses ``Ahat^{-1} = blkdiag(A_rr^{-1}, 0) + Z B Z^H`` with
        ``Z = [-A_rr^{-1} A_Pr^H; I]``.
        """
        b = self.S_inv if coarse_inverse is None else coarse_inverse
        head, w = self.split(variant)
        return head + w @ b @ w.conj().T


# ------------------------------------------------------------------ spec API
@dataclass(frozen=True)
class BlockSymbol:
    """Blocks of the broken operator symbol at one frequency (two-level cell)."""

    A_rr: np.ndarray
    A_Pr: np.ndarray
    A_PP: np.ndarray
    S_P: np.ndarray
    theta: tuple

    @property
    def A_hat(self) -> np.ndarray:
        return np.block([[self.A_rr, self.A_Pr.conj().T], [self.A_Pr, self.A_PP]])


@dataclass(frozen=True)
class SchurStencilCoeffs:
    """Coarse stencil obtained by condensing one subdomain onto its corners.

    ``s1, s2, s3`` are the self, adjacent and opposite-corner entries of the
    4x4 corner condensation ``S0``; ``macro`` is the macroelement Schur
    complement (element matrix of the coarse operator).
    """

    s1: float
    s2: float
    s3: float
    center: float
    stencil: Stencil9
    macro: np.ndarray

    @property
    def row_sum(self) -> float:
        return float(self.stencil.coeffs.sum())


def broken_blocks(s: Stencil9, p: int, theta) -> BlockSymbol:
    lev = CellLayout(s, p).at(theta)
    return BlockSymbol(lev.Arr_blocks[0], lev.Apr, lev.App, lev.S, lev.theta)


def coarse_couplings(s: Stencil9, p: int):
    """The per-subdomain couplings into the coarse dof at (0, 0).

    Returns a list of ``(r_index, shift, value)``, one entry for every
    nonzero coupling contributed by each of the four subdomains sharing the
    corner (twelve for a 9-point stencil).
    """
    lay = CellLayout(s, p)
    out = []
    for (sx, sy), m in lay.A_hat.parts.items():
        coo = m[lay.n_r:, :lay.n_r].tocoo()
        for c, v in zip(coo.col, coo.data):
            out.append((int(c), (sx, sy), float(v)))
    return out


def schur_stencil(s: Stencil9, p: int, element=None) -> SchurStencilCoeffs:
    """Condense one subdomain onto its four corners and assemble the coarse stencil."""
    e = element_matrix(s) if element is None else np.asarray(element, float)
    a = neumann_matrix(e, p)
    n = p + 1
    corners = [0, p, n * p, n * p + p]
    rest = [i for i in range(n * n) if i not in corners]
    a_rr = a[np.ix_(rest, rest)]
    a_rp = a[np.ix_(rest, corners)]
    try:
        s0 = np.real(a_rp.T @ solve(a_rr, a_rp))
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"subdomain A_rr is singular: {exc}", exc.pivot) from exc
    macro = a[np.ix_(corners, corners)] - s0
    macro = 0.5 * (macro + macro.T)
    c = np.zeros((3, 3))
    for i, (xi, yi) in enumerate(ELEMENT_NODES):
        for j, (xj, yj) in enumerate(ELEMENT_NODES):
            c[xj - xi + 1, yj - yi + 1] += macro[i, j]
    st = Stencil9(0.5 * (c + c[::-1, ::-1]))
    return SchurStencilCoeffs(
        s1=float(s0[0, 0]), s2=float(s0[0, 1]), s3=float(s0[0, 3]),
        center=st.center, stencil=st, macro=macro,
    )


def factor_symbols(b: BlockSymbol):
    """Block LDU factors ``K_LD = [[A_rr, 0], [A_Pr, S]]``, ``K_U = [[I, A_rr^{-1} A_Pr^H], [0, I]]``."""
    a_rr = as_complex_matrix(b.A_rr, square=True)
    nr, nc = a_rr.shape[0], b.A_PP.shape[0]
    k_ld = np.block([[a_rr, np.zeros((nr, nc))], [b.A_Pr, b.S_P]])
    k_u = np.block([[np.eye(nr), solve(a_rr, b.A_Pr.conj().T)], [np.zeros((nc, nr)), np.eye(nc)]])
    return k_ld, k_u


def injection_symbol_R1(bmap: BrokenIndexMap, theta) -> np.ndarray:
    """Symbol of the scaled injection; phase-free in the position convention."""
    return CellLayout(_ANY, bmap.p).R1.dense_symbol(theta)


def jump_and_harmonic_symbols(s: Stencil9, p: int, theta):
    """``(J_D^T, H, R_2)`` symbols; ``R_2 = R_1 - J_D^T H^H``."""
    lev = CellLayout(s, p).at(theta)
    return lev.JDt.toarray(), lev.H.toarray(), lev.R2.toarray()


_ANY = Stencil9(np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]]))
