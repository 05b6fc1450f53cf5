"""Brute-force check of the symbols on a finite periodic mesh.

The Q1 Laplacian is assembled on an ``(m p) x (m p)`` torus split into
``m x m`` subdomains.  Every BDDC ingredient is built from global element
loops (nothing here uses the symbol machinery), and the preconditioned
operator is formed explicitly.  Its spectrum, with the constant mode
deflated, must equal the union of symbol spectra at the torus frequencies
``theta_k = 2 pi k / cells`` where ``cells`` is the number of analysis cells
per axis (``m`` for two levels, ``m / p`` for three levels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .preconditioners import PreconditionerSpec, SymbolFactory
from .stencil import Q1_LAPLACIAN

__all__ = [
    "MAX_FINE_DOFS",
    "MeshSizeError",
    "ArnoldiBreakdownError",
    "q1_element_stiffness",
    "PeriodicMesh",
    "BDDCLevel",
    "AssembledSystem",
    "assemble",
    "deflation_basis",
    "finite_spectrum",
    "finite_fine_wrap_curve",
    "lfa_union",
    "MatchReport",
    "spectra_match",
    "ArnoldiResult",
    "arnoldi",
    "RitzEstimate",
    "ritz_estimate",
]

MAX_FINE_DOFS = 10_000
# Relative singular-value cutoff of the coarse pseudo-inverse.
PINV_RCOND = 1e-10


class MeshSizeError(ValueError):
    """Mesh exceeds the dense-oracle size cap."""


class ArnoldiBreakdownError(ArithmeticError):
    """Arnoldi could not start (zero or non-finite start vector)."""


def q1_element_stiffness() -> np.ndarray:
    """Bilinear element stiffness on the unit square by 2x2 Gauss quadrature.

    Local nodes are (0,0), (1,0), (0,1), (1,1).
    """
    g = (1 - 1 / math.sqrt(3)) / 2, (1 + 1 / math.sqrt(3)) / 2
    nodes = ((0, 0), (1, 0), (0, 1), (1, 1))
    k = np.zeros((4, 4))
    for xi in g:
        for eta in g:
            grads = []
            for nx, ny in nodes:
                fx = xi if nx else 1 - xi
                fy = eta if ny else 1 - eta
                sx = 1.0 if nx else -1.0
                sy = 1.0 if ny else -1.0
                grads.append((sx * fy, fx * sy))
            grads = np.array(grads)
            k += 0.25 * grads @ grads.T
    return k


@dataclass(frozen=True)
class PeriodicMesh:
    """``m x m`` subdomains of ``p x p`` elements on a torus."""

    p: int
    m: int

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError(f"subdomain width p must be an integer >= 2, got {self.p!r}")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"subdomain count m must be an integer >= 2, got {self.m!r}")
        if self.n_fine > MAX_FINE_DOFS:
            raise MeshSizeError(f"(m p)^2 = {self.n_fine} exceeds the cap of {MAX_FINE_DOFS} dofs")

    @property
    def N(self) -> int:
        return self.m * self.p

    @property
    def n_fine(self) -> int:
        return (self.m * self.p) ** 2

    @property
    def n_broken(self) -> int:
        return self.m**2 * ((self.p + 1) ** 2 - 3)

    def node(self, x: int, y: int) -> int:
        n = self.N
        return x % n + n * (y % n)


class BDDCLevel:
    """Partially assembled operators of one level on a torus.

    Parameters
    ----------
    m : int
        Subdomains per axis.
    p : int
        Elements per subdomain side.
    element_of : callable
        ``element_of(ex, ey)`` returns the 4x4 matrix of element ``(ex, ey)``
        in global element coordinates.
    """

    def __init__(self, m: int, p: int, element_of: Callable[[int, int], np.ndarray]):
        self.m, self.p = m, p
        self.N = m * p
        n = p + 1
        self.n_fine = self.N**2
        self.n_sub = m * m
        self.local = [(k, l) for l in range(n) for k in range(n)]
        corners = {(0, 0), (p, 0), (0, p), (p, p)}
        self.r_local = [kl for kl in self.local if kl not in corners]
        self.n_r_sub = len(self.r_local)
        self.n_r = self.n_sub * self.n_r_sub
        self.n_c = self.n_sub
        self.n_broken = self.n_r + self.n_c
        r_pos = {kl: i for i, kl in enumerate(self.r_local)}

        self.neumann = []
        self.l2g = []
        self.l2b = []
        for b in range(m):
            for a in range(m):
                loc = np.zeros((n * n, n * n))
                for ey in range(p):
                    for ex in range(p):
                        e = element_of(a * p + ex, b * p + ey)
                        idx = [ex + dx + n * (ey + dy) for dx, dy in ((0, 0), (1, 0), (0, 1), (1, 1))]
                        loc[np.ix_(idx, idx)] += e
                self.neumann.append(loc)
                sd = a + m * b
                self.l2g.append(np.array([self.node(a * p + k, b * p + l) for k, l in self.local]))
                bro = []
                for k, l in self.local:
                    if (k, l) in corners:
                        bro.append(self.n_r + self.sub(a + k // p, b + l // p))
                    else:
                        bro.append(sd * self.n_r_sub + r_pos[(k, l)])
                self.l2b.append(np.array(bro))

    def node(self, x, y):
        return x % self.N + self.N * (y % self.N)

    def sub(self, a, b):
        return a % self.m + self.m * (b % self.m)

    # ------------------------------------------------------------ operators
    def _assemble(self, maps_r, maps_c, shape):
        rows, cols, vals = [], [], []
        for loc, mr, mc in zip(self.neumann, maps_r, maps_c):
            r, c = np.nonzero(loc)
            rows.append(mr[r])
            cols.append(mc[c])
            vals.append(loc[r, c])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=shape)

    @cached_property
    def A(self) -> sp.csr_matrix:
        return self._assemble(self.l2g, self.l2g, (self.n_fine, self.n_fine))

    @cached_property
    def A_hat(self) -> sp.csr_matrix:
        return self._assemble(self.l2b, self.l2b, (self.n_broken, self.n_broken))

    @cached_property
    def multiplicity(self) -> np.ndarray:
        """``|N_x|``: how many subdomains (closed) contain each fine node."""
        cnt = np.zeros(self.n_fine)
        for g in self.l2g:
            np.add.at(cnt, g, 1.0)
        return cnt

    @cached_property
    def R1(self) -> sp.csr_matrix:
        """Broken copies get ``delta = 1/|N_x|``; the single coarse copy gets 1."""
        rows, cols, vals = [], [], []
        seen_c = set()
        for g, b in zip(self.l2g, self.l2b):
            for gi, bi in zip(g, b):
                if bi >= self.n_r:
                    if bi in seen_c:
                        continue
                    seen_c.add(bi)
                    rows.append(bi), cols.append(gi), vals.append(1.0)
                else:
                    rows.append(bi), cols.append(gi), vals.append(1.0 / self.multiplicity[gi])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_broken, self.n_fine))

    def _partner(self, a, b, k, l):
        p = self.p
        if k == 0:
            return a - 1, b, p, l
        if k == p:
            return a + 1, b, 0, l
        if l == 0:
            return a, b - 1, k, p
        return a, b + 1, k, 0

    def _edge_items(self):
        """``(subdomain, local index, partner broken dof, fine node)`` for every edge dof."""
        p, n = self.p, self.p + 1
        out = []
        for b in range(self.m):
            for a in range(self.m):
                sd = a + self.m * b
                for li, (k, l) in enumerate(self.local):
                    on_edge = k in (0, p) or l in (0, p)
                    if not on_edge or (k in (0, p) and l in (0, p)):
                        continue
                    pa, pb, pk, pl = self._partner(a, b, k, l)
                    psd = self.sub(pa, pb)
                    pdof = self.l2b[psd][pk + n * pl]
                    out.append((sd, li, pdof, self.l2g[sd][li]))
        return out

    @cached_property
    def JDt(self) -> sp.csr_matrix:
        """``(J_D^T v)^(i)(x) = delta_j(x) v^(i)(x) - delta_i(x) v^(j)(x)`` on edges."""
        rows, cols, vals = [], [], []
        for sd, li, pdof, g in self._edge_items():
            row = self.l2b[sd][li]
            d = 1.0 / self.multiplicity[g]
            rows += [row, row]
            cols += [row, pdof]
            vals += [d, -d]
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_broken, self.n_broken))

    @cached_property
    def H(self) -> sp.csr_matrix:
        """Harmonic extension ``-A_II^{-1} A_IG`` of each subdomain's edge values."""
        p, n = self.p, self.p + 1
        interior = [k + n * l for k, l in self.local if 0 < k < p and 0 < l < p]
        edges = [k + n * l for k, l in self.local
                 if (k in (0, p) or l in (0, p)) and not (k in (0, p) and l in (0, p))]
        rows, cols, vals = [], [], []
        for sd, loc in enumerate(self.neumann):
            h = -np.linalg.solve(loc[np.ix_(interior, interior)], loc[np.ix_(interior, edges)])
            gi = self.l2g[sd][interior]
            bj = self.l2b[sd][edges]
            rr, cc = np.meshgrid(gi, bj, indexing="ij")
            rows.append(rr.ravel()), cols.append(cc.ravel()), vals.append(h.ravel())
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n_fine, self.n_broken))

    @cached_property
    def R2(self) -> sp.csr_matrix:
        return (self.R1 - self.JDt @ self.H.T).tocsr()

    def R(self, variant: int) -> sp.csr_matrix:
        return {1: self.R1, 2: self.R2}[variant]

    # ---------------------------------------------------------- solvers
    @cached_property
    def _blocks(self):
        ah = self.A_hat.tocsc()
        nr = self.n_r
        arr = ah[:nr, :nr].tocsc()
        arc = ah[:nr, nr:].toarray()
        acc = ah[nr:, nr:].toarray()
        return spla.splu(arr), arc, acc

    @cached_property
    def S(self) -> np.ndarray:
        """Coarse Schur complement of the partially assembled matrix."""
        lu, arc, acc = self._blocks
        s = acc - arc.T @ lu.solve(arc)
        return 0.5 * (s + s.T)

    @cached_property
    def S_pinv(self) -> np.ndarray:
        u, sv, vt = scipy.linalg.svd(self.S)
        keep = sv > PINV_RCOND * sv[0]
        return (vt[keep].T / sv[keep]) @ u[:, keep].T

    def solve_broken(self, g: np.ndarray, coarse_inverse: np.ndarray) -> np.ndarray:
        """Block-factored solve with ``coarse_inverse`` standing in for ``S^{-1}``."""
        lu, arc, _ = self._blocks
        nr = self.n_r
        g = np.asarray(g, dtype=float)
        y_r = lu.solve(np.ascontiguousarray(g[:nr]))
        u_c = coarse_inverse @ (g[nr:] - arc.T @ y_r)
        u_r = y_r - lu.solve(np.ascontiguousarray(arc @ u_c))
        return np.concatenate([u_r, u_c])

    def preconditioner(self, variant: int, coarse_inverse: Optional[np.ndarray] = None) -> np.ndarray:
        """Dense ``R^T Ahat_approx^{-1} R``."""
        b = self.S_pinv if coarse_inverse is None else coarse_inverse
        r = self.R(variant)
        return r.T @ self.solve_broken(r.toarray(), b)

    @cached_property
    def macro_elements(self) -> list:
        """Per-subdomain condensation of the Neumann matrix onto its four corners."""
        p, n = self.p, self.p + 1
        corners = [0, p, n * p, n * p + p]
        rest = [i for i in range(n * n) if i not in corners]
        out = []
        for loc in self.neumann:
            s = loc[np.ix_(corners, corners)] - loc[np.ix_(corners, rest)] @ np.linalg.solve(
                loc[np.ix_(rest, rest)], loc[np.ix_(rest, corners)])
            out.append(0.5 * (s + s.T))
        return out


class AssembledSystem:
    """All finite-mesh operators for one :class:`PeriodicMesh`."""

    def __init__(self, mesh: PeriodicMesh):
        self.mesh = mesh
        ke = q1_element_stiffness()
        self.fine = BDDCLevel(mesh.m, mesh.p, lambda ex, ey: ke)

    p = property(lambda self: self.mesh.p)
    m = property(lambda self: self.mesh.m)
    A = property(lambda self: self.fine.A)
    A_hat = property(lambda self: self.fine.A_hat)
    R1 = property(lambda self: self.fine.R1)
    R2 = property(lambda self: self.fine.R2)
    JDt = property(lambda self: self.fine.JDt)
    H = property(lambda self: self.fine.H)
    S_pi = property(lambda self: self.fine.S)

    @property
    def D(self) -> np.ndarray:
        return self.A.diagonal()

    @property
    def Ds(self) -> np.ndarray:
        return np.diag(self.S_pi).copy()

    @cached_property
    def coarse(self) -> BDDCLevel:
        """BDDC level on the coarse torus; coarse subdomains are ``p x p`` fine subdomains."""
        m, p = self.mesh.m, self.mesh.p
        if m % p:
            raise ValueError(f"three-level analysis needs m divisible by p (m={m}, p={p})")
        macros = self.fine.macro_elements
        return BDDCLevel(m // p, p, lambda ex, ey: macros[ex % m + m * (ey % m)])

    # ------------------------------------------------------------ operators
    def coarse_inverse(self, spec: PreconditionerSpec) -> np.ndarray:
        if spec.j == 0:
            return self.fine.S_pinv
        c = self.coarse
        minv = c.preconditioner(spec.j, c.S_pinv)
        s = self.S_pi
        dinv = 1.0 / self.Ds
        eye = np.eye(s.shape[0])
        if spec.mult in ("c", "fc", "sc"):
            w1 = spec.omega if spec.mult == "c" else spec.omega1
            minv = minv + w1 * dinv[:, None] * (eye - s @ minv)
            if spec.mult == "sc":
                minv = minv + spec.omega2 * (eye - minv @ s) * dinv[None, :]
        return minv

    def preconditioner(self, spec: PreconditionerSpec) -> np.ndarray:
        return self.fine.preconditioner(spec.i, self.coarse_inverse(spec))

    def fine_weight(self, spec: PreconditionerSpec) -> float:
        return {"f": spec.omega, "fc": spec.omega2}.get(spec.mult, 0.0) or 0.0

    def operator(self, spec: PreconditionerSpec) -> np.ndarray:
        """Dense preconditioned operator, fine wrap included."""
        a = self.A.toarray()
        g = self.preconditioner(spec) @ a
        w = self.fine_weight(spec)
        if w:
            g = g + w * (a - a @ g) / self.D[:, None]
        return g

    def apply(self, spec: PreconditionerSpec) -> Callable[[np.ndarray], np.ndarray]:
        """Matrix-free application of the preconditioned operator."""
        b = self.coarse_inverse(spec)
        r = self.fine.R(spec.i)
        a = self.A
        d = self.D
        w = self.fine_weight(spec)

        def matvec(v):
            av = a @ v
            gv = r.T @ self.fine.solve_broken(r @ av, b)
            if w:
                gv = gv + w * (av - a @ gv) / d
            return gv

        return matvec


def assemble(p: int, m: int) -> AssembledSystem:
    """Assemble the finite periodic problem (``(m p)^2 <= 10^4`` fine dofs)."""
    return AssembledSystem(PeriodicMesh(p, m))


# ------------------------------------------------------------ spectra
def deflation_basis(n: int, dtype=float) -> np.ndarray:
    """Orthonormal basis of the complement of the constant vector (``n x (n-1)``).

    Columns 2..n of the Householder reflector that maps ``e_1`` to the
    normalized constant vector.
    """
    v = np.full(n, -1.0 / math.sqrt(n))
    v[0] += 1.0
    v /= np.linalg.norm(v)
    q = np.eye(n) - 2.0 * np.outer(v, v)
    return q[:, 1:].astype(dtype)


def finite_spectrum(sys: AssembledSystem, spec: PreconditionerSpec) -> np.ndarray:
    """Eigenvalues of the preconditioned operator with the constant mode removed."""
    v = deflation_basis(sys.mesh.n_fine)
    g = v.T @ sys.operator(spec) @ v
    return scipy.linalg.eigvals(g, check_finite=False)


def finite_fine_wrap_curve(sys: AssembledSystem, spec: PreconditionerSpec,
                           omegas: Sequence[float]) -> np.ndarray:
    """``(lam_min, lam_max)`` of the fine-wrapped operator for each weight.

    On the mean-zero subspace ``G = B_v A_v`` with ``B_v = V^T B V``
    symmetric and ``A_v = V^T A V`` positive definite; the wrapped operator
    ``G + w D^{-1} A (I - G)`` (``D = d I``) is then similar to
    ``I + F (I - w L^T L / d) F`` with ``A_v = L L^T`` and
    ``F = (L^T B_v L - I)^{1/2}``.  One symmetric eigenproblem per weight.
    """
    if spec.mult not in ("none", "f") or spec.j != 0:
        raise ValueError("fine-wrap curves are defined for two-level plain/f specs")
    d = sys.D
    if not np.allclose(d, d[0]):
        raise ValueError("diagonal is not constant")
    base = PreconditionerSpec(spec.i)
    v = deflation_basis(sys.mesh.n_fine)
    bv = v.T @ sys.preconditioner(base) @ v
    av = v.T @ (sys.A @ v)
    low = np.linalg.cholesky(0.5 * (av + av.T))
    c = low.T @ bv @ low
    x = 0.5 * (c + c.T) - np.eye(c.shape[0])
    w, q = scipy.linalg.eigh(x)
    f = (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T
    lf = low @ f
    y = lf.T @ lf / d[0]
    y = 0.5 * (y + y.T)
    out = []
    for om in omegas:
        ev = 1.0 + scipy.linalg.eigvalsh(x - float(om) * y, check_finite=False)
        out.append((ev[0], ev[-1]))
    return np.array(out)


def lfa_union(spec: PreconditionerSpec, p: int, m: int, stencil=Q1_LAPLACIAN) -> np.ndarray:
    """Symbol eigenvalues at every torus frequency, constant mode removed at ``theta = 0``."""
    cells = m if spec.levels == 2 else m // p
    if spec.levels == 3 and m % p:
        raise ValueError(f"three-level union needs m divisible by p (m={m}, p={p})")
    factory = SymbolFactory(stencil, p, spec.levels)
    out = []
    for k2 in range(cells):
        for k1 in range(cells):
            theta = tuple(((2 * math.pi * k / cells + math.pi) % (2 * math.pi)) - math.pi
                          for k in (k1, k2))
            g = factory.at(theta).operator(spec)
            if k1 == 0 and k2 == 0:
                v = deflation_basis(g.shape[0])
                g = v.T @ g @ v
            out.append(scipy.linalg.eigvals(g, check_finite=False))
    return np.concatenate(out)


@dataclass
class MatchReport:
    finite: np.ndarray
    lfa: np.ndarray
    max_deviation: float
    kappa_finite: float
    kappa_lfa: float

    @property
    def kappa_rel_diff(self) -> float:
        return abs(self.kappa_finite - self.kappa_lfa) / abs(self.kappa_lfa)


def _kappa(ev: np.ndarray, real: bool) -> float:
    if real:
        return float(ev.real.max() / ev.real.min())
    mag = np.abs(ev)
    return float(mag.max() / mag.min())


def multiset_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest pairwise gap under the best matching of two equal-size multisets."""
    if a.shape != b.shape:
        raise ValueError(f"multisets differ in size: {a.size} vs {b.size}")
    if np.abs(a.imag).max(initial=0) < 1e-12 and np.abs(b.imag).max(initial=0) < 1e-12:
        return float(np.abs(np.sort(a.real) - np.sort(b.real)).max())
    if a.size > 3000:
        raise ValueError("complex multiset matching is limited to 3000 values")
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def spectra_match(sys: AssembledSystem, spec: PreconditionerSpec,
                  lfa: Optional[np.ndarray] = None, lfa_p: Optional[int] = None) -> MatchReport:
    """Compare the deflated finite spectrum with the symbol union.

    ``lfa`` may be supplied (e.g. computed elsewhere); ``lfa_p`` names the
    subdomain width it was computed for and must match the mesh.
    """
    if lfa_p is not None and lfa_p != sys.p:
        raise ValueError(f"symbol side uses p={lfa_p} but the mesh has p={sys.p}")
    fin = finite_spectrum(sys, spec)
    sym = lfa_union(spec, sys.p, sys.m) if lfa is None else np.asarray(lfa)
    if sym.size != fin.size:
        raise ValueError(f"dimension mismatch: {fin.size} finite vs {sym.size} symbol eigenvalues")
    real = spec.real_spectrum
    if real:
        fin_c, sym_c = fin.real.astype(complex), sym.real.astype(complex)
        dev = max(multiset_distance(fin_c, sym_c), float(np.abs(fin.imag).max()),
                  float(np.abs(sym.imag).max()))
    else:
        dev = multiset_distance(fin, sym)
    return MatchReport(finite=fin, lfa=sym, max_deviation=dev,
                       kappa_finite=_kappa(fin, real), kappa_lfa=_kappa(sym, real))


# ------------------------------------------------------------ Arnoldi
@dataclass
class ArnoldiResult:
    hessenberg: np.ndarray
    ritz: np.ndarray
    iterations: int
    converged: bool


def arnoldi(apply: Callable[[np.ndarray], np.ndarray], v0: np.ndarray, max_iter: int = 50,
            tol: float = 1e-12) -> ArnoldiResult:
    """Arnoldi with twice-applied modified Gram-Schmidt; Ritz values of the square Hessenberg block.

    Stops early when the new basis vector is below ``tol`` relative to the
    first application (an invariant subspace was found).
    """
    beta = float(np.linalg.norm(v0))
    if not math.isfinite(beta) or beta == 0.0:
        raise ArnoldiBreakdownError("start vector is zero or not finite")
    n = v0.shape[0]
    kmax = min(max_iter, n)
    q = np.zeros((n, kmax + 1))
    h = np.zeros((kmax + 1, kmax))
    q[:, 0] = v0 / beta
    scale = None
    k = 0
    converged = False
    for k in range(kmax):
        w = apply(q[:, k])
        if not np.all(np.isfinite(w)):
            raise ArnoldiBreakdownError(f"operator produced non-finite values at step {k + 1}")
        if scale is None:
            scale = float(np.linalg.norm(w)) or 1.0
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            for i in range(k + 1):
                c = q[:, i] @ w
                h[i, k] += c
                w = w - c * q[:, i]
        h[k + 1, k] = float(np.linalg.norm(w))
        if h[k + 1, k] <= tol * scale:
            converged = True
            break
        q[:, k + 1] = w / h[k + 1, k]
    steps = k + 1
    hk = h[:steps, :steps]
    return ArnoldiResult(hessenberg=h[:steps + 1, :steps].copy(),
                         ritz=scipy.linalg.eigvals(hk), iterations=steps, converged=converged)


@dataclass
class RitzEstimate:
    ritz: np.ndarray
    lam_min: float
    lam_max: float
    kappa: float
    arnoldi: ArnoldiResult


def ritz_estimate(sys: AssembledSystem, spec: PreconditionerSpec, max_iter: int = 50,
                  tol: float = 1e-12, seed: int = 0, zero_tol: float = 1e-6) -> RitzEstimate:
    """Extreme-eigenvalue estimate from Arnoldi on the preconditioned operator.

    The Krylov space is generated from ``G x0`` with ``x0`` a seeded
    zero-mean random vector, which is the space GMRES builds for
    ``A x = 0``.  Iterates are kept mean-free so rounding cannot bring the
    constant null mode back; Ritz values below ``zero_tol * max|ritz|`` are
    dropped all the same.
    """
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(sys.mesh.n_fine)
    x0 -= x0.mean()
    g = sys.apply(spec)

    def op(v):
        w = g(v - v.mean())
        return w - w.mean()

    res = arnoldi(op, op(x0), max_iter=max_iter, tol=tol)
    ritz = res.ritz
    keep = np.abs(ritz) > zero_tol * np.abs(ritz).max()
    vals = ritz[keep]
    if spec.real_spectrum:
        lo, hi = float(vals.real.min()), float(vals.real.max())
    else:
        lo, hi = float(np.abs(vals).min()), float(np.abs(vals).max())
    return RitzEstimate(ritz=vals, lam_min=lo, lam_max=hi, kappa=hi / lo, arnoldi=res)
