"""Frequency sweeps and what is computed from them.

A sweep samples ``(2n)**2`` coarse frequencies, evaluates the operator
symbol at each, and reduces the eigenvalues to a :class:`SpectrumReport`.

Two shortcuts keep large sweeps affordable:

* **Orbit folding.**  The sample grid is invariant under the eight
  symmetries of the square, and so are the spectra when the stencil is.
  Only one frequency per orbit is evaluated; its eigenvalues carry the orbit
  size as multiplicity.
* **Hermitian reduction.**  For operators whose spectrum is real by theory
  (plain and fine-wrapped), ``G = B A`` with ``B`` Hermitian and ``A``
  positive definite away from ``theta = 0``.  With ``A = L L^H`` the matrix
  ``L^H B L`` is Hermitian and similar to ``G``, so a Hermitian eigensolver
  can replace the general one.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .linalg import eig, eigvals_hermitian
from .preconditioners import FrequencyState, PreconditionerSpec, SymbolFactory
from .stencil import Q1_LAPLACIAN, Stencil9

__all__ = [
    "REALITY_TOL",
    "GENERAL_EIG_MAX_DIM",
    "SweepError",
    "ComplexSpectrumError",
    "InvalidModeError",
    "SamplingPlan",
    "SpectrumReport",
    "Histogram",
    "sweep",
    "sweep_many",
    "sample_frequencies",
    "default_threads",
    "frequency_eigenvalues",
    "frequency_eigenvalue_family",
    "hermitian_reduction",
    "histogram",
    "upsilon",
    "fit_constant",
]

# Relative size of imaginary parts tolerated in a real-mode report.
REALITY_TOL = 1e-8
# "auto" uses the general eigensolver up to this dimension.
GENERAL_EIG_MAX_DIM = 255
# Tolerance on negative eigenvalues of L^H B L - I (zero in exact arithmetic).
_PSD_TOL = 1e-8


class SweepError(RuntimeError):
    """A per-frequency failure; ``theta`` holds the offending frequency."""

    def __init__(self, msg: str, theta=None):
        super().__init__(msg if theta is None else f"{msg} (theta={tuple(theta)})")
        self.theta = None if theta is None else tuple(theta)


class ComplexSpectrumError(SweepError):
    """Imaginary parts above tolerance in a real-mode computation."""


class InvalidModeError(ValueError):
    """Operation not defined for the report's mode."""


# ------------------------------------------------------------------ sampling
@dataclass(frozen=True)
class SamplingPlan:
    """``2n`` offset nodes per axis, ``theta_k = -pi + (k + 1/2) pi / n``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"sampling half-resolution n must be a positive integer, got {self.n!r}")

    @property
    def dtheta(self) -> float:
        return math.pi / self.n

    @property
    def nodes(self) -> np.ndarray:
        return -math.pi + (np.arange(2 * self.n) + 0.5) * self.dtheta

    @property
    def size(self) -> int:
        return (2 * self.n) ** 2

    def frequencies(self) -> np.ndarray:
        """All ``(2n)**2`` frequency pairs, first component fastest."""
        t = self.nodes
        g1, g2 = np.meshgrid(t, t, indexing="xy")
        return np.column_stack([g1.ravel(), g2.ravel()])

    def orbits(self) -> List[Tuple[Tuple[int, int], int]]:
        """Orbit representatives ``(k1, k2)`` and orbit sizes under the square group.

        Node ``k`` maps to ``2n - 1 - k`` under negation, so the grid is
        closed under the group.  Representatives satisfy
        ``n <= k1 <= k2`` (both components positive, sorted).
        """
        m = 2 * self.n
        seen = {}
        for k2 in range(m):
            for k1 in range(m):
                rep = _orbit_rep(k1, k2, m)
                seen[rep] = seen.get(rep, 0) + 1
        return sorted(seen.items())

    def orbit_of(self, k1: int, k2: int) -> List[Tuple[int, int]]:
        return sorted(_orbit(k1, k2, 2 * self.n))


def _orbit(k1, k2, m):
    out = set()
    for a, b in ((k1, k2), (k2, k1)):
        for sa in (False, True):
            for sb in (False, True):
                out.add((m - 1 - a if sa else a, m - 1 - b if sb else b))
    return out


def _orbit_rep(k1, k2, m):
    a = max(k1, m - 1 - k1)
    b = max(k2, m - 1 - k2)
    return (min(a, b), max(a, b))


# --------------------------------------------------------- per-frequency eig
def hermitian_reduction(b: np.ndarray, a: np.ndarray):
    """Return ``(C, L)`` with ``A = L L^H`` and ``C = L^H B L`` Hermitian.

    Raises ``numpy.linalg.LinAlgError`` when ``A`` is not positive definite.
    """
    low = scipy.linalg.cholesky(a, lower=True, check_finite=False)
    c = low.conj().T @ b @ low
    return 0.5 * (c + c.conj().T), low


def _fine_wrap_pair(b: np.ndarray, a: np.ndarray, d: float):
    """Hermitian pair ``(X, Y)`` with ``eig(G + w D^{-1} A (I - G)) = 1 + eig(X - w Y)``.

    ``X = L^H B L - I`` is positive semidefinite for BDDC-type ``B``; with
    ``F = X^{1/2}`` the wrapped operator is similar to
    ``I + F (I - w L^H L / d) F``.
    """
    c, low = hermitian_reduction(b, a)
    x = c - np.eye(c.shape[0])
    w, q = scipy.linalg.eigh(x, check_finite=False)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w.min() < -_PSD_TOL * scale:
        raise np.linalg.LinAlgError(f"L^H B L - I is indefinite (min eigenvalue {w.min():.3e})")
    f = (q * np.sqrt(np.clip(w, 0.0, None))) @ q.conj().T
    lf = low @ f
    y = lf.conj().T @ lf / d
    return x, 0.5 * (y + y.conj().T)


def _pick_method(method: str, spec: PreconditionerSpec, dim: int) -> str:
    if method not in ("auto", "general", "hermitian"):
        raise ValueError(f"unknown eigen method {method!r}")
    if method == "auto":
        return "hermitian" if (spec.real_spectrum and dim > GENERAL_EIG_MAX_DIM) else "general"
    if method == "hermitian" and not spec.real_spectrum:
        raise ValueError(f"Hermitian reduction does not apply to mode {spec.mult!r}")
    return method


def frequency_eigenvalues(state: FrequencyState, spec: PreconditionerSpec,
                          method: str = "auto") -> np.ndarray:
    """Eigenvalues of the operator symbol of ``spec`` at one frequency.

    The Hermitian route falls back to the general solver if ``A`` is not
    positive definite (only possible at ``theta = 0``).
    """
    method = _pick_method(method, spec, state.factory.dim)
    if method == "hermitian":
        try:
            b = state.preconditioner(spec)
            if spec.mult == "none":
                c, _ = hermitian_reduction(b, state.A)
                return eigvals_hermitian(c).astype(complex)
            x, y = _fine_wrap_pair(b, state.A, state.factory.d)
            return (1.0 + eigvals_hermitian(x - spec.omega * y)).astype(complex)
        except np.linalg.LinAlgError:
            pass
    return eig(state.operator(spec)).eigenvalues


def frequency_eigenvalue_family(state: FrequencyState, spec: PreconditionerSpec, field: str,
                                values: Sequence[float], method: str = "auto"):
    """Eigenvalues for ``spec`` with weight ``field`` running through ``values``.

    Returns a list of arrays in the order of ``values``.
    """
    method = _pick_method(method, spec, state.factory.dim)
    if method == "hermitian" and spec.mult == "f" and field == "omega":
        try:
            x, y = _fine_wrap_pair(state.preconditioner(spec), state.A, state.factory.d)
            return [(1.0 + eigvals_hermitian(x - float(v) * y)).astype(complex) for v in values]
        except np.linalg.LinAlgError:
            pass
    return [eig(g).eigenvalues for _, g in state.operator_family(spec, field, values)]


# -------------------------------------------------------------------- report
@dataclass
class SpectrumReport:
    """Eigenvalues of a sweep and their extreme-value summaries.

    ``eigenvalues[k]`` belongs to frequency ``thetas[k]`` and stands for
    ``multiplicity[k]`` frequencies (its orbit under the square group, or 1
    when folding is off).
    """

    spec: PreconditionerSpec
    p: int
    n: int
    thetas: np.ndarray
    multiplicity: np.ndarray
    eigenvalues: np.ndarray
    mode: str
    method: str
    folded: bool
    runtime: float = 0.0
    lam_min: float = field(init=False)
    lam_max: float = field(init=False)
    abs_min: float = field(init=False)
    abs_max: float = field(init=False)
    max_imag: float = field(init=False)

    def __post_init__(self):
        ev = self.eigenvalues
        self.lam_min = float(ev.real.min())
        self.lam_max = float(ev.real.max())
        mag = np.abs(ev)
        self.abs_min = float(mag.min())
        self.abs_max = float(mag.max())
        self.max_imag = float(np.abs(ev.imag).max())

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[1]

    @property
    def count(self) -> int:
        """Total number of eigenvalues over all ``(2n)**2`` frequencies."""
        return int(self.multiplicity.sum()) * self.dim

    @property
    def imag_ratio(self) -> float:
        return self.max_imag / self.abs_max if self.abs_max > 0 else 0.0

    @property
    def kappa(self) -> float:
        """``lam_max / lam_min`` in real mode, ``max|lam| / min|lam|`` otherwise."""
        if self.mode == "real":
            return self.lam_max / self.lam_min if self.lam_min > 0 else math.inf
        return self.abs_max / self.abs_min if self.abs_min > 0 else math.inf

    @property
    def ratio(self) -> float:
        return self.kappa

    def all_eigenvalues(self) -> np.ndarray:
        """Flat array with every eigenvalue repeated by its multiplicity."""
        return np.repeat(self.eigenvalues, self.multiplicity, axis=0).ravel()

    def per_frequency_extremes(self) -> np.ndarray:
        """Rows ``(theta1, theta2, multiplicity, min Re, max Re, min |lam|, max |lam|)``."""
        ev = self.eigenvalues
        return np.column_stack([
            self.thetas, self.multiplicity, ev.real.min(axis=1), ev.real.max(axis=1),
            np.abs(ev).min(axis=1), np.abs(ev).max(axis=1),
        ])


# --------------------------------------------------------------------- sweep
_WORKER = {}


def _worker_init(stencil, p, levels):
    _WORKER["factory"] = SymbolFactory(stencil, p, levels)


def _worker_eval(args):
    return _evaluate(_WORKER["factory"], *args)


def _evaluate(factory, theta, specs, methods):
    try:
        state = factory.at(theta)
        return [frequency_eigenvalues(state, sp, m) for sp, m in zip(specs, methods)]
    except SweepError:
        raise
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        raise SweepError(f"symbol evaluation failed: {exc}", theta) from exc


def default_threads() -> int:
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0))
    return os.cpu_count() or 1


def parallel_map(factory: SymbolFactory, items: list, threads: Optional[int]) -> list:
    """``_evaluate`` over ``items`` in order, in-process or across worker processes."""
    if threads is None:
        threads = default_threads()
    if threads <= 1 or len(items) <= 1:
        return [_evaluate(factory, *it) for it in items]
    args = (factory.stencil, factory.p, factory.levels)
    with ProcessPoolExecutor(max_workers=threads, initializer=_worker_init, initargs=args) as pool:
        chunk = max(1, len(items) // (4 * threads))
        return list(pool.map(_worker_eval, items, chunksize=chunk))


def sample_frequencies(plan: SamplingPlan, fold: bool):
    """Frequencies to evaluate and how many grid points each one stands for."""
    if fold:
        nodes = plan.nodes
        orbits = plan.orbits()
        thetas = np.array([(nodes[k1], nodes[k2]) for (k1, k2), _ in orbits])
        return thetas, np.array([c for _, c in orbits], dtype=int)
    thetas = plan.frequencies()
    return thetas, np.ones(len(thetas), dtype=int)


def _resolve_fold(s: Stencil9, fold: Optional[bool]) -> bool:
    if fold is None:
        return s.is_d4_symmetric()
    if fold and not s.is_d4_symmetric():
        raise ValueError("orbit folding requires a stencil invariant under the square group")
    return bool(fold)


def sweep_many(specs: Sequence[PreconditionerSpec], s: Stencil9 = Q1_LAPLACIAN, p: int = 4,
               plan: SamplingPlan = SamplingPlan(8), *, method: str = "auto",
               fold: Optional[bool] = None, threads: Optional[int] = 1,
               strict: bool = True) -> List[SpectrumReport]:
    """:func:`sweep` for several specs sharing one cell; frequency data is built once."""
    specs = list(specs)
    if not specs:
        raise ValueError("no specs to sweep")
    levels = {sp.levels for sp in specs}
    if len(levels) != 1:
        raise ValueError("specs mix two- and three-level operators")
    t0 = time.perf_counter()
    factory = SymbolFactory(s, p, levels.pop())
    fold = _resolve_fold(s, fold)
    thetas, mult = sample_frequencies(plan, fold)
    methods = [_pick_method(method, sp, factory.dim) for sp in specs]
    items = [(tuple(t), specs, methods) for t in thetas]
    results = parallel_map(factory, items, threads)
    elapsed = (time.perf_counter() - t0) / len(specs)
    reports = []
    for k, (sp, m) in enumerate(zip(specs, methods)):
        ev = np.array([r[k] for r in results])
        mode = "real" if sp.real_spectrum else "complex"
        if mode == "real" and strict:
            worst = np.abs(ev.imag).max(axis=1)
            idx = int(np.argmax(worst))
            if worst[idx] > REALITY_TOL * np.abs(ev).max():
                raise ComplexSpectrumError(
                    f"imaginary part {worst[idx]:.3e} exceeds {REALITY_TOL:g} * max|lam| "
                    f"for {sp.label}", thetas[idx])
        reports.append(SpectrumReport(spec=sp, p=p, n=plan.n, thetas=thetas, multiplicity=mult,
                                      eigenvalues=ev, mode=mode, method=m, folded=fold,
                                      runtime=elapsed))
    return reports


def sweep(spec: PreconditionerSpec, s: Stencil9 = Q1_LAPLACIAN, p: int = 4,
          plan: SamplingPlan = SamplingPlan(8), *, method: str = "auto",
          fold: Optional[bool] = None, threads: Optional[int] = 1,
          strict: bool = True) -> SpectrumReport:
    """Evaluate ``spec`` over all sample frequencies.

    Parameters
    ----------
    spec : PreconditionerSpec
        Operator to analyse; ``spec.j == 0`` selects the two-level cell.
    s : Stencil9
        Fine stencil.
    p : int
        Subdomain width.
    plan : SamplingPlan
        Frequency sample.
    method : {"auto", "general", "hermitian"}
        Eigensolver route (see module docstring).
    fold : bool, optional
        Use orbit folding; defaults to ``True`` for square-symmetric stencils.
    threads : int, optional
        Worker processes; ``None`` uses all available cores.  Results do not
        depend on this value.
    strict : bool
        In real mode, raise :class:`ComplexSpectrumError` if an imaginary part
        exceeds ``REALITY_TOL * max|lam|``.
    """
    return sweep_many([spec], s, p, plan, method=method, fold=fold, threads=threads,
                      strict=strict)[0]


# ----------------------------------------------------------------- histogram
@dataclass(frozen=True)
class Histogram:
    """Fixed-width bins; ``density = count / bin_width``."""

    edges: np.ndarray
    counts: np.ndarray
    bin_width: float

    @property
    def densities(self) -> np.ndarray:
        return self.counts / self.bin_width

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count_in(self, lo: float, hi: float) -> int:
        """Total count of the bins lying inside ``[lo, hi)``."""
        w = self.bin_width
        i0 = int(round(lo / w)) - int(round(self.edges[0] / w))
        i1 = int(round(hi / w)) - int(round(self.edges[0] / w))
        return int(self.counts[max(i0, 0):max(i1, 0)].sum())


def histogram(report, bin_width: float = 0.1) -> Histogram:
    """Bin the real eigenvalues of ``report`` into bins aligned at multiples of ``bin_width``.

    Bins start at 0 (or lower if an eigenvalue is negative) and end at the
    first multiple of ``bin_width`` above ``lam_max``.  ``report`` may also
    be a plain array of real values.
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    if isinstance(report, SpectrumReport):
        if report.mode != "real":
            raise InvalidModeError("histograms need a real-mode report")
        vals = report.eigenvalues.real
        weights = np.repeat(report.multiplicity[:, None], vals.shape[1], axis=1)
        vals, weights = vals.ravel(), weights.ravel()
    else:
        vals = np.asarray(report)
        if np.iscomplexobj(vals):
            if np.abs(vals.imag).max(initial=0.0) > REALITY_TOL * max(np.abs(vals).max(initial=0.0), 1.0):
                raise InvalidModeError("histograms need real values")
            vals = vals.real
        vals = vals.ravel().astype(float)
        weights = np.ones_like(vals, dtype=int)
    if vals.size == 0:
        raise ValueError("nothing to bin")
    # A tiny relative guard keeps values like 0.9999999999 in the bin of 1.0.
    idx = np.floor(vals / bin_width + 1e-9).astype(np.int64)
    lo = min(0, int(idx.min()))
    hi = int(idx.max()) + 1
    counts = np.bincount(idx - lo, weights=weights, minlength=hi - lo).astype(np.int64)
    edges = (np.arange(lo, hi + 1)) * bin_width
    return Histogram(edges=edges, counts=counts, bin_width=float(bin_width))


# ---------------------------------------------------------------- constants
def upsilon(i: int, p: float) -> float:
    """Growth factor of variant ``i``: ``p (1 + ln p)`` or ``(1 + ln p)**2``."""
    lg = 1.0 + math.log(p)
    if i == 1:
        return p * lg
    if i == 2:
        return lg * lg
    raise ValueError(f"unknown bound index {i!r}")


_BOUND_NAMES = {
    "Y1": (1,), "Y2": (2,), "Y1Y1": (1, 1), "Y1Y2": (1, 2), "Y2Y1": (2, 1), "Y2Y2": (2, 2),
}


def _parse_bound(bound) -> tuple:
    if isinstance(bound, (int, np.integer)):
        return (int(bound),)
    if isinstance(bound, tuple):
        return tuple(int(b) for b in bound)
    if isinstance(bound, str):
        key = bound.replace("Υ", "Y").replace("*", "").replace("_", "").replace(" ", "")
        if key in _BOUND_NAMES:
            return _BOUND_NAMES[key]
    raise ValueError(f"unknown bound {bound!r}; expected one of {sorted(_BOUND_NAMES)}")


def fit_constant(report, p: float, bound) -> float:
    """``kappa`` divided by the named bound evaluated at ``H/h = p``.

    ``report`` is a :class:`SpectrumReport` or a bare condition number;
    ``bound`` is ``"Y1"``, ``"Y2"`` or a product such as ``"Y1*Y2"``.
    """
    kappa = report.kappa if isinstance(report, SpectrumReport) else float(report)
    parts = _parse_bound(bound)
    if not parts or any(b not in (1, 2) for b in parts) or len(parts) > 2:
        raise ValueError(f"unknown bound {bound!r}")
    return kappa / math.prod(upsilon(b, p) for b in parts)
