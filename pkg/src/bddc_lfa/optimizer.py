"""Grid search over relaxation weights.

Every grid point is a full frequency sweep; the sweeps share per-frequency
work (the unwrapped operator is built once per frequency and fine-level
weights enter linearly).  Objectives are ``kappa`` for real-spectrum
variants and ``max|lam| / min|lam|`` otherwise.  A real-mode weight whose
smallest eigenvalue is not positive is recorded with objective ``inf``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .preconditioners import PreconditionerSpec, SymbolFactory
from .spectrum import (
    REALITY_TOL,
    SamplingPlan,
    _pick_method,
    _resolve_fold,
    frequency_eigenvalue_family,
    sample_frequencies,
)
from .stencil import Q1_LAPLACIAN, Stencil9

__all__ = [
    "SweepGrid",
    "OptimizationResult",
    "OptimizationError",
    "WeightStats",
    "evaluate_weights",
    "optimize_1d",
    "optimize_2d",
    "grid_argmin",
]


class OptimizationError(RuntimeError):
    """Raised when no grid point produced a usable objective."""


@dataclass(frozen=True)
class SweepGrid:
    """Inclusive grid ``w_min, w_min + step, ..., w_max``."""

    w_min: float = 0.1
    w_max: float = 3.0
    step: float = 0.1

    def __post_init__(self):
        for name in ("w_min", "w_max", "step"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"grid {name} must be finite, got {v!r}")
        if self.w_min <= 0:
            raise ValueError(f"grid minimum must be positive, got {self.w_min}")
        if self.step <= 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if self.w_max < self.w_min:
            raise ValueError(f"grid maximum {self.w_max} is below minimum {self.w_min}")

    @property
    def values(self) -> np.ndarray:
        k = int(math.floor((self.w_max - self.w_min) / self.step + 1e-9))
        return np.round(self.w_min + self.step * np.arange(k + 1), 10)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def fixed(cls, value: float) -> "SweepGrid":
        return cls(value, value, 1.0)

    @classmethod
    def parse(cls, text: str) -> "SweepGrid":
        """``"lo:hi:step"``, ``"lo:hi"`` (step 0.1) or a single value."""
        parts = [float(x) for x in str(text).split(":")]
        if len(parts) == 1:
            return cls.fixed(parts[0])
        if len(parts) == 2:
            return cls(parts[0], parts[1])
        if len(parts) == 3:
            return cls(*parts)
        raise ValueError(f"cannot parse grid {text!r}; expected lo:hi[:step]")


DEFAULT_GRID = SweepGrid()
DEFAULT_GRID_2D = (SweepGrid(0.5, 5.0, 0.1), SweepGrid(0.1, 3.0, 0.1))


@dataclass
class WeightStats:
    """Spectral extremes of one weight setting, reduced over all frequencies."""

    lam_min: float = math.inf
    lam_max: float = -math.inf
    abs_min: float = math.inf
    abs_max: float = 0.0
    max_imag: float = 0.0

    def update(self, ev: np.ndarray):
        self.lam_min = min(self.lam_min, float(ev.real.min()))
        self.lam_max = max(self.lam_max, float(ev.real.max()))
        mag = np.abs(ev)
        self.abs_min = min(self.abs_min, float(mag.min()))
        self.abs_max = max(self.abs_max, float(mag.max()))
        self.max_imag = max(self.max_imag, float(np.abs(ev.imag).max()))

    def objective(self, real_mode: bool) -> float:
        if real_mode:
            return self.lam_max / self.lam_min if self.lam_min > 0 else math.inf
        return self.abs_max / self.abs_min if self.abs_min > 0 else math.inf


@dataclass
class OptimizationResult:
    """Best weights on a grid together with every sampled objective.

    ``objectives`` has one entry per grid point (1-D) or shape
    ``(len(axis1), len(axis2))`` (2-D); ``max_imag`` matches it.
    """

    spec: PreconditionerSpec
    fields: tuple
    axes: tuple
    objectives: np.ndarray
    max_imag: np.ndarray
    lam_min: np.ndarray
    best_weights: tuple
    best_objective: float
    p: int = 0
    n: int = 0
    runtime: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def best_spec(self) -> PreconditionerSpec:
        return replace(self.spec, **dict(zip(self.fields, self.best_weights)))

    def curve(self) -> np.ndarray:
        """Rows ``(w, objective, max_imag)`` of a 1-D search."""
        if len(self.axes) != 1:
            raise ValueError("curve() is for one-dimensional searches")
        return np.column_stack([self.axes[0], self.objectives, self.max_imag])

    def surface(self) -> np.ndarray:
        """Rows ``(w1, w2, objective, max_imag)``, first axis outer."""
        if len(self.axes) != 2:
            raise ValueError("surface() is for two-dimensional searches")
        g1, g2 = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel(), self.objectives.ravel(),
                                self.max_imag.ravel()])


def grid_argmin(objectives: np.ndarray) -> tuple:
    """Index of the smallest finite objective; the first in C order wins ties.

    Grid axes are ascending, so ties resolve toward smaller weights (the
    first axis taking precedence).
    """
    obj = np.asarray(objectives, dtype=float)
    finite = np.isfinite(obj)
    if not finite.any():
        raise OptimizationError("no grid point produced a finite objective")
    flat = np.where(finite, obj, np.inf).ravel()
    return np.unravel_index(int(np.argmin(flat)), obj.shape)


def _default_fields(spec: PreconditionerSpec, ndim: int) -> tuple:
    fields = spec.weight_fields
    if not fields:
        raise ValueError(f"{spec.label} has no weights to optimize")
    if ndim == 1:
        return (spec.tuned_field,)
    if len(fields) != 2:
        raise ValueError(f"mode {spec.mult!r} has a single weight; use optimize_1d")
    return fields


def evaluate_weights(spec: PreconditionerSpec, fields: Sequence[str], axes: Sequence[np.ndarray],
                     s: Stencil9 = Q1_LAPLACIAN, p: int = 4, plan: SamplingPlan = SamplingPlan(4),
                     *, method: str = "auto", fold: Optional[bool] = None,
                     progress: Optional[Callable[[int, int], None]] = None):
    """Reduce spectra over all frequencies for every grid point.

    Returns an object array of :class:`WeightStats` shaped like the grid, and
    the list of per-frequency failures as ``(theta, weights, message)``.
    """
    factory = SymbolFactory.for_spec(s, p, spec)
    fold = _resolve_fold(s, fold)
    thetas, _ = sample_frequencies(plan, fold)
    chosen = _pick_method(method, spec, factory.dim)
    shape = tuple(len(a) for a in axes)
    stats = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        stats[idx] = WeightStats()
    failed = np.zeros(shape, dtype=bool)
    failures = []
    inner = axes[-1]
    for k, theta in enumerate(thetas):
        state = factory.at(theta)
        for outer in np.ndindex(*shape[:-1]):
            fixed = {fields[d]: float(axes[d][outer[d]]) for d in range(len(outer))}
            base = replace(spec, **fixed, **{fields[-1]: float(inner[0])})
            try:
                family = frequency_eigenvalue_family(state, base, fields[-1], inner, chosen)
            except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
                failed[outer] = True
                failures.append((tuple(theta), fixed, str(exc)))
                continue
            for t, ev in enumerate(family):
                stats[outer + (t,)].update(ev)
        if progress is not None:
            progress(k + 1, len(thetas))
    for idx in zip(*np.nonzero(failed)):
        stats[idx] = None
    return stats, failures


def _optimize(spec, fields, axes, s, p, plan, method, fold, progress):
    t0 = time.perf_counter()
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    stats, failures = evaluate_weights(spec, fields, axes, s, p, plan, method=method, fold=fold,
                                       progress=progress)
    real_mode = spec.real_spectrum
    shape = stats.shape
    obj = np.full(shape, math.inf)
    imag = np.full(shape, math.nan)
    lmin = np.full(shape, math.nan)
    for idx in np.ndindex(*shape):
        st = stats[idx]
        if st is None:
            continue
        obj[idx] = st.objective(real_mode)
        imag[idx] = st.max_imag
        lmin[idx] = st.lam_min
        if real_mode and st.max_imag > REALITY_TOL * st.abs_max:
            failures.append((None, tuple(float(a[i]) for a, i in zip(axes, idx)),
                             f"imaginary part {st.max_imag:.3e} in a real-mode spectrum"))
            obj[idx] = math.inf
    try:
        best = grid_argmin(obj)
    except OptimizationError as exc:
        detail = "; ".join(f"theta={t} weights={w}: {m}" for t, w, m in failures[:5])
        raise OptimizationError(f"{exc}{': ' + detail if detail else ''}") from None
    weights = tuple(float(a[i]) for a, i in zip(axes, best))
    return OptimizationResult(spec=spec, fields=tuple(fields), axes=axes, objectives=obj,
                              max_imag=imag, lam_min=lmin, best_weights=weights,
                              best_objective=float(obj[best]), p=p, n=plan.n,
                              runtime=time.perf_counter() - t0, failures=failures)


def optimize_1d(spec: PreconditionerSpec, grid: SweepGrid = DEFAULT_GRID,
                s: Stencil9 = Q1_LAPLACIAN, p: int = 4, plan: SamplingPlan = SamplingPlan(8),
                *, field_name: Optional[str] = None, method: str = "auto",
                fold: Optional[bool] = None, progress=None) -> OptimizationResult:
    """Minimize the sweep objective over one weight.

    ``spec`` is a template: the tuned weight (``omega`` for ``f`` and ``c``,
    ``omega2`` for ``sc`` and ``fc``) is overwritten by each grid value and
    any other weight is held at its template value.
    """
    fields = (field_name,) if field_name else _default_fields(spec, 1)
    if fields[0] not in spec.weight_fields:
        raise ValueError(f"{spec.label} has no weight {fields[0]!r}")
    return _optimize(spec, fields, (grid.values,), s, p, plan, method, fold, progress)


def optimize_2d(spec: PreconditionerSpec, grids=DEFAULT_GRID_2D, s: Stencil9 = Q1_LAPLACIAN,
                p: int = 4, plan: SamplingPlan = SamplingPlan(4), *, method: str = "auto",
                fold: Optional[bool] = None, progress=None) -> OptimizationResult:
    """Minimize over ``(omega1, omega2)`` of an ``sc`` or ``fc`` template."""
    fields = _default_fields(spec, 2)
    g1, g2 = grids
    return _optimize(spec, fields, (g1.values, g2.values), s, p, plan, method, fold, progress)
