"""Symbols of BDDC-preconditioned operators at one frequency.

Two-level operators live on one ``p x p`` subdomain (symbols of size
``p**2``).  Three-level operators live on a ``p x p`` array of subdomains
(size ``p**4``) whose coarse Schur problem is itself preconditioned by a
two-level method built on the condensed (Schur) stencil.

All preconditioners share one block formula on the broken space::

    Ahat^{-1} ~ blkdiag(A_rr^{-1}, 0) + Z B Z^H,   Z = [-A_rr^{-1} A_Pr^H; I]

where ``B`` is the exact Schur inverse (two-level), the coarse-level
preconditioner (three-level), or a relaxed version of it (coarse
multiplicative variants).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterator, Optional, Sequence

import numpy as np

from .stencil import Q1_LAPLACIAN, Stencil9
from .subassembly import CellLayout, LevelSymbols, SchurStencilCoeffs, schur_stencil

__all__ = [
    "MULT_MODES",
    "COARSE_WEIGHT",
    "PreconditionerSpec",
    "OperatorSymbol",
    "SymbolFactory",
    "FrequencyState",
    "CoarseParts",
    "coarse_wrap",
    "two_level_symbol",
    "three_level_symbol",
    "coarse_preconditioner_symbol",
    "coarse_parts",
    "multiplicative_fine",
    "multiplicative_coarse",
    "multiplicative_fine_and_coarse",
]

MULT_MODES = ("none", "f", "c", "sc", "fc")
_MODE_ALIASES = {
    "fine": "f",
    "coarse": "c",
    "sym-coarse": "sc",
    "fine+coarse": "fc",
}
# Pre-weight of the two-sweep coarse variants when only the second weight is tuned.
COARSE_WEIGHT = 4.0


@dataclass(frozen=True)
class PreconditionerSpec:
    """Which preconditioned operator to analyse.

    Parameters
    ----------
    i : {1, 2}
        Fine-level variant: 1 is the lumped (scaled injection) form, 2 adds
        the discrete harmonic extension of interface jumps.
    j : {0, 1, 2}
        Coarse solve: 0 is exact (two-level method), 1 and 2 apply the
        corresponding two-level preconditioner to the coarse Schur problem.
    mult : {"none", "f", "c", "sc", "fc"}
        Multiplicative Jacobi-type wrap: on the fine level (``f``), on the
        coarse level (``c``), symmetrized on the coarse level (``sc``), or on
        both levels (``fc``).
    omega : float, optional
        The single weight of ``f`` and ``c``.
    omega1, omega2 : float, optional
        Weights of ``sc`` (pre- and post-sweep) and ``fc`` (coarse and fine
        weight).
    """

    i: int
    j: int = 0
    mult: str = "none"
    omega: Optional[float] = None
    omega1: Optional[float] = None
    omega2: Optional[float] = None

    def __post_init__(self):
        mult = _MODE_ALIASES.get(self.mult, self.mult)
        object.__setattr__(self, "mult", mult)
        if self.i not in (1, 2):
            raise ValueError(f"fine variant i must be 1 or 2, got {self.i!r}")
        if self.j not in (0, 1, 2):
            raise ValueError(f"coarse variant j must be 0, 1 or 2, got {self.j!r}")
        if mult not in MULT_MODES:
            raise ValueError(f"unknown multiplicative mode {self.mult!r}; expected one of {MULT_MODES}")
        if self.j == 0 and mult in ("c", "sc", "fc"):
            raise ValueError(f"mode {mult!r} wraps the coarse solve and needs j in {{1, 2}}")
        needed = {
            "none": (),
            "f": ("omega",),
            "c": ("omega",),
            "sc": ("omega1", "omega2"),
            "fc": ("omega1", "omega2"),
        }[mult]
        for name in ("omega", "omega1", "omega2"):
            value = getattr(self, name)
            if name in needed:
                if value is None:
                    raise ValueError(f"mode {mult!r} requires {name}")
                value = float(value)
                if not math.isfinite(value) or value <= 0.0:
                    raise ValueError(f"{name} must be a positive finite number, got {value!r}")
                object.__setattr__(self, name, value)
            elif value is not None:
                raise ValueError(f"mode {mult!r} does not take {name}")

    @property
    def levels(self) -> int:
        return 2 if self.j == 0 else 3

    @property
    def real_spectrum(self) -> bool:
        """Whether theory guarantees a real spectrum (plain and fine-wrapped)."""
        return self.mult in ("none", "f")

    @property
    def weight_fields(self) -> tuple:
        return {"none": (), "f": ("omega",), "c": ("omega",), "sc": ("omega1", "omega2"),
                "fc": ("omega1", "omega2")}[self.mult]

    @property
    def tuned_field(self) -> Optional[str]:
        """Weight tuned by a one-dimensional search (the last one applied)."""
        fields = self.weight_fields
        return fields[-1] if fields else None

    def weights(self) -> dict:
        return {f: getattr(self, f) for f in self.weight_fields}

    def with_weights(self, **weights) -> "PreconditionerSpec":
        return replace(self, **weights)

    @property
    def label(self) -> str:
        sup = "" if self.mult == "none" else "^" + self.mult
        w = ",".join(f"{k}={v:g}" for k, v in self.weights().items())
        return f"G_{{{self.i},{self.j}}}{sup}" + (f"({w})" if w else "")


@dataclass(frozen=True)
class OperatorSymbol:
    """A preconditioned operator symbol at one frequency."""

    theta: tuple
    G: np.ndarray
    spec: Optional[PreconditionerSpec]

    def __post_init__(self):
        g = np.asarray(self.G)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"operator symbol must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"operator symbol has non-finite entries at theta={self.theta}")

    @property
    def dim(self) -> int:
        return self.G.shape[0]


def coarse_wrap(minv: np.ndarray, s: np.ndarray, ds: float, mode: str,
                omega: float, omega2: Optional[float] = None) -> np.ndarray:
    """Relax an inexact coarse inverse by Jacobi-type sweeps on ``S``.

    ``mode="c"`` returns ``B`` with ``I - B S = (I - w/ds S)(I - M^{-1} S)``;
    ``mode="sc"`` appends a post-sweep with ``omega2``.  The formulas never
    assume ``B`` Hermitian.
    """
    eye = np.eye(s.shape[0])
    b = minv + (omega / ds) * (eye - s @ minv)
    if mode == "c":
        return b
    if mode == "sc":
        if omega2 is None:
            raise ValueError("mode 'sc' needs a second weight")
        return b + (omega2 / ds) * (eye - b @ s)
    raise ValueError(f"coarse wrap mode must be 'c' or 'sc', got {mode!r}")


class SymbolFactory:
    """Builds and caches the layouts needed for one (stencil, p, levels).

    Parameters
    ----------
    stencil : Stencil9
        Fine operator.
    p : int
        Subdomain width in elements.
    levels : {2, 3}
        Two-level cell (one subdomain) or three-level cell (``p x p``
        subdomains with a coarse level on the Schur stencil).
    """

    def __init__(self, stencil: Stencil9 = Q1_LAPLACIAN, p: int = 4, levels: int = 2):
        if levels not in (2, 3):
            raise ValueError(f"levels must be 2 or 3, got {levels!r}")
        if int(p) != p or p < 2:
            raise ValueError(f"subdomain width p must be an integer >= 2, got {p!r}")
        self.stencil = stencil
        self.p = int(p)
        self.levels = levels
        self.d = stencil.center
        self.fine = CellLayout(stencil, self.p, nsub=self.p if levels == 3 else 1)

    @classmethod
    def for_spec(cls, stencil: Stencil9, p: int, spec: PreconditionerSpec) -> "SymbolFactory":
        return cls(stencil, p, spec.levels)

    @cached_property
    def schur(self) -> SchurStencilCoeffs:
        return schur_stencil(self.stencil, self.p)

    @property
    def ds(self) -> float:
        return self.schur.center

    @cached_property
    def coarse(self) -> CellLayout:
        if self.levels != 3:
            raise ValueError("a two-level factory has no coarse layout")
        sc = self.schur
        return CellLayout(sc.stencil, self.p, element=sc.macro)

    @property
    def dim(self) -> int:
        return self.fine.n_fine

    def at(self, theta) -> "FrequencyState":
        return FrequencyState(self, theta)

    def check_spec(self, spec: PreconditionerSpec):
        if self.levels == 2 and spec.j != 0:
            raise ValueError(f"two-level factory cannot evaluate coarse variant j={spec.j}")


class FrequencyState:
    """Everything about one frequency, computed lazily and shared across specs."""

    def __init__(self, factory: SymbolFactory, theta):
        self.factory = factory
        self.theta = (float(theta[0]), float(theta[1]))
        self.fine: LevelSymbols = factory.fine.at(self.theta)
        self._minv = {}

    @cached_property
    def A(self) -> np.ndarray:
        return self.fine.A.toarray()

    @cached_property
    def coarse(self) -> LevelSymbols:
        return self.factory.coarse.at(self.theta)

    def split(self, i: int):
        """``(head, W)`` with ``R^H Ahat_approx^{-1} R = head + W B W^H``."""
        return self.fine.split(i)

    def coarse_minv(self, j: int) -> np.ndarray:
        """Inverse used for the Pi block before any coarse relaxation."""
        if j not in self._minv:
            if j == 0:
                self._minv[j] = self.fine.S_inv
            elif self.factory.levels != 3:
                raise ValueError("coarse variants j >= 1 need a three-level factory")
            else:
                self._minv[j] = self.coarse.preconditioner(j)
        return self._minv[j]

    def coarse_inverse(self, spec: PreconditionerSpec) -> np.ndarray:
        minv = self.coarse_minv(spec.j)
        if spec.mult == "c":
            return coarse_wrap(minv, self.fine.S, self.factory.ds, "c", spec.omega)
        if spec.mult == "sc":
            return coarse_wrap(minv, self.fine.S, self.factory.ds, "sc", spec.omega1, spec.omega2)
        if spec.mult == "fc":
            return coarse_wrap(minv, self.fine.S, self.factory.ds, "c", spec.omega1)
        return minv

    def preconditioner(self, spec: PreconditionerSpec) -> np.ndarray:
        """Fine-space symbol of the inverse preconditioner (no fine wrap)."""
        self.factory.check_spec(spec)
        head, w = self.split(spec.i)
        b = self.coarse_inverse(spec)
        return head + w @ b @ w.conj().T

    def fine_wrap_term(self, g: np.ndarray) -> np.ndarray:
        """``D^{-1} A (I - G)`` so that the fine wrap is ``G + omega * term``."""
        a = self.A
        return (a - a @ g) / self.factory.d

    def operator(self, spec: PreconditionerSpec) -> np.ndarray:
        g = self.preconditioner(spec) @ self.A
        if spec.mult == "f":
            g = g + spec.omega * self.fine_wrap_term(g)
        elif spec.mult == "fc":
            g = g + spec.omega2 * self.fine_wrap_term(g)
        return g

    def operator_family(self, spec: PreconditionerSpec, field: str,
                        values: Sequence[float]) -> Iterator[tuple]:
        """Yield ``(value, G)`` for ``spec`` with ``field`` set to each value.

        Fine-level weights enter linearly, so the unwrapped operator and the
        wrap term are computed once and reused.
        """
        fine_field = {"f": "omega", "fc": "omega2"}.get(spec.mult)
        if field == fine_field:
            base_spec = replace(spec, mult="none", omega=None) if spec.mult == "f" else \
                replace(spec, mult="c", omega=spec.omega1, omega1=None, omega2=None)
            g0 = self.operator(base_spec)
            term = self.fine_wrap_term(g0)
            for v in values:
                yield float(v), g0 + float(v) * term
        else:
            for v in values:
                yield float(v), self.operator(replace(spec, **{field: float(v)}))


# ------------------------------------------------------------ functional API
def two_level_symbol(s: Stencil9, p: int, theta, spec: PreconditionerSpec) -> OperatorSymbol:
    """Two-level operator ``G_{i,0}`` (with a fine wrap when ``spec.mult == "f"``)."""
    if spec.j != 0:
        raise ValueError(f"two-level symbol needs j = 0, got j = {spec.j}")
    state = SymbolFactory(s, p, 2).at(theta)
    return OperatorSymbol(state.theta, state.operator(spec), spec)


def three_level_symbol(s: Stencil9, p: int, theta, spec: PreconditionerSpec) -> OperatorSymbol:
    """Operator on a ``p x p`` subdomain array, size ``p**4``.

    ``spec.j == 0`` keeps the exact coarse solve; its spectrum is then the
    union of two-level spectra at the ``p**2`` harmonics of ``theta``.
    """
    state = SymbolFactory(s, p, 3).at(theta)
    return OperatorSymbol(state.theta, state.operator(spec), spec)


def coarse_preconditioner_symbol(schur: SchurStencilCoeffs, p: int, theta, j: int) -> np.ndarray:
    """``M_{s,j}^{-1} S`` for the coarse problem at ``theta`` (size ``p**2``).

    ``j = 0`` stands for the exact coarse solve and returns the identity.
    """
    if j not in (0, 1, 2):
        raise ValueError(f"coarse variant must be 0, 1 or 2, got {j!r}")
    if j == 0:
        return np.eye(p * p, dtype=complex)
    lev = CellLayout(schur.stencil, p, element=schur.macro).at(theta)
    return lev.preconditioner(j) @ lev.A.toarray()


@dataclass
class CoarseParts:
    """Pieces of a three-level operator that a coarse wrap acts on."""

    state: FrequencyState
    spec: PreconditionerSpec

    @property
    def minv(self) -> np.ndarray:
        return self.state.coarse_minv(self.spec.j)

    @property
    def S(self) -> np.ndarray:
        return self.state.fine.S

    @property
    def ds(self) -> float:
        return self.state.factory.ds


def coarse_parts(s: Stencil9, p: int, theta, spec: PreconditionerSpec) -> CoarseParts:
    if spec.j == 0:
        raise ValueError("coarse wraps need an inexact coarse solve (j in {1, 2})")
    base = replace(spec, mult="none", omega=None, omega1=None, omega2=None)
    return CoarseParts(SymbolFactory(s, p, 3).at(theta), base)


def multiplicative_fine(g: OperatorSymbol, a: np.ndarray, d: float, omega: float) -> OperatorSymbol:
    """``G + omega D^{-1} A (I - G)`` with ``D = d I``."""
    if omega == 0:
        return g
    if d == 0:
        raise ValueError("diagonal scaling must be nonzero")
    wrapped = g.G + (omega / d) * (a - a @ g.G)
    spec = g.spec
    if spec is not None:
        if spec.mult == "none":
            spec = replace(spec, mult="f", omega=omega)
        elif spec.mult == "c":
            spec = replace(spec, mult="fc", omega=None, omega1=spec.omega, omega2=omega)
        else:
            spec = None
    return OperatorSymbol(g.theta, wrapped, spec)


def multiplicative_coarse(parts: CoarseParts, weights, mode: str) -> OperatorSymbol:
    """Three-level operator with the coarse inverse relaxed by ``mode``.

    ``weights`` is a single ``omega`` for ``mode="c"`` and ``(omega1,
    omega2)`` for ``mode="sc"``.  A zero weight in mode ``c`` reproduces
    the unwrapped three-level operator.
    """
    st = parts.state
    if mode == "c":
        omega = float(weights if np.isscalar(weights) else weights[0])
        b = coarse_wrap(parts.minv, parts.S, parts.ds, "c", omega)
        spec = parts.spec if omega == 0 else replace(parts.spec, mult="c", omega=omega)
    elif mode == "sc":
        w1, w2 = (float(w) for w in weights)
        b = coarse_wrap(parts.minv, parts.S, parts.ds, "sc", w1, w2)
        spec = replace(parts.spec, mult="sc", omega1=w1, omega2=w2)
    else:
        raise ValueError(f"coarse wrap mode must be 'c' or 'sc', got {mode!r}")
    head, w = st.split(parts.spec.i)
    g = (head + w @ b @ w.conj().T) @ st.A
    return OperatorSymbol(st.theta, g, spec)


def multiplicative_fine_and_coarse(gc: OperatorSymbol, a: np.ndarray, d: float,
                                   omega2: float) -> OperatorSymbol:
    """Fine wrap applied on top of a coarse-wrapped operator."""
    if gc.spec is not None and gc.spec.mult != "c":
        raise ValueError(f"expected a coarse-wrapped operator, got mode {gc.spec.mult!r}")
    return multiplicative_fine(gc, a, d, omega2)
