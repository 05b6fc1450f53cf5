import numpy as np
import pytest
import scipy.linalg

from bddc_lfa.oracle import (
    MAX_FINE_DOFS,
    ArnoldiBreakdownError,
    MeshSizeError,
    PeriodicMesh,
    arnoldi,
    assemble,
    deflation_basis,
    finite_fine_wrap_curve,
    finite_spectrum,
    lfa_union,
    multiset_distance,
    ritz_estimate,
    spectra_match,
)
from bddc_lfa.preconditioners import PreconditionerSpec

G10 = PreconditionerSpec(1)
G20 = PreconditionerSpec(2)
F10 = PreconditionerSpec(1, 0, "f", omega=1.4)
F20 = PreconditionerSpec(2, 0, "f", omega=1.4)


@pytest.fixture(scope="module")
def sys44():
    return assemble(4, 4)


@pytest.fixture(scope="module")
def sys22():
    return assemble(2, 2)


# --------------------------------------------------------------- assembly
def test_mesh_counts_and_cap():
    mesh = PeriodicMesh(4, 3)
    assert mesh.N == 12 and mesh.n_fine == 144
    assert mesh.n_broken == 9 * 22
    assert mesh.node(-1, 12) == 11
    with pytest.raises(MeshSizeError):
        PeriodicMesh(32, 4)
    assert MAX_FINE_DOFS == 10_000
    for bad in ((1, 2), (2, 1), (2.5, 2)):
        with pytest.raises(ValueError):
            PeriodicMesh(*bad)


def test_assembled_operator_basics(sys44):
    a = sys44.A.toarray()
    assert np.allclose(a, a.T)
    assert np.allclose(a @ np.ones(a.shape[0]), 0.0)
    assert np.allclose(sys44.D, 8 / 3)
    ev = np.linalg.eigvalsh(a)
    assert abs(ev[0]) < 1e-12 and ev[1] > 1e-3


def test_restriction_partition_of_unity(sys44):
    r1 = sys44.R1.toarray()
    assert np.allclose(r1.sum(axis=0), 1.0)
    r2 = sys44.R2.toarray()
    assert np.allclose(r2.sum(axis=0), 1.0)


def test_unweighted_injection_reassembles_A(sys44):
    inj = sys44.R1.toarray().copy()
    inj[inj != 0] = 1.0
    a_hat = sys44.A_hat.toarray()
    assert np.allclose(inj.T @ a_hat @ inj, sys44.A.toarray())
    # only the constant mode is singular once primal dofs are assembled
    ev = np.linalg.eigvalsh(a_hat)
    assert abs(ev[0]) < 1e-12 and ev[1] > 1e-6


def test_deflation_basis():
    v = deflation_basis(7)
    assert v.shape == (7, 6)
    assert np.allclose(v.T @ v, np.eye(6))
    assert np.allclose(v.T @ np.ones(7), 0.0)


# --------------------------------------------------- independent dense route
@pytest.mark.parametrize("spec", [G10, G20], ids=["i1", "i2"])
def test_preconditioner_by_pseudo_inverse(sys44, spec):
    r = (sys44.R1 if spec.i == 1 else sys44.R2).toarray()
    b = r.T @ np.linalg.pinv(sys44.A_hat.toarray(), rcond=1e-10, hermitian=True) @ r
    g = b @ sys44.A.toarray()
    v = deflation_basis(g.shape[0])
    ref = np.sort(np.linalg.eigvals(v.T @ g @ v).real)
    assert np.allclose(np.sort(finite_spectrum(sys44, spec).real), ref, atol=1e-9)
    assert ref[0] >= 1 - 1e-8


def test_matrix_free_equals_dense(sys44):
    rng = np.random.default_rng(2)
    x = rng.standard_normal(sys44.mesh.n_fine)
    for spec in (G10, F20):
        assert np.allclose(sys44.apply(spec)(x), sys44.operator(spec) @ x, atol=1e-10)


# ------------------------------------------------------------ LFA vs finite
@pytest.mark.parametrize("p,m", [(2, 2), (2, 4), (4, 2), (4, 4)])
@pytest.mark.parametrize("spec", [G10, G20, F10, F20], ids=["G10", "G20", "F10", "F20"])
def test_spectra_match_two_level(p, m, spec):
    rep = spectra_match(assemble(p, m), spec)
    assert rep.finite.size == (p * m) ** 2 - 1
    assert rep.max_deviation < 1e-8
    assert rep.kappa_rel_diff < 1e-8


def test_spectra_match_three_level():
    rep = spectra_match(assemble(2, 4), PreconditionerSpec(1, 1))
    assert rep.max_deviation < 1e-6


def test_spectra_match_argument_checks(sys22):
    with pytest.raises(ValueError):
        spectra_match(sys22, G10, lfa_p=4)
    with pytest.raises(ValueError):
        spectra_match(sys22, G10, lfa=np.ones(3))
    with pytest.raises(ValueError):
        lfa_union(PreconditionerSpec(1, 1), 4, 6)


def test_multiset_distance():
    a = np.array([1.0, 2.0, 3.0], dtype=complex)
    assert multiset_distance(a, a[::-1]) == 0.0
    b = np.array([1 + 1j, 1 - 1j, 2.0])
    assert multiset_distance(b, b[[1, 2, 0]]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        multiset_distance(a, a[:2])


@pytest.mark.parametrize("spec", [G10, G20, F10, PreconditionerSpec(2, 0, "f", omega=0.7)],
                         ids=["G10", "G20", "F10", "F20"])
def test_finite_eigenvalues_at_least_one(sys44, spec):
    ev = finite_spectrum(sys44, spec)
    assert np.abs(ev.imag).max() < 1e-8
    if spec.mult == "none":
        assert ev.real.min() >= 1 - 1e-8


def test_fine_wrap_curve_two_routes(sys44):
    omegas = [0.0, 0.7, 1.4, 2.2]
    curve = finite_fine_wrap_curve(sys44, PreconditionerSpec(1), omegas)
    for w, (lo, hi) in zip(omegas, curve):
        spec = PreconditionerSpec(1, 0, "f", omega=w) if w else G10
        ev = finite_spectrum(sys44, spec).real
        assert lo == pytest.approx(ev.min(), abs=1e-9)
        assert hi == pytest.approx(ev.max(), abs=1e-9)
    with pytest.raises(ValueError):
        finite_fine_wrap_curve(sys44, PreconditionerSpec(1, 1), omegas)


# ----------------------------------------------------------------- Arnoldi
def test_arnoldi_diagonal_toy():
    d = np.diag([1.0, 2.0, 3.0])
    res = arnoldi(lambda v: d @ v, np.ones(3), max_iter=10)
    assert res.converged and res.iterations == 3
    assert np.allclose(np.sort(res.ritz.real), [1, 2, 3])
    with pytest.raises(ArnoldiBreakdownError):
        arnoldi(lambda v: v, np.zeros(3))
    with pytest.raises(ArnoldiBreakdownError):
        arnoldi(lambda v: v * np.nan, np.ones(3))


def test_arnoldi_hessenberg_relation():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((30, 30))
    res = arnoldi(lambda v: m @ v, rng.standard_normal(30), max_iter=8)
    h = res.hessenberg
    assert h.shape == (9, 8)
    assert np.allclose(np.tril(h, -2), 0.0)
    assert np.allclose(res.ritz, scipy.linalg.eigvals(h[:8, :8]))


def test_ritz_deterministic_and_close_to_dense():
    sys = assemble(4, 8)
    a = ritz_estimate(sys, G10, seed=3)
    b = ritz_estimate(sys, G10, seed=3)
    assert np.array_equal(a.arnoldi.hessenberg, b.arnoldi.hessenberg)
    dense = finite_spectrum(sys, G10).real
    kappa = dense.max() / dense.min()
    for seed in range(4):
        est = ritz_estimate(sys, G10, seed=seed)
        assert est.kappa == pytest.approx(kappa, rel=0.02)
        assert est.lam_min >= 1 - 1e-5
