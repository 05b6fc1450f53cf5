import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bddc_lfa.oracle import assemble
from bddc_lfa.stencil import Q1_LAPLACIAN, Stencil9, classical_symbol, fine_symbol
from bddc_lfa.subassembly import (
    COARSE,
    EDGE,
    INTERIOR,
    BrokenIndexMap,
    CellLayout,
    broken_blocks,
    coarse_couplings,
    factor_symbols,
    injection_symbol_R1,
    jump_and_harmonic_symbols,
    neumann_matrix,
    schur_stencil,
)

angles = st.floats(-np.pi, np.pi, allow_nan=False).filter(lambda t: abs(t) > 1e-3)

# Corner condensation of a 4x4 Q1 subdomain, from a broken-space torus
# elimination (see test_schur_matches_torus_elimination); frozen here.
SCHUR_P4 = dict(s1=0.293743, s2=0.132576, s3=0.107772, center=1.491695)


@pytest.mark.parametrize("p", [2, 3, 4, 8])
def test_broken_index_counts(p):
    m = BrokenIndexMap(p)
    assert len(m.dofs) == m.n_total == (p + 1) ** 2 - 3
    assert m.n_r == (p + 1) ** 2 - 4
    assert m.kinds.count(COARSE) == 1 and m.dofs[-1] == (0, 0)
    for (k, l), kind in zip(m.dofs, m.kinds):
        if kind == EDGE:
            assert k in (0, p) or l in (0, p)
        elif kind == INTERIOR:
            assert 0 < k < p and 0 < l < p
    assert len(m.indices(INTERIOR)) == (p - 1) ** 2
    assert len(m.indices(EDGE)) == 4 * (p - 1)


def test_neumann_matrix_row_sums_vanish():
    from bddc_lfa.stencil import element_matrix
    a = neumann_matrix(element_matrix(Q1_LAPLACIAN), 4)
    assert np.allclose(a.sum(axis=1), 0.0)
    assert np.allclose(a, a.T)


@given(st.integers(2, 5), angles, angles)
def test_assembled_symbol_equals_fine_symbol(p, t1, t2):
    lev = CellLayout(Q1_LAPLACIAN, p).at((t1, t2))
    assert np.allclose(lev.A.toarray(), fine_symbol(Q1_LAPLACIAN, p, (t1, t2)), atol=1e-12)


def test_coarse_self_coupling():
    # per subdomain, each corner sees only its own element: (2/3) I
    e = neumann_matrix(CellLayout(Q1_LAPLACIAN, 4).element, 4)
    corners = [0, 4, 20, 24]
    assert np.allclose(e[np.ix_(corners, corners)], 2 / 3 * np.eye(4))
    # four subdomains share the periodic coarse dof
    b = broken_blocks(Q1_LAPLACIAN, 4, (0.3, -0.4))
    assert b.A_PP.shape == (1, 1)
    assert b.A_PP[0, 0] == pytest.approx(8 / 3)


def test_coarse_couplings_twelve_per_corner():
    for p in (2, 4):
        c = coarse_couplings(Q1_LAPLACIAN, p)
        vals = sorted(round(abs(v), 12) for _, _, v in c)
        assert len(c) == 12
        assert vals == sorted([round(1 / 6, 12)] * 8 + [round(1 / 3, 12)] * 4)
    # at p = 4 the twelve couplings land on twelve distinct broken dofs
    b = broken_blocks(Q1_LAPLACIAN, 4, (np.pi / 2, np.pi / 2))
    mags = np.abs(b.A_Pr[0])
    nz = mags[mags > 1e-14]
    assert len(nz) == 12
    assert np.allclose(np.sort(nz), [1 / 6] * 8 + [1 / 3] * 4)
    # at p = 2 there are only five non-corner broken dofs to land on
    b2 = broken_blocks(Q1_LAPLACIAN, 2, (np.pi / 2, np.pi / 2))
    assert b2.A_Pr.shape == (1, 5)
    assert np.allclose(np.sort(np.abs(b2.A_Pr[0])), [np.sqrt(2) / 6] * 4 + [2 / 3])


@given(st.integers(2, 5), angles, angles)
def test_block_symbols_hermitian_and_factored(p, t1, t2):
    b = broken_blocks(Q1_LAPLACIAN, p, (t1, t2))
    ah = b.A_hat
    assert np.allclose(ah, ah.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(ah).min() > -1e-10
    k_ld, k_u = factor_symbols(b)
    assert np.allclose(k_ld @ k_u, ah, atol=1e-10)
    assert np.isclose(np.linalg.det(k_u), 1.0)
    s = b.A_PP - b.A_Pr @ np.linalg.solve(b.A_rr, b.A_Pr.conj().T)
    assert np.allclose(s, b.S_P, atol=1e-10)


def _corner_condensation(p):
    """Independent corner Schur complement of one Q1 subdomain."""
    n = p + 1
    e = np.array([[4, -1, -1, -2], [-1, 4, -2, -1], [-1, -2, 4, -1], [-2, -1, -1, 4]]) / 6.0
    a = np.zeros((n * n, n * n))
    for ey in range(p):
        for ex in range(p):
            idx = [ex + n * ey, ex + 1 + n * ey, ex + n * (ey + 1), ex + 1 + n * (ey + 1)]
            for i in range(4):
                for j in range(4):
                    a[idx[i], idx[j]] += e[i, j]
    c = [0, p, n * p, n * p + p]
    r = [i for i in range(n * n) if i not in c]
    return a[np.ix_(c, r)] @ np.linalg.solve(a[np.ix_(r, r)], a[np.ix_(r, c)])


@pytest.mark.parametrize("p", [2, 3, 4, 8])
def test_schur_stencil_coefficients(p):
    sc = schur_stencil(Q1_LAPLACIAN, p)
    s0 = _corner_condensation(p)
    assert sc.s1 == pytest.approx(s0[0, 0], abs=1e-10)
    assert sc.s2 == pytest.approx(s0[0, 1], abs=1e-10)
    assert sc.s3 == pytest.approx(s0[0, 3], abs=1e-10)
    assert 8 / 3 - 4 * sc.s1 - 8 * sc.s2 - 4 * sc.s3 == pytest.approx(0.0, abs=1e-12)
    assert sc.row_sum == pytest.approx(0.0, abs=1e-12)
    assert sc.center == pytest.approx(8 / 3 - 4 * sc.s1, abs=1e-12)
    st9 = sc.stencil.coeffs
    assert st9[0, 1] == pytest.approx(-2 * sc.s2, abs=1e-12)
    assert st9[0, 0] == pytest.approx(-sc.s3, abs=1e-12)


def test_schur_frozen_p4():
    sc = schur_stencil(Q1_LAPLACIAN, 4)
    for k, v in SCHUR_P4.items():
        assert getattr(sc, k) == pytest.approx(v, abs=1e-6)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_schur_matches_torus_elimination(p):
    # Row of the finite broken-space Schur complement at coarse node (0, 0)
    # on a 3x3 torus of subdomains is the coarse stencil.
    s = assemble(p, 3).S_pi
    sc = schur_stencil(Q1_LAPLACIAN, p)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            col = dx % 3 + 3 * (dy % 3)
            assert s[0, col] == pytest.approx(sc.stencil[dx, dy], abs=1e-10)


@given(st.integers(2, 5), angles, angles)
def test_schur_symbol_two_ways(p, t1, t2):
    b = broken_blocks(Q1_LAPLACIAN, p, (t1, t2))
    sc = schur_stencil(Q1_LAPLACIAN, p)
    assert b.S_P[0, 0] == pytest.approx(classical_symbol(sc.stencil, (t1, t2)), abs=1e-10)


def test_injection_symbol_structure():
    p = 4
    r1 = injection_symbol_R1(BrokenIndexMap(p), (0.4, 1.1))
    assert r1.shape == ((p + 1) ** 2 - 3, p * p)
    assert np.allclose(r1.imag, 0.0)
    col_sq = (np.abs(r1) ** 2).sum(axis=0)
    assert set(np.round(col_sq, 12)) == {1.0, 0.5}
    # each column is a partition of unity over its copies
    assert np.allclose(r1.sum(axis=0), 1.0)
    r2 = injection_symbol_R1(BrokenIndexMap(2), (0.7, 0.2))
    g = r2.conj().T @ r2
    assert np.allclose(g, np.diag(np.diag(g)))
    assert set(np.round(np.diag(g).real, 12)) <= {1.0, 0.5}


@given(st.integers(2, 5), angles, angles)
def test_jump_of_continuous_field_vanishes(p, t1, t2):
    lev = CellLayout(Q1_LAPLACIAN, p).at((t1, t2))
    unweighted = lev.R1.toarray().copy()
    unweighted[unweighted != 0] = 1.0
    assert np.allclose(lev.JDt.toarray() @ unweighted, 0.0, atol=1e-12)


def test_harmonic_extension_sign_and_values():
    p = 4
    _, h, _ = jump_and_harmonic_symbols(Q1_LAPLACIAN, p, (0.0, 0.0))
    kinds = CellLayout(Q1_LAPLACIAN, p).subdomain_kinds()
    ext = h @ (kinds == EDGE).astype(float)
    # independent interior Dirichlet solve with unit edge values, zero corners
    n = p + 1
    e = np.array([[4, -1, -1, -2], [-1, 4, -2, -1], [-1, -2, 4, -1], [-2, -1, -1, 4]]) / 6.0
    a = np.zeros((n * n, n * n))
    for ey in range(p):
        for ex in range(p):
            idx = [ex + n * ey, ex + 1 + n * ey, ex + n * (ey + 1), ex + 1 + n * (ey + 1)]
            a[np.ix_(idx, idx)] += e
    inner = [k + n * l for l in range(1, p) for k in range(1, p)]
    bnd = np.zeros(n * n)
    for l in range(n):
        for k in range(n):
            if (k in (0, p) or l in (0, p)) and not (k in (0, p) and l in (0, p)):
                bnd[k + n * l] = 1.0
    u = -np.linalg.solve(a[np.ix_(inner, inner)], a[inner] @ bnd)
    fine_inner = [x + p * y for y in range(1, p) for x in range(1, p)]
    assert np.allclose(ext[fine_inner], u)
    assert np.all(u > 0)  # H carries the minus sign of -A_II^{-1} A_IG
    # adding the corners back gives the constant
    bnd[[0, p, n * p, n * p + p]] = 1.0
    assert np.allclose(-np.linalg.solve(a[np.ix_(inner, inner)], a[inner] @ bnd), 1.0)
    others = [i for i in range(p * p) if i not in fine_inner]
    assert np.allclose(ext[others], 0.0)


def test_r2_differs_from_r1_only_on_edge_rows():
    p = 4
    lev = CellLayout(Q1_LAPLACIAN, p).at((np.pi / 2, np.pi / 3))
    r1, r2 = lev.R1.toarray(), lev.R2.toarray()
    assert not np.allclose(r1, r2)
    kinds = lev.layout.subdomain_kinds()
    same = kinds != EDGE
    assert np.allclose(r1[same], r2[same])


@pytest.mark.parametrize("p", [2, 3])
def test_generic_stencil_runs(p):
    rng = np.random.default_rng(p)
    c = -np.abs(rng.standard_normal((3, 3)))
    c = 0.5 * (c + c[::-1, ::-1])
    c[1, 1] = 0.0
    c[1, 1] = -c.sum()
    s = Stencil9(c)
    b = broken_blocks(s, p, (0.5, 0.9))
    assert np.allclose(b.A_rr, b.A_rr.conj().T)
    assert schur_stencil(s, p).row_sum == pytest.approx(0.0, abs=1e-12)
