import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import base, space
from spinsphere.errors import DomainError, InvalidDimensionError, ShapeError, TruncationError
from spinsphere.forms import (SensitivityWarning, assemble_G, assemble_G2, assemble_Ga,
                              assemble_S, complement, crossing_bound, crossing_max,
                              gap_constant_c1, index_nullity, index_nullity_sweep,
                              interpolation_closed_form, interpolation_direction, killing_base,
                              pairing_blocks, q_family, scan_Ja, spectral_gap, span, subspace)
from spinsphere.functionals import F_functional, J_functional
from spinsphere.harmonics import dim_Pk
from spinsphere.spinframe import SpinorSpace, complexify, realify

# frozen eigenvalue computations at K = 3 (rerun: spectral_gap(space(n, 3)))
GAP_D = {2: 0.166666666666666, 3: 0.12886253272766787, 4: 0.09515628522846926,
         5: 0.07203408632649706}
# (index, nullity) of the second variation of F at a Killing spinor, K = 3
INDEX_NULLITY = {2: (3, 8), 3: (4, 8), 4: (5, 16), 5: (6, 16)}
# real dimension of E_{-1} orthogonal to both tangent families
ET_MINUS_1 = {2: 1, 3: 0, 4: 3, 5: 2}


def random_direction(sp, rng, avoid=None):
    r = rng.standard_normal(sp.real_size)
    if avoid is not None:
        r -= avoid @ (avoid.T @ r)
    return r / np.linalg.norm(r)


# ---------------------------------------------------------------------------
# assembly against pointwise integration and finite differences
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4])
def test_pairing_blocks_match_pointwise_integrals(n, rng):
    sp = space(n)
    b = base(n, 3)
    pb = pairing_blocks(sp, b)
    r = random_direction(sp, rng)
    S, _ = sp.field(complexify(r)).sample(sp.quad.nodes)
    Xi, _ = sp.field(b.coeffs).sample(sp.quad.nodes)
    inner = np.real(np.sum(np.conj(Xi) * S, axis=1))
    assert r @ pb.BtWB @ r == pytest.approx(sp.quad.weights @ inner ** 2, rel=1e-11)
    assert pb.m @ r == pytest.approx(sp.quad.weights @ inner, rel=1e-10, abs=1e-13)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_S_is_second_variation_of_J(n, rng):
    sp = space(n)
    b = base(n, 3)
    S = assemble_S(sp, b)
    phi = random_direction(sp, rng)
    t = 1e-3

    def J(s):
        return J_functional(sp.field(b.coeffs + s * complexify(phi))).value

    fd = (J(t) - 2 * J(0) + J(-t)) / t ** 2
    assert fd == pytest.approx(2 * sp.omega ** ((1 - n) / n) * S.value(phi), rel=1e-5)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_G2_is_second_variation_of_F(n, rng):
    sp = space(n)
    b = base(n, 3)
    G2 = assemble_G2(sp, b)
    phi = random_direction(sp, rng, b.radial[:, None])
    t = 1e-3

    def F(s):
        return F_functional(sp.field(b.coeffs + s * complexify(phi))).value

    fd = (F(t) - 2 * F(0) + F(-t)) / t ** 2
    assert fd == pytest.approx(n * sp.omega ** ((2 - n) / n) * G2.value(phi), rel=1e-5)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_forms_symmetric_and_degenerate_on_tangent_space(n):
    sp = space(n)
    b = base(n, 3)
    S, G = assemble_S(sp, b), assemble_G(sp, b)
    for f in (S, G, assemble_G2(sp, b), assemble_Ga(sp, 0.4, b)):
        assert f.symmetry_defect() == 0.0
    Q = subspace(sp, "Q", b).vectors
    E0 = subspace(sp, "E0", b).vectors
    scale = np.abs(S.matrix).max()
    assert np.abs(G.matrix @ Q).max() < 1e-13 * scale
    assert np.abs(S.matrix @ E0).max() < 1e-13 * scale
    np.testing.assert_allclose(assemble_Ga(sp, 0.0, b).matrix, G.matrix, atol=1e-13 * scale)


def test_assembly_errors():
    sp = SpinorSpace(3, K=1)
    with pytest.raises(TruncationError):
        assemble_S(sp)
    with pytest.raises(TruncationError):
        spectral_gap(space(3, 2))
    with pytest.raises(DomainError):
        assemble_Ga(space(3), 1.2)
    with pytest.raises(ShapeError):
        killing_base(space(3), np.ones(5))
    with pytest.raises(DomainError):
        killing_base(space(3), np.zeros(2))
    with pytest.raises(KeyError):
        subspace(space(3), "nonsense")
    with pytest.raises(InvalidDimensionError):
        crossing_max(space(3), 7)


# ---------------------------------------------------------------------------
# subspaces
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_subspace_dimensions(n):
    sp = space(n)
    b = base(n, 3)
    N = sp.N
    assert subspace(sp, "E0", b).dim == 2 * N
    assert subspace(sp, "Q", b).dim == n + 1
    assert subspace(sp, "T", b).dim == 2 * N + n + 1
    assert subspace(sp, "perp:T", b).dim == sp.real_size - 2 * N - n - 1
    assert subspace(sp, "F2").dim == 2 * N * dim_Pk(n, 2)
    assert subspace(sp, "Et-1", b).dim == ET_MINUS_1[n]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 31))
def test_span_and_complement(d, extra, seed):
    rng = np.random.default_rng(seed)
    amb = d + extra
    V = rng.standard_normal((amb, d))
    A = span("A", np.concatenate([V, V[:, :1] * 2.0], axis=1))
    assert A.dim == d
    np.testing.assert_allclose(A.vectors.T @ A.vectors, np.eye(d), atol=1e-12)
    C = complement("C", A, amb)
    assert C.dim == extra
    assert np.abs(C.vectors.T @ A.vectors).max() < 1e-12


def test_q_family_invariant_under_base_rescaling():
    sp = space(3)
    a = np.array([0.6, 0.8j])
    fam = q_family(sp, killing_base(sp, a), 1, 2.0)
    fam2 = q_family(sp, killing_base(sp, 3.0 * a), 1, 2.0)
    np.testing.assert_allclose(fam.projector(), fam2.projector(), atol=1e-12)


# ---------------------------------------------------------------------------
# crossing estimates, gap, index
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("sign", [1, -1])
def test_crossing_maxima(n, k, sign):
    sp = space(n)
    r = crossing_max(sp, k, sign, base(n, 3))
    assert r.maxval == pytest.approx(crossing_bound(n, k, sign), abs=1e-12)
    assert r.multiplicity == dim_Pk(n, k)
    assert r.family_residual < 1e-10


def test_crossing_independent_of_base():
    sp = space(4)
    rng = np.random.default_rng(5)
    a = rng.standard_normal(sp.N) + 1j * rng.standard_normal(sp.N)
    r = crossing_max(sp, 2, -1, killing_base(sp, a))
    assert r.maxval == pytest.approx(crossing_bound(4, 2, -1), abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_spectral_gap(n):
    g = spectral_gap(space(n), base(n, 3))
    assert g.gap_D == pytest.approx(GAP_D[n], rel=1e-9)
    assert g.gap_D > 0
    assert g.gap_pairing > 0
    assert g.c0 == pytest.approx(n * n / 8 * g.gap_D)
    assert g.c1 == pytest.approx(gap_constant_c1(n))
    assert g.block_minima[3] > g.c1
    assert abs(g.F1_full_min) < 1e-12
    assert g.F1_perp_min == pytest.approx(4 / (n * (n + 2)), rel=1e-10)
    assert g.block_minima[2] == pytest.approx(g.gap_D, rel=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_index_nullity_of_G2(n):
    G2 = assemble_G2(space(n), base(n, 3))
    res, stable = index_nullity_sweep(G2)
    assert stable
    assert (res[0].index, res[0].nullity) == INDEX_NULLITY[n]


def test_index_sensitivity_warning():
    sp = space(2)
    G2 = assemble_G2(sp, base(2, 3))
    vals = np.abs(np.linalg.eigvalsh(G2.restrict(G2.domain)))
    tol = 2.0 * vals[vals > 1e-8].min() / vals.max()
    with pytest.warns(SensitivityWarning):
        index_nullity(G2, tol)
    with pytest.raises(DomainError):
        index_nullity(G2, 0.0)


# ---------------------------------------------------------------------------
# interpolated family
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_scan_bracket_contains_threshold(n):
    r = scan_Ja(space(n), np.arange(0.0, 1.0001, 0.05), base(n, 3))
    assert r.threshold == pytest.approx(1 - 2 / (n * (n + 1)))
    assert r.bracket is not None
    lo, hi = r.bracket
    assert lo < r.threshold <= hi + 1e-12
    assert np.all(r.min_eig[r.a_grid <= lo] > 0)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("a", [0.0, 0.5, 0.9, 1.0])
def test_interpolation_closed_form(n, a, rng):
    sp = space(n)
    b = base(n, 3)
    f = rng.standard_normal(n + 1)
    c = interpolation_direction(sp, f, b)
    val = assemble_Ga(sp, a, b).value_of(c)
    ref = interpolation_closed_form(n, a, float(f @ f))
    assert val == pytest.approx(ref, rel=1e-10, abs=1e-10 * abs(interpolation_closed_form(n, 0, f @ f)))
