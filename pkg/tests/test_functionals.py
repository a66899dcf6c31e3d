import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import space, unit_phi0
from spinsphere.conformal import MoebiusParam, optimizer_field
from spinsphere.errors import DomainError, SingularIntegrandError
from spinsphere.functionals import (F_functional, J_functional, Ja_functional, constituents,
                                    deficit, deficit_report, dist_to_M, el_residual_F,
                                    el_residual_J, fit_yamabe_constant)
from spinsphere.squad import cached_rule


def killing(n, scale=1.0):
    sp = space(n)
    return sp.field(scale * sp.killing(unit_phi0(sp.N)))


def random_coeffs(sp, rng, amp=1.0):
    c = rng.standard_normal(sp.size) + 1j * rng.standard_normal(sp.size)
    return amp * c / np.linalg.norm(c)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_killing_values(n):
    sp = space(n)
    psi = killing(n)
    J = J_functional(psi)
    F = F_functional(psi)
    assert J.value == pytest.approx(n / 2 * sp.omega ** (1 / n), rel=1e-12)
    assert F.value == pytest.approx(n * n / 4 * sp.omega ** (2 / n), rel=1e-12)
    assert J.refinement_delta < 1e-12 * J.value
    assert abs(deficit(psi)) < 1e-12
    for a in (0.0, 0.3, 1.0):
        assert Ja_functional(psi, a).value == pytest.approx(J.value, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_pairing_matches_coefficient_form(n, rng):
    sp = space(n)
    c = random_coeffs(sp, rng)
    comp = constituents(sp.field(c), sp.quad)
    exact = np.real(sp.hermitian_l2(sp.dirac.matrix @ c, c))
    assert comp["pairing"] == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_norm_q_against_adaptive_quadrature(rng):
    # n = 2: q = 4, integrate |psi|^4 in spherical coordinates independently
    sp = space(2)
    psi = sp.field(sp.killing(unit_phi0(sp.N)) + 0.5 * random_coeffs(sp, rng))

    def f(phi, th):
        x = np.array([[np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi), np.cos(th)]])
        return np.sum(np.abs(psi.sample(x)[0]) ** 2) ** 2 * np.sin(th)

    ref, _ = integrate.dblquad(f, 0, np.pi, 0, 2 * np.pi, epsabs=0, epsrel=1e-11)
    assert constituents(psi, cached_rule(2, 24))["norm_q"] == pytest.approx(ref, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.05, 20.0))
def test_scale_invariance(seed, t):
    sp = space(3)
    rng = np.random.default_rng(seed)
    c = sp.killing(unit_phi0(sp.N)) + 0.3 * random_coeffs(sp, rng)
    a, b = sp.field(c), sp.field(t * np.exp(0.7j) * c)
    assert F_functional(b).value == pytest.approx(F_functional(a).value, rel=1e-10)
    assert J_functional(b).value == pytest.approx(J_functional(a).value, rel=1e-10)
    assert deficit(b) == pytest.approx(t * t * deficit(a), rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 3, 4]), st.integers(0, 2 ** 31), st.floats(0.0, 1.5))
def test_deficit_nonnegative(n, seed, amp):
    sp = space(n)
    rng = np.random.default_rng(seed)
    c = sp.killing(unit_phi0(sp.N)) + amp * random_coeffs(sp, rng)
    rep = deficit_report(sp.field(c))
    assert rep.value >= -1e-10 - rep.refinement_delta


def test_Ja_endpoints(rng):
    sp = space(3)
    psi = sp.field(sp.killing(unit_phi0(sp.N)) + 0.4 * random_coeffs(sp, rng))
    assert Ja_functional(psi, 0.0).value == pytest.approx(J_functional(psi).value, rel=1e-13)
    F = F_functional(psi).value
    assert Ja_functional(psi, 1.0).value == pytest.approx(F * 2 / 3 * sp.omega ** (-1 / 3), rel=1e-13)
    with pytest.raises(DomainError):
        Ja_functional(psi, 1.5)


def test_domain_errors():
    sp = space(3)
    w, v = np.linalg.eigh(sp.dirac.matrix)
    neg = sp.field(v[:, 0])  # most negative eigenvalue: negative pairing
    assert w[0] < 0
    with pytest.raises(DomainError):
        J_functional(neg)
    zero = sp.field(np.zeros(sp.size, dtype=complex))
    with pytest.raises(DomainError):
        F_functional(zero)
    with pytest.raises(SingularIntegrandError):
        el_residual_F(zero)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_el_residuals_on_optimisers(n):
    sp = space(n)
    psi = killing(n, scale=1.7)
    assert el_residual_J(psi) < 1e-12
    lengths = np.linalg.norm(psi.sample(sp.quad.nodes)[0], axis=1)
    assert np.ptp(lengths) < 1e-12 * lengths.max()
    mu = fit_yamabe_constant(psi)
    assert mu == pytest.approx(n / 2 * lengths[0] ** (-2 / (n - 1)), rel=1e-12)
    r = el_residual_F(psi)
    assert r.residual < 1e-11
    assert r.truncation_loss < 1e-12
    # a Moebius-moved optimiser is also critical (not a truncated field)
    moved = optimizer_field(sp, MoebiusParam(0.2 * np.eye(n + 1)[0]), unit_phi0(sp.N))
    assert el_residual_J(moved, mu=n / 2) < 1e-12


def test_el_residual_detects_non_critical(rng):
    sp = space(3)
    psi = sp.field(sp.killing(unit_phi0(sp.N)) + 0.5 * random_coeffs(sp, rng))
    assert el_residual_J(psi) > 1e-2


@pytest.mark.parametrize("n", [2, 3])
def test_dist_to_M_recovers_member(n):
    sp = space(n)
    p = MoebiusParam(np.r_[0.25, 0.0, -0.15, np.zeros(n - 2)])
    phi0 = unit_phi0(sp.N)
    target = optimizer_field(sp, p, phi0)
    d, params = dist_to_M(target, multistart=2, degree=16)
    ref = F_functional(target, degree=16).components["dirac_p"] ** ((n + 1) / n)
    assert d < 1e-10 * ref
    np.testing.assert_allclose(params["b"], p.b, atol=1e-5)


def test_dist_to_M_positive_off_family(rng):
    sp = space(2)
    psi = sp.field(sp.killing(unit_phi0(sp.N)) + 0.3 * random_coeffs(sp, rng))
    d, _ = dist_to_M(psi, multistart=2)
    assert d > 1e-4
    assert d <= F_functional(psi).components["dirac_p"] ** 1.5


def test_refine_flag(rng):
    sp = space(2)
    psi = sp.field(sp.killing(unit_phi0(sp.N)) + 0.3 * random_coeffs(sp, rng))
    a, b = J_functional(psi), J_functional(psi, refine=False)
    assert a.value == b.value
    assert np.isnan(b.refinement_delta) and a.refinement_delta >= 0
