import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad as scipy_quad

from spinsphere.errors import ExactnessError, InvalidDimensionError, PoleError, ShapeError
from spinsphere.squad import (build_rule, cached_rule, conformal_factor, exactness_defect,
                              integrate, jacobian, load_rule, save_rule, sphere_area,
                              sphere_moment, stereo, stereo_inv)

# closed-form volumes of the unit spheres
AREAS = {1: 2 * math.pi, 2: 4 * math.pi, 3: 2 * math.pi ** 2, 4: 8 * math.pi ** 2 / 3,
         5: math.pi ** 3}


@pytest.mark.parametrize("n", sorted(AREAS))
def test_sphere_area(n):
    assert sphere_area(n) == pytest.approx(AREAS[n], rel=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_moments_closed_forms(n):
    w = AREAS[n]
    e = np.zeros(n + 1, dtype=int)
    e[0] = 2
    assert sphere_moment(e) == pytest.approx(w / (n + 1), rel=1e-14)
    e[0] = 4
    assert sphere_moment(e) == pytest.approx(3 * w / ((n + 1) * (n + 3)), rel=1e-14)
    e[0], e[1] = 2, 2
    assert sphere_moment(e) == pytest.approx(w / ((n + 1) * (n + 3)), rel=1e-14)
    e[1] = 1
    assert sphere_moment(e) == 0.0


# node counts of the product rules used by the package
@pytest.mark.parametrize("n,degree,size", [(2, 12, 91), (3, 12, 637), (4, 12, 4459),
                                           (2, 8, 45), (3, 8, 225)])
def test_rule_sizes(n, degree, size):
    assert cached_rule(n, degree).size == size


@pytest.mark.parametrize("n,degree", [(1, 6), (2, 5), (2, 12), (3, 9), (3, 12), (4, 10), (5, 8)])
def test_exactness(n, degree):
    r = build_rule(n, degree)
    assert r.certificate < 1e-12
    assert exactness_defect(r, budget=float("inf")) < 1e-12
    assert np.all(r.weights > 0)
    np.testing.assert_allclose(np.linalg.norm(r.nodes, axis=1), 1.0, atol=1e-14)


def test_not_exact_beyond_degree():
    r = build_rule(2, 6)
    assert exactness_defect(r, degree=8, budget=float("inf")) > 1e-6


def test_sampled_certificate_agrees_with_full():
    r = cached_rule(4, 12)
    full = exactness_defect(r, budget=float("inf"))
    sampled = exactness_defect(r, budget=1e5)
    assert full < 1e-12 and sampled < 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_smooth_integrand_against_1d_oracle(n):
    # int_{S^n} exp(x_{n+1}) = omega_{n-1} int_{-1}^{1} e^t (1 - t^2)^{(n-2)/2} dt
    ref = sphere_area(n - 1) * scipy_quad(lambda t: math.exp(t) * (1 - t * t) ** ((n - 2) / 2),
                                          -1, 1, epsabs=0, epsrel=1e-12, limit=200)[0]
    r = cached_rule(n, 16)
    assert integrate(r, np.exp(r.nodes[:, -1])) == pytest.approx(ref, rel=1e-12)


def test_require_and_errors():
    r = cached_rule(2, 8)
    r.require(8)
    with pytest.raises(ExactnessError):
        r.require(9)
    with pytest.raises(InvalidDimensionError):
        build_rule(0, 4)
    with pytest.raises(InvalidDimensionError):
        build_rule(2, 0)
    with pytest.raises(ShapeError):
        integrate(r, np.ones(3))


def test_no_node_at_pole():
    for n, d in [(2, 12), (3, 12), (4, 12)]:
        assert np.min(1 + cached_rule(n, d).nodes[:, -1]) > 1e-3


def test_save_load_roundtrip(tmp_path):
    r = build_rule(3, 6)
    path = save_rule(r, str(tmp_path))
    assert path.endswith("sphere_rule_n3_d6.npz")
    s = load_rule(str(tmp_path), 3, 6)
    np.testing.assert_array_equal(s.nodes, r.nodes)
    np.testing.assert_array_equal(s.weights, r.weights)


def test_load_rejects_corrupted(tmp_path):
    r = build_rule(2, 6)
    w = r.weights.copy()
    w[0] *= 1.01
    np.savez(tmp_path / "sphere_rule_n2_d6.npz", n=2, degree=6, nodes=r.nodes, weights=w,
             certificate=0.0)
    with pytest.raises(ExactnessError):
        load_rule(str(tmp_path), 2, 6)


def test_pole_error():
    with pytest.raises(PoleError):
        stereo_inv(np.array([0.0, 0.0, -1.0]))


def test_north_pole_is_origin():
    np.testing.assert_allclose(stereo(np.zeros(3)), [0, 0, 0, 1])
    assert conformal_factor(np.zeros(3)) == 2.0


coords = st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=5)


@settings(max_examples=80, deadline=None)
@given(coords)
def test_stereo_roundtrip(y):
    y = np.array(y)
    x = stereo(y)
    assert abs(np.linalg.norm(x) - 1) < 1e-13
    np.testing.assert_allclose(stereo_inv(x), y, rtol=1e-10, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(coords)
def test_jacobian_is_conformal(y):
    y = np.array(y) / 10.0
    J = jacobian(y)
    u = conformal_factor(y)
    np.testing.assert_allclose(J.T @ J, u * u * np.eye(y.size), atol=1e-12)
    # and matches central differences
    h = 1e-6
    fd = np.stack([(stereo(y + h * e) - stereo(y - h * e)) / (2 * h) for e in np.eye(y.size)], axis=1)
    np.testing.assert_allclose(J, fd, atol=1e-8)
