"""Product quadrature on the unit sphere S^n and the stereographic chart.

Nodes are generated in hyperspherical coordinates

    x_{n+1} = cos t_1,
    x_n     = sin t_1 cos t_2,
    ...
    (x_1, x_2) = sin t_1 ... sin t_{n-1} (cos phi, sin phi),

whose surface measure is ``prod_j sin(t_j)**(n-j) dt_j dphi``.  Each polar
factor is integrated with a Gauss-Jacobi rule in ``s = cos t`` (weight
``(1 - s^2)**((m-1)/2)``, i.e. the sin-power absorbed in the weight) and the
azimuth with the uniform trapezoid rule, which makes the rule exact for all
polynomials of total degree <= ``degree``.  Gauss nodes never reach ``s = -1``,
so no node sits on the stereographic pole.

The stereographic chart projects from the south pole ``(0, ..., 0, -1)``:

    sigma(y) = (2 y, 1 - |y|^2) / (1 + |y|^2),     u(y) = 2 / (1 + |y|^2),

so that ``y = 0`` is the north pole and the round metric pulls back to
``u^2`` times the Euclidean one.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, roots_jacobi

from .errors import ExactnessError, InvalidDimensionError, PoleError, ShapeError

__all__ = [
    "QuadratureRule",
    "build_rule",
    "integrate",
    "sphere_area",
    "sphere_moment",
    "exactness_defect",
    "stereo",
    "stereo_inv",
    "jacobian",
    "conformal_factor",
    "save_rule",
    "load_rule",
    "cached_rule",
]

POLE_TOL = 1e-12


def sphere_area(n: int) -> float:
    """Volume ``omega_n = 2 pi^((n+1)/2) / Gamma((n+1)/2)`` of the unit S^n."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def sphere_moment(exponents) -> float:
    """Closed-form integral of ``prod x_i^{a_i}`` over the unit sphere.

    Zero if any exponent is odd; otherwise
    ``2 prod Gamma(b_i) / Gamma(sum b_i)`` with ``b_i = (a_i + 1) / 2``.
    """
    a = np.asarray(exponents, dtype=int)
    if np.any(a % 2):
        return 0.0
    b = (a + 1) / 2.0
    return float(2.0 * np.exp(np.sum(gammaln(b)) - gammaln(np.sum(b))))


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights on S^n exact up to ``degree``.

    Attributes
    ----------
    n : int
        Sphere dimension (nodes live in R^{n+1}).
    degree : int
        Declared polynomial exactness.
    nodes : ndarray, shape (m, n+1)
    weights : ndarray, shape (m,)
    certificate : float
        Largest relative moment error observed when the rule was verified.
    """

    n: int
    degree: int
    nodes: np.ndarray
    weights: np.ndarray
    certificate: float = field(default=0.0, compare=False)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def require(self, degree: int) -> None:
        """Raise :class:`ExactnessError` unless the rule is exact to ``degree``."""
        if self.degree < degree:
            raise ExactnessError(
                f"quadrature exact to degree {self.degree}, integrand needs {degree}"
            )


def _polar_rule(m: int, npts: int):
    """Gauss-Jacobi nodes in s = cos t for the measure sin(t)^m dt."""
    a = (m - 1) / 2.0
    s, w = roots_jacobi(npts, a, a)
    return s, w


def _raw_rule(n: int, degree: int):
    npts = degree // 2 + 1
    naz = degree + 1
    phi = 2.0 * math.pi * np.arange(naz) / naz
    # start with the circle S^1 (coordinates x_1, x_2)
    nodes = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    weights = np.full(naz, 2.0 * math.pi / naz)
    # grow S^{d} -> S^{d+1}: new last coordinate s, old coordinates scaled by sqrt(1-s^2)
    for d in range(1, n):
        s, w = _polar_rule(d, npts)
        r = np.sqrt(1.0 - s * s)
        nodes = np.concatenate(
            [
                (r[:, None, None] * nodes[None, :, :]).reshape(-1, d + 1),
                np.repeat(s, nodes.shape[0])[:, None],
            ],
            axis=1,
        )
        weights = (w[:, None] * weights[None, :]).reshape(-1)
    return nodes, weights


FULL_CHECK_BUDGET = 3e7


def _factor_defect(n: int, degree: int) -> float:
    """Exactness of the one-dimensional factors of the product rule."""
    npts = degree // 2 + 1
    naz = degree + 1
    worst = 0.0
    phi = 2.0 * math.pi * np.arange(naz) / naz
    for p in range(degree + 1):
        got = np.mean(np.exp(1j * p * phi))
        worst = max(worst, abs(got - (1.0 if p == 0 else 0.0)))
    for d in range(1, n):
        s, w = _polar_rule(d, npts)
        a = (d - 1) / 2.0
        for p in range(degree + 1):
            # int_{-1}^{1} s^p (1 - s^2)^a ds
            ref = 0.0 if p % 2 else float(np.exp(gammaln((p + 1) / 2.0) + gammaln(a + 1.0)
                                                 - gammaln((p + 1) / 2.0 + a + 1.0)))
            got = float(w @ s ** p)
            worst = max(worst, abs(got - ref) / max(abs(ref), 1.0))
    return worst


def exactness_defect(rule: QuadratureRule, degree: int | None = None,
                     budget: float = FULL_CHECK_BUDGET) -> float:
    """Largest relative (absolute for zero moments) error over monomials.

    Every monomial of total degree <= ``degree`` (default: the declared
    degree) is integrated with the rule and compared against
    :func:`sphere_moment`.  When the number of monomials times nodes exceeds
    ``budget`` the one-dimensional factors of the product rule are verified
    completely (which certifies exactness of the product) and the monomial
    comparison is restricted to a deterministic sample: all pure powers plus
    an evenly strided subset of the mixed monomials that fits the budget.
    """
    degree = rule.degree if degree is None else degree
    n1 = rule.n + 1
    scale = sphere_area(rule.n)
    worst = 0.0
    x = rule.nodes
    w = rule.weights
    nmono = math.comb(degree + n1, n1)
    sampled = nmono * x.shape[0] > budget
    stride = max(1, int(math.ceil(nmono * x.shape[0] / budget)))
    if sampled:
        worst = _factor_defect(rule.n, rule.degree)
    # build monomials degree by degree from lower-degree powers
    pows = [np.ones_like(x)]
    for _ in range(degree):
        pows.append(pows[-1] * x)
    counter = 0
    for tot in range(degree + 1):
        for exps in _compositions(tot, n1):
            counter += 1
            if sampled and sum(e > 0 for e in exps) > 1 and counter % stride:
                continue
            vals = np.ones(x.shape[0])
            for i, e in enumerate(exps):
                if e:
                    vals = vals * pows[e][:, i]
            got = float(w @ vals)
            ref = sphere_moment(exps)
            err = abs(got - ref) / (abs(ref) if ref != 0.0 else scale)
            worst = max(worst, err)
    return worst


def _compositions(total: int, parts: int):
    """All exponent tuples of length ``parts`` summing to ``total``."""
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def build_rule(n: int, degree: int, verify: bool = True) -> QuadratureRule:
    """Tensor-product rule on S^n exact for polynomials of degree <= ``degree``.

    Parameters
    ----------
    n : int
        Sphere dimension, ``n >= 1``.
    degree : int
        Requested polynomial exactness, ``>= 1``.
    verify : bool
        Compute the moment-exactness certificate (cheap for the sizes used here).
    """
    if n < 1 or int(n) != n:
        raise InvalidDimensionError(f"sphere dimension must be >= 1, got {n!r}")
    if degree < 1 or int(degree) != degree:
        raise InvalidDimensionError(f"quadrature degree must be >= 1, got {degree!r}")
    nodes, weights = _raw_rule(int(n), int(degree))
    rule = QuadratureRule(n=int(n), degree=int(degree), nodes=nodes, weights=weights)
    if verify:
        cert = exactness_defect(rule)
        if cert > 1e-11:
            raise ExactnessError(f"rule (n={n}, degree={degree}) failed moment check: {cert:.2e}")
        rule = QuadratureRule(n=rule.n, degree=rule.degree, nodes=nodes, weights=weights,
                              certificate=cert)
    return rule


_RULES: dict = {}


def cached_rule(n: int, degree: int) -> QuadratureRule:
    """Memoised :func:`build_rule` (rules are immutable)."""
    key = (int(n), int(degree))
    if key not in _RULES:
        _RULES[key] = build_rule(*key)
    return _RULES[key]


def integrate(rule: QuadratureRule, f) -> np.ndarray:
    """Weighted sum ``sum_i w_i f_i`` over the leading (node) axis of ``f``."""
    f = np.asarray(f)
    if f.shape[0] != rule.size:
        raise ShapeError(f"{f.shape[0]} values for a rule with {rule.size} nodes")
    return np.tensordot(rule.weights, f, axes=([0], [0]))


# ---------------------------------------------------------------------------
# rule cache file
# ---------------------------------------------------------------------------

def _cache_name(n: int, degree: int) -> str:
    return f"sphere_rule_n{n}_d{degree}.npz"


def save_rule(rule: QuadratureRule, directory: str) -> str:
    """Write the rule to ``directory`` as ``sphere_rule_n{n}_d{degree}.npz``.

    Nodes and weights are stored as float64 (full precision) together with
    the exactness certificate.
    """
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, _cache_name(rule.n, rule.degree))
    np.savez(path, n=rule.n, degree=rule.degree, nodes=rule.nodes,
             weights=rule.weights, certificate=rule.certificate)
    return path


def load_rule(directory: str, n: int, degree: int) -> QuadratureRule:
    """Load a cached rule and re-verify its exactness certificate."""
    path = os.path.join(directory, _cache_name(n, degree))
    with np.load(path) as data:
        if int(data["n"]) != n or int(data["degree"]) != degree:
            raise ExactnessError(f"cache file {path} does not hold (n={n}, degree={degree})")
        rule = QuadratureRule(n=n, degree=degree, nodes=np.array(data["nodes"]),
                              weights=np.array(data["weights"]),
                              certificate=float(data["certificate"]))
    cert = exactness_defect(rule)
    if cert > 1e-11 or np.any(rule.weights <= 0):
        raise ExactnessError(f"cached rule {path} failed re-verification ({cert:.2e})")
    return rule


# ---------------------------------------------------------------------------
# stereographic chart
# ---------------------------------------------------------------------------

def conformal_factor(y) -> np.ndarray:
    """``u(y) = 2 / (1 + |y|^2)``."""
    y = np.asarray(y, dtype=float)
    return 2.0 / (1.0 + np.sum(y * y, axis=-1))


def stereo(y) -> np.ndarray:
    """Inverse stereographic projection R^n -> S^n (pole at ``-e_{n+1}``)."""
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1, keepdims=True)
    return np.concatenate([2.0 * y, 1.0 - r2], axis=-1) / (1.0 + r2)


def stereo_inv(x) -> np.ndarray:
    """Stereographic coordinates ``y = x' / (1 + x_{n+1})`` of ``x`` in S^n.

    Raises
    ------
    PoleError
        If any point is within ``1e-12`` of the pole ``(0, ..., 0, -1)``.
    """
    x = np.asarray(x, dtype=float)
    den = 1.0 + x[..., -1]
    if np.any(den <= POLE_TOL):
        raise PoleError("point at the stereographic pole (0, ..., 0, -1)")
    return x[..., :-1] / den[..., None]


def jacobian(y) -> np.ndarray:
    """Derivative of :func:`stereo`, shape ``(..., n+1, n)``.

    Satisfies ``J^T J = u(y)^2 I``.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    r2 = np.sum(y * y, axis=-1)[..., None, None]
    d = 1.0 + r2
    eye = np.eye(n)
    top = 2.0 * eye / d - 4.0 * y[..., :, None] * y[..., None, :] / d ** 2
    bottom = (-4.0 * y / d[..., 0] ** 2)[..., None, :]
    return np.concatenate([top, bottom], axis=-2)
