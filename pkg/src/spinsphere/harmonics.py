"""Spherical harmonics on S^n as harmonic homogeneous polynomials.

A degree-k harmonic on S^n is the restriction of a homogeneous polynomial H in
the n+1 ambient variables with vanishing flat Laplacian.  Writing
``H = sum_j x_0^j p_j(x')`` the condition ``Delta H = 0`` is the recursion

    p_{j+2} = -Delta' p_j / ((j + 2)(j + 1)),

so every harmonic is fixed by its two "initial data" p_0 (degree k) and
p_1 (degree k-1) in the remaining variables.  Seeding these with monomials in
lexicographic order gives a kernel basis of the Laplacian with exactly
``dim P_k`` members; the basis is then orthonormalised in L^2(S^n) by
modified Gram-Schmidt with one reorthogonalisation pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DomainError, InvalidDimensionError, ShapeError
from .squad import QuadratureRule, _compositions

__all__ = [
    "HarmonicPolynomial",
    "HarmonicBasis",
    "dim_Pk",
    "monomials",
    "basis_Pk",
    "eval",
    "tangential_gradient",
    "laplacian_coeffs",
]

SPHERE_TOL = 1e-12


def dim_Pk(n: int, k: int) -> int:
    """Dimension of the degree-k spherical harmonics on S^n."""
    if k == 0:
        return 1
    return comb(n + k - 1, k) * (n + 2 * k - 1) // (n + k - 1)


def monomials(nvars: int, k: int) -> np.ndarray:
    """Exponent matrix of all degree-k monomials, lexicographically descending."""
    exps = sorted(_compositions(k, nvars), reverse=True)
    return np.array(exps, dtype=int).reshape(len(exps), nvars)


@dataclass(frozen=True)
class HarmonicPolynomial:
    """Homogeneous polynomial ``sum_m coeffs[m] * x**exponents[m]``.

    Attributes
    ----------
    n : int
        Sphere dimension (the polynomial has n+1 variables).
    k : int
        Degree.
    exponents : ndarray, shape (m, n+1)
    coeffs : ndarray, shape (m,)
    """

    n: int
    k: int
    exponents: np.ndarray
    coeffs: np.ndarray

    def __call__(self, x):
        return eval(self, x)

    def gradient(self, x):
        """Ambient gradient of the homogeneous extension, shape (..., n+1)."""
        x = _check_sphere(x, self.n)
        return _monomial_gradients(self.exponents, x) @ self.coeffs


def _check_sphere(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n + 1:
        raise ShapeError(f"points need {n + 1} coordinates, got {x.shape[-1]}")
    if np.any(np.abs(np.sum(x * x, axis=-1) - 1.0) > 2 * SPHERE_TOL + 1e-15):
        raise DomainError("point not on the unit sphere (|x| = 1 within 1e-12 required)")
    return x


def _monomial_values(exps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of each monomial: shape x.shape[:-1] + (m,)."""
    kmax = int(exps.max()) if exps.size else 0
    pows = np.ones(x.shape + (kmax + 1,))
    for p in range(1, kmax + 1):
        pows[..., p] = pows[..., p - 1] * x
    out = np.ones(x.shape[:-1] + (exps.shape[0],))
    for i in range(exps.shape[1]):
        out = out * pows[..., i, :][..., exps[:, i]]
    return out


def _monomial_gradients(exps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gradients of each monomial: shape x.shape[:-1] + (n+1, m)."""
    nv = exps.shape[1]
    grads = []
    for i in range(nv):
        e = exps.copy()
        factor = e[:, i].astype(float)
        e[:, i] = np.maximum(e[:, i] - 1, 0)
        grads.append(_monomial_values(e, x) * factor)
    return np.stack(grads, axis=-2)


def eval(h: HarmonicPolynomial, x) -> np.ndarray:
    """Evaluate ``h`` at point(s) ``x`` on S^n.

    Raises
    ------
    DomainError
        If a point is off the unit sphere.
    """
    x = _check_sphere(x, h.n)
    return _monomial_values(h.exponents, x) @ h.coeffs


def tangential_gradient(h: HarmonicPolynomial, x) -> np.ndarray:
    """Spherical gradient ``grad H - k H x`` at ``x`` (tangent to S^n)."""
    x = _check_sphere(x, h.n)
    g = _monomial_gradients(h.exponents, x) @ h.coeffs
    val = _monomial_values(h.exponents, x) @ h.coeffs
    return g - h.k * val[..., None] * x


def laplacian_coeffs(exps: np.ndarray, coeffs: np.ndarray) -> dict:
    """Flat Laplacian of a polynomial given by monomial exponents/coefficients.

    Returns a mapping exponent-tuple -> coefficient (zero entries dropped).
    """
    out: dict = {}
    for e, c in zip(exps, coeffs):
        if c == 0:
            continue
        for i in range(len(e)):
            if e[i] >= 2:
                f = list(e)
                f[i] -= 2
                key = tuple(f)
                out[key] = out.get(key, 0.0) + c * e[i] * (e[i] - 1)
    return {k: v for k, v in out.items() if v != 0.0}


def _harmonic_extension(seed: dict, nv: int) -> dict:
    """Harmonic polynomial with x_0-degree <= 1 part ``seed`` (dict form)."""
    # split seed by power of x_0 (0 or 1)
    layers = {0: {}, 1: {}}
    for e, c in seed.items():
        layers[e[0]][e[1:]] = c
    result = {}
    for j0 in (0, 1):
        p = layers[j0]
        j = j0
        while p:
            for e, c in p.items():
                key = (j,) + e
                result[key] = result.get(key, 0.0) + c
            exps = np.array(list(p.keys()), dtype=int).reshape(len(p), nv - 1)
            lap = laplacian_coeffs(exps, np.array(list(p.values())))
            p = {e: -c / ((j + 2) * (j + 1)) for e, c in lap.items()}
            j += 2
    return result


@dataclass(frozen=True)
class HarmonicBasis:
    """L^2(S^n)-orthonormal basis of P_k sharing one monomial list.

    Attributes
    ----------
    n, k : int
    exponents : ndarray, shape (m, n+1)
        All degree-k monomials.
    coeff_matrix : ndarray, shape (dim, m)
        Row ``i`` holds the coefficients of member ``i``.
    gram : ndarray, shape (dim, dim)
        Quadrature Gram matrix of the final basis (identity up to rounding).
    """

    n: int
    k: int
    exponents: np.ndarray
    coeff_matrix: np.ndarray
    gram: np.ndarray

    @property
    def dim(self) -> int:
        return self.coeff_matrix.shape[0]

    @property
    def members(self) -> list:
        return [HarmonicPolynomial(self.n, self.k, self.exponents, c) for c in self.coeff_matrix]

    def __len__(self):
        return self.dim

    def values(self, x) -> np.ndarray:
        """Values of all members at points ``x``: shape x.shape[:-1] + (dim,)."""
        x = np.asarray(x, dtype=float)
        return _monomial_values(self.exponents, x) @ self.coeff_matrix.T

    def gradients(self, x) -> np.ndarray:
        """Tangential gradients of all members: shape x.shape[:-1] + (dim, n+1)."""
        x = np.asarray(x, dtype=float)
        g = np.einsum("...am,dm->...da", _monomial_gradients(self.exponents, x),
                      self.coeff_matrix)
        v = self.values(x)
        return g - self.k * v[..., :, None] * x[..., None, :]


def basis_Pk(n: int, k: int, quad: QuadratureRule) -> HarmonicBasis:
    """Orthonormal basis of degree-k spherical harmonics on S^n.

    Parameters
    ----------
    n : int
        Sphere dimension (>= 1).
    k : int
        Degree (>= 0).
    quad : QuadratureRule
        Rule on S^n exact to degree >= 2k, used for the L^2 products.

    Returns
    -------
    HarmonicBasis
        ``P_0`` is the constant ``omega_n ** -0.5``.
    """
    if k < 0 or n < 1:
        raise InvalidDimensionError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    if quad.n != n:
        raise ShapeError(f"rule is on S^{quad.n}, basis requested on S^{n}")
    quad.require(2 * k)
    nv = n + 1
    exps = monomials(nv, k)
    index = {tuple(e): i for i, e in enumerate(exps)}
    seeds = [e for e in exps if e[0] <= 1]
    raw = np.zeros((len(seeds), len(exps)))
    for r, e in enumerate(seeds):
        for key, c in _harmonic_extension({tuple(e): 1.0}, nv).items():
            raw[r, index[key]] += c
    if raw.shape[0] != dim_Pk(n, k):  # pragma: no cover - structural identity
        raise InvalidDimensionError("harmonic kernel has unexpected dimension")

    vals = _monomial_values(exps, quad.nodes)
    w = quad.weights
    coeffs = raw.copy()
    v = vals @ coeffs.T
    # modified Gram-Schmidt with one reorthogonalisation pass
    for j in range(coeffs.shape[0]):
        for _ in range(2):
            for i in range(j):
                r = w @ (v[:, i] * v[:, j])
                v[:, j] -= r * v[:, i]
                coeffs[j] -= r * coeffs[i]
        nrm = np.sqrt(w @ (v[:, j] ** 2))
        v[:, j] /= nrm
        coeffs[j] /= nrm
    gram = (v * w[:, None]).T @ v
    return HarmonicBasis(n=n, k=k, exponents=exps, coeff_matrix=coeffs, gram=gram)
