"""Matrix representations of the complex Clifford algebra Cl(n).

The representation acts on spinor space C^N with N = 2**(n // 2).  Generators
are anti-Hermitian and satisfy

    g_i g_j + g_j g_i = -2 delta_ij I,

so Clifford multiplication by a real vector is skew-adjoint for the Hermitian
product and squares to minus the Euclidean norm.  The real inner product used
throughout the package is the real part of the Hermitian product
``<a, b> = Re(a^H b)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidDimensionError, ShapeError

__all__ = [
    "CliffordRep",
    "build_gamma",
    "clifford_mul",
    "clifford_matrix",
    "relation_defect",
    "real_inner",
]

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class CliffordRep:
    """Gamma matrices g_1..g_n of Cl(n) acting on C^N.

    Attributes
    ----------
    n : int
        Dimension of the underlying Euclidean space.
    N : int
        Complex spinor rank, ``2 ** (n // 2)``.
    gammas : ndarray, shape (n, N, N)
        The generators.  The array is marked read-only.
    """

    n: int
    N: int
    gammas: np.ndarray

    def __post_init__(self):
        self.gammas.setflags(write=False)


def _tower(n: int) -> np.ndarray:
    if n == 2:
        return np.stack([1j * _SX, 1j * _SY])
    prev = _tower(n - 1)
    if n % 2 == 1:
        # append the (rescaled) chirality element g_1 g_2 ... g_{n-1}
        omega = np.eye(prev.shape[1], dtype=complex)
        for g in prev:
            omega = omega @ g
        sq = (omega @ omega)[0, 0].real
        # omega^2 = +-I; choose the phase making the new generator square to -I
        phase = 1j if sq > 0 else 1.0
        return np.concatenate([prev, (phase * omega)[None]], axis=0)
    # even n: double the spinor space
    gs = [np.kron(g, _SZ) for g in prev]
    gs.append(np.kron(np.eye(prev.shape[1], dtype=complex), 1j * _SX))
    return np.stack(gs)


@lru_cache(maxsize=None)
def _cached(n: int) -> np.ndarray:
    g = _tower(n)
    g.setflags(write=False)
    return g


def build_gamma(n: int) -> CliffordRep:
    """Return the deterministic gamma-matrix realisation of Cl(n).

    Parameters
    ----------
    n : int
        Euclidean dimension, ``n >= 2``.

    Raises
    ------
    InvalidDimensionError
        If ``n < 2``.
    """
    if int(n) != n or n < 2:
        raise InvalidDimensionError(f"Clifford dimension must be an integer >= 2, got {n!r}")
    n = int(n)
    g = np.array(_cached(n))
    return CliffordRep(n=n, N=g.shape[1], gammas=g)


def clifford_matrix(rep: CliffordRep, v) -> np.ndarray:
    """Matrix of Clifford multiplication by ``v``.

    ``v`` may carry leading batch axes; the last axis must have length ``n``.
    Returns an array of shape ``v.shape[:-1] + (N, N)``.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != rep.n:
        raise ShapeError(f"vector length {v.shape[-1]} does not match n={rep.n}")
    return np.tensordot(v, rep.gammas, axes=([-1], [0]))


def clifford_mul(rep: CliffordRep, v, psi) -> np.ndarray:
    """Clifford product ``v . psi = sum_i v_i g_i psi``.

    Parameters
    ----------
    rep : CliffordRep
    v : array_like, shape (..., n)
        Real vector(s).
    psi : array_like, shape (..., N)
        Spinor(s); broadcast against ``v``.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[-1] != rep.N:
        raise ShapeError(f"spinor length {psi.shape[-1]} does not match N={rep.N}")
    m = clifford_matrix(rep, v)
    return np.einsum("...ab,...b->...a", m, psi)


def relation_defect(rep: CliffordRep) -> float:
    """Largest entry of ``g_i g_j + g_j g_i + 2 delta_ij I`` over all pairs."""
    g = rep.gammas
    eye = np.eye(rep.N)
    worst = 0.0
    for i in range(rep.n):
        for j in range(rep.n):
            r = g[i] @ g[j] + g[j] @ g[i] + 2.0 * (i == j) * eye
            worst = max(worst, float(np.abs(r).max()))
    return worst


def real_inner(a, b) -> np.ndarray:
    """Real part of the Hermitian product along the last axis."""
    return np.real(np.sum(np.conj(a) * b, axis=-1))
