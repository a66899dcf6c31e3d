"""Killing-spinor trivialisation of the spinor bundle of S^n and the Dirac matrix.

Conventions
-----------
A spinor field on S^n is described in the flat stereographic picture: a map
``psi: R^n -> C^N``, related to the sphere field by the conformal weight
``u^{-(n-1)/2}``.  Pointwise Hermitian products on the sphere are
``u^{-(n-1)} <psi_1, psi_2>_flat`` and Clifford multiplication by the sphere
gradient of ``h`` is ``u^{-1} gamma(d_y h)``, where ``d_y h = J^T grad H`` is
the flat gradient of ``h o sigma``.

The frame spinors are

    K_alpha(y) = u(y)^{n/2} (1 - y.) Phi_alpha,    Phi_alpha = e_alpha / sqrt(2),

which are unit-length -1/2-Killing spinors (Dirac eigenvalue n/2) and form a
pointwise orthonormal frame.  Internally every field is handled through its
*frame components*: ``psi = sum_alpha S_alpha(x) xi_alpha``; pointwise
Hermitian products are then plain ``S_1^H S_2``.

The Dirac operator is assembled on the truncated basis ``{h_i xi_alpha}``
(``h_i`` orthonormal harmonics of degree ``<= K``) from the identity

    D(h xi) = (n/2) h xi + dh . xi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .clifford import CliffordRep, build_gamma, clifford_matrix
from .errors import ClusterError, InvalidDimensionError, ShapeError
from .harmonics import HarmonicBasis, HarmonicPolynomial, basis_Pk, dim_Pk, _check_sphere
from .squad import (QuadratureRule, cached_rule, conformal_factor, jacobian, sphere_area,
                    stereo_inv)

__all__ = [
    "KillingFrame",
    "killing_frame",
    "killing_eval",
    "killing_matrix",
    "frame_matrix",
    "clifford_grad_eval",
    "frame_clifford",
    "DiracMatrix",
    "assemble_dirac",
    "eigenspaces",
    "eigenbasis",
    "SpinorSpace",
    "SpinorField",
    "Field",
    "realify",
    "complexify",
    "realify_matrix",
    "realify_basis",
]

CHUNK = 4096
HCACHE_LIMIT = 4_000_000


# ---------------------------------------------------------------------------
# frame
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KillingFrame:
    """Constant spinors ``Phi_alpha`` generating the Killing frame.

    Attributes
    ----------
    rep : CliffordRep
    phis : ndarray, shape (N, N)
        Column ``alpha`` is ``Phi_alpha``; ``Phi^H Phi = I / 2``.
    """

    rep: CliffordRep
    phis: np.ndarray

    @property
    def n(self) -> int:
        return self.rep.n

    @property
    def N(self) -> int:
        return self.rep.N


def killing_frame(n: int, rotation=None) -> KillingFrame:
    """Standard frame ``Phi_alpha = e_alpha / sqrt(2)``.

    ``rotation`` (an N x N unitary) may be supplied to obtain a rotated frame.
    """
    rep = build_gamma(n)
    phis = np.eye(rep.N, dtype=complex) / np.sqrt(2.0)
    if rotation is not None:
        rotation = np.asarray(rotation, dtype=complex)
        if rotation.shape != (rep.N, rep.N):
            raise ShapeError("frame rotation must be N x N")
        phis = phis @ rotation
    return KillingFrame(rep=rep, phis=phis)


def killing_matrix(frame: KillingFrame, x) -> np.ndarray:
    """Flat values of all frame spinors: shape (..., N, N), column alpha = K_alpha."""
    y = stereo_inv(x)
    u = conformal_factor(y)
    m = np.eye(frame.N) - clifford_matrix(frame.rep, y)
    return (u[..., None, None] ** (frame.n / 2.0)) * (m @ frame.phis)


def killing_eval(frame: KillingFrame, alpha: int, x) -> np.ndarray:
    """Flat-picture value ``K_alpha(y) = u^{n/2} (1 - y.) Phi_alpha`` at ``y = stereo_inv(x)``."""
    return killing_matrix(frame, x)[..., :, alpha]


def frame_matrix(frame: KillingFrame, x) -> np.ndarray:
    """Sphere-normalised frame ``b(x) = u^{-(n-1)/2} K(y)`` (unitary), shape (..., N, N).

    With this normalisation the sphere Hermitian product of two fields is the
    plain Hermitian product of their weighted flat values.
    """
    y = stereo_inv(x)
    u = conformal_factor(y)
    m = np.eye(frame.N) - clifford_matrix(frame.rep, y)
    return (u[..., None, None] ** 0.5) * (m @ frame.phis)


def clifford_grad_eval(frame: KillingFrame, alpha: int, h: HarmonicPolynomial, x) -> np.ndarray:
    """Flat-picture value of ``dh . xi_alpha``: ``u^{-1} gamma(J^T grad H) K_alpha``."""
    x = _check_sphere(x, frame.n)
    y = stereo_inv(x)
    u = conformal_factor(y)
    gy = np.einsum("...an,...a->...n", jacobian(y), h.gradient(x))
    return np.einsum("...ab,...b->...a", clifford_matrix(frame.rep, gy / u[..., None]),
                     killing_eval(frame, alpha, x))


def frame_clifford(frame: KillingFrame, x) -> np.ndarray:
    """Clifford action of ambient directions in frame components.

    Returns ``C`` of shape (..., n+1, N, N) such that for a tangent vector
    ``v`` at ``x`` and a field with frame components ``S``, the components of
    ``v . psi`` are ``sum_a v_a C[..., a, :, :] @ S``.  The normal direction
    acts trivially (``sum_a x_a C_a = 0``).
    """
    y = stereo_inv(x)
    u = conformal_factor(y)
    b = frame_matrix(frame, x)
    jt = np.swapaxes(jacobian(y), -1, -2) / u[..., None, None]  # (..., n, n+1)
    g = np.einsum("...ma,mpq->...apq", jt, frame.rep.gammas)  # (..., n+1, N, N)
    bh = np.conj(np.swapaxes(b, -1, -2))
    return bh[..., None, :, :] @ g @ b[..., None, :, :]


# ---------------------------------------------------------------------------
# realification helpers
# ---------------------------------------------------------------------------

def realify(c) -> np.ndarray:
    """Complex vector(s) -> real vector(s) ``[Re c, Im c]`` along axis 0."""
    c = np.asarray(c, dtype=complex)
    return np.concatenate([c.real, c.imag], axis=0)


def complexify(r) -> np.ndarray:
    """Inverse of :func:`realify`."""
    r = np.asarray(r, dtype=float)
    m = r.shape[0] // 2
    return r[:m] + 1j * r[m:]


def realify_matrix(a) -> np.ndarray:
    """Real matrix of a complex-linear map acting on realified vectors."""
    a = np.asarray(a, dtype=complex)
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def realify_basis(v) -> np.ndarray:
    """Real spanning set of the complex span of the columns of ``v``."""
    v = np.asarray(v, dtype=complex)
    return np.concatenate([realify(v), realify(1j * v)], axis=1)


# ---------------------------------------------------------------------------
# Dirac matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiracMatrix:
    """Hermitian matrix of the Dirac operator on the truncated basis.

    Attributes
    ----------
    matrix : ndarray, shape (M, M)
    n, K, N : int
    offsets : tuple of int
        ``offsets[k]`` is the first coefficient index of degree k;
        ``offsets[K+1] = M``.
    """

    matrix: np.ndarray
    n: int
    K: int
    N: int
    offsets: tuple

    def block(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def hermitian_defect(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def off_block_norm(self) -> float:
        worst = 0.0
        for k in range(self.K + 1):
            for j in range(self.K + 1):
                if j != k:
                    worst = max(worst, float(np.linalg.norm(self.matrix[self.block(k), self.block(j)])))
        return worst


def _layout(bases, N):
    offsets = [0]
    for b in bases:
        offsets.append(offsets[-1] + b.dim * N)
    return tuple(offsets)


def assemble_dirac(frame: KillingFrame, bases, quad: QuadratureRule) -> DiracMatrix:
    """Assemble ``<h_j xi_beta, (n/2) h_i xi_alpha + dh_i . xi_alpha>`` by quadrature.

    Parameters
    ----------
    frame : KillingFrame
    bases : sequence of HarmonicBasis
        ``bases[k]`` spans P_k for ``k = 0..K``.
    quad : QuadratureRule
        Exact to degree ``>= 2K + 2``.
    """
    n, N = frame.n, frame.N
    K = len(bases) - 1
    quad.require(2 * K + 2)
    offsets = _layout(bases, N)
    M = offsets[-1]
    hdims = [b.dim for b in bases]
    hoff = np.concatenate([[0], np.cumsum(hdims)])
    Mh = int(hoff[-1])
    # A[(j), (beta, i, alpha)] accumulated over node chunks
    acc = np.zeros((Mh, N, Mh, N), dtype=complex)
    for start in range(0, quad.size, CHUNK):
        x = quad.nodes[start:start + CHUNK]
        w = quad.weights[start:start + CHUNK]
        C = frame_clifford(frame, x)  # (m, n+1, N, N)
        H = np.concatenate([b.values(x) for b in bases], axis=1)  # (m, Mh)
        G = np.concatenate([b.gradients(x) for b in bases], axis=1)  # (m, Mh, n+1)
        # components p of dh_i . xi_q at each node: Y[x, p, i, q]
        Y = np.matmul(G, C.reshape(C.shape[0], C.shape[1], -1))  # (m, Mh, N*N)
        Y = Y.reshape(Y.shape[0], Mh, N, N).transpose(0, 2, 1, 3)
        acc += ((H * w[:, None]).T @ Y.reshape(Y.shape[0], -1)).reshape(Mh, N, Mh, N)
    # reorder to the (k, i, alpha) layout: index = offset_k + i_local * N + alpha
    mat = acc.reshape(Mh * N, Mh * N) + (n / 2.0) * np.eye(M)
    # Mh*N ordering is (global harmonic j, beta) which coincides with the layout
    return DiracMatrix(matrix=mat, n=n, K=K, N=N, offsets=offsets)


def _expected_eigs(n: int, k: int):
    if k == 0:
        return [(n / 2.0, 1)]
    return [(n / 2.0 + k, comb(n + k - 1, k)), (-(n / 2.0 + k - 1), comb(n + k - 2, k - 1))]


def eigenbasis(D: DiracMatrix, k: int, sign: int = +1) -> np.ndarray:
    """Orthonormal complex basis (M x d) of ``E_k`` (sign +1) or ``E_{-k}`` (sign -1).

    For ``k = 0`` only the positive eigenspace ``E_0`` exists.

    Raises
    ------
    ClusterError
        If the F_k block eigenvalues are not within 0.25 of the two expected
        values ``n/2 + k`` and ``-(n/2 + k - 1)``.
    """
    if k < 0 or k > D.K:
        raise InvalidDimensionError(f"degree {k} outside 0..{D.K}")
    blk = D.block(k)
    vals, vecs = np.linalg.eigh(D.matrix[blk, blk])
    target = D.n / 2.0 + k if sign > 0 else -(D.n / 2.0 + k - 1)
    if k == 0 and sign < 0:
        raise InvalidDimensionError("E_0 has no negative partner")
    expected = [e for e, _ in _expected_eigs(D.n, k)]
    for v in vals:
        if min(abs(v - e) for e in expected) > 0.25:
            raise ClusterError(f"eigenvalue {v} of block F_{k} matches no expected cluster")
    sel = np.abs(vals - target) < 0.5
    full = np.zeros((D.size, int(sel.sum())), dtype=complex)
    full[blk] = vecs[:, sel]
    return full


def eigenspaces(D: DiracMatrix, k: int):
    """Spectral projectors ``(P_{E_k}, P_{E_{-k}})`` as M x M matrices.

    For ``k = 0`` the second projector is zero.
    """
    vp = eigenbasis(D, k, +1)
    pp = vp @ vp.conj().T
    if k == 0:
        return pp, np.zeros_like(pp)
    vm = eigenbasis(D, k, -1)
    return pp, vm @ vm.conj().T


# ---------------------------------------------------------------------------
# spinor space and fields
# ---------------------------------------------------------------------------

class SpinorSpace:
    """Truncated spinor space ``F_0 + ... + F_K`` on S^n with its Dirac matrix.

    Parameters
    ----------
    n : int
        Sphere dimension, ``2 <= n``.
    K : int
        Truncation degree.
    quad_degree : int, optional
        Degree of the working quadrature rule (default ``2K + 6``).
    frame : KillingFrame, optional

    Attributes
    ----------
    rep, frame, quad, bases, dirac, offsets, size (M), omega
    """

    def __init__(self, n: int, K: int = 3, quad_degree: int | None = None,
                 frame: KillingFrame | None = None):
        if n < 2:
            raise InvalidDimensionError(f"sphere dimension must be >= 2, got {n}")
        if K < 0:
            raise InvalidDimensionError(f"truncation degree must be >= 0, got {K}")
        self.n = int(n)
        self.K = int(K)
        self.frame = frame if frame is not None else killing_frame(n)
        self.rep = self.frame.rep
        self.N = self.rep.N
        self.quad_degree = int(quad_degree) if quad_degree is not None else 2 * K + 6
        self.quad = cached_rule(n, self.quad_degree)
        self.bases = [basis_Pk(n, k, self.quad) for k in range(K + 1)]
        self.offsets = _layout(self.bases, self.N)
        self.size = self.offsets[-1]
        self.omega = sphere_area(n)
        self.dirac = assemble_dirac(self.frame, self.bases, self.quad)
        self._D = self.dirac.matrix
        self._DR = None
        self._hcache = {}

    # -- layout -----------------------------------------------------------
    def index(self, k: int, i: int, alpha: int) -> int:
        return self.offsets[k] + i * self.N + alpha

    def block(self, k: int) -> slice:
        return self.dirac.block(k)

    @property
    def real_size(self) -> int:
        return 2 * self.size

    @property
    def DR(self) -> np.ndarray:
        """Realified Dirac matrix (symmetric)."""
        if self._DR is None:
            self._DR = realify_matrix(self._D)
        return self._DR

    def rule(self, degree: int | None = None) -> QuadratureRule:
        return self.quad if degree is None else cached_rule(self.n, degree)

    # -- coefficient constructors ------------------------------------------
    def harmonic_spinor(self, k: int, f, spinor) -> np.ndarray:
        """Coefficients of ``f xi`` with ``f = sum_i f_i h_{k,i}`` and ``xi = sum_alpha s_alpha xi_alpha``."""
        c = np.zeros(self.size, dtype=complex)
        f = np.asarray(f, dtype=float)
        s = np.asarray(spinor, dtype=complex)
        c[self.block(k)] = np.kron(f, s)
        return c

    def grad_action(self, c) -> np.ndarray:
        """Coefficients of ``sum c dh . xi`` i.e. ``(D - n/2) c``."""
        return self._D @ c - (self.n / 2.0) * np.asarray(c)

    def killing(self, spinor) -> np.ndarray:
        """Coefficients of the Killing spinor with frame components ``spinor``."""
        return self.harmonic_spinor(0, [self.omega ** 0.5], spinor)

    # -- evaluation -------------------------------------------------------
    def harmonic_values(self, x) -> np.ndarray:
        """Values of all basis harmonics at ``x``: shape (..., sum_k dim P_k).

        Node arrays of moderate size are memoised by identity, so repeated
        evaluation on a quadrature rule is a single matrix product.
        """
        key = id(x)
        hit = self._hcache.get(key)
        if hit is not None and hit[0] is x:
            return hit[1]
        H = np.concatenate([b.values(x) for b in self.bases], axis=-1)
        if isinstance(x, np.ndarray) and H.size <= HCACHE_LIMIT:
            if len(self._hcache) >= 8:
                self._hcache.pop(next(iter(self._hcache)))
            self._hcache[key] = (x, H)
        return H

    def components(self, c, x) -> np.ndarray:
        """Frame components ``S(x)`` (shape (m, N)) of the field with coefficients ``c``."""
        c = np.asarray(c, dtype=complex)
        H = self.harmonic_values(x)
        return H @ c.reshape(H.shape[-1], self.N)

    def flat_values(self, c, x) -> np.ndarray:
        """Flat-picture values ``u^{(n-1)/2} b(x) S(x)`` of the field at ``x``."""
        y = stereo_inv(x)
        u = conformal_factor(y)
        b = frame_matrix(self.frame, x)
        S = self.components(c, x)
        return (u[..., None] ** ((self.n - 1) / 2.0)) * np.einsum("...ab,...b->...a", b, S)

    def project(self, comps, quad: QuadratureRule | None = None) -> np.ndarray:
        """L^2 projection of frame-component node values onto the truncated basis."""
        quad = self.quad if quad is None else quad
        comps = np.asarray(comps, dtype=complex)
        if comps.shape != (quad.size, self.N):
            raise ShapeError("component array must have shape (nodes, N)")
        H = self.harmonic_values(quad.nodes)
        return ((H * quad.weights[:, None]).T @ comps).reshape(-1)

    def field(self, c) -> "SpinorField":
        return SpinorField(self, np.asarray(c, dtype=complex))

    def hermitian_l2(self, c1, c2) -> complex:
        """Hermitian L^2 product (orthonormal basis)."""
        return complex(np.vdot(c1, c2))


class Field:
    """Protocol for spinor fields sampled pointwise on S^n.

    Subclasses implement :meth:`sample` returning frame components of the
    field and of its Dirac image at the given points.
    """

    space: SpinorSpace

    def sample(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def __add__(self, other):
        return SumField(self, other, 1.0)

    def __sub__(self, other):
        return SumField(self, other, -1.0)

    def project(self, quad: QuadratureRule | None = None):
        """Project onto the truncated basis.

        Returns
        -------
        coeffs : ndarray
        residual : float
            Relative L^2 norm of the part lost by truncation.
        """
        sp = self.space
        quad = sp.quad if quad is None else quad
        S, _ = self.sample(quad.nodes)
        c = sp.project(S, quad)
        total = float(quad.weights @ np.sum(np.abs(S) ** 2, axis=1))
        lost = float(quad.weights @ np.sum(np.abs(S - sp.components(c, quad.nodes)) ** 2, axis=1))
        res = np.sqrt(lost / total) if total > 0 else 0.0
        return c, res


@dataclass
class SpinorField(Field):
    """Field given by coefficients over ``{h_i xi_alpha}``.

    Attributes
    ----------
    space : SpinorSpace
    coeffs : ndarray, shape (M,)
    residual : float
        Truncation residual when the field was obtained by projection.
    meta : dict
        Free-form diagnostics attached by constructors.
    """

    space: SpinorSpace
    coeffs: np.ndarray
    residual: float = field(default=0.0)
    meta: dict = field(default_factory=dict, repr=False)

    def sample(self, x):
        S = self.space.components(self.coeffs, x)
        SD = self.space.components(self.space.dirac.matrix @ self.coeffs, x)
        return S, SD

    def flat(self, x):
        """Flat-picture values at ``x``."""
        return self.space.flat_values(self.coeffs, x)

    def dirac(self) -> "SpinorField":
        return SpinorField(self.space, self.space.dirac.matrix @ self.coeffs)

    def __add__(self, other):
        if isinstance(other, SpinorField):
            return SpinorField(self.space, self.coeffs + other.coeffs)
        return SumField(self, other, 1.0)

    def __sub__(self, other):
        if isinstance(other, SpinorField):
            return SpinorField(self.space, self.coeffs - other.coeffs)
        return SumField(self, other, -1.0)

    def __mul__(self, t):
        return SpinorField(self.space, t * self.coeffs)

    __rmul__ = __mul__


class SumField(Field):
    """``a + s * b`` for two fields on the same space."""

    def __init__(self, a: Field, b: Field, s: complex = 1.0):
        self.space = a.space
        self.a, self.b, self.s = a, b, s

    def sample(self, x):
        Sa, Da = self.a.sample(x)
        Sb, Db = self.b.sample(x)
        return Sa + self.s * Sb, Da + self.s * Db
