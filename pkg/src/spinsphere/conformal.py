"""Möbius transformations, the optimiser family and flat-picture bubbles.

Möbius maps of S^n
------------------
For ``b`` in the open unit ball of R^{n+1}

    Xi_b(x) = (x + (mu <x,b> + nu) b) / (nu (1 + <x,b>)),
    nu = (1 - |b|^2)^{-1/2},   mu = (nu - 1) / |b|^2   (mu -> 1/2 as b -> 0),

is a conformal diffeomorphism of S^n with metric factor
``(1 - |b|^2) / (1 + <x,b>)^2``.

Optimiser family
----------------
The optimisers of the spinorial Sobolev quotient are the weighted pullbacks of
-1/2-Killing spinors.  In the flat picture they are the bubbles

    lambda^{-(n-1)/2} psi^-((y - y0) / lambda),
    psi^-(z) = (2 / (1 + |z|^2))^{n/2} (1 - z.) Phi_0,

and the parameter ``b`` corresponds to the similarity ``z -> lambda z + y0``
with

    y0 = -b' / (1 - b_{n+1}),   lambda = sqrt(1 - |b|^2) / (1 - b_{n+1}),

(``b'`` = first n components), which is the unique dilation+translation whose
induced sphere map has the same conformal factor as ``Xi_b``; the two maps
differ by an isometry of S^n, which permutes the Killing spinors, so both
parametrise the same family.  Fields are pulled back through this similarity
with the conformal weight, so pullbacks are exact pointwise (no truncation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clifford import clifford_matrix, real_inner
from .errors import ConstraintError, DomainError, ShapeError
from .spinframe import Field, SpinorField, SpinorSpace, frame_matrix
from .squad import conformal_factor, stereo, stereo_inv

__all__ = [
    "MoebiusParam",
    "BubbleParam",
    "moebius_map",
    "moebius_differential",
    "moebius_factor",
    "PulledBackField",
    "BubbleField",
    "conformal_pullback",
    "killing_field",
    "optimizer_field",
    "bubble_eval",
    "bubble_dirac",
    "mtilde_constraints",
    "mtilde_partner",
    "mtilde_field",
    "mtilde_counterexample",
    "counterexample_length_defect",
]

@dataclass(frozen=True)
class MoebiusParam:
    """Möbius parameter ``b`` with ``|b| < 1``."""

    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 1:
            raise ShapeError("Möbius parameter must be a vector")
        if not np.linalg.norm(b) < 1.0:
            raise DomainError(f"Möbius parameter needs |b| < 1, got |b| = {np.linalg.norm(b)}")
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.b.shape[0] - 1

    @property
    def nu(self) -> float:
        return 1.0 / np.sqrt(1.0 - self.b @ self.b)

    @property
    def mu(self) -> float:
        # (nu - 1)/|b|^2 rewritten without cancellation near b = 0
        r = np.sqrt(1.0 - float(self.b @ self.b))
        return 1.0 / (r * (1.0 + r))

    def similarity(self):
        """``(lambda, y0)`` of the flat similarity ``z -> lambda z + y0``."""
        b = self.b
        d = 1.0 - b[-1]
        return np.sqrt(1.0 - b @ b) / d, -b[:-1] / d

    @classmethod
    def from_similarity(cls, lam: float, y0) -> "MoebiusParam":
        y0 = np.asarray(y0, dtype=float)
        if lam <= 0:
            raise DomainError("dilation factor must be positive")
        R = lam * lam + y0 @ y0
        bl = (R - 1.0) / (R + 1.0)
        return cls(np.concatenate([-y0 * (1.0 - bl), [bl]]))

    def inverse(self) -> "MoebiusParam":
        """Parameter of the inverse similarity."""
        lam, y0 = self.similarity()
        return MoebiusParam.from_similarity(1.0 / lam, -y0 / lam)

    @classmethod
    def zero(cls, n: int) -> "MoebiusParam":
        return cls(np.zeros(n + 1))


def moebius_map(p: MoebiusParam, x) -> np.ndarray:
    """Apply ``Xi_b`` to point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    b = p.b
    xb = x @ b
    return (x + (p.mu * xb + p.nu)[..., None] * b) / (p.nu * (1.0 + xb))[..., None]


def moebius_differential(p: MoebiusParam, x) -> np.ndarray:
    """Ambient derivative of the formula for ``Xi_b``, shape (..., n+1, n+1)."""
    x = np.asarray(x, dtype=float)
    b = p.b
    xb = x @ b
    num = x + (p.mu * xb + p.nu)[..., None] * b
    den = p.nu * (1.0 + xb)
    eye = np.eye(b.shape[0])
    dnum = eye + p.mu * b[:, None] * b[None, :]
    # d(num/den) = dnum/den - num (x) db^T * nu / den^2
    return dnum / den[..., None, None] - (num[..., :, None] * (p.nu * b)[None, :]) / (den ** 2)[..., None, None]


def moebius_factor(p: MoebiusParam, x) -> np.ndarray:
    """Metric factor ``(1 - |b|^2) / (1 + <x,b>)^2`` of ``Xi_b``."""
    x = np.asarray(x, dtype=float)
    return (1.0 - p.b @ p.b) / (1.0 + x @ p.b) ** 2


# ---------------------------------------------------------------------------
# pointwise fields
# ---------------------------------------------------------------------------

class PulledBackField(Field):
    """Conformally weighted pullback of ``base`` through the similarity of ``p``.

    In the flat picture ``psi_new(y) = lambda^{-(n-1)/2} psi((y - y0)/lambda)``;
    the Dirac image transforms with weight ``lambda^{-(n+1)/2}``, so both are
    available pointwise without truncation.
    """

    def __init__(self, base: Field, p: MoebiusParam):
        self.space = base.space
        if p.n != self.space.n:
            raise ShapeError("Möbius parameter dimension does not match the space")
        self.base = base
        self.param = p

    def transport(self, x):
        """Return ``(x', rho, U)``: source points, conformal factor, frame change."""
        lam, y0 = self.param.similarity()
        y = stereo_inv(x)
        z = (y - y0) / lam
        xs = stereo(z)
        rho = conformal_factor(z) / (lam * conformal_factor(y))
        fr = self.space.frame
        U = np.conj(np.swapaxes(frame_matrix(fr, x), -1, -2)) @ frame_matrix(fr, xs)
        return xs, rho, U

    def sample(self, x):
        n = self.space.n
        xs, rho, U = self.transport(x)
        S, SD = self.base.sample(xs)
        S = (rho ** ((n - 1) / 2.0))[:, None] * np.einsum("xab,xb->xa", U, S)
        SD = (rho ** ((n + 1) / 2.0))[:, None] * np.einsum("xab,xb->xa", U, SD)
        return S, SD

    def as_spinor_field(self, quad=None) -> SpinorField:
        c, res = self.project(quad)
        return SpinorField(self.space, c, residual=res)


def conformal_pullback(psi: Field, p: MoebiusParam) -> PulledBackField:
    """Weighted conformal pullback of ``psi`` (exact pointwise sampler).

    Use :meth:`Field.project` for truncated coefficients and the truncation
    residual.
    """
    return PulledBackField(psi, p)


def _components_of(space: SpinorSpace, phi0) -> np.ndarray:
    """Frame components of the Killing spinor generated by the constant ``phi0``."""
    phi0 = np.asarray(phi0, dtype=complex)
    if phi0.shape != (space.N,):
        raise ShapeError(f"spinor constant must have length {space.N}")
    # Phi_0 = sum_a s_a Phi_a with Phi^H Phi = I/2
    return 2.0 * space.frame.phis.conj().T @ phi0


def killing_field(space: SpinorSpace, phi0) -> SpinorField:
    """Killing spinor ``u^{n/2}(1 - y.)Phi_0`` as a coefficient field."""
    return SpinorField(space, space.killing(_components_of(space, phi0)))


def optimizer_field(space: SpinorSpace, p: MoebiusParam, phi0) -> PulledBackField:
    """Member of the optimiser family with Möbius parameter ``p`` and constant ``phi0``.

    ``|phi0|^2 = 1/2`` gives a unit-length Killing spinor at ``b = 0`` and a
    solution of ``D psi = (n/2)|psi|^{2/(n-1)} psi`` for every ``b``.
    The returned field is sampled exactly; ``.as_spinor_field()`` projects it
    onto the truncated basis and records the truncation residual.
    """
    return PulledBackField(killing_field(space, phi0), p)


# ---------------------------------------------------------------------------
# flat bubbles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BubbleParam:
    """Flat bubble ``(2 lam/(lam^2+|y-y0|^2))^{n/2} (sqrt(lam) -+ (y-y0)/sqrt(lam) .) Phi0``.

    ``sign = -1`` gives the (n/2)|psi|^{2/(n-1)} solutions, ``sign = +1`` the
    ones with the opposite sign.
    """

    phi0: np.ndarray
    sign: int = -1
    y0: np.ndarray | None = None
    lam: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise DomainError("bubble scale must be positive")
        if self.sign not in (-1, 1):
            raise DomainError("bubble sign must be -1 or +1")
        object.__setattr__(self, "phi0", np.asarray(self.phi0, dtype=complex))


def _bubble_parts(p: BubbleParam, rep, y):
    y = np.asarray(y, dtype=float)
    y0 = np.zeros(y.shape[-1]) if p.y0 is None else np.asarray(p.y0, dtype=float)
    d = y - y0
    r2 = np.sum(d * d, axis=-1)
    scale = 2.0 * p.lam / (p.lam ** 2 + r2)
    m = np.sqrt(p.lam) * np.eye(rep.N) + p.sign * clifford_matrix(rep, d) / np.sqrt(p.lam)
    val = (scale ** (rep.n / 2.0))[..., None] * np.einsum("...ab,b->...a", m, p.phi0)
    return val, scale


def bubble_eval(p: BubbleParam, y, rep) -> np.ndarray:
    """Flat value of the bubble at ``y`` (shape (..., N))."""
    return _bubble_parts(p, rep, y)[0]


def bubble_dirac(p: BubbleParam, y, rep) -> np.ndarray:
    """Closed-form flat Dirac image ``-sign (n/2) (2 lam/(lam^2+r^2)) psi``."""
    val, scale = _bubble_parts(p, rep, y)
    return (-p.sign * rep.n / 2.0) * scale[..., None] * val


class BubbleField(Field):
    """Sum of flat bubbles, viewed as a field on S^n."""

    def __init__(self, space: SpinorSpace, bubbles):
        self.space = space
        self.bubbles = list(bubbles)

    def sample(self, x):
        n = self.space.n
        y = stereo_inv(x)
        u = conformal_factor(y)
        val = sum(bubble_eval(b, y, self.space.rep) for b in self.bubbles)
        dval = sum(bubble_dirac(b, y, self.space.rep) for b in self.bubbles)
        bh = np.conj(np.swapaxes(frame_matrix(self.space.frame, x), -1, -2))
        S = np.einsum("xab,xb->xa", bh, (u ** (-(n - 1) / 2.0))[:, None] * val)
        SD = np.einsum("xab,xb->xa", bh, (u ** (-(n + 1) / 2.0))[:, None] * dval)
        return S, SD


# ---------------------------------------------------------------------------
# the solution set M~ and the counterexample
# ---------------------------------------------------------------------------

def mtilde_constraints(rep, phi0) -> np.ndarray:
    """Real-linear constraint matrix ``A`` with ``A realify(Phi1) = 0`` iff
    ``Re<Phi0, Phi1> = 0`` and ``Re<Phi0, e_i . Phi1> = 0`` for all i."""
    phi0 = np.asarray(phi0, dtype=complex)
    # Re<a, v> = Re(a).Re(v) + Im(a).Im(v) and <Phi0, g Phi1> = <g^H Phi0, Phi1>
    rows = [phi0] + [g.conj().T @ phi0 for g in rep.gammas]
    return np.array([np.concatenate([r.real, r.imag]) for r in rows])


def mtilde_partner(rep, phi0, rng=None) -> np.ndarray:
    """A random ``Phi1`` satisfying the pairing constraints (zero if none exists)."""
    from scipy.linalg import null_space

    A = mtilde_constraints(rep, phi0)
    ns = null_space(A)
    if ns.shape[1] == 0:
        return np.zeros(rep.N, dtype=complex)
    rng = np.random.default_rng(rng)
    v = ns @ rng.standard_normal(ns.shape[1])
    v = v / np.linalg.norm(v) * np.linalg.norm(phi0)
    return v[: rep.N] + 1j * v[rep.N:]


def _partner_defect(space: SpinorSpace, phi0, phi1, y) -> float:
    rep = space.rep
    val = (np.einsum("...ab,b->...a", np.eye(rep.N) - clifford_matrix(rep, y), phi0)
           + np.einsum("...ab,b->...a", np.eye(rep.N) + clifford_matrix(rep, y), phi1))
    lhs = np.sum(np.abs(val) ** 2, axis=-1)
    rhs = (1.0 + np.sum(y * y, axis=-1)) * (np.vdot(phi0, phi0).real + np.vdot(phi1, phi1).real)
    return float(np.max(np.abs(lhs - rhs) / rhs))


def mtilde_field(space: SpinorSpace, phi0, phi1, tol: float = 1e-12) -> SpinorField:
    """``psi^-_{Phi0} + psi^+_{Phi1}`` pulled back to S^n and projected.

    The constant-length identity ``|(1-y)Phi0 + (1+y)Phi1|^2 =
    (1+|y|^2)(|Phi0|^2+|Phi1|^2)`` is verified at the quadrature nodes and
    recorded in ``field.meta['length_identity_defect']``.

    Raises
    ------
    ConstraintError
        If the pairing constraints are violated by more than ``tol``.
    """
    phi0 = np.asarray(phi0, dtype=complex)
    phi1 = np.asarray(phi1, dtype=complex)
    A = mtilde_constraints(space.rep, phi0)
    viol = float(np.max(np.abs(A @ np.concatenate([phi1.real, phi1.imag]))))
    if viol > tol * max(1.0, np.linalg.norm(phi0) * np.linalg.norm(phi1)):
        raise ConstraintError(f"pairing constraints violated by {viol:.3e}")
    bf = BubbleField(space, [BubbleParam(phi0, -1), BubbleParam(phi1, +1)])
    c, res = bf.project()
    f = SpinorField(space, c, residual=res)
    f.meta = {"length_identity_defect": _partner_defect(space, phi0, phi1, stereo_inv(space.quad.nodes)),
              "constraint_violation": viol}
    return f


def counterexample_length_defect(space: SpinorSpace, phi0, y) -> float:
    """Max relative deviation of ``|(1-y)Phi0 + (1+y)e_1 Phi0|^2`` from
    ``2(1+|y|^2)|Phi0|^2 - 4 y_1 |Phi0|^2``."""
    rep = space.rep
    phi0 = np.asarray(phi0, dtype=complex)
    phi1 = rep.gammas[0] @ phi0
    y = np.asarray(y, dtype=float)
    val = (np.einsum("...ab,b->...a", np.eye(rep.N) - clifford_matrix(rep, y), phi0)
           + np.einsum("...ab,b->...a", np.eye(rep.N) + clifford_matrix(rep, y), phi1))
    lhs = np.sum(np.abs(val) ** 2, axis=-1)
    p2 = np.vdot(phi0, phi0).real
    rhs = 2.0 * (1.0 + np.sum(y * y, axis=-1)) * p2 - 4.0 * y[..., 0] * p2
    return float(np.max(np.abs(lhs - rhs) / (2.0 * (1.0 + np.sum(y * y, axis=-1)) * p2)))


def mtilde_counterexample(space: SpinorSpace, phi0, degree: int | None = None):
    """F of ``psi^-_{Phi0} + psi^+_{e_1 Phi0}`` and its margin below ``(n^2/4) omega^{2/n}``.

    Returns
    -------
    FunctionalReport
        ``extra`` holds ``margin``, ``relative_margin``, ``counterexample_length_defect`` and the
        projection residual of the field.
    """
    from .functionals import F_functional

    phi0 = np.asarray(phi0, dtype=complex)
    phi1 = space.rep.gammas[0] @ phi0
    bf = BubbleField(space, [BubbleParam(phi0, -1), BubbleParam(phi1, +1)])
    c, res = bf.project()
    f = SpinorField(space, c, residual=res)
    rep = F_functional(f, degree=degree)
    n, om = space.n, space.omega
    target = n * n / 4.0 * om ** (2.0 / n)
    rep.extra.update({
        "target": target,
        "margin": target - rep.value,
        "relative_margin": (target - rep.value) / target,
        "counterexample_length_defect": counterexample_length_defect(space, phi0, stereo_inv(space.quad.nodes)),
        "projection_residual": res,
    })
    return rep
