"""Spinorial Sobolev functionals, deficit, Euler-Lagrange residuals, distance to M.

With ``p = 2n/(n+1)`` and ``q = 2n/(n-1)`` the three constituent integrals are

    A = int |D psi|^p,    B = int <D psi, psi>,    C = int |psi|^q,

and

    J   = A^{(n+1)/n} / B,
    F   = A^{(n+1)/n} / C^{(n-1)/n},
    J_a = A^{(n+1)/n} / ((1-a) B + a (n/2) omega^{1/n} C^{2/q}),
    deficit = A^{(n+1)/n} - (n/2) omega^{1/n} B.

All integrals are evaluated by quadrature of pointwise values; because
``|D psi|^p`` and ``|psi|^q`` are not polynomial every report carries the
difference between the working rule (degree d) and a refined one (d + 8).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, SingularIntegrandError
from .spinframe import Field, SpinorField, SpinorSpace
from .squad import QuadratureRule, cached_rule

__all__ = [
    "FunctionalReport",
    "constituents",
    "J_functional",
    "F_functional",
    "Ja_functional",
    "deficit",
    "deficit_report",
    "fit_yamabe_constant",
    "el_residual_J",
    "ELResult",
    "el_residual_F",
    "dist_to_M",
    "REFINE_STEP",
]

REFINE_STEP = 8


@dataclass
class FunctionalReport:
    """Value of a functional with its quadrature sensitivity.

    Attributes
    ----------
    value : float
    refinement_delta : float
        ``|value(d) - value(d + 8)|``.
    components : dict
        ``dirac_p`` = int |D psi|^p, ``pairing`` = int <D psi, psi>,
        ``norm_q`` = int |psi|^q at the working degree.
    degree : int
    extra : dict
    """

    value: float
    refinement_delta: float
    components: dict
    degree: int
    extra: dict = field(default_factory=dict)


def _rule(psi: Field, degree) -> QuadratureRule:
    if isinstance(degree, QuadratureRule):
        return degree
    sp = psi.space
    return sp.quad if degree is None else cached_rule(sp.n, int(degree))


def constituents(psi: Field, rule: QuadratureRule) -> dict:
    """The three constituent integrals of ``psi`` with ``rule``."""
    n = psi.space.n
    S, SD = psi.sample(rule.nodes)
    w = rule.weights
    nd = np.sqrt(np.sum(np.abs(SD) ** 2, axis=1))
    ns = np.sqrt(np.sum(np.abs(S) ** 2, axis=1))
    return {
        "dirac_p": float(w @ nd ** (2.0 * n / (n + 1))),
        "pairing": float(w @ np.real(np.sum(np.conj(SD) * S, axis=1))),
        "norm_q": float(w @ ns ** (2.0 * n / (n - 1))),
    }


def _evaluate(psi: Field, degree, fn, name: str, refine: bool = True) -> FunctionalReport:
    rule = _rule(psi, degree)
    comp = constituents(psi, rule)
    val = fn(comp)
    if not refine:
        return FunctionalReport(value=val, refinement_delta=float("nan"), components=comp,
                                degree=rule.degree, extra={"functional": name})
    fine = cached_rule(psi.space.n, rule.degree + REFINE_STEP)
    comp_f = constituents(psi, fine)
    delta = abs(fn(comp_f) - val)
    return FunctionalReport(value=val, refinement_delta=delta, components=comp,
                            degree=rule.degree, extra={"functional": name,
                                                       "components_refined": comp_f})


def _Jval(n):
    def fn(c):
        if not c["pairing"] > 0:
            raise DomainError("J needs int <D psi, psi> > 0")
        return c["dirac_p"] ** ((n + 1) / n) / c["pairing"]
    return fn


def _Fval(n):
    def fn(c):
        if not c["norm_q"] > 0:
            raise DomainError("F is undefined for the zero field")
        return c["dirac_p"] ** ((n + 1) / n) / c["norm_q"] ** ((n - 1) / n)
    return fn


def _Javal(n, omega, a):
    def fn(c):
        den = (1.0 - a) * c["pairing"] + a * (n / 2.0) * omega ** (1.0 / n) * c["norm_q"] ** ((n - 1) / n)
        if not den > 0:
            raise DomainError("J_a needs a positive denominator")
        return c["dirac_p"] ** ((n + 1) / n) / den
    return fn


def J_functional(psi: Field, degree=None, refine: bool = True) -> FunctionalReport:
    """Spinorial Sobolev quotient ``(int |D psi|^p)^{(n+1)/n} / int <D psi, psi>``.

    Parameters
    ----------
    psi : Field
        Any field (coefficient or pointwise).
    degree : int or QuadratureRule, optional
        Working quadrature (default: the space's rule).
    refine : bool
        Also evaluate at ``degree + REFINE_STEP`` to fill ``refinement_delta``
        (``nan`` when False; the refined rule is expensive for n = 5).

    Raises
    ------
    DomainError
        If ``int <D psi, psi> <= 0``.
    """
    return _evaluate(psi, degree, _Jval(psi.space.n), "J", refine)


def F_functional(psi: Field, degree=None, refine: bool = True) -> FunctionalReport:
    """``(int |D psi|^p)^{(n+1)/n} / (int |psi|^q)^{(n-1)/n}`` (``refine`` as in J)."""
    return _evaluate(psi, degree, _Fval(psi.space.n), "F", refine)


def Ja_functional(psi: Field, a: float, degree=None, refine: bool = True) -> FunctionalReport:
    """Interpolated quotient with denominator
    ``(1-a) int <D psi, psi> + a (n/2) omega^{1/n} ||psi||_q^2``."""
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"interpolation parameter must lie in [0, 1], got {a}")
    sp = psi.space
    rep = _evaluate(psi, degree, _Javal(sp.n, sp.omega, a), "J_a", refine)
    rep.extra["a"] = a
    return rep


def deficit_report(psi: Field, degree=None, refine: bool = True) -> FunctionalReport:
    """Sobolev deficit ``A^{(n+1)/n} - (n/2) omega^{1/n} B`` with refinement delta."""
    sp = psi.space
    n, om = sp.n, sp.omega

    def fn(c):
        return c["dirac_p"] ** ((n + 1) / n) - (n / 2.0) * om ** (1.0 / n) * c["pairing"]

    return _evaluate(psi, degree, fn, "deficit", refine)


def deficit(psi: Field, degree=None) -> float:
    """Sobolev deficit (nonnegative, zero exactly on the optimiser family)."""
    sp = psi.space
    n, om = sp.n, sp.omega
    c = constituents(psi, _rule(psi, degree))
    return c["dirac_p"] ** ((n + 1) / n) - (n / 2.0) * om ** (1.0 / n) * c["pairing"]


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals
# ---------------------------------------------------------------------------

def _l2(rule, v) -> float:
    return float(np.sqrt(rule.weights @ np.sum(np.abs(v) ** 2, axis=1)))


def _fit(rule, target, model) -> float:
    num = rule.weights @ np.real(np.sum(np.conj(model) * target, axis=1))
    den = rule.weights @ np.sum(np.abs(model) ** 2, axis=1)
    return float(num / den)


def fit_yamabe_constant(psi: Field, degree=None) -> float:
    """Least-squares ``mu`` in ``D psi = mu |psi|^{2/(n-1)} psi``."""
    rule = _rule(psi, degree)
    n = psi.space.n
    S, SD = psi.sample(rule.nodes)
    model = (np.linalg.norm(S, axis=1) ** (2.0 / (n - 1)))[:, None] * S
    return _fit(rule, SD, model)


def el_residual_J(psi: Field, mu: float | None = None, degree=None) -> float:
    """Relative residual of ``D psi = mu |psi|^{2/(n-1)} psi``.

    ``||D psi - mu |psi|^{2/(n-1)} psi||_2 / ||D psi||_2`` at the nodes; with
    ``mu=None`` the constant is fitted by least squares first.
    """
    rule = _rule(psi, degree)
    n = psi.space.n
    S, SD = psi.sample(rule.nodes)
    model = (np.linalg.norm(S, axis=1) ** (2.0 / (n - 1)))[:, None] * S
    if mu is None:
        mu = _fit(rule, SD, model)
    return _l2(rule, SD - mu * model) / _l2(rule, SD)


@dataclass
class ELResult:
    """Residual of the F Euler-Lagrange equation.

    Attributes
    ----------
    residual : float
        Relative L^2 residual.
    mu : float
        Fitted (or supplied) constant.
    truncation_loss : float
        Relative L^2 norm of ``|D psi|^{-2/(n+1)} D psi`` lost by projection.
    """

    residual: float
    mu: float
    truncation_loss: float


def el_residual_F(psi: Field, mu: float | None = None, degree=None,
                  floor: float = 1e-10) -> ELResult:
    """Residual of ``D(|D psi|^{-2/(n+1)} D psi) = mu |psi|^{2/(n-1)} psi``.

    The pointwise field ``eta = |D psi|^{-2/(n+1)} D psi`` is projected onto
    the truncated basis, the Dirac matrix applied, and the result compared at
    the nodes with ``mu |psi|^{2/(n-1)} psi``; ``mu=None`` fits the constant.

    Raises
    ------
    SingularIntegrandError
        If ``|D psi|`` drops below ``floor`` times its maximum at a node.
    """
    sp: SpinorSpace = psi.space
    rule = _rule(psi, degree)
    n = sp.n
    S, SD = psi.sample(rule.nodes)
    nd = np.linalg.norm(SD, axis=1)
    if nd.min() <= floor * nd.max():
        raise SingularIntegrandError("|D psi| vanishes at a quadrature node")
    eta = (nd ** (-2.0 / (n + 1)))[:, None] * SD
    c = sp.project(eta, rule)
    loss = _l2(rule, eta - sp.components(c, rule.nodes)) / _l2(rule, eta)
    Deta = sp.components(sp.dirac.matrix @ c, rule.nodes)
    model = (np.linalg.norm(S, axis=1) ** (2.0 / (n - 1)))[:, None] * S
    if mu is None:
        mu = _fit(rule, Deta, model)
    return ELResult(residual=_l2(rule, Deta - mu * model) / _l2(rule, Deta), mu=float(mu),
                    truncation_loss=loss)


# ---------------------------------------------------------------------------
# distance to the optimiser family
# ---------------------------------------------------------------------------

def _family_operator(sp: SpinorSpace, rule: QuadratureRule, b):
    """Pointwise map ``a -> D(optimiser(b, a))`` in frame components.

    Returns ``(c, U)`` with ``D phi = c[:, None] * (U @ a)`` where ``U`` is
    unitary at every node and ``c = (n/2) rho^{(n+1)/2}``.
    """
    from .conformal import MoebiusParam, PulledBackField

    p = MoebiusParam(np.asarray(b, dtype=float))
    pb = PulledBackField.__new__(PulledBackField)
    pb.space, pb.param = sp, p
    _, rho, U = pb.transport(rule.nodes)
    return (sp.n / 2.0) * rho ** ((sp.n + 1) / 2.0), U


def _best_spinor(sp, rule, target, c, U, iters: int = 60):
    """Minimise ``int |target - c U a|^p`` over ``a`` by reweighted least squares.

    Because ``U`` is unitary the weighted normal equations are diagonal.
    """
    p = 2.0 * sp.n / (sp.n + 1)
    w = rule.weights
    Ut = np.einsum("xba,xb->xa", np.conj(U), target)  # U^H target
    scale = np.sqrt(w @ np.sum(np.abs(target) ** 2, axis=1) / w.sum()) + 1e-300
    eps = 1e-9 * scale
    omega = w.copy()
    a = None
    for _ in range(iters):
        a_new = (omega * c) @ Ut / (omega @ (c * c))
        r = target - c[:, None] * np.einsum("xab,b->xa", U, a_new)
        rn = np.linalg.norm(r, axis=1)
        omega = w * (rn * rn + eps * eps) ** ((p - 2.0) / 2.0)
        if a is not None and np.linalg.norm(a_new - a) <= 1e-13 * (np.linalg.norm(a_new) + 1e-300):
            a = a_new
            break
        a = a_new
    r = target - c[:, None] * np.einsum("xab,b->xa", U, a)
    val = (w @ np.linalg.norm(r, axis=1) ** p) ** (2.0 / p)
    return float(val), a


def dist_to_M(psi: Field, multistart: int = 8, degree=None, seed: int = 0,
              maxiter: int = 4000, bmax: float = 0.95):
    """Upper bound for ``inf_phi (int |D(psi - phi)|^p)^{(n+1)/n}`` over the optimiser family.

    The family is parametrised by ``(b, a)`` (Möbius parameter and Killing
    spinor components).  For fixed ``b`` the inner problem over ``a`` is
    convex and solved by reweighted least squares; the outer search over
    ``b`` is Nelder-Mead from ``multistart`` points, the first being ``b = 0``
    (whose inner solve starts from the projection of ``psi`` onto E_0).

    Returns
    -------
    distance : float
        Best objective value (an upper bound on the infimum).
    params : dict
        ``b``, ``components`` (frame components of the Killing spinor),
        ``phi0`` (the generating constant), ``lam``, ``y0``, ``starts``.
    """
    sp = psi.space
    rule = _rule(psi, degree)
    _, target = psi.sample(rule.nodes)
    n1 = sp.n + 1
    cache = {}

    def obj(b):
        b = np.asarray(b, dtype=float)
        if not np.linalg.norm(b) < bmax:
            return 1e30 + np.linalg.norm(b)
        key = b.tobytes()
        if key not in cache:
            c, U = _family_operator(sp, rule, b)
            cache[key] = _best_spinor(sp, rule, target, c, U)
        return cache[key][0]

    rng = np.random.default_rng(seed)
    starts = [np.zeros(n1)]
    while len(starts) < max(1, multistart):
        v = rng.standard_normal(n1)
        starts.append(0.5 * rng.uniform() ** (1.0 / n1) * v / np.linalg.norm(v))
    best = (np.inf, None)
    for b0 in starts:
        simplex = np.vstack([b0] + [b0 + 0.1 * e for e in np.eye(n1)])
        res = minimize(obj, b0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-11, "fatol": 1e-20,
                                "maxiter": maxiter, "maxfev": 2 * maxiter, "adaptive": True})
        if res.fun < best[0]:
            best = (float(res.fun), np.asarray(res.x))
    from .conformal import MoebiusParam

    b = best[1]
    val, a = cache[b.tobytes()] if b.tobytes() in cache else (obj(b), cache[b.tobytes()][1])
    lam, y0 = MoebiusParam(b).similarity()
    phi0 = sp.frame.phis @ a
    return best[0], {"b": b, "components": a, "phi0": phi0, "lam": lam, "y0": y0,
                     "starts": len(starts)}
