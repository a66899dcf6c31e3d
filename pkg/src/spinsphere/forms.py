"""Second-variation quadratic forms at a Killing spinor and their spectral analysis.

All forms are real quadratic (they contain squares of real pairings), so they
are assembled as real symmetric matrices on the realified coefficient space
``r = [Re c, Im c]`` of dimension ``2M``.  The building blocks are

* ``DR``   realified Dirac matrix: ``int <D phi, phi> = r^T DR r`` and
  ``int |D phi|^2 = r^T DR^2 r`` (orthonormal basis);
* ``BtWB`` Gram of the node-evaluation map ``B`` of the scalar ``<xi, phi>``:
  ``int <xi, phi>^2 = r^T BtWB r``;
* ``m``    the vector with ``int <xi, phi> = m^T r``.

With these,

    S   = (2/n) DR^2 - 4/(n(n+1)) DR BtWB DR - DR + n/((n+1) omega) m m^T
    G   = S without the rank-one term
    G2  = (2/n) DR^2 - 4/(n(n+1)) DR BtWB DR - n/(n-1) BtWB - (n/2) I
    G_a = (2/n) DR^2 - 4/(n(n+1)) DR BtWB DR - a n/(n-1) BtWB - a (n/2) I - (1-a) DR

for a unit Killing spinor ``xi``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, null_space

from .errors import DomainError, InvalidDimensionError, ShapeError, TruncationError
from .spinframe import SpinorSpace, eigenbasis, realify, realify_basis

__all__ = [
    "FormMatrix",
    "SubspaceBasis",
    "KillingBase",
    "killing_base",
    "pairing_blocks",
    "assemble_S",
    "assemble_G",
    "assemble_G2",
    "assemble_Ga",
    "subspace",
    "q_family",
    "span",
    "direct_sum",
    "complement",
    "intersect_complement",
    "crossing_max",
    "CrossingResult",
    "spectral_gap",
    "GapResult",
    "index_nullity",
    "IndexResult",
    "index_nullity_sweep",
    "scan_Ja",
    "ScanResult",
    "interpolation_direction",
    "interpolation_closed_form",
    "crossing_bound",
    "gap_constant_c1",
    "SensitivityWarning",
]

ZERO_TOL = 1e-7


class SensitivityWarning(UserWarning):
    """An eigenvalue sits close to the zero-classification boundary."""


# ---------------------------------------------------------------------------
# base point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KillingBase:
    """Unit Killing spinor ``xi`` on a truncated space.

    Attributes
    ----------
    space : SpinorSpace
    components : ndarray, shape (N,)
        Frame components ``a`` (``|a| = 1`` so ``|xi| = 1`` pointwise).
    coeffs : ndarray, shape (M,)
        Coefficients of ``xi``.
    """

    space: SpinorSpace
    components: np.ndarray
    coeffs: np.ndarray

    @property
    def radial(self) -> np.ndarray:
        """Unit real vector along ``R xi``."""
        r = realify(self.coeffs)
        return r / np.linalg.norm(r)


def killing_base(space: SpinorSpace, components=None) -> KillingBase:
    """Unit Killing spinor with the given frame components (default ``e_0``)."""
    if components is None:
        components = np.zeros(space.N, dtype=complex)
        components[0] = 1.0
    a = np.asarray(components, dtype=complex)
    if a.shape != (space.N,):
        raise ShapeError(f"Killing spinor components must have length {space.N}")
    nrm = np.linalg.norm(a)
    if nrm == 0:
        raise DomainError("Killing spinor must be nonzero")
    a = a / nrm
    return KillingBase(space=space, components=a, coeffs=space.killing(a))


def _as_base(space: SpinorSpace, xi) -> KillingBase:
    if isinstance(xi, KillingBase):
        return xi
    return killing_base(space, xi)


# ---------------------------------------------------------------------------
# form container and building blocks
# ---------------------------------------------------------------------------

@dataclass
class FormMatrix:
    """Real symmetric matrix of a quadratic form on the realified space.

    Attributes
    ----------
    matrix : ndarray, shape (2M, 2M)
    name : str
        One of ``"S"``, ``"G"``, ``"G2"``, ``"Ga"``.
    base : KillingBase
    domain : ndarray or None
        Orthonormal basis (columns) of the subspace on which the form is
        meant to be analysed (``None`` means the whole space).
    meta : dict
    """

    matrix: np.ndarray
    name: str
    base: KillingBase
    domain: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def space(self) -> SpinorSpace:
        return self.base.space

    def value(self, r) -> float:
        """Quadratic value ``r^T A r`` for a realified coefficient vector."""
        r = np.asarray(r, dtype=float)
        return float(r @ self.matrix @ r)

    def value_of(self, coeffs) -> float:
        """Quadratic value on complex coefficients."""
        return self.value(realify(coeffs))

    def restrict(self, basis) -> np.ndarray:
        """Matrix of the form in the (orthonormal) basis ``basis``."""
        P = basis.vectors if isinstance(basis, SubspaceBasis) else np.asarray(basis)
        return P.T @ self.matrix @ P

    def symmetry_defect(self) -> float:
        return float(np.abs(self.matrix - self.matrix.T).max())

    def block(self, k: int, j: int | None = None) -> np.ndarray:
        """Sub-matrix between the realified degree blocks ``F_k`` and ``F_j``."""
        j = k if j is None else j
        ik, ij = _real_block(self.space, k), _real_block(self.space, j)
        return self.matrix[np.ix_(ik, ij)]


def _real_block(space: SpinorSpace, k: int) -> np.ndarray:
    blk = np.arange(space.offsets[k], space.offsets[k + 1])
    return np.concatenate([blk, blk + space.size])


@dataclass(frozen=True)
class PairingBlocks:
    """``BtWB`` and ``m`` for a base spinor (see module docstring)."""

    BtWB: np.ndarray
    m: np.ndarray


def pairing_blocks(space: SpinorSpace, xi) -> PairingBlocks:
    """Assemble ``B^T W B`` and ``m = B^T w`` for the scalar ``<xi, phi>``.

    ``B[x, (Re, g, alpha)] = h_g(x) Re a_alpha`` and
    ``B[x, (Im, g, alpha)] = h_g(x) Im a_alpha``; the Gram factorises through
    the quadrature Gram ``H^T W H`` of the harmonics, which is computed by
    quadrature (and equals the identity for an exact rule).
    """
    base = _as_base(space, xi)
    q = space.quad
    q.require(2 * space.K)
    H = np.concatenate([b.values(q.nodes) for b in space.bases], axis=1)
    Hg = (H * q.weights[:, None]).T @ H
    hm = q.weights @ H
    a = base.components
    v = np.concatenate([a.real, a.imag])  # weights of (Re c_alpha, Im c_alpha)
    N = space.N
    # realified index (part, g, alpha) -> part * M + g * N + alpha
    BtWB = np.zeros((2, Hg.shape[0], N, 2, Hg.shape[0], N))
    for p in range(2):
        for s in range(2):
            BtWB[p, :, :, s, :, :] = np.einsum("gh,a,b->gahb", Hg, v[p * N:(p + 1) * N],
                                               v[s * N:(s + 1) * N])
    size = 2 * space.size
    m = np.concatenate([np.kron(hm, v[:N]), np.kron(hm, v[N:])])
    return PairingBlocks(BtWB=BtWB.reshape(size, size), m=m)


def _common(space: SpinorSpace, pb: PairingBlocks):
    n = space.n
    DR = space.DR
    return DR, (2.0 / n) * (DR @ DR) - (4.0 / (n * (n + 1))) * (DR @ pb.BtWB @ DR)


def _sym(a):
    return 0.5 * (a + a.T)


def _check_K(space: SpinorSpace, kmin: int):
    if space.K < kmin:
        raise TruncationError(f"truncation degree K = {space.K} < {kmin}")


def assemble_S(space: SpinorSpace, xi=None) -> FormMatrix:
    """Second variation form ``S`` of J at the unit Killing spinor ``xi``.

    Raises
    ------
    TruncationError
        If ``K < 2``.
    """
    _check_K(space, 2)
    base = _as_base(space, xi)
    pb = pairing_blocks(space, base)
    DR, core = _common(space, pb)
    n = space.n
    mat = core - DR + (n / ((n + 1) * space.omega)) * np.outer(pb.m, pb.m)
    return FormMatrix(_sym(mat), "S", base, meta={"pairing": pb})


def assemble_G(space: SpinorSpace, xi=None) -> FormMatrix:
    """``S`` without the rank-one term (equal to S where ``int <xi, phi> = 0``)."""
    _check_K(space, 2)
    base = _as_base(space, xi)
    pb = pairing_blocks(space, base)
    DR, core = _common(space, pb)
    return FormMatrix(_sym(core - DR), "G", base, meta={"pairing": pb})


def assemble_G2(space: SpinorSpace, xi=None) -> FormMatrix:
    """Second variation of F at ``xi``; the domain excludes the radial line ``R xi``."""
    _check_K(space, 2)
    base = _as_base(space, xi)
    pb = pairing_blocks(space, base)
    DR, core = _common(space, pb)
    n = space.n
    mat = core - (n / (n - 1.0)) * pb.BtWB - (n / 2.0) * np.eye(DR.shape[0])
    dom = null_space(base.radial[None, :])
    return FormMatrix(_sym(mat), "G2", base, domain=dom, meta={"pairing": pb, "radial_excluded": True})


def assemble_Ga(space: SpinorSpace, a: float, xi=None) -> FormMatrix:
    """Interpolated form ``G_a`` (``a = 0`` gives ``G``).

    Raises
    ------
    DomainError
        If ``a`` is outside ``[0, 1]``.
    """
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"interpolation parameter must lie in [0, 1], got {a}")
    _check_K(space, 2)
    base = _as_base(space, xi)
    pb = pairing_blocks(space, base)
    DR, core = _common(space, pb)
    n = space.n
    mat = (core - a * (n / (n - 1.0)) * pb.BtWB - a * (n / 2.0) * np.eye(DR.shape[0])
           - (1.0 - a) * DR)
    return FormMatrix(_sym(mat), "Ga", base, meta={"pairing": pb, "a": a})


# ---------------------------------------------------------------------------
# subspaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal real basis (columns of ``vectors``) of a labelled subspace."""

    label: str
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.T


def span(label: str, vectors, rtol: float = 1e-10) -> SubspaceBasis:
    """Orthonormal basis of the column span of ``vectors`` (rank-revealing SVD)."""
    V = np.asarray(vectors, dtype=float)
    if V.shape[1] == 0:
        return SubspaceBasis(label, V)
    u, s, _ = np.linalg.svd(V, full_matrices=False)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return SubspaceBasis(label, u[:, :rank])


def direct_sum(label: str, *parts: SubspaceBasis) -> SubspaceBasis:
    return span(label, np.concatenate([p.vectors for p in parts], axis=1))


def complement(label: str, sub: SubspaceBasis, ambient: SubspaceBasis | int) -> SubspaceBasis:
    """Orthogonal complement of ``sub`` inside ``ambient`` (a basis or a dimension)."""
    if isinstance(ambient, (int, np.integer)):
        A = np.eye(int(ambient))
    else:
        A = ambient.vectors
    if sub.dim == 0:
        return SubspaceBasis(label, A.copy())
    ns = null_space(sub.vectors.T @ A, rcond=1e-10)
    return span(label, A @ ns)


def intersect_complement(label: str, sub: SubspaceBasis, avoid: SubspaceBasis) -> SubspaceBasis:
    """``sub`` intersected with the orthogonal complement of ``avoid``."""
    return complement(label, avoid, sub)


def q_family(space: SpinorSpace, xi, k: int, A: float, label: str | None = None) -> SubspaceBasis:
    """Real span of ``A f xi + df . xi`` over real ``f`` in P_k."""
    base = _as_base(space, xi)
    if not 0 <= k <= space.K:
        raise InvalidDimensionError(f"degree {k} outside 0..{space.K}")
    cols = []
    for i in range(space.bases[k].dim):
        e = np.zeros(space.bases[k].dim)
        e[i] = 1.0
        c = space.harmonic_spinor(k, e, base.components)
        cols.append(realify(A * c + space.grad_action(c)))
    return span(label or f"Q_{k}(A={A:g})", np.array(cols).T)


def subspace(space: SpinorSpace, label: str, xi=None) -> SubspaceBasis:
    """Named subspaces of the realified coefficient space.

    Labels: ``E0``, ``E{k}``, ``E-{k}``, ``F{k}``, ``Q`` (Möbius tangent
    directions), ``Q-`` (index directions), ``T`` (= E0 + Q), ``Et1``/``Et-1``
    (E_{+-1} orthogonal to Q + Q-), ``radial``, and ``perp:<label>`` for the
    orthogonal complement in the full space.
    """
    n = space.n
    if label.startswith("perp:"):
        return complement(label, subspace(space, label[5:], xi), space.real_size)
    if label == "radial":
        return SubspaceBasis(label, _as_base(space, xi).radial[:, None])
    if label in ("Q", "Q_xi"):
        return q_family(space, xi, 1, n - 1.0, label)
    if label == "Q-":
        return q_family(space, xi, 1, -n / (n - 1.0), label)
    if label == "T":
        return direct_sum("T", subspace(space, "E0", xi), subspace(space, "Q", xi))
    if label in ("Et1", "Et-1"):
        sign = 1 if label == "Et1" else -1
        avoid = direct_sum("Q+Q-", subspace(space, "Q", xi), subspace(space, "Q-", xi))
        return intersect_complement(label, subspace(space, f"E{sign}", xi), avoid)
    if label.startswith("F"):
        k = int(label[1:])
        if not 0 <= k <= space.K:
            raise InvalidDimensionError(f"degree {k} outside 0..{space.K}")
        idx = _real_block(space, k)
        V = np.zeros((space.real_size, idx.size))
        V[idx, np.arange(idx.size)] = 1.0
        return SubspaceBasis(label, V)
    if label.startswith("E"):
        k = int(label[1:])
        sign = -1 if k < 0 or label.startswith("E-") else 1
        return span(label, realify_basis(eigenbasis(space.dirac, abs(k), sign)))
    raise KeyError(f"unknown subspace label {label!r}")


# ---------------------------------------------------------------------------
# crossing estimates
# ---------------------------------------------------------------------------

def crossing_bound(n: int, k: int, sign: int) -> float:
    """Sharp value of ``max int <xi, phi>^2`` over unit ``phi`` in ``E_{+-k}``."""
    return (n + k - 1.0) / (n + 2 * k - 1.0) if sign > 0 else k / (n + 2 * k - 1.0)


@dataclass
class CrossingResult:
    """Maximum of ``int <xi, phi>^2`` on a unit sphere of ``E_{+-k}``.

    Attributes
    ----------
    maxval : float
    argmax : ndarray
        Realified unit maximiser.
    maximizer_space : ndarray
        Orthonormal basis of the top eigenspace.
    multiplicity : int
    family_residual : float
        Spectral-norm distance between the top eigenspace and the expected
        equality family (``(n+k-1) f xi + df.xi`` resp. ``-k f xi + df.xi``).
    eigenvalues : ndarray
    """

    maxval: float
    argmax: np.ndarray
    maximizer_space: np.ndarray
    multiplicity: int
    family_residual: float
    eigenvalues: np.ndarray


def crossing_max(space: SpinorSpace, k: int, sign: int = +1, xi=None,
                 cluster_tol: float = 1e-6) -> CrossingResult:
    """Top eigenpair of ``phi -> int <xi, phi>^2`` on the realified ``E_{+-k}``."""
    if not 1 <= k <= space.K:
        raise InvalidDimensionError(f"need 1 <= k <= K, got k={k}")
    base = _as_base(space, xi)
    pb = pairing_blocks(space, base)
    P = subspace(space, f"E{k}" if sign > 0 else f"E-{k}", base).vectors
    vals, vecs = np.linalg.eigh(_sym(P.T @ pb.BtWB @ P))
    top = vals[-1]
    sel = vals > top - cluster_tol * max(1.0, abs(top))
    T = P @ vecs[:, sel]
    A = (space.n + k - 1.0) if sign > 0 else -float(k)
    fam = q_family(space, base, k, A).vectors
    resid = float(np.linalg.norm(T - fam @ (fam.T @ T), 2))
    if fam.shape[1] != T.shape[1]:
        resid = max(resid, float(np.linalg.norm(fam - T @ (T.T @ fam), 2)))
    return CrossingResult(maxval=float(top), argmax=P @ vecs[:, -1], maximizer_space=T,
                          multiplicity=int(sel.sum()), family_residual=resid, eigenvalues=vals)


# ---------------------------------------------------------------------------
# spectral gap
# ---------------------------------------------------------------------------

def gap_constant_c1(n: int) -> float:
    """Lower bound ``4(2n-3)/(n(n+1)(n+6))`` for G / int |D phi|^2 on F_k, k >= 3."""
    return 4.0 * (2 * n - 3) / (n * (n + 1) * (n + 6))


def _min_gen(A, B, P) -> float:
    if P.shape[1] == 0:
        return float("nan")
    a = _sym(P.T @ A @ P)
    b = _sym(P.T @ B @ P)
    return float(eigh(a, b, eigvals_only=True)[0])


@dataclass
class GapResult:
    """Outcome of :func:`spectral_gap`.

    Attributes
    ----------
    gap_D : float
        ``min G(phi) / int |D phi|^2`` over the complement of ``E0 + Q``.
    gap_pairing : float
        ``min (G - (2/n) c0 DR)(phi) / int |D phi|^2`` on the same subspace
        (nonnegative iff the pairing bound holds with ``c0``).
    c0 : float
    block_minima : dict
        Minimum per degree block ``F_k`` intersected with the complement.
    F1_full_min : float
        Minimum over all of F_1 (zero, attained on Q).
    F1_perp_min : float
        Minimum over F_1 orthogonal to Q.
    c1 : float
    """

    gap_D: float
    gap_pairing: float
    c0: float
    block_minima: dict
    F1_full_min: float
    F1_perp_min: float
    c1: float


def spectral_gap(space: SpinorSpace, xi=None, c0: float | None = None) -> GapResult:
    """Generalised Rayleigh quotient ``G / int |D phi|^2`` off the tangent space.

    Parameters
    ----------
    c0 : float, optional
        Constant for the pairing bound; default ``(n^2/8) gap_D`` (half the
        largest value implied by ``|D| >= n/2``).

    Raises
    ------
    TruncationError
        If ``K < 3``.
    """
    _check_K(space, 3)
    base = _as_base(space, xi)
    G = assemble_G(space, base).matrix
    DR = space.DR
    DR2 = DR @ DR
    T = subspace(space, "T", base)
    Pc = complement("T-perp", T, space.real_size).vectors
    gap = _min_gen(G, DR2, Pc)
    n = space.n
    if c0 is None:
        c0 = n * n / 8.0 * gap
    gp = _min_gen(G - (2.0 / n) * c0 * DR, DR2, Pc)
    blocks = {}
    for k in range(space.K + 1):
        Fk = subspace(space, f"F{k}")
        Pk = complement(f"F{k}-perp", T, Fk).vectors
        blocks[k] = _min_gen(G, DR2, Pk)
    F1 = subspace(space, "F1").vectors
    Q = subspace(space, "Q", base)
    F1p = complement("F1-Q", Q, subspace(space, "F1")).vectors
    return GapResult(gap_D=gap, gap_pairing=gp, c0=float(c0), block_minima=blocks,
                     F1_full_min=_min_gen(G, DR2, F1), F1_perp_min=_min_gen(G, DR2, F1p),
                     c1=gap_constant_c1(n))


# ---------------------------------------------------------------------------
# index and nullity
# ---------------------------------------------------------------------------

@dataclass
class IndexResult:
    """Eigenvalue counts of a form on its domain.

    Attributes
    ----------
    index, nullity : int
        ``nullity`` includes +1 for an excluded radial direction.
    eigenvalues : ndarray
    zero_tol : float
    sensitive : bool
        True if an eigenvalue lies within a factor 10 of the zero boundary.
    """

    index: int
    nullity: int
    eigenvalues: np.ndarray
    zero_tol: float
    sensitive: bool


def index_nullity(form: FormMatrix, zero_tol: float = ZERO_TOL) -> IndexResult:
    """Count negative and zero eigenvalues of ``form`` on its domain.

    ``|lambda| < zero_tol * max|lambda|`` counts as zero.  For G2 the radial
    line is excluded from the domain and added back as one null direction.
    Emits :class:`SensitivityWarning` if an eigenvalue is within a factor 10 of
    the classification boundary.
    """
    if zero_tol <= 0:
        raise DomainError("zero_tol must be positive")
    A = form.matrix if form.domain is None else form.restrict(form.domain)
    vals = np.linalg.eigvalsh(_sym(A))
    thr = zero_tol * np.abs(vals).max()
    zero = np.abs(vals) < thr
    index = int(np.sum((vals < 0) & ~zero))
    nullity = int(zero.sum()) + (1 if form.meta.get("radial_excluded") else 0)
    near = (np.abs(vals) > thr / 10.0) & (np.abs(vals) < thr * 10.0)
    sensitive = bool(near.any())
    if sensitive:
        warnings.warn(f"{int(near.sum())} eigenvalue(s) of {form.name} within 10x of the "
                      f"zero threshold {thr:.3e}; re-run with a shifted zero_tol",
                      SensitivityWarning, stacklevel=2)
    return IndexResult(index=index, nullity=nullity, eigenvalues=vals, zero_tol=zero_tol,
                       sensitive=sensitive)


def index_nullity_sweep(form: FormMatrix, tols=(1e-9, 1e-8, 1e-7, 1e-6, 1e-5)):
    """Run :func:`index_nullity` over several tolerances.

    Returns
    -------
    results : list of IndexResult
    stable : bool
        True if every tolerance gives the same (index, nullity).
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SensitivityWarning)
        res = [index_nullity(form, t) for t in tols]
    stable = len({(r.index, r.nullity) for r in res}) == 1
    return res, stable


# ---------------------------------------------------------------------------
# the interpolated family
# ---------------------------------------------------------------------------

@dataclass
class ScanResult:
    """Minimum generalised eigenvalue of ``G_a`` off the tangent space.

    Attributes
    ----------
    a_grid, min_eig : ndarray
    bracket : tuple or None
        ``(a_lo, a_hi)`` around the first sign change.
    threshold : float
        ``1 - 2/(n(n+1))``.
    """

    a_grid: np.ndarray
    min_eig: np.ndarray
    bracket: tuple | None
    threshold: float


def scan_Ja(space: SpinorSpace, a_grid, xi=None) -> ScanResult:
    """Minimum of ``G_a / int |D phi|^2`` on the complement of ``E0 + Q`` per ``a``."""
    base = _as_base(space, xi)
    a_grid = np.asarray(a_grid, dtype=float)
    T = subspace(space, "T", base)
    P = complement("T-perp", T, space.real_size).vectors
    DR2 = space.DR @ space.DR
    mins = np.array([_min_gen(assemble_Ga(space, float(a), base).matrix, DR2, P) for a in a_grid])
    bracket = None
    for i in range(1, len(a_grid)):
        if mins[i - 1] > 0 >= mins[i]:
            bracket = (float(a_grid[i - 1]), float(a_grid[i]))
            break
    n = space.n
    return ScanResult(a_grid=a_grid, min_eig=mins, bracket=bracket,
                      threshold=1.0 - 2.0 / (n * (n + 1)))


def interpolation_direction(space: SpinorSpace, f, xi=None) -> np.ndarray:
    """Coefficients of ``n f xi - (n-1) df . xi`` for ``f = sum f_i h_{1,i}``."""
    base = _as_base(space, xi)
    n = space.n
    c = space.harmonic_spinor(1, f, base.components)
    return n * c - (n - 1.0) * space.grad_action(c)


def interpolation_closed_form(n: int, a: float, f_l2sq: float) -> float:
    """Closed-form value of ``G_a`` on the direction of :func:`interpolation_direction`."""
    return ((n + 2.0 - a * n * (n + 1.0) / (n - 1.0)) * (n + n ** 4) ** 2
            / (n ** 2 * (n + 1.0) ** 3) * f_l2sq)
