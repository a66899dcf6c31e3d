"""Batch verification runner.

Usage::

    spinsphere <suite> [--dim N] [--degree K] [--quad-degree D] [--seed S]
               [--tol name=value ...] [--config FILE] [--out PATH]
               [--format json|csv]

Suites: ``spectrum``, ``crossing``, ``gap``, ``index``, ``deficit-probe``,
``scan-a``, ``verify-rn`` and ``all``.  The exit status is 0 iff every check
passes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np
import scipy

from . import __version__
from .clifford import build_gamma, relation_defect
from .errors import SpinSphereError
from .spinframe import SpinorSpace, complexify

__all__ = ["RunConfig", "Check", "Report", "run", "scatter_deficit", "main",
           "SUITES", "DEFAULT_TOLERANCES", "load_config"]

SUITES = ("spectrum", "crossing", "gap", "index", "deficit-probe", "scan-a", "verify-rn")

DEFAULT_TOLERANCES = {
    "exact": 1e-9,         # polynomial-exact identities (absolute)
    "eig": 1e-8,           # Dirac eigenvalues
    "crossing": 1e-8,      # crossing maxima
    "family": 1e-7,        # maximiser subspace residual
    "block": 1e-9,         # vanishing blocks
    "c1": 1e-8,            # slack in the F_3 gap bound
    "zero_tol": 1e-7,      # relative eigenvalue zero threshold
    "functional": 1e-6,    # fractional-power functionals (relative)
    "deficit": 1e-6,       # deficit on the optimiser family (relative)
    "nonneg": 1e-8,        # deficit nonnegativity
    "el_J": 1e-8,          # Euler-Lagrange residual, J
    "el_F": 1e-7,          # Euler-Lagrange residual, F
    "margin": 1e-4,        # relative counterexample margin
    "scatter": 0.2,        # second-order scatter agreement
    "invariance": 1e-6,    # conformal invariance (relative)
    "closed_form": 1e-6,   # interpolated-form closed form (relative)
    "dist": 1e-6,          # plant-and-recover distance
    "recover": 1e-3,       # plant-and-recover parameter
}


# ---------------------------------------------------------------------------
# configuration and report types
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Parameters of a verification run.

    Attributes
    ----------
    n : int
        Sphere dimension (2..5).
    K : int
        Truncation degree (2..4).
    quad_degree : int or None
        Working quadrature degree (``None``: ``2K + 6``).
    seed : int
    tolerances : dict
        Overrides of :data:`DEFAULT_TOLERANCES`.
    suites : tuple of str
    samples : int
        Random fields in the deficit nonnegativity probe.
    scatter : int
        Perpendicular samples in :func:`scatter_deficit`.
    multistart : int
        Starts of the distance search.
    a_step : float
        Grid spacing of the interpolation scan.
    strict : bool
        Treat ``pass-unstable`` as failure.
    """

    n: int = 3
    K: int = 3
    quad_degree: int | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    suites: tuple = ("all",)
    samples: int = 1000
    scatter: int = 8
    multistart: int = 4
    a_step: float = 0.05
    strict: bool = False

    def validate(self) -> "RunConfig":
        if not 2 <= self.n <= 5:
            raise ValueError(f"dimension must be in 2..5, got {self.n}")
        if not 2 <= self.K <= 4:
            raise ValueError(f"truncation degree must be in 2..4, got {self.K}")
        if self.quad_degree is not None and self.quad_degree < 2 * self.K + 2:
            raise ValueError(f"quadrature degree must be >= 2K+2 = {2 * self.K + 2}")
        for k, v in self.tolerances.items():
            if k not in DEFAULT_TOLERANCES:
                raise ValueError(f"unknown tolerance {k!r}")
            if not v > 0:
                raise ValueError(f"tolerance {k!r} must be positive")
        for s in self.suites:
            if s not in SUITES + ("all",):
                raise ValueError(f"unknown suite {s!r}")
        if self.samples < 1 or self.scatter < 1 or self.multistart < 1:
            raise ValueError("samples, scatter and multistart must be >= 1")
        if not 0 < self.a_step <= 1:
            raise ValueError("a_step must lie in (0, 1]")
        return self

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    @property
    def selected(self) -> tuple:
        return SUITES if "all" in self.suites else tuple(s for s in SUITES if s in self.suites)


@dataclass
class Check:
    """One numeric check.

    ``status`` is ``"pass"``, ``"pass-unstable"`` (passes, but the
    quadrature refinement delta could change the verdict) or ``"fail"``.
    """

    name: str
    paper_anchor: str
    expected: object
    computed: object
    tolerance: float
    refinement_delta: float
    status: str
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


@dataclass
class Report:
    """Checks plus run metadata."""

    checks: list
    config: dict
    tables: dict = field(default_factory=dict)
    wall_time: float = 0.0
    strict: bool = False

    @property
    def passed(self) -> bool:
        if self.strict:
            return all(c.status == "pass" for c in self.checks)
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return _jsonable({
            "overall": "pass" if self.passed else "fail",
            "checks": [{"name": c.name, "paper_anchor": c.paper_anchor, "expected": c.expected,
                        "computed": c.computed, "tolerance": c.tolerance,
                        "refinement_delta": c.refinement_delta, "pass": c.status,
                        "note": c.note} for c in self.checks],
            "tables": self.tables,
            "metadata": {"config": self.config, "wall_time": self.wall_time,
                         "versions": {"spinsphere": __version__, "numpy": np.__version__,
                                      "scipy": scipy.__version__,
                                      "python": platform.python_version()}},
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["name", "paper_anchor", "expected", "computed", "tolerance",
                    "refinement_delta", "pass"])
        for c in self.checks:
            w.writerow([c.name, c.paper_anchor, _jsonable(c.expected), _jsonable(c.computed),
                        c.tolerance, c.refinement_delta, c.status])
        return buf.getvalue()

    def table_csv(self, name: str) -> str:
        rows = self.tables.get(name, [])
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
            w.writeheader()
            for r in rows:
                w.writerow({k: _jsonable(v) for k, v in r.items()})
        return buf.getvalue()


class _Recorder:
    """Collects checks with a uniform pass / unstable rule."""

    def __init__(self):
        self.checks = []

    def add(self, name, anchor, expected, computed, tol, mode="abs", delta=0.0, note=""):
        """Record a check.

        Modes: ``abs`` / ``rel`` (``|computed - expected| <= tol`` resp.
        ``<= tol |expected|``), ``le`` / ``ge`` / ``gt`` / ``lt`` (one-sided
        against ``expected`` with slack ``tol``), ``exact``.  A passing check is
        unstable when the refinement delta exceeds the tolerance (two-sided
        modes) or the distance to the threshold (one-sided modes).
        """
        c = computed
        if mode == "exact":
            ok, room = c == expected, math.inf
        elif mode == "abs":
            ok, room = abs(c - expected) <= tol, tol
        elif mode == "rel":
            ok, room = abs(c - expected) <= tol * abs(expected), tol * abs(expected)
        elif mode == "le":
            ok, room = c <= expected + tol, abs(expected + tol - c)
        elif mode == "lt":
            ok, room = c < expected + tol, abs(expected + tol - c)
        elif mode == "ge":
            ok, room = c >= expected - tol, abs(c - expected + tol)
        elif mode == "gt":
            ok, room = c > expected + tol, abs(c - expected - tol)
        else:  # pragma: no cover
            raise ValueError(mode)
        ok = bool(ok) and not (isinstance(c, float) and math.isnan(c))
        status = "fail" if not ok else ("pass-unstable" if delta > room else "pass")
        self.checks.append(Check(name, anchor, expected, computed, tol, float(delta), status, note))
        return ok

    def error(self, name, anchor, exc):
        self.checks.append(Check(name, anchor, "no error", f"{type(exc).__name__}: {exc}",
                                 0.0, 0.0, "fail", "module error"))


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

class _Context:
    """Lazily built objects shared between suites."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._space = None
        self._base = None

    @property
    def space(self) -> SpinorSpace:
        if self._space is None:
            self._space = SpinorSpace(self.cfg.n, self.cfg.K, self.cfg.quad_degree)
        return self._space

    @property
    def base(self):
        from .forms import killing_base
        if self._base is None:
            self._base = killing_base(self.space)
        return self._base

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, salt])

    def unit_phi0(self):
        phi0 = np.zeros(self.space.N, dtype=complex)
        phi0[0] = 1.0 / np.sqrt(2.0)
        return phi0


def _suite_foundations(ctx: _Context, rec: _Recorder):
    n = ctx.cfg.n
    rep = build_gamma(n)
    rec.add("clifford.relations", "Clifford relations of the gamma matrices", 0.0,
            relation_defect(rep), ctx.cfg.tol("exact"), "abs")
    sp = ctx.space
    rec.add("quadrature.certificate", "polynomial exactness of the sphere rule", 0.0,
            sp.quad.certificate, ctx.cfg.tol("exact"), "abs")
    worst = max(float(np.abs(b.gram - np.eye(b.dim)).max()) for b in sp.bases)
    rec.add("harmonics.orthonormality", "orthonormal spherical harmonic basis", 0.0, worst,
            ctx.cfg.tol("exact"), "abs")


def _suite_spectrum(ctx: _Context, rec: _Recorder):
    sp = ctx.space
    n, N = sp.n, sp.N
    D = sp.dirac
    anchor = "Dirac spectrum of the round sphere and its multiplicities"
    rec.add("spectrum.hermitian", anchor, 0.0, D.hermitian_defect(), ctx.cfg.tol("exact"))
    rec.add("spectrum.block_diagonal", anchor, 0.0, D.off_block_norm(), ctx.cfg.tol("exact"))
    for k in range(sp.K + 1):
        vals = np.linalg.eigvalsh(D.matrix[D.block(k), D.block(k)])
        pairs = [(+1, n / 2 + k, N * comb(n + k - 1, k))]
        if k > 0:
            pairs.append((-1, -(n / 2 + k - 1), N * comb(n + k - 2, k - 1)))
        for sign, lam, mult in pairs:
            sel = np.abs(vals - lam) < 0.25
            tag = "+" if sign > 0 else "-"
            err = float(np.abs(vals[sel] - lam).max()) if sel.any() else math.inf
            rec.add(f"spectrum.k{k}{tag}.eigenvalue", anchor, lam, lam + err, ctx.cfg.tol("eig"))
            rec.add(f"spectrum.k{k}{tag}.multiplicity", anchor, mult, int(sel.sum()), 0, "exact")
        rec.add(f"spectrum.k{k}.accounted", anchor, vals.size,
                int(sum((np.abs(vals - lam) < 0.25).sum() for _, lam, _ in pairs)), 0, "exact")


def _suite_crossing(ctx: _Context, rec: _Recorder):
    from .forms import crossing_bound, crossing_max

    sp = ctx.space
    anchor = "sharp crossing estimates on eigenspaces and their equality cases"
    for k in range(1, sp.K + 1):
        for sign in (+1, -1):
            tag = "+" if sign > 0 else "-"
            res = crossing_max(sp, k, sign, ctx.base)
            rec.add(f"crossing.k{k}{tag}.max", anchor, crossing_bound(sp.n, k, sign), res.maxval,
                    ctx.cfg.tol("crossing"))
            rec.add(f"crossing.k{k}{tag}.family_residual", anchor, 0.0, res.family_residual,
                    ctx.cfg.tol("family"), "le")
            rec.add(f"crossing.k{k}{tag}.multiplicity", anchor, sp.bases[k].dim,
                    res.multiplicity, 0, "exact")


def _suite_gap(ctx: _Context, rec: _Recorder):
    from .forms import assemble_G, assemble_S, spectral_gap, subspace

    sp = ctx.space
    n, N = sp.n, sp.N
    S = assemble_S(sp, ctx.base)
    T = subspace(sp, "T", ctx.base)
    a_t = "tangent space of the optimiser family is the null space of S"
    rec.add("gap.tangent_dim", a_t, 2 * N + n + 1, T.dim, 0, "exact")
    rec.add("gap.S_on_tangent", a_t, 0.0, float(np.linalg.norm(S.restrict(T), 2)),
            ctx.cfg.tol("block"), "le")
    rec.add("gap.S_symmetric", a_t, 0.0, S.symmetry_defect(), 1e-12, "le")
    G = assemble_G(sp, ctx.base)
    worst = max(float(np.abs(G.block(k, j)).max()) for k in range(sp.K + 1)
                for j in range(sp.K + 1) if k != j)
    rec.add("gap.G_block_decoupling", "degree blocks decouple in the second variation", 0.0,
            worst, ctx.cfg.tol("block"), "le")
    if sp.K < 3:
        rec.add("gap.truncation", "spectral gap needs the k >= 3 branch", 3, sp.K, 0, "ge")
        return
    g = spectral_gap(sp, ctx.base)
    a_g = "spectral gap of the second variation off the tangent space"
    rec.add("gap.gap_D_positive", a_g, 0.0, g.gap_D, 0.0, "gt")
    rec.add("gap.F3_bound", a_g + " (explicit bound on F_3)", g.c1, g.block_minima[3],
            ctx.cfg.tol("c1"), "ge")
    rec.add("gap.F1_full_min_zero", a_g + " (equality on Q)", 0.0, g.F1_full_min,
            ctx.cfg.tol("block"), "abs")
    rec.add("gap.F1_perp_positive", a_g + " (F_1 off Q)", 0.0, g.F1_perp_min, 0.0, "gt")
    rec.add("gap.pairing_bound", "gap in terms of the Dirac pairing", 0.0, g.gap_pairing,
            ctx.cfg.tol("block"), "ge", note=f"c0 = {g.c0:.6g}")
    for k, v in g.block_minima.items():
        if k >= 2:
            rec.add(f"gap.F{k}_min_positive", a_g + " (per-block minimum, reported)", 0.0, v, 0.0, "gt")


def _suite_index(ctx: _Context, rec: _Recorder):
    from .forms import assemble_G2, index_nullity_sweep, subspace
    from .functionals import F_functional

    sp = ctx.space
    n, N = sp.n, sp.N
    G2 = assemble_G2(sp, ctx.base)
    res, stable = index_nullity_sweep(G2)
    ref = min(res, key=lambda r: abs(math.log10(r.zero_tol) - math.log10(ctx.cfg.tol("zero_tol"))))
    anchor = "index and nullity of F at Killing spinors"
    rec.add("index.index", anchor, n + 1, ref.index, 0, "exact")
    rec.add("index.nullity", anchor, 4 * N, ref.nullity, 0, "exact")
    rec.add("index.sweep_stable", anchor + " (zero_tol sweep 1e-9..1e-5)", True, stable, 0, "exact")
    Qm = subspace(sp, "Q-", ctx.base)
    top = float(np.linalg.eigvalsh(G2.restrict(Qm)).max())
    rec.add("index.Qminus_negative", "F second variation negative on Q-", 0.0, top, 0.0, "lt")
    xi = sp.field(ctx.base.coeffs)
    f0 = F_functional(xi)
    f1 = F_functional(sp.field(1.37 * ctx.base.coeffs))
    rec.add("index.radial_invariance", "F is constant along the radial direction", f0.value,
            f1.value, ctx.cfg.tol("functional"), "rel", delta=f1.refinement_delta)


def _random_unit(sp: SpinorSpace, rng) -> np.ndarray:
    c = rng.standard_normal(sp.size) + 1j * rng.standard_normal(sp.size)
    return c / np.linalg.norm(c)


def scatter_deficit(config: RunConfig, samples: int | None = None, ctx: _Context | None = None):
    """Deficit versus squared distance to the optimiser family.

    Perturbations ``xi + t phi`` with ``phi`` a random L^2-unit direction
    orthogonal to the tangent space and ``t`` log-spaced in ``[1e-3, 1]``;
    plus tangent-space perturbations for comparison.

    Returns
    -------
    list of dict
        Rows ``kind, t, deficit, dist2, ratio, predicted`` where ``predicted``
        is the second-order value ``(n/2) omega^{1/n} S(phi) / ||D phi||_p^2``
        (perpendicular rows only).
    """
    from .forms import assemble_S, subspace
    from .functionals import deficit, dist_to_M

    ctx = ctx or _Context(config)
    samples = config.scatter if samples is None else int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sp = ctx.space
    n = sp.n
    S = assemble_S(sp, ctx.base)
    Pp = subspace(sp, "perp:T", ctx.base).vectors
    Pt = subspace(sp, "T", ctx.base).vectors
    rng = ctx.rng(7)
    p = 2.0 * n / (n + 1)
    rows = []
    amps = np.logspace(-3, 0, samples)
    for t in amps:
        r = Pp @ rng.standard_normal(Pp.shape[1])
        r /= np.linalg.norm(r)
        c = complexify(r)
        _, SD = sp.field(c).sample(sp.quad.nodes)
        dnorm = (sp.quad.weights @ np.linalg.norm(SD, axis=1) ** p) ** (2.0 / p)
        pred = (n / 2.0) * sp.omega ** (1.0 / n) * S.value(r) / dnorm
        psi = sp.field(ctx.base.coeffs + t * c)
        d2, _ = dist_to_M(psi, multistart=config.multistart, seed=config.seed)
        df = deficit(psi)
        rows.append({"kind": "perp", "t": float(t), "deficit": df, "dist2": d2,
                     "ratio": df / d2 if d2 > 0 else math.nan, "predicted": pred})
    for t in (1e-3, 1e-2):
        r = Pt @ rng.standard_normal(Pt.shape[1])
        r /= np.linalg.norm(r)
        psi = sp.field(ctx.base.coeffs + t * complexify(r))
        d2, _ = dist_to_M(psi, multistart=config.multistart, seed=config.seed)
        df = deficit(psi)
        rows.append({"kind": "tangent", "t": t, "deficit": df, "dist2": d2,
                     "ratio": df / d2 if d2 > 0 else math.nan, "predicted": math.nan})
    return rows


def _suite_deficit(ctx: _Context, rec: _Recorder, report_tables: dict):
    from .functionals import F_functional, J_functional, deficit, deficit_report

    cfg = ctx.cfg
    sp = ctx.space
    n, om = sp.n, sp.omega
    xi = sp.field(ctx.base.coeffs)
    j = J_functional(xi)
    rec.add("deficit.J_xi", "optimal constant attained by Killing spinors", n / 2 * om ** (1 / n),
            j.value, cfg.tol("functional"), "rel", j.refinement_delta)
    f = F_functional(xi)
    rec.add("deficit.F_xi", "value of F at Killing spinors", n * n / 4 * om ** (2 / n), f.value,
            cfg.tol("functional"), "rel", f.refinement_delta)
    d = deficit_report(xi)
    rec.add("deficit.at_xi", "equality on the optimiser family", 0.0, d.value,
            cfg.tol("exact") * om ** ((n + 1) / n), "abs", d.refinement_delta)
    rng = ctx.rng(3)
    worst = math.inf
    amps = np.logspace(-3, 1, cfg.samples)
    for i in range(cfg.samples):
        c = _random_unit(sp, rng)
        if i % 2 == 0:
            c = ctx.base.coeffs / np.linalg.norm(ctx.base.coeffs) + amps[i] * c
        worst = min(worst, deficit(sp.field(c)))
    rec.add("deficit.nonnegative", "spinorial Sobolev inequality", 0.0, worst, cfg.tol("nonneg"),
            "ge", note=f"{cfg.samples} random fields")
    rows = scatter_deficit(cfg, ctx=ctx)
    report_tables["scatter_deficit"] = rows
    perp = [r for r in rows if r["kind"] == "perp"]
    anchor = "stability: deficit controls the squared distance"
    rec.add("deficit.scatter_min_ratio", anchor, 0.0, min(r["ratio"] for r in perp), 0.0, "gt")
    small = [r for r in perp if r["t"] <= 1e-2]
    err = max(abs(r["ratio"] / r["predicted"] - 1.0) for r in small) if small else math.nan
    rec.add("deficit.scatter_second_order", anchor + " (second-order agreement)", 0.0, err,
            cfg.tol("scatter"), "le")
    tang = [r for r in rows if r["kind"] == "tangent"]
    for r in tang:
        t = r["t"]
        rec.add(f"deficit.tangent_t{t:g}.dist_ratio", anchor + " (tangent directions)", 0.0,
                r["dist2"] / (t * t), 10.0 * t, "le")


def _suite_scan(ctx: _Context, rec: _Recorder, report_tables: dict):
    from .forms import assemble_Ga, interpolation_closed_form, interpolation_direction, scan_Ja
    from .functionals import F_functional, J_functional, Ja_functional

    cfg = ctx.cfg
    sp = ctx.space
    n, om = sp.n, sp.omega
    grid = np.round(np.arange(0.0, 1.0 + 1e-12, cfg.a_step), 12)
    sc = scan_Ja(sp, grid, ctx.base)
    report_tables["scan_Ja"] = [{"a": a, "min_eig": m} for a, m in zip(sc.a_grid, sc.min_eig)]
    anchor = "interpolated quotients J_a"
    rec.add("scan.positive_at_0", anchor + " (stable at a = 0)", 0.0, float(sc.min_eig[0]), 0.0, "gt")
    above = sc.min_eig[sc.a_grid > sc.threshold + 1e-12]
    rec.add("scan.negative_above_threshold", anchor + " (unstable above 1 - 2/(n(n+1)))", 0.0,
            float(above.max()) if above.size else -1.0, 0.0, "lt")
    rec.add("scan.bracket_found", anchor + " (sign-change bracket, open quantity)", True,
            sc.bracket is not None, 0, "exact",
            note=f"bracket={sc.bracket}, threshold={sc.threshold:.6f}")
    f = np.zeros(n + 1)
    f[0] = 1.0
    c = interpolation_direction(sp, f, ctx.base)
    for a in (0.5, sc.threshold, 0.5 * (1 + sc.threshold), 1.0):
        val = assemble_Ga(sp, float(a), ctx.base).value_of(c)
        ref = interpolation_closed_form(n, a, 1.0)
        if abs(ref) > 1e-12:
            rec.add(f"scan.closed_form_a{a:.4f}", anchor + " (explicit destabilising direction)",
                    ref, val, cfg.tol("closed_form"), "rel")
        else:
            rec.add(f"scan.closed_form_a{a:.4f}", anchor + " (explicit destabilising direction)",
                    0.0, val, cfg.tol("block") * max(1.0, abs(val)), "abs")
    # interpolation endpoints reuse the same constituent integrals
    rng = ctx.rng(5)
    psi = sp.field(ctx.base.coeffs + 0.2 * _random_unit(sp, rng))
    j0, jj = Ja_functional(psi, 0.0), J_functional(psi)
    rec.add("scan.Ja_endpoint_0", anchor + " (a = 0 is J)", jj.value, j0.value, 1e-14, "rel")
    j1, ff = Ja_functional(psi, 1.0), F_functional(psi)
    rec.add("scan.Ja_endpoint_1", anchor + " (a = 1 is a multiple of F)",
            ff.value / (n / 2 * om ** (1 / n)), j1.value, 1e-14, "rel")
    a = 1.0 - 1.0 / (n * (n + 1))
    cf = sp.field(c / np.linalg.norm(c))
    base = Ja_functional(sp.field(ctx.base.coeffs), a).value
    dip = Ja_functional(sp.field(ctx.base.coeffs) + 0.02 * cf, a)
    rec.add("scan.Ja_dips", anchor + " (J_a decreases along the explicit direction)", base,
            dip.value, 0.0, "lt", dip.refinement_delta)


def _suite_verify_rn(ctx: _Context, rec: _Recorder):
    from .conformal import (BubbleField, BubbleParam, MoebiusParam, conformal_pullback,
                            mtilde_counterexample, mtilde_field, mtilde_partner,
                            optimizer_field)
    from .functionals import (F_functional, J_functional, constituents, deficit_report,
                              dist_to_M, el_residual_F, el_residual_J)

    cfg = ctx.cfg
    sp = ctx.space
    n, om = sp.n, sp.omega
    phi0 = ctx.unit_phi0()
    hi = sp.rule(sp.quad_degree + 8)
    # flat bubbles
    for sign in (-1, +1):
        bf = BubbleField(sp, [BubbleParam(phi0, sign, y0=np.full(n, 0.1), lam=1.3)])
        r = el_residual_J(bf, mu=-sign * n / 2.0, degree=hi)
        rec.add(f"rn.bubble{'+' if sign > 0 else '-'}_yamabe", "flat bubbles solve the Yamabe-type equation",
                0.0, r, cfg.tol("el_J"), "le")
    # optimiser family
    p = MoebiusParam(np.r_[0.3, np.zeros(n)])
    opt = optimizer_field(sp, p, phi0)
    dr = deficit_report(opt, degree=hi)
    scale = n / 2 * om ** (1 / n) * dr.components["pairing"]
    rec.add("rn.optimizer_deficit", "equality on the Möbius orbit of Killing spinors", 0.0,
            dr.value / scale, cfg.tol("deficit"), "abs", dr.refinement_delta / scale)
    rec.add("rn.optimizer_yamabe", "optimisers solve the spinorial Yamabe equation", 0.0,
            el_residual_J(opt, mu=n / 2.0, degree=hi), cfg.tol("el_J"), "le")
    jo = J_functional(opt, degree=hi)
    rec.add("rn.optimizer_J", "optimal constant on the Möbius orbit", n / 2 * om ** (1 / n), jo.value,
            cfg.tol("functional"), "rel", jo.refinement_delta)
    # conformal invariance
    rng = ctx.rng(11)
    psi = sp.field(ctx.base.coeffs + 0.3 * _random_unit(sp, rng))
    for label, b in (("e2", 0.2 * np.eye(n + 1)[min(1, n)]), ("rand", None)):
        if b is None:
            v = rng.standard_normal(n + 1)
            b = 0.3 * v / np.linalg.norm(v)
        pb = conformal_pullback(psi, MoebiusParam(b))
        c0, c1 = constituents(psi, hi), constituents(pb, hi)
        for key in ("dirac_p", "pairing", "norm_q"):
            rec.add(f"rn.invariance_{label}.{key}", "conformal invariance of the constituent integrals",
                    c0[key], c1[key], cfg.tol("invariance"), "rel")
        j0, j1 = J_functional(psi, hi), J_functional(pb, hi)
        rec.add(f"rn.invariance_{label}.J", "conformal invariance of J", j0.value, j1.value,
                cfg.tol("invariance"), "rel", max(j0.refinement_delta, j1.refinement_delta))
        f0, f1 = F_functional(psi, hi), F_functional(pb, hi)
        rec.add(f"rn.invariance_{label}.F", "conformal invariance of F", f0.value, f1.value,
                cfg.tol("invariance"), "rel", max(f0.refinement_delta, f1.refinement_delta))
    # the solution set M~ and the counterexample
    target = n * n / 4 * om ** (2 / n)
    phi1 = mtilde_partner(sp.rep, phi0, ctx.rng(13))
    mt = mtilde_field(sp, phi0, phi1)
    fm = F_functional(mt)
    rec.add("rn.mtilde_F", "F is constant on the solution set M~", target, fm.value,
            cfg.tol("functional"), "rel", fm.refinement_delta,
            note=f"|Phi1| = {np.linalg.norm(phi1):.3g}")
    el = el_residual_F(mt)
    rec.add("rn.mtilde_el_F", "M~ members solve the F Euler-Lagrange equation", 0.0, el.residual,
            cfg.tol("el_F"), "le", note=f"mu~ = {el.mu:.10g}, truncation loss {el.truncation_loss:.2e}")
    rec.add("rn.mtilde_length_identity", "constant-length identity on M~", 0.0,
            mt.meta["length_identity_defect"], cfg.tol("exact"), "le")
    ce = mtilde_counterexample(sp, phi0)
    rec.add("rn.counterexample_margin", "F drops below its Killing value off M~", cfg.tol("margin"),
            ce.extra["relative_margin"], 0.0, "gt", ce.refinement_delta / target)
    rec.add("rn.counterexample_length", "length function of the counterexample", 0.0,
            ce.extra["counterexample_length_defect"], cfg.tol("exact"), "le")
    # plant and recover
    b_true = np.r_[0.3, np.zeros(n)]
    planted = optimizer_field(sp, MoebiusParam(b_true), phi0)
    d, par = dist_to_M(planted, multistart=cfg.multistart, seed=cfg.seed)
    rec.add("rn.plant_distance", "distance to the optimiser family (upper bound)", 0.0, d,
            cfg.tol("dist"), "le")
    rec.add("rn.plant_recover_b", "distance to the optimiser family (recovered parameter)", 0.0,
            float(np.linalg.norm(par["b"] - b_true)), cfg.tol("recover"), "le")


_SUITE_FUNCS = {
    "spectrum": _suite_spectrum,
    "crossing": _suite_crossing,
    "gap": _suite_gap,
    "index": _suite_index,
    "verify-rn": _suite_verify_rn,
}


def run(config: RunConfig) -> Report:
    """Execute the selected suites and collect a :class:`Report`.

    Module errors are recorded as failed checks rather than raised.
    """
    config.validate()
    t0 = time.time()
    ctx = _Context(config)
    rec = _Recorder()
    tables: dict = {}
    try:
        _suite_foundations(ctx, rec)
    except Exception as exc:  # noqa: BLE001 - reported as a failed check
        rec.error("foundations.error", "foundations", exc)
    for name in config.selected:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                if name == "deficit-probe":
                    _suite_deficit(ctx, rec, tables)
                elif name == "scan-a":
                    _suite_scan(ctx, rec, tables)
                else:
                    _SUITE_FUNCS[name](ctx, rec)
        except (SpinSphereError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rec.error(f"{name}.error", name, exc)
    cfg = asdict(config)
    cfg["quad_degree"] = ctx.space.quad_degree if ctx._space is not None else config.quad_degree
    return Report(checks=rec.checks, config=cfg, tables=tables, wall_time=time.time() - t0,
                  strict=config.strict)


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def _parse_value(v: str):
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    low = v.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def load_config(path: str) -> dict:
    """Read a ``key = value`` file (``#`` comments, optional ``[tol]`` section).

    Keys: ``dim``, ``degree``, ``quad_degree``, ``seed``, ``samples``,
    ``scatter``, ``multistart``, ``a_step``, ``strict``, ``suites``
    (comma separated) and ``tol.<name>`` (or ``<name>`` inside ``[tol]``).
    """
    out: dict = {"tolerances": {}}
    section = ""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if section:
                key = f"{section}.{key}"
            if key.startswith("tol."):
                out["tolerances"][key[4:]] = float(val)
            else:
                out[key] = _parse_value(val)
    return out


def _tol_pair(s: str):
    if "=" not in s:
        raise argparse.ArgumentTypeError("expected name=value")
    k, v = s.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"tolerance {k!r} needs a number") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinsphere", description=__doc__.split("\n\n")[0])
    p.add_argument("suite", choices=SUITES + ("all",), help="suite to run")
    p.add_argument("--dim", type=int, help="sphere dimension n (2..5)")
    p.add_argument("--degree", type=int, help="truncation degree K (2..4)")
    p.add_argument("--quad-degree", type=int, help="quadrature degree (default 2K+6)")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--tol", type=_tol_pair, action="append", default=[], metavar="NAME=VALUE",
                   help="override a tolerance (repeatable)")
    p.add_argument("--config", help="key=value configuration file (flags override)")
    p.add_argument("--samples", type=int, help="random fields in the deficit probe")
    p.add_argument("--scatter", type=int, help="perpendicular samples in the scatter table")
    p.add_argument("--multistart", type=int, help="starts of the distance search")
    p.add_argument("--strict", action="store_true", default=None,
                   help="count pass-unstable checks as failures")
    p.add_argument("--out", help="write the report here (default: stdout summary only)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress per-check lines")
    return p


def config_from_args(args) -> RunConfig:
    vals: dict = {}
    if args.config:
        vals = load_config(args.config)
    tols = dict(vals.pop("tolerances", {}))
    mapping = {"dim": "n", "degree": "K", "quad_degree": "quad_degree", "seed": "seed",
               "samples": "samples", "scatter": "scatter", "multistart": "multistart",
               "a_step": "a_step", "strict": "strict"}
    kw = {}
    for key, attr in mapping.items():
        if key in vals:
            kw[attr] = vals.pop(key)
    if "suites" in vals:
        vals.pop("suites")  # the positional suite always wins
    if vals:
        raise ValueError(f"unknown configuration keys: {sorted(vals)}")
    for key, attr in mapping.items():
        v = getattr(args, key, None)
        if v is not None:
            kw[attr] = v
    for k, v in args.tol:
        tols[k] = v
    return RunConfig(tolerances=tols, suites=(args.suite,), **kw).validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    report = run(cfg)
    if not args.quiet:
        for c in report.checks:
            print(f"{c.status:14s} {c.name:44s} computed={_fmt(c.computed)} expected={_fmt(c.expected)}")
    print(f"overall: {'pass' if report.passed else 'fail'} "
          f"({sum(c.passed for c in report.checks)}/{len(report.checks)} checks, "
          f"{report.wall_time:.1f}s)")
    if args.out:
        text = report.to_json() if args.format == "json" else report.to_csv()
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        if args.format == "csv":
            for name in report.tables:
                with open(f"{args.out.rsplit('.', 1)[0]}_{name}.csv", "w", encoding="utf-8") as fh:
                    fh.write(report.table_csv(name))
    return 0 if report.passed else 1


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
