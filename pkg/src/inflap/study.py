"""Quantitative study harness: convergence rates, continuous dependence,
equicontinuity, regularity estimates, and the stock verifier suite.

Reference solutions are restricted to closed forms (1D solutions of the
reduced ODE, cone profiles, and the axis-aligned tent), so that acceptance
never depends on a numerical oracle with its own error.  All studies lock
h = eps/10 to isolate the eps-dependence from lattice resolution effects.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._ballindex import get_ball_index
from ._modulus import ModulusEnvelope, boundary_modulus
from .geometry import LatticeDomain, build_box, build_interval
from .operator import (GridFunction, OperatorError, PartialGridFunction,
                       QuadraticTest, consistency_gap, fd_inf_laplacian,
                       max_over_balls)
from .solver import ProblemSpec, SolveReport, solve, solve_max

__all__ = [
    "boundary_modulus",
    "RateFamily",
    "RATE_FAMILIES",
    "RateReport",
    "rate_study",
    "DependenceReport",
    "dependence_study",
    "verify_sup_convolution",
    "stock_subsolution_pairs",
    "regularity_check",
    "REGULARITY_C",
    "small_f_experiment",
    "equicontinuity_check",
    "cauchy_check",
    "lipschitz_constant",
    "discrete_lipschitz",
]


# ---------------------------------------------------------------------------
# rate studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFamily:
    """A reference problem with a known continuum solution.

    ``build(eps)`` returns (ProblemSpec, reference values per point) on the
    h = eps/10 lattice.
    """

    name: str
    description: str
    build: callable


def _family_1d_linear(eps: float):
    dom = build_interval(0.0, 1.0, eps / 10.0)
    x = dom.points[:, 0]
    g = GridFunction(dom, x)
    return ProblemSpec(dom, GridFunction.zeros(dom), g, eps), x.copy()


def _family_1d_f1(eps: float):
    dom = build_interval(0.0, 1.0, eps / 10.0)
    x = dom.points[:, 0]
    f = GridFunction.constant(dom, 1.0)
    g = GridFunction.zeros(dom)
    return ProblemSpec(dom, f, g, eps), x * (1.0 - x) / 2.0


def _family_2d_cone(eps: float, side: float = 0.5):
    dom = build_box(0.0, side, 0.0, side, eps / 10.0)
    r = np.sqrt(np.sum(dom.points * dom.points, axis=1))
    g = GridFunction(dom, r)
    return ProblemSpec(dom, GridFunction.zeros(dom), g, eps), r


def _family_2d_tent(eps: float, side: float = 0.5):
    dom = build_box(0.0, side, 0.0, side, eps / 10.0)
    ref = np.abs(dom.points[:, 0] - side / 2.0)
    g = GridFunction(dom, ref)
    return ProblemSpec(dom, GridFunction.zeros(dom), g, eps), ref.copy()


RATE_FAMILIES = {
    "1d_linear": RateFamily("1d_linear", "f=0, g=x on [0,1]; solution x",
                            _family_1d_linear),
    "1d_f1": RateFamily("1d_f1", "f=1, g=0 on [0,1]; solution x(1-x)/2",
                        _family_1d_f1),
    "2d_cone": RateFamily("2d_cone", "f=0, corner-cone data |x| on a square",
                          _family_2d_cone),
    "2d_tent": RateFamily("2d_tent",
                          "f=0, ridge data |x1 - a| on a square",
                          _family_2d_tent),
}


@dataclass
class RateReport:
    family: str
    rows: list[tuple[float, float]]  # (eps, sup error)
    alpha_hat: float | None
    intercept: float | None
    r_squared: float | None
    exact: bool
    fit_flagged: bool

    def to_json_obj(self) -> dict:
        return {"family": self.family,
                "rows": [[e, v] for e, v in self.rows],
                "alpha_hat": self.alpha_hat, "intercept": self.intercept,
                "r_squared": self.r_squared, "exact": self.exact,
                "fit_flagged": self.fit_flagged}

    def to_csv(self) -> str:
        lines = ["eps,sup_error"]
        lines += [f"{e:.17g},{v:.17g}" for e, v in self.rows]
        return "\n".join(lines) + "\n"


def rate_study(family, eps_list, tol: float = 1e-10) -> RateReport:
    """Sup error against the family's closed-form reference across eps, with
    a log-log least-squares rate fit.

    Errors at the solver-accuracy floor (every error <= 10 tol) are reported
    as exact instead of fitted; fits with R^2 < 0.9 are flagged.
    """
    if isinstance(family, str):
        family = RATE_FAMILIES[family]
    if len(eps_list) < 3:
        raise ValueError("rate study needs at least 3 eps values")
    rows = []
    for eps in eps_list:
        prob, ref = family.build(eps)
        u = solve_max(prob)
        rows.append((float(eps), float(np.max(np.abs(u.values - ref)))))
    if all(err <= 10.0 * tol for _, err in rows):
        return RateReport(family.name, rows, None, None, None,
                          exact=True, fit_flagged=False)
    lx = np.log([e for e, _ in rows])
    ly = np.log([max(v, 1e-300) for _, v in rows])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateReport(family.name, rows, float(slope), float(intercept),
                      r2, exact=False, fit_flagged=bool(r2 < 0.9))


# ---------------------------------------------------------------------------
# continuous dependence from f = 0
# ---------------------------------------------------------------------------

@dataclass
class DependenceReport:
    rows: list[tuple[float, float, float]]  # (gamma, sup_diff, ratio)
    pointwise_monotone: bool
    supdiff_nondecreasing: bool
    bound_constant: float  # max ratio / (1 + ||g||_inf)

    def to_json_obj(self) -> dict:
        return {"rows": [[g, d, r] for g, d, r in self.rows],
                "pointwise_monotone": self.pointwise_monotone,
                "supdiff_nondecreasing": self.supdiff_nondecreasing,
                "bound_constant": self.bound_constant}

    def to_csv(self) -> str:
        lines = ["gamma,sup_diff,ratio"]
        lines += [f"{g:.17g},{d:.17g},{r:.17g}" for g, d, r in self.rows]
        return "\n".join(lines) + "\n"


def dependence_study(base: ProblemSpec, gammas) -> DependenceReport:
    """Growth of the solution when f = 0 is raised to f = gamma.

    ``base`` must have vanishing f; ``gammas`` must be strictly decreasing
    in (0, 1/8).  Records sup ||u_gamma - u_0|| and the cube-root-normalized
    ratios; checks that u_gamma dominates u_0 pointwise and that sup_diff is
    nondecreasing in gamma.
    """
    fi = base.f.values[base.domain.interior_ids]
    if fi.size and np.max(np.abs(fi)) != 0.0:
        raise ValueError("dependence study needs a base problem with f = 0")
    gammas = [float(g) for g in gammas]
    if any(not 0.0 < g < 0.125 for g in gammas):
        raise ValueError("gammas must lie in (0, 1/8)")
    if any(b >= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gammas must be strictly decreasing")
    u0 = solve_max(base)
    g_sup = float(np.max(np.abs(base.g.values[base.domain.boundary_ids])))
    rows = []
    monotone = True
    for gamma in gammas:
        prob = ProblemSpec(base.domain, GridFunction.constant(base.domain, gamma),
                           base.g, base.eps, base.tol, base.max_sweeps)
        ug = solve_max(prob)
        diff = ug.values - u0.values
        if float(np.min(diff)) < -base.tol:
            monotone = False
        sup_diff = float(np.max(np.abs(diff)))
        rows.append((gamma, sup_diff, sup_diff / gamma ** (1.0 / 3.0)))
    sup_by_desc = [d for _, d, _ in rows]
    nondecreasing = all(a >= b - base.tol
                        for a, b in zip(sup_by_desc, sup_by_desc[1:]))
    bound_c = max(r for _, _, r in rows) / (1.0 + g_sup)
    return DependenceReport(rows, monotone, nondecreasing, bound_c)


# ---------------------------------------------------------------------------
# continuum-to-discrete subsolution transfer
# ---------------------------------------------------------------------------

def stock_subsolution_pairs(dom: LatticeDomain):
    """Stock (name, u, h) pairs with -D_inf u <= h in the viscosity sense:
    cones (h = 0) and concave quadratics (h = -lambda_min of the Hessian)."""
    pts = dom.points
    center = pts.mean(axis=0)
    corner = pts[0]
    pairs = []
    for name, vertex in (("cone_corner", corner), ("cone_center", center)):
        r = np.sqrt(np.sum((pts - vertex) ** 2, axis=1))
        pairs.append((name, GridFunction(dom, r), GridFunction.zeros(dom)))
    sq = np.sum((pts - center) ** 2, axis=1)
    pairs.append(("concave_paraboloid",
                  GridFunction(dom, -0.5 * sq), GridFunction.constant(dom, 1.0)))
    if dom.dim == 2:
        saddle = 0.5 * ((pts[:, 0] - center[0]) ** 2
                        - (pts[:, 1] - center[1]) ** 2)
        pairs.append(("saddle", GridFunction(dom, saddle),
                      GridFunction.constant(dom, 1.0)))
    return pairs


def verify_sup_convolution(u_smooth: GridFunction, h_bound: GridFunction,
                           eps: float, slack: float | None = None):
    """Check that maxing a continuum subsolution over eps-balls produces a
    finite-difference subsolution: (S- - S+)/eps of u^eps stays below the
    2 eps ball max of h on the 2 eps inner set.

    Returns (worst violation, slack), or None when the 2 eps inner set is
    empty (skipped with a warning).
    """
    dom = u_smooth.domain
    dist = dom.dist_to_boundary()
    inner2 = np.flatnonzero(dist > 2.0 * eps)
    if inner2.size == 0:
        warnings.warn("2*eps inner set is empty; sup-convolution check "
                      "skipped")
        return None
    if slack is None:
        from .operator import lattice_slope_scale

        slack = 2.0 * (dom.h / eps) * lattice_slope_scale(u_smooth) / eps
    u_eps = max_over_balls(u_smooth, eps)
    bi = get_ball_index(dom, eps)
    bi2 = get_ball_index(dom, 2.0 * eps)
    worst = -np.inf
    for x in inner2:
        x = int(x)
        ids, rho = bi.members(x)
        slopes = (u_eps.values[ids] - u_eps.values[x]) / rho
        lhs = (np.max(-slopes) - np.max(slopes)) / eps
        ids2, _ = bi2.members(x)
        h2 = np.max(h_bound.values[ids2])
        worst = max(worst, lhs - h2)
    return float(worst), float(slack)


# ---------------------------------------------------------------------------
# interior regularity check
# ---------------------------------------------------------------------------

# interior-estimate constant, fitted once on the calibration instances
# (1D linear and 2D corner-cone data at eps = 0.1) and frozen
REGULARITY_C = 2.0

_PAIR_SAMPLE_CAP = 400


def regularity_check(report: SolveReport, p: ProblemSpec,
                     c_frozen: float = REGULARITY_C):
    """Interior continuity estimate: for r in {2 eps, 4 eps} and sampled
    pairs x, y in the r-inner set,

        |u(x) - u(y)| <= c_frozen (omega_g(r)/r + ||f||) rho_eps(x, y).

    Returns (passed, worst_ratio, worst_pair)."""
    u = report.u_max
    dom, eps = p.domain, p.eps
    omega = boundary_modulus(p.g, dom)
    fsup = p.f_sup()
    dist = dom.dist_to_boundary()
    worst = 0.0
    worst_pair = (-1, -1)
    for r in (2.0 * eps, 4.0 * eps):
        ids = np.flatnonzero(dist > r)
        if ids.size < 2:
            continue
        if ids.size > _PAIR_SAMPLE_CAP:
            stride = int(math.ceil(ids.size / _PAIR_SAMPLE_CAP))
            ids = ids[::stride]
        bound_scale = float(omega(r)) / r + fsup
        for a_pos, a in enumerate(ids):
            row = dom.distance_row(int(a))[ids[a_pos + 1:]]
            rho = np.maximum(row, eps)
            ratios = np.abs(u.values[ids[a_pos + 1:]] - u.values[a]) \
                / (bound_scale * rho)
            if ratios.size:
                j = int(np.argmax(ratios))
                if float(ratios[j]) > worst:
                    worst = float(ratios[j])
                    worst_pair = (int(a), int(ids[a_pos + 1:][j]))
    return worst <= c_frozen, worst, worst_pair


# ---------------------------------------------------------------------------
# small-f uniqueness experiment
# ---------------------------------------------------------------------------

def small_f_experiment(dom: LatticeDomain, g: GridFunction, f0: GridFunction,
                       scales, eps: float, tol: float = 1e-10):
    """Gap between extremal solutions as a sign-changing f is scaled down.

    Requires convex domain and boundary data that is locally nonconstant
    (every boundary point has a rim neighbor with a different value, the
    lattice proxy for nonconstancy on every boundary ball).  Returns rows
    (scale, gap) sorted by decreasing scale; a vanishing gap at small scales
    is the expected outcome, a persistent gap is a legitimate record of
    nonuniqueness.
    """
    if not dom.convex:
        raise ValueError("small-f experiment requires a convex domain")
    _require_locally_nonconstant(dom, g)
    fi = f0.values[dom.interior_ids]
    if not (np.max(fi) > 0.0 > np.min(fi)):
        raise ValueError("f0 must change sign on the interior")
    rows = []
    for scale in sorted((float(s) for s in scales), reverse=True):
        f = GridFunction(dom, scale * f0.values)
        rep = solve(ProblemSpec(dom, f, g, eps, tol))
        rows.append((scale, rep.gap))
    return rows


def _require_locally_nonconstant(dom: LatticeDomain, g: GridFunction):
    bd = dom.boundary_ids
    pts = dom.points[bd]
    vals = g.values[bd]
    for k, b in enumerate(bd):
        d = np.sqrt(np.sum((pts - pts[k]) ** 2, axis=1))
        near = (d > 0) & (d <= 2.0 * dom.h + 1e-12)
        if near.any() and np.all(vals[near] == vals[k]):
            raise ValueError(
                f"boundary data is locally constant near point {int(b)}; "
                "the small-f experiment requires locally nonconstant g")


# ---------------------------------------------------------------------------
# equicontinuity and Cauchy-in-eps checks
# ---------------------------------------------------------------------------

EQUICONTINUITY_TOL = 0.2  # relative spread allowed across eps
EQUICONTINUITY_S_MIN = 0.2


def _oscillation_modulus(u: GridFunction, s_values):
    """max |u(x) - u(y)| over pairs with d(x, y) <= s, per s."""
    dom = u.domain
    n = dom.n_points
    ids = np.arange(n)
    if n > _PAIR_SAMPLE_CAP:
        ids = ids[::int(math.ceil(n / _PAIR_SAMPLE_CAP))]
    out = np.zeros(len(s_values))
    for a_pos, a in enumerate(ids):
        row = dom.distance_row(int(a))[ids]
        diffs = np.abs(u.values[ids] - u.values[a])
        for k, s in enumerate(s_values):
            sel = row <= s
            if sel.any():
                out[k] = max(out[k], float(np.max(diffs[sel])))
    return out


def equicontinuity_check(make_instance, eps_list=(0.2, 0.1, 0.05),
                         s_values=(0.2, 0.4, 0.6, 0.8),
                         rel_tol: float = EQUICONTINUITY_TOL):
    """Desk-scale equicontinuity proxy: oscillation moduli of the solutions
    across eps agree within ``rel_tol`` at every scale s >= 0.2.

    Returns (passed, table s -> list of moduli per eps)."""
    tables = []
    for eps in eps_list:
        prob = make_instance(eps)
        u = solve_max(prob)
        tables.append(_oscillation_modulus(u, s_values))
    passed = True
    table = {}
    for k, s in enumerate(s_values):
        vals = [float(t[k]) for t in tables]
        hi = max(vals)
        if hi > 0 and (hi - min(vals)) / hi > rel_tol:
            passed = False
        table[float(s)] = vals
    return passed, table


def cauchy_check(make_instance, eps0: float = 0.2, levels: int = 3):
    """Solutions at eps, eps/2, eps/4, ... are Cauchy in sup norm on the
    shared coarse lattice points (1D instances; index-matched subsampling).

    Returns (passed, list of successive sup differences)."""
    sols = []
    for k in range(levels):
        prob = make_instance(eps0 / 2 ** k)
        if prob.domain.kind != "interval":
            raise ValueError("cauchy check is implemented for 1D instances")
        sols.append(solve_max(prob).values)
    diffs = []
    for a, b in zip(sols, sols[1:]):
        diffs.append(float(np.max(np.abs(a - b[::2][:a.size])))
                     if b.size >= 2 * a.size - 1 else math.inf)
    passed = all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
    return passed, diffs


# ---------------------------------------------------------------------------
# Lipschitz extension check helpers
# ---------------------------------------------------------------------------

def lipschitz_constant(g: GridFunction, dom: LatticeDomain | None = None,
                       boundary_only: bool = True) -> float:
    """Largest |g(x) - g(y)| / d(x, y) over (boundary) pairs."""
    if dom is None:
        dom = g.domain
    ids = dom.boundary_ids if boundary_only else np.arange(dom.n_points)
    worst = 0.0
    for pos, a in enumerate(ids):
        rest = ids[pos + 1:]
        if rest.size == 0:
            continue
        d = dom.distance_row(int(a))[rest]
        worst = max(worst, float(np.max(np.abs(g.values[rest] - g.values[a])
                                        / d)))
    return worst


def discrete_lipschitz(u: GridFunction, dom: LatticeDomain | None = None,
                       sample_cap: int | None = None) -> float:
    """Largest |u(x) - u(y)| / d(x, y) over all point pairs (or a strided
    sample when ``sample_cap`` is given)."""
    if dom is None:
        dom = u.domain
    ids = np.arange(dom.n_points)
    if sample_cap is not None and ids.size > sample_cap:
        ids = ids[::int(math.ceil(ids.size / sample_cap))]
    worst = 0.0
    for pos, a in enumerate(ids):
        rest = ids[pos + 1:]
        if rest.size == 0:
            continue
        d = dom.distance_row(int(a))[rest]
        worst = max(worst, float(np.max(np.abs(u.values[rest] - u.values[a])
                                        / d)))
    return worst
