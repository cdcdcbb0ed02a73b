"""Monotone Gauss-Seidel solver for the boundary-biased difference equation.

Solves  (S- u - S+ u)/eps = f  in the interior with u = g pinned on the
boundary.  The maximal solution is reached by sweeping the local dynamic
programming update downward from an envelope of quadratic-cone
supersolutions; the minimal solution is the negated maximal solution of the
negated data.  Convergence is certified a posteriori: the returned function
has interior residual below the requested tolerance, or a divergence error
reports the best residual reached.

The local update at a point solves G(t) = S+(t) - S-(t) + eps f = 0 with the
point's own value replaced by the unknown t.  G is strictly decreasing in t
(slope <= -2/eps), so the root is unique; it is monotone nondecreasing in
every neighbor value, which makes sweeps order-preserving and the descent
from a lattice supersolution monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._ballindex import BallIndex, get_ball_index
from ._kernels._py import _bisect_root, _closed_form_root
from ._modulus import ModulusEnvelope, boundary_modulus
from .geometry import BALL_TOL, LatticeDomain
from .operator import (GridFunction, OperatorError, detect_strict_local_extrema,
                       interior_residual, residual)

__all__ = [
    "ProblemSpec",
    "SolveReport",
    "SolverError",
    "CertificationError",
    "DivergenceError",
    "local_update",
    "supersolution_envelope",
    "solve_max",
    "solve_min",
    "solve",
    "standard_game_1d_oracle",
]

UNIQUENESS_FACTOR = 10.0  # gap <= UNIQUENESS_FACTOR * tol counts as unique


class SolverError(RuntimeError):
    pass


class CertificationError(SolverError):
    """A proven property failed on the computed output: solver bug class."""


class DivergenceError(SolverError):
    def __init__(self, msg, residual, sweeps):
        super().__init__(msg)
        self.residual = residual
        self.sweeps = sweeps


@dataclass(frozen=True)
class ProblemSpec:
    """Dirichlet data for one solve.

    ``f`` supplies the interior right-hand side (boundary entries unused);
    ``g`` supplies boundary values (interior entries unused).
    """

    domain: LatticeDomain
    f: GridFunction
    g: GridFunction
    eps: float
    tol: float = 1e-10
    max_sweeps: int = 10 ** 6

    def __post_init__(self):
        if self.eps < 2.0 * self.domain.h - BALL_TOL:
            raise OperatorError(
                f"eps = {self.eps:g} violates the resolution guard eps >= 2h "
                f"(h = {self.domain.h:g})")
        if self.f.domain is not self.domain or self.g.domain is not self.domain:
            raise OperatorError("f and g must live on the problem domain")
        if self.tol <= 0:
            raise OperatorError("tol must be positive")

    def f_sup(self) -> float:
        ids = self.domain.interior_ids
        return float(np.max(np.abs(self.f.values[ids]))) if ids.size else 0.0

    def negated(self) -> "ProblemSpec":
        return ProblemSpec(self.domain, GridFunction(self.domain, -self.f.values),
                           GridFunction(self.domain, -self.g.values),
                           self.eps, self.tol, self.max_sweeps)


@dataclass
class SolveReport:
    u_max: GridFunction
    u_min: GridFunction
    residual_max: tuple[float, float]
    residual_min: tuple[float, float]
    sweeps_max: int
    sweeps_min: int
    gap: float
    unique: bool
    max_witnesses: list = field(default_factory=list)
    min_witnesses: list = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "gap": self.gap,
            "unique": self.unique,
            "sweeps_max": self.sweeps_max,
            "sweeps_min": self.sweeps_min,
            "residual_max": list(self.residual_max),
            "residual_min": list(self.residual_min),
            "max_witnesses": [[anchor, sorted(wit)] for anchor, _, wit
                              in self.max_witnesses],
            "min_witnesses": [[anchor, sorted(wit)] for anchor, _, wit
                              in self.min_witnesses],
        }


# ---------------------------------------------------------------------------
# local update
# ---------------------------------------------------------------------------

def local_update(u: GridFunction, f: GridFunction, eps: float, x: int) -> float:
    """Root of the dynamic-programming relation at interior ``x``.

    Closed form when every ball member carries rho = eps (no boundary member
    in the ball); bisection on the bracket
    [ball min - eps^2 ||f||, ball max + eps^2 ||f||] otherwise.
    """
    dom = u.domain
    if dom.is_boundary[x]:
        raise OperatorError(f"local_update needs an interior point, got {x}")
    bi = get_ball_index(dom, eps)
    ids, _ = bi.members(int(x))
    others = ids[ids != x]
    is_bd = dom.is_boundary[others]
    int_vals = u.values[others[~is_bd]]
    bd_ids, bd_rho = bi.boundary_members(int(x))
    mx = float(np.max(int_vals)) if int_vals.size else -np.inf
    mn = float(np.min(int_vals)) if int_vals.size else np.inf
    fx = float(f.values[x])
    if bd_ids.size == 0:
        return _closed_form_root(mx, mn, eps, fx)
    fsup = float(np.max(np.abs(f.values[dom.interior_ids])))
    return _bisect_root(mx, mn, eps, fx, fsup, 1e-10, u.values,
                        bd_ids, bd_rho, 0, bd_ids.size)


# ---------------------------------------------------------------------------
# supersolution envelope initialization
# ---------------------------------------------------------------------------

def supersolution_envelope(p: ProblemSpec,
                           modulus: ModulusEnvelope | None = None
                           ) -> tuple[np.ndarray, float, float]:
    """Upper envelope of quadratic-cone supersolutions, one per boundary
    point, with the boundary-regularity parameter choice: slope
    omega(d)/d + (eps + diam) c, curvature c = ||f|| (or 1 when f vanishes),
    boundary drop delta = eps^2 c / 8.

    Returns (values with boundary pinned to g, c, slope scale b).
    """
    dom, eps = p.domain, p.eps
    if modulus is None:
        modulus = boundary_modulus(p.g, dom)
    c = p.f_sup()
    if c == 0.0:
        c = 1.0
    delta = eps * eps * c / 8.0
    diam = dom.diam()
    bd = dom.boundary_ids
    gb = p.g.values[bd]
    out = np.full(dom.n_points, np.inf)
    if dom.convex:
        pts, bpts = dom.points, dom.points[bd]
        chunk = max(1, int(4e6) // max(1, bd.size))
        for lo in range(0, dom.n_points, chunk):
            hi = min(dom.n_points, lo + chunk)
            diff = pts[lo:hi, None, :] - bpts[None, :, :]
            d = np.sqrt(np.sum(diff * diff, axis=2))
            vals = gb[None, :] + 2.0 * modulus(d) \
                + (eps + diam) * c * d - 0.5 * c * d * d
            out[lo:hi] = np.min(vals, axis=1)
    else:
        from scipy.sparse.csgraph import dijkstra

        dmat = dijkstra(dom.graph(), directed=False, indices=bd)
        vals = gb[:, None] + 2.0 * modulus(dmat) \
            + (eps + diam) * c * dmat - 0.5 * c * dmat * dmat
        out = np.min(vals, axis=0)
    out = out + delta
    out[bd] = p.g.values[bd]
    b_scale = modulus.max_slope + (eps + diam) * c
    return out, c, b_scale


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _engine_sweep(u_vals, f_vals, eps, fsup, tol, bi: BallIndex, ascending):
    dom = bi.dom
    if dom.kind == "interval":
        return _kernels.sweep_interval(
            u_vals, f_vals, eps, fsup, tol, dom.n_points, bi.reach,
            bi.bd_ptr, bi.bd_ids, bi.bd_rho, bi.interior_ids, ascending)
    if dom.kind == "box":
        ny, nx = dom.grid_shape
        return _kernels.sweep_box(
            u_vals, f_vals, eps, fsup, tol, ny, nx, bi.reach, bi.widths,
            bi.bd_ptr, bi.bd_ids, bi.bd_rho, bi.interior_ids, ascending)
    return _kernels.sweep_csr(
        u_vals, f_vals, eps, fsup, tol, bi.int_ptr, bi.int_ids,
        bi.bd_ptr, bi.bd_ids, bi.bd_rho, bi.interior_ids, ascending)


def _solve_directed(p: ProblemSpec, trace: list | None = None):
    """Monotone descent from the cone envelope; returns (values, sweeps,
    interior residual)."""
    dom, eps, tol = p.domain, p.eps, p.tol
    bi = get_ball_index(dom, eps)
    u, c_init, b_scale = supersolution_envelope(p)
    # the continuum cone proof survives lattice sampling up to an O(h) slope
    # defect; only that much ascent is ever tolerated in a sweep
    monotone_slack = 4.0 * dom.h * (b_scale + c_init) + 1e-12
    fsup = p.f_sup()
    f_vals = p.f.values
    ascending = True
    threshold = tol
    sweeps = 0
    best_resid = np.inf
    while sweeps < p.max_sweeps:
        change, increase = _engine_sweep(u, f_vals, eps, fsup, tol, bi,
                                         ascending)
        sweeps += 1
        ascending = not ascending
        if trace is not None:
            trace.append((change, increase))
        if increase > monotone_slack:
            raise CertificationError(
                f"sweep {sweeps} increased a value by {increase:g}, beyond "
                f"the lattice supersolution slack {monotone_slack:g}")
        if change < threshold:
            resid = _engine_residual_vals(u, f_vals, eps, bi)
            best_resid = min(best_resid, resid)
            if resid <= tol:
                return u, sweeps, resid
            threshold *= 0.1
    raise DivergenceError(
        f"no convergence within {p.max_sweeps} sweeps "
        f"(best interior residual {best_resid:g})", best_resid, sweeps)


def _engine_residual_vals(u_vals, f_vals, eps, bi: BallIndex) -> float:
    from .operator import _engine_residual

    return _engine_residual(u_vals, f_vals, eps, bi)


def solve_max(p: ProblemSpec) -> GridFunction:
    """Maximal solution (the high-bidder value function)."""
    vals, _, _ = _solve_directed(p)
    return GridFunction(p.domain, vals)


def solve_min(p: ProblemSpec) -> GridFunction:
    """Minimal solution: negated maximal solution of the negated data."""
    vals, _, _ = _solve_directed(p.negated())
    return GridFunction(p.domain, -vals)


def solve(p: ProblemSpec) -> SolveReport:
    """Solve both envelopes and certify the uniqueness dichotomy.

    When the max/min gap exceeds 10 tol, the maximal solution must exhibit a
    strict eps-local maximum and the minimal one a strict eps-local minimum;
    when f is one-signed the gap must vanish.  Violations raise
    CertificationError (they indicate a solver bug, not bad data).
    """
    vmax, sweeps_max, _ = _solve_directed(p)
    vneg, sweeps_min, _ = _solve_directed(p.negated())
    u_max = GridFunction(p.domain, vmax)
    u_min = GridFunction(p.domain, -vneg)
    res_max = residual(u_max, p.f, p.g, p.eps)
    res_min = residual(u_min, p.f, p.g, p.eps)
    gap = float(np.max(np.abs(u_max.values - u_min.values)))
    unique = gap <= UNIQUENESS_FACTOR * p.tol
    report = SolveReport(u_max, u_min, res_max, res_min,
                         sweeps_max, sweeps_min, gap, unique)
    if np.min(u_max.values - u_min.values) < -p.tol:
        raise CertificationError(
            "minimal solution exceeds maximal solution beyond tolerance")
    if not unique:
        fi = p.f.values[p.domain.interior_ids]
        if fi.size and (np.min(fi) >= 0.0 or np.max(fi) <= 0.0):
            raise CertificationError(
                f"one-signed f must give a unique solution, got gap {gap:g}")
        report.max_witnesses = [w for w in
                                detect_strict_local_extrema(u_max, p.eps)
                                if w[1] == "max"]
        report.min_witnesses = [w for w in
                                detect_strict_local_extrema(u_min, p.eps)
                                if w[1] == "min"]
        if not report.max_witnesses or not report.min_witnesses:
            raise CertificationError(
                "nonunique solve without strict eps-local extremum witnesses")
    return report


# ---------------------------------------------------------------------------
# 1D standard-game oracle
# ---------------------------------------------------------------------------

def standard_game_1d_oracle(k: int) -> np.ndarray:
    """Exact solution of the fair-coin game system on k interval cells:

        2 v_1 - v_2 = 0,   -v_{j-1} + 2 v_j - v_{j+1} = 0,   -v_{k-1} + 2 v_k = 1,

    solved by direct tridiagonal elimination.  This yields v_j = j/(k+1);
    note the closed form (j+1)/(k+1) sometimes quoted for this system does
    not satisfy its first equation, so tests pin the elimination result.
    """
    if k < 2:
        raise ValueError(f"need k >= 2 cells, got {k}")
    diag = np.full(k, 2.0)
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    # forward elimination with unit sub/super-diagonal -1
    for i in range(1, k):
        m = -1.0 / diag[i - 1]
        diag[i] += m
        rhs[i] -= m * rhs[i - 1]
    v = np.empty(k)
    v[-1] = rhs[-1] / diag[-1]
    for i in range(k - 2, -1, -1):
        v[i] = (rhs[i] + v[i + 1]) / diag[i]
    return v
