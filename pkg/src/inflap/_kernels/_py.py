"""Pure-Python kernels: Gauss-Seidel sweeps, residuals, game step loops.

These are the reference implementations; `inflap._kernels._cy` is a compiled
twin with identical floating-point semantics (same operations in the same
order).  Keep the two in lockstep when editing.

Conventions shared by all sweep kernels:

* ``u`` is the value array over all points and is updated in place.
* ``f`` holds the running payoff per point (boundary entries unused).
* Interior members of a ball carry rho = eps; boundary members carry their
  path distance (precomputed CSR: bd_ptr/bd_ids/bd_rho per interior point in
  interior order).
* The local update solves G(t) = S+(t) - S-(t) + eps*f = 0, closed form when
  the ball has no boundary member, bisection otherwise.  G is strictly
  decreasing, so the root is unique.
"""

from __future__ import annotations

import math

__all__ = [
    "sweep_interval", "sweep_box", "sweep_csr",
    "residual_interval", "residual_box", "residual_csr",
    "game_segment", "TABLE", "UNIFORM",
]

_MAX_BISECT = 200


# ---------------------------------------------------------------------------
# local root
# ---------------------------------------------------------------------------

def _closed_form_root(mx: float, mn: float, eps: float, fx: float) -> float:
    # all-rho=eps ball: G piecewise linear with three regimes
    e2f = eps * eps * fx
    d = mx - mn
    if e2f > d:
        return mn + e2f
    if e2f < -d:
        return mx + e2f
    return 0.5 * (mx + mn + e2f)


def _bisect_root(mx, mn, eps, fx, fsup, tol, u, bd_ids, bd_rho, b0, b1):
    # bracket from the spec: [ball min - eps^2 fsup, ball max + eps^2 fsup]
    lo = mn
    hi = mx
    rho_min = eps
    for b in range(b0, b1):
        v = u[bd_ids[b]]
        if v < lo:
            lo = v
        if v > hi:
            hi = v
        if bd_rho[b] < rho_min:
            rho_min = bd_rho[b]
    pad = eps * eps * fsup
    lo -= pad
    hi += pad
    if hi <= lo:
        return lo
    # root accuracy must beat tol * eps * rho_min so that the fixed point
    # certifies residual <= tol even next to the boundary
    tol_t = 0.1 * tol
    alt = 0.25 * tol * eps * rho_min
    if alt < tol_t:
        tol_t = alt
    it = 0
    while hi - lo > tol_t and it < _MAX_BISECT:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        sp = 0.0
        if mx > -math.inf:
            v = (mx - mid) / eps
            if v > sp:
                sp = v
        sm = 0.0
        if mn < math.inf:
            v = (mid - mn) / eps
            if v > sm:
                sm = v
        for b in range(b0, b1):
            ub = u[bd_ids[b]]
            rb = bd_rho[b]
            v = (ub - mid) / rb
            if v > sp:
                sp = v
            v = (mid - ub) / rb
            if v > sm:
                sm = v
        if sp - sm + eps * fx > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return 0.5 * (lo + hi)


def _eval_g(t, mx, mn, eps, fx, u, bd_ids, bd_rho, b0, b1):
    sp = 0.0
    if mx > -math.inf:
        v = (mx - t) / eps
        if v > sp:
            sp = v
    sm = 0.0
    if mn < math.inf:
        v = (t - mn) / eps
        if v > sm:
            sm = v
    for b in range(b0, b1):
        ub = u[bd_ids[b]]
        rb = bd_rho[b]
        v = (ub - t) / rb
        if v > sp:
            sp = v
        v = (t - ub) / rb
        if v > sm:
            sm = v
    return sp - sm + eps * fx


# ---------------------------------------------------------------------------
# interior max/min enumeration per domain kind
# ---------------------------------------------------------------------------

def _minmax_interval(u, i, nx, reach):
    lo = i - reach
    if lo < 1:
        lo = 1
    hi = i + reach
    if hi > nx - 2:
        hi = nx - 2
    mx = -math.inf
    mn = math.inf
    for j in range(lo, hi + 1):
        if j == i:
            continue
        v = u[j]
        if v > mx:
            mx = v
        if v < mn:
            mn = v
    return mx, mn


def _minmax_box(u, r, c, ny, nx, reach, widths):
    mx = -math.inf
    mn = math.inf
    for dy in range(-reach, reach + 1):
        rr = r + dy
        if rr < 1 or rr > ny - 2:
            continue
        w = widths[dy if dy >= 0 else -dy]
        c0 = c - w
        if c0 < 1:
            c0 = 1
        c1 = c + w
        if c1 > nx - 2:
            c1 = nx - 2
        base = rr * nx
        for cc in range(c0, c1 + 1):
            if rr == r and cc == c:
                continue
            v = u[base + cc]
            if v > mx:
                mx = v
            if v < mn:
                mn = v
    return mx, mn


def _minmax_csr(u, k, int_ptr, int_ids):
    mx = -math.inf
    mn = math.inf
    for j in range(int_ptr[k], int_ptr[k + 1]):
        v = u[int_ids[j]]
        if v > mx:
            mx = v
        if v < mn:
            mn = v
    return mx, mn


# ---------------------------------------------------------------------------
# Gauss-Seidel sweeps (update in place, return max |change| and max increase)
# ---------------------------------------------------------------------------

def sweep_interval(u, f, eps, fsup, tol, nx, reach,
                   bd_ptr, bd_ids, bd_rho, interior_ids, ascending):
    n_int = len(interior_ids)
    max_change = 0.0
    max_increase = 0.0
    ks = range(n_int) if ascending else range(n_int - 1, -1, -1)
    for k in ks:
        i = interior_ids[k]
        mx, mn = _minmax_interval(u, i, nx, reach)
        b0, b1 = bd_ptr[k], bd_ptr[k + 1]
        fx = f[i]
        if b0 == b1:
            t = _closed_form_root(mx, mn, eps, fx)
        else:
            t = _bisect_root(mx, mn, eps, fx, fsup, tol, u,
                             bd_ids, bd_rho, b0, b1)
        delta = t - u[i]
        u[i] = t
        a = delta if delta >= 0.0 else -delta
        if a > max_change:
            max_change = a
        if delta > max_increase:
            max_increase = delta
    return max_change, max_increase


def sweep_box(u, f, eps, fsup, tol, ny, nx, reach, widths,
              bd_ptr, bd_ids, bd_rho, interior_ids, ascending):
    n_int = len(interior_ids)
    max_change = 0.0
    max_increase = 0.0
    ks = range(n_int) if ascending else range(n_int - 1, -1, -1)
    for k in ks:
        i = interior_ids[k]
        r = i // nx
        c = i - r * nx
        mx, mn = _minmax_box(u, r, c, ny, nx, reach, widths)
        b0, b1 = bd_ptr[k], bd_ptr[k + 1]
        fx = f[i]
        if b0 == b1:
            t = _closed_form_root(mx, mn, eps, fx)
        else:
            t = _bisect_root(mx, mn, eps, fx, fsup, tol, u,
                             bd_ids, bd_rho, b0, b1)
        delta = t - u[i]
        u[i] = t
        a = delta if delta >= 0.0 else -delta
        if a > max_change:
            max_change = a
        if delta > max_increase:
            max_increase = delta
    return max_change, max_increase


def sweep_csr(u, f, eps, fsup, tol, int_ptr, int_ids,
              bd_ptr, bd_ids, bd_rho, interior_ids, ascending):
    n_int = len(interior_ids)
    max_change = 0.0
    max_increase = 0.0
    ks = range(n_int) if ascending else range(n_int - 1, -1, -1)
    for k in ks:
        i = interior_ids[k]
        mx, mn = _minmax_csr(u, k, int_ptr, int_ids)
        b0, b1 = bd_ptr[k], bd_ptr[k + 1]
        fx = f[i]
        if b0 == b1:
            t = _closed_form_root(mx, mn, eps, fx)
        else:
            t = _bisect_root(mx, mn, eps, fx, fsup, tol, u,
                             bd_ids, bd_rho, b0, b1)
        delta = t - u[i]
        u[i] = t
        a = delta if delta >= 0.0 else -delta
        if a > max_change:
            max_change = a
        if delta > max_increase:
            max_increase = delta
    return max_change, max_increase


# ---------------------------------------------------------------------------
# interior residual: max |(S- - S+)/eps - f|
# ---------------------------------------------------------------------------

def residual_interval(u, f, eps, nx, reach, bd_ptr, bd_ids, bd_rho,
                      interior_ids):
    worst = 0.0
    for k in range(len(interior_ids)):
        i = interior_ids[k]
        mx, mn = _minmax_interval(u, i, nx, reach)
        g = _eval_g(u[i], mx, mn, eps, f[i], u, bd_ids, bd_rho,
                    bd_ptr[k], bd_ptr[k + 1])
        a = g / eps
        if a < 0.0:
            a = -a
        if a > worst:
            worst = a
    return worst


def residual_box(u, f, eps, ny, nx, reach, widths, bd_ptr, bd_ids, bd_rho,
                 interior_ids):
    worst = 0.0
    for k in range(len(interior_ids)):
        i = interior_ids[k]
        r = i // nx
        c = i - r * nx
        mx, mn = _minmax_box(u, r, c, ny, nx, reach, widths)
        g = _eval_g(u[i], mx, mn, eps, f[i], u, bd_ids, bd_rho,
                    bd_ptr[k], bd_ptr[k + 1])
        a = g / eps
        if a < 0.0:
            a = -a
        if a > worst:
            worst = a
    return worst


def residual_csr(u, f, eps, int_ptr, int_ids, bd_ptr, bd_ids, bd_rho,
                 interior_ids):
    worst = 0.0
    for k in range(len(interior_ids)):
        i = interior_ids[k]
        mx, mn = _minmax_csr(u, k, int_ptr, int_ids)
        g = _eval_g(u[i], mx, mn, eps, f[i], u, bd_ids, bd_rho,
                    bd_ptr[k], bd_ptr[k + 1])
        a = g / eps
        if a < 0.0:
            a = -a
        if a > worst:
            worst = a
    return worst


# ---------------------------------------------------------------------------
# game step loop
# ---------------------------------------------------------------------------

# strategy kind codes
TABLE = 0
UNIFORM = 1


def game_segment(pos, acc, steps, max_steps, draws, mirror,
                 kind_i, move_i, rho_i, kind_ii, move_ii, rho_ii,
                 memb_ptr, memb_ids, memb_rho,
                 f, g, is_boundary, pos_of_point, eps, record=None):
    """Advance one replication until the draw buffer runs out, the token
    exits, or max_steps is hit.

    Returns (pos, acc, steps, status, used) with status 1 = terminated,
    0 = still running (needs more draws), -1 = truncated at max_steps.
    Draw consumption order per step: player-I uniform draw (if uniform),
    player-II uniform draw (if uniform), coin draw.  When ``record`` is
    given, positions after each step of this segment are written into it.
    """
    n_draws = len(draws)
    used = 0
    seg = 0
    while steps < max_steps:
        k = pos_of_point[pos]
        need = 1 + (kind_i == UNIFORM) + (kind_ii == UNIFORM)
        if used + need > n_draws:
            return pos, acc, steps, 0, used
        if kind_i == UNIFORM:
            d = draws[used]
            used += 1
            if mirror:
                d = 1.0 - d
            lo = memb_ptr[k]
            idx = lo + int(d * (memb_ptr[k + 1] - lo))
            if idx >= memb_ptr[k + 1]:
                idx = memb_ptr[k + 1] - 1
            yi = memb_ids[idx]
            ri = memb_rho[idx]
        else:
            yi = move_i[k]
            ri = rho_i[k]
        if kind_ii == UNIFORM:
            d = draws[used]
            used += 1
            if mirror:
                d = 1.0 - d
            lo = memb_ptr[k]
            idx = lo + int(d * (memb_ptr[k + 1] - lo))
            if idx >= memb_ptr[k + 1]:
                idx = memb_ptr[k + 1] - 1
            yii = memb_ids[idx]
            rii = memb_rho[idx]
        else:
            yii = move_ii[k]
            rii = rho_ii[k]
        d = draws[used]
        used += 1
        if mirror:
            d = 1.0 - d
        p_i = rii / (ri + rii)
        if d < p_i:
            acc += ri * f[pos]
            pos = yi
        else:
            acc += rii * f[pos]
            pos = yii
        steps += 1
        if record is not None:
            record[seg] = pos
            seg += 1
        if is_boundary[pos]:
            return pos, acc, steps, 1, used
    return pos, acc, steps, -1, used
