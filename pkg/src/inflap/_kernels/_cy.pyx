# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Gauss-Seidel sweeps, residuals, game step loop.

Twin of inflap._kernels._py with identical floating-point semantics: same
operations in the same order.  Keep the two in lockstep when editing.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

TABLE = 0
UNIFORM = 1

cdef int _MAX_BISECT = 200


cdef inline double _closed_form_root(double mx, double mn, double eps,
                                     double fx) nogil:
    cdef double e2f = eps * eps * fx
    cdef double d = mx - mn
    if e2f > d:
        return mn + e2f
    if e2f < -d:
        return mx + e2f
    return 0.5 * (mx + mn + e2f)


cdef double _bisect_root(double mx, double mn, double eps, double fx,
                         double fsup, double tol, const double[:] u,
                         const cnp.int64_t[:] bd_ids, const double[:] bd_rho,
                         long long b0, long long b1) nogil:
    cdef double lo = mn
    cdef double hi = mx
    cdef double rho_min = eps
    cdef long long b
    cdef double v, pad, tol_t, alt, mid, sp, sm, ub, rb
    cdef int it
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
        if mx > -INFINITY:
            v = (mx - mid) / eps
            if v > sp:
                sp = v
        sm = 0.0
        if mn < INFINITY:
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


cdef inline double _eval_g(double t, double mx, double mn, double eps,
                           double fx, const double[:] u, const cnp.int64_t[:] bd_ids,
                           const double[:] bd_rho, long long b0,
                           long long b1) nogil:
    cdef double sp = 0.0
    cdef double sm = 0.0
    cdef double v, ub, rb
    cdef long long b
    if mx > -INFINITY:
        v = (mx - t) / eps
        if v > sp:
            sp = v
    if mn < INFINITY:
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


cdef inline void _minmax_interval(const double[:] u, long long i, long long nx,
                                  long long reach, double* mx,
                                  double* mn) nogil:
    cdef long long lo = i - reach
    cdef long long hi = i + reach
    cdef long long j
    cdef double v
    if lo < 1:
        lo = 1
    if hi > nx - 2:
        hi = nx - 2
    mx[0] = -INFINITY
    mn[0] = INFINITY
    for j in range(lo, hi + 1):
        if j == i:
            continue
        v = u[j]
        if v > mx[0]:
            mx[0] = v
        if v < mn[0]:
            mn[0] = v


cdef inline void _minmax_box(const double[:] u, long long r, long long c,
                             long long ny, long long nx, long long reach,
                             const cnp.int64_t[:] widths, double* mx,
                             double* mn) nogil:
    cdef long long dy, rr, w, c0, c1, base, cc
    cdef double v
    mx[0] = -INFINITY
    mn[0] = INFINITY
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
            if v > mx[0]:
                mx[0] = v
            if v < mn[0]:
                mn[0] = v


cdef inline void _minmax_csr(const double[:] u, long long k, const cnp.int64_t[:] int_ptr,
                             const cnp.int64_t[:] int_ids, double* mx,
                             double* mn) nogil:
    cdef long long j
    cdef double v
    mx[0] = -INFINITY
    mn[0] = INFINITY
    for j in range(int_ptr[k], int_ptr[k + 1]):
        v = u[int_ids[j]]
        if v > mx[0]:
            mx[0] = v
        if v < mn[0]:
            mn[0] = v


def sweep_interval(double[:] u, const double[:] f, double eps, double fsup,
                   double tol, long long nx, long long reach,
                   const cnp.int64_t[:] bd_ptr, const cnp.int64_t[:] bd_ids,
                   const double[:] bd_rho, const cnp.int64_t[:] interior_ids,
                   bint ascending):
    cdef long long n_int = interior_ids.shape[0]
    cdef double max_change = 0.0
    cdef double max_increase = 0.0
    cdef long long k, i, b0, b1, kk
    cdef double mx, mn, fx, t, delta, a
    with nogil:
        for kk in range(n_int):
            k = kk if ascending else n_int - 1 - kk
            i = interior_ids[k]
            _minmax_interval(u, i, nx, reach, &mx, &mn)
            b0 = bd_ptr[k]
            b1 = bd_ptr[k + 1]
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


def sweep_box(double[:] u, const double[:] f, double eps, double fsup, double tol,
              long long ny, long long nx, long long reach,
              const cnp.int64_t[:] widths, const cnp.int64_t[:] bd_ptr, const cnp.int64_t[:] bd_ids,
              const double[:] bd_rho, const cnp.int64_t[:] interior_ids, bint ascending):
    cdef long long n_int = interior_ids.shape[0]
    cdef double max_change = 0.0
    cdef double max_increase = 0.0
    cdef long long k, i, r, c, b0, b1, kk
    cdef double mx, mn, fx, t, delta, a
    with nogil:
        for kk in range(n_int):
            k = kk if ascending else n_int - 1 - kk
            i = interior_ids[k]
            r = i // nx
            c = i - r * nx
            _minmax_box(u, r, c, ny, nx, reach, widths, &mx, &mn)
            b0 = bd_ptr[k]
            b1 = bd_ptr[k + 1]
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


def sweep_csr(double[:] u, const double[:] f, double eps, double fsup, double tol,
              const cnp.int64_t[:] int_ptr, const cnp.int64_t[:] int_ids,
              const cnp.int64_t[:] bd_ptr, const cnp.int64_t[:] bd_ids, const double[:] bd_rho,
              const cnp.int64_t[:] interior_ids, bint ascending):
    cdef long long n_int = interior_ids.shape[0]
    cdef double max_change = 0.0
    cdef double max_increase = 0.0
    cdef long long k, i, b0, b1, kk
    cdef double mx, mn, fx, t, delta, a
    with nogil:
        for kk in range(n_int):
            k = kk if ascending else n_int - 1 - kk
            i = interior_ids[k]
            _minmax_csr(u, k, int_ptr, int_ids, &mx, &mn)
            b0 = bd_ptr[k]
            b1 = bd_ptr[k + 1]
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


def residual_interval(const double[:] u, const double[:] f, double eps, long long nx,
                      long long reach, const cnp.int64_t[:] bd_ptr,
                      const cnp.int64_t[:] bd_ids, const double[:] bd_rho,
                      const cnp.int64_t[:] interior_ids):
    cdef long long n_int = interior_ids.shape[0]
    cdef double worst = 0.0
    cdef long long k, i
    cdef double mx, mn, g, a
    with nogil:
        for k in range(n_int):
            i = interior_ids[k]
            _minmax_interval(u, i, nx, reach, &mx, &mn)
            g = _eval_g(u[i], mx, mn, eps, f[i], u, bd_ids, bd_rho,
                        bd_ptr[k], bd_ptr[k + 1])
            a = g / eps
            if a < 0.0:
                a = -a
            if a > worst:
                worst = a
    return worst


def residual_box(const double[:] u, const double[:] f, double eps, long long ny,
                 long long nx, long long reach, const cnp.int64_t[:] widths,
                 const cnp.int64_t[:] bd_ptr, const cnp.int64_t[:] bd_ids, const double[:] bd_rho,
                 const cnp.int64_t[:] interior_ids):
    cdef long long n_int = interior_ids.shape[0]
    cdef double worst = 0.0
    cdef long long k, i, r, c
    cdef double mx, mn, g, a
    with nogil:
        for k in range(n_int):
            i = interior_ids[k]
            r = i // nx
            c = i - r * nx
            _minmax_box(u, r, c, ny, nx, reach, widths, &mx, &mn)
            g = _eval_g(u[i], mx, mn, eps, f[i], u, bd_ids, bd_rho,
                        bd_ptr[k], bd_ptr[k + 1])
            a = g / eps
            if a < 0.0:
                a = -a
            if a > worst:
                worst = a
    return worst


def residual_csr(const double[:] u, const double[:] f, double eps, const cnp.int64_t[:] int_ptr,
                 const cnp.int64_t[:] int_ids, const cnp.int64_t[:] bd_ptr,
                 const cnp.int64_t[:] bd_ids, const double[:] bd_rho,
                 const cnp.int64_t[:] interior_ids):
    cdef long long n_int = interior_ids.shape[0]
    cdef double worst = 0.0
    cdef long long k, i
    cdef double mx, mn, g, a
    with nogil:
        for k in range(n_int):
            i = interior_ids[k]
            _minmax_csr(u, k, int_ptr, int_ids, &mx, &mn)
            g = _eval_g(u[i], mx, mn, eps, f[i], u, bd_ids, bd_rho,
                        bd_ptr[k], bd_ptr[k + 1])
            a = g / eps
            if a < 0.0:
                a = -a
            if a > worst:
                worst = a
    return worst


def game_segment(long long pos, double acc, long long steps,
                 long long max_steps, const double[:] draws, bint mirror,
                 int kind_i, const cnp.int64_t[:] move_i, const double[:] rho_i,
                 int kind_ii, const cnp.int64_t[:] move_ii, const double[:] rho_ii,
                 const cnp.int64_t[:] memb_ptr, const cnp.int64_t[:] memb_ids,
                 const double[:] memb_rho, const double[:] f, const double[:] g,
                 const cnp.uint8_t[:] is_boundary, const cnp.int64_t[:] pos_of_point,
                 double eps, record=None):
    cdef long long n_draws = draws.shape[0]
    cdef long long used = 0
    cdef long long seg = 0
    cdef long long k, need, lo, idx, yi, yii
    cdef double d, ri, rii, p_i
    cdef int status = 0
    cdef cnp.int64_t[:] rec = None
    cdef bint recording = record is not None
    if recording:
        rec = record
    with nogil:
        while steps < max_steps:
            k = pos_of_point[pos]
            need = 1 + (1 if kind_i == 1 else 0) + (1 if kind_ii == 1 else 0)
            if used + need > n_draws:
                status = 0
                break
            if kind_i == 1:
                d = draws[used]
                used += 1
                if mirror:
                    d = 1.0 - d
                lo = memb_ptr[k]
                idx = lo + <long long>(d * (memb_ptr[k + 1] - lo))
                if idx >= memb_ptr[k + 1]:
                    idx = memb_ptr[k + 1] - 1
                yi = memb_ids[idx]
                ri = memb_rho[idx]
            else:
                yi = move_i[k]
                ri = rho_i[k]
            if kind_ii == 1:
                d = draws[used]
                used += 1
                if mirror:
                    d = 1.0 - d
                lo = memb_ptr[k]
                idx = lo + <long long>(d * (memb_ptr[k + 1] - lo))
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
            if recording:
                rec[seg] = pos
                seg += 1
            if is_boundary[pos]:
                status = 1
                break
        else:
            status = -1
    return pos, acc, steps, status, used
