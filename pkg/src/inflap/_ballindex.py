"""Precomputed eps-ball structure shared by the operator, solver and game.

Within a ball around an interior point every interior member has
rho = max(d, eps) = eps, so kernels only need (a) fast enumeration of the
interior members and (b) an explicit list of boundary members with their
path distances.  For structured domains (interval, box) the interior part is
enumerated on the fly from integer window arithmetic and nothing per-point is
stored except the near-boundary lists; mask domains keep full CSR member
lists (they stay small).

One :class:`BallIndex` is built lazily per (domain, eps) and cached on the
domain, so every consumer sees the identical ball membership and rho values.
"""

from __future__ import annotations

import numpy as np

from .geometry import (BALL_TOL, LatticeDomain, disk_halfwidths, euclid_from,
                       interval_reach)


class BallIndex:
    """Ball membership tables for one (domain, eps) pair."""

    def __init__(self, dom: LatticeDomain, eps: float):
        self.dom = dom
        self.eps = float(eps)
        self.h = dom.h
        self.interior_ids = dom.interior_ids
        n_int = self.interior_ids.size
        # interior-order position per global id (-1 for boundary points)
        self.pos_of_point = -np.ones(dom.n_points, dtype=np.int64)
        self.pos_of_point[self.interior_ids] = np.arange(n_int)

        self.reach = 0
        self.widths = np.zeros(1, dtype=np.int64)
        self.int_ptr = None  # mask domains only
        self.int_ids = None

        if dom.kind == "interval":
            self.reach = interval_reach(eps, dom.h)
            self._build_bd_interval()
        elif dom.kind == "box":
            self.reach, self.widths = disk_halfwidths(eps, dom.h)
            self._build_bd_box()
        else:
            self._build_mask_csr()

    # -- construction ------------------------------------------------------

    def _build_bd_interval(self):
        dom, n = self.dom, self.dom.n_points
        bd_ptr = np.zeros(self.interior_ids.size + 1, dtype=np.int64)
        ids, rhos = [], []
        for k, i in enumerate(self.interior_ids):
            row = []
            if i <= self.reach:
                row.append(0)
            if (n - 1) - i <= self.reach:
                row.append(n - 1)
            for b in row:
                ids.append(b)
                rhos.append(float(euclid_from(dom.points[b:b + 1],
                                              dom.points[i])[0]))
            bd_ptr[k + 1] = bd_ptr[k] + len(row)
        self.bd_ptr = bd_ptr
        self.bd_ids = np.array(ids, dtype=np.int64)
        self.bd_rho = np.array(rhos, dtype=np.float64)

    def _build_bd_box(self):
        dom = self.dom
        ny, nx = dom.grid_shape
        cell = dom.cell_of_point
        n_int = self.interior_ids.size
        bd_ptr = np.zeros(n_int + 1, dtype=np.int64)
        ids_parts, rho_parts = [], []
        # only interior points whose disk window can touch the rim
        rows = cell[self.interior_ids, 0]
        cols = cell[self.interior_ids, 1]
        near = ((rows <= self.reach) | (rows >= ny - 1 - self.reach)
                | (cols <= self.reach) | (cols >= nx - 1 - self.reach))
        counts = np.zeros(n_int, dtype=np.int64)
        for k in np.flatnonzero(near):
            i = self.interior_ids[k]
            r, c = cell[i]
            members = []
            for dy in range(-self.reach, self.reach + 1):
                rr = r + dy
                if rr < 0 or rr >= ny:
                    continue
                w = int(self.widths[abs(dy)])
                c0, c1 = max(0, c - w), min(nx - 1, c + w)
                if rr == 0 or rr == ny - 1:
                    members.extend(dom.point_of_cell[rr, c0:c1 + 1].tolist())
                else:
                    if c0 == 0:
                        members.append(dom.point_of_cell[rr, 0])
                    if c1 == nx - 1:
                        members.append(dom.point_of_cell[rr, nx - 1])
            if members:
                members = np.array(sorted(members), dtype=np.int64)
                ids_parts.append(members)
                rho_parts.append(euclid_from(dom.points[members],
                                             dom.points[i]))
                counts[k] = members.size
        bd_ptr[1:] = np.cumsum(counts)
        self.bd_ptr = bd_ptr
        self.bd_ids = (np.concatenate(ids_parts) if ids_parts
                       else np.empty(0, dtype=np.int64))
        self.bd_rho = (np.concatenate(rho_parts) if rho_parts
                       else np.empty(0, dtype=np.float64))

    def _build_mask_csr(self):
        from scipy.sparse.csgraph import dijkstra

        dom, eps = self.dom, self.eps
        dmat = dijkstra(dom.graph(), directed=False,
                        indices=self.interior_ids, limit=eps + 1e-9)
        is_bd = dom.is_boundary
        n_int = self.interior_ids.size
        int_ptr = np.zeros(n_int + 1, dtype=np.int64)
        bd_ptr = np.zeros(n_int + 1, dtype=np.int64)
        int_parts, bd_parts, rho_parts = [], [], []
        for k in range(n_int):
            i = self.interior_ids[k]
            drow = dmat[k]
            members = np.flatnonzero(drow <= eps + BALL_TOL)
            inb = members[is_bd[members]]
            ini = members[~is_bd[members] & (members != i)]
            int_parts.append(ini)
            bd_parts.append(inb)
            rho_parts.append(drow[inb])
            int_ptr[k + 1] = int_ptr[k] + ini.size
            bd_ptr[k + 1] = bd_ptr[k] + inb.size
        self.int_ptr = int_ptr
        self.int_ids = (np.concatenate(int_parts) if int_parts
                        else np.empty(0, dtype=np.int64))
        self.bd_ptr = bd_ptr
        self.bd_ids = (np.concatenate(bd_parts) if bd_parts
                       else np.empty(0, dtype=np.int64))
        self.bd_rho = (np.concatenate(rho_parts) if rho_parts
                       else np.empty(0, dtype=np.float64))

    # -- queries -----------------------------------------------------------

    def members(self, i: int):
        """(ids, rho) of the closed ball around interior global id ``i``,
        ids ascending and including ``i`` itself."""
        from .geometry import _ball_members

        ids, dists = _ball_members(self.dom, self.eps, int(i))
        rho = np.where(self.dom.is_boundary[ids], dists,
                       np.maximum(dists, self.eps))
        return ids, rho

    def boundary_members(self, i: int):
        """(ids, rho) of the boundary part of the ball around interior ``i``."""
        k = self.pos_of_point[i]
        if k < 0:
            raise ValueError(f"point {i} is not interior")
        lo, hi = self.bd_ptr[k], self.bd_ptr[k + 1]
        return self.bd_ids[lo:hi], self.bd_rho[lo:hi]


def get_ball_index(dom: LatticeDomain, eps: float) -> BallIndex:
    """Cached BallIndex for (dom, eps)."""
    eps = float(eps)
    with dom._lock:
        idx = dom._ball_cache.get(eps)
    if idx is None:
        idx = BallIndex(dom, eps)
        with dom._lock:
            idx = dom._ball_cache.setdefault(eps, idx)
    return idx
