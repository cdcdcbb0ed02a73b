"""Lattice discretizations of bounded domains and their metric structure.

A :class:`LatticeDomain` is a finite point cloud with spacing ``h`` covering
a closed domain, each point tagged Interior or Boundary.  Distances between
points are measured in the path metric ``d``: straight-line (Euclidean) on
convex domains, shortest-path over the 8-neighbor lattice graph on mask
domains (1D intervals use the 2-neighbor graph).  On top of ``d`` the module
provides the boundary-biased distance

    rho_eps(x, y) = max(d(x, y), eps)   if both x and y are interior,
    rho_eps(x, y) = d(x, y)             if x or y is a boundary point,

closed eps-balls ``{y : d(x, y) <= eps}``, the inner sets
``{x : dist(x, boundary) > delta}``, and the domain diameter.

Domains are immutable after construction and safe to share across threads;
distance memoization is internally locked.
"""

from __future__ import annotations

import json
import math
import threading
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

__all__ = [
    "LatticeDomain",
    "build_interval",
    "build_box",
    "build_mask",
    "load_mask",
    "path_distance",
    "rho",
    "epsilon_ball",
    "inner_points",
    "domain_summary",
]

# closed-ball condition d <= eps uses this tolerance to avoid float flicker
BALL_TOL = 1e-12

SQRT2 = math.sqrt(2.0)


class DomainError(ValueError):
    """Raised when a domain construction or query violates a precondition."""


class LatticeDomain:
    """Finite lattice model of a bounded connected domain.

    Instances are produced by :func:`build_interval`, :func:`build_box` and
    :func:`build_mask`; the constructor is not meant to be called directly.

    Attributes
    ----------
    points : (N, n) float array, n in {1, 2}
        Coordinates of all lattice points, indexed by point-id.
    h : float
        Lattice spacing.
    is_boundary : (N,) bool array
        Tag per point; interior points are the complement.
    convex : bool
        When set, the path metric coincides with Euclidean distance and is
        evaluated directly instead of through the lattice graph.
    """

    def __init__(self, kind, points, is_boundary, h, convex, grid_shape=None,
                 cell_of_point=None, point_of_cell=None):
        self.kind = kind  # "interval" | "box" | "mask"
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.is_boundary = np.ascontiguousarray(is_boundary, dtype=bool)
        self.h = float(h)
        self.convex = bool(convex)
        # structured-grid bookkeeping: (row, col) cell per point and the
        # inverse map (int array, -1 where no lattice point exists)
        self.grid_shape = grid_shape
        self.cell_of_point = cell_of_point
        self.point_of_cell = point_of_cell

        self.n_points = self.points.shape[0]
        self.dim = self.points.shape[1]
        self.interior_ids = np.flatnonzero(~self.is_boundary)
        self.boundary_ids = np.flatnonzero(self.is_boundary)

        self._lock = threading.Lock()
        self._dist_rows: dict[int, np.ndarray] = {}
        self._graph = None
        self._dist_to_boundary = None
        self._diam = None
        self._ball_cache: dict[float, object] = {}

        self.points.setflags(write=False)
        self.is_boundary.setflags(write=False)

    # -- adjacency graph (lattice neighbors with Euclidean edge weights) --

    def graph(self) -> csr_matrix:
        """Sparse adjacency graph; built on first use and cached."""
        with self._lock:
            if self._graph is None:
                self._graph = _build_graph(self)
            return self._graph

    # -- metric ----------------------------------------------------------

    def distance_row(self, i: int) -> np.ndarray:
        """Path distances from point ``i`` to every point (memoized)."""
        if self.convex:
            return euclid_from(self.points, self.points[i])
        with self._lock:
            row = self._dist_rows.get(i)
        if row is None:
            row = dijkstra(self.graph(), indices=i, directed=False)
            with self._lock:
                self._dist_rows[i] = row
        return row

    def dist_to_boundary(self) -> np.ndarray:
        """dist(x, boundary) per point; single multi-source pass, cached."""
        with self._lock:
            cached = self._dist_to_boundary
        if cached is not None:
            return cached
        if self.kind == "interval":
            a, b = self.points[self.boundary_ids[0], 0], self.points[self.boundary_ids[-1], 0]
            out = np.minimum(self.points[:, 0] - a, b - self.points[:, 0])
        elif self.kind == "box":
            x, y = self.points[:, 0], self.points[:, 1]
            out = np.minimum.reduce([x - x.min(), x.max() - x,
                                     y - y.min(), y.max() - y])
        else:
            out = dijkstra(self.graph(), indices=self.boundary_ids,
                           directed=False, min_only=True)
        out = np.asarray(out, dtype=np.float64)
        out.setflags(write=False)
        with self._lock:
            self._dist_to_boundary = out
        return out

    def diam(self) -> float:
        """Diameter of the point set in the path metric."""
        with self._lock:
            if self._diam is not None:
                return self._diam
        if self.kind == "interval":
            d = float(self.points[:, 0].max() - self.points[:, 0].min())
        elif self.kind == "box":
            spans = self.points.max(axis=0) - self.points.min(axis=0)
            d = float(np.hypot(spans[0], spans[1]))
        else:
            # exact graph eccentricity; mask domains stay desk-scale
            mat = dijkstra(self.graph(), directed=False)
            d = float(mat.max())
        with self._lock:
            self._diam = d
        return d

    def __repr__(self):
        return (f"LatticeDomain({self.kind}, n={self.n_points}, "
                f"h={self.h:g}, interior={self.interior_ids.size})")


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def build_interval(a: float, b: float, h: float) -> LatticeDomain:
    """Uniform lattice on ``[a, b]`` with boundary ``{a, b}``.

    Parameters
    ----------
    a, b : floats with a < b.
    h : spacing; ``(b - a) / h`` must be integral within 1e-12 and the grid
        must contain at least one interior point (``h <= (b - a)/2``).
    """
    if not b > a:
        raise DomainError(f"interval needs a < b, got a={a}, b={b}")
    if h <= 0:
        raise DomainError(f"spacing must be positive, got h={h}")
    ratio = (b - a) / h
    n_cells = round(ratio)
    if n_cells < 2 or abs(ratio - n_cells) > 1e-12 * max(1.0, ratio):
        raise DomainError(
            f"(b - a)/h = {ratio!r} is not an integer >= 2; choose h so the "
            "interval divides evenly and at least one interior point exists")
    xs = a + h * np.arange(n_cells + 1)
    xs[-1] = b
    is_boundary = np.zeros(n_cells + 1, dtype=bool)
    is_boundary[0] = is_boundary[-1] = True
    return LatticeDomain("interval", xs[:, None], is_boundary, h, convex=True)


def build_box(x0: float, x1: float, y0: float, y1: float, h: float) -> LatticeDomain:
    """Rectangular lattice on ``[x0, x1] x [y0, y1]``; the rim is the boundary.

    Rectangles are convex, so the path metric is Euclidean.  Point-ids run
    row-major: id = row * nx + col with row <-> y and col <-> x.
    """
    if not (x1 > x0 and y1 > y0):
        raise DomainError("box needs x0 < x1 and y0 < y1")
    if h <= 0:
        raise DomainError(f"spacing must be positive, got h={h}")
    nxr, nyr = (x1 - x0) / h, (y1 - y0) / h
    nx, ny = round(nxr), round(nyr)
    if (nx < 2 or ny < 2 or abs(nxr - nx) > 1e-12 * max(1.0, nxr)
            or abs(nyr - ny) > 1e-12 * max(1.0, nyr)):
        raise DomainError(
            f"box sides {x1 - x0!r} x {y1 - y0!r} must be integer multiples "
            "of h with at least one interior point per axis")
    nx, ny = nx + 1, ny + 1
    cols, rows = np.meshgrid(np.arange(nx), np.arange(ny))
    xs = x0 + h * cols.ravel()
    ys = y0 + h * rows.ravel()
    points = np.column_stack([xs, ys])
    rim = (cols == 0) | (cols == nx - 1) | (rows == 0) | (rows == ny - 1)
    cell_of_point = np.column_stack([rows.ravel(), cols.ravel()]).astype(np.int64)
    point_of_cell = np.arange(nx * ny, dtype=np.int64).reshape(ny, nx)
    return LatticeDomain("box", points, rim.ravel(), h, convex=True,
                         grid_shape=(ny, nx), cell_of_point=cell_of_point,
                         point_of_cell=point_of_cell)


def build_mask(bitmap, h: float) -> LatticeDomain:
    """Lattice domain from a 2D boolean occupancy grid.

    True cells whose 8 neighbors are all true become interior; the remaining
    true cells are boundary.  The true set must be 4-connected and the
    interior nonempty and connected.  The path metric runs over the
    8-neighbor graph (edge weights h and h*sqrt(2)), which overestimates true
    geodesics by at most ~8%; estimate checks downstream carry metric slack.

    Cell (row, col) maps to the point (col * h, row * h).
    """
    bitmap = np.asarray(bitmap, dtype=bool)
    if bitmap.ndim != 2:
        raise DomainError("mask bitmap must be 2D")
    if h <= 0:
        raise DomainError(f"spacing must be positive, got h={h}")
    if not bitmap.any():
        raise DomainError("mask has no true cells")
    if _count_components(bitmap, connectivity=4) != 1:
        raise DomainError("mask true cells are not 4-connected")

    padded = np.zeros((bitmap.shape[0] + 2, bitmap.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = bitmap
    all8 = np.ones_like(bitmap)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            all8 &= padded[1 + dr:padded.shape[0] - 1 + dr,
                           1 + dc:padded.shape[1] - 1 + dc]
    interior = bitmap & all8
    if not interior.any():
        raise DomainError("mask has no interior cell (no cell with all 8 "
                          "neighbors true)")
    if _count_components(interior, connectivity=8) != 1:
        raise DomainError("mask interior is disconnected")

    rows, cols = np.nonzero(bitmap)
    points = np.column_stack([cols * h, rows * h]).astype(np.float64)
    point_of_cell = -np.ones(bitmap.shape, dtype=np.int64)
    point_of_cell[rows, cols] = np.arange(rows.size)
    cell_of_point = np.column_stack([rows, cols]).astype(np.int64)
    is_boundary = ~interior[rows, cols]
    return LatticeDomain("mask", points, is_boundary, h, convex=False,
                         grid_shape=bitmap.shape, cell_of_point=cell_of_point,
                         point_of_cell=point_of_cell)


def load_mask(path: str, h: float) -> LatticeDomain:
    """Read a mask from a {0,1} text grid or a plain PGM (P2) file."""
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("P2"):
        tokens = [t for line in stripped.splitlines()
                  for t in line.split("#", 1)[0].split()]
        if len(tokens) < 4:
            raise DomainError(f"{path}: malformed PGM header")
        width, height, _maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        values = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
        if values.size != width * height:
            raise DomainError(f"{path}: PGM pixel count mismatch")
        bitmap = (values > 0).reshape(height, width)
    else:
        rows = []
        for line in text.splitlines():
            line = line.strip().replace(" ", "")
            if not line:
                continue
            if set(line) - {"0", "1"}:
                raise DomainError(f"{path}: mask rows must contain only 0/1")
            rows.append([c == "1" for c in line])
        if not rows or len({len(r) for r in rows}) != 1:
            raise DomainError(f"{path}: mask rows missing or ragged")
        bitmap = np.array(rows, dtype=bool)
    return build_mask(bitmap, h)


# ---------------------------------------------------------------------------
# metric queries
# ---------------------------------------------------------------------------

def euclid_from(points: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """Euclidean distances from ``origin`` to each row of ``points``.

    Spelled out as sqrt of the sum of squared differences so that scalar and
    vectorized callers produce bit-identical values.
    """
    diff = points - origin
    sq = diff[:, 0] * diff[:, 0]
    for k in range(1, diff.shape[1]):
        sq = sq + diff[:, k] * diff[:, k]
    return np.sqrt(sq)


def path_distance(dom: LatticeDomain, i: int, j: int) -> float:
    """Path distance d between points ``i`` and ``j``."""
    if dom.convex:
        return float(euclid_from(dom.points[j:j + 1], dom.points[i])[0])
    return float(dom.distance_row(int(i))[j])


def rho(dom: LatticeDomain, eps: float, i: int, j: int) -> float:
    """Boundary-biased distance: max(d, eps) between interior points, d when
    either endpoint is a boundary point."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if i == j and dom.is_boundary[i]:
        raise DomainError("rho(x, x) is undefined for boundary x (would be 0)")
    if dom.is_boundary[i] or dom.is_boundary[j]:
        return path_distance(dom, i, j)
    return max(path_distance(dom, i, j), eps)


def epsilon_ball(dom: LatticeDomain, eps: float, i: int) -> list[tuple[int, float]]:
    """Closed eps-ball around interior point ``i``: all ``(y, rho(i, y))`` with
    ``d(i, y) <= eps``, ``i`` itself included, sorted by point-id."""
    if dom.is_boundary[i]:
        raise DomainError(f"epsilon_ball requires an interior center, point "
                          f"{i} is boundary")
    _check_resolution(dom, eps)
    ids, dists = _ball_members(dom, eps, int(i))
    bnd = dom.is_boundary[ids]
    rhos = np.where(bnd, dists, np.maximum(dists, eps))
    return list(zip(ids.tolist(), rhos.tolist()))


def inner_points(dom: LatticeDomain, delta: float) -> np.ndarray:
    """Point-ids with dist(x, boundary) > delta (the inner set)."""
    return np.flatnonzero(dom.dist_to_boundary() > delta)


def domain_summary(dom: LatticeDomain) -> dict:
    """JSON-serializable summary: points, tags, spacing, diameter."""
    return {
        "kind": dom.kind,
        "h": dom.h,
        "n_points": dom.n_points,
        "n_interior": int(dom.interior_ids.size),
        "n_boundary": int(dom.boundary_ids.size),
        "diam": dom.diam(),
        "convex": dom.convex,
        "points": [[float(c) for c in p] for p in dom.points],
        "tags": ["boundary" if b else "interior" for b in dom.is_boundary],
    }


def domain_summary_json(dom: LatticeDomain) -> str:
    return json.dumps(domain_summary(dom), sort_keys=True)


# ---------------------------------------------------------------------------
# internals
# ---------------------------------------------------------------------------

def _check_resolution(dom: LatticeDomain, eps: float) -> None:
    if eps < 2.0 * dom.h - BALL_TOL:
        raise DomainError(
            f"eps = {eps:g} violates the resolution guard eps >= 2h "
            f"(h = {dom.h:g}); the ball is too coarse to represent the sup")


def interval_reach(eps: float, h: float) -> int:
    """Number of lattice steps inside the closed eps-ball on a 1D grid."""
    return int(math.floor((eps + BALL_TOL) / h))


def disk_halfwidths(eps: float, h: float) -> tuple[int, np.ndarray]:
    """Integer description of the closed eps-disk on a square lattice.

    Membership is decided on indices (dx^2 + dy^2 <= ((eps+tol)/h)^2), never
    on floating coordinates, so every consumer sees the same ball.  Returns
    ``(reach, W)`` where W[|dy|] is the half-width of disk row dy.
    """
    r2 = ((eps + BALL_TOL) / h) ** 2
    reach = int(math.floor(math.sqrt(r2)))
    while (reach + 1) * (reach + 1) <= r2:
        reach += 1
    while reach * reach > r2:
        reach -= 1
    widths = np.empty(reach + 1, dtype=np.int64)
    for dy in range(reach + 1):
        w = int(math.floor(math.sqrt(max(r2 - dy * dy, 0.0))))
        while (w + 1) * (w + 1) + dy * dy <= r2:
            w += 1
        while w > 0 and w * w + dy * dy > r2:
            w -= 1
        widths[dy] = w
    return reach, widths


def _ball_members(dom: LatticeDomain, eps: float, i: int):
    """ids and path distances of the closed eps-ball around interior i."""
    if dom.kind == "interval":
        reach = interval_reach(eps, dom.h)
        sel = np.arange(max(0, i - reach), min(dom.n_points - 1, i + reach) + 1)
        return sel, euclid_from(dom.points[sel], dom.points[i])
    if dom.kind == "box":
        row, col = dom.cell_of_point[i]
        ny, nx = dom.grid_shape
        reach, widths = disk_halfwidths(eps, dom.h)
        chunks = []
        for dy in range(-reach, reach + 1):
            rr = row + dy
            if rr < 0 or rr >= ny:
                continue
            w = widths[abs(dy)]
            c0, c1 = max(0, col - w), min(nx - 1, col + w)
            if c0 > c1:
                continue
            chunks.append(dom.point_of_cell[rr, c0:c1 + 1])
        sel = np.concatenate(chunks)
        return sel, euclid_from(dom.points[sel], dom.points[i])
    d = dom.distance_row(i)
    sel = np.flatnonzero(d <= eps + BALL_TOL)
    return sel, d[sel]


def _build_graph(dom: LatticeDomain) -> csr_matrix:
    n = dom.n_points
    if dom.kind == "interval":
        idx = np.arange(n - 1)
        rows = np.concatenate([idx, idx + 1])
        cols = np.concatenate([idx + 1, idx])
        data = np.full(rows.size, dom.h)
        return csr_matrix((data, (rows, cols)), shape=(n, n))
    # box and mask: 8-neighbor stencil over the structured grid
    cell = dom.point_of_cell
    rows_out, cols_out, data_out = [], [], []
    offsets = [(0, 1, dom.h), (1, 0, dom.h), (1, 1, dom.h * SQRT2),
               (1, -1, dom.h * SQRT2)]
    for dr, dc, w in offsets:
        a, b = _shifted_pair(cell, dr, dc)
        ok = (a >= 0) & (b >= 0)
        ai, bi = a[ok], b[ok]
        rows_out.append(ai)
        cols_out.append(bi)
        data_out.append(np.full(ai.size, w))
        rows_out.append(bi)
        cols_out.append(ai)
        data_out.append(np.full(ai.size, w))
    return csr_matrix(
        (np.concatenate(data_out),
         (np.concatenate(rows_out), np.concatenate(cols_out))),
        shape=(n, n))


def _shifted_pair(grid: np.ndarray, dr: int, dc: int):
    """Aligned views of ``grid`` and its (dr, dc)-shifted copy."""
    hh, ww = grid.shape
    a = grid[max(0, -dr):hh - max(0, dr), max(0, -dc):ww - max(0, dc)]
    b = grid[max(0, dr):hh - max(0, -dr), max(0, dc):ww - max(0, -dc)]
    return a, b


def _count_components(mask: np.ndarray, connectivity: int) -> int:
    ids = -np.ones(mask.shape, dtype=np.int64)
    ids[mask] = np.arange(int(mask.sum()))
    n = int(mask.sum())
    if n == 0:
        return 0
    offsets = [(0, 1), (1, 0)]
    if connectivity == 8:
        offsets += [(1, 1), (1, -1)]
    rows, cols = [], []
    for dr, dc in offsets:
        a, b = _shifted_pair(ids, dr, dc)
        ok = (a >= 0) & (b >= 0)
        rows.append(a[ok])
        cols.append(b[ok])
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    graph = csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    count, _ = connected_components(graph, directed=False)
    return count
