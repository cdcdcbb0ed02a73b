"""Discrete modulus of continuity for boundary data.

The modulus is the least concave majorant through the origin of the pairwise
oscillation samples (d(x, y), |g(x) - g(y)|) over boundary points, flattened
to be nondecreasing.  Concavity plus omega(0) = 0 gives the scaling property
omega(t s) <= t omega(s) for t >= 1, which the supersolution envelopes rely
on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ModulusEnvelope", "boundary_modulus"]


@dataclass(frozen=True)
class ModulusEnvelope:
    """Piecewise-linear concave nondecreasing majorant with omega(0) = 0."""

    s_nodes: np.ndarray
    v_nodes: np.ndarray

    def __call__(self, s):
        return np.interp(s, self.s_nodes, self.v_nodes)

    @property
    def max_slope(self) -> float:
        """Steepest chord slope; equals omega(s)/s as s -> 0+."""
        if self.s_nodes.size < 2 or self.s_nodes[1] == 0.0:
            return 0.0
        return float(self.v_nodes[1] / self.s_nodes[1])


def boundary_modulus(g, dom=None) -> ModulusEnvelope:
    """Concave majorant of boundary-data oscillation versus path distance.

    ``g`` is a GridFunction (its boundary values are used); ``dom`` defaults
    to ``g.domain``.  Needs at least two boundary points.
    """
    if dom is None:
        dom = g.domain
    bd = dom.boundary_ids
    if bd.size < 2:
        raise ValueError("boundary modulus needs at least two boundary points")
    gv = g.values[bd]
    if dom.convex:
        diffs = dom.points[bd][:, None, :] - dom.points[bd][None, :, :]
        dmat = np.sqrt(np.sum(diffs * diffs, axis=2))
    else:
        from scipy.sparse.csgraph import dijkstra

        dmat = dijkstra(dom.graph(), directed=False, indices=bd)[:, bd]
    iu = np.triu_indices(bd.size, k=1)
    s = dmat[iu]
    v = np.abs(gv[:, None] - gv[None, :])[iu]
    return _concave_majorant(s, v)


def _concave_majorant(s: np.ndarray, v: np.ndarray) -> ModulusEnvelope:
    pts = np.column_stack([np.concatenate([[0.0], s]),
                           np.concatenate([[0.0], v])])
    order = np.lexsort((-pts[:, 1], pts[:, 0]))
    pts = pts[order]
    # per distance keep only the largest oscillation
    keep = np.concatenate([[True], np.diff(pts[:, 0]) > 0])
    pts = pts[keep]
    hull: list[tuple[float, float]] = []
    for x, y in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # pop while the middle vertex lies on or below chord (x1,y1)-(x,y)
            if (y2 - y1) * (x - x2) <= (y - y2) * (x2 - x1):
                hull.pop()
            else:
                break
        if len(hull) == 1 and y <= hull[0][1]:
            continue
        hull.append((float(x), float(y)))
    # flatten: drop vertices after the peak so the envelope is nondecreasing
    peak = int(np.argmax([p[1] for p in hull]))
    hull = hull[:peak + 1]
    if len(hull) == 1:
        hull.append((max(float(pts[-1, 0]), 1.0), 0.0))
    xs = np.array([p[0] for p in hull])
    ys = np.array([p[1] for p in hull])
    return ModulusEnvelope(xs, ys)
