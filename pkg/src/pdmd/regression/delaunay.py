"""Planar Delaunay triangulation (Bowyer-Watson) and barycentric point location.

Points are inserted in lexicographic order. In-circle ties (a point on a
circumcircle, within a relative tolerance) count as "outside", which keeps
the cavity of every insertion well defined for cocircular inputs such as
regular grids.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateGeometryError, ExtrapolationError

_INCIRCLE_RTOL = 1e-12
_SUPER_SCALES = (1e2, 1e4, 1e6)


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _in_circumcircle(a, b, c, d) -> bool:
    """True when d lies strictly inside the circumcircle of CCW triangle abc."""
    ax, ay = a[0] - d[0], a[1] - d[1]
    bx, by = b[0] - d[0], b[1] - d[1]
    cx, cy = c[0] - d[0], c[1] - d[1]
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    det = ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
    scale = (abs(ax) + abs(ay)) * (abs(bx) + abs(by)) * (abs(cx) + abs(cy)) \
        * max(a2, b2, c2, 1e-300) ** 0.5
    return det > _INCIRCLE_RTOL * scale


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Indices of the strict convex hull vertices in CCW order (monotone chain)."""
    order = sorted(range(len(points)), key=lambda i: (points[i][0], points[i][1]))

    def chain(indices):
        out = []
        for i in indices:
            while len(out) >= 2 and _orient(points[out[-2]], points[out[-1]], points[i]) <= 0:
                out.pop()
            out.append(i)
        return out

    lower = chain(order)
    upper = chain(order[::-1])
    return np.array(lower[:-1] + upper[:-1], dtype=int)


def _polygon_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _bowyer_watson(pts: np.ndarray, big: float) -> list:
    p = len(pts)
    verts = np.vstack([pts, [[-big, -big], [3 * big, -big], [-big, 3 * big]]])
    triangles = [(p, p + 1, p + 2)]
    for idx in sorted(range(p), key=lambda i: (pts[i][0], pts[i][1])):
        d = verts[idx]
        bad, keep = [], []
        for tri in triangles:
            (bad if _in_circumcircle(verts[tri[0]], verts[tri[1]], verts[tri[2]], d) else keep).append(tri)
        if not bad:
            raise DegenerateGeometryError(f"point {idx} could not be inserted")
        edges = {}
        for a, b, c in bad:
            for e in ((a, b), (b, c), (c, a)):
                edges[e] = edges.get(e, 0) + 1
        boundary = [e for e in edges if (e[1], e[0]) not in edges]
        triangles = keep + [(a, b, idx) for a, b in boundary]
    return [t for t in triangles if max(t) < p]


class Triangulation:
    """Delaunay triangulation of distinct planar points.

    Raises DegenerateGeometryError for fewer than three points, duplicates,
    or collinear input.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"expected p x 2 points, got shape {pts.shape}")
        if len(pts) < 3:
            raise DegenerateGeometryError("a planar triangulation needs at least 3 points")
        if len({tuple(row) for row in pts}) != len(pts):
            raise DegenerateGeometryError("duplicate points")
        self.points = pts
        self._origin = pts.min(axis=0)
        self._scale = float((pts.max(axis=0) - self._origin).max())
        if self._scale == 0:
            raise DegenerateGeometryError("all points coincide")
        norm = (pts - self._origin) / self._scale
        self.hull = convex_hull(norm)
        hull_area = _polygon_area(norm[self.hull]) if len(self.hull) >= 3 else 0.0
        if hull_area <= 1e-12:
            raise DegenerateGeometryError("all points are collinear")
        for big in _SUPER_SCALES:
            tris = np.array(_bowyer_watson(norm, big), dtype=int).reshape(-1, 3)
            areas = 0.5 * np.array([_orient(norm[a], norm[b], norm[c]) for a, b, c in tris])
            if abs(areas.sum() - hull_area) <= 1e-10 * hull_area:
                break
        else:
            raise DegenerateGeometryError("triangulation does not cover the convex hull")
        self.simplices = tris
        self._norm = norm
        a = norm[tris[:, 0]]
        edges = np.stack([norm[tris[:, 1]] - a, norm[tris[:, 2]] - a], axis=2)  # t x 2 x 2
        self._anchor = a
        self._inverse = np.linalg.inv(edges)

    def __len__(self):
        return len(self.simplices)

    def hull_points(self) -> np.ndarray:
        return self.points[self.hull]

    def locate(self, point, tol: float = 1e-12):
        """Return ``(simplex index, barycentric weights)``; index is -1 outside the hull."""
        q = (np.asarray(point, dtype=float).reshape(2) - self._origin) / self._scale
        local = np.einsum("tij,tj->ti", self._inverse, q - self._anchor)
        bary = np.column_stack([1.0 - local.sum(axis=1), local])
        worst = bary.min(axis=1)
        best = int(np.argmax(worst))
        if worst[best] < -tol:
            return -1, None
        weights = np.clip(bary[best], 0.0, None)
        return best, weights / weights.sum()

    def barycentric(self, point):
        """Vertex indices and weights of the simplex containing ``point``."""
        idx, weights = self.locate(point)
        if idx < 0:
            hull = ", ".join(f"({x:.6g}, {y:.6g})" for x, y in self.hull_points())
            raise ExtrapolationError(
                f"point {tuple(np.asarray(point, dtype=float))} lies outside the convex hull [{hull}]")
        return self.simplices[idx], weights

    def is_delaunay(self) -> bool:
        """Empty-circumcircle check against every input point (test helper)."""
        for a, b, c in self.simplices:
            for i, d in enumerate(self._norm):
                if i in (a, b, c):
                    continue
                if _in_circumcircle(self._norm[a], self._norm[b], self._norm[c], d):
                    return False
        return True
