"""Interpolators mapping parameter points to reduced-coefficient vectors.

Every regressor is linear in its training targets; complex targets are split
into real and imaginary parts which are fitted side by side, so
``evaluate(re + 1j*im) == evaluate(re) + 1j*evaluate(im)``.

Distances are Euclidean on the raw parameter coordinates. Rescale parameters
beforehand if their ranges differ by orders of magnitude.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lu_factor, lu_solve

from ..errors import DegenerateGeometryError, DimensionMismatchError, ExtrapolationError
from .delaunay import Triangulation

KINDS = ("linear", "nearest", "cubic", "rbf", "gpr")


class Regressor:
    """Common bookkeeping: input checks and the complex/real split."""

    kind = ""
    min_points = 1

    def __init__(self, points, values):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        vals = np.asarray(values)
        if vals.ndim == 1:
            vals = vals[:, None]
        if pts.ndim != 2 or vals.ndim != 2:
            raise DimensionMismatchError("points must be p x q and values p x n")
        if len(pts) != len(vals):
            raise DimensionMismatchError(f"{len(pts)} points but {len(vals)} value rows")
        if len(pts) < self.min_points:
            raise DegenerateGeometryError(
                f"{self.kind} regressor needs at least {self.min_points} points, got {len(pts)}")
        if len({tuple(row) for row in pts}) != len(pts):
            raise DegenerateGeometryError("training points must be pairwise distinct")
        self.points = pts
        self.values = vals
        self._complex = np.iscomplexobj(vals)
        self._n = vals.shape[1]
        targets = np.hstack([vals.real, vals.imag]) if self._complex else vals.astype(float)
        self._fit(pts, targets)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _fit(self, points, targets):
        raise NotImplementedError

    def _evaluate(self, point) -> np.ndarray:
        raise NotImplementedError

    def _query(self, point) -> np.ndarray:
        q = np.atleast_1d(np.asarray(point, dtype=float)).reshape(-1)
        if q.size != self.dim:
            raise DimensionMismatchError(f"query has dimension {q.size}, regressor expects {self.dim}")
        return q

    def __call__(self, point) -> np.ndarray:
        out = self._evaluate(self._query(point))
        if self._complex:
            return out[:self._n] + 1j * out[self._n:]
        return out

    def evaluate_many(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if self.dim == 1 else pts[None, :]
        return np.array([self(q) for q in pts])


class LinearRegressor(Regressor):
    """Piecewise-linear interpolation: 1-D segments or 2-D Delaunay simplices."""

    kind = "linear"

    def _fit(self, points, targets):
        q = points.shape[1]
        if q == 1:
            if len(points) < 2:
                raise DegenerateGeometryError("1-D linear interpolation needs at least 2 points")
            order = np.argsort(points[:, 0], kind="stable")
            self._x = points[order, 0]
            self._y = targets[order]
            span = self._x[-1] - self._x[0]
            self._tol = 1e-12 * max(span, 1.0)
        elif q == 2:
            self.triangulation = Triangulation(points)
            self._y = targets
        else:
            raise DegenerateGeometryError(f"linear regressor supports 1-D or 2-D parameters, got {q}-D")

    def _evaluate(self, q):
        if self.dim == 1:
            x = q[0]
            if x < self._x[0] - self._tol or x > self._x[-1] + self._tol:
                raise ExtrapolationError(
                    f"point {x:.17g} outside the training range [{self._x[0]:.17g}, {self._x[-1]:.17g}]")
            i = int(np.clip(np.searchsorted(self._x, x, side="right") - 1, 0, len(self._x) - 2))
            w = (x - self._x[i]) / (self._x[i + 1] - self._x[i])
            w = min(max(w, 0.0), 1.0)
            return (1.0 - w) * self._y[i] + w * self._y[i + 1]
        vertices, weights = self.triangulation.barycentric(q)
        return weights @ self._y[vertices]


class NearestRegressor(Regressor):
    """Value of the closest training point; ties go to the lowest member index."""

    kind = "nearest"

    def _fit(self, points, targets):
        pass

    def __call__(self, point):
        q = self._query(point)
        dist = np.linalg.norm(self.points - q, axis=1)
        return self.values[int(np.argmin(dist))].copy()


class CubicRegressor(Regressor):
    """Natural cubic spline over a 1-D parameter."""

    kind = "cubic"
    min_points = 3

    def _fit(self, points, targets):
        if points.shape[1] != 1:
            raise DegenerateGeometryError(
                f"cubic regressor is 1-D only, got {points.shape[1]}-D parameters (use rbf in 2-D)")
        order = np.argsort(points[:, 0], kind="stable")
        self._x = points[order, 0]
        self._spline = CubicSpline(self._x, targets[order], axis=0, bc_type="natural")
        self._tol = 1e-12 * max(self._x[-1] - self._x[0], 1.0)

    def _evaluate(self, q):
        x = q[0]
        if x < self._x[0] - self._tol or x > self._x[-1] + self._tol:
            raise ExtrapolationError(
                f"point {x:.17g} outside the training range [{self._x[0]:.17g}, {self._x[-1]:.17g}]")
        return self._spline(min(max(x, self._x[0]), self._x[-1]))


def _columnwise(solve, rhs):
    # one solve per target column keeps each component independent of the others
    return np.column_stack([solve(rhs[:, j]) for j in range(rhs.shape[1])])


def _columnwise_dot(v, mat):
    return np.array([np.dot(v, mat[:, j]) for j in range(mat.shape[1])])


def _thin_plate(r):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, r * r * np.log(r), 0.0)


class RbfRegressor(Regressor):
    """Thin-plate spline ``r**2 log r`` with an appended linear polynomial.

    The linear tail drops to a constant when the points do not determine an
    affine function (fewer than q + 1 points or a degenerate layout).
    """

    kind = "rbf"

    def _fit(self, points, targets):
        p, q = points.shape
        poly = np.hstack([np.ones((p, 1)), points])
        if np.linalg.matrix_rank(poly) < q + 1:
            poly = poly[:, :1]
        self._degree = poly.shape[1] - 1
        kernel = _thin_plate(np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2))
        k = poly.shape[1]
        system = np.block([[kernel, poly], [poly.T, np.zeros((k, k))]])
        rhs = np.vstack([targets, np.zeros((k, targets.shape[1]))])
        try:
            with np.errstate(all="raise"):
                factor = lu_factor(system, check_finite=False)
            if np.any(np.diag(factor[0]) == 0):
                raise LinAlgError("singular")
            coef = _columnwise(lambda b: lu_solve(factor, b), rhs)
        except (LinAlgError, FloatingPointError):
            coef = _columnwise(lambda b: np.linalg.lstsq(system, b, rcond=None)[0], rhs)
        self._weights = coef[:p]
        self._poly_coef = coef[p:]

    def _evaluate(self, q):
        phi = _thin_plate(np.linalg.norm(self.points - q, axis=1))
        tail = np.concatenate([[1.0], q])[: self._degree + 1]
        return _columnwise_dot(phi, self._weights) + _columnwise_dot(tail, self._poly_coef)


class GprRegressor(Regressor):
    """Zero-mean Gaussian process posterior mean, squared-exponential kernel.

    ``k(a, b) = sigma_f**2 exp(-|a-b|**2 / (2 l**2)) + sigma_n**2 delta_ab``
    with ``sigma_f`` the standard deviation of each target component and
    ``sigma_n = noise * sigma_f``. ``lengthscale`` defaults to the median
    pairwise distance. The Cholesky factorization is retried with growing
    jitter if the kernel matrix is not numerically positive definite.
    """

    kind = "gpr"

    def __init__(self, points, values, lengthscale: float | None = None, noise: float = 1e-8):
        if lengthscale is not None and not lengthscale > 0:
            raise ValueError(f"lengthscale must be > 0, got {lengthscale}")
        if not noise >= 0:
            raise ValueError(f"noise must be >= 0, got {noise}")
        self.lengthscale = lengthscale
        self.noise = noise
        super().__init__(points, values)

    def _kernel(self, a, b):
        sq = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
        return np.exp(-0.5 * sq / self.lengthscale ** 2)

    def _fit(self, points, targets):
        if self.lengthscale is None:
            p = len(points)
            if p > 1:
                iu = np.triu_indices(p, 1)
                dists = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)[iu]
                self.lengthscale = float(np.median(dists))
            else:
                self.lengthscale = 1.0
        sigma_f = targets.std(axis=0)
        self.signal_std = np.where(sigma_f > 0, sigma_f, 1.0)
        gram = self._kernel(points, points)
        jitter = self.noise ** 2
        for _ in range(8):
            try:
                factor = cho_factor(gram + jitter * np.eye(len(points)), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 100.0, 1e-14)
        else:
            raise DegenerateGeometryError("GPR kernel matrix is not positive definite")
        self.jitter = jitter
        self._factor = factor
        self._alpha = _columnwise(lambda b: cho_solve(factor, b), targets)

    def _evaluate(self, q):
        return _columnwise_dot(self._kernel(q[None, :], self.points)[0], self._alpha)

    def variance(self, point) -> np.ndarray:
        """Posterior variance per target component; reported, never used downstream."""
        q = self._query(point)
        k = self._kernel(q[None, :], self.points)[0]
        reduction = k @ cho_solve(self._factor, k)
        var = self.signal_std ** 2 * max(1.0 - reduction, 0.0)
        return var[:self._n] + var[self._n:] if self._complex else var


_CLASSES = {
    "linear": LinearRegressor,
    "nearest": NearestRegressor,
    "cubic": CubicRegressor,
    "cubic-1d": CubicRegressor,
    "rbf": RbfRegressor,
    "gpr": GprRegressor,
}


def fit_regressor(kind: str, points, values, **hyper) -> Regressor:
    """Build a regressor of ``kind``; only ``gpr`` takes hyperparameters."""
    try:
        cls = _CLASSES[kind]
    except KeyError:
        raise ValueError(f"unknown regressor kind {kind!r}; choose from {KINDS}") from None
    hyper = {k: v for k, v in hyper.items() if v is not None}
    if hyper and cls is not GprRegressor:
        raise ValueError(f"{kind} regressor takes no hyperparameters, got {sorted(hyper)}")
    return cls(points, values, **hyper)


def evaluate(regressor: Regressor, point) -> np.ndarray:
    return regressor(point)
