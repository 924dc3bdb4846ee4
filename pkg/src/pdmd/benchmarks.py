"""Reproducible datasets: analytic toy system, nonlinear heat problem, unstable synthetic system.

Label conventions (all generators use ``label_origin = 0``):

* toy: label k is time ``k * 4*pi/(N-1)``; the default training labels
  0..128 span [0, 4*pi] and label 256 is 8*pi.
* heat: labels 0..100 map to t in [0, 2] with dt = 0.02; labels 0..85 are the
  usual training window and 86..100 the prediction window.
* synthetic: label k is the integer step k.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.stats import qmc

from .errors import SolverDivergenceError, ValidationError
from .regression.delaunay import Triangulation
from .snapshots import ParametricSnapshotSet, SnapshotMatrix, TimeAxis

# -- toy system ----------------------------------------------------------------

TOY_FREQUENCIES = (2.3, 2.8)


@dataclass(frozen=True)
class ToySpec:
    """``f = mu * sech(x+3) e^{2.3it} + (1-mu) * 2 sech(x) tanh(x) e^{2.8it}`` on [-5, 5] x [0, 4pi]."""

    m: int = 1000
    N: int = 129
    parameters: tuple = tuple(i / 10 for i in range(10))
    x_min: float = -5.0
    x_max: float = 5.0
    t_end: float = 4 * np.pi

    def __post_init__(self):
        if self.m < 2 or self.N < 2:
            raise ValidationError(f"toy spec needs m >= 2 and N >= 2, got m={self.m}, N={self.N}")
        object.__setattr__(self, "parameters", tuple(float(mu) for mu in self.parameters))

    @property
    def dt(self) -> float:
        return self.t_end / (self.N - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.m)

    def time_axis(self) -> TimeAxis:
        return TimeAxis(0.0, self.dt, self.N, label_origin=0)


def toy_profiles(spec: ToySpec) -> tuple[np.ndarray, np.ndarray]:
    """Spatial shapes of the two separable terms."""
    x = spec.x
    return 1.0 / np.cosh(x + 3.0), 2.0 / np.cosh(x) * np.tanh(x)


def evaluate_toy_truth(spec: ToySpec, mu: float, labels) -> np.ndarray:
    """Analytic field at one or more labels (m-vector, or m x L for a label list)."""
    scalar = np.ndim(labels) == 0
    t = np.atleast_1d(np.asarray(labels, dtype=float)) * spec.dt
    g1, g2 = toy_profiles(spec)
    w1, w2 = TOY_FREQUENCIES
    out = mu * np.outer(g1, np.exp(1j * w1 * t)) + (1.0 - mu) * np.outer(g2, np.exp(1j * w2 * t))
    return out[:, 0] if scalar else out


def generate_toy(spec: ToySpec | None = None) -> ParametricSnapshotSet:
    spec = spec or ToySpec()
    labels = np.arange(spec.N)
    members = [SnapshotMatrix((mu,), evaluate_toy_truth(spec, mu, labels)) for mu in spec.parameters]
    return ParametricSnapshotSet(spec.time_axis(), tuple(members), "toy")


# -- nonlinear heat problem ----------------------------------------------------


@dataclass(frozen=True)
class HeatSpec:
    """``u_t - lap(u) = 100 sin(2pi x1) sin(2pi x2) sin(2pi t) - mu1/mu2 (exp(mu2 u) - 1)``.

    Homogeneous Dirichlet data on the unit square, ``u(., 0) = 0``. ``grid``
    is the number of interior nodes per axis; labels ``0..n_labels-1`` cover
    ``[0, t_end]``. ``source_scale`` multiplies the forcing (0 switches it off).
    """

    grid: int = 31
    n_labels: int = 101
    t_end: float = 2.0
    substeps: int = 10
    source_scale: float = 1.0
    max_halvings: int = 3
    parameters: tuple = ()

    def __post_init__(self):
        if self.grid < 4:
            raise ValidationError(f"heat grid must be >= 4, got {self.grid}")
        if self.n_labels < 2 or self.substeps < 1:
            raise ValidationError("heat spec needs n_labels >= 2 and substeps >= 1")
        params = tuple(tuple(float(c) for c in mu) for mu in self.parameters)
        for mu in params:
            if len(mu) != 2 or not mu[1] > 0:
                raise ValidationError(f"heat parameters are (mu1, mu2) with mu2 > 0, got {mu}")
        object.__setattr__(self, "parameters", params)

    @property
    def dt(self) -> float:
        return self.t_end / (self.n_labels - 1)

    @property
    def h(self) -> float:
        return 1.0 / (self.grid + 1)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Interior node coordinates, flattened with x1 as the slow index."""
        c = np.arange(1, self.grid + 1) * self.h
        x1, x2 = np.meshgrid(c, c, indexing="ij")
        return x1.ravel(), x2.ravel()

    def time_axis(self) -> TimeAxis:
        return TimeAxis(0.0, self.dt, self.n_labels, label_origin=0)


def sin_2pi(t: float) -> float:
    """``sin(2 pi t)``, exactly zero at every half-integer ``t``."""
    x = 2.0 * t
    n = np.round(x)
    r = x - n
    return float((-1.0) ** int(n) * np.sin(np.pi * r)) if r != 0.0 else 0.0


def laplacian(grid: int, h: float) -> sp.csr_matrix:
    """Five-point Laplacian on interior nodes with zero Dirichlet ghost values."""
    main = -2.0 * np.ones(grid)
    off = np.ones(grid - 1)
    d1 = sp.diags([off, main, off], [-1, 0, 1]) / h ** 2
    eye = sp.identity(grid)
    return (sp.kron(d1, eye) + sp.kron(eye, d1)).tocsr()


class _HeatStepper:
    def __init__(self, spec: HeatSpec, mu):
        self.spec = spec
        self.mu1, self.mu2 = float(mu[0]), float(mu[1])
        x1, x2 = spec.nodes()
        self.shape = 100.0 * spec.source_scale * np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)
        self.lap = laplacian(spec.grid, spec.h)
        self._solvers = {}

    def solver(self, substeps: int):
        if substeps not in self._solvers:
            delta = self.spec.dt / substeps
            op = sp.identity(self.lap.shape[0], format="csc") - delta * self.lap.tocsc()
            self._solvers[substeps] = splu(op.tocsc())
        return self._solvers[substeps]

    def time(self, label: int, j: int, substeps: int) -> float:
        # integer numerator keeps half-integer times exact
        return ((label * substeps + j) * self.spec.t_end) / ((self.spec.n_labels - 1) * substeps)

    def forcing(self, t: float) -> np.ndarray:
        return self.shape * sin_2pi(t)

    def reaction(self, u: np.ndarray) -> np.ndarray:
        return (self.mu1 / self.mu2) * np.expm1(self.mu2 * u)

    def advance(self, u: np.ndarray, label: int) -> np.ndarray:
        """State at ``label + 1`` from the state at ``label``, halving the step on instability."""
        substeps = self.spec.substeps
        for _ in range(self.spec.max_halvings + 1):
            delta = self.spec.dt / substeps
            lu = self.solver(substeps)
            v = u.copy()
            stable = True
            for j in range(substeps):
                with np.errstate(over="ignore", invalid="ignore"):
                    stiffness = delta * self.mu1 * np.exp(self.mu2 * v).max()
                    rhs = v + delta * (self.forcing(self.time(label, j, substeps)) - self.reaction(v))
                if not np.isfinite(stiffness) or stiffness > 1.0 or not np.all(np.isfinite(rhs)):
                    stable = False
                    break
                v = lu.solve(rhs)
            if stable and np.all(np.isfinite(v)):
                return v
            substeps *= 2
        raise SolverDivergenceError(
            f"heat solver unstable at label {label} for mu=({self.mu1}, {self.mu2}) "
            f"after {self.spec.max_halvings} step halvings")


def solve_heat(spec: HeatSpec, mu) -> SnapshotMatrix:
    """Semi-implicit finite-difference solve; returns the grid**2 x n_labels snapshots.

    Diffusion is implicit (one sparse LU per step size), forcing and reaction
    are explicit.
    """
    stepper = _HeatStepper(spec, mu)
    m = spec.grid ** 2
    out = np.zeros((m, spec.n_labels))
    u = np.zeros(m)
    for label in range(spec.n_labels - 1):
        u = stepper.advance(u, label)
        out[:, label + 1] = u
    return SnapshotMatrix(tuple(float(c) for c in mu), out)


def generate_heat_set(spec: HeatSpec, parameters=None) -> ParametricSnapshotSet:
    params = spec.parameters if parameters is None else parameters
    if not len(params):
        raise ValidationError("no heat parameters given")
    members = tuple(solve_heat(spec, mu) for mu in params)
    return ParametricSnapshotSet(spec.time_axis(), members, "u")


def sample_heat_parameters(n_train: int, n_holdout: int = 3, seed: int = 0,
                           low: float = 0.01, high: float = 10.0, decimals: int = 4):
    """Latin-hypercube training parameters plus held-out points inside their hull.

    Held-out points are drawn from the central half of the box and kept only
    if they fall inside the convex hull of the training points, so that
    piecewise-linear regression is defined there.
    """
    if n_train < 1:
        raise ValidationError("need at least one training parameter")
    sampler = qmc.LatinHypercube(d=2, seed=seed)
    train = np.round(qmc.scale(sampler.random(n_train), [low, low], [high, high]), decimals)
    rng = np.random.default_rng(seed + 1)
    hull = Triangulation(train) if n_train >= 3 else None
    holdout = []
    lo, hi = low + 0.25 * (high - low), high - 0.25 * (high - low)
    taken = {tuple(p) for p in train}
    for _ in range(10000):
        if len(holdout) == n_holdout:
            break
        cand = np.round(rng.uniform(lo, hi, size=2), decimals)
        if tuple(cand) in taken:
            continue
        if hull is not None and hull.locate(cand)[0] < 0:
            continue
        holdout.append(cand)
        taken.add(tuple(cand))
    else:
        raise ValidationError("could not place held-out parameters inside the training hull")
    return [tuple(map(float, p)) for p in train], [tuple(map(float, p)) for p in holdout]


# -- unstable synthetic system -------------------------------------------------


@dataclass(frozen=True)
class SyntheticUnstableSpec:
    """Unit-circle oscillations plus one injected mode of modulus ``rho``.

    ``x_k(mu) = sum_j c_j(mu) phi_j e^{i w_j k} + a(mu) psi (rho e^{i theta})^k`` with
    ``c_j(mu) = 1 + mu (j + 1)``, ``a(mu) = fraction * |c(mu)|`` and
    ``phi_j, psi`` orthonormal columns drawn from ``seed``. ``rho = 1`` or
    ``fraction = 0`` gives purely stable data.
    """

    s: int = 16
    frequencies: tuple = (0.2, 0.45, 0.9)
    rho: float = 1.02
    theta: float = 0.6
    fraction: float = 0.01
    N: int = 100
    seed: int = 0
    parameters: tuple = (0.0,)

    def __post_init__(self):
        if not self.rho >= 1.0:
            raise ValidationError(f"rho must be >= 1, got {self.rho}")
        if not 0.0 <= self.fraction < 1.0:
            raise ValidationError(f"fraction must lie in [0, 1), got {self.fraction}")
        if self.s < len(self.frequencies) + 1:
            raise ValidationError("state dimension must exceed the number of modes")
        if self.N < 2:
            raise ValidationError("N must be >= 2")
        object.__setattr__(self, "frequencies", tuple(float(w) for w in self.frequencies))
        object.__setattr__(self, "parameters",
                           tuple(tuple(np.atleast_1d(np.asarray(mu, dtype=float)).tolist())
                                 for mu in self.parameters))

    def basis(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        k = len(self.frequencies) + 1
        raw = rng.standard_normal((self.s, k)) + 1j * rng.standard_normal((self.s, k))
        q, _ = np.linalg.qr(raw)
        return q

    def coefficients(self, mu) -> tuple[np.ndarray, float]:
        mu0 = float(np.atleast_1d(mu)[0])
        c = 1.0 + mu0 * np.arange(1, len(self.frequencies) + 1)
        return c, self.fraction * float(np.linalg.norm(c))

    def time_axis(self) -> TimeAxis:
        return TimeAxis(0.0, 1.0, self.N, label_origin=0)


def synthetic_truth(spec: SyntheticUnstableSpec, mu, labels, include_unstable: bool = False) -> np.ndarray:
    """Exact generator; by default only the stable part, the forecasting reference."""
    k = np.atleast_1d(np.asarray(labels, dtype=float))
    q = spec.basis()
    c, a = spec.coefficients(mu)
    lam = np.exp(1j * np.asarray(spec.frequencies))
    out = q[:, :-1] @ (c[:, None] * lam[:, None] ** k[None, :])
    if include_unstable:
        out = out + a * np.outer(q[:, -1], (spec.rho * np.exp(1j * spec.theta)) ** k)
    return out[:, 0] if np.ndim(labels) == 0 else out


def generate_synthetic_unstable(spec: SyntheticUnstableSpec | None = None) -> ParametricSnapshotSet:
    spec = spec or SyntheticUnstableSpec()
    labels = np.arange(spec.N)
    members = tuple(SnapshotMatrix(mu, synthetic_truth(spec, mu, labels, include_unstable=True))
                    for mu in spec.parameters)
    return ParametricSnapshotSet(spec.time_axis(), members, "synthetic")


def spec_from_dict(kind: str, data: dict):
    """Build a spec from a JSON-style dict, ignoring unknown keys."""
    cls = {"toy": ToySpec, "heat": HeatSpec, "synthetic": SyntheticUnstableSpec}[kind]
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in data.items() if k in names}
    return cls(**kwargs)
