"""Proper orthogonal decomposition of the global snapshot matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .snapshots import ParametricSnapshotSet, validate_set

# Gram-matrix ("method of snapshots") path is used when m > GRAM_RATIO * columns.
GRAM_RATIO = 4


@dataclass(frozen=True, eq=False)
class PodBasis:
    """Orthonormal spatial modes (m x n) plus the full singular-value spectrum."""

    modes: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self):
        modes = np.array(self.modes, copy=True)
        sv = np.array(self.singular_values, dtype=float, copy=True)
        if modes.ndim != 2 or modes.shape[1] < 1:
            raise DimensionMismatchError(f"POD modes must be m x n with n >= 1, got {modes.shape}")
        if modes.shape[1] > sv.size:
            raise DimensionMismatchError("more modes than singular values")
        modes.flags.writeable = False
        sv.flags.writeable = False
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "singular_values", sv)

    @property
    def n(self) -> int:
        return self.modes.shape[1]

    @property
    def m(self) -> int:
        return self.modes.shape[0]

    def retained_energy(self) -> float:
        """Fraction of the squared singular values captured by the kept modes."""
        energy = self.singular_values ** 2
        total = energy.sum()
        return float(energy[:self.n].sum() / total) if total > 0 else 1.0


def assemble_global_matrix(snapshots: ParametricSnapshotSet) -> np.ndarray:
    """Concatenate every member horizontally, in member order (m x N*p)."""
    violations = validate_set(snapshots)
    if violations:
        raise ValidationError("invalid snapshot set: " + "; ".join(violations), violations)
    return np.hstack([mem.values for mem in snapshots.members])


def rank_for_energy(singular_values, tau: float) -> int:
    """Smallest n whose modes retain at least ``tau`` of the energy. Advisory only."""
    if not 0 < tau <= 1:
        raise ValueError(f"energy threshold must lie in (0, 1], got {tau}")
    energy = np.asarray(singular_values, dtype=float) ** 2
    if energy.sum() == 0:
        return 1
    cumulative = np.cumsum(energy) / energy.sum()
    return int(min(np.searchsorted(cumulative, tau - 1e-15) + 1, energy.size))


def _fix_phase(modes: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made real and positive
    idx = np.argmax(np.abs(modes), axis=0)
    pivots = modes[idx, np.arange(modes.shape[1])]
    phases = pivots / np.abs(pivots)
    out = modes * np.conj(phases)
    if np.iscomplexobj(out):
        out[idx, np.arange(modes.shape[1])] = np.abs(pivots)
    return out


def _gram_svd(data: np.ndarray, n: int):
    gram = data.conj().T @ data
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    sv = np.sqrt(evals)
    if sv[n - 1] <= sv[0] * max(data.shape) * np.finfo(float).eps * 1e2:
        return None
    modes = data @ (evecs[:, order[:n]] / sv[:n])
    # one re-orthonormalization pass; the Gram route squares the condition number
    q, r = np.linalg.qr(modes)
    q = q * np.sign(np.real(np.diag(r)))
    return q, sv


def fit_pod(global_matrix: np.ndarray, n: int) -> PodBasis:
    """POD basis of rank ``n`` from the global m x (N*p) snapshot matrix.

    Real-valued input (zero imaginary part) is decomposed in real arithmetic,
    so the modes of real data are exactly real.
    """
    data = np.asarray(global_matrix)
    if data.ndim != 2:
        raise DimensionMismatchError(f"global matrix must be 2-D, got shape {data.shape}")
    m, k = data.shape
    if not 1 <= n <= min(m, k):
        raise ValidationError(f"POD rank must satisfy 1 <= n <= {min(m, k)}, got {n}")
    if np.iscomplexobj(data) and not np.any(data.imag):
        data = data.real
    result = _gram_svd(data, n) if m > GRAM_RATIO * k else None
    if result is None:
        u, sv, _ = np.linalg.svd(data, full_matrices=False)
        modes = u[:, :n]
    else:
        modes, sv = result
    return PodBasis(_fix_phase(modes), sv)


def project(basis: PodBasis, columns: np.ndarray) -> np.ndarray:
    """Modal coefficients ``U_n^H @ columns`` (accepts one vector or an m x K block)."""
    columns = np.asarray(columns)
    if columns.shape[0] != basis.m:
        raise DimensionMismatchError(f"expected {basis.m} rows, got {columns.shape[0]}")
    return basis.modes.conj().T @ columns


def lift(basis: PodBasis, reduced: np.ndarray) -> np.ndarray:
    """Full-order representation ``U_n @ reduced``."""
    reduced = np.asarray(reduced)
    if reduced.shape[0] != basis.n:
        raise DimensionMismatchError(f"expected {basis.n} reduced rows, got {reduced.shape[0]}")
    return basis.modes @ reduced
