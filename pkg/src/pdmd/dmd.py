"""Dynamic mode decomposition, its higher-order variant and spectrum stabilization.

Forecasts use ``x(k) = Phi @ diag(lambda ** (k - label_origin)) @ b``, so the
first training label reproduces the (rank-r projected) first snapshot.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EmptySpectrumError, ValidationError

FIRST_SNAPSHOT = "first-snapshot"
LEAST_SQUARES_ALL = "least-squares-all"
AMPLITUDE_STRATEGIES = (FIRST_SNAPSHOT, LEAST_SQUARES_ALL)

KEPT = "kept-normalized"
DIVERGENT = "discarded-divergent"
CONVERGENT = "discarded-convergent"
UNTOUCHED = "untouched"
_ACTIVE = (KEPT, UNTOUCHED)


@dataclass(frozen=True)
class DmdConfig:
    """Fit options.

    svd_rank: truncation rank r of the snapshot SVD; 0 keeps every singular
        value above ``max(s, N) * sigma_1 * eps``.
    hodmd_depth: number d of time-lagged snapshots stacked (1 = plain DMD).
    stabilization: tolerance eps on the distance from the unit circle, or None.
    amplitude_strategy: "first-snapshot" or "least-squares-all".
    """

    svd_rank: int = 0
    hodmd_depth: int = 1
    stabilization: float | None = None
    amplitude_strategy: str = FIRST_SNAPSHOT

    def __post_init__(self):
        if int(self.svd_rank) != self.svd_rank or self.svd_rank < 0:
            raise ValidationError(f"svd_rank must be a non-negative integer, got {self.svd_rank}")
        if int(self.hodmd_depth) != self.hodmd_depth or self.hodmd_depth < 1:
            raise ValidationError(f"hodmd_depth must be an integer >= 1, got {self.hodmd_depth}")
        if self.stabilization is not None and not self.stabilization >= 0:
            raise ValidationError(f"stabilization tolerance must be >= 0, got {self.stabilization}")
        if self.amplitude_strategy not in AMPLITUDE_STRATEGIES:
            raise ValidationError(f"amplitude_strategy must be one of {AMPLITUDE_STRATEGIES}")
        object.__setattr__(self, "svd_rank", int(self.svd_rank))
        object.__setattr__(self, "hodmd_depth", int(self.hodmd_depth))

    def check_sequence(self, state_dim: int, n_times: int) -> None:
        d = self.hodmd_depth
        if n_times < d + 1:
            raise ValidationError(f"need at least {d + 1} snapshots for depth {d}, got {n_times}")
        limit = min(state_dim * d, n_times - d)
        if self.svd_rank > limit:
            raise ValidationError(
                f"svd_rank {self.svd_rank} exceeds min(state_dim*d, N-d) = {limit}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DmdConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in fields})


@dataclass(frozen=True, eq=False)
class DmdModel:
    """Fitted modes, eigenvalues and amplitudes of one snapshot sequence.

    ``snapshots`` keeps the (unstacked) training sequence so amplitudes can be
    refitted after stabilization. ``stabilization_record`` lists, in the
    original fit order, ``(eigenvalue as fitted, disposition)`` pairs; the
    active modes are the entries whose disposition is kept or untouched.
    """

    modes: np.ndarray
    eigenvalues: np.ndarray
    amplitudes: np.ndarray
    d: int
    label_origin: int
    stabilization_record: tuple
    snapshots: np.ndarray
    residual: float
    svd_rank: int
    amplitude_strategy: str = FIRST_SNAPSHOT
    notes: tuple = ()

    def __post_init__(self):
        for name in ("modes", "eigenvalues", "amplitudes", "snapshots"):
            arr = np.array(getattr(self, name), dtype=np.complex128, copy=True)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def state_dim(self) -> int:
        return self.modes.shape[0]

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    @property
    def n_train(self) -> int:
        return self.snapshots.shape[1]

    @property
    def residual_ratio(self) -> float:
        """One-step residual relative to the norm of the shifted data."""
        norm = np.linalg.norm(self.snapshots[:, 1:])
        return self.residual / norm if norm > 0 else 0.0

    def dynamics(self, labels) -> np.ndarray:
        """r x L matrix of ``b_i * lambda_i ** (k - label_origin)``."""
        powers = np.asarray(labels, dtype=float).reshape(-1) - self.label_origin
        return self.amplitudes[:, None] * np.power(self.eigenvalues[:, None], powers[None, :])

    def reconstruct(self, labels) -> np.ndarray:
        if self.rank == 0:
            raise EmptySpectrumError("model has no modes")
        return self.modes @ self.dynamics(labels)

    def in_sample_error(self) -> float:
        """Relative Frobenius error of the reconstruction over the training labels."""
        labels = self.label_origin + np.arange(self.n_train)
        norm = np.linalg.norm(self.snapshots)
        err = np.linalg.norm(self.reconstruct(labels) - self.snapshots)
        return err / norm if norm > 0 else err


def _ulp_neighbours(v: float, k: int) -> np.ndarray:
    out = [v]
    up = down = v
    for _ in range(k):
        up, down = np.nextafter(up, np.inf), np.nextafter(down, -np.inf)
        out += [up, down]
    return np.array(out)


def _unit_modulus(z: complex) -> complex:
    """Representable complex number closest to ``z/|z|`` whose numpy modulus is exactly 1.0.

    Among candidates within a few ulps, those that Python's ``abs`` also maps
    to 1.0 are preferred (the two hypot implementations can differ by an ulp).
    """
    u = complex(z / abs(z))
    for k in (4, 16, 64):
        cand = (_ulp_neighbours(u.real, k)[:, None] + 1j * _ulp_neighbours(u.imag, k)[None, :]).ravel()
        good = np.flatnonzero(np.abs(cand) == 1.0)
        if good.size:
            good = good[np.argsort(np.abs(cand[good] - u), kind="stable")]
            for i in good:
                if abs(complex(cand[i])) == 1.0:
                    return complex(cand[i])
            return complex(cand[good[0]])
    return u  # pragma: no cover - not observed for doubles


def _as_sequence(sequence) -> np.ndarray:
    data = np.asarray(sequence)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2:
        raise DimensionMismatchError(f"sequence must be s x N, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("sequence contains non-finite values")
    if np.iscomplexobj(data) and not np.any(data.imag):
        data = data.real
    return data


def _stack(data: np.ndarray, d: int) -> np.ndarray:
    s, n = data.shape
    cols = n - d + 1
    return np.vstack([data[:, j:j + cols] for j in range(d)])


def _fit_amplitudes(modes, eigenvalues, snapshots, d, strategy) -> np.ndarray:
    if strategy == FIRST_SNAPSHOT:
        count = d
    else:
        count = snapshots.shape[1]
    powers = np.power(eigenvalues[None, :], np.arange(count)[:, None])  # count x r
    system = np.vstack([modes * powers[j] for j in range(count)])
    rhs = snapshots[:, :count].T.reshape(-1)
    amplitudes, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return amplitudes


def _fit(data: np.ndarray, config: DmdConfig, label_origin: int) -> DmdModel:
    s, n_times = data.shape
    d = config.hodmd_depth
    config.check_sequence(s, n_times)
    stacked = _stack(data, d)
    X, Y = stacked[:, :-1], stacked[:, 1:]
    U, sv, Vh = np.linalg.svd(X, full_matrices=False)
    notes = []
    tol = max(s, n_times) * sv[0] * np.finfo(float).eps if sv.size else 0.0
    numerical_rank = int(np.count_nonzero(sv > tol))
    if numerical_rank == 0:
        raise ValidationError("snapshot sequence is numerically zero; nothing to fit")
    r = config.svd_rank or numerical_rank
    if r > numerical_rank:
        notes.append(f"requested svd_rank {r} exceeds numerical rank {numerical_rank}; truncated")
        r = numerical_rank
    U_r, s_r, V_r = U[:, :r], sv[:r], Vh[:r].conj().T
    YV = (Y @ V_r) / s_r
    atilde = U_r.conj().T @ YV
    eigenvalues, W = np.linalg.eig(atilde)
    stacked_modes = YV @ W
    norms = np.linalg.norm(stacked_modes, axis=0)
    # exact modes vanish for zero eigenvalues; fall back to projected modes there
    degenerate = norms <= 1e-12 * max(norms.max(initial=0.0), 1e-300)
    if np.any(degenerate):
        stacked_modes[:, degenerate] = U_r @ W[:, degenerate]
        norms = np.linalg.norm(stacked_modes, axis=0)
    stacked_modes = stacked_modes / norms

    # one-step residual of the first block (x_{k+1} from x_k, ..., x_{k+d-1})
    coeffs, *_ = np.linalg.lstsq(stacked_modes, X, rcond=None)
    predicted = stacked_modes[:s] @ (eigenvalues[:, None] * coeffs)
    residual = float(np.linalg.norm(Y[:s] - predicted))

    modes = stacked_modes[:s]
    head_norms = np.linalg.norm(modes, axis=0)
    head_norms[head_norms == 0] = 1.0
    modes = modes / head_norms
    amplitudes = _fit_amplitudes(modes, eigenvalues, data, d, config.amplitude_strategy)
    model = DmdModel(
        modes=modes,
        eigenvalues=eigenvalues,
        amplitudes=amplitudes,
        d=d,
        label_origin=label_origin,
        stabilization_record=tuple((complex(lam), UNTOUCHED) for lam in eigenvalues),
        snapshots=data,
        residual=residual,
        svd_rank=r,
        amplitude_strategy=config.amplitude_strategy,
        notes=tuple(notes),
    )
    if config.stabilization is not None:
        model = stabilize(model, config.stabilization)
    return model


def fit_dmd(sequence, config: DmdConfig | None = None, label_origin: int = 1) -> DmdModel:
    """Standard DMD (exact modes) of an s x N snapshot sequence.

    A config with ``hodmd_depth > 1`` is forwarded to :func:`fit_hodmd`.
    """
    config = config or DmdConfig()
    return _fit(_as_sequence(sequence), config, label_origin)


def fit_hodmd(sequence, config: DmdConfig, label_origin: int = 1) -> DmdModel:
    """Higher-order DMD: plain DMD on d-lagged stacked snapshots, then unstacked.

    Returned modes are the first ``s`` rows of each stacked mode, renormalized;
    amplitudes fit the first ``d`` snapshots (``first-snapshot``) or all of them.
    """
    return _fit(_as_sequence(sequence), config, label_origin)


def stabilize(model: DmdModel, eps: float) -> DmdModel:
    """Drop modes farther than ``eps`` from the unit circle, normalize the rest.

    Survivor amplitudes are refitted on the training snapshots with the model's
    amplitude strategy.
    """
    if not eps >= 0:
        raise ValidationError(f"stabilization tolerance must be >= 0, got {eps}")
    moduli = np.abs(model.eigenvalues)
    distance = np.abs(moduli - 1.0)
    keep = distance <= eps
    if not np.any(keep):
        raise EmptySpectrumError(
            f"empty spectrum: all {model.rank} eigenvalues lie farther than {eps} from the unit circle")
    dispositions = np.where(keep, KEPT, np.where(moduli > 1.0, DIVERGENT, CONVERGENT))
    record = list(model.stabilization_record)
    active = [i for i, (_, disp) in enumerate(record) if disp in _ACTIVE]
    for slot, disp in zip(active, dispositions):
        record[slot] = (record[slot][0], str(disp))

    eigenvalues = np.array([_unit_modulus(lam) for lam in model.eigenvalues[keep]])
    modes = model.modes[:, keep]
    amplitudes = _fit_amplitudes(modes, eigenvalues, model.snapshots, model.d, model.amplitude_strategy)
    return dataclasses.replace(model, modes=modes, eigenvalues=eigenvalues, amplitudes=amplitudes,
                               stabilization_record=tuple(record))


def forecast(model: DmdModel, label: int) -> np.ndarray:
    """State vector at integer ``label`` (before, inside or after the training window)."""
    return model.reconstruct([label])[:, 0]


def spectrum_summary(model: DmdModel, tol: float = 1e-6) -> dict:
    dist = np.abs(np.abs(model.eigenvalues) - 1.0)
    return {
        "count": int(model.rank),
        "on_unit_circle": int(np.count_nonzero(dist <= tol)),
        "off_unit_circle": int(np.count_nonzero(dist > tol)),
        "max_modulus": float(np.abs(model.eigenvalues).max()) if model.rank else float("nan"),
        "discarded": sum(1 for _, disp in model.stabilization_record if disp not in _ACTIVE),
    }
