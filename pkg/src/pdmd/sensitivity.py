"""Sensitivity of e_I to the training parameter set and to the training time window."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dmd import DmdConfig
from .errors import DegenerateGeometryError, ExtrapolationError, ValidationError
from .parametric import PARTITIONED, compute_error_report, fit_model
from .regression import Triangulation
from .snapshots import ParametricSnapshotSet


@dataclass
class SensitivityTable:
    """Rows ``(k, set_size, regressor, e_I)``; ``set_size`` is |S_k| or |T_k|."""

    mode: str
    probe_label: int
    seed: int | None = None
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def column(self, kind: str) -> np.ndarray:
        """e_I values of one regressor label, in schedule order."""
        return np.array([row[3] for row in self.rows if row[2] == kind])

    def sizes(self, kind: str) -> np.ndarray:
        return np.array([row[1] for row in self.rows if row[2] == kind])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# mode={self.mode} probe_label={self.probe_label} seed={self.seed}\n")
        for note in self.notes:
            buf.write(f"# {note}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "set_size", "regressor", "e_I"])
        for k, size, kind, value in self.rows:
            writer.writerow([k, size, kind, f"{value:.17g}"])
        return buf.getvalue()


def median_smooth(values, window: int = 3) -> np.ndarray:
    """Running median with a window that shrinks at both ends."""
    values = np.asarray(values, dtype=float)
    half = window // 2
    return np.array([np.median(values[max(0, i - half):i + half + 1]) for i in range(len(values))])


def _encloses(points: np.ndarray, queries: np.ndarray) -> bool:
    if points.shape[1] == 1:
        lo, hi = points[:, 0].min(), points[:, 0].max()
        return bool(np.all((queries[:, 0] >= lo) & (queries[:, 0] <= hi)))
    if points.shape[1] != 2:
        return True
    try:
        tri = Triangulation(points)
    except DegenerateGeometryError:
        return False
    return all(tri.locate(q)[0] >= 0 for q in queries)


def nested_parameter_schedule(pool_size: int, initial: int, step: int, seed: int,
                              enclose=None, pool_parameters=None, max_tries: int = 10000) -> list:
    """Nested index sets S_0 ⊂ S_1 ⊂ ... ⊂ {0..pool_size-1}, each adding ``step`` random members.

    With ``enclose`` (query points) and ``pool_parameters``, S_0 is redrawn
    until its convex hull contains every query point, so hull-restricted
    regressors are defined on every S_k.
    """
    if not 1 <= initial <= pool_size or step < 1:
        raise ValidationError(
            f"schedule needs 1 <= initial <= {pool_size} and step >= 1, got initial={initial}, step={step}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        first = sorted(int(i) for i in rng.choice(pool_size, size=initial, replace=False))
        if enclose is None or _encloses(np.asarray(pool_parameters, dtype=float)[first],
                                        np.atleast_2d(np.asarray(enclose, dtype=float))):
            break
    else:
        raise ValidationError(f"no initial subset of size {initial} encloses the query parameters")
    schedule = [first]
    while len(schedule[-1]) < pool_size:
        rest = sorted(set(range(pool_size)) - set(schedule[-1]))
        extra = rng.choice(rest, size=min(step, len(rest)), replace=False)
        schedule.append(sorted(schedule[-1] + [int(i) for i in extra]))
    return schedule


def _evaluate(table, k, size, model, truth, kinds, probe_label):
    for kind in kinds:
        label, used = kind, kind
        if kind in ("cubic", "cubic-1d") and model.parameter_dim > 1:
            # no piecewise-cubic surface in 2-D; the thin-plate spline stands in
            label, used = "rbf-for-cubic", "rbf"
        try:
            value = float(compute_error_report(model, truth, [probe_label], regressor=used).e_I[0])
        except (ExtrapolationError, DegenerateGeometryError) as exc:
            table.notes.append(f"k={k} {label}: {exc}")
            value = float("nan")
        table.rows.append((k, size, label, value))


def run_parameter_sensitivity(pool: ParametricSnapshotSet, truth: ParametricSnapshotSet, schedule,
                              n: int, probe_label: int, kinds=("linear",),
                              config: DmdConfig | None = None, variant: str = PARTITIONED,
                              train_count: int | None = None, seed: int | None = None) -> SensitivityTable:
    """e_I at ``probe_label`` for models trained on ``pool.subset(S_k)``, each S_k in ``schedule``.

    ``train_count`` truncates the training window (default: all instants of ``pool``).
    """
    sets = [list(s) for s in schedule]
    if not sets:
        raise ValidationError("empty schedule")
    for k, indices in enumerate(sets):
        if not indices or min(indices) < 0 or max(indices) >= pool.p or len(set(indices)) != len(indices):
            raise ValidationError(f"S_{k} has invalid member indices for a pool of {pool.p}")
        if k and not set(sets[k - 1]) <= set(indices):
            raise ValidationError(f"S_{k - 1} is not contained in S_{k}")
    held = {mem.parameter for mem in truth.members}
    for k, indices in enumerate(sets):
        overlap = held & {pool.members[i].parameter for i in indices}
        if overlap:
            raise ValidationError(f"held-out parameters {sorted(overlap)} also appear in S_{k}")
    table = SensitivityTable("parameter", int(probe_label), seed)
    for k, indices in enumerate(sets):
        data = pool.subset(indices)
        if train_count is not None:
            data = data.truncated(train_count)
        model = fit_model(data, n, config, variant)
        _evaluate(table, k, len(indices), model, truth, kinds, probe_label)
    return table


def run_time_sensitivity(pool: ParametricSnapshotSet, truth: ParametricSnapshotSet, counts,
                         n: int, probe_label: int, kinds=("linear",), config: DmdConfig | None = None,
                         variant: str = PARTITIONED, train_indices=None) -> SensitivityTable:
    """e_I at ``probe_label`` after retraining on the first ``counts[k]`` instants of the fixed set."""
    config = config or DmdConfig()
    counts = [int(c) for c in counts]
    if not counts:
        raise ValidationError("empty schedule")
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValidationError("time windows must grow strictly")
    minimum = max(2, config.hodmd_depth + 1)
    if counts[0] < minimum:
        raise ValidationError(f"window of {counts[0]} instants is shorter than {minimum} (d+1)")
    if counts[-1] > pool.n_times:
        raise ValidationError(f"window of {counts[-1]} instants exceeds the {pool.n_times} available")
    data = pool if train_indices is None else pool.subset(list(train_indices))
    held = {mem.parameter for mem in truth.members}
    overlap = held & {mem.parameter for mem in data.members}
    if overlap:
        raise ValidationError(f"held-out parameters {sorted(overlap)} are in the training set")
    table = SensitivityTable("time", int(probe_label))
    for k, count in enumerate(counts):
        model = fit_model(data.truncated(count), n, config, variant)
        _evaluate(table, k, count, model, truth, kinds, probe_label)
    return table
