"""Parametric DMD: offline monolithic/partitioned training and the online regression phase.

Offline, a shared POD basis compresses every member; DMD then advances the
reduced coefficients, either with one operator over the vertically stacked
coefficients of all parameters (monolithic) or with one operator per
parameter (partitioned). Online, the forecast reduced snapshots of all
training parameters are regressed over parameter space, evaluated at the
query parameter and lifted back through the basis.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dmd import DmdConfig, DmdModel, fit_dmd
from .errors import DimensionMismatchError, PdmdError, ValidationError
from .pod import PodBasis, assemble_global_matrix, fit_pod, lift, project
from .regression import fit_regressor
from .snapshots import ParametricSnapshotSet, TimeAxis

MONOLITHIC = "monolithic"
PARTITIONED = "partitioned"
VARIANTS = (MONOLITHIC, PARTITIONED)


def thread_count() -> int:
    """Worker count from ``PDMD_THREADS`` (unset = 1, 0 = all cores)."""
    raw = os.environ.get("PDMD_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"PDMD_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ValidationError(f"PDMD_THREADS must be >= 0, got {value}")
    return value or (os.cpu_count() or 1)


def _map(func, items):
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True, eq=False)
class ParametricDmdModel:
    """Trained reduced-order model; ``parameters[i]`` owns coefficient block i."""

    variant: str
    pod: PodBasis
    operators: tuple
    parameters: np.ndarray
    time_axis: TimeAxis
    dmd_config: DmdConfig
    online_defaults: dict = field(default_factory=lambda: {"regressor": "linear"})
    real_data: bool = False
    field_name: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        params = np.array(self.parameters, dtype=float, copy=True)
        if params.ndim == 1:
            params = params[:, None]
        params.flags.writeable = False
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "operators", tuple(self.operators))
        object.__setattr__(self, "online_defaults", dict(self.online_defaults))
        n, p = self.pod.n, len(params)
        if self.variant == MONOLITHIC:
            if len(self.operators) != 1 or self.operators[0].state_dim != n * p:
                raise DimensionMismatchError(
                    f"monolithic model needs one operator of state dimension {n * p}")
        elif len(self.operators) != p or any(op.state_dim != n for op in self.operators):
            raise DimensionMismatchError(
                f"partitioned model needs {p} operators of state dimension {n}")

    @property
    def n(self) -> int:
        return self.pod.n

    @property
    def p(self) -> int:
        return len(self.parameters)

    @property
    def parameter_dim(self) -> int:
        return self.parameters.shape[1]


def _reduced_blocks(snapshots: ParametricSnapshotSet, n: int):
    basis = fit_pod(assemble_global_matrix(snapshots), n)
    blocks = [project(basis, mem.values) for mem in snapshots.members]
    return basis, blocks


def _prepare(snapshots, config, online_defaults):
    config = config or DmdConfig()
    defaults = {"regressor": "linear"}
    defaults.update(online_defaults or {})
    return config, defaults


def fit_monolithic(snapshots: ParametricSnapshotSet, n: int, config: DmdConfig | None = None,
                   online_defaults: dict | None = None) -> ParametricDmdModel:
    """One DMD operator on the (n*p) x N matrix of stacked reduced coefficients."""
    config, defaults = _prepare(snapshots, config, online_defaults)
    basis, blocks = _reduced_blocks(snapshots, n)
    stacked = np.vstack(blocks)
    operator = fit_dmd(stacked, config, label_origin=snapshots.time_axis.label_origin)
    return ParametricDmdModel(MONOLITHIC, basis, (operator,), snapshots.parameters,
                              snapshots.time_axis, config, defaults, snapshots.is_real,
                              snapshots.field_name)


def fit_partitioned(snapshots: ParametricSnapshotSet, n: int, config: DmdConfig | None = None,
                    online_defaults: dict | None = None) -> ParametricDmdModel:
    """One DMD operator per parameter on its own n x N reduced coefficients.

    A failure for any parameter aborts the fit and names that parameter.
    """
    config, defaults = _prepare(snapshots, config, online_defaults)
    basis, blocks = _reduced_blocks(snapshots, n)
    origin = snapshots.time_axis.label_origin

    def fit_one(i):
        try:
            return fit_dmd(blocks[i], config, label_origin=origin)
        except PdmdError as exc:
            mu = snapshots.members[i].parameter
            raise type(exc)(f"fit failed for parameter {i} {mu}: {exc}") from exc

    operators = _map(fit_one, list(range(snapshots.p)))
    return ParametricDmdModel(PARTITIONED, basis, tuple(operators), snapshots.parameters,
                              snapshots.time_axis, config, defaults, snapshots.is_real,
                              snapshots.field_name)


def fit_model(snapshots: ParametricSnapshotSet, n: int, config: DmdConfig | None = None,
              variant: str = PARTITIONED, online_defaults: dict | None = None) -> ParametricDmdModel:
    if variant == MONOLITHIC:
        return fit_monolithic(snapshots, n, config, online_defaults)
    if variant == PARTITIONED:
        return fit_partitioned(snapshots, n, config, online_defaults)
    raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")


def _labels(labels) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(labels))
    if arr.size == 0:
        raise ValidationError("at least one label is required")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValidationError(f"labels must be integers, got {arr}")
    return arr.astype(np.int64)


def predict_reduced_many(model: ParametricDmdModel, labels) -> np.ndarray:
    """L x n x p array; slice ``[l]`` is the column block at ``labels[l]``."""
    labels = _labels(labels)
    n, p = model.n, model.p
    if model.variant == MONOLITHIC:
        stacked = model.operators[0].reconstruct(labels)  # (n*p) x L
        return stacked.reshape(p, n, len(labels)).transpose(2, 1, 0)
    cols = _map(lambda op: op.reconstruct(labels), list(model.operators))  # p of n x L
    return np.stack(cols, axis=2).transpose(1, 0, 2)


def predict_reduced(model: ParametricDmdModel, label: int) -> np.ndarray:
    """n x p reduced snapshots at ``label``; column i belongs to ``parameters[i]``."""
    return predict_reduced_many(model, [label])[0]


@dataclass(frozen=True)
class ForecastRequest:
    """Query parameter, integer labels and an optional regressor override."""

    parameter: tuple
    labels: tuple
    regressor: str | None = None
    hyper: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "parameter",
                           tuple(float(c) for c in np.atleast_1d(np.asarray(self.parameter, dtype=float))))
        object.__setattr__(self, "labels", tuple(int(k) for k in _labels(self.labels)))


def _regressor_spec(model, request):
    defaults = model.online_defaults
    kind = request.regressor or defaults.get("regressor", "linear")
    if request.hyper is not None:
        hyper = dict(request.hyper)
    elif request.regressor in (None, defaults.get("regressor")):
        hyper = {k: v for k, v in defaults.items() if k != "regressor"}
    else:
        hyper = {}
    return kind, hyper


def forecast_reduced(model: ParametricDmdModel, request: ForecastRequest) -> np.ndarray:
    """n x L reduced coefficients at the query parameter (one regressor fit per label)."""
    if len(request.parameter) != model.parameter_dim:
        raise DimensionMismatchError(
            f"query parameter has dimension {len(request.parameter)}, model expects {model.parameter_dim}")
    kind, hyper = _regressor_spec(model, request)
    blocks = predict_reduced_many(model, request.labels)
    values = blocks.real if model.real_data else blocks

    def one(block):
        return fit_regressor(kind, model.parameters, block.T, **hyper)(request.parameter)

    return np.column_stack(_map(one, list(values)))


def forecast_full(model: ParametricDmdModel, request: ForecastRequest) -> np.ndarray:
    """m x L full-order states at the query parameter, one column per requested label."""
    return lift(model.pod, forecast_reduced(model, request))


# -- error metric ----------------------------------------------------------------


@dataclass(frozen=True)
class ErrorReport:
    """Mean relative error per label over the held-out parameters.

    ``per_parameter[i, l]`` is NaN where the truth norm is zero; those terms
    are left out of ``e_I`` and counted in ``excluded``.
    """

    labels: np.ndarray
    times: np.ndarray
    e_I: np.ndarray
    per_parameter: np.ndarray
    excluded: np.ndarray
    parameters: np.ndarray
    metadata: dict


def relative_errors(predicted: np.ndarray, truth: np.ndarray):
    """Per-parameter relative errors and e_I from Q x m x L arrays.

    Returns ``(e_I, per_parameter, excluded)``.
    """
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape or predicted.ndim != 3:
        raise DimensionMismatchError(
            f"predicted {predicted.shape} and truth {truth.shape} must both be Q x m x L")
    num = np.linalg.norm(predicted - truth, axis=1)
    den = np.linalg.norm(truth, axis=1)
    zero = den == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        per = np.where(zero, np.nan, num / np.where(zero, 1.0, den))
    counts = (~zero).sum(axis=0)
    with np.errstate(invalid="ignore"):
        e_i = np.where(counts > 0, np.nansum(per, axis=0) / np.maximum(counts, 1), np.nan)
    return e_i, per, zero.sum(axis=0)


def compute_error_report(model: ParametricDmdModel, truth: ParametricSnapshotSet, labels,
                         regressor: str | None = None, hyper: dict | None = None,
                         forecast_scale: float = 1.0) -> ErrorReport:
    """e_I of ``model`` against the members of ``truth`` (the held-out set) at ``labels``.

    ``forecast_scale`` multiplies every forecast before comparison (test hook).
    """
    labels = _labels(labels)
    if not truth.time_axis.is_compatible(model.time_axis):
        raise DimensionMismatchError("truth and model time axes map labels to different times")
    if not truth.time_axis.covers(labels):
        raise DimensionMismatchError(
            f"truth labels {truth.time_axis.label_origin}..{truth.time_axis.last_label} "
            f"do not cover the requested labels")
    if truth.m != model.pod.m:
        raise DimensionMismatchError(f"truth has m={truth.m}, model has m={model.pod.m}")
    cols = [truth.time_axis.column(k) for k in labels]
    predicted, expected = [], []
    for mem in truth.members:
        req = ForecastRequest(mem.parameter, tuple(labels), regressor, hyper)
        predicted.append(forecast_scale * forecast_full(model, req))
        expected.append(mem.values[:, cols])
    e_i, per, excluded = relative_errors(np.array(predicted), np.array(expected))
    kind, _ = _regressor_spec(model, ForecastRequest(truth.members[0].parameter, tuple(labels), regressor, hyper))
    meta = {"n_train_parameters": model.p, "n_train_labels": model.time_axis.count, "regressor": kind}
    return ErrorReport(labels, np.asarray(model.time_axis.time(labels), dtype=float), e_i, per,
                       excluded, truth.parameters, meta)
