"""Snapshot data model and the on-disk archive format.

An archive is a directory holding ``manifest.json`` plus one binary matrix
file per parameter. Matrix files are little-endian::

    b"PDMD" | u32 version (=1) | u8 dtype | 3 zero bytes | u64 m | u64 N | payload

with ``dtype`` 0 for float64 and 1 for complex128 (interleaved re, im), and the
``m * N`` payload values stored column-major, one column per time instant.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ArchiveFormatError, DimensionMismatchError, ValidationError

MAGIC = b"PDMD"
FORMAT_VERSION = 1
DTYPE_REAL64 = 0
DTYPE_COMPLEX128 = 1
_HEADER = struct.Struct("<4sIB3xQQ")
_DTYPE_NAMES = {DTYPE_REAL64: "real64", DTYPE_COMPLEX128: "complex128"}
_NUMPY_DTYPES = {DTYPE_REAL64: np.dtype("<f8"), DTYPE_COMPLEX128: np.dtype("<c16")}

MANIFEST = "manifest.json"

ParameterPoint = tuple  # ordered tuple of floats, uniform length across a set


@dataclass(frozen=True)
class TimeAxis:
    """Uniform time axis; algorithms use integer labels, reports use ``time``."""

    t0: float
    dt: float
    count: int
    label_origin: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"time axis dt must be > 0, got {self.dt}")
        if int(self.count) != self.count or self.count < 2:
            raise ValidationError(f"time axis count must be an integer >= 2, got {self.count}")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "label_origin", int(self.label_origin))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.label_origin, self.label_origin + self.count)

    @property
    def last_label(self) -> int:
        return self.label_origin + self.count - 1

    def time(self, label):
        """Physical time of ``label`` (scalar or array)."""
        return self.t0 + (np.asarray(label) - self.label_origin) * self.dt

    def column(self, label: int) -> int:
        j = int(label) - self.label_origin
        if not 0 <= j < self.count:
            raise DimensionMismatchError(
                f"label {label} outside the axis labels {self.label_origin}..{self.last_label}")
        return j

    def covers(self, labels) -> bool:
        labels = np.atleast_1d(labels)
        return bool(np.all((labels >= self.label_origin) & (labels <= self.last_label)))

    def with_count(self, count: int) -> "TimeAxis":
        return TimeAxis(self.t0, self.dt, count, self.label_origin)

    def is_compatible(self, other: "TimeAxis", rtol: float = 1e-12) -> bool:
        """True when both axes map every label to the same physical time."""
        if not np.isclose(self.dt, other.dt, rtol=rtol, atol=0.0):
            return False
        a = self.t0 - self.label_origin * self.dt
        b = other.t0 - other.label_origin * other.dt
        return bool(np.isclose(a, b, rtol=rtol, atol=rtol * max(abs(self.dt), 1.0)))


@dataclass(frozen=True, eq=False)
class SnapshotMatrix:
    """The m x N snapshots of one parameter; column j is label ``origin + j``."""

    parameter: ParameterPoint
    values: np.ndarray

    def __post_init__(self):
        param = tuple(float(c) for c in np.atleast_1d(np.asarray(self.parameter, dtype=float)))
        if not param:
            raise ValidationError("parameter point needs at least one coordinate")
        values = np.array(self.values, dtype=np.complex128, order="C", copy=True)
        if values.ndim != 2:
            raise DimensionMismatchError(f"snapshot matrix must be 2-D, got shape {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "parameter", param)
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SnapshotMatrix):
            return NotImplemented
        return (self.parameter == other.parameter
                and self.values.shape == other.values.shape
                and self.values.tobytes() == other.values.tobytes())

    __hash__ = None


@dataclass(frozen=True)
class ParametricSnapshotSet:
    """Training tensor: ``p`` snapshot matrices sharing one time axis.

    Construction only checks structure; use :func:`validate_set` for the
    full invariant list.
    """

    time_axis: TimeAxis
    members: tuple
    field_name: str = ""

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValidationError("a snapshot set needs at least one member")
        for mem in members:
            if not isinstance(mem, SnapshotMatrix):
                raise TypeError(f"members must be SnapshotMatrix, got {type(mem).__name__}")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_arrays(cls, time_axis, parameters, matrices, field_name="") -> "ParametricSnapshotSet":
        params = list(parameters)
        mats = list(matrices)
        if len(params) != len(mats):
            raise DimensionMismatchError(f"{len(params)} parameters but {len(mats)} matrices")
        return cls(time_axis, tuple(SnapshotMatrix(pp, mm) for pp, mm in zip(params, mats)), field_name)

    @property
    def p(self) -> int:
        return len(self.members)

    @property
    def m(self) -> int:
        return self.members[0].m

    @property
    def n_times(self) -> int:
        return self.time_axis.count

    @property
    def parameter_dim(self) -> int:
        return len(self.members[0].parameter)

    @property
    def parameters(self) -> np.ndarray:
        """p x q array of parameter coordinates, in member order."""
        return np.array([mem.parameter for mem in self.members], dtype=float)

    @property
    def is_real(self) -> bool:
        return all(not np.any(mem.values.imag) for mem in self.members)

    def subset(self, indices: Sequence[int]) -> "ParametricSnapshotSet":
        return ParametricSnapshotSet(self.time_axis, tuple(self.members[i] for i in indices),
                                     self.field_name)

    def truncated(self, count: int) -> "ParametricSnapshotSet":
        """Keep only the first ``count`` time instants."""
        if not 2 <= count <= self.n_times:
            raise DimensionMismatchError(f"cannot truncate {self.n_times} instants to {count}")
        return ParametricSnapshotSet(
            self.time_axis.with_count(count),
            tuple(SnapshotMatrix(mem.parameter, mem.values[:, :count]) for mem in self.members),
            self.field_name)

    def window(self, first: int, last: int) -> "ParametricSnapshotSet":
        """Keep labels ``first..last`` (inclusive); the new axis starts at label ``first``."""
        axis = self.time_axis
        a, b = axis.column(first), axis.column(last)
        if b - a < 1:
            raise DimensionMismatchError(f"window {first}..{last} must hold at least two labels")
        new_axis = TimeAxis(float(axis.time(first)), axis.dt, b - a + 1, int(first))
        return ParametricSnapshotSet(
            new_axis,
            tuple(SnapshotMatrix(mem.parameter, mem.values[:, a:b + 1]) for mem in self.members),
            self.field_name)

    def index_of(self, parameter) -> int:
        key = tuple(float(c) for c in np.atleast_1d(parameter))
        for i, mem in enumerate(self.members):
            if mem.parameter == key:
                return i
        raise KeyError(key)


def validate_set(snapshots: ParametricSnapshotSet) -> list[str]:
    """Return human-readable invariant violations (empty when valid)."""
    violations = []
    axis = snapshots.time_axis
    ref = snapshots.members[0]
    seen = {}
    for i, mem in enumerate(snapshots.members):
        tag = f"member {i} (parameter {mem.parameter})"
        if len(mem.parameter) != len(ref.parameter):
            violations.append(f"{tag}: parameter dimension {len(mem.parameter)} != {len(ref.parameter)}")
        if mem.m != ref.m:
            violations.append(f"{tag}: spatial dimension {mem.m} != {ref.m}")
        if mem.n_times != axis.count:
            violations.append(f"{tag}: {mem.n_times} time instants but the time axis has {axis.count}")
        bad_cols = np.flatnonzero(~np.all(np.isfinite(mem.values), axis=0))
        for j in bad_cols:
            violations.append(f"{tag}: non-finite value in column {int(j)} (label {axis.label_origin + int(j)})")
        if mem.parameter in seen:
            violations.append(f"{tag}: duplicate parameter, already used by member {seen[mem.parameter]}")
        else:
            seen[mem.parameter] = i
    return violations


def _check_valid(snapshots: ParametricSnapshotSet) -> None:
    violations = validate_set(snapshots)
    if violations:
        raise ValidationError("invalid snapshot set: " + "; ".join(violations), violations)


# -- matrix files -------------------------------------------------------------

def write_matrix(path, values: np.ndarray, dtype_code: int | None = None) -> None:
    """Write a 2-D array in the PDMD matrix layout."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise DimensionMismatchError(f"matrix must be 2-D, got shape {values.shape}")
    if dtype_code is None:
        dtype_code = DTYPE_COMPLEX128 if np.iscomplexobj(values) else DTYPE_REAL64
    if dtype_code == DTYPE_REAL64:
        if np.iscomplexobj(values) and np.any(values.imag):
            raise ValidationError("real64 encoding requested for data with nonzero imaginary part")
        payload = np.asarray(values.real if np.iscomplexobj(values) else values, dtype="<f8")
    elif dtype_code == DTYPE_COMPLEX128:
        payload = np.asarray(values, dtype="<c16")
    else:
        raise ArchiveFormatError(f"unknown dtype code {dtype_code}")
    m, n = payload.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dtype_code, m, n))
        fh.write(payload.tobytes(order="F"))


def read_matrix(path) -> np.ndarray:
    """Read a PDMD matrix file; real64 payloads come back as float64."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ArchiveFormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, code, m, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ArchiveFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ArchiveFormatError(f"{path}: unsupported version {version}")
    if code not in _NUMPY_DTYPES:
        raise ArchiveFormatError(f"{path}: unknown dtype code {code}")
    if raw[9:12] != b"\x00\x00\x00":
        raise ArchiveFormatError(f"{path}: reserved header bytes are not zero")
    dtype = _NUMPY_DTYPES[code]
    expected = m * n * dtype.itemsize
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise DimensionMismatchError(
            f"{path}: header declares {m}x{n} {_DTYPE_NAMES[code]} ({expected} bytes), "
            f"payload has {len(body)} bytes")
    arr = np.frombuffer(body, dtype=dtype).reshape((m, n), order="F")
    return np.array(arr, dtype=dtype.newbyteorder("="), order="C")


# -- archives -----------------------------------------------------------------

def write_archive(snapshots: ParametricSnapshotSet, destination, encoding: str = "complex128") -> None:
    """Write ``snapshots`` as a directory archive.

    ``encoding="real64"`` stores the compact real layout and is only allowed
    when every imaginary part is zero.
    """
    _check_valid(snapshots)
    codes = {name: code for code, name in _DTYPE_NAMES.items()}
    if encoding not in codes:
        raise ValueError(f"encoding must be one of {sorted(codes)}, got {encoding!r}")
    if encoding == "real64" and not snapshots.is_real:
        raise ValidationError("real64 encoding requested for complex-valued data")
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    axis = snapshots.time_axis
    entries = []
    for i, mem in enumerate(snapshots.members):
        name = f"member_{i:04d}.bin"
        write_matrix(dest / name, mem.values, codes[encoding])
        entries.append({"file": name, "parameter": list(mem.parameter)})
    manifest = {
        "field_name": snapshots.field_name,
        "t0": axis.t0,
        "dt": axis.dt,
        "count": axis.count,
        "label_origin": axis.label_origin,
        "parameter_dim": snapshots.parameter_dim,
        "dtype": encoding,
        "members": entries,
    }
    tmp = dest / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    os.replace(tmp, dest / MANIFEST)


def read_archive(source) -> ParametricSnapshotSet:
    src = Path(source)
    manifest_path = src / MANIFEST
    if not manifest_path.is_file():
        raise ArchiveFormatError(f"{src}: no {MANIFEST} found")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        axis = TimeAxis(manifest["t0"], manifest["dt"], manifest["count"],
                        manifest.get("label_origin", 1))
        q = int(manifest["parameter_dim"])
        entries = manifest["members"]
        field_name = str(manifest.get("field_name", ""))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise ArchiveFormatError(f"{manifest_path}: {exc}") from exc
        raise ArchiveFormatError(f"{manifest_path}: malformed manifest ({exc!r})") from exc
    declared = manifest.get("dtype")
    members = []
    for entry in entries:
        values = read_matrix(src / entry["file"])
        stored = "complex128" if np.iscomplexobj(values) else "real64"
        if declared is not None and stored != declared:
            raise ArchiveFormatError(f"{entry['file']}: payload dtype disagrees with manifest {declared!r}")
        if values.shape[1] != axis.count:
            raise DimensionMismatchError(
                f"{entry['file']}: {values.shape[1]} columns but manifest count is {axis.count}")
        if len(entry["parameter"]) != q:
            raise DimensionMismatchError(
                f"{entry['file']}: parameter {entry['parameter']} does not have dimension {q}")
        members.append(SnapshotMatrix(tuple(entry["parameter"]), values))
    if not members:
        raise ArchiveFormatError(f"{manifest_path}: no members")
    snapshots = ParametricSnapshotSet(axis, tuple(members), field_name)
    violations = validate_set(snapshots)
    if violations:
        if any("spatial dimension" in v for v in violations):
            raise DimensionMismatchError("; ".join(violations))
        raise ValidationError(f"{src}: " + "; ".join(violations), violations)
    return snapshots
