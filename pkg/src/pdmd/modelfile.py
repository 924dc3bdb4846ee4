"""Directory layout for trained parametric models.

``model.json`` holds the metadata and small arrays (eigenvalues and
amplitudes as ``[re, im]`` pairs); POD modes, singular values and each
operator's modes and training snapshots are matrix files in the archive
layout of :mod:`pdmd.snapshots`.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .dmd import DmdConfig, DmdModel
from .errors import ArchiveFormatError
from .parametric import ParametricDmdModel
from .pod import PodBasis
from .snapshots import TimeAxis, read_matrix, write_matrix

MODEL_MANIFEST = "model.json"
MODEL_FORMAT_VERSION = 1


def _pairs(values) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(values, dtype=complex)]


def _unpairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def _write_values(path: Path, values: np.ndarray, real: bool) -> None:
    write_matrix(path, values.real if real and not np.any(values.imag) else values)


def save_model(model: ParametricDmdModel, destination) -> None:
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    write_matrix(dest / "pod_modes.bin", model.pod.modes)
    write_matrix(dest / "pod_singular_values.bin", model.pod.singular_values[:, None])
    operators = []
    for i, op in enumerate(model.operators):
        modes_file, snaps_file = f"operator_{i:04d}_modes.bin", f"operator_{i:04d}_snapshots.bin"
        write_matrix(dest / modes_file, op.modes)
        _write_values(dest / snaps_file, op.snapshots, model.real_data)
        operators.append({
            "modes": modes_file,
            "snapshots": snaps_file,
            "eigenvalues": _pairs(op.eigenvalues),
            "amplitudes": _pairs(op.amplitudes),
            "d": op.d,
            "label_origin": op.label_origin,
            "residual": op.residual,
            "svd_rank": op.svd_rank,
            "amplitude_strategy": op.amplitude_strategy,
            "notes": list(op.notes),
            "stabilization_record": [[lam.real, lam.imag, disp] for lam, disp in op.stabilization_record],
        })
    axis = model.time_axis
    manifest = {
        "format_version": MODEL_FORMAT_VERSION,
        "variant": model.variant,
        "n": model.n,
        "dmd_config": model.dmd_config.to_dict(),
        "parameters": model.parameters.tolist(),
        "time_axis": {"t0": axis.t0, "dt": axis.dt, "count": axis.count, "label_origin": axis.label_origin},
        "online_defaults": model.online_defaults,
        "real_data": model.real_data,
        "field_name": model.field_name,
        "pod": {"n": model.n, "modes": "pod_modes.bin", "singular_values": "pod_singular_values.bin"},
        "operators": operators,
    }
    tmp = dest / (MODEL_MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    os.replace(tmp, dest / MODEL_MANIFEST)


def is_model_dir(path) -> bool:
    return (Path(path) / MODEL_MANIFEST).is_file()


def load_model(source) -> ParametricDmdModel:
    src = Path(source)
    path = src / MODEL_MANIFEST
    if not path.is_file():
        raise ArchiveFormatError(f"{src}: no {MODEL_MANIFEST} found")
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
        version = meta["format_version"]
        if version != MODEL_FORMAT_VERSION:
            raise ArchiveFormatError(f"{path}: unsupported model format version {version}")
        pod = PodBasis(read_matrix(src / meta["pod"]["modes"]),
                       read_matrix(src / meta["pod"]["singular_values"])[:, 0])
        operators = []
        for entry in meta["operators"]:
            operators.append(DmdModel(
                modes=read_matrix(src / entry["modes"]),
                eigenvalues=_unpairs(entry["eigenvalues"]),
                amplitudes=_unpairs(entry["amplitudes"]),
                d=int(entry["d"]),
                label_origin=int(entry["label_origin"]),
                stabilization_record=tuple((complex(re, im), str(disp))
                                           for re, im, disp in entry["stabilization_record"]),
                snapshots=read_matrix(src / entry["snapshots"]),
                residual=float(entry["residual"]),
                svd_rank=int(entry["svd_rank"]),
                amplitude_strategy=entry["amplitude_strategy"],
                notes=tuple(entry.get("notes", ())),
            ))
        ta = meta["time_axis"]
        return ParametricDmdModel(
            variant=meta["variant"],
            pod=pod,
            operators=tuple(operators),
            parameters=np.asarray(meta["parameters"], dtype=float),
            time_axis=TimeAxis(ta["t0"], ta["dt"], ta["count"], ta["label_origin"]),
            dmd_config=DmdConfig.from_dict(meta["dmd_config"]),
            online_defaults=meta.get("online_defaults", {"regressor": "linear"}),
            real_data=bool(meta.get("real_data", False)),
            field_name=str(meta.get("field_name", "")),
        )
    except ArchiveFormatError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ArchiveFormatError(f"{path}: malformed model ({exc})") from exc
