"""Parametric dynamic mode decomposition: POD + DMD + regression over parameter space."""

__version__ = "0.1.0"

from .dmd import DmdConfig, DmdModel, fit_dmd, fit_hodmd, forecast, spectrum_summary, stabilize
from .errors import (
    ArchiveFormatError,
    DegenerateGeometryError,
    DimensionMismatchError,
    EmptySpectrumError,
    ExtrapolationError,
    PdmdError,
    SolverDivergenceError,
    ValidationError,
)
from .parametric import (
    ErrorReport,
    ForecastRequest,
    ParametricDmdModel,
    compute_error_report,
    fit_monolithic,
    fit_partitioned,
    forecast_full,
    forecast_reduced,
    predict_reduced,
)
from .pod import PodBasis, assemble_global_matrix, fit_pod, lift, project, rank_for_energy
from .snapshots import (
    ParametricSnapshotSet,
    SnapshotMatrix,
    TimeAxis,
    read_archive,
    validate_set,
    write_archive,
)
