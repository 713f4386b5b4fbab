"""Spherical-wave link analysis.

De-embed antennas from propagation channels via spherical wave function
(SWF) coefficient vectors, assemble and convert mode-to-mode channel
matrices, and compute the excitations that maximize link transmission
across weighted scenario ensembles.
"""

from .decompose import (
    BoxGeometry,
    CoefficientRole,
    CoefficientVector,
    FieldSurface,
    SphereGeometry,
    convergence_metric,
    convergence_table,
    extract_coefficients,
    shell_norms,
    surface_inner_product,
)
from .ensemble import (
    DEFAULT_THRESHOLD_DB,
    LinkCell,
    LinkReport,
    LinkSample,
    MeasurementStats,
    ScenarioEnsemble,
    ScenarioEntry,
    apply_calibration,
    calibration_factor,
    evaluate_ensemble,
    kpi,
    kpi_from_cells,
    measurement_stats,
)
from .errors import (
    CancellationCollapseError,
    CavityResonanceError,
    DimensionMismatchError,
    EmptyEnsembleError,
    IncompleteShellError,
    InconsistentFrequencyError,
    InconsistentGridsError,
    MissingColumnError,
    OpenSurfaceError,
    OriginSingularityError,
    OverlappingSpheresError,
    ParseError,
    SingularityError,
    SingularLoopError,
    SingularResponseError,
    SwlinkError,
    UndersampledSurfaceError,
    ValidationError,
    ZeroChannelError,
    ZeroMeasurementError,
    ZeroNormError,
    ZeroPowerError,
)
from .modes import (
    FarFieldPattern,
    Medium,
    ModeIndex,
    WaveKind,
    evaluate_swf,
    far_field_pattern,
    max_degree,
    mode_basis,
    mode_count,
    mode_fields,
    mode_range,
)
from .network import (
    RECIPROCITY_CONSTANT,
    ChannelKind,
    ChannelMatrix,
    accepted_power_in_channel,
    convert_channel,
    link,
    receive_vector_from_transmit,
    reflection_matrix_from_responses,
    transmit_vector,
)
from .optimize import (
    SUBSPACES,
    DipoleWeights,
    OptimalExcitation,
    dipole_weights,
    global_optimum,
    optimal_excitation,
    optimal_transmit_vector,
    subspace_columns,
    subspace_summary,
)
from .synth import (
    cavity_response_surfaces,
    dipole_coefficients,
    free_space_channel,
    mode_response_surfaces,
    pec_cavity_reflection,
    scenario_catalog,
    surface_from_coefficients,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # modes
    "FarFieldPattern",
    "Medium",
    "ModeIndex",
    "WaveKind",
    "evaluate_swf",
    "far_field_pattern",
    "max_degree",
    "mode_basis",
    "mode_count",
    "mode_fields",
    "mode_range",
    # decompose
    "BoxGeometry",
    "CoefficientRole",
    "CoefficientVector",
    "FieldSurface",
    "SphereGeometry",
    "convergence_metric",
    "convergence_table",
    "extract_coefficients",
    "shell_norms",
    "surface_inner_product",
    # network
    "RECIPROCITY_CONSTANT",
    "ChannelKind",
    "ChannelMatrix",
    "accepted_power_in_channel",
    "convert_channel",
    "link",
    "receive_vector_from_transmit",
    "reflection_matrix_from_responses",
    "transmit_vector",
    # optimize
    "SUBSPACES",
    "DipoleWeights",
    "OptimalExcitation",
    "dipole_weights",
    "global_optimum",
    "optimal_excitation",
    "optimal_transmit_vector",
    "subspace_columns",
    "subspace_summary",
    # synth
    "cavity_response_surfaces",
    "dipole_coefficients",
    "free_space_channel",
    "mode_response_surfaces",
    "pec_cavity_reflection",
    "scenario_catalog",
    "surface_from_coefficients",
    # ensemble
    "DEFAULT_THRESHOLD_DB",
    "LinkCell",
    "LinkReport",
    "LinkSample",
    "MeasurementStats",
    "ScenarioEnsemble",
    "ScenarioEntry",
    "apply_calibration",
    "calibration_factor",
    "evaluate_ensemble",
    "kpi",
    "kpi_from_cells",
    "measurement_stats",
    # errors
    "SwlinkError",
    "ValidationError",
    "SingularityError",
    "CancellationCollapseError",
    "CavityResonanceError",
    "DimensionMismatchError",
    "EmptyEnsembleError",
    "IncompleteShellError",
    "InconsistentFrequencyError",
    "InconsistentGridsError",
    "MissingColumnError",
    "OpenSurfaceError",
    "OriginSingularityError",
    "OverlappingSpheresError",
    "ParseError",
    "SingularLoopError",
    "SingularResponseError",
    "UndersampledSurfaceError",
    "ZeroChannelError",
    "ZeroMeasurementError",
    "ZeroNormError",
    "ZeroPowerError",
]
