"""Optimal covariance steering with multiplicative noise."""

from ._covsteer import (
    BoundaryData,
    CovsteerError,
    MatrixPoly,
    NoiseComponent,
    NoiseKind,
    NoiseModel,
    RunConfig,
    SteeringSolution,
    SystemSpec,
    classify,
    derive_intensities,
    emit_config,
    jacobian_f,
    load_config,
    map_f,
    parse_config,
    run_command,
    same_config,
    simulate,
    solve_boundary,
    solve_closed_form,
    special_case_pi0,
    transition_blocks,
    validate_system,
)

__all__ = [name for name in dir() if not name.startswith("_")]
