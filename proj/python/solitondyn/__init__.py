"""Semiclassical soliton dynamics: ground states, split-step evolution and epsilon sweeps."""

from ._core import (
    GroundState,
    MemberResult,
    MemberSummary,
    NonlinearityParams,
    ScenarioConfig,
    SlopeReport,
    SolitondynError,
    SpectralGrid,
    SweepResult,
    __version__,
    closed_form_mass,
    closed_form_profile,
    fit_slopes,
    load_run,
    run_scenario,
    solve_canonical_ground_state,
    system_residual,
)

__all__ = [
    "GroundState",
    "MemberResult",
    "MemberSummary",
    "NonlinearityParams",
    "ScenarioConfig",
    "SlopeReport",
    "SolitondynError",
    "SpectralGrid",
    "SweepResult",
    "__version__",
    "closed_form_mass",
    "closed_form_profile",
    "fit_slopes",
    "load_run",
    "run_scenario",
    "solve_canonical_ground_state",
    "system_residual",
]
