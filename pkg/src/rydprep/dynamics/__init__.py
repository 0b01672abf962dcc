from .lindblad import (
    LindbladModel,
    MultiplicityWarning,
    SteadyStateResult,
    evolve_master,
    lindblad_rhs,
    liouvillian_matrix,
    steady_state_direct,
    unvec,
    vec,
)
from .mcwf import TrajectoryRecord, mcwf_run, steady_state_mcwf, trajectory_seeds

__all__ = [
    "LindbladModel", "MultiplicityWarning", "SteadyStateResult", "TrajectoryRecord",
    "evolve_master", "lindblad_rhs", "liouvillian_matrix", "mcwf_run", "steady_state_direct",
    "steady_state_mcwf", "trajectory_seeds", "unvec", "vec",
]
