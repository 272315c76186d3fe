"""Scheduling Earth-observation satellite constellations shared by exclusive
users and a central planner, with centralized and distributed solvers."""

from .auctions import solve_cbba, solve_psi, solve_ssi
from .dcop import DcopProblem, solve_dpop, solve_exhaustive
from .estimators import (
    ALGORITHMS,
    CbbaScheduler,
    ExactScheduler,
    GreedyScheduler,
    PsiScheduler,
    SdcopScheduler,
    SsiScheduler,
    make_scheduler,
)
from .exact import build_milp, export_lp, solve_exact
from .generate import conflicting_preset, generate, realistic_preset, sample_scenario
from .greedy import solve_greedy
from .model import (
    Instance,
    Schedule,
    load_instance,
    load_schedule,
    save_instance,
    save_schedule,
    total_reward,
    validate_schedule,
)
from .sdcop import solve_sdcop

__all__ = [
    "ALGORITHMS", "CbbaScheduler", "DcopProblem", "ExactScheduler", "GreedyScheduler",
    "Instance", "PsiScheduler", "Schedule", "SdcopScheduler", "SsiScheduler", "build_milp",
    "conflicting_preset", "export_lp", "generate", "load_instance", "load_schedule",
    "make_scheduler", "realistic_preset", "sample_scenario", "save_instance", "save_schedule",
    "solve_cbba", "solve_dpop", "solve_exact", "solve_exhaustive", "solve_greedy", "solve_psi",
    "solve_sdcop", "solve_ssi", "total_reward", "validate_schedule",
]
