# Package marker for runner
from .closed_loop import (
    CycleDiagnostics,
    CycleOutcome,
    CycleSchedule,
    TrialResult,
    WorldState,
    run_cycle,
    run_trial,
    run_trials,
    schedule_eps,
    trial_seeds,
)
from .summary import summarize_trials, time_averaged_distance

__all__ = [
    "CycleDiagnostics",
    "CycleOutcome",
    "CycleSchedule",
    "TrialResult",
    "WorldState",
    "run_cycle",
    "run_trial",
    "run_trials",
    "schedule_eps",
    "summarize_trials",
    "time_averaged_distance",
    "trial_seeds",
]
