"""Differentially private optimistic value iteration for tabular episodic MDPs."""
from .counts import CountTables
from .harness import ArmSpec, ExperimentSpec, run_experiment
from .mdp import TabularMdp, build_riverswim, exact_value_iteration, load_mdp, policy_evaluation, sample_episode
from .planner import RegretRecord, RunConfig, dp_ucbvi_run, ucbvi_hoeffding_baseline
from .privatizers import PrivateCounts, PrivatizerConfig, make_privatizer
from .projection import ProjectionProblem, finalize_counts, project

__all__ = [
    "ArmSpec", "CountTables", "ExperimentSpec", "PrivateCounts", "PrivatizerConfig", "ProjectionProblem",
    "RegretRecord", "RunConfig", "TabularMdp", "build_riverswim", "dp_ucbvi_run", "exact_value_iteration",
    "finalize_counts", "load_mdp", "make_privatizer", "policy_evaluation", "project", "run_experiment",
    "sample_episode", "ucbvi_hoeffding_baseline",
]
