"""Grouped max-quantile infinite-arm bandit identification.

Simulation library for the problem of finding, among several groups each
holding an effectively infinite pool of arms, the group whose reservoir
distribution of arm means has the highest (1-alpha)-quantile.  Ships the
two-step and multi-step identification algorithms, the finite-arm
successive-elimination subroutine with anytime confidence bounds, exact
oracles and gap calculators, pull-count bound evaluators, worst-case hard
instances with a numerical verifier, and a deterministic Monte Carlo harness.
"""

from .confidence import PullStats, bounds, confidence_width, invert_width
from .elimination import (ArmLedger, EliminationResult, EliminationRun, EliminationState,
                          FiniteGroup, GapProfile, bound_pulls_finite, gap_profile,
                          multiset_quantile, run_elimination)
from .grouped import (Partition, ReservoirGapBounds, RunParams, TrialResult,
                      build_partition, epochs_until_elimination, pull_bound_grouped,
                      pull_bound_multistep, pull_bound_worst_case, quantile_sandwiched,
                      required_arm_count, reservoir_gap_bounds, run_multistep, run_two_step)
from .hardness import (DriftReport, HardInstanceParams, ScoreState, conditional_good_prob,
                       expected_next_likelihood_ratio, likelihood_ratio,
                       make_worst_case_instances, success_scale, verify_drift)
from .harness import (AggregateReport, ExperimentConfig, config_from_dict, config_from_file,
                      mix_seed, run_experiment, run_trial)
from .instances import (ArmIdentity, BanditInstance, DiscreteReservoir,
                        PiecewiseLinearReservoir, Reservoir, RewardEnv, RewardFamily,
                        instance_from_dict, instance_to_dict, relaxed_success_set,
                        reservoir_quantile, sample_arm, sample_arms, sample_reward)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
