"""Distributionally robust path integral control.

Monte Carlo path-integral controllers robustified against an unknown
disturbance drift through a KL ambiguity set, with online drift
estimation, finite-sample radius calculators, analytic linear-quadratic
oracles, and a reproducible navigation benchmark harness.
"""

from .controller import EpisodeRecord, drpi_step, run_episode
from .costs import CostModel, Rect, control_cost, navigation_cost, quadratic_cost, state_cost, trajectory_cost
from .harness import ExperimentConfig, SchemeSummary, default_config, load_config, run_experiment, summarize
from .models import DynamicsModel, em_step, make_model
from .oracles import RiskBreakdown, ScalarLQProblem, free_energy_quadrature, leqg_gains_and_value, lqr_gains, lqr_value
from .rollout import RolloutBatch, SeedSpec, rollout_uncontrolled, sample_disturbances
from .solver import (SearchConfig, SingularProjection, SingularTheta, NoLinearizingTheta, ThetaSolution,
                     control_from_weights, effective_temperature, free_energy, master_objective,
                     path_integral_weights, solve_master, theta_star)
from .uncertainty import (DriftEstimate, RobustnessConfig, coverage_lower_bound, estimate_drift_batch,
                          gamma_for_confidence, gamma_schedule, kl_drifted_brownian, update_drift_online,
                          zero_drift)

__version__ = "0.1.0"
