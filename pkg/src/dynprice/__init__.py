"""Likelihood-ratio dynamic pricing policies with bounded regret under finite demand uncertainty."""

from .bounds import BoundReport, elrt_bound, lrt_bound, xlrt_bound
from .demand import DemandModel, Scenario, eval_model, optimal_price, revenue, validate_scenario
from .info import chernoff_bernoulli, chernoff_harmonic_approx, exploration_price, kl_bernoulli
from .optimize import GridConfig
from .policies import PolicyKnowledge, PolicySpec, Thresholds, default_thresholds, policy_init
from .sim import EpisodeResult, ExperimentResult, regret_trajectory, run_episode, run_monte_carlo

__version__ = "0.1.0"
