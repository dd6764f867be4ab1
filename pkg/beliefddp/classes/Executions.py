"""
Closed-loop Monte-Carlo evaluation of the planners.

Every episode derives three independent generators from its seed: one for the
ground-truth latent value, one for process noise and one for observation
noise. The planner in use never draws from them, so different planners see
the same world on the same seed.
"""
import logging
import multiprocessing as mp
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import ttest_ind

from .Baselines import PlannerKind, make_plan
from .Beliefs import bayes_update, validate_belief
from .CustomExceptions import ConfigurationError, InvalidArgumentError

logger = logging.getLogger(__name__)

GROUND_TRUTH, PROCESS_NOISE, OBSERVATION_NOISE = range(3)

# episode job inherited by forked workers; models hold closures and do not pickle
_batch_job = None


def episode_generators(seed):
    """Independent generators (ground truth, process noise, observation noise) for one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def sample_latent(prior, seed):
    rng = episode_generators(seed)[GROUND_TRUTH]
    prior = validate_belief(prior)
    return int(rng.choice(len(prior), p=prior))


@dataclass(frozen=True)
class ExecutionConfig:
    episodes: int = 100
    base_seed: int = 0
    workers: int = 1
    record_traces: bool = False

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigurationError(f"need at least one episode, got {self.episodes}")
        if self.workers < 1:
            raise ConfigurationError(f"need at least one worker, got {self.workers}")

    @classmethod
    def from_dict(cls, params):
        unknown = set(params) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown execution parameters: {sorted(unknown)}")
        return cls(**params)


@dataclass(frozen=True)
class StepRecord:
    step: int
    x: tuple
    u: tuple
    cost: float
    observation: Optional[tuple]
    belief: tuple

    def to_dict(self):
        return {"step": self.step, "x": list(self.x), "u": list(self.u), "cost": self.cost,
                "observation": None if self.observation is None else list(self.observation),
                "belief": list(self.belief)}


@dataclass(eq=False)
class EpisodeTrace:
    seed: int
    planner: PlannerKind
    true_z: int
    true_label: str
    steps: list = field(default_factory=list)
    final_cost: float = 0.0
    cumulative_cost: float = 0.0
    replans: int = 0
    converged: bool = True

    def row(self):
        """Per-episode CSV row."""
        return {"seed": self.seed, "planner": self.planner.value, "true_z": self.true_label,
                "cumulative_cost": self.cumulative_cost, "replans": self.replans,
                "converged": self.converged}

    def to_dict(self):
        data = self.row()
        data["final_cost"] = self.final_cost
        data["steps"] = [s.to_dict() for s in self.steps]
        return data


@dataclass(frozen=True)
class BatchStats:
    planner: str
    n: int
    mean: float
    stderr: float
    costs: tuple
    stderr_defined: bool = True

    @classmethod
    def from_costs(cls, planner, costs):
        costs = np.asarray(costs, dtype=float)
        if costs.size < 1:
            raise InvalidArgumentError("batch statistics need at least one episode")
        if costs.size == 1:
            return cls(planner, 1, float(costs[0]), 0.0, tuple(costs.tolist()), stderr_defined=False)
        stderr = float(np.std(costs, ddof=1) / np.sqrt(costs.size))
        return cls(planner, int(costs.size), float(np.mean(costs)), stderr, tuple(costs.tolist()))

    def summary(self, config_hash=None):
        data = {"planner": self.planner, "n": self.n, "mean": self.mean, "stderr": self.stderr,
                "stderr_defined": self.stderr_defined}
        if config_hash is not None:
            data["config_hash"] = config_hash
        return data


def _sample(rng, mean, cov):
    return rng.multivariate_normal(np.asarray(mean, dtype=float), np.atleast_2d(cov), method='eigh')


def execute_episode(planner, model, x0, b0, true_z, seed, config):
    """
    Run one closed-loop episode.

    The planner solves from the current (x, b); the first segment of its plan is
    executed with feedback on the realized state and clamped to the control
    bounds. At the end of every segment but the last an observation is sampled
    from the true latent value, the belief is updated and the planner replans
    over the remaining segments.
    :type planner: PlannerKind
    :type config: SolverConfig
    :rtype: EpisodeTrace
    """
    if not 0 <= true_z < model.num_latents:
        raise InvalidArgumentError(f"true latent index {true_z} outside 0..{model.num_latents - 1}")
    generators = episode_generators(seed)
    process_rng, observation_rng = generators[PROCESS_NOISE], generators[OBSERVATION_NOISE]
    trace = EpisodeTrace(seed=seed, planner=planner, true_z=true_z, true_label=model.latents.labels[true_z])
    schedule = config.schedule()
    x = np.array(x0, dtype=float)
    belief = validate_belief(b0)
    step = 0

    for segment in range(config.segments):
        plan = make_plan(planner, model, x, belief, config.remaining(segment))
        trace.replans += 1
        if not plan.result.converged:
            trace.converged = False
        tree = plan.result.tree
        controls, nominal = tree.controls[()], tree.states[()]
        length = schedule[segment + 1] - schedule[segment]
        for t in range(length):
            u = controls[t]
            if ((), t) in tree.gains_feedback:
                u = u + tree.gains_feedback[((), t)] @ plan.deviation(x, nominal[t])
            u = model.clip_control(u)
            cost = float(model.running_cost(x, u, true_z))
            x_prev = x
            x = _sample(process_rng, model.dynamics_mean(x, u, true_z), model.dynamics_noise[true_z])
            observation = None
            if t == length - 1 and segment < config.segments - 1:
                observation = _sample(observation_rng, model.observation_mean(x, true_z),
                                      model.observation_noise(x, true_z))
                belief = bayes_update(observation, x, u, x_prev, belief, model)
            trace.steps.append(StepRecord(
                step=step, x=tuple(x_prev.tolist()), u=tuple(u.tolist()), cost=cost,
                observation=None if observation is None else tuple(observation.tolist()),
                belief=tuple(belief.tolist())))
            trace.cumulative_cost += cost
            step += 1

    trace.final_cost = float(model.final_cost(x, true_z))
    trace.cumulative_cost += trace.final_cost
    if not trace.converged:
        logger.warning("episode %d (%s): executed a plan that did not converge", seed, planner.value)
    return trace


def run_batch(planner, model, x0, prior, config, execution):
    """
    Episodes on seeds base_seed .. base_seed + n - 1 with the latent value drawn from prior.
    Results are returned in seed order whatever the number of workers.
    :type execution: ExecutionConfig
    :return: (BatchStats, list of EpisodeTrace)
    """
    prior = validate_belief(prior)
    seeds = range(execution.base_seed, execution.base_seed + execution.episodes)

    def run(seed):
        return execute_episode(planner, model, x0, prior, sample_latent(prior, seed), seed, config)

    logger.info("running %d %s episodes on %s with %d worker(s)", execution.episodes, planner.value,
                model.name, execution.workers)
    if execution.workers > 1:
        traces = _parallel(run, seeds, execution.workers)
    else:
        traces = [run(seed) for seed in seeds]
    stats = BatchStats.from_costs(planner.value, [trace.cumulative_cost for trace in traces])
    logger.info("%s on %s: mean %.4f (stderr %.4f)", planner.value, model.name, stats.mean, stats.stderr)
    return stats, traces


def _run_job(seed):
    return _batch_job(seed)


def _parallel(run, seeds, workers):
    """
    Episodes in forked worker processes, in seed order. Platforms without fork
    run them on a thread pool instead.
    """
    global _batch_job
    if "fork" not in mp.get_all_start_methods():
        logger.warning("fork is unavailable, running episodes on %d threads", workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, seeds))
    _batch_job = run
    try:
        with mp.get_context("fork").Pool(workers) as pool:
            return pool.map(_run_job, seeds)
    finally:
        _batch_job = None


def welch_t(a, b):
    """
    Welch's unequal-variance two-sample t-test, two-sided.
    :raises InvalidArgumentError: if a sample has fewer than two values
    :return: (t statistic, p value)
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise InvalidArgumentError("welch_t needs at least two values per sample")
    if np.var(a) == 0.0 and np.var(b) == 0.0:
        if np.mean(a) == np.mean(b):
            return 0.0, 1.0
        return float(np.sign(np.mean(a) - np.mean(b)) * np.inf), 0.0
    result = ttest_ind(a, b, equal_var=False)
    return float(result.statistic), float(result.pvalue)
