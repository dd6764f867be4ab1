import itertools
import json
import logging

from beliefddp.classes.Baselines import make_plan
from beliefddp.classes.CustomExceptions import ConfigurationError
from beliefddp.classes.DataHandlers import config_hash
from beliefddp.classes.Executions import ExecutionConfig, run_batch, welch_t
from beliefddp.classes.Scenarios import SCENARIOS, build_scenario
from beliefddp.classes.Solvers import SolverConfig

logger = logging.getLogger(__name__)

EPISODE_COLUMNS = ("seed", "planner", "true_z", "cumulative_cost", "replans", "converged")
SWEEP_COLUMNS = ("sigma_level", "planner", "n", "mean", "stderr", "config_hash")
# observation uncertainty levels 0.1, 1.1, ..., 12.1
SIGMA_SWEEP = tuple(round(0.1 + i, 1) for i in range(13))


class ExperimentReporter:
    """Runs solves and benchmarks for one experiment and writes their result files."""

    def __init__(self, config_loader, filehandler):
        self._config_loader = config_loader
        self._filehandler = filehandler

    @property
    def experiment(self):
        return self._config_loader.experiment

    def _header(self):
        return {"config_hash": self._config_loader.config_hash(), "parameters": self._config_loader.resolved()}

    def _comments(self):
        header = self._header()
        return [f"config_hash: {header['config_hash']}", f"parameters: {_compact(header['parameters'])}"]

    def _sweep_comments(self, sigma_levels):
        """Header of the sweep table: the parameters shared by every level; rows carry their own hash."""
        shared = self._config_loader.resolved()
        shared["scenario"].pop("sigma_level", None)
        return [f"sweep_hash: {config_hash(shared)}", f"sigma_levels: {_compact([float(s) for s in sigma_levels])}",
                f"parameters: {_compact(shared)}"]

    def _build(self):
        _, model, x0, prior = build_scenario(self.experiment, self._config_loader.get_scenario())
        solver_config = SolverConfig.from_dict(self._config_loader.get_solver())
        return model, x0, prior, solver_config

    def set_prior(self, probability):
        """Prior probability of the first latent value (Left, Smooth or Nice)."""
        key = SCENARIOS[self.experiment][0].PRIOR_KEY
        self._config_loader.set_value(f"scenario.{key}", float(probability))

    def solve(self, planner):
        """
        Plan once from the scenario's initial condition.
        :type planner: PlannerKind
        :return: (Plan, list of written file paths)
        """
        model, x0, prior, solver_config = self._build()
        plan = make_plan(planner, model, x0, prior, solver_config)
        result = plan.result
        self._filehandler.create_folder()
        stem = f"{self.experiment}_{planner.value}"
        header = self._header()
        header["converged"] = result.converged
        header["cost"] = result.cost
        paths = [
            self._filehandler.save_tree(result.tree, f"{stem}_tree.json", header),
            self._filehandler.write_json_lines([record.to_dict() for record in result.log],
                                               f"{stem}_iterations.jsonl", self._header()),
        ]
        logger.info("%s solve on %s: cost %.6g after %d iterations (converged: %s)", planner.value,
                    self.experiment, result.cost, len(result.log), result.converged)
        return plan, paths

    def benchmark(self, planners, sigma_levels=None, record_traces=False):
        """
        Batches for every planner on shared seeds, followed by pairwise Welch tests.
        With sigma_levels (T-maze only) the whole benchmark repeats per level and a
        sweep table collects the per-level summaries.
        :return: (summary rows, comparison rows, list of written file paths)
        """
        if sigma_levels and self.experiment != "tmaze":
            raise ConfigurationError("the observation-uncertainty sweep only exists for the tmaze experiment")
        self._filehandler.create_folder()
        original_level = self._config_loader.get_scenario().get("sigma_level")
        all_summaries, all_comparisons, paths = [], [], []
        for level in sigma_levels or (None,):
            suffix = ""
            if level is not None:
                self._config_loader.set_value("scenario.sigma_level", float(level))
                suffix = f"_sigma{level:g}"
            summaries, comparisons, written = self._benchmark_level(planners, suffix, record_traces)
            for row in summaries + comparisons:
                if level is not None:
                    row["sigma_level"] = float(level)
            all_summaries.extend(summaries)
            all_comparisons.extend(comparisons)
            paths.extend(written)
        if sigma_levels:
            paths.append(self._filehandler.write_csv(all_summaries, f"{self.experiment}_sigma_sweep.csv",
                                                     SWEEP_COLUMNS, self._sweep_comments(sigma_levels)))
            if original_level is not None:
                self._config_loader.set_value("scenario.sigma_level", original_level)
        return all_summaries, all_comparisons, paths

    def _benchmark_level(self, planners, suffix, record_traces):
        model, x0, prior, solver_config = self._build()
        execution = ExecutionConfig.from_dict(self._config_loader.get_execution())
        header = self._header()
        stats, rows, traces = {}, [], []
        for planner in planners:
            batch, episode_traces = run_batch(planner, model, x0, prior, solver_config, execution)
            stats[planner.value] = batch
            rows.extend(trace.row() for trace in episode_traces)
            traces.extend(trace.to_dict() for trace in episode_traces)

        summaries = [stats[planner.value].summary(header["config_hash"]) for planner in planners]
        comparisons = []
        for first, second in itertools.combinations([p.value for p in planners], 2):
            if stats[first].n < 2:
                logger.warning("skipping %s vs %s: a comparison needs at least two episodes", first, second)
                continue
            t_stat, p_value = welch_t(stats[first].costs, stats[second].costs)
            comparisons.append({"a": first, "b": second, "t": t_stat, "p": p_value,
                                "mean_difference": stats[first].mean - stats[second].mean})
            logger.info("%s vs %s: t = %.3f, p = %.3g", first, second, t_stat, p_value)

        stem = f"{self.experiment}{suffix}"
        paths = [
            self._filehandler.write_csv(rows, f"{stem}_episodes.csv", EPISODE_COLUMNS, self._comments()),
            self._filehandler.write_json(dict(header, summaries=summaries), f"{stem}_summary.json"),
            self._filehandler.write_json(dict(header, comparisons=comparisons), f"{stem}_comparisons.json"),
        ]
        if record_traces or execution.record_traces:
            paths.append(self._filehandler.write_json(dict(header, episodes=traces), f"{stem}_traces.json"))
        return summaries, comparisons, paths


def _compact(params):
    return json.dumps(params, sort_keys=True, separators=(",", ":"))
