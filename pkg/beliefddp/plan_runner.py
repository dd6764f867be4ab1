import argparse
import logging
import os
import sys
from argparse import RawTextHelpFormatter

from beliefddp.classes.Baselines import PlannerKind
from beliefddp.classes.CustomExceptions import BeliefDDPError
from beliefddp.classes.DataHandlers import Filehandler, ScenarioConfigLoader
from beliefddp.classes.Reporters import SIGMA_SWEEP, ExperimentReporter

logger = logging.getLogger("beliefddp")

CONFIG_ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config")
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def _add_common_arguments(parser):
    parser.add_argument('-e', '--experiment', help="tmaze, terrain or lanechange", required=True, metavar="")
    parser.add_argument('-c', '--config', help="experiment YAML file (default: the shipped config of the experiment)", metavar="")
    parser.add_argument('-o', '--out', help="output directory (default: $BELIEFDDP_OUT or the working directory)", metavar="")
    parser.add_argument('--segments', help="number of branching segments k", type=int, metavar="")
    parser.add_argument('--horizon', help="planning horizon T in steps", type=int, metavar="")
    parser.add_argument('--sigma-level', help="T-maze observation uncertainty level", dest='sigma_level', type=float, metavar="")
    parser.add_argument('--prior', help="prior probability of the first latent value\n\t(Left, Smooth or Nice)", type=float, metavar="")
    parser.add_argument('--set', help="override a config value, e.g. --set solver.max_iterations=50", dest='overrides', action='append', default=[], metavar="")
    parser.add_argument('-v', '--verbose', help="log solver iterations", action='store_true')


def options(argv=None):
    main_parser = argparse.ArgumentParser(prog="plan_runner", formatter_class=RawTextHelpFormatter)
    subcommands = main_parser.add_subparsers(title='subcommands', dest='command', description='valid subcommands:', help='\nuse "python plan_runner.py {subcommand} --help"\n\nfor details on the usage of the subcommands\n   ')
    subcommands.required = True

    solve_parser = subcommands.add_parser('solve', help='solve once from the initial condition and write the trajectory tree', formatter_class=RawTextHelpFormatter)
    _add_common_arguments(solve_parser)
    solve_parser.add_argument('-p', '--planner', help="poddp, mlddp or pwddp", default="poddp", metavar="")
    solve_parser.usage = "python plan_runner.py solve [-h] -e [-c] [-o] [--segments] [--horizon] [--sigma-level] [--prior] [--set] [-v] [-p]"

    benchmark_parser = subcommands.add_parser('benchmark', help='run closed-loop batches and compare planners', formatter_class=RawTextHelpFormatter)
    _add_common_arguments(benchmark_parser)
    benchmark_parser.add_argument('-p', '--planners', help="comma separated planners", default="poddp,mlddp,pwddp", metavar="")
    benchmark_parser.add_argument('-n', '--n', help="episodes per planner", dest='episodes', type=int, metavar="")
    benchmark_parser.add_argument('-s', '--seed', help="base seed; episodes use seed .. seed + n - 1", type=int, metavar="")
    benchmark_parser.add_argument('-w', '--workers', help="worker processes", type=int, metavar="")
    benchmark_parser.add_argument('--sigma-sweep', help="repeat for the thirteen T-maze uncertainty levels", dest='sigma_sweep', action='store_true')
    benchmark_parser.add_argument('--traces', help="also write per-episode trajectory traces", action='store_true')
    benchmark_parser.usage = "python plan_runner.py benchmark [-h] -e [-c] [-o] [--segments] [--horizon] [--sigma-level] [--prior] [--set] [-v] [-p] [-n] [-s] [-w] [--sigma-sweep] [--traces]"

    return main_parser.parse_args(argv)


def _configure(args):
    conf = ScenarioConfigLoader(config_root=CONFIG_ROOT, project_root=".", experiment=args.experiment,
                                config_file=args.config)
    conf.apply_overrides(args.overrides)
    flag_values = {
        "solver.segments": args.segments,
        "solver.horizon": args.horizon,
        "scenario.sigma_level": args.sigma_level,
        "execution.episodes": getattr(args, "episodes", None),
        "execution.base_seed": getattr(args, "seed", None),
        "execution.workers": getattr(args, "workers", None),
    }
    for key, value in flag_values.items():
        if value is not None:
            conf.apply_overrides([f"{key}={value}"])
    reporter = ExperimentReporter(conf, Filehandler(args.out))
    if args.prior is not None:
        reporter.set_prior(args.prior)
    return reporter


def cmd_solve(args):
    """Single solve from the scenario's initial condition; writes the tree and the iteration log."""
    reporter = _configure(args)
    plan, paths = reporter.solve(PlannerKind.parse(args.planner))
    for path in paths:
        print(path)
    if not plan.result.converged:
        logger.error("solve did not converge; wrote the best tree found")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_benchmark(args):
    """Closed-loop batches for every requested planner on shared seeds, then pairwise Welch tests."""
    reporter = _configure(args)
    planners = [PlannerKind.parse(name.strip()) for name in args.planners.split(",") if name.strip()]
    sigma_levels = SIGMA_SWEEP if args.sigma_sweep else None
    summaries, comparisons, paths = reporter.benchmark(planners, sigma_levels, args.traces)
    for row in summaries:
        level = f"sigma {row['sigma_level']:g}  " if "sigma_level" in row else ""
        print(f"{level}{row['planner']}  n={row['n']}  mean={row['mean']:.4f}  stderr={row['stderr']:.4f}"
              + ("" if row["stderr_defined"] else " (single episode)"))
    for row in comparisons:
        print(f"{row['a']} vs {row['b']}  t={row['t']:.3f}  p={row['p']:.3g}")
    for path in paths:
        print(path)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "benchmark": cmd_benchmark}


def main(argv=None):
    args = options(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BeliefDDPError as err:
        print(f"error: {err.message}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
