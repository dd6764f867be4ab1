# -*- coding: utf-8 -*-

from __future__ import absolute_import

from beliefddp.classes.CustomExceptions import (BeliefDDPError, InvalidArgumentError, DegenerateEvidenceError,
                                                DifferentiationError, StructuralCorruptionError,
                                                RolloutDivergenceError, BackwardFailureError, ConfigurationError)
from beliefddp.classes.Beliefs import LatentSet, BeliefState, bayes_update, belief_from_logits, logits_from_belief
from beliefddp.classes.ProblemModels import ProblemModel, derivative_bundle
from beliefddp.classes.TrajectoryTrees import TrajectoryTree, QuadraticValueModel, node_count, iterate_depth_first
from beliefddp.classes.Solvers import (SolverConfig, GainSchedule, SolveResult, forward_pass, backward_pass,
                                       evaluate_tree_cost, optimize_control, q_expansion, solve)
from beliefddp.classes.Baselines import PlannerKind, Plan, make_plan, mlddp_plan, pwddp_plan, stacked_model
from beliefddp.classes.Vehicles import BicycleParams, IDMParams, bicycle_step, idm_accel
from beliefddp.classes.Scenarios import (TMazeConfig, TerrainConfig, LaneChangeConfig, tmaze_model, terrain_model,
                                        lane_change_model, build_scenario)
from beliefddp.classes.Executions import (ExecutionConfig, EpisodeTrace, BatchStats, execute_episode, run_batch,
                                          welch_t)
from beliefddp.classes.DataHandlers import Filehandler, ScenarioConfigLoader, config_hash
from beliefddp.classes.Reporters import ExperimentReporter
