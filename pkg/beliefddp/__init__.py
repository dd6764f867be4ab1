# -*- coding: utf-8 -*-

from __future__ import absolute_import

from beliefddp.classes import (ProblemModel, LatentSet, SolverConfig, solve, PlannerKind, make_plan, build_scenario,
                               run_batch, welch_t, ScenarioConfigLoader, Filehandler, ExperimentReporter,
                               BeliefDDPError)
