"""Scene-grounded household task planning.

The pipeline grounds a request in a large household scene graph, infers an
ordered goal structure over the grounded slice, completes it with fixed
household rules and compiles it into actions for a symbolic simulator.
"""

from .completion import CompletedStructure, complete, default_rules, load_rules
from .evaluator import (EvalOutcome, FailureClass, check_goal_success,
                        check_process_success, grounding_diagnostics, task_recovery,
                        token_budget)
from .executor import CompileError, compile_goals
from .scene import (GoalAtom, ProcessConstraint, SceneGraph, TaskInstance,
                    load_task_bundle, satisfies)
from .simulator import Action, Trajectory, Verb, run, step

__all__ = [
    "Action", "CompileError", "CompletedStructure", "EvalOutcome", "FailureClass",
    "GoalAtom", "ProcessConstraint", "SceneGraph", "TaskInstance", "Trajectory", "Verb",
    "check_goal_success", "check_process_success", "compile_goals", "complete",
    "default_rules", "grounding_diagnostics", "load_rules", "load_task_bundle", "run",
    "satisfies", "step", "task_recovery", "token_budget",
]

__version__ = "0.1.0"
