"""
Decentralized decomposition of collaborative STL tasks.

Tasks whose agents cannot talk to each other are rewritten as conjunctions of
tasks along communication paths, with the new truth sets found by one convex
program solved either centrally or by edge-local subgradient iterations.
"""

__version__ = "0.1.0"

from .config import ConicSettings, SolverConfig, VerifyConfig  # noqa: E402
from .errors import DecompositionError  # noqa: E402
from .geometry import Polytope, SimilarityParam, regular_polytope  # noqa: E402
from .harness import DecompositionResult, decompose, lint, verify_directory, verify_implication  # noqa: E402
from .reports import emit_reports  # noqa: E402
from .scenario import Scenario, load_scenario, scenario_from_dict  # noqa: E402
from .tasks import Operator, Signal, TaskSpec, TimeInterval  # noqa: E402

__all__ = [
    "ConicSettings", "SolverConfig", "VerifyConfig", "DecompositionError",
    "Polytope", "SimilarityParam", "regular_polytope",
    "DecompositionResult", "decompose", "lint", "verify_directory", "verify_implication",
    "emit_reports", "Scenario", "load_scenario", "scenario_from_dict",
    "Operator", "Signal", "TaskSpec", "TimeInterval",
]
