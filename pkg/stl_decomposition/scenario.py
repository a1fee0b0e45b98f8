"""
Scenario documents.

A scenario is one JSON document:

    {
      "schema_version": 1,
      "name": "toy_chain",
      "radius": 8.5,
      "seed": 0,
      "agents": [{"id": 1, "position": [0, 0]}, ...],
      "communication": {"reconstructed": false, "edges": [[1, 2], ...]},
      "tasks": [
        {"name": "phi_1_3", "operator": "G", "interval": [10, 20], "edge": [1, 3],
         "shape": {"sides": 4, "beta": 1.0, "center": [12, 0]}},
        {"name": "phi_2", "operator": "F", "interval": [0, 5], "agent": 2,
         "polytope": {"A": [[1, 0], ...], "c": [0, 0], "z": [1, ...]}, "t_bar": 2.0},
        {"name": "hold", "operator": "U", "interval": [0, 10], "edge": [1, 2], "tau": 4,
         "left": {...shape or polytope...}, "right": {...}},
        {"name": "patrol", "operator": "G", "interval": [0, 2], "edge": [1, 2],
         "shape": {...}, "repeat": {"period": 10, "horizon": 40}}
      ],
      "solver": {"mode": "centralized", ...},
      "verify": {"samples": 10000, ...}
    }

Validation collects every issue before raising.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .config import SolverConfig, VerifyConfig
from .errors import ContractViolation, DecompositionError, ScenarioError
from .geometry import Polytope, regular_polytope
from .graphs import AgentState, canonical
from .tasks import Operator, TaskSpec, TimeInterval, rewrite_until, unroll_recurrence

logger = logging.getLogger(__name__)

SCHEMA_VERSIONS = (1,)

SHIPPED = Path(__file__).resolve().parent.parent / "scenarios"


@dataclass
class Scenario:
    name: str
    agents: List[AgentState]
    radius: float
    tasks: List[TaskSpec]
    tokens: Optional[Dict[Tuple[int, int], bool]] = None
    reconstructed: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    seed: int = 0
    source: Optional[str] = None

    @property
    def agent_ids(self) -> List[int]:
        return [a.id for a in self.agents]


def _polytope(data: Any, where: str, issues: List[str]) -> Optional[Polytope]:
    if not isinstance(data, dict):
        issues.append(f"{where}: expected an object")
        return None
    try:
        if {"sides", "beta"} <= set(data):
            return regular_polytope(int(data["sides"]), float(data["beta"]),
                                    data.get("center", [0.0, 0.0]))
        if {"A", "c", "z"} <= set(data):
            P = Polytope(data["A"], data["c"], data["z"])
            P.check_bounded()
            return P
    except (DecompositionError, ValueError, TypeError) as err:
        issues.append(f"{where}: {err}")
        return None
    issues.append(f"{where}: needs either sides/beta/center or A/c/z")
    return None


def _task_shape(entry: Dict, key: str, where: str, issues: List[str]) -> Optional[Polytope]:
    if key in entry:
        return _polytope(entry[key], f"{where}.{key}", issues)
    if key == "truth_set":
        if "shape" in entry:
            return _polytope(entry["shape"], f"{where}.shape", issues)
        if "polytope" in entry:
            return _polytope(entry["polytope"], f"{where}.polytope", issues)
    issues.append(f"{where}: missing {key if key != 'truth_set' else 'shape or polytope'}")
    return None


def _parse_task(entry: Any, k: int, ids: set, issues: List[str]) -> List[TaskSpec]:
    where = f"tasks[{k}]"
    if not isinstance(entry, dict):
        issues.append(f"{where}: expected an object")
        return []
    name = str(entry.get("name", f"task_{k}"))
    where = f"{where} ({name})"

    if "edge" in entry:
        edge = entry["edge"]
        if not (isinstance(edge, list) and len(edge) == 2):
            issues.append(f"{where}.edge: expected [i, j]")
            return []
        try:
            edge = (int(edge[0]), int(edge[1]))
        except (TypeError, ValueError) as err:
            issues.append(f"{where}.edge: {err}")
            return []
    elif "agent" in entry:
        try:
            edge = (int(entry["agent"]), int(entry["agent"]))
        except (TypeError, ValueError) as err:
            issues.append(f"{where}.agent: {err}")
            return []
    else:
        issues.append(f"{where}: needs edge or agent")
        return []
    dangling = [i for i in edge if i not in ids]
    if dangling:
        issues.append(f"{where}: references unknown agent {dangling[0]}")

    try:
        interval = TimeInterval(*[float(v) for v in entry["interval"]])
    except KeyError:
        issues.append(f"{where}: missing interval")
        return []
    except (ValueError, TypeError) as err:
        issues.append(f"{where}.interval: {err}")
        return []

    op = str(entry.get("operator", ""))
    if op == "U":
        left = _task_shape(entry, "left", where, issues)
        right = _task_shape(entry, "right", where, issues)
        if "tau" not in entry:
            issues.append(f"{where}: Until needs an explicit tau")
            return []
        if left is None or right is None or dangling:
            return []
        try:
            return rewrite_until(left, right, edge, interval.a, interval.b, float(entry["tau"]), name)
        except (ContractViolation, TypeError, ValueError) as err:
            issues.append(f"{where}: {err}")
            return []
    if op not in (Operator.ALWAYS.value, Operator.EVENTUALLY.value):
        issues.append(f"{where}.operator: expected G, F or U, got {op!r}")
        return []

    shape = _task_shape(entry, "truth_set", where, issues)
    if shape is None or dangling:
        return []
    t_bar = entry.get("t_bar")
    try:
        t_bar = None if t_bar is None else float(t_bar)
    except (TypeError, ValueError) as err:
        issues.append(f"{where}.t_bar: {err}")
        return []
    if t_bar is not None and not interval.contains_time(t_bar):
        issues.append(f"{where}.t_bar: {t_bar} outside {interval}")
        return []
    task = TaskSpec(Operator(op), interval, edge, shape, name=name,
                    sync_time=t_bar)
    if "repeat" in entry:
        rep = entry["repeat"]
        try:
            return unroll_recurrence(task, float(rep["period"]), float(rep["horizon"]))
        except (KeyError, TypeError, ValueError, DecompositionError) as err:
            issues.append(f"{where}.repeat: {err}")
            return []
    return [task]


def scenario_from_dict(data: Any, source: Optional[str] = None) -> Scenario:
    """Validate a scenario document; every violation is reported together."""
    issues: List[str] = []
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object", [f"{source or '<root>'}: not an object"])

    version = data.get("schema_version")
    if version not in SCHEMA_VERSIONS:
        issues.append(f"schema_version: unsupported value {version!r}")

    radius = data.get("radius")
    if not isinstance(radius, (int, float)) or radius <= 0:
        issues.append("radius: expected a positive number")
        radius = 0.0

    agents: List[AgentState] = []
    seen = set()
    for k, entry in enumerate(data.get("agents") or []):
        where = f"agents[{k}]"
        try:
            aid = int(entry["id"])
            state = entry.get("state", entry.get("position"))
            agents.append(AgentState(aid, np.asarray(state, dtype=float), entry.get("selection")))
        except (KeyError, TypeError, ValueError) as err:
            issues.append(f"{where}: {err}")
            continue
        if aid in seen:
            issues.append(f"{where}: duplicate agent id {aid}")
        seen.add(aid)
    if not agents:
        issues.append("agents: at least one agent required")

    tokens = None
    reconstructed = False
    comm = data.get("communication")
    if isinstance(comm, dict):
        reconstructed = bool(comm.get("reconstructed", False))
        tokens = {}
        edges = comm.get("edges", [])
        if not isinstance(edges, list):
            issues.append("communication.edges: expected a list of [i, j]")
            edges = []
        for k, e in enumerate(edges):
            where = f"communication.edges[{k}]"
            try:
                e = (int(e[0]), int(e[1])) if len(e) == 2 else None
            except (TypeError, ValueError, KeyError) as err:
                issues.append(f"{where}: {err}")
                continue
            if e is None:
                issues.append(f"{where}: expected [i, j]")
                continue
            if any(i not in seen for i in e):
                issues.append(f"{where}: references unknown agents {list(e)}")
                continue
            tokens[canonical(e)] = True
    elif comm is not None:
        issues.append("communication: expected an object")

    tasks: List[TaskSpec] = []
    for k, entry in enumerate(data.get("tasks") or []):
        tasks.extend(_parse_task(entry, k, seen, issues))

    try:
        solver = SolverConfig.from_dict(data.get("solver", {}))
    except (KeyError, TypeError, ValueError) as err:
        issues.append(f"solver: {err}")
        solver = SolverConfig()
    try:
        verify = VerifyConfig.from_dict(data.get("verify", {}))
    except (KeyError, TypeError, ValueError) as err:
        issues.append(f"verify: {err}")
        verify = VerifyConfig()

    try:
        seed = int(data.get("seed", verify.seed))
    except (TypeError, ValueError) as err:
        issues.append(f"seed: {err}")
        seed = 0

    if issues:
        raise ScenarioError(f"invalid scenario {source or data.get('name', '')}".strip(), issues)
    scenario = Scenario(
        name=str(data.get("name", Path(source).stem if source else "scenario")),
        agents=agents, radius=float(radius), tasks=tasks, tokens=tokens,
        reconstructed=reconstructed, solver=solver, verify=verify,
        seed=seed, source=source,
    )
    if reconstructed:
        logger.info("scenario %s ships a reconstructed communication graph", scenario.name)
    return scenario


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file (a bare name resolves to the shipped scenarios)."""
    path = Path(path)
    if not path.exists() and (SHIPPED / f"{path.name}.json").exists():
        path = SHIPPED / f"{path.name}.json"
    try:
        text = path.read_text()
    except OSError as err:
        raise ScenarioError(f"cannot read scenario {path}", [f"{path}: {err.strerror}"]) from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"cannot parse scenario {path}",
                            [f"{path}:{err.lineno}:{err.colno}: {err.msg}"]) from err
    scenario = scenario_from_dict(data, str(path))
    logger.info("loaded scenario %s: %d agents, %d tasks, r_c=%g",
                scenario.name, len(scenario.agents), len(scenario.tasks), scenario.radius)
    return scenario
