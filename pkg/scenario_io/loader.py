import copy
import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from costs import OBSTACLE_CHECKS, CostError, CostSpec, ExitSet, Obstacle, TerminalCost, derive_control_weight
from dynamics import AgentModel, make_integrator, make_unicycle
from network import (
    CommGraph,
    GraphError,
    Subsystem,
    all_subsystems,
    binary_tree_graph,
    complete_graph,
    line_graph,
    loop_graph,
)
from pic import ScoringOptions
from runner import CycleSchedule

"""
Scenario files: JSON objects with the sections below. Anything not given falls
back to the listed default; unknown top-level keys are rejected.

  name, description          free text (name defaults to the file stem)
  graph                      {"n_agents": N, "edges": [[1, 2], ...]}
                             or {"n_agents": N, "topology": "loop" | "line" | "complete" | "binary-tree"}
  model                      {"kind": "unicycle", "sigma", "nu", "sampling_sigma", "sampling_nu"}
                             or {"kind": "integrator", "sigma", "sampling_sigma"}
  agents                     [{"initial": [...], "goal": [...]}, ...] one entry per agent;
                             a goal may list positions only
  costs
    lambda                   1.0 (a notice is logged when missing)
    goal_weights             {"1": w_11, ...}
    pair_weights             {"1-3": w_13, ...} directed; w_ij > 0 needs edge (i, j)
    alignment_weights        {"1-2": a_12, ...} directed; same edge rule
    regularizers             "auto-initial" (initial distances) or
                             {"goal": scalar | {"i": d_i}, "pair": scalar | {"i-j": d_ij}}
    control_weight           {"mode": "derived"} or {"mode": "explicit", "matrix": [[...]], "strict": false}
    terminal                 {"kind": "zero"} or {"kind": "quadratic", "kappa": 1.0, "offset": 0.0}
    obstacles                [{"x": [x_min, x_max], "y": [y_min, y_max], "penalty": 120}, ...]
    obstacle_check           "segment" (penalize steps crossing an obstacle) | "point"
  planning
    t_f, control_period, horizon_segments, rollouts      required
    sampling                 "distributed" | "centralized"         (distributed)
    weighting                "passive" | "generalized"             (passive)
    alpha_over_lambda        true
    gradient                 "analytic" | "finite-difference"      (analytic)
  run
    trials 1, seed 0, exit "time-only" | "goal-ball" with goal_radius,
    report_pairs (all edges), output_dir ("results/<name>"), dump_rollouts false
"""

logger = logging.getLogger(__name__)

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")
TOP_LEVEL_KEYS = ("name", "description", "graph", "model", "agents", "costs", "planning", "run")
TOPOLOGIES = {
    "loop": loop_graph,
    "line": line_graph,
    "complete": complete_graph,
    "binary-tree": binary_tree_graph,
}
POSITION_DIMS = {"unicycle": (0, 1), "integrator": (0,)}

Pair = Tuple[int, int]


class ScenarioError(ValueError):
    """Invalid scenario file; `field` is the dotted path of the offending entry."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(eq=False)
class Scenario:
    name: str
    graph: CommGraph
    model: AgentModel
    costs: CostSpec
    initial_states: np.ndarray
    schedule: CycleSchedule
    exit_set: ExitSet
    rollouts: int
    sampling_mode: str = "distributed"
    scoring: ScoringOptions = field(default_factory=ScoringOptions)
    trials: int = 1
    seed: int = 0
    report_pairs: Tuple[Pair, ...] = ()
    output_dir: str = ""
    dump_rollouts: bool = False
    dump_dir: Optional[str] = None
    description: str = ""
    resolved: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.subsystems: List[Subsystem] = all_subsystems(self.graph)

    @property
    def goal_positions(self) -> np.ndarray:
        return self.costs.goals[:, list(self.costs.position_dims)]

    def with_output_dir(self, path: str) -> "Scenario":
        dump_dir = os.path.join(path, "rollouts") if self.dump_rollouts else None
        return replace(self, output_dir=path, dump_dir=dump_dir)


def bundled_scenarios() -> List[str]:
    if not os.path.isdir(SCENARIO_DIR):
        return []
    return sorted(f[:-5] for f in os.listdir(SCENARIO_DIR) if f.endswith(".json"))


def resolve_scenario_path(source: str) -> str:
    """A file path, or the name of a bundled scenario."""
    if os.path.isfile(source):
        return source
    bundled = os.path.join(SCENARIO_DIR, f"{source}.json")
    if os.path.isfile(bundled):
        return bundled
    raise ScenarioError(f"no scenario file or bundled scenario named {source!r} "
                        f"(bundled: {', '.join(bundled_scenarios())})")


def read_scenario_dict(source: str) -> Dict[str, Any]:
    path = resolve_scenario_path(source)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in {path}: {e}")
        raise ScenarioError(f"invalid JSON at line {e.lineno}: {e.msg}")
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must contain a JSON object")
    raw.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    return raw


def load_scenario(source: str) -> Scenario:
    """Read and validate a scenario from a path or bundled name."""
    scenario = scenario_from_dict(read_scenario_dict(source))
    logger.info(f"Loaded scenario '{scenario.name}': {scenario.graph.n_agents} agents, "
                f"{len(scenario.graph.edges)} edges, t_f={scenario.schedule.t_f}")
    return scenario


def _section(raw: Dict[str, Any], key: str, required: bool = True) -> Dict[str, Any]:
    value = raw.get(key)
    if value is None:
        if required:
            raise ScenarioError("missing section", key)
        return {}
    if not isinstance(value, dict):
        raise ScenarioError("must be an object", key)
    return value


def _number(table: Dict[str, Any], key: str, where: str, default=None, minimum=None, strict_min=False) -> float:
    value = table.get(key, default)
    path = f"{where}.{key}"
    if value is None:
        raise ScenarioError("required", path)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ScenarioError(f"must be a finite number, got {value!r}", path)
    if minimum is not None and (value <= minimum if strict_min else value < minimum):
        raise ScenarioError(f"must be {'>' if strict_min else '>='} {minimum}, got {value}", path)
    return float(value)


def _integer(table: Dict[str, Any], key: str, where: str, default=None, minimum: int = 0) -> int:
    value = table.get(key, default)
    path = f"{where}.{key}"
    if value is None:
        raise ScenarioError("required", path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"must be an integer, got {value!r}", path)
    if value < minimum:
        raise ScenarioError(f"must be >= {minimum}, got {value}", path)
    return value


def _choice(table: Dict[str, Any], key: str, where: str, options, default: str) -> str:
    value = table.get(key, default)
    if value not in options:
        raise ScenarioError(f"must be one of {list(options)}, got {value!r}", f"{where}.{key}")
    return value


def _parse_agent_key(key: str, n_agents: int, path: str) -> int:
    try:
        agent = int(key)
    except (TypeError, ValueError):
        raise ScenarioError(f"agent key must be an integer, got {key!r}", path)
    if not 1 <= agent <= n_agents:
        raise ScenarioError(f"agent {agent} outside 1..{n_agents}", path)
    return agent


def _parse_pair_key(key: str, n_agents: int, path: str) -> Pair:
    parts = str(key).split("-")
    if len(parts) != 2:
        raise ScenarioError(f"pair key must look like 'i-j', got {key!r}", path)
    i, j = (_parse_agent_key(p, n_agents, path) for p in parts)
    if i == j:
        raise ScenarioError("pair key names the same agent twice", path)
    return i, j


def _agent_table(value, n_agents: int, where: str) -> Dict[int, float]:
    if not isinstance(value, dict):
        raise ScenarioError("must be an object keyed by agent index", where)
    table = {}
    for key, w in value.items():
        path = f"{where}.{key}"
        table[_parse_agent_key(key, n_agents, path)] = _number(value, key, where, minimum=0)
    return table


def _pair_table(value, graph: CommGraph, where: str) -> Dict[Pair, float]:
    if not isinstance(value, dict):
        raise ScenarioError("must be an object keyed by 'i-j'", where)
    table = {}
    for key, w in value.items():
        path = f"{where}.{key}"
        pair = _parse_pair_key(key, graph.n_agents, path)
        weight = _number(value, key, where, minimum=0)
        if weight > 0 and not graph.has_edge(*pair):
            raise ScenarioError(f"weight on ({pair[0]}, {pair[1]}) but agents {pair[0]} and {pair[1]} "
                                f"do not communicate", path)
        table[pair] = weight
    return table


def _build_graph(section: Dict[str, Any]) -> CommGraph:
    n_agents = _integer(section, "n_agents", "graph", minimum=1)
    try:
        if "edges" in section:
            edges = section["edges"]
            if not isinstance(edges, list) or any(not isinstance(e, list) or len(e) != 2 for e in edges):
                raise ScenarioError("must be a list of [i, j] pairs", "graph.edges")
            return CommGraph.from_edge_list(n_agents, edges)
        topology = _choice(section, "topology", "graph", TOPOLOGIES, "complete")
        return TOPOLOGIES[topology](n_agents)
    except GraphError as e:
        raise ScenarioError(str(e), "graph") from e


def _build_model(section: Dict[str, Any]) -> AgentModel:
    kind = _choice(section, "kind", "model", POSITION_DIMS, "unicycle")
    if kind == "unicycle":
        return make_unicycle(
            sigma=_number(section, "sigma", "model", minimum=0),
            nu=_number(section, "nu", "model", minimum=0),
            sampling_sigma=_number(section, "sampling_sigma", "model", minimum=0),
            sampling_nu=_number(section, "sampling_nu", "model", minimum=0),
        )
    sigma = _number(section, "sigma", "model", minimum=0)
    return make_integrator(sigma, _number(section, "sampling_sigma", "model", default=sigma, minimum=0))


def _build_agents(raw: Dict[str, Any], n_agents: int, model: AgentModel,
                  position_dims: Tuple[int, ...]) -> Tuple[np.ndarray, np.ndarray]:
    agents = raw.get("agents")
    if not isinstance(agents, list):
        raise ScenarioError("must be a list with one entry per agent", "agents")
    if len(agents) != n_agents:
        raise ScenarioError(f"{len(agents)} entries for {n_agents} agents", "agents")
    initial = np.zeros((n_agents, model.state_dim))
    goals = np.zeros((n_agents, model.state_dim))
    for k, entry in enumerate(agents):
        where = f"agents.{k}"
        if not isinstance(entry, dict):
            raise ScenarioError("must be an object with 'initial' and 'goal'", where)
        x0 = np.asarray(entry.get("initial", []), dtype=float)
        if x0.shape != (model.state_dim,) or not np.all(np.isfinite(x0)):
            raise ScenarioError(f"initial state must have {model.state_dim} finite entries", f"{where}.initial")
        goal = np.asarray(entry.get("goal", []), dtype=float)
        if goal.shape == (len(position_dims),):
            goals[k, list(position_dims)] = goal
        elif goal.shape == (model.state_dim,):
            goals[k] = goal
        else:
            raise ScenarioError(f"goal must have {len(position_dims)} or {model.state_dim} entries",
                                f"{where}.goal")
        if not np.all(np.isfinite(goals[k])):
            raise ScenarioError("goal must be finite", f"{where}.goal")
        initial[k] = x0
    return initial, goals


def _regularizers(value, initial: np.ndarray, goals: np.ndarray, position_dims, graph: CommGraph,
                  goal_weights: Dict[int, float], pair_weights: Dict[Pair, float]):
    dims = list(position_dims)
    if value == "auto-initial":
        goal_reg = {i: float(np.linalg.norm(initial[i - 1, dims] - goals[i - 1, dims])) for i in goal_weights}
        pair_reg = {(i, j): float(np.linalg.norm(initial[i - 1, dims] - initial[j - 1, dims]))
                    for i, j in pair_weights}
        return goal_reg, pair_reg
    if not isinstance(value, dict):
        raise ScenarioError("must be 'auto-initial' or an object with 'goal' and 'pair'", "costs.regularizers")
    goal_value = value.get("goal", 0.0)
    pair_value = value.get("pair", 0.0)
    if isinstance(goal_value, dict):
        goal_reg = _agent_table(goal_value, graph.n_agents, "costs.regularizers.goal")
    else:
        d = _number(value, "goal", "costs.regularizers", default=0.0, minimum=0)
        goal_reg = {i: d for i in goal_weights}
    if isinstance(pair_value, dict):
        table = {}
        for key in pair_value:
            pair = _parse_pair_key(key, graph.n_agents, f"costs.regularizers.pair.{key}")
            table[pair] = _number(pair_value, key, "costs.regularizers.pair", minimum=0)
        pair_reg = table
    else:
        d = _number(value, "pair", "costs.regularizers", default=0.0, minimum=0)
        pair_reg = {pair: d for pair in pair_weights}
    return goal_reg, pair_reg


def _control_weight(section: Dict[str, Any], model: AgentModel, lam: float) -> Tuple[Optional[np.ndarray], Dict]:
    mode = _choice(section, "mode", "costs.control_weight", ("derived", "explicit"), "derived")
    strict = bool(section.get("strict", False))
    sampling = model.sampling_noise_scale
    if mode == "derived":
        try:
            return derive_control_weight(sampling, lam), {"mode": "derived"}
        except CostError:
            logger.info("Sampling noise is singular; no control weight is derived")
            return None, {"mode": "derived"}
    matrix = np.asarray(section.get("matrix", []), dtype=float)
    if matrix.shape != (model.input_dim, model.input_dim):
        raise ScenarioError(f"matrix must be {model.input_dim}x{model.input_dim}", "costs.control_weight.matrix")
    try:
        derive_control_weight(sampling, lam, supplied=matrix, strict=strict)
    except CostError as e:
        raise ScenarioError(str(e), "costs.control_weight") from e
    return matrix, {"mode": "explicit", "strict": strict, "matrix": matrix.tolist()}


def _obstacles(value) -> Tuple[Obstacle, ...]:
    if not isinstance(value, list):
        raise ScenarioError("must be a list", "costs.obstacles")
    obstacles = []
    for k, entry in enumerate(value):
        where = f"costs.obstacles.{k}"
        try:
            (x_min, x_max), (y_min, y_max) = entry["x"], entry["y"]
            obstacles.append(Obstacle(float(x_min), float(x_max), float(y_min), float(y_max),
                                      float(entry.get("penalty", 120.0))))
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioError(f"needs 'x': [min, max] and 'y': [min, max] ({e})", where)
        except CostError as e:
            raise ScenarioError(str(e), where) from e
    return tuple(obstacles)


def _pair_key(pair: Pair) -> str:
    return f"{pair[0]}-{pair[1]}"


def scenario_from_dict(raw: Dict[str, Any]) -> Scenario:
    """Validate a raw scenario dictionary and resolve every default."""
    unknown = sorted(set(raw) - set(TOP_LEVEL_KEYS))
    if unknown:
        raise ScenarioError(f"unknown top-level keys {unknown}", unknown[0])
    name = str(raw.get("name", "scenario"))

    graph = _build_graph(_section(raw, "graph"))
    model_section = _section(raw, "model")
    model = _build_model(model_section)
    position_dims = POSITION_DIMS[model.name]
    initial, goals = _build_agents(raw, graph.n_agents, model, position_dims)

    costs = _section(raw, "costs", required=False)
    if "lambda" not in costs:
        logger.info(f"Scenario '{name}': lambda not given, using 1.0")
    lam = _number(costs, "lambda", "costs", default=1.0, minimum=0, strict_min=True)
    goal_weights = _agent_table(costs.get("goal_weights", {}), graph.n_agents, "costs.goal_weights")
    pair_weights = _pair_table(costs.get("pair_weights", {}), graph, "costs.pair_weights")
    alignment = _pair_table(costs.get("alignment_weights", {}), graph, "costs.alignment_weights")
    goal_reg, pair_reg = _regularizers(costs.get("regularizers", "auto-initial"), initial, goals,
                                       position_dims, graph, goal_weights, pair_weights)
    control_weight, control_echo = _control_weight(costs.get("control_weight", {}) or {}, model, lam)
    terminal_section = costs.get("terminal", {}) or {}
    obstacles = _obstacles(costs.get("obstacles", []))
    obstacle_check = _choice(costs, "obstacle_check", "costs", OBSTACLE_CHECKS, "segment")
    try:
        terminal = TerminalCost(
            kind=_choice(terminal_section, "kind", "costs.terminal", ("zero", "quadratic"), "zero"),
            kappa=_number(terminal_section, "kappa", "costs.terminal", default=1.0, minimum=0),
            offset=_number(terminal_section, "offset", "costs.terminal", default=0.0, minimum=0),
        )
        spec = CostSpec(
            goals=goals,
            goal_weights=goal_weights,
            pair_weights=pair_weights,
            goal_regularizers=goal_reg,
            pair_regularizers=pair_reg,
            alignment_weights=alignment,
            obstacles=obstacles,
            terminal=terminal,
            lam=lam,
            control_weight=control_weight,
            position_dims=position_dims,
            nonact_dim=model.nonact_dim,
            obstacle_check=obstacle_check,
        )
    except CostError as e:
        raise ScenarioError(str(e), "costs") from e

    planning = _section(raw, "planning")
    t_f = _number(planning, "t_f", "planning", minimum=0, strict_min=True)
    delta = _number(planning, "control_period", "planning", minimum=0, strict_min=True)
    if not t_f > delta:
        raise ScenarioError(f"t_f={t_f} must exceed the control period {delta}", "planning.t_f")
    schedule = CycleSchedule(delta, _integer(planning, "horizon_segments", "planning", minimum=1), t_f)
    rollouts = _integer(planning, "rollouts", "planning", minimum=1)
    sampling_mode = _choice(planning, "sampling", "planning", ("distributed", "centralized"), "distributed")
    scoring = ScoringOptions(
        weighting=_choice(planning, "weighting", "planning", ("passive", "generalized"), "passive"),
        alpha_over_lambda=bool(planning.get("alpha_over_lambda", True)),
        gradient=_choice(planning, "gradient", "planning", ("analytic", "finite-difference"), "analytic"),
    )

    run = _section(raw, "run", required=False)
    exit_mode = _choice(run, "exit", "run", ("time-only", "goal-ball"), "time-only")
    goal_radius = None
    if exit_mode == "goal-ball":
        goal_radius = _number(run, "goal_radius", "run", minimum=0, strict_min=True)
    report_pairs = run.get("report_pairs")
    if report_pairs is None:
        report_pairs = graph.sorted_edges()
    else:
        if not isinstance(report_pairs, list):
            raise ScenarioError("must be a list of [i, j] pairs", "run.report_pairs")
        report_pairs = [_parse_pair_key(_pair_key(tuple(p)), graph.n_agents, "run.report_pairs")
                        for p in report_pairs]
    output_dir = str(run.get("output_dir", os.path.join("results", name)))

    resolved = {
        "name": name,
        "description": str(raw.get("description", "")),
        "graph": {"n_agents": graph.n_agents, "edges": [list(e) for e in graph.sorted_edges()]},
        "model": {"kind": model.name, **model.params},
        "agents": [{"initial": initial[k].tolist(), "goal": goals[k].tolist()} for k in range(graph.n_agents)],
        "costs": {
            "lambda": lam,
            "goal_weights": {str(i): w for i, w in sorted(goal_weights.items())},
            "pair_weights": {_pair_key(p): w for p, w in sorted(pair_weights.items())},
            "alignment_weights": {_pair_key(p): w for p, w in sorted(alignment.items())},
            "regularizers": {
                "goal": {str(i): d for i, d in sorted(goal_reg.items())},
                "pair": {_pair_key(p): d for p, d in sorted(pair_reg.items())},
            },
            "control_weight": control_echo,
            "terminal": {"kind": terminal.kind, "kappa": terminal.kappa, "offset": terminal.offset},
            "obstacles": [{"x": [o.x_min, o.x_max], "y": [o.y_min, o.y_max], "penalty": o.penalty}
                          for o in obstacles],
            "obstacle_check": obstacle_check,
        },
        "planning": {
            "t_f": t_f,
            "control_period": delta,
            "horizon_segments": schedule.horizon_segments,
            "rollouts": rollouts,
            "sampling": sampling_mode,
            "weighting": scoring.weighting,
            "alpha_over_lambda": scoring.alpha_over_lambda,
            "gradient": scoring.gradient,
        },
        "run": {
            "trials": _integer(run, "trials", "run", default=1, minimum=1),
            "seed": _integer(run, "seed", "run", default=0, minimum=0),
            "exit": exit_mode,
            "report_pairs": [list(p) for p in report_pairs],
            "output_dir": output_dir,
            "dump_rollouts": bool(run.get("dump_rollouts", False)),
        },
    }
    if goal_radius is not None:
        resolved["run"]["goal_radius"] = goal_radius

    scenario = Scenario(
        name=name,
        graph=graph,
        model=model,
        costs=spec,
        initial_states=initial,
        schedule=schedule,
        exit_set=ExitSet(t_f, goal_radius=goal_radius),
        rollouts=rollouts,
        sampling_mode=sampling_mode,
        scoring=scoring,
        trials=resolved["run"]["trials"],
        seed=resolved["run"]["seed"],
        report_pairs=tuple(report_pairs),
        dump_rollouts=resolved["run"]["dump_rollouts"],
        description=resolved["description"],
        resolved=resolved,
    )
    return scenario.with_output_dir(output_dir)


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Fully resolved configuration; loading it back reproduces the same runs."""
    echo = copy.deepcopy(scenario.resolved)
    echo["run"]["output_dir"] = scenario.output_dir
    echo["run"]["trials"] = scenario.trials
    echo["run"]["seed"] = scenario.seed
    return echo


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: Dict[str, Any], path: str, value) -> Dict[str, Any]:
    """
    Copy of `raw` with the dotted `path` set to `value`, e.g.
    apply_override(raw, "costs.pair_weights.1-3", 0.7). String values are
    parsed as JSON when possible. Missing objects along the path are created;
    list entries are addressed by index.
    """
    keys = path.split(".")
    if not path or any(not k for k in keys):
        raise ScenarioError(f"malformed override path {path!r}")
    updated = copy.deepcopy(raw)
    node = updated
    for depth, key in enumerate(keys[:-1]):
        where = ".".join(keys[:depth + 1])
        if isinstance(node, list):
            try:
                node = node[int(key)]
            except (ValueError, IndexError):
                raise ScenarioError("no such list entry", where)
        else:
            if not isinstance(node.get(key, {}), (dict, list)):
                raise ScenarioError("cannot descend into a scalar", where)
            node = node.setdefault(key, {})
    if isinstance(value, str):
        value = _coerce(value)
    last = keys[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ScenarioError("no such list entry", path)
    else:
        node[last] = value
    return updated


def parse_sweep_param(text: str) -> Tuple[str, List[Any]]:
    """'costs.pair_weights.1-3=0,0.7,1.4' -> ('costs.pair_weights.1-3', [0, 0.7, 1.4])."""
    if "=" not in text:
        raise ScenarioError(f"sweep parameter must look like path=v1,v2,... got {text!r}")
    path, values = text.split("=", 1)
    parsed = [_coerce(v.strip()) for v in values.split(",") if v.strip()]
    if not parsed:
        raise ScenarioError("no values given", path)
    return path.strip(), parsed
