"""Anytime UCT-style Monte Carlo planner over method instances.

Each rollout refines the task with the simulated command models, choosing
method instances at every decision point by UCB over statistics keyed on
(task, state digest). A rollout stops at body completion, the first command
failure, the time limit or the refinement-depth limit; its utility counts the
objects delivered before it stopped.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .commands import simulate_inplace
from .refinement import (
    Command,
    Domain,
    MethodInstance,
    RefinementNode,
    Subtask,
    TaskSignature,
    applicable_instances,
    run_body,
)
from .state import WorldState
from .utility import TraceStep, UtilityParams, utility

COMPLETION = "completion"
COMMAND_FAILURE = "command-failure"
TIME_LIMIT = "time-limit"
DEPTH_LIMIT = "depth-limit"
SUCCESS_THRESHOLD = 1.0


@dataclass
class RolloutRecord:
    path: tuple  # ((command, args, ok), ...)
    utility: float
    terminated_by: str
    root_choice: Optional[MethodInstance] = None
    cost: int = 0

    def path_key(self) -> str:
        return ";".join(f"{name}({','.join(map(str, args))})={'ok' if ok else 'fail'}"
                        for name, args, ok in self.path)


@dataclass
class RolloutCluster:
    path_key: str
    size: int
    utility: float

    @property
    def success(self) -> bool:
        return self.utility > SUCCESS_THRESHOLD

    def to_dict(self) -> dict:
        return {"path": self.path_key, "size": self.size, "utility": self.utility, "success": self.success}


@dataclass
class SearchNode:
    visits: Counter = field(default_factory=Counter)
    totals: dict = field(default_factory=dict)

    @property
    def total_visits(self) -> int:
        return sum(self.visits.values())

    def mean(self, inst) -> float:
        n = self.visits.get(inst, 0)
        return self.totals.get(inst, 0.0) / n if n else 0.0

    def update(self, inst, value: float) -> None:
        self.visits[inst] += 1
        self.totals[inst] = self.totals.get(inst, 0.0) + value


@dataclass
class SearchTree:
    nodes: dict = field(default_factory=dict)
    max_utility: float = 0.0

    def node(self, key) -> SearchNode:
        found = self.nodes.get(key)
        if found is None:
            found = self.nodes[key] = SearchNode()
        return found


def ucb_select(node: SearchNode, candidates: Sequence[MethodInstance], exploration_c: float,
               rng: Optional[random.Random] = None, scale: float = 0.0) -> MethodInstance:
    """Untried candidates first, then argmax of Q/scale + c*sqrt(ln N / n); ties keep candidate order."""
    if not candidates:
        raise ValueError("ucb_select needs at least one candidate")
    for cand in candidates:
        if node.visits.get(cand, 0) == 0:
            return cand
    log_n = math.log(sum(node.visits[c] for c in candidates))
    best, best_score = None, -math.inf
    for cand in candidates:
        n = node.visits[cand]
        exploit = node.mean(cand) / scale if scale > 0 else 0.0
        score = exploit + exploration_c * math.sqrt(log_n / n)
        if score > best_score:
            best, best_score = cand, score
    return best


class _SimulatedEngine:
    """Engine handle driving bodies against the simulated command models."""

    def __init__(self, planner: "Planner", state: WorldState, tree: SearchTree, rng: random.Random,
                 depth_limit: int, record_tree: bool = False):
        self.planner = planner
        self.state = state
        self.tree = tree
        self.rng = rng
        self.depth_limit = depth_limit
        self.depth = 0
        self.start_time = state.time_passed
        self.path: list = []
        self.trace: list[TraceStep] = []
        self.visited: list = []
        self.stop: Optional[str] = None
        self.root_choice: Optional[MethodInstance] = None
        self.record_tree = record_tree
        self.tree_stack: list[RefinementNode] = []

    def refine(self, task: TaskSignature, candidates=None) -> bool:
        self.depth += 1
        if self.depth > self.depth_limit:
            self.stop = self.stop or DEPTH_LIMIT
            return False
        if candidates is None:
            candidates = applicable_instances(task, self.state, self.planner.domain)
        task_node = None
        if self.record_tree:
            task_node = RefinementNode("task", str(task))
            if self.tree_stack:
                self.tree_stack[-1].children.append(task_node)
            else:
                self.root_node = task_node
        if not candidates:
            self.stop = self.stop or COMMAND_FAILURE
            return False
        node = self.tree.node((task, self.state.digest()))
        choice = ucb_select(node, candidates, self.planner.exploration_c, self.rng, self.tree.max_utility)
        if self.root_choice is None:
            self.root_choice = choice
        self.visited.append((node, choice))
        if task_node is not None:
            self.tree_stack.append(task_node.add("method", choice.label()))
        outcome = run_body(choice, self.state, self)
        if task_node is not None:
            self.tree_stack.pop()
        return outcome.success

    def do_subtask(self, sub: Subtask) -> bool:
        return self.refine(sub.signature())

    def do_command(self, cmd: Command) -> bool:
        model = self.planner.domain.commands[cmd.name]
        cost = model.cost_in(self.planner.scenario)
        if self.state.time_passed + cost > self.planner.params.eta:
            self.stop = self.stop or TIME_LIMIT
            return False
        result = simulate_inplace(model, cmd.args, self.state, self.planner.scenario, self.rng)
        self.path.append((cmd.name, cmd.args, result.success))
        self.trace.append(TraceStep(cmd.name, cost, result.collected))
        if self.record_tree:
            self.tree_stack[-1].add("command", str(cmd), "" if result.success else "failed")
        if not result.success:
            self.stop = self.stop or COMMAND_FAILURE
        return result.success


class Planner:
    def __init__(self, domain: Domain, scenario, params: Optional[UtilityParams] = None,
                 exploration_c: float = math.sqrt(2.0), depth_limit: int = 50):
        self.domain = domain
        self.scenario = scenario
        self.params = params if params is not None else scenario.utility_params()
        self.exploration_c = exploration_c
        self.depth_limit = depth_limit

    def rollout(self, task: TaskSignature, state: WorldState, tree: SearchTree, rng: random.Random,
                candidates=None) -> RolloutRecord:
        sim = _SimulatedEngine(self, state.snapshot(), tree, rng, self.depth_limit)
        ok = sim.refine(task, candidates)
        value = utility(sim.trace, self.params)
        for node, choice in sim.visited:
            node.update(choice, value)
        tree.max_utility = max(tree.max_utility, value)
        return RolloutRecord(
            path=tuple(sim.path),
            utility=value,
            terminated_by=COMPLETION if ok else (sim.stop or COMMAND_FAILURE),
            root_choice=sim.root_choice,
            cost=sim.state.time_passed - sim.start_time,
        )

    def select_method_instance(self, task: TaskSignature, state: WorldState, budget: int,
                               rng: random.Random, candidates=None):
        """Run ``budget`` rollouts; return (best root instance or None, records)."""
        if budget < 1:
            raise ValueError("budget must be >= 1")
        if candidates is None:
            candidates = applicable_instances(task, state, self.domain)
        candidates = list(candidates)
        if not candidates:
            return None, [RolloutRecord((), 0.0, COMMAND_FAILURE) for _ in range(budget)]
        tree = SearchTree()
        records = [self.rollout(task, state, tree, rng, candidates) for _ in range(budget)]
        return choose_root(candidates, records), records

    def simulate_tree(self, task: TaskSignature, state: WorldState, rng: random.Random,
                      candidates=None) -> tuple[RefinementNode, RolloutRecord]:
        """One rollout that also records the refinement tree it generated."""
        sim = _SimulatedEngine(self, state.snapshot(), SearchTree(), rng, self.depth_limit, record_tree=True)
        ok = sim.refine(task, candidates)
        value = utility(sim.trace, self.params)
        record = RolloutRecord(tuple(sim.path), value, COMPLETION if ok else (sim.stop or COMMAND_FAILURE),
                               sim.root_choice, sim.state.time_passed - sim.start_time)
        return sim.root_node, record


def choose_root(candidates: Sequence[MethodInstance], records: Sequence[RolloutRecord]) -> Optional[MethodInstance]:
    """Highest mean utility; zero-utility ties fall back to the completion rate.

    Returns None when no rollout produced utility and no candidate ever completed.
    """
    n = Counter()
    total = Counter()
    done = Counter()
    for rec in records:
        n[rec.root_choice] += 1
        total[rec.root_choice] += rec.utility
        if rec.terminated_by == COMPLETION:
            done[rec.root_choice] += 1

    def key(c):
        return (total[c] / n[c], done[c] / n[c])

    tried = [c for c in candidates if n[c] > 0]
    if not tried:
        return None
    if all(total[c] == 0 for c in tried) and not any(done[c] for c in tried):
        return None
    best = tried[0]
    for c in tried[1:]:
        if key(c) > key(best):
            best = c
    return best


def select_method_instance(planner: Planner, task: TaskSignature, state: WorldState, budget: int,
                           rng: random.Random, candidates=None):
    return planner.select_method_instance(task, state, budget, rng, candidates)


def rollout(planner: Planner, task: TaskSignature, state: WorldState, tree: SearchTree,
            rng: random.Random) -> RolloutRecord:
    return planner.rollout(task, state, tree, rng)


def cluster_rollouts(records: Sequence[RolloutRecord]) -> list[RolloutCluster]:
    """Group identical command/outcome paths; clusters keep first-appearance order."""
    clusters: dict[str, RolloutCluster] = {}
    for rec in records:
        key = rec.path_key()
        found = clusters.get(key)
        if found is None:
            clusters[key] = RolloutCluster(key, 1, rec.utility)
        else:
            found.size += 1
    return list(clusters.values())
