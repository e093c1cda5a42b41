"""Trial runner: wires scenario, domain, planner, engine and executor together."""

from __future__ import annotations

import csv
import io
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .domain import build_collection_domain
from .engine import ActingEngine, QueueTriple, TraceLog
from .executor import Executor
from .planner import Planner
from .refinement import TaskSignature
from .scenario import Scenario, load_scenario, scenario_from_dict
from .state import StateDelta, apply_delta, check_invariants
from .utility import utility


@dataclass
class TrialReport:
    scenario: str
    seed: int
    budget: int
    root_status: str
    collected_utility: float
    objects_collected: tuple[int, int]
    collected: list[str]
    acting_steps: int
    planning_time: float
    acting_time: float
    dispatches: int
    planner_calls: list[dict] = field(default_factory=list)
    timeline: list[dict] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.root_status == "done"

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "scenario": self.scenario,
            "seed": self.seed,
            "budget": self.budget,
            "root_status": self.root_status,
            "collected_utility": self.collected_utility,
            "objects_collected": list(self.objects_collected),
            "collected": self.collected,
            "acting_steps": self.acting_steps,
            "dispatches": self.dispatches,
            "planner_calls": [
                {k: v for k, v in call.items() if k != "records" and (timing or k != "wall")}
                for call in self.planner_calls
            ],
        }
        if timing:
            out["planning_time"] = self.planning_time
            out["acting_time"] = self.acting_time
        return out

    def summary(self) -> str:
        got, total = self.objects_collected
        return (f"{self.scenario} seed={self.seed}: {self.root_status}, utility {self.collected_utility:.2f}, "
                f"objects {got}/{total}, acting time {self.acting_steps} steps ({self.acting_time:.2f}s), "
                f"planning {self.planning_time:.2f}s over {len(self.planner_calls)} calls")


@dataclass
class Trial:
    """A finished trial plus the live objects, for inspection in tests."""

    report: TrialReport
    engine: ActingEngine
    executor: Executor
    trace: TraceLog


def run(scenario: Scenario, seed: int = 0, budget: Optional[int] = None, log_dir=None,
        threaded: bool = True, max_steps: int = 100_000) -> Trial:
    budget = budget if budget is not None else scenario.planner.rollouts
    domain = build_collection_domain(scenario)
    planner = Planner(domain, scenario, exploration_c=scenario.planner.exploration_c,
                      depth_limit=scenario.planner.depth_limit)
    queues = QueueTriple()
    log_dir = Path(log_dir) if log_dir else None
    if log_dir:
        log_dir.mkdir(parents=True, exist_ok=True)
    trace = TraceLog(log_dir / "trace.jsonl" if log_dir else None)
    engine = ActingEngine(domain, scenario, planner, queues, seed=seed, budget=budget, trace=trace)
    executor = Executor(scenario, domain.commands, queues, seed=seed)

    worker = None
    if threaded:
        worker = threading.Thread(target=executor.serve, name="executor", daemon=True)
        worker.start()
    began = time.perf_counter()
    try:
        trace.write("trial", 0, scenario=scenario.raw, seed=seed, budget=budget)
        engine.submit_task(TaskSignature("collect_all_objs", (scenario.robot_id,)))
        for _ in range(max_steps):
            engine.engine_step()
            if engine.idle():
                break
            if engine.awaiting_status():
                if threaded:
                    engine.wait_for_status(timeout=10.0)
                else:
                    executor.step()
        else:
            raise RuntimeError(f"trial did not settle within {max_steps} engine steps")
    finally:
        if worker is not None:
            queues.command_queue.put(None)
            worker.join(timeout=10.0)
        trace.close()
    acting_wall = time.perf_counter() - began

    root = engine.finished[0] if engine.finished else None
    target = scenario.target_table
    delivered = sorted(o for o in executor.truth.collected.get(target, ()) if o in scenario.collectible())
    report = TrialReport(
        scenario=scenario.name,
        seed=seed,
        budget=budget,
        root_status=root.status if root else "incomplete",
        collected_utility=utility(engine.executed, scenario.utility_params()),
        objects_collected=(len(delivered), len(scenario.collectible())),
        collected=delivered,
        acting_steps=engine.state.time_passed,
        planning_time=engine.planning_time,
        acting_time=acting_wall,
        dispatches=len(engine.executed),
        planner_calls=engine.planner_calls,
        timeline=trace.events(),
    )
    if log_dir:
        (log_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        with open(log_dir / "rollouts.jsonl", "w") as fh:
            for call in engine.planner_calls:
                fh.write(json.dumps({k: v for k, v in call.items() if k != "wall"}, sort_keys=True) + "\n")
        with open(log_dir / "timing.jsonl", "w") as fh:
            for call in engine.planner_calls:
                fh.write(json.dumps({"call": call["call"], "wall": call["wall"]}) + "\n")
    return Trial(report, engine, executor, trace)


def run_trial(scenario_path, seed: int = 0, budget: Optional[int] = None,
              overrides: Optional[Mapping] = None, log_dir=None, threaded: bool = True) -> TrialReport:
    return run(load_scenario(scenario_path, overrides), seed, budget, log_dir, threaded).report


# --- rollout logs -----------------------------------------------------

HEATMAP_FIELDS = ("call", "task", "cluster", "size", "utility", "success", "clusters_in_call")


class LogError(ValueError):
    pass


def read_rollout_log(path) -> list[dict]:
    calls = []
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise LogError(f"no such log: {path}") from None
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            call = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogError(f"{path}:{n}: not JSON ({exc.msg})") from None
        if not isinstance(call, dict) or "clusters" not in call or "call" not in call:
            raise LogError(f"{path}:{n}: not a planner-call record")
        calls.append(call)
    return calls


def emit_heatmap_data(calls) -> str:
    """CSV with one row per (planner call, rollout cluster)."""
    if isinstance(calls, (str, Path)):
        calls = read_rollout_log(calls)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEATMAP_FIELDS)
    for call in calls:
        clusters = call["clusters"]
        task = " ".join(str(a) for a in call.get("task", ()))
        for i, c in enumerate(clusters):
            writer.writerow([call["call"], task, i, c["size"], repr(float(c["utility"])),
                             int(bool(c["success"])), len(clusters)])
    return buf.getvalue()


# --- replay -------------------------------------------------------------


@dataclass
class ReplayResult:
    commands: int
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def replay(trace_path, scenario: Optional[Scenario] = None) -> ReplayResult:
    """Re-fold every recorded status into a fresh belief and re-check invariants.

    Checks queue protocol (statuses only for known dispatches, one terminal each),
    state invariants after every fold and that time advanced by the recorded costs.
    """
    violations = []
    try:
        lines = Path(trace_path).read_text().splitlines()
        events = [json.loads(line) for line in lines if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise LogError(f"cannot read trace {trace_path}: {exc}") from None
    if scenario is None:
        header = next((e for e in events if e["event"] == "trial"), None)
        if header is None:
            raise LogError("trace has no trial header; pass the scenario explicitly")
        scenario = scenario_from_dict(header["scenario"])
    state = scenario.initial_belief()
    dispatched = {}
    terminal = set()
    count = 0
    for ev in events:
        if ev["event"] == "dispatch":
            if ev["dispatch"] in dispatched:
                violations.append(f"seq {ev['seq']}: dispatch id {ev['dispatch']} reused")
            dispatched[ev["dispatch"]] = ev
        elif ev["event"] == "status":
            did = ev["dispatch"]
            if did not in dispatched:
                violations.append(f"seq {ev['seq']}: status for unknown dispatch {did}")
                continue
            if did in terminal:
                violations.append(f"seq {ev['seq']}: second terminal status for dispatch {did}")
            terminal.add(did)
            delta = StateDelta.from_dict(ev["delta"])
            apply_delta(state, delta, scenario.geometry)
            count += 1
            if state.time_passed != ev["t"]:
                violations.append(f"seq {ev['seq']}: time {state.time_passed} != recorded {ev['t']}")
            for p in check_invariants(state):
                violations.append(f"seq {ev['seq']}: {p}")
    open_ids = sorted(set(dispatched) - terminal)
    if open_ids:
        violations.append(f"dispatches without terminal status: {open_ids}")
    return ReplayResult(count, violations)
