"""Acting engine: refines submitted tasks online and dispatches commands.

The engine keeps a belief ``WorldState`` that it updates only from status
messages. Bodies run as generators; a body is suspended while its command is
outstanding so other agenda entries can make progress in the meantime.
"""

from __future__ import annotations

import json
import logging
import queue
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .executor import FAILURE, RUNNING, SUCCESS
from .planner import Planner, cluster_rollouts
from .refinement import Command, Domain, MethodInstance, RefinementNode, TaskSignature, applicable_instances
from .state import StateDelta, WorldState, apply_delta, check_invariants
from .utility import TraceStep

log = logging.getLogger(__name__)


class EngineFault(RuntimeError):
    """Inconsistent queue traffic or a belief that diverged from the executor."""


class UnknownTask(ValueError):
    pass


class QueueTriple:
    """The three FIFO channels shared between user, engine and executor."""

    def __init__(self):
        self.task_queue: queue.Queue = queue.Queue()
        self.command_queue: queue.Queue = queue.Queue()
        self.status_queue: queue.Queue = queue.Queue()


class TraceLog:
    """Event log written as JSON lines; wall-clock stamps live in a separate list."""

    def __init__(self, path=None, wall_clock: bool = False):
        self.lines: list[str] = []
        self.timing: list[float] = []
        self.wall_clock = wall_clock
        self._fh = open(path, "w") if path else None
        self._t0 = time.perf_counter()

    def write(self, event: str, clock: int, **fields) -> None:
        record = {"seq": len(self.lines), "event": event, "t": clock}
        record.update(fields)
        if self.wall_clock:
            record["wall"] = round(time.perf_counter() - self._t0, 6)
        line = json.dumps(record, sort_keys=True)
        self.lines.append(line)
        self.timing.append(time.perf_counter() - self._t0)
        if self._fh:
            self._fh.write(line + "\n")

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None

    def events(self, name: Optional[str] = None) -> list[dict]:
        out = [json.loads(line) for line in self.lines]
        return out if name is None else [e for e in out if e["event"] == name]


@dataclass
class TaskFrame:
    task: TaskSignature
    node: RefinementNode
    instance: Optional[MethodInstance] = None
    body: object = None
    tried: list = field(default_factory=list)
    attempts: Counter = field(default_factory=Counter)
    method_node: Optional[RefinementNode] = None


@dataclass
class AgendaEntry:
    id: int
    root: TaskSignature
    tree: RefinementNode
    stack: list = field(default_factory=list)
    waiting: Optional[int] = None
    started: bool = False
    status: str = "active"  # active | done | failed


@dataclass
class StepReport:
    admitted: int = 0
    statuses: int = 0
    dispatched: int = 0
    finished: list = field(default_factory=list)


class ActingEngine:
    def __init__(self, domain: Domain, scenario, planner: Planner, queues: QueueTriple,
                 seed: int = 0, budget: int = 100, trace: Optional[TraceLog] = None,
                 check_reports: bool = True):
        self.domain = domain
        self.scenario = scenario
        self.planner = planner
        self.queues = queues
        self.budget = budget
        self.rng = random.Random(f"engine:{seed}")
        self.trace = trace if trace is not None else TraceLog()
        self.check_reports = check_reports
        self.state: WorldState = scenario.initial_belief()
        self.agenda: list[AgendaEntry] = []
        self.finished: list[AgendaEntry] = []
        self.executed: list[TraceStep] = []
        self.planner_calls: list[dict] = []
        self.planning_time = 0.0
        self._next_entry = 0
        self._next_dispatch = 0
        self._dispatched: dict[int, AgendaEntry] = {}
        self._commands: dict[int, Command] = {}
        self._terminal: set[int] = set()
        self._inbox: dict[int, dict] = {}
        self._pending: list[dict] = []

    # --- user side ----------------------------------------------------

    def submit_task(self, task: TaskSignature) -> bool:
        arity = self.domain.tasks.get(task.name)
        if arity is None:
            raise UnknownTask(f"unknown task {task.name!r}")
        if arity != len(task.args):
            raise UnknownTask(f"task {task.name} takes {arity} arguments, got {len(task.args)}")
        self.queues.task_queue.put(task)
        return True

    # --- main loop ----------------------------------------------------

    @property
    def clock(self) -> int:
        return self.state.time_passed

    def idle(self) -> bool:
        return not self.agenda and self.queues.task_queue.empty()

    def awaiting_status(self) -> bool:
        return any(e.waiting is not None and e.waiting not in self._inbox for e in self.agenda)

    def wait_for_status(self, timeout: Optional[float] = None) -> bool:
        """Block until one status message arrives; it is consumed by the next step."""
        try:
            msg = self.queues.status_queue.get(timeout=timeout)
        except queue.Empty:
            return False
        self._pending.append(msg)
        return True

    def engine_step(self) -> StepReport:
        report = StepReport()
        while True:
            try:
                root = self.queues.task_queue.get_nowait()
            except queue.Empty:
                break
            entry = AgendaEntry(self._next_entry, root, RefinementNode("task", str(root)))
            self._next_entry += 1
            self.agenda.append(entry)
            report.admitted += 1
            self.trace.write("admit", self.clock, entry=entry.id, task=root.to_list())
        report.statuses = self._drain()
        for entry in list(self.agenda):
            before = self._next_dispatch
            self._progress(entry)
            report.dispatched += self._next_dispatch - before
            if entry.status != "active":
                self.agenda.remove(entry)
                self.finished.append(entry)
                report.finished.append(entry)
        return report

    def _drain(self) -> int:
        count = 0
        while True:
            if self._pending:
                msg = self._pending.pop(0)
            else:
                try:
                    msg = self.queues.status_queue.get_nowait()
                except queue.Empty:
                    return count
            count += 1
            did = msg.get("dispatch_id")
            if did not in self._dispatched:
                raise EngineFault(f"status for unknown dispatch id {did}")
            status = msg.get("status")
            if status == RUNNING:
                continue
            if status not in (SUCCESS, FAILURE):
                raise EngineFault(f"dispatch {did}: unknown status {status!r}")
            if did in self._terminal:
                raise EngineFault(f"second terminal status for dispatch {did}")
            self._terminal.add(did)
            self._inbox[did] = msg

    def _progress(self, entry: AgendaEntry) -> None:
        if not entry.started:
            entry.started = True
            ok = self._open(entry, entry.root, entry.tree)
            self._advance(entry, ok)
            return
        if entry.waiting is None:
            return
        msg = self._inbox.pop(entry.waiting, None)
        if msg is None:
            return  # still running
        entry.waiting = None
        ok = self._fold(msg)
        self._advance(entry, ok)

    def _fold(self, msg: dict) -> bool:
        did = msg["dispatch_id"]
        cmd = self._commands[did]
        delta = StateDelta.from_dict(msg.get("delta", {}))
        newly = apply_delta(self.state, delta, self.scenario.geometry)
        ok = msg["status"] == SUCCESS
        self.executed.append(TraceStep(cmd.name, delta.cost, tuple(newly)))
        fields = {"dispatch": did, "status": msg["status"], "delta": delta.to_dict()}
        if msg.get("reason"):
            fields["reason"] = msg["reason"]
        if newly:
            fields["collected"] = newly
        self.trace.write("status", self.clock, **fields)
        problems = check_invariants(self.state)
        if problems:
            raise EngineFault(f"belief invariant violated after dispatch {did}: {problems}")
        report = msg.get("report")
        if self.check_reports and report is not None:
            mine = {
                "robot_pose": self.state.robot_pose.to_list(),
                "holding": self.state.holding,
                "arm_joints": list(self.state.arm_joints),
                "time_passed": self.state.time_passed,
            }
            if json.dumps(mine, sort_keys=True) != json.dumps(report, sort_keys=True):
                raise EngineFault(f"belief diverged from executor after dispatch {did}: {mine} != {report}")
        return ok

    def _advance(self, entry: AgendaEntry, ok: bool) -> None:
        """Run bodies until a command is dispatched or the root finishes; ``ok`` is the last step's outcome."""
        while True:
            if not entry.stack:
                entry.status = "done" if ok else "failed"
                self.trace.write("root-" + entry.status, self.clock, entry=entry.id, task=entry.root.to_list())
                return
            frame = entry.stack[-1]
            if not ok:
                if not self.retry(entry, frame):
                    continue  # frame popped; failure reaches the parent
            try:
                step = frame.body.send(None)
            except StopIteration:
                entry.stack.pop()
                self.trace.write("method-done", self.clock, entry=entry.id, method=frame.instance.label())
                ok = True
                continue
            if isinstance(step, Command):
                self._dispatch(entry, frame, step)
                return
            child = frame.method_node.add("task", str(step.signature()))
            ok = self._open(entry, step.signature(), child)

    def _dispatch(self, entry: AgendaEntry, frame: TaskFrame, cmd: Command) -> None:
        if cmd.name not in self.domain.commands:
            raise EngineFault(f"method {frame.instance.label()} issued unknown command {cmd.name}")
        did = self._next_dispatch
        self._next_dispatch += 1
        self._dispatched[did] = entry
        self._commands[did] = cmd
        entry.waiting = did
        frame.method_node.add("command", str(cmd))
        self.trace.write("dispatch", self.clock, entry=entry.id, dispatch=did, command=cmd.name,
                         args=list(cmd.args))
        self.queues.command_queue.put({"dispatch_id": did, "command": cmd.name, "args": list(cmd.args)})

    # --- refinement ---------------------------------------------------

    def _open(self, entry: AgendaEntry, task: TaskSignature, node: RefinementNode) -> bool:
        candidates = applicable_instances(task, self.state, self.domain)
        if not candidates:
            node.note = "no applicable method"
            self.trace.write("task-failed", self.clock, entry=entry.id, task=task.to_list(),
                             reason="no applicable method")
            return False
        frame = TaskFrame(task, node)
        entry.stack.append(frame)
        self._start(entry, frame, self.plan_at_choice_point(task, self.state, candidates))
        return True

    def _start(self, entry: AgendaEntry, frame: TaskFrame, inst: MethodInstance) -> None:
        frame.instance = inst
        frame.attempts[inst] += 1
        frame.body = inst.start(self.state)
        note = f"attempt {frame.attempts[inst]}" if frame.attempts[inst] > 1 else ""
        frame.method_node = frame.node.add("method", inst.label(), note)
        self.trace.write("method", self.clock, entry=entry.id, task=frame.task.to_list(),
                         method=inst.label(), attempt=frame.attempts[inst])

    def retry(self, entry: AgendaEntry, frame: TaskFrame) -> bool:
        """Re-attempt, switch instance or fail the task node. True when a body is ready to run."""
        if frame.body is not None:
            frame.body.close()
        inst = frame.instance
        if frame.attempts[inst] <= inst.retry_count:
            self.trace.write("retry", self.clock, entry=entry.id, action="reattempt", method=inst.label(),
                             attempt=frame.attempts[inst] + 1)
            self._start(entry, frame, inst)
            return True
        frame.tried.append(inst)
        remaining = [c for c in applicable_instances(frame.task, self.state, self.domain) if c not in frame.tried]
        if remaining:
            choice = self.plan_at_choice_point(frame.task, self.state, remaining)
            self.trace.write("retry", self.clock, entry=entry.id, action="switch", method=inst.label(),
                             to=choice.label())
            self._start(entry, frame, choice)
            return True
        self.trace.write("retry", self.clock, entry=entry.id, action="fail", task=frame.task.to_list())
        frame.node.note = "failed"
        entry.stack.pop()
        return False

    def plan_at_choice_point(self, task: TaskSignature, state: WorldState, candidates) -> MethodInstance:
        seed = self.rng.getrandbits(64)
        began = time.perf_counter()
        choice, records = self.planner.select_method_instance(task, state, self.budget, random.Random(seed),
                                                              candidates)
        elapsed = time.perf_counter() - began
        self.planning_time += elapsed
        clusters = cluster_rollouts(records)
        defaulted = choice is None
        if defaulted:
            choice = candidates[0]
        index = len(self.planner_calls)
        self.planner_calls.append({
            "call": index,
            "task": task.to_list(),
            "t": state.time_passed,
            "candidates": [c.label() for c in candidates],
            "choice": choice.label(),
            "default": defaulted,
            "budget": self.budget,
            "clusters": [c.to_dict() for c in clusters],
            "records": [{"path": r.path_key(), "utility": r.utility, "terminated_by": r.terminated_by}
                        for r in records],
            "wall": elapsed,
        })
        self.trace.write("plan", self.clock, call=index, task=task.to_list(), choice=choice.label(),
                         default=defaulted, candidates=len(candidates), clusters=len(clusters))
        return choice
