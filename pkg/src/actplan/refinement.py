"""Hierarchical operational models: tasks, refinement methods and their instances.

A method body is a generator function ``body(state, **bindings)``. It reads and
assigns the live state directly and yields :class:`Command` or :class:`Subtask`
steps; whoever drives the generator (the acting engine or the planner's
simulated engine) resumes it only after the step succeeded. A failed step
closes the generator, so the body never observes its own failures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Optional, Protocol, Sequence

from .state import WorldState


@dataclass(frozen=True)
class TaskSignature:
    name: str
    args: tuple = ()

    def __str__(self):
        return f"{self.name}({', '.join(map(str, self.args))})"

    def to_list(self) -> list:
        return [self.name, *self.args]


@dataclass(frozen=True)
class Command:
    name: str
    args: tuple = ()

    def __str__(self):
        return f"{self.name}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Subtask:
    name: str
    args: tuple = ()

    def signature(self) -> TaskSignature:
        return TaskSignature(self.name, self.args)


def task(name: str, *args) -> Subtask:
    return Subtask(name, tuple(args))


def command(name: str, *args) -> Command:
    return Command(name, tuple(args))


Step = Command | Subtask
Body = Callable[..., Iterator[Step]]
ParamsFn = Callable[..., Mapping[str, Sequence]]


def _always(state, bindings) -> bool:
    return True


@dataclass(frozen=True, eq=False)
class MethodDefinition:
    name: str
    task: str
    task_params: tuple[str, ...]
    body: Body
    params: Optional[ParamsFn] = None
    precondition: Callable[[WorldState, Mapping], bool] = _always
    retry_count: int = 0

    def __post_init__(self):
        if self.retry_count < 0:
            raise ValueError("retry_count must be non-negative")

    def __repr__(self):
        return f"MethodDefinition({self.name})"


@dataclass(frozen=True)
class MethodInstance:
    definition: MethodDefinition
    bindings: tuple[tuple[str, object], ...]

    @property
    def name(self) -> str:
        return self.definition.name

    @property
    def retry_count(self) -> int:
        return self.definition.retry_count

    def binding_map(self) -> dict:
        return dict(self.bindings)

    def start(self, state: WorldState) -> Iterator[Step]:
        return self.definition.body(state, **self.binding_map())

    def label(self) -> str:
        return f"{self.name}({', '.join(str(v) for _, v in self.bindings)})"

    def __str__(self):
        return self.label()


class Domain:
    """Registry of task arities, refinement methods and command models."""

    def __init__(self, name: str = "domain"):
        self.name = name
        self.tasks: dict[str, int] = {}
        self.methods: list[MethodDefinition] = []
        self.commands: dict = {}

    def declare_task(self, name: str, arity: int) -> None:
        if name in self.tasks and self.tasks[name] != arity:
            raise ValueError(f"task {name} already declared with arity {self.tasks[name]}")
        self.tasks[name] = arity

    def add_method(self, method: MethodDefinition) -> MethodDefinition:
        if method.task not in self.tasks:
            raise ValueError(f"method {method.name} refines undeclared task {method.task}")
        if len(method.task_params) != self.tasks[method.task]:
            raise ValueError(f"method {method.name}: task arity mismatch")
        self.methods.append(method)
        return method

    def add_command(self, model) -> None:
        self.commands[model.name] = model

    def methods_for(self, task_name: str) -> list[MethodDefinition]:
        return [m for m in self.methods if m.task == task_name]

    def validate(self) -> list[str]:
        return [f"task {t} has no method" for t in self.tasks if not self.methods_for(t)]


def applicable_instances(task: TaskSignature, state: WorldState, domain: Domain) -> list[MethodInstance]:
    """All method instances for ``task`` whose precondition holds in ``state``.

    Order: registration order of definitions, then lexicographic order of the
    free-parameter values.
    """
    out = []
    for method in domain.methods_for(task.name):
        bound = dict(zip(method.task_params, task.args))
        if method.params is None:
            combos = [()]
            names: tuple = ()
        else:
            ranges = method.params(state, *task.args)
            names = tuple(ranges)
            combos = sorted(itertools.product(*(list(ranges[n]) for n in names)))
        for combo in combos:
            bindings = dict(bound)
            bindings.update(zip(names, combo))
            if method.precondition(state, bindings):
                out.append(MethodInstance(method, tuple(bindings.items())))
    return out


class EngineHandle(Protocol):
    def do_command(self, cmd: Command) -> bool: ...

    def do_subtask(self, sub: Subtask) -> bool: ...


@dataclass
class BodyOutcome:
    success: bool
    failed_step: Optional[int] = None  # 1-based index of the failing step
    steps: int = 0


def run_body(instance: MethodInstance, state: WorldState, engine: EngineHandle) -> BodyOutcome:
    """Drive a body to completion, delegating every step to ``engine``."""
    body = instance.start(state)
    index = 0
    try:
        step = next(body)
        while True:
            index += 1
            if isinstance(step, Command):
                ok = engine.do_command(step)
            else:
                ok = engine.do_subtask(step)
            if not ok:
                body.close()
                return BodyOutcome(False, index, index)
            step = body.send(None)
    except StopIteration:
        return BodyOutcome(True, None, index)


@dataclass
class RefinementNode:
    kind: str  # "task" | "method" | "command"
    label: str
    children: list["RefinementNode"] = field(default_factory=list)
    note: str = ""

    def add(self, kind: str, label: str, note: str = "") -> "RefinementNode":
        child = RefinementNode(kind, label, note=note)
        self.children.append(child)
        return child

    def shape(self) -> tuple:
        """Structural signature used to compare trees from different engines."""
        return (self.kind, self.label, tuple(c.shape() for c in self.children))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "label": self.label}
        if self.note:
            out["note"] = self.note
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out

    def render(self, indent: int = 0) -> str:
        note = f"  [{self.note}]" if self.note else ""
        lines = ["  " * indent + f"{self.kind}: {self.label}{note}"]
        lines.extend(c.render(indent + 1) for c in self.children)
        return "\n".join(lines)
