"""Shared world state used identically by the actor, the planner and the executor.

Symbolic facts are tuples ``("on", obj, table)`` and ``("in", obj, box)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .geometry import Pose2D, in_rectangle

TOOL = "tool"
BOX = "box"
TABLE_FIXTURE = "table-fixture"
OBJECT_CLASSES = (TOOL, BOX, TABLE_FIXTURE)

Fact = tuple  # ("on" | "in", subject, container)


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    cls: str
    reward: float
    success_probability: float
    bounding_box: tuple[float, float, float]
    true_pose: Optional[Pose2D] = None
    detection_confidence: float = 1.0

    def __post_init__(self):
        if self.cls not in OBJECT_CLASSES:
            raise ValueError(f"object {self.id}: unknown class {self.cls!r}")
        if self.reward < 0:
            raise ValueError(f"object {self.id}: negative reward")
        if self.cls == BOX and self.reward != 0:
            raise ValueError(f"object {self.id}: a box carries no reward")
        if not 0.0 <= self.success_probability <= 1.0:
            raise ValueError(f"object {self.id}: success_probability outside [0, 1]")
        if any(e <= 0 for e in self.bounding_box):
            raise ValueError(f"object {self.id}: bounding box extents must be positive")


@dataclass(frozen=True)
class TableSpec:
    id: str
    center: Pose2D
    extents: tuple[float, float]
    base_pose: Pose2D

    def contains(self, x: float, y: float) -> bool:
        return in_rectangle(x, y, self.center.x, self.center.y, *self.extents)


@dataclass(frozen=True)
class ScenarioGeometry:
    tables: Mapping[str, TableSpec]
    target_table: str
    time_limit: int
    table_height: float = 0.75
    # box id -> (width, depth) footprint
    box_footprints: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.target_table not in self.tables:
            raise ValueError(f"target table {self.target_table!r} is not a known table")
        if self.time_limit < 1:
            raise ValueError("time_limit must be a positive integer")
        bases = [(t.base_pose.x, t.base_pose.y, t.base_pose.theta) for t in self.tables.values()]
        if len(set(bases)) != len(bases):
            raise ValueError("table base poses must be distinct")

    def base(self, table: str) -> Pose2D:
        return self.tables[table].base_pose

    def source_tables(self) -> list[str]:
        return [t for t in self.tables if t != self.target_table]

    def location_of(self, pose: Pose2D) -> str:
        """Table whose docking pose the robot occupies, else ``"elsewhere"``."""
        for tid, table in self.tables.items():
            if table.base_pose.same_place(pose, 1e-6):
                return tid
        return "elsewhere"


@dataclass
class WorldState:
    robot_pose: Pose2D
    object_poses: dict[str, Optional[Pose2D]]
    classifications: dict[str, str]
    symbolic_facts: frozenset = frozenset()
    holding: Optional[str] = None
    not_visited: set[str] = field(default_factory=set)
    collected: dict[str, set[str]] = field(default_factory=dict)
    arm_joints: tuple[float, float] = (0.0, 0.0)
    time_passed: int = 0

    def snapshot(self) -> "WorldState":
        """Independent copy; poses and facts are immutable so a shallow copy of containers suffices."""
        return WorldState(
            robot_pose=self.robot_pose,
            object_poses=dict(self.object_poses),
            classifications=dict(self.classifications),
            symbolic_facts=self.symbolic_facts,
            holding=self.holding,
            not_visited=set(self.not_visited),
            collected={k: set(v) for k, v in self.collected.items()},
            arm_joints=self.arm_joints,
            time_passed=self.time_passed,
        )

    def digest(self) -> int:
        return hash((
            self.robot_pose,
            tuple(sorted(self.object_poses.items(), key=lambda kv: kv[0])),
            self.symbolic_facts,
            self.holding,
            frozenset(self.not_visited),
            tuple(sorted((k, frozenset(v)) for k, v in self.collected.items())),
            self.arm_joints,
            self.time_passed,
        ))

    # --- fact queries -------------------------------------------------

    def on_table(self, table: str) -> list[str]:
        return sorted(f[1] for f in self.symbolic_facts if f[0] == "on" and f[2] == table)

    def contents(self, box: str) -> list[str]:
        return sorted(f[1] for f in self.symbolic_facts if f[0] == "in" and f[2] == box)

    def table_of(self, obj: str) -> Optional[str]:
        """Table the object rests on, directly or through the box containing it."""
        for f in self.symbolic_facts:
            if f[1] == obj:
                if f[0] == "on":
                    return f[2]
                return self.table_of(f[2])
        return None

    def pose_known(self, obj: str) -> bool:
        return self.object_poses.get(obj) is not None

    def to_dict(self) -> dict:
        return {
            "robot_pose": self.robot_pose.to_list(),
            "object_poses": {
                k: (v.to_list() if v is not None else None) for k, v in sorted(self.object_poses.items())
            },
            "classifications": dict(sorted(self.classifications.items())),
            "symbolic_facts": sorted(list(f) for f in self.symbolic_facts),
            "holding": self.holding,
            "not_visited": sorted(self.not_visited),
            "collected": {k: sorted(v) for k, v in sorted(self.collected.items())},
            "arm_joints": list(self.arm_joints),
            "time_passed": self.time_passed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "WorldState":
        return cls(
            robot_pose=Pose2D.from_seq(data["robot_pose"]),
            object_poses={
                k: (Pose2D.from_seq(v) if v is not None else None) for k, v in data["object_poses"].items()
            },
            classifications=dict(data["classifications"]),
            symbolic_facts=frozenset(tuple(f) for f in data["symbolic_facts"]),
            holding=data["holding"],
            not_visited=set(data["not_visited"]),
            collected={k: set(v) for k, v in data["collected"].items()},
            arm_joints=tuple(data["arm_joints"]),
            time_passed=int(data["time_passed"]),
        )


def snapshot(state: WorldState) -> WorldState:
    return state.snapshot()


def derive_symbolic_facts(state: WorldState, geometry: ScenarioGeometry) -> frozenset:
    """Recompute on/in facts from poses.

    An object inside a box gets ``in(o, b)`` only; the box carries the ``on`` fact.
    Held objects and objects with unknown pose produce nothing.
    """
    boxes = []
    for b, (w, d) in sorted(geometry.box_footprints.items()):
        pose = state.object_poses.get(b)
        if pose is not None:
            boxes.append((b, pose, w, d))

    facts = set()
    for obj, pose in state.object_poses.items():
        if pose is None or obj == state.holding:
            continue
        container = None
        if state.classifications.get(obj) != BOX:
            for b, bpose, w, d in boxes:
                if in_rectangle(pose.x, pose.y, bpose.x, bpose.y, w, d):
                    container = b
                    break
        if container is not None:
            facts.add(("in", obj, container))
            continue
        for tid, table in geometry.tables.items():
            if table.contains(pose.x, pose.y):
                facts.add(("on", obj, tid))
                break
    return frozenset(facts)


_KEEP = "__keep__"


@dataclass
class StateDelta:
    """Change produced by one command; applied identically by simulator and engine.

    ``object_poses`` are physical relocations; ``observed_poses`` come from perception
    and are skipped when the delta is applied to ground truth.
    """

    cost: int = 0
    robot_pose: Optional[Pose2D] = None
    holding: object = _KEEP
    arm_joints: Optional[tuple[float, float]] = None
    object_poses: dict[str, Pose2D] = field(default_factory=dict)
    observed_poses: dict[str, Pose2D] = field(default_factory=dict)
    collected: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def sets_holding(self) -> bool:
        return self.holding != _KEEP

    def to_dict(self) -> dict:
        out: dict = {"cost": self.cost}
        if self.robot_pose is not None:
            out["robot_pose"] = self.robot_pose.to_list()
        if self.sets_holding:
            out["holding"] = self.holding
        if self.arm_joints is not None:
            out["arm_joints"] = list(self.arm_joints)
        if self.object_poses:
            out["object_poses"] = {k: v.to_list() for k, v in sorted(self.object_poses.items())}
        if self.observed_poses:
            out["observed_poses"] = {k: v.to_list() for k, v in sorted(self.observed_poses.items())}
        if self.collected:
            out["collected"] = {k: sorted(v) for k, v in sorted(self.collected.items())}
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "StateDelta":
        return cls(
            cost=int(data.get("cost", 0)),
            robot_pose=Pose2D.from_seq(data["robot_pose"]) if "robot_pose" in data else None,
            holding=data["holding"] if "holding" in data else _KEEP,
            arm_joints=tuple(data["arm_joints"]) if "arm_joints" in data else None,
            object_poses={k: Pose2D.from_seq(v) for k, v in data.get("object_poses", {}).items()},
            observed_poses={k: Pose2D.from_seq(v) for k, v in data.get("observed_poses", {}).items()},
            collected={k: tuple(v) for k, v in data.get("collected", {}).items()},
        )


def apply_delta(state: WorldState, delta: StateDelta, geometry: ScenarioGeometry,
                observations: bool = True) -> list[str]:
    """Apply ``delta`` in place, re-derive facts, return objects newly collected on the target."""
    state.time_passed += delta.cost
    if delta.robot_pose is not None:
        state.robot_pose = delta.robot_pose
    if delta.sets_holding:
        state.holding = delta.holding
    if delta.arm_joints is not None:
        state.arm_joints = delta.arm_joints
    if observations:
        state.object_poses.update(delta.observed_poses)
    state.object_poses.update(delta.object_poses)
    newly = []
    for table, objs in delta.collected.items():
        bucket = state.collected.setdefault(table, set())
        for o in objs:
            if o not in bucket:
                bucket.add(o)
                if table == geometry.target_table:
                    newly.append(o)
    state.symbolic_facts = derive_symbolic_facts(state, geometry)
    return sorted(newly)


def state_difference(before: WorldState, after: WorldState) -> dict:
    """Structural diff of two states, field by field."""
    a, b = before.to_dict(), after.to_dict()
    diff = {}
    for key in a:
        if key == "object_poses":
            changed = {o: b[key].get(o) for o in set(a[key]) | set(b[key]) if a[key].get(o) != b[key].get(o)}
            if changed:
                diff[key] = dict(sorted(changed.items()))
        elif a[key] != b[key]:
            diff[key] = b[key]
    return diff


def check_invariants(state: WorldState) -> list[str]:
    """Return a description of every violated state invariant (empty when consistent)."""
    problems = []
    per_object: dict[str, list] = {}
    for f in state.symbolic_facts:
        per_object.setdefault(f[1], []).append(f)
        if f[0] == "in" and state.classifications.get(f[2]) != BOX:
            problems.append(f"in({f[1]}, {f[2]}) but {f[2]} is not a box")
    for obj, facts in per_object.items():
        if len(facts) > 1:
            problems.append(f"{obj} has {len(facts)} location facts: {sorted(facts)}")
    if state.holding is not None and state.holding in per_object:
        problems.append(f"held object {state.holding} still has location facts")
    if state.time_passed < 0:
        problems.append("negative time counter")
    return problems
