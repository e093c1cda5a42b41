"""Low-level commands of the collection domain.

Every command has a single effect implementation. The planner runs it on its
private belief copy with a noiseless sensor and sampled outcomes; the executor
runs it on ground truth with fault scripts and the noisy sensor. Feeding both
the same state therefore yields the same delta (twin consistency).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .camera import camera_pose_from_joints, frustum_contains
from .geometry import Pose2D, distance
from .state import BOX, StateDelta, WorldState, apply_delta

Args = Mapping[str, object]


@dataclass
class Sensor:
    """What perception commands are allowed to see.

    The simulated twin uses the default: nothing suppressed, no confidence
    gate, no noise.
    """

    suppressed: frozenset = frozenset()
    confidence: Mapping[str, float] = field(default_factory=dict)
    threshold: float = 0.0
    fine_sigma: float = 0.0
    coarse_sigma: float = 0.0
    rng: Optional[random.Random] = None

    def sees(self, obj: str) -> bool:
        if obj in self.suppressed:
            return False
        return self.confidence.get(obj, 1.0) >= self.threshold

    def measure(self, pose: Pose2D, fine: bool) -> Pose2D:
        sigma = self.fine_sigma if fine else self.coarse_sigma
        if sigma <= 0 or self.rng is None:
            return pose
        return Pose2D(pose.x + self.rng.gauss(0.0, sigma), pose.y + self.rng.gauss(0.0, sigma), pose.theta)


SIM_SENSOR = Sensor()

Precondition = Callable[[WorldState, object, Args], Optional[str]]
Effect = Callable[[WorldState, object, Args, Sensor], tuple[Optional[StateDelta], str]]


def _certain(scenario, args) -> float:
    return 1.0


@dataclass(frozen=True)
class CommandModel:
    name: str
    params: tuple[str, ...]
    precondition: Precondition
    effect: Effect
    probability: Callable[[object, Args], float] = _certain
    cost: int = 1

    def bind(self, args: tuple) -> dict:
        if len(args) != len(self.params):
            raise ValueError(f"{self.name} expects {len(self.params)} arguments, got {len(args)}")
        return dict(zip(self.params, args))

    def cost_in(self, scenario) -> int:
        costs = getattr(scenario, "costs", {})
        return int(costs.get(self.name, self.cost))


@dataclass
class CommandResult:
    success: bool
    delta: StateDelta
    reason: str = ""
    collected: tuple = ()


# --- helpers ---------------------------------------------------------


def _at(state: WorldState, scenario, table: str) -> bool:
    return state.robot_pose.same_place(scenario.geometry.base(table), 1e-6)


def _carried(state: WorldState, obj: str) -> list[str]:
    """The object plus anything inside it."""
    if state.classifications.get(obj) == BOX:
        return [obj, *state.contents(obj)]
    return [obj]


def _follow(state: WorldState, objs, x: float, y: float) -> dict:
    poses = {}
    for o in objs:
        old = state.object_poses.get(o)
        poses[o] = Pose2D(x, y, old.theta if old is not None else 0.0)
    return poses


def slot_pose(state: WorldState, scenario, table: str) -> Pose2D:
    """Next free placement slot on a table, from a centered grid."""
    spec = scenario.geometry.tables[table]
    spacing = scenario.slot_spacing
    w, d = spec.extents
    cols = max(1, int(w // spacing))
    rows = max(1, int(d // spacing))
    index = len(state.on_table(table)) % (cols * rows)
    col, row = index % cols, index // cols
    return Pose2D(spec.center.x + (col - (cols - 1) / 2.0) * spacing,
                  spec.center.y + (row - (rows - 1) / 2.0) * spacing, 0.0)


def _joint_problem(scenario, pan, lift) -> Optional[str]:
    lo, hi = scenario.camera.pan_range
    if not lo <= pan <= hi:
        return f"pan {pan} out of range"
    lo, hi = scenario.camera.lift_range
    if not lo <= lift <= hi:
        return f"lift {lift} out of range"
    return None


def _bbox(scenario, obj: str):
    return scenario.objects[obj].bounding_box


# --- command implementations ----------------------------------------


def _move_pre(state, sc, a):
    if a["l2"] not in sc.geometry.tables:
        return f"unknown location {a['l2']}"
    return None


def _move_effect(state, sc, a, sensor):
    base = sc.geometry.base(a["l2"])
    delta = StateDelta(robot_pose=base)
    if state.holding is not None:
        delta.object_poses = _follow(state, _carried(state, state.holding), base.x, base.y)
    return delta, ""


def _set_joints_pre(state, sc, a):
    return _joint_problem(sc, a["pan"], a["lift"])


def _set_joints_effect(state, sc, a, sensor):
    return StateDelta(arm_joints=(a["pan"], a["lift"])), ""


def _arm_pose_pre(state, sc, a):
    if a["arm_pose"] not in sc.postures():
        return f"unknown arm posture {a['arm_pose']}"
    return None


def _arm_pose_effect(state, sc, a, sensor):
    return StateDelta(arm_joints=tuple(sc.postures()[a["arm_pose"]])), ""


def _perceive_table_pre(state, sc, a):
    if a["tb"] not in sc.geometry.tables:
        return f"unknown table {a['tb']}"
    if not _at(state, sc, a["tb"]):
        return f"robot is not at {a['tb']}"
    return _joint_problem(sc, a["pan"], a["lift"])


def _perceive_table_effect(state, sc, a, sensor):
    cam = camera_pose_from_joints(a["pan"], a["lift"], state.robot_pose, sc.camera)
    seen = {}
    z = sc.geometry.table_height
    for obj in sorted(state.object_poses):
        pose = state.object_poses[obj]
        if pose is None or obj == state.holding or state.table_of(obj) != a["tb"]:
            continue
        if not sensor.sees(obj):
            continue
        if frustum_contains(cam, sc.camera, pose, _bbox(sc, obj), z):
            seen[obj] = sensor.measure(pose, fine=False)
    return StateDelta(arm_joints=(a["pan"], a["lift"]), observed_poses=seen), ""


def _read_pose_pre(state, sc, a):
    obj = a["o"]
    if obj not in sc.objects:
        return f"unknown object {obj}"
    if state.object_poses.get(obj) is None:
        return f"no approximate pose for {obj}"
    if state.holding == obj:
        return f"{obj} is in the gripper"
    return _joint_problem(sc, a["pan"], a["lift"])


def _read_pose_effect(state, sc, a, sensor):
    obj = a["o"]
    pose = state.object_poses[obj]
    cam = camera_pose_from_joints(a["pan"], a["lift"], state.robot_pose, sc.camera)
    if not frustum_contains(cam, sc.camera, pose, _bbox(sc, obj), sc.geometry.table_height):
        return None, f"{obj} not fully inside the camera frustum"
    if not sensor.sees(obj):
        return None, f"{obj} not detected"
    return StateDelta(observed_poses={obj: sensor.measure(pose, fine=True)}), ""


def _grasp_pre(state, sc, a):
    obj, table = a["o"], a["from_what"]
    if state.holding is not None:
        return f"gripper already holds {state.holding}"
    pose = state.object_poses.get(obj)
    if pose is None:
        return f"pose of {obj} unknown"
    if ("on", obj, table) not in state.symbolic_facts:
        return f"{obj} is not on {table}"
    if not _at(state, sc, table):
        return f"robot is not at {table}"
    if distance(state.robot_pose, pose) > sc.reach_radius:
        return f"{obj} out of reach"
    return None


def _grasp_probability(sc, a) -> float:
    return sc.objects[a["o"]].success_probability


def _grasp_effect(state, sc, a, sensor):
    r = state.robot_pose
    return StateDelta(holding=a["o"], object_poses=_follow(state, _carried(state, a["o"]), r.x, r.y)), ""


def _place_pre(state, sc, a):
    if state.holding != a["o"]:
        return f"not holding {a['o']}"
    if a["on_what"] not in sc.geometry.tables:
        return f"unknown table {a['on_what']}"
    if not _at(state, sc, a["on_what"]):
        return f"robot is not at {a['on_what']}"
    return None


def _place_effect(state, sc, a, sensor):
    obj, table = a["o"], a["on_what"]
    slot = slot_pose(state, sc, table)
    carried = _carried(state, obj)
    return StateDelta(
        holding=None,
        object_poses=_follow(state, carried, slot.x, slot.y),
        collected={table: tuple(carried)},
    ), ""


def _store_pre(state, sc, a):
    obj, box, table = a["o"], a["box"], a["tb"]
    if state.holding != obj:
        return f"not holding {obj}"
    if obj == box or state.classifications.get(box) != BOX:
        return f"{box} is not a box"
    if state.classifications.get(obj) == BOX:
        return "boxes cannot be nested"
    if ("on", box, table) not in state.symbolic_facts:
        return f"{box} is not on {table}"
    if not _at(state, sc, table):
        return f"robot is not at {table}"
    return None


def _store_effect(state, sc, a, sensor):
    box_pose = state.object_poses[a["box"]]
    return StateDelta(holding=None, object_poses=_follow(state, [a["o"]], box_pose.x, box_pose.y)), ""


def collection_commands() -> list[CommandModel]:
    return [
        CommandModel("move", ("r", "l1", "l2"), _move_pre, _move_effect, cost=5),
        CommandModel("read_current_pose", ("r", "o", "pan", "lift"), _read_pose_pre, _read_pose_effect, cost=1),
        CommandModel("grasp", ("r", "o", "from_what"), _grasp_pre, _grasp_effect, _grasp_probability, cost=4),
        CommandModel("perceive_table", ("r", "tb", "pan", "lift"), _perceive_table_pre, _perceive_table_effect,
                     cost=3),
        CommandModel("move_arm_to_pose", ("r", "arm_pose"), _arm_pose_pre, _arm_pose_effect, cost=2),
        CommandModel("set_arm_joints", ("r", "pan", "lift"), _set_joints_pre, _set_joints_effect, cost=1),
        CommandModel("place", ("r", "o", "on_what"), _place_pre, _place_effect, cost=4),
        CommandModel("store_object", ("r", "tb", "o", "box"), _store_pre, _store_effect, cost=4),
    ]


# --- the simulated twin ---------------------------------------------


def simulate_inplace(model: CommandModel, args: tuple, state: WorldState, scenario,
                     rng: random.Random, sensor: Sensor = SIM_SENSOR) -> CommandResult:
    """Sample one outcome and apply it to ``state`` (which must be a private copy)."""
    a = model.bind(args)
    cost = model.cost_in(scenario)
    reason = model.precondition(state, scenario, a)
    if reason is None:
        p = model.probability(scenario, a)
        if p < 1.0 and rng.random() >= p:
            reason = "sampled failure"
    delta = None
    if reason is None:
        delta, reason = model.effect(state, scenario, a, sensor)
    if delta is None:
        state.time_passed += cost
        return CommandResult(False, StateDelta(cost=cost), reason)
    delta.cost = cost
    newly = apply_delta(state, delta, scenario.geometry)
    return CommandResult(True, delta, "", tuple(newly))


def simulate_command(model: CommandModel, args: tuple, state: WorldState, scenario,
                     rng: random.Random) -> tuple[bool, WorldState, int]:
    """Pure form: sampled status, next state and cost, leaving ``state`` untouched."""
    nxt = state.snapshot()
    result = simulate_inplace(model, args, nxt, scenario, rng)
    return result.success, nxt, result.delta.cost


def read_current_pose_sim(robot: str, obj: str, pan: float, lift: float, state: WorldState,
                          scenario) -> Optional[Pose2D]:
    """Planner-side fine perception: the refined pose, or ``None`` when the object is not framed."""
    a = {"r": robot, "o": obj, "pan": pan, "lift": lift}
    if _read_pose_pre(state, scenario, a) is not None:
        return None
    delta, _ = _read_pose_effect(state, scenario, a, SIM_SENSOR)
    if delta is None:
        return None
    return delta.observed_poses[obj]


def at_table(state: WorldState, scenario, table: str) -> bool:
    return _at(state, scenario, table)


__all__ = [
    "CommandModel",
    "CommandResult",
    "SIM_SENSOR",
    "Sensor",
    "at_table",
    "collection_commands",
    "read_current_pose_sim",
    "simulate_command",
    "simulate_inplace",
    "slot_pose",
]
