"""Scenario files: static world description, validated against ``scenario.schema.json``."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

import jsonschema

from .camera import CameraModel, MountTransform
from .faults import FaultScript
from .geometry import Pose2D
from .state import BOX, ObjectSpec, ScenarioGeometry, TableSpec, WorldState, derive_symbolic_facts
from .utility import UtilityParams

DEFAULT_COSTS = {
    "move": 5,
    "perceive_table": 3,
    "set_arm_joints": 1,
    "read_current_pose": 1,
    "grasp": 4,
    "place": 4,
    "store_object": 4,
    "move_arm_to_pose": 2,
}


class ScenarioError(ValueError):
    """The scenario file is malformed or inconsistent."""


@dataclass(frozen=True)
class PerceptionConfig:
    d_max: float = 1.2
    pan_values: tuple[float, ...] = (-0.4, 0.0, 0.4)
    lift_values: tuple[float, ...] = (0.5, 0.8)
    detection_confidence_threshold: float = 0.5
    explore_posture: tuple[float, float] = (0.0, 0.45)
    pose_noise_sigma: float = 0.005
    coarse_noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.pan_values or not self.lift_values:
            raise ValueError("pan_values and lift_values must be nonempty")


@dataclass(frozen=True)
class PlannerConfig:
    rollouts: int = 100
    exploration_c: float = math.sqrt(2.0)
    depth_limit: int = 50


@dataclass(frozen=True)
class Scenario:
    name: str
    robot_id: str
    start_pose: Pose2D
    geometry: ScenarioGeometry
    objects: Mapping[str, ObjectSpec]
    camera: CameraModel = CameraModel()
    perception: PerceptionConfig = PerceptionConfig()
    reach_radius: float = 0.8
    slot_spacing: float = 0.35
    costs: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_COSTS))
    c1: float = 0.4
    c2: float = 0.6
    k: float = 0.05
    planner: PlannerConfig = PlannerConfig()
    retry_counts: Mapping[str, int] = field(default_factory=lambda: {"drive_method": 2})
    sample_outcomes: bool = False
    faults: tuple = ()
    description: str = ""
    raw: Mapping = field(default_factory=dict, compare=False, repr=False)

    @property
    def target_table(self) -> str:
        return self.geometry.target_table

    @property
    def time_limit(self) -> int:
        return self.geometry.time_limit

    def cost(self, command: str) -> int:
        return int(self.costs.get(command, DEFAULT_COSTS.get(command, 1)))

    def utility_params(self) -> UtilityParams:
        return UtilityParams(
            c1=self.c1, c2=self.c2, k=self.k, eta=self.time_limit,
            rewards={o.id: o.reward for o in self.objects.values()},
        )

    def fault_script(self) -> FaultScript:
        return FaultScript.from_list(self.faults)

    def postures(self) -> dict[str, tuple[float, float]]:
        return {"home": (0.0, 0.0), "explore": tuple(self.perception.explore_posture)}

    def collectible(self) -> list[str]:
        return sorted(o for o, spec in self.objects.items() if spec.cls != BOX)

    def initial_belief(self) -> WorldState:
        """Robot state at trial start: object catalogue known, no object pose known."""
        state = WorldState(
            robot_pose=self.start_pose,
            object_poses={o: None for o in self.objects},
            classifications={o: s.cls for o, s in self.objects.items()},
            not_visited=set(self.geometry.source_tables()),
            collected={t: set() for t in self.geometry.tables},
        )
        state.symbolic_facts = derive_symbolic_facts(state, self.geometry)
        return state

    def ground_truth(self) -> WorldState:
        state = self.initial_belief()
        for o, spec in self.objects.items():
            state.object_poses[o] = spec.true_pose
        state.symbolic_facts = derive_symbolic_facts(state, self.geometry)
        return state


def _schema() -> dict:
    text = resources.files("actplan").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


def _merge(base: dict, overrides: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def scenario_from_dict(data: Mapping, overrides: Optional[Mapping] = None) -> Scenario:
    if overrides:
        data = _merge(dict(data), overrides)
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}") from None

    try:
        tables = {}
        for t in data["tables"]:
            if t["id"] in tables:
                raise ScenarioError(f"duplicate table id {t['id']}")
            tables[t["id"]] = TableSpec(
                t["id"], Pose2D.from_seq(t["center"]), tuple(t["extents"]), Pose2D.from_seq(t["base_pose"])
            )
        objects = {}
        for o in data["objects"]:
            if o["id"] in objects or o["id"] in tables:
                raise ScenarioError(f"duplicate identifier {o['id']}")
            objects[o["id"]] = ObjectSpec(
                id=o["id"],
                cls=o["class"],
                reward=float(o["reward"]),
                success_probability=float(o["success_probability"]),
                bounding_box=tuple(float(v) for v in o["bounding_box"]),
                true_pose=Pose2D.from_seq(o["true_pose"]),
                detection_confidence=float(o.get("detection_confidence", 1.0)),
            )
        footprints = {o.id: o.bounding_box[:2] for o in objects.values() if o.cls == BOX}
        geometry = ScenarioGeometry(
            tables=tables,
            target_table=data["target_table"],
            time_limit=int(data["time_limit"]),
            table_height=float(data.get("table_height", 0.75)),
            box_footprints=footprints,
        )

        cam = data.get("camera", {})
        base_cam = CameraModel()
        camera = CameraModel(
            hfov=math.radians(cam["hfov_deg"]) if "hfov_deg" in cam else base_cam.hfov,
            vfov=math.radians(cam["vfov_deg"]) if "vfov_deg" in cam else base_cam.vfov,
            near=cam.get("near", base_cam.near),
            far=cam.get("far", base_cam.far),
            mount=MountTransform(**cam.get("mount", {})),
            pan_range=tuple(cam.get("pan_range", base_cam.pan_range)),
            lift_range=tuple(cam.get("lift_range", base_cam.lift_range)),
        )
        per = data.get("perception", {})
        base_per = PerceptionConfig()
        perception = PerceptionConfig(
            d_max=per.get("d_max", base_per.d_max),
            pan_values=tuple(per.get("pan_values", base_per.pan_values)),
            lift_values=tuple(per.get("lift_values", base_per.lift_values)),
            detection_confidence_threshold=per.get(
                "detection_confidence_threshold", base_per.detection_confidence_threshold),
            explore_posture=tuple(per.get("explore_posture", base_per.explore_posture)),
            pose_noise_sigma=per.get("pose_noise_sigma", base_per.pose_noise_sigma),
            coarse_noise_sigma=per.get("coarse_noise_sigma", base_per.coarse_noise_sigma),
        )
        for pan in perception.pan_values + (perception.explore_posture[0],):
            if not camera.pan_range[0] <= pan <= camera.pan_range[1]:
                raise ScenarioError(f"pan value {pan} outside the pan joint range")
        for lift in perception.lift_values + (perception.explore_posture[1],):
            if not camera.lift_range[0] <= lift <= camera.lift_range[1]:
                raise ScenarioError(f"lift value {lift} outside the lift joint range")

        util = data.get("utility", {})
        c1 = float(util.get("c1", 0.4))
        c2 = float(util.get("c2", 1.0 - c1))
        if abs(c1 + c2 - 1.0) > 1e-12:
            raise ScenarioError("utility constants must satisfy c1 + c2 = 1")
        costs = dict(DEFAULT_COSTS)
        costs.update(data.get("costs", {}))
        plan = data.get("planner", {})
        manip = data.get("manipulation", {})
        retry = {"drive_method": 2}
        retry.update(data.get("retry_counts", {}))
        faults = tuple(data.get("faults", ()))
        FaultScript.from_list(faults)  # validate eagerly
        for f in faults:
            target = f["effect"].get("object")
            if target is not None and target not in objects:
                raise ScenarioError(f"fault refers to unknown object {target}")

        return Scenario(
            name=data["name"],
            description=data.get("description", ""),
            robot_id=data["robot"]["id"],
            start_pose=Pose2D.from_seq(data["robot"]["start_pose"]),
            geometry=geometry,
            objects=objects,
            camera=camera,
            perception=perception,
            reach_radius=float(manip.get("reach_radius", 0.8)),
            slot_spacing=float(manip.get("slot_spacing", 0.35)),
            costs=costs,
            c1=c1,
            c2=c2,
            k=float(util.get("k", 0.05)),
            planner=PlannerConfig(
                rollouts=int(plan.get("rollouts", 100)),
                exploration_c=float(plan.get("exploration_c", math.sqrt(2.0))),
                depth_limit=int(plan.get("depth_limit", 50)),
            ),
            retry_counts=retry,
            sample_outcomes=bool(data.get("executor", {}).get("sample_outcomes", False)),
            faults=faults,
            raw=copy.deepcopy(dict(data)),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path, overrides: Optional[Mapping] = None) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"no such scenario file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(data, overrides)


def shipped_scenarios() -> dict[str, Path]:
    """Bundled scenario files keyed by name stem, e.g. ``study_1_1``."""
    root = resources.files("actplan").joinpath("scenarios")
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}
