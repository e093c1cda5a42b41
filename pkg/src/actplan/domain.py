"""The object-collection operational model: tasks, refinement methods and commands."""

from __future__ import annotations

from .commands import at_table, collection_commands
from .geometry import distance
from .refinement import Domain, MethodDefinition, command, task
from .state import BOX, WorldState

TASKS = {
    "collect_all_objs": 1,
    "explore": 1,
    "collect_objs_from_table": 1,
    "collect_obj": 2,
    "perceive": 2,
    "drive": 2,
    "get_object": 3,
    "put_object": 3,
    "move_object": 4,
    "insert_object": 4,
}


def loose_objects(state: WorldState, table: str) -> list[str]:
    """Non-box objects lying directly on the table."""
    return [o for o in state.on_table(table) if state.classifications.get(o) != BOX]


def box_available(state: WorldState, table: str):
    """A box on ``table`` holding at least one object, else None."""
    for b in state.on_table(table):
        if state.classifications.get(b) == BOX and state.contents(b):
            return b
    return None


def build_collection_domain(scenario) -> Domain:
    """Register every task of the collection model against ``scenario``'s geometry and perception settings."""
    geo = scenario.geometry
    perception = scenario.perception
    target = geo.target_table
    limit = geo.time_limit
    retries = scenario.retry_counts

    def retry(name: str) -> int:
        return int(retries.get(name, 0))

    def here(state: WorldState) -> str:
        return geo.location_of(state.robot_pose)

    # --- bodies -------------------------------------------------------

    def collect_all_objs(state, r):
        yield task("explore", r)
        while state.time_passed <= limit and state.not_visited - {target}:
            yield task("collect_objs_from_table", r)

    def explore_method(state, r):
        start = state.robot_pose
        order = sorted(geo.source_tables(), key=lambda t: (distance(start, geo.base(t)), t))
        for tb in order:
            yield task("drive", r, tb)
            yield command("move_arm_to_pose", r, "explore")
            pan, lift = perception.explore_posture
            yield command("perceive_table", r, tb, pan, lift)

    def collect_objs_from_table(state, r, tb):
        if not at_table(state, scenario, tb):
            yield task("drive", r, tb)
        while state.time_passed <= limit:
            if loose_objects(state, tb):
                yield task("collect_obj", r, tb)
                yield task("drive", r, tb)
            else:
                break
        b = box_available(state, tb)
        if b is not None:
            yield task("move_object", r, b, tb, target)
        state.not_visited.discard(tb)

    def collect_objs_params(state, r):
        return {"tb": sorted(t for t in state.not_visited if t != target)}

    def collect_obj_direct(state, r, tb, o):
        yield task("get_object", r, o, tb)
        yield task("put_object", r, o, target)

    def direct_params(state, r, tb):
        return {"o": loose_objects(state, tb)}

    def collect_obj_box(state, r, tb, b):
        while True:
            remaining = loose_objects(state, tb)
            if not remaining:
                break
            yield task("insert_object", r, tb, remaining[0], b)
        yield task("move_object", r, b, tb, target)

    def box_params(state, r, tb):
        return {"b": [o for o in state.on_table(tb) if state.classifications.get(o) == BOX]}

    def box_pre(state, bindings):
        return bool(loose_objects(state, bindings["tb"]))

    def perceive_method(state, r, o, pan, lift):
        yield command("set_arm_joints", r, pan, lift)
        pose = state.object_poses.get(o)
        if pose is not None and distance(state.robot_pose, pose) <= perception.d_max:
            yield command("read_current_pose", r, o, pan, lift)

    def perceive_params(state, r, o):
        return {"pan": list(perception.pan_values), "lift": list(perception.lift_values)}

    def drive_method(state, r, l):
        if not at_table(state, scenario, l):
            yield command("move", r, here(state), l)

    def get_object_method(state, r, o, tb):
        yield task("perceive", r, o)
        yield command("grasp", r, o, tb)

    def put_object_method(state, r, o, tb):
        yield task("drive", r, tb)
        yield command("place", r, o, tb)

    def move_object_method(state, r, o, frm, to):
        yield task("get_object", r, o, frm)
        yield task("put_object", r, o, to)

    def insert_object_method(state, r, tb, o, box):
        yield task("get_object", r, o, tb)
        yield command("store_object", r, tb, o, box)

    # --- registry -----------------------------------------------------

    dom = Domain("object-collection")
    for name, arity in TASKS.items():
        dom.declare_task(name, arity)
    for model in collection_commands():
        dom.add_command(model)

    def add(name, task_name, task_params, body, params=None, precondition=None):
        kwargs = {}
        if precondition is not None:
            kwargs["precondition"] = precondition
        dom.add_method(MethodDefinition(name, task_name, task_params, body, params,
                                        retry_count=retry(name), **kwargs))

    add("collect_all_objs_method", "collect_all_objs", ("r",), collect_all_objs)
    add("explore_method", "explore", ("r",), explore_method)
    add("collect_objs_from_table", "collect_objs_from_table", ("r",), collect_objs_from_table,
        collect_objs_params)
    add("collect_obj_box", "collect_obj", ("r", "tb"), collect_obj_box, box_params, box_pre)
    add("collect_obj_direct", "collect_obj", ("r", "tb"), collect_obj_direct, direct_params)
    add("perceive_method", "perceive", ("r", "o"), perceive_method, perceive_params)
    add("drive_method", "drive", ("r", "l"), drive_method)
    add("get_object_method", "get_object", ("r", "o", "tb"), get_object_method)
    add("put_object_method", "put_object", ("r", "o", "tb"), put_object_method)
    add("move_object_method", "move_object", ("r", "o", "frm", "to"), move_object_method)
    add("insert_object_method", "insert_object", ("r", "tb", "o", "box"), insert_object_method)

    problems = dom.validate()
    if problems:
        raise ValueError("; ".join(problems))
    return dom
