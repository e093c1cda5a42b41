import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from actplan.geometry import Pose2D, distance, in_rectangle, normalize_angle
from actplan.state import (
    BOX,
    ObjectSpec,
    ScenarioGeometry,
    StateDelta,
    TableSpec,
    WorldState,
    apply_delta,
    check_invariants,
    derive_symbolic_facts,
    state_difference,
)

angles = st.floats(min_value=-50, max_value=50, allow_nan=False)


@given(angles)
def test_normalize_angle_range(theta):
    w = normalize_angle(theta)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-9)


def test_normalize_angle_boundary():
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)


def test_pose_compose_and_distance():
    base = Pose2D(1.0, 2.0, math.pi / 2)
    p = base.compose(Pose2D(1.0, 0.0, 0.0))
    assert p.x == pytest.approx(1.0) and p.y == pytest.approx(3.0)
    assert p.theta == pytest.approx(math.pi / 2)
    assert distance(base, p) == pytest.approx(1.0)
    assert Pose2D.from_seq([1, 2]).theta == 0.0


def test_in_rectangle_boundary_inclusive():
    assert in_rectangle(0.5, 0.0, 0, 0, 1.0, 1.0)
    assert not in_rectangle(0.51, 0.0, 0, 0, 1.0, 1.0)


def _geometry():
    tables = {
        "t1": TableSpec("t1", Pose2D(0, 2), (1.0, 1.0), Pose2D(0, 1, math.pi / 2)),
        "t2": TableSpec("t2", Pose2D(2, 0), (1.0, 1.0), Pose2D(1, 0, 0)),
    }
    return ScenarioGeometry(tables, "t1", 100, box_footprints={"b": (0.3, 0.3)})


def _state():
    poses = {"a": Pose2D(2.0, 0.3), "c": Pose2D(2.0, 0.0), "b": Pose2D(2.0, 0.0), "u": None}
    s = WorldState(Pose2D(0, 0), poses, {"a": "tool", "c": "tool", "b": BOX, "u": "tool"},
                   not_visited={"t2"}, collected={"t1": set(), "t2": set()})
    s.symbolic_facts = derive_symbolic_facts(s, _geometry())
    return s


def test_object_spec_validation():
    with pytest.raises(ValueError, match="no reward"):
        ObjectSpec("b", BOX, 1.0, 1.0, (0.1, 0.1, 0.1))
    with pytest.raises(ValueError):
        ObjectSpec("x", "tool", 1.0, 1.5, (0.1, 0.1, 0.1))
    with pytest.raises(ValueError):
        ObjectSpec("x", "gadget", 1.0, 0.5, (0.1, 0.1, 0.1))


def test_geometry_validation():
    t = TableSpec("t", Pose2D(0, 0), (1, 1), Pose2D(0, 0))
    with pytest.raises(ValueError):
        ScenarioGeometry({"t": t}, "missing", 10)
    dup = TableSpec("u", Pose2D(3, 0), (1, 1), Pose2D(0, 0))
    with pytest.raises(ValueError, match="distinct"):
        ScenarioGeometry({"t": t, "u": dup}, "t", 10)


def test_facts_in_takes_precedence_and_unknown_skipped():
    s = _state()
    assert ("in", "c", "b") in s.symbolic_facts
    assert ("on", "c", "t2") not in s.symbolic_facts
    assert ("on", "b", "t2") in s.symbolic_facts
    assert ("on", "a", "t2") in s.symbolic_facts
    assert not any(f[1] == "u" for f in s.symbolic_facts)
    assert s.table_of("c") == "t2"
    assert s.contents("b") == ["c"]
    assert s.on_table("t2") == ["a", "b"]
    assert check_invariants(s) == []


def test_held_object_has_no_facts():
    s = _state()
    s.holding = "a"
    s.symbolic_facts = derive_symbolic_facts(s, _geometry())
    assert not any(f[1] == "a" for f in s.symbolic_facts)


def test_snapshot_is_independent():
    s = _state()
    t = s.snapshot()
    t.object_poses["a"] = Pose2D(9, 9)
    t.not_visited.clear()
    t.collected["t1"].add("a")
    assert s.object_poses["a"] == Pose2D(2.0, 0.3)
    assert s.not_visited == {"t2"} and s.collected["t1"] == set()
    assert s.digest() != t.digest()
    assert s.digest() == s.snapshot().digest()


def test_to_dict_roundtrip():
    s = _state()
    assert WorldState.from_dict(s.to_dict()).to_dict() == s.to_dict()


def test_apply_delta_observations_and_collection():
    geo = _geometry()
    s = _state()
    d = StateDelta(cost=4, observed_poses={"u": Pose2D(2.1, -0.3)})
    truth = s.snapshot()
    apply_delta(truth, d, geo, observations=False)
    assert truth.object_poses["u"] is None and truth.time_passed == 4
    apply_delta(s, d, geo)
    assert s.object_poses["u"] == Pose2D(2.1, -0.3)
    assert ("on", "u", "t2") in s.symbolic_facts
    newly = apply_delta(s, StateDelta(cost=1, collected={"t1": ("a",)}, object_poses={"a": Pose2D(0, 2)}), geo)
    assert newly == ["a"]
    assert apply_delta(s, StateDelta(collected={"t1": ("a",)}), geo) == []
    assert state_difference(_state(), s)["time_passed"] == 5


def test_delta_roundtrip_keeps_holding_semantics():
    d = StateDelta(cost=2, holding=None, arm_joints=(0.1, 0.2))
    back = StateDelta.from_dict(d.to_dict())
    assert back.sets_holding and back.holding is None
    assert not StateDelta.from_dict({"cost": 1}).sets_holding


def test_invariant_violations_reported():
    s = _state()
    s.symbolic_facts = s.symbolic_facts | {("on", "c", "t1")}
    s.holding = "a"
    s.symbolic_facts = s.symbolic_facts | {("in", "a", "c")}
    problems = check_invariants(s)
    assert any("location facts" in p for p in problems)
    assert any("not a box" in p for p in problems)
    assert any("held object" in p for p in problems)
