import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from actplan.utility import TraceStep, UtilityParams, utility


def test_empty_and_nothing_collected():
    p = UtilityParams(rewards={"a": 5})
    assert utility([], p) == 0.0
    assert utility([TraceStep("move", 5), TraceStep("grasp", 4)], p) == 0.0


def test_hand_evaluated_example():
    p = UtilityParams(c1=0.4, c2=0.6, k=0.1, rewards={"drill": 10})
    u = utility([TraceStep("move", 3), TraceStep("place", 2, ("drill",))], p)
    assert u == pytest.approx(10 * (0.4 + 0.6 * math.exp(-0.5)))
    assert u == pytest.approx(7.63918, abs=1e-5)


def test_zero_decay_sums_rewards():
    p = UtilityParams(k=0.0, rewards={"a": 3, "b": 4})
    trace = [TraceStep("x", 50, ("a",)), TraceStep("y", 500, ("b",))]
    assert utility(trace, p) == pytest.approx(7.0)


def test_joint_delivery_counts_every_object():
    p = UtilityParams(k=0.05, rewards={"a": 3, "b": 4, "box": 0})
    joint = utility([TraceStep("place", 10, ("box", "a", "b"))], p)
    assert joint == pytest.approx(7 * (0.4 + 0.6 * math.exp(-0.5)))


def test_params_validation():
    with pytest.raises(ValueError, match="c1 \\+ c2"):
        UtilityParams(c1=0.5, c2=0.6)
    with pytest.raises(ValueError):
        UtilityParams(k=-1)
    with pytest.raises(ValueError):
        UtilityParams(eta=0)
    with pytest.raises(ValueError):
        UtilityParams(rewards={"a": -1})


@given(st.integers(0, 200), st.integers(1, 200), st.floats(0.001, 1.0), st.floats(0.0, 50.0))
def test_earlier_collection_never_worse(c_early, gap, k, reward):
    p = UtilityParams(k=k, rewards={"o": reward})
    early = utility([TraceStep("a", c_early, ("o",))], p)
    late = utility([TraceStep("a", c_early + gap, ("o",))], p)
    assert early >= late


@given(st.lists(st.tuples(st.integers(0, 30), st.booleans()), max_size=20))
def test_zero_rewards_give_zero(steps):
    p = UtilityParams(rewards={"o": 0.0})
    assert utility([TraceStep("s", c, ("o",) if hit else ()) for c, hit in steps], p) == 0.0
