"""Time-discounted collection utility shared by the planner and the trial report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple


@dataclass(frozen=True)
class UtilityParams:
    c1: float = 0.4
    c2: float = 0.6
    k: float = 0.05
    eta: int = 1000
    rewards: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.c1 + self.c2 - 1.0) > 1e-12:
            raise ValueError(f"c1 + c2 must equal 1 (got {self.c1 + self.c2})")
        if self.k < 0:
            raise ValueError("decay constant k must be non-negative")
        if self.eta < 1:
            raise ValueError("eta must be >= 1")
        if any(r < 0 for r in self.rewards.values()):
            raise ValueError("rewards must be non-negative")


class TraceStep(NamedTuple):
    action: str
    cost: int
    collected: tuple = ()  # objects that reached the target table at this step


def utility(trace: Iterable[TraceStep], params: UtilityParams) -> float:
    """Sum over steps of R(collected) * (c1 + c2 * exp(-k * C_i)), C_i the running cost."""
    total = 0.0
    spent = 0
    for step in trace:
        spent += step.cost
        if not step.collected:
            continue
        reward = sum(params.rewards.get(o, 0.0) for o in step.collected)
        if reward:
            total += reward * (params.c1 + params.c2 * math.exp(-params.k * spent))
    return total
