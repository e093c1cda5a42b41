"""Scripted fault injection for the executor.

An entry matches dispatches by command name and an optional argument filter.
Matching dispatches are numbered 1, 2, ... per entry; the trigger selects which
occurrences the effect applies to.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

FAIL = "fail"
FAIL_UNTIL = "fail-until-attempt"
SUPPRESS = "suppress-detection"
PERCEPTION_COMMANDS = ("perceive_table", "read_current_pose")


@dataclass
class FaultEntry:
    command: Optional[str]
    effect: str
    where: Mapping[str, object] = field(default_factory=dict)
    occurrences: Optional[tuple[int, int]] = None  # inclusive range of matching occurrences
    until_attempt: int = 0
    target: Optional[str] = None  # suppressed object
    seen: int = 0

    def __post_init__(self):
        if self.effect not in (FAIL, FAIL_UNTIL, SUPPRESS):
            raise ValueError(f"unknown fault effect {self.effect!r}")
        if self.effect == FAIL_UNTIL and self.until_attempt < 1:
            raise ValueError("fail-until-attempt needs until_attempt >= 1")
        if self.effect == SUPPRESS and not self.target:
            raise ValueError("suppress-detection needs an object")
        if self.occurrences is not None and not 1 <= self.occurrences[0] <= self.occurrences[1]:
            raise ValueError(f"bad occurrence range {self.occurrences}")

    def matches(self, name: str, args: Mapping[str, object]) -> bool:
        if self.command is not None and name != self.command:
            return False
        if self.command is None and self.effect == SUPPRESS and name not in PERCEPTION_COMMANDS:
            return False
        return all(args.get(k) == v for k, v in self.where.items())

    def active(self) -> bool:
        """Whether the effect applies to the current (already counted) occurrence."""
        if self.effect == FAIL_UNTIL:
            return self.seen < self.until_attempt
        if self.occurrences is None:
            return True
        lo, hi = self.occurrences
        return lo <= self.seen <= hi

    @classmethod
    def from_dict(cls, data: Mapping) -> "FaultEntry":
        trig = data.get("trigger", {})
        occ = None
        if "occurrences" in trig:
            occ = (int(trig["occurrences"][0]), int(trig["occurrences"][1]))
        elif "nth" in trig:
            occ = (int(trig["nth"]), int(trig["nth"]))
        effect = data["effect"]
        return cls(
            command=data.get("command"),
            effect=effect["type"],
            where=dict(data.get("where", {})),
            occurrences=occ,
            until_attempt=int(effect.get("attempt", 0)),
            target=effect.get("object"),
        )


@dataclass
class FaultDecision:
    fail: bool = False
    suppressed: frozenset = frozenset()
    reason: str = ""


class FaultScript:
    def __init__(self, entries=()):
        self.entries = list(entries)

    @classmethod
    def from_list(cls, items) -> "FaultScript":
        return cls(FaultEntry.from_dict(d) for d in items)

    def reset(self) -> None:
        for e in self.entries:
            e.seen = 0

    def on_dispatch(self, name: str, args: Mapping[str, object]) -> FaultDecision:
        """Count this dispatch against every matching entry and report what fires."""
        decision = FaultDecision()
        suppressed = set()
        for i, e in enumerate(self.entries):
            if not e.matches(name, args):
                continue
            e.seen += 1
            if not e.active():
                continue
            if e.effect == SUPPRESS:
                suppressed.add(e.target)
            elif not decision.fail:
                decision.fail = True
                decision.reason = f"fault #{i} ({e.effect}) on occurrence {e.seen}"
        decision.suppressed = frozenset(suppressed)
        return decision

    def __len__(self):
        return len(self.entries)
