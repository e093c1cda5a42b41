"""Executor side: runs dispatched commands against scenario ground truth.

It owns the ground-truth state, consumes the command-execution queue and
answers on the command-status queue with a ``running`` message followed by one
terminal message carrying the state delta the engine must fold in.
"""

from __future__ import annotations

import logging
import queue
import random
from typing import Optional

from .commands import CommandModel, CommandResult, Sensor
from .faults import FaultScript
from .state import StateDelta, WorldState, apply_delta, check_invariants

log = logging.getLogger(__name__)

RUNNING = "running"
SUCCESS = "success"
FAILURE = "failure"


def execute_command(model: CommandModel, args: tuple, truth: WorldState, scenario, faults: FaultScript,
                    rng: random.Random, sample_outcomes: bool = False,
                    noise: bool = True) -> CommandResult:
    """Run one command on ground truth (mutated in place) and return what the robot reports."""
    a = model.bind(args)
    cost = model.cost_in(scenario)
    decision = faults.on_dispatch(model.name, a)
    reason = model.precondition(truth, scenario, a)
    if reason is None and decision.fail:
        reason = decision.reason
    if reason is None and sample_outcomes:
        p = model.probability(scenario, a)
        if p < 1.0 and rng.random() >= p:
            reason = "execution failed"
    delta = None
    if reason is None:
        per = scenario.perception
        sensor = Sensor(
            suppressed=decision.suppressed,
            confidence={o: s.detection_confidence for o, s in scenario.objects.items()},
            threshold=per.detection_confidence_threshold,
            fine_sigma=per.pose_noise_sigma if noise else 0.0,
            coarse_sigma=per.coarse_noise_sigma if noise else 0.0,
            rng=rng,
        )
        delta, reason = model.effect(truth, scenario, a, sensor)
    if delta is None:
        delta = StateDelta(cost=cost)
        apply_delta(truth, delta, scenario.geometry, observations=False)
        return CommandResult(False, delta, reason)
    delta.cost = cost
    newly = apply_delta(truth, delta, scenario.geometry, observations=False)
    return CommandResult(True, delta, "", tuple(newly))


def physical_report(state: WorldState) -> dict:
    """Robot-side fields both sides must agree on after every status."""
    return {
        "robot_pose": state.robot_pose.to_list(),
        "holding": state.holding,
        "arm_joints": list(state.arm_joints),
        "time_passed": state.time_passed,
    }


class Executor:
    def __init__(self, scenario, commands: dict, queues, faults: Optional[FaultScript] = None,
                 seed: int = 0, noise: bool = True):
        self.scenario = scenario
        self.commands = commands
        self.queues = queues
        self.faults = faults if faults is not None else scenario.fault_script()
        self.rng = random.Random(f"executor:{seed}")
        self.noise = noise
        self.truth = scenario.ground_truth()
        self.executed = 0

    def handle(self, message: dict) -> None:
        did = message["dispatch_id"]
        self.queues.status_queue.put({"dispatch_id": did, "status": RUNNING})
        model = self.commands[message["command"]]
        result = execute_command(model, tuple(message["args"]), self.truth, self.scenario, self.faults,
                                 self.rng, self.scenario.sample_outcomes, self.noise)
        self.executed += 1
        problems = check_invariants(self.truth)
        if problems:
            log.error("ground truth invariant violated after %s: %s", message["command"], problems)
        self.queues.status_queue.put({
            "dispatch_id": did,
            "status": SUCCESS if result.success else FAILURE,
            "reason": result.reason,
            "delta": result.delta.to_dict(),
            "report": physical_report(self.truth),
        })

    def step(self) -> bool:
        """Handle one queued command if there is one (cooperative mode)."""
        try:
            message = self.queues.command_queue.get_nowait()
        except queue.Empty:
            return False
        if message is None:
            return False
        self.handle(message)
        return True

    def serve(self) -> None:
        """Blocking loop for a dedicated thread; a ``None`` message stops it."""
        while True:
            message = self.queues.command_queue.get()
            if message is None:
                return
            self.handle(message)
