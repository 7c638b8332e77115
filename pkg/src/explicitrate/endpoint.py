"""Source and destination behaviour: control packet emission, feedback and actual rate."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .model import Rate, is_inf

__all__ = ["ControlPacket", "Leg", "PendingIncrease", "Source", "destination_reflect"]


class Leg(enum.Enum):
    OUTBOUND = "out"
    RETURNING = "ret"


@dataclass(frozen=True)
class ControlPacket:
    flow: str
    leg: Leg
    stamped: Rate
    u_bit: int = 0
    sent_at: Fraction = Fraction(0)
    incarnation: int = 0  # bumped on every (re)join so stale feedback is ignored

    def __post_init__(self):
        if self.stamped < 0:
            raise ValueError("stamped rate must be >= 0")
        if self.u_bit not in (0, 1):
            raise ValueError("u_bit must be 0 or 1")


def destination_reflect(packet: ControlPacket) -> ControlPacket:
    if packet.leg is not Leg.OUTBOUND:
        raise ValueError("destination only reflects outbound packets")
    return replace(packet, leg=Leg.RETURNING)


@dataclass(frozen=True)
class PendingIncrease:
    target: Fraction
    apply_at: Fraction


class Source:
    """Rate estimate and actual transmission rate of one flow's sender.

    With ``delayed_increase`` (the default) the actual rate drops at once when
    feedback asks for less, and rises only ``2 * d_bound`` after the feedback
    that allowed it.  Without it the actual rate tracks the estimate.
    """

    def __init__(
        self,
        flow: str,
        demand: Rate,
        d_bound: Fraction,
        actual_rate: Fraction = Fraction(0),
        delayed_increase: bool = True,
        incarnation: int = 0,
    ):
        self.flow = flow
        self.demand = demand
        self.d_bound = d_bound
        self.rate_estimate: Rate = demand
        self.actual_rate = actual_rate
        self.pending: Optional[PendingIncrease] = None
        self.last_allocation: Optional[Fraction] = None
        self.delayed_increase = delayed_increase
        self.incarnation = incarnation

    def __repr__(self):
        return (
            f"Source({self.flow!r}, estimate={self.rate_estimate}, actual={self.actual_rate}, "
            f"pending={self.pending})"
        )

    def emit(self, now) -> ControlPacket:
        u_bit = 0
        # a source that wants less than the network offers says so itself
        if self.last_allocation is not None and self.demand < self.last_allocation:
            u_bit = 1
        return ControlPacket(
            self.flow, Leg.OUTBOUND, self.rate_estimate, u_bit, Fraction(now), self.incarnation
        )

    def on_feedback(self, packet: ControlPacket, now) -> None:
        if packet.leg is not Leg.RETURNING or packet.flow != self.flow:
            raise ValueError("feedback must be this flow's returning packet")
        if packet.u_bit:
            self.last_allocation = packet.stamped
            self.rate_estimate = min(packet.stamped, self.demand)
        else:
            self.rate_estimate = self.demand
        self.set_actual_rate(packet, now)

    def set_actual_rate(self, packet: ControlPacket, now) -> None:
        if not self.delayed_increase:
            if not is_inf(self.rate_estimate):
                self.actual_rate = self.rate_estimate
            self.pending = None
            return
        if not packet.u_bit:
            return
        target = min(packet.stamped, self.demand)
        if target < self.actual_rate:
            self.actual_rate = target
            self.pending = None
        elif target > self.actual_rate:
            self.pending = PendingIncrease(target, Fraction(now) + 2 * self.d_bound)
        else:
            self.pending = None

    def apply_pending(self, now) -> bool:
        """Apply a due pending increase; returns whether the actual rate changed."""
        if self.pending is None or self.pending.apply_at != now:
            return False
        self.actual_rate = self.pending.target
        self.pending = None
        return True

