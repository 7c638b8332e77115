"""Per-link control state: recorded rates, restricted marks and the advertized rate.

The advertized rate of a link is the capacity left over by its restricted
flows, shared among the unrestricted ones::

    mu = (C - sum_R xi * delta) / (sum_all delta - sum_R delta)

where ``delta`` is 1 for a flow crossing the link forward and ``k`` for one
whose feedback crosses it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .endpoint import ControlPacket
from .model import Rate, is_inf

__all__ = ["FlowEntry", "LinkControlState", "UnregisteredFlow"]


class UnregisteredFlow(KeyError):
    pass


@dataclass
class FlowEntry:
    flow: str
    weight: Fraction
    recorded: Optional[Rate] = None  # None until the first control packet
    restricted: bool = False

    def can_restrict(self) -> bool:
        return self.recorded is not None and not is_inf(self.recorded)


class LinkControlState:
    def __init__(self, link_id: str, capacity: Fraction, k: Fraction = Fraction(0)):
        self.link_id = link_id
        self.capacity = Fraction(capacity)
        self.k = Fraction(k)
        self.entries: dict[str, FlowEntry] = {}
        self.mu: Fraction = self.capacity

    def __repr__(self):
        marks = ", ".join(
            f"{e.flow}:{e.recorded}{'R' if e.restricted else 'U'}" for e in self.entries.values()
        )
        return f"LinkControlState({self.link_id}, C={self.capacity}, mu={self.mu}, [{marks}])"

    def snapshot(self) -> tuple:
        return (
            self.mu,
            tuple((e.flow, e.weight, e.recorded, e.restricted) for e in self.entries.values()),
        )

    @property
    def n(self) -> Fraction:
        return sum((e.weight for e in self.entries.values()), Fraction(0))

    def _share_for_marks(self) -> Optional[Fraction]:
        """Advertized rate for the current marks; ``None`` when every entry is restricted."""
        used = Fraction(0)
        free = Fraction(0)
        for e in self.entries.values():
            if e.restricted:
                used += e.recorded * e.weight
            else:
                free += e.weight
        if free == 0:
            return None
        return (self.capacity - used) / free

    def compute_advertized_rate(self, prefer: Optional[FlowEntry] = None) -> Fraction:
        """Two-step recalculation; the result is always M-consistent.

        When every entry is restricted the formula is undefined; one entry with
        the largest recorded rate is released first (``prefer`` if it is among
        them, otherwise the smallest flow id).
        """
        for e in self.entries.values():
            if e.restricted and not e.can_restrict():
                e.restricted = False
        if not self.entries:
            self.mu = self.capacity
            return self.mu

        mu = self._share_for_marks()
        if mu is None:
            top = max(e.recorded for e in self.entries.values())
            if prefer is not None and prefer.recorded == top:
                prefer.restricted = False
            else:
                min((e for e in self.entries.values() if e.recorded == top), key=lambda e: e.flow).restricted = False
            mu = self._share_for_marks()

        released = [e for e in self.entries.values() if e.restricted and e.recorded > mu]
        if released:
            for e in released:
                e.restricted = False
            mu = self._share_for_marks()
        assert all(e.recorded <= mu for e in self.entries.values() if e.restricted), (
            "third recalculation needed"
        )
        self.mu = mu
        return mu

    def register_flow(self, flow: str, weight) -> None:
        if flow in self.entries:
            raise ValueError(f"flow {flow} already registered on {self.link_id}")
        self.entries[flow] = FlowEntry(flow, Fraction(weight))
        self.compute_advertized_rate()

    def deregister_flow(self, flow: str) -> None:
        if flow not in self.entries:
            raise UnregisteredFlow(flow)
        del self.entries[flow]
        self.compute_advertized_rate()

    def process_control_packet(self, packet: ControlPacket) -> ControlPacket:
        entry = self.entries.get(packet.flow)
        if entry is None:
            raise UnregisteredFlow(packet.flow)
        rho = packet.stamped
        if entry.recorded != rho or not entry.restricted:
            entry.recorded = rho
            entry.restricted = False
            self.compute_advertized_rate()
            if entry.can_restrict() and rho <= self.mu:
                entry.restricted = True
                self.compute_advertized_rate(prefer=entry)
        if rho >= self.mu:
            return replace(packet, stamped=self.mu, u_bit=1)
        return packet

    def check_m_consistency(self) -> Optional[str]:
        """``None`` if both marking-consistency conditions hold, else a description."""
        for e in self.entries.values():
            if e.restricted and (not e.can_restrict() or e.recorded > self.mu):
                return f"condition 1: restricted flow {e.flow} recorded {e.recorded} > mu {self.mu}"
        if not self.entries:
            expected = self.capacity
        else:
            expected = self._share_for_marks()
            if expected is None:
                return "condition 2: every flow restricted, advertized rate undefined"
        if self.mu != expected:
            return f"condition 2: mu {self.mu} != {expected}"
        return None

    def fair_share_floor(self) -> Fraction:
        """``C / n`` over registered flows, the lower bound on mu once all flows are known."""
        n = self.n
        return self.capacity / n if n else self.capacity
