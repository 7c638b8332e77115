"""
One switch, step by step
========================

A link keeps the last rate seen from each flow and marks a flow restricted
when that rate is at or below the advertized rate.  Restricted flows keep
their recorded rate; the rest share what remains equally.
"""

from fractions import Fraction

from explicitrate.endpoint import ControlPacket, Leg
from explicitrate.model import INF
from explicitrate.switch import LinkControlState

link = LinkControlState("a->b", Fraction(100))
for fid in ("A", "B", "C"):
    link.register_flow(fid, 1)
print(link)

###############################################################################
# A only wants 10.  Once A is restricted the other two share 90.

def send(fid, rate):
    out = link.process_control_packet(ControlPacket(fid, Leg.OUTBOUND, rate))
    print(f"{fid} sends {rate}: stamped {out.stamped}, u={out.u_bit}  {link}")
    return out

send("A", Fraction(10))
send("B", INF)
send("C", INF)

###############################################################################
# B comes back with the rate it was offered and gets restricted at 45.  If B
# then asks for more, its mark is dropped and the share is recomputed.

send("B", Fraction(45))
send("C", Fraction(45))
send("B", Fraction(80))
assert link.check_m_consistency() is None
