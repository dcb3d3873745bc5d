"""Delivery plans: per-link transmissions with exact lengths.

Payload rows are sparse maps over message-packet coordinates ``(msg, p)``:
``msg`` indexes ``plan.messages`` and ``p`` is a packet of ``W_J``. A plan
holds server->relay transmissions; every one is copied by the relay to the
users in ``forward_to`` (relays have no cache and only forward).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from math import comb, lcm
from typing import Any, Callable, NamedTuple, Sequence

from .errors import InvariantError
from .field import GF256, FieldSpec
from .placement import MulticastMessage, Placement
from .topology import Topology


def default_packets_per_subfile(topo: Topology) -> int:
    """r * lcm(1..H): splits by |S_J| <= H and then by r stay integral."""
    return topo.degree * lcm(*range(1, topo.num_relays + 1))


class Link(NamedTuple):
    kind: str  # "server_relay" | "relay_user"
    relay: int
    user: int | None = None

    def to_json(self) -> dict:
        d = {"type": self.kind, "relay": self.relay}
        if self.user is not None:
            d["user"] = self.user
        return d


class Segment(NamedTuple):
    msg: int
    start: int
    length: int


@dataclass(frozen=True)
class XorLanes:
    """Position-wise XOR of concatenated segment lists (zero-padded)."""

    lanes: tuple[tuple[Segment, ...], ...]

    @property
    def length(self) -> int:
        return max((sum(s.length for s in lane) for lane in self.lanes), default=0)

    def rows(self, field: FieldSpec) -> list[dict]:
        out = [dict() for _ in range(self.length)]
        for lane in self.lanes:
            pos = 0
            for seg in lane:
                for i in range(seg.length):
                    row = out[pos + i]
                    key = (seg.msg, seg.start + i)
                    if row.pop(key, 0) == 0:
                        row[key] = 1
                pos += seg.length
        return out


@dataclass
class Transmission:
    phase: int
    relay: int
    forward_to: tuple[int, ...]
    length: int
    tag: str
    payload: Any = dc_field(default=None, repr=False)  # object with .rows(field)
    ident: str = ""

    @property
    def link(self) -> Link:
        return Link("server_relay", self.relay)

    def links(self) -> list[Link]:
        return [self.link] + [Link("relay_user", self.relay, k) for k in self.forward_to]

    def rows(self, field: FieldSpec) -> list[dict]:
        rows = self.payload.rows(field)
        if len(rows) != self.length:
            raise InvariantError(f"{self.tag}: payload has {len(rows)} rows, declared {self.length}")
        return rows


@dataclass
class DeliveryPlan:
    scheme: str
    topology: Topology
    placement: Placement
    demand: tuple[int, ...]
    messages: list[MulticastMessage]
    packets_per_subfile: int
    phase1: list[Transmission]
    phase2: list[Transmission]
    field: FieldSpec = GF256
    salt: int = 0
    extras: dict = dc_field(default_factory=dict, repr=False)

    @property
    def file_packets(self) -> int:
        """B_pkts = C(K, t) * s."""
        return comb(self.placement.num_users, self.placement.t) * self.packets_per_subfile

    @property
    def transmissions(self) -> list[Transmission]:
        return self.phase1 + self.phase2

    def per_link_packets(self, phases: Sequence[int] = (1, 2)) -> dict[Link, int]:
        topo = self.topology
        out: dict[Link, int] = {Link("server_relay", h): 0 for h in topo.relays}
        for h in topo.relays:
            for k in topo.users_of(h):
                out[Link("relay_user", h, k)] = 0
        for tx in self.transmissions:
            if tx.phase not in phases:
                continue
            out[tx.link] += tx.length
            for k in tx.forward_to:
                out[Link("relay_user", tx.relay, k)] += tx.length
        return out

    def per_link_load(self, phases: Sequence[int] = (1, 2)) -> dict[Link, Fraction]:
        b = self.file_packets
        return {l: Fraction(n, b) for l, n in self.per_link_packets(phases).items()}

    def relay_loads(self, phases: Sequence[int] = (1, 2)) -> dict[int, Fraction]:
        return {l.relay: v for l, v in self.per_link_load(phases).items() if l.kind == "server_relay"}

    @property
    def max_link_load(self) -> Fraction:
        return max(self.per_link_load().values(), default=Fraction(0))

    def params(self) -> dict:
        return {
            "relays": self.topology.num_relays,
            "degree": self.topology.degree,
            "files": self.placement.num_files,
            "t": self.placement.t,
            "scheme": self.scheme,
            "demand": list(self.demand),
            "packets_per_subfile": self.packets_per_subfile,
            "salt": self.salt,
        }

    def to_json(self) -> dict:
        entries = []
        for tx in self.transmissions:
            for link in tx.links():
                entries.append({
                    "id": tx.ident,
                    "phase": tx.phase,
                    "link": link.to_json(),
                    "tag": tx.tag,
                    "length_pkts": tx.length,
                })
        loads = self.per_link_load()
        return {
            "params": self.params(),
            "file_packets": self.file_packets,
            "max_link_load": fraction_str(self.max_link_load),
            "server_relay_load": {
                str(l.relay): fraction_str(v) for l, v in loads.items() if l.kind == "server_relay"
            },
            "transmissions": entries,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    def restrict(self, keep: Callable[[Transmission], tuple[int, ...] | None]) -> "DeliveryPlan":
        """Copy of the plan keeping only some transmissions / forwards.

        ``keep(tx)`` returns the users to forward to, or None to drop ``tx``.
        """
        def sub(txs):
            out = []
            for tx in txs:
                fwd = keep(tx)
                if fwd is None:
                    continue
                out.append(Transmission(tx.phase, tx.relay, tuple(fwd), tx.length, tx.tag, tx.payload, tx.ident))
            return out

        return DeliveryPlan(
            self.scheme, self.topology, self.placement, self.demand, self.messages,
            self.packets_per_subfile, sub(self.phase1), sub(self.phase2), self.field,
            self.salt, self.extras,
        )


def fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)
