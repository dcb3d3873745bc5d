"""Two-phase delivery over the combination network.

Phase 1 splits each multicast message ``W_J`` evenly over the relays ``S_J``
that see the most users of ``J``; each relay forwards its piece to everyone it
serves. Phase 2 brings every piece to the users of ``J`` that missed it: each
such user ``k`` gets one 1/r slice per relay ``h'`` in ``H_k``, bucketed with
the ``r - 1`` users of ``Q^k_{h,h'}`` who already hold it, and the ``r``
buckets of each r-subset ``V`` of a relay's users are XORed together.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import InvariantError, ParameterError
from .placement import MulticastMessage, Placement, generate_multicast_messages
from .plan import DeliveryPlan, Segment, Transmission, XorLanes, default_packets_per_subfile
from .topology import Topology


@dataclass(frozen=True)
class Piece:
    """``W^{|S_J|}_{J,h}``: a contiguous slice of message ``msg`` sent to ``relay``."""

    msg: int
    J: tuple[int, ...]
    relay: int
    index: int
    count: int  # |S_J|
    start: int
    length: int


def _overlap_counts(topo: Topology, J: Iterable[int]) -> list[int]:
    counts = [0] * topo.num_relays
    for k in J:
        for h in topo.relays_of(k):
            counts[h - 1] += 1
    return counts


def select_relays(topo: Topology, J: Sequence[int]) -> tuple[int, ...]:
    """S_J = argmax_h |U_h & J|, ascending."""
    if not J:
        raise ParameterError("S_J needs a nonempty user set")
    counts = _overlap_counts(topo, J)
    best = max(counts)
    return tuple(h for h, c in enumerate(counts, start=1) if c == best)


def q_set(topo: Topology, k: int, h: int, h2: int) -> tuple[int, ...]:
    """Users on both h and h2 whose relays lie inside H_k + {h}."""
    Hk = topo.relays_of(k)
    if h2 not in Hk or h in Hk:
        raise ParameterError(f"need h'={h2} in H_{k}={Hk} and h={h} outside it")
    return _q_set(topo, k, h, h2)


@lru_cache(maxsize=None)
def _q_set(topo: Topology, k: int, h: int, h2: int) -> tuple[int, ...]:
    allowed = set(topo.relays_of(k)) | {h}
    both = set(topo.users_of(h)) & set(topo.users_of(h2))
    return tuple(sorted(j for j in both if set(topo.relays_of(j)) <= allowed))


def unsatisfied(topo: Topology, piece: Piece) -> tuple[int, ...]:
    """J - U_h: users of J that did not receive the piece in phase 1."""
    served = set(topo.users_of(piece.relay))
    return tuple(k for k in piece.J if k not in served)


def phase1_pieces(topo: Topology, messages: Sequence[MulticastMessage], s: int) -> list[Piece]:
    pieces = []
    for m, msg in enumerate(messages):
        S = select_relays(topo, msg.J)
        if s % len(S):
            raise ParameterError(f"{s} packets do not split over |S_J|={len(S)} relays")
        size = s // len(S)
        for i, h in enumerate(S):
            pieces.append(Piece(m, msg.J, h, i, len(S), i * size, size))
    return pieces


def minimal_packets_per_subfile(topo: Topology, t: int) -> int:
    """Smallest s for which every phase-1 piece and phase-2 slice is whole.

    Loads are independent of s; the oracle uses this to keep instances small.
    """
    from math import lcm

    r = topo.degree
    s = 1
    for J in itertools.combinations(topo.users, t + 1):
        S = select_relays(topo, J)
        need = len(S)
        for h in S:
            if any(k not in set(topo.users_of(h)) for k in J):
                need = r * len(S)
                break
        s = lcm(s, need)
    return s


def _piece_tag(p: Piece) -> str:
    return f"W{list(p.J)} piece {p.index + 1}/{p.count}"


def phase1_plan(topo: Topology, messages: Sequence[MulticastMessage], s: int | None = None,
                pieces: Sequence[Piece] | None = None) -> list[Transmission]:
    if s is None:
        s = default_packets_per_subfile(topo)
    if pieces is None:
        pieces = phase1_pieces(topo, messages, s)
    return [
        Transmission(
            phase=1, relay=p.relay, forward_to=topo.users_of(p.relay), length=p.length,
            tag=_piece_tag(p), payload=XorLanes(((Segment(p.msg, p.start, p.length),),)),
            ident=f"p1:{n}",
        )
        for n, p in enumerate(pieces)
    ]


def phase2_buckets(topo: Topology, pieces: Sequence[Piece]) -> dict[tuple, list[tuple[int, int]]]:
    """P^{h'}_{k,Q} as lists of (piece index, slice index), in (J, h, slice) order."""
    r = topo.degree
    buckets: dict[tuple, list[tuple[int, int]]] = defaultdict(list)
    for n, p in enumerate(pieces):
        missing = unsatisfied(topo, p)
        if not missing:
            continue
        if p.length % r:
            raise InvariantError(f"piece of {p.length} packets does not split into r={r} slices")
        for k in missing:
            for part, h2 in enumerate(topo.relays_of(k)):
                buckets[(h2, k, _q_set(topo, k, p.relay, h2))].append((n, part))
    return buckets


def _slice(p: Piece, part: int, r: int) -> Segment:
    size = p.length // r
    return Segment(p.msg, p.start + part * size, size)


def phase2_plan(topo: Topology, messages: Sequence[MulticastMessage], pieces: Sequence[Piece]) -> list[Transmission]:
    r = topo.degree
    buckets = phase2_buckets(topo, pieces)
    out = []
    used = 0
    for h in topo.relays:
        for V in itertools.combinations(topo.users_of(h), r):
            lanes = []
            for k in V:
                key = (h, k, tuple(u for u in V if u != k))
                entries = buckets.get(key, ())
                used += bool(entries)
                lanes.append(tuple(_slice(pieces[n], part, r) for n, part in entries))
            if not any(lanes):
                continue
            payload = XorLanes(tuple(lanes))
            out.append(Transmission(
                phase=2, relay=h, forward_to=V, length=payload.length,
                tag=f"XOR of P^{h}_(k, V-k) for V={list(V)}", payload=payload,
                ident=f"p2:{len(out)}",
            ))
    if used != len(buckets):
        raise InvariantError(f"{len(buckets) - used} phase-2 buckets matched no XOR group")
    return out


def compile_base(topo: Topology, placement: Placement, d: Sequence[int],
                 packets_per_subfile: int | None = None, salt: int = 0) -> DeliveryPlan:
    s = packets_per_subfile or default_packets_per_subfile(topo)
    messages = generate_multicast_messages(placement, d)
    pieces = phase1_pieces(topo, messages, s)
    plan = DeliveryPlan(
        scheme="base", topology=topo, placement=placement, demand=tuple(d),
        messages=messages, packets_per_subfile=s,
        phase1=phase1_plan(topo, messages, s, pieces),
        phase2=phase2_plan(topo, messages, pieces),
        salt=salt,
    )
    plan.extras["pieces"] = pieces
    return plan
