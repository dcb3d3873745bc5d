"""Improved second phase: shared coded packets for pieces missed by several users.

Phase 1 is unchanged. A piece ``W_{J,h}`` missed by the users ``J - U_h`` is
no longer sliced per user. Instead, for every other relay ``h'`` that reaches
some of them (``A = U_h' & (J - U_h)``), ``len/r`` coded combinations of the
piece go into the bucket ``X^{h'}_{A,B}``, where ``B`` are the users on both
relays whose relay sets lie inside ``H_A + {h}`` (they already hold the piece).
A user in ``A`` collects ``len/r`` combinations on each of its r relays, i.e.
``len`` independent ones.

Per relay, stage 1 codes all buckets with ``receivers | knowers == V`` into
``c`` packets (the largest amount any member of ``V`` is missing) and stage 2
codes all stage-1 outputs of the relay into ``c'`` packets (the largest amount
any user of the relay is missing). Coefficients come from Cauchy matrices, so
independence is exact rather than probabilistic.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InvariantError
from .field import ESCALATE_ABOVE, GF256, GF65536, FieldSpec, SymbolVector, combine, rlc_matrix
from .placement import Placement, generate_multicast_messages
from .plan import DeliveryPlan, Transmission, default_packets_per_subfile
from .delivery_base import Piece, phase1_pieces, phase1_plan, unsatisfied
from .topology import Topology, relays_of_userset


@dataclass
class PieceCode:
    """How a missed piece is spread over the relays reaching its receivers."""

    piece: int
    relays: tuple[int, ...]  # the h' with nonempty A, ascending
    rows_per_relay: int


@dataclass
class XSet:
    relay: int
    receivers: tuple[int, ...]  # W1
    knowers: tuple[int, ...]  # W2
    contributions: list[tuple[int, int]] = field(default_factory=list)  # (piece code index, block)
    size: int = 0

    @property
    def cover(self) -> tuple[int, ...]:
        return tuple(sorted(self.receivers + self.knowers))


@dataclass
class LSet:
    relay: int
    cover: tuple[int, ...]
    sources: list[XSet]
    size: int  # c
    mode: str  # "copy" | "xor" | "cauchy"

    @property
    def source_size(self) -> int:
        return sum(x.size for x in self.sources)

    def known_to(self, k: int) -> bool:
        """Every nonempty source lists k among its knowers."""
        return all(k in x.knowers for x in self.sources if x.size)

    def missing_for(self, k: int) -> int:
        return sum(x.size for x in self.sources if k not in x.knowers)


def knower_set(topo: Topology, h: int, h2: int, receivers: Sequence[int]) -> tuple[int, ...]:
    """B = users on h and h2 whose relays lie inside H_A + {h}."""
    allowed = relays_of_userset(topo, receivers) | {h}
    both = set(topo.users_of(h)) & set(topo.users_of(h2))
    return tuple(sorted(j for j in both if set(topo.relays_of(j)) <= allowed))


def build_x_sets(topo: Topology, pieces: Sequence[Piece]) -> tuple[dict, list[PieceCode]]:
    """Buckets X^{h'}_{A,B}, keyed (h', A, B), plus the per-piece code layout."""
    r = topo.degree
    xsets: dict[tuple, XSet] = {}
    codes: list[PieceCode] = []
    for n, p in enumerate(pieces):
        missing = set(unsatisfied(topo, p))
        if not missing:
            continue
        if p.length % r:
            raise InvariantError(f"piece of {p.length} packets does not split into r={r} parts")
        rows = p.length // r
        targets = []
        for h2 in topo.relays:
            if h2 == p.relay:
                continue
            A = tuple(k for k in topo.users_of(h2) if k in missing)
            if A:
                targets.append((h2, A))
        code = PieceCode(n, tuple(h2 for h2, _ in targets), rows)
        codes.append(code)
        for block, (h2, A) in enumerate(targets):
            B = knower_set(topo, p.relay, h2, A)
            key = (h2, A, B)
            x = xsets.get(key)
            if x is None:
                x = xsets[key] = XSet(h2, A, B)
            x.contributions.append((len(codes) - 1, block))
            x.size += rows
    return xsets, codes


def _stage1_mode(V: tuple[int, ...], sources: Sequence[XSet], c: int, total: int) -> str:
    if c == total:
        return "copy"
    if all(len(x.receivers) == 1 and set(x.knowers) == set(V) - set(x.receivers) for x in sources):
        return "xor"
    return "cauchy"


def stage1_combine(relay: int, V: tuple[int, ...], x_sets: Sequence[XSet]) -> LSet:
    """L^h_V: code the buckets of relay h whose receivers and knowers make up V."""
    sources = sorted(
        (x for x in x_sets if x.relay == relay and x.cover == tuple(sorted(V)) and x.size),
        key=lambda x: (x.receivers, x.knowers),
    )
    if not sources:
        raise InvariantError(f"no nonempty bucket covers V={V} at relay {relay}")
    c = max(sum(x.size for x in sources if k not in x.knowers) for k in V)
    total = sum(x.size for x in sources)
    return LSet(relay, tuple(sorted(V)), sources, c, _stage1_mode(tuple(sorted(V)), sources, c, total))


def stage2_size(topo: Topology, relay: int, l_sets: Sequence[LSet]) -> int:
    """c' = max over users of the relay of the stage-1 output they cannot compute."""
    return max(
        (sum(l.size for l in l_sets if not l.known_to(k)) for k in topo.users_of(relay)),
        default=0,
    )


@dataclass
class Stage2Payload:
    plan: "ImprovedLayout"
    relay: int

    def rows(self, field: FieldSpec) -> list[dict]:
        return self.plan.stage2_rows(self.relay, field)


@dataclass
class ImprovedLayout:
    """Structure of the improved phase 2 plus lazy materialisation of its payloads."""

    topology: Topology
    pieces: list[Piece]
    codes: list[PieceCode]
    x_sets: dict
    l_sets: dict[int, list[LSet]]  # relay -> L-sets in cover order
    c_prime: dict[int, int]
    salt: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def stage2_mode(self, relay: int) -> str:
        total = sum(l.size for l in self.l_sets[relay])
        return "copy" if self.c_prime[relay] == total else "cauchy"

    def coded_blocks(self):
        """(rows, cols) of every Cauchy matrix the plan needs."""
        for code in self.codes:
            p = self.pieces[code.piece]
            if len(code.relays) * code.rows_per_relay != p.length:
                yield len(code.relays) * code.rows_per_relay, p.length
        for relay, ls in self.l_sets.items():
            for l in ls:
                if l.mode == "cauchy":
                    yield l.size, l.source_size
            if ls and self.stage2_mode(relay) == "cauchy":
                yield self.c_prime[relay], sum(l.size for l in ls)

    def choose_field(self) -> FieldSpec:
        for rows, cols in self.coded_blocks():
            if cols > ESCALATE_ABOVE or rows + cols > GF256.order:
                return GF65536
        return GF256

    def _piece_rows(self, ci: int, field: FieldSpec) -> list[dict]:
        key = ("piece", ci, field)
        if key not in self._cache:
            code = self.codes[ci]
            p = self.pieces[code.piece]
            total = len(code.relays) * code.rows_per_relay
            cols = [(p.msg, p.start + i) for i in range(p.length)]
            if total == p.length:
                rows = [{c: 1} for c in cols]
            else:
                mat = rlc_matrix(total, p.length, field, salt=(self.salt, "x", p.J, p.relay))
                rows = [{c: int(v) for c, v in zip(cols, row) if v} for row in mat]
            self._cache[key] = rows
        return self._cache[key]

    def x_packets(self, x: XSet, field: FieldSpec) -> list[dict]:
        out = []
        for ci, block in x.contributions:
            k = self.codes[ci].rows_per_relay
            out.extend(self._piece_rows(ci, field)[block * k:(block + 1) * k])
        return out

    def l_packets(self, l: LSet, field: FieldSpec) -> list[dict]:
        key = ("L", l.relay, l.cover, field)
        if key in self._cache:
            return self._cache[key]
        if l.mode == "xor":
            lanes = [self.x_packets(x, field) for x in l.sources]
            rows = []
            for i in range(l.size):
                vecs = [SymbolVector(lane[i]) for lane in lanes if i < len(lane)]
                rows.append(combine([1] * len(vecs), vecs, field).coeffs)
        else:
            src = [SymbolVector(v) for x in l.sources for v in self.x_packets(x, field)]
            if l.mode == "copy":
                rows = [v.coeffs for v in src]
            else:
                mat = rlc_matrix(l.size, len(src), field, salt=(self.salt, "L", l.relay, l.cover))
                rows = [combine([int(a) for a in row], src, field).coeffs for row in mat]
        self._cache[key] = rows
        return rows

    def stage2_rows(self, relay: int, field: FieldSpec) -> list[dict]:
        src = [SymbolVector(v) for l in self.l_sets[relay] for v in self.l_packets(l, field)]
        if self.stage2_mode(relay) == "copy":
            return [v.coeffs for v in src]
        mat = rlc_matrix(self.c_prime[relay], len(src), field, salt=(self.salt, "C", relay))
        return [combine([int(a) for a in row], src, field).coeffs for row in mat]


def improved_layout(topo: Topology, pieces: list[Piece], salt: int = 0) -> ImprovedLayout:
    xsets, codes = build_x_sets(topo, pieces)
    by_cover: dict[tuple[int, tuple], list[XSet]] = defaultdict(list)
    for x in xsets.values():
        by_cover[(x.relay, x.cover)].append(x)
    l_sets: dict[int, list[LSet]] = {h: [] for h in topo.relays}
    for (h, V) in sorted(by_cover):
        l_sets[h].append(stage1_combine(h, V, by_cover[(h, V)]))
    c_prime = {h: stage2_size(topo, h, l_sets[h]) for h in topo.relays}
    return ImprovedLayout(topo, pieces, codes, xsets, l_sets, c_prime, salt)


def stage2_combine(layout: ImprovedLayout, relay: int) -> list[Transmission]:
    topo = layout.topology
    c = layout.c_prime[relay]
    if not c:
        return []
    covers = [list(l.cover) for l in layout.l_sets[relay]]
    return [Transmission(
        phase=2, relay=relay, forward_to=topo.users_of(relay), length=c,
        tag=f"stage-2 {layout.stage2_mode(relay)} of L^{relay}_V, V in {covers}",
        payload=Stage2Payload(layout, relay), ident=f"p2:{relay}",
    )]


def compile_improved(topo: Topology, placement: Placement, d: Sequence[int],
                     packets_per_subfile: int | None = None, salt: int = 0) -> DeliveryPlan:
    s = packets_per_subfile or default_packets_per_subfile(topo)
    messages = generate_multicast_messages(placement, d)
    pieces = phase1_pieces(topo, messages, s)
    layout = improved_layout(topo, pieces, salt)
    phase2 = [tx for h in topo.relays for tx in stage2_combine(layout, h)]
    plan = DeliveryPlan(
        scheme="improved", topology=topo, placement=placement, demand=tuple(d),
        messages=messages, packets_per_subfile=s,
        phase1=phase1_plan(topo, messages, s, pieces), phase2=phase2, salt=salt,
    )
    plan.field = layout.choose_field()
    plan.extras["pieces"] = pieces
    plan.extras["layout"] = layout
    return plan
