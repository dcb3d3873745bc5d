"""End-to-end oracle: run a plan on concrete symbols and check every user decodes.

Each subfile packet holds one pseudorandom field symbol. For each user the
oracle feeds every symbol it receives (as a vector over the subfile-packet
basis, with its cache treated as known) into a Gauss-Jordan basis and then
checks that every packet of the demanded file is determined, and determined
to the right value. Link loads are re-measured from the materialised rows.
"""
from __future__ import annotations

import csv
import io
import itertools
import time
import zlib
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .analysis import theorem1_load
from .delivery_base import compile_base, minimal_packets_per_subfile, q_set
from .delivery_improved import compile_improved
from .errors import InvariantError, ParameterError, VerificationError
from .field import FieldSpec, SpanBasis, gf_mul
from .placement import Placement, SubfileId, man_placement, worst_case_demand
from .plan import DeliveryPlan, Link, default_packets_per_subfile, fraction_str
from .topology import Topology, build_topology

COMPILERS = {"base": compile_base, "improved": compile_improved}


@dataclass(frozen=True)
class SimulationConfig:
    field: FieldSpec | None = None  # None: the plan's field
    packets_per_subfile: int | None = None  # None: the plan's
    salt: int = 0

    def check(self, plan: DeliveryPlan) -> None:
        s = self.packets_per_subfile
        if s is not None and s != plan.packets_per_subfile:
            raise ParameterError(f"config expects s={s}, plan was compiled with {plan.packets_per_subfile}")


def file_symbol(sub: SubfileId, p: int, salt: int, spec: FieldSpec) -> int:
    return zlib.crc32(repr((salt, sub.file, sub.holders, p)).encode()) % spec.order


@dataclass
class UserReport:
    user: int
    decoded: bool
    received: int
    rank: int
    missing: list = field(default_factory=list)  # first few undetermined (file, holders, packet)
    wrong: int = 0  # determined but to a different symbol


@dataclass
class VerificationReport:
    params: dict
    users: list[UserReport]
    measured_packets: dict[Link, int]
    file_packets: int
    load_mismatches: list[str] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def measured_load(self) -> dict[Link, Fraction]:
        return {l: Fraction(n, self.file_packets) for l, n in self.measured_packets.items()}

    @property
    def max_link_load(self) -> Fraction:
        return max(self.measured_load.values(), default=Fraction(0))

    @property
    def all_decoded(self) -> bool:
        return all(u.decoded for u in self.users)

    @property
    def ok(self) -> bool:
        return self.all_decoded and not self.load_mismatches and not self.violations

    def failed_users(self) -> list[int]:
        return [u.user for u in self.users if not u.decoded]

    def raise_for_failure(self) -> None:
        bad = [u for u in self.users if not u.decoded]
        if bad:
            u = bad[0]
            raise VerificationError(
                f"user {u.user} cannot decode: {len(u.missing)}+ packets undetermined, "
                f"{u.wrong} wrong, e.g. {u.missing[:3]}", user=u.user, missing=u.missing,
            )
        if self.load_mismatches or self.violations:
            raise InvariantError("; ".join(self.load_mismatches + self.violations))

    def to_json(self) -> dict:
        return {
            "params": self.params,
            "ok": self.ok,
            "max_link_load": fraction_str(self.max_link_load),
            "users": [asdict(u) | {"missing": [list(m) for m in u.missing]} for u in self.users],
            "server_relay_load": {
                str(l.relay): fraction_str(v) for l, v in self.measured_load.items() if l.kind == "server_relay"
            },
            "load_mismatches": self.load_mismatches,
            "violations": self.violations,
        }


def simulate(topo: Topology, placement: Placement, plan: DeliveryPlan,
             config: SimulationConfig | None = None, users: Iterable[int] | None = None,
             max_missing: int = 10, basis: str = "auto") -> VerificationReport:
    """Run ``plan`` on pseudorandom file symbols and check every user's file.

    ``basis="subfile"`` works over (subfile, packet) coordinates with the cache
    as known coordinates. ``basis="message"`` works over (message, packet)
    coordinates and is only valid for distinct demands: each subfile then sits
    in at most one message, so the map from message packets to subfile packets
    modulo a user's cache is injective and span membership is unchanged.
    ``"auto"`` picks ``message`` exactly when the demands are distinct.
    """
    config = config or SimulationConfig(salt=plan.salt)
    config.check(plan)
    if plan.topology != topo or plan.placement != placement:
        raise ParameterError("plan was compiled for a different topology or placement")
    distinct = len(set(plan.demand)) == len(plan.demand)
    if basis == "auto":
        basis = "message" if distinct else "subfile"
    if basis == "message" and not distinct:
        raise ParameterError("message coordinates are only exact for distinct demands")
    if basis not in ("message", "subfile"):
        raise ParameterError(f"unknown basis {basis!r}")
    spec = config.field or plan.field
    s = plan.packets_per_subfile
    salt = config.salt
    comps = [m.components for m in plan.messages]
    content_cache: dict = {}

    def content(coord) -> int:
        v = content_cache.get(coord)
        if v is None:
            v = content_cache[coord] = file_symbol(coord[0], coord[1], salt, spec)
        return v

    msg_cache: dict = {}

    def msg_value(coord) -> int:
        v = msg_cache.get(coord)
        if v is None:
            m, p = coord
            v = 0
            for sub in comps[m]:
                v ^= content((sub, p))
            msg_cache[coord] = v
        return v

    expanded: list[list[tuple[dict, int]]] = []
    for tx in plan.transmissions:
        out = []
        for row in tx.rows(spec):
            if basis == "message":
                value = 0
                for key, a in row.items():
                    value ^= gf_mul(a, msg_value(key), spec)
                out.append((row, value))
                continue
            vec: dict = {}
            for (m, p), a in row.items():
                for sub in comps[m]:
                    key = (sub, p)
                    w = vec.get(key, 0) ^ a
                    if w:
                        vec[key] = w
                    else:
                        vec.pop(key, None)
            value = 0
            for key, a in vec.items():
                value ^= gf_mul(a, content(key), spec)
            out.append((vec, value))
        expanded.append(out)
    measured, mismatches, violations = _measure(topo, plan, [len(rows) for rows in expanded])

    reports = []
    for k in (list(users) if users is not None else list(topo.users)):
        if basis == "message":
            span = SpanBasis(spec)
        else:
            span = SpanBasis(spec, known=lambda c, k=k: k in c[0].holders, known_value=content)
        received = 0
        for tx, rows in zip(plan.transmissions, expanded):
            if k not in tx.forward_to:
                continue
            for vec, value in rows:
                span.insert(vec, value)
                received += 1
        missing, wrong = [], 0
        for target, truth, label in _targets(plan, placement, k, basis, content, msg_value):
            got = span.solved_value(target)
            if got is None:
                missing.append(label)
            elif got != truth:
                wrong += 1
        decoded = not missing and not wrong
        reports.append(UserReport(k, decoded, received, span.rank, missing[:max_missing], wrong))
    return VerificationReport(plan.params(), reports, measured, plan.file_packets, mismatches, violations)


def _measure(topo: Topology, plan: DeliveryPlan, lengths: Sequence[int]):
    violations = []
    measured: dict[Link, int] = {l: 0 for l in plan.per_link_packets()}
    for tx, n in zip(plan.transmissions, lengths):
        served = set(topo.users_of(tx.relay))
        for k in tx.forward_to:
            if k not in served:
                violations.append(f"{tx.ident}: relay {tx.relay} forwards to user {k} it is not linked to")
        measured[tx.link] += n
        for k in tx.forward_to:
            link = Link("relay_user", tx.relay, k)
            measured[link] = measured.get(link, 0) + n
    declared = plan.per_link_packets()
    mismatches = [
        f"{l}: plan declares {declared.get(l, 0)} packets, simulation sent {n}"
        for l, n in measured.items() if declared.get(l, 0) != n
    ]
    return measured, mismatches, violations


def _targets(plan: DeliveryPlan, placement: Placement, k: int, basis: str, content, msg_value):
    """(coordinate, true symbol, (file, holders, packet)) for every packet user k must learn."""
    s = plan.packets_per_subfile
    want = plan.demand[k - 1]
    if basis == "message":
        for m, msg in enumerate(plan.messages):
            if k not in msg.J:
                continue
            sub = msg.component_for(k)
            for p in range(s):
                yield (m, p), msg_value((m, p)), (sub.file, sub.holders, p)
        return
    for sub in placement.subfiles(want):
        if k in sub.holders:
            continue
        for p in range(s):
            yield (sub, p), content((sub, p)), (sub.file, sub.holders, p)


def distinct_demand_plan(H: int, r: int, t: int, scheme: str, N: int | None = None,
                         packets_per_subfile: int | None = None, salt: int = 0) -> DeliveryPlan:
    topo = build_topology(H, r)
    N = topo.num_users if N is None else N
    placement = man_placement(topo, N, t)
    return COMPILERS[scheme](topo, placement, worst_case_demand(topo.num_users, N),
                             packets_per_subfile=packets_per_subfile, salt=salt)


@dataclass
class GridRow:
    H: int
    r: int
    t: int
    scheme: str
    decoded: bool | None  # None: oracle skipped, over the cost budget
    max_link_load: Fraction
    theorem1: Fraction
    formula_match: bool | None  # base scheme only
    balanced: bool
    q_sets_ok: bool
    seconds: float
    estimated_seconds: float = 0.0

    @property
    def verified(self) -> bool:
        return self.decoded is not None

    @property
    def ok(self) -> bool:
        return self.decoded is True and self.balanced and self.q_sets_ok and self.formula_match is not False


def q_sets_have_size(topo: Topology) -> bool:
    """|Q^k_{h,h'}| = r - 1 for every valid (k, h, h')."""
    for k in topo.users:
        Hk = topo.relays_of(k)
        for h in topo.relays:
            if h in Hk:
                continue
            for h2 in Hk:
                if len(q_set(topo, k, h, h2)) != topo.degree - 1:
                    return False
    return True


# Rough cost model of ``simulate`` fitted on a single 2020s CPU core: a per-row
# cost for every relay-to-user packet plus a cubic term for dense coded blocks.
SECONDS_PER_ROW = 7e-5
SECONDS_PER_DENSE_OP = 5e-6


def oracle_cost(plan: DeliveryPlan) -> float:
    """Estimated seconds ``simulate`` needs for ``plan`` (all users)."""
    rows = sum(tx.length * len(tx.forward_to) for tx in plan.transmissions)
    dense = 0
    layout = plan.extras.get("layout")
    if layout is not None:
        dense = sum(a * b * min(a, b) for a, b in layout.coded_blocks())
    return SECONDS_PER_ROW * rows + SECONDS_PER_DENSE_OP * dense


def check_cell(H: int, r: int, t: int, scheme: str, packets_per_subfile: int | str | None = "minimal",
               salt: int = 0, budget: float | None = None) -> GridRow:
    """Compile and simulate one distinct-demand cell.

    ``packets_per_subfile="minimal"`` uses the smallest whole-packet split;
    None uses the default r * lcm(1..H). With ``budget`` (seconds), the oracle
    is skipped when ``oracle_cost`` exceeds it; loads are then taken from the plan.
    """
    start = time.perf_counter()
    topo = build_topology(H, r)
    if packets_per_subfile == "minimal":
        packets_per_subfile = minimal_packets_per_subfile(topo, t)
    plan = distinct_demand_plan(H, r, t, scheme, packets_per_subfile=packets_per_subfile, salt=salt)
    cost = oracle_cost(plan)
    formula = theorem1_load(topo, t)
    if budget is not None and cost > budget:
        decoded = None
        relay = plan.relay_loads()
        measured = plan.max_link_load
    else:
        report = simulate(topo, plan.placement, plan, SimulationConfig(salt=salt))
        decoded = report.ok
        relay = {l.relay: v for l, v in report.measured_load.items() if l.kind == "server_relay"}
        measured = report.max_link_load
    return GridRow(
        H, r, t, scheme, decoded, measured, formula,
        (measured == formula) if scheme == "base" else None,
        len(set(relay.values())) <= 1, q_sets_have_size(topo),
        time.perf_counter() - start, cost,
    )


def grid_cells(Hs: Iterable[int], rs: Iterable[int], strict_degree: bool = False) -> list[tuple[int, int, int]]:
    """(H, r, t) for every t in [0..K]; ``strict_degree`` keeps only r < H."""
    rs = list(rs)
    return [
        (H, r, t)
        for H in Hs for r in rs
        if r <= H and not (strict_degree and r == H)
        for t in range(build_topology(H, r).num_users + 1)
    ]


def exhaustive_check(H_max: int, r_max: int, schemes: Sequence[str] = ("base", "improved"),
                     H_min: int = 1, cells: Iterable[tuple[int, int, int]] | None = None,
                     packets_per_subfile: int | str | None = "minimal", budget: float | None = None,
                     progress=None) -> list[GridRow]:
    """Simulate every (H, r, t) cell with distinct demands (N = K)."""
    if cells is None:
        cells = grid_cells(range(H_min, H_max + 1), range(1, r_max + 1))
    rows = []
    for (H, r, t), scheme in itertools.product(cells, schemes):
        row = check_cell(H, r, t, scheme, packets_per_subfile, budget=budget)
        if progress:
            progress(row)
        rows.append(row)
    return rows


GRID_COLUMNS = ["H", "r", "t", "scheme", "decoded", "max_link_load", "theorem1", "formula_match",
                "balanced", "q_sets_ok", "ok", "seconds", "estimated_seconds"]


def grid_csv(rows: Sequence[GridRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRID_COLUMNS)
    for row in rows:
        w.writerow([
            row.H, row.r, row.t, row.scheme, "" if row.decoded is None else int(row.decoded),
            fraction_str(row.max_link_load),
            fraction_str(row.theorem1), "" if row.formula_match is None else int(row.formula_match),
            int(row.balanced), int(row.q_sets_ok), int(row.ok), f"{row.seconds:.3f}",
            f"{row.estimated_seconds:.1f}",
        ])
    return buf.getvalue()
