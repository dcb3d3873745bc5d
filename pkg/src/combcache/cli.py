"""Command line: build plans, verify them, sweep tradeoff curves, print bounds.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .analysis import (cutset_lower_envelope, gap_report, lower_convex_envelope,
                       simplified_upper_bound, theorem1_load)
from .errors import ConfigurationError, ParameterError
from .placement import check_demand, man_placement, worst_case_demand
from .plan import DeliveryPlan, fraction_str
from .topology import build_topology
from .verification import COMPILERS, exhaustive_check, grid_csv, simulate

CURVE_HEADER = ["t", "M_num", "M_den", "load_base_num", "load_base_den", "load_improved_num",
                "load_improved_den", "eq4_num", "eq4_den", "cutset_num", "cutset_den", "gap_num", "gap_den"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    relays: int
    degree: int
    files: int
    ts: tuple[int, ...] | None = None
    Ms: tuple[Fraction, ...] | None = None
    schemes: tuple[str, ...] = ("base", "improved")
    demand: tuple[int, ...] | None = None  # None: worst case
    salt: int = 0
    packets_per_subfile: int | None = None

    def __post_init__(self):
        if self.ts is not None and self.Ms is not None:
            raise UsageError("give either t values or M values, not both")
        for s in self.schemes:
            if s not in COMPILERS:
                raise UsageError(f"unknown scheme {s!r}")

    @property
    def topology(self):
        return build_topology(self.relays, self.degree)

    def demand_for(self, K: int) -> tuple[int, ...]:
        if self.demand is None:
            return worst_case_demand(K, self.files)
        check_demand(self.demand, K, self.files)
        return self.demand

    def compile(self, t: int, scheme: str) -> DeliveryPlan:
        topo = self.topology
        placement = man_placement(topo, self.files, t)
        return COMPILERS[scheme](topo, placement, self.demand_for(topo.num_users),
                                 packets_per_subfile=self.packets_per_subfile, salt=self.salt)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _fraction_list(text: str) -> tuple[Fraction, ...]:
    try:
        return tuple(Fraction(x) for x in text.split(",") if x.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma-separated rationals, got {text!r}")


def _add_network(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--relays", type=int, required=required, help="H")
    p.add_argument("--degree", type=int, required=required, help="r, relays per user")
    p.add_argument("--files", type=int, required=required, help="N")
    p.add_argument("--salt", type=int, default=0)
    p.add_argument("--packets", type=int, default=None, help="packets per subfile (default r*lcm(1..H))")


def _spec(args, **kw) -> ExperimentSpec:
    return ExperimentSpec(args.relays, args.degree, args.files, salt=args.salt,
                          packets_per_subfile=args.packets, **kw)


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _summary(plan: DeliveryPlan) -> str:
    relay = plan.relay_loads()
    loads = sorted(set(relay.values()))
    return (f"scheme={plan.scheme} H={plan.topology.num_relays} r={plan.topology.degree} "
            f"N={plan.placement.num_files} t={plan.placement.t} transmissions={len(plan.transmissions)} "
            f"max_link_load={fraction_str(plan.max_link_load)} "
            f"server_relay_load={','.join(fraction_str(v) for v in loads)}")


def cmd_plan(args) -> int:
    spec = _spec(args, demand=args.demand)
    plan = spec.compile(args.t, args.scheme)
    _write(plan.dumps() + "\n", args.out)
    print(_summary(plan), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def _plan_from_file(path: str) -> DeliveryPlan:
    with open(path) as f:
        doc = json.load(f)
    try:
        p = doc["params"]
        spec = ExperimentSpec(p["relays"], p["degree"], p["files"], demand=tuple(p["demand"]),
                              salt=p["salt"], packets_per_subfile=p["packets_per_subfile"])
        plan = spec.compile(p["t"], p["scheme"])
        entries = doc["transmissions"]
        present = {(e["id"], e["link"]["type"], e["link"]["relay"], e["link"].get("user")): e["length_pkts"]
                   for e in entries}
    except (KeyError, TypeError) as e:
        raise UsageError(f"{path}: not a plan file ({e})")
    known = {tx.ident: tx for tx in plan.transmissions}
    for (ident, kind, relay, user), length in present.items():
        tx = known.get(ident)
        if tx is None or tx.relay != relay or length != tx.length:
            raise UsageError(f"{path}: transmission {ident} does not match the recompiled plan")

    def keep(tx):
        # a relay only forwards what it received from the server
        if (tx.ident, "server_relay", tx.relay, None) not in present:
            return None
        return tuple(k for k in tx.forward_to if (tx.ident, "relay_user", tx.relay, k) in present)

    return plan.restrict(keep)


def _report(plan: DeliveryPlan, args) -> int:
    rep = simulate(plan.topology, plan.placement, plan)
    if args.json:
        print(json.dumps(rep.to_json(), indent=1))
    for u in rep.users:
        if not u.decoded:
            where = ", ".join(f"F{f}{{{','.join(map(str, w))}}}[{p}]" for f, w, p in u.missing)
            print(f"user {u.user}: UNDECODABLE (rank {u.rank}, wrong {u.wrong}; missing {where})")
    for line in rep.load_mismatches + rep.violations:
        print(line)
    status = "PASS" if rep.ok else "FAIL"
    print(f"{status} {_summary(plan)} measured_max_link_load={fraction_str(rep.max_link_load)}")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_verify(args) -> int:
    if args.grid:
        schemes = tuple(args.schemes.split(","))
        rows = exhaustive_check(args.max_relays, args.max_degree, schemes, H_min=args.min_relays,
                                budget=args.budget, progress=(lambda r: print(f"{r.H} {r.r} {r.t} {r.scheme} ok={r.ok}",
                                                           file=sys.stderr)) if args.progress else None)
        _write(grid_csv(rows), args.out)
        return EXIT_OK if all(r.ok for r in rows) else EXIT_FAIL
    if args.plan:
        plan = _plan_from_file(args.plan)
    else:
        if None in (args.relays, args.degree, args.files, args.t, args.scheme):
            raise UsageError("verify needs --plan FILE, --grid, or --relays/--degree/--files/--t/--scheme")
        plan = _spec(args, demand=args.demand).compile(args.t, args.scheme)
    return _report(plan, args)


def curve_rows(spec: ExperimentSpec) -> list[list]:
    """One row per t (or per requested M), loads from compiled plans."""
    topo = spec.topology
    K, N = topo.num_users, spec.files
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cutset = cutset_lower_envelope(topo, N)
    grid_ts = list(range(K + 1))
    wanted_ts = list(spec.ts) if spec.ts is not None else grid_ts
    loads: dict[str, dict[int, Fraction]] = {s: {} for s in spec.schemes}
    for s in spec.schemes:
        for t in wanted_ts:
            loads[s][t] = spec.compile(t, s).max_link_load

    def row(t_label, M, base, improved, eq4):
        bound = cutset(M)
        if base is None:
            gap = None
        elif bound == 0:
            gap = Fraction(1) if base == 0 else None
        else:
            gap = base / bound
        cells = [t_label]
        for v in (M, base, improved, eq4, bound, gap):
            cells += ["", ""] if v is None else [v.numerator, v.denominator]
        return cells

    rows = []
    if spec.Ms is None:
        for t in wanted_ts:
            M = Fraction(t * N, K)
            eq4 = simplified_upper_bound(topo, t)
            rows.append(row(t, M, loads.get("base", {}).get(t), loads.get("improved", {}).get(t), eq4))
        return rows
    # memory sharing between grid points for M off the grid
    envs = {s: lower_convex_envelope([(Fraction(t * N, K), loads[s][t]) for t in grid_ts]) for s in spec.schemes}
    eq4_env = lower_convex_envelope([(Fraction(t * N, K), simplified_upper_bound(topo, t)) for t in grid_ts])
    for M in spec.Ms:
        if not 0 <= M <= N:
            raise UsageError(f"M must lie in [0, {N}], got {M}")
        t = M * K / N
        label = t.numerator if t.denominator == 1 else f"~{fraction_str(t)}"
        rows.append(row(label, M, envs["base"](M) if "base" in envs else None,
                        envs["improved"](M) if "improved" in envs else None, eq4_env(M)))
    return rows


def curve_csv(spec: ExperimentSpec) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    w.writerows(curve_rows(spec))
    return buf.getvalue()


def cmd_curve(args) -> int:
    schemes = tuple(args.schemes.split(","))
    spec = _spec(args, ts=args.t, Ms=args.M, schemes=schemes)
    _write(curve_csv(spec), args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    topo = build_topology(args.relays, args.degree)
    K, N = topo.num_users, args.files
    if N < K:
        print(f"warning: N={N} < K={K}, outside the lower bound's hypothesis", file=sys.stderr)
    ts = args.t if args.t is not None else tuple(range(K + 1))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "M", "load", "load_literal", "eq4", "cutset", "uncoded_gap", "factor", "within"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        env = cutset_lower_envelope(topo, N)
    for t in ts:
        load = theorem1_load(topo, t)
        g = gap_report(topo, N, t, load, env)
        M = Fraction(t * N, K)
        w.writerow([t, fraction_str(M), fraction_str(load), fraction_str(theorem1_load(topo, t, literal=True)),
                    fraction_str(simplified_upper_bound(topo, t)), fraction_str(env(M)),
                    fraction_str(g.uncoded_gap), fraction_str(g.factor), int(g.within_factor)])
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="combcache", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="compile a delivery plan to JSON")
    _add_network(p)
    p.add_argument("--t", type=int, required=True, help="replication, t = KM/N")
    p.add_argument("--scheme", choices=sorted(COMPILERS), default="base")
    p.add_argument("--demand", type=_int_list, default=None, help="d_1,...,d_K (default worst case)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify", help="simulate a plan and check every user decodes")
    _add_network(p, required=False)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--scheme", choices=sorted(COMPILERS), default=None)
    p.add_argument("--demand", type=_int_list, default=None)
    p.add_argument("--plan", default=None, help="plan JSON; transmissions absent from it are not sent")
    p.add_argument("--json", action="store_true", help="also print the full report")
    p.add_argument("--grid", action="store_true", help="run the distinct-demand grid instead")
    p.add_argument("--min-relays", type=int, default=1)
    p.add_argument("--max-relays", type=int, default=4)
    p.add_argument("--max-degree", type=int, default=3)
    p.add_argument("--schemes", default="base,improved")
    p.add_argument("--budget", type=float, default=None,
                   help="skip the oracle on cells estimated to take longer (seconds); skipped cells fail")
    p.add_argument("--progress", action="store_true")
    p.add_argument("--out", default=None, help="grid CSV path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("curve", help="memory-load tradeoff as exact-rational CSV")
    _add_network(p)
    p.add_argument("--t", type=_int_list, default=None, help="t values (default 0..K)")
    p.add_argument("--M", type=_fraction_list, default=None, help="memory sizes; off-grid ones use memory sharing")
    p.add_argument("--schemes", default="base,improved")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("bounds", help="closed-form load, upper bound, cut-set bound and gap per t")
    _add_network(p)
    p.add_argument("--t", type=_int_list, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParameterError, ConfigurationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
