import json
from fractions import Fraction

import pytest

from combcache import (GF256, ParameterError, SimulationConfig, VerificationError, build_topology,
                       check_cell, compile_base, grid_csv, man_placement, minimal_packets_per_subfile,
                       oracle_cost, simulate)
from combcache.verification import file_symbol, grid_cells
from conftest import compiled
from test_field import slow_mul


def sim(plan, **kw):
    return simulate(plan.topology, plan.placement, plan, **kw)


def drop(plan, victim):
    return plan.restrict(lambda tx: None if tx is victim else tx.forward_to)


def test_t2_base_decodes_at_declared_load(net42_t2_base):
    rep = sim(net42_t2_base)
    assert rep.ok and rep.max_link_load == Fraction(7, 15)
    assert set(rep.measured_load.values()) >= {Fraction(7, 15)}


def test_t3_decodes_at_declared_load(net42_t3_improved):
    rep = sim(net42_t3_improved)
    assert rep.ok and rep.max_link_load == Fraction(47, 160)


@pytest.mark.parametrize("H, r, t, scheme", [
    (3, 2, 1, "base"), (3, 2, 1, "improved"), (4, 2, 2, "base"), (4, 2, 2, "improved"),
    (4, 3, 1, "improved"), (3, 3, 0, "base"),
])
def test_coordinate_systems_agree(H, r, t, scheme):
    s = minimal_packets_per_subfile(build_topology(H, r), t)
    plan = compiled(H, r, t, scheme, s=s)
    a, b = sim(plan, basis="message"), sim(plan, basis="subfile")
    assert a.ok and b.ok
    assert a.measured_packets == b.measured_packets


def test_message_basis_refuses_repeated_demands():
    topo = build_topology(4, 2)
    placement = man_placement(topo, 3, 2)
    plan = compile_base(topo, placement, (1, 1, 2, 2, 3, 3))
    with pytest.raises(ParameterError):
        simulate(topo, placement, plan, basis="message")
    assert simulate(topo, placement, plan).ok


def test_all_users_cached_everything():
    plan = compiled(4, 2, 6, "base")
    rep = sim(plan)
    assert rep.ok and rep.max_link_load == 0 and not plan.transmissions


# Independent span oracle: dense Gauss-Jordan over GF(2^8) with a table built
# from the carry-less product, over coordinates the user does not cache.
MUL = [[slow_mul(a, b, GF256.poly, 8) for b in range(256)] for a in range(256)]
INV = [0] + [next(x for x in range(1, 256) if MUL[a][x] == 1) for a in range(1, 256)]


def rref(rows, ncols):
    basis = {}  # pivot column -> row
    for row in rows:
        row = list(row)
        for c, prow in basis.items():
            if row[c]:
                f = row[c]
                row = [v ^ MUL[f][w] for v, w in zip(row, prow)]
        piv = next((c for c in range(ncols) if row[c]), None)
        if piv is None:
            continue
        inv = INV[row[piv]]
        row = [MUL[inv][v] for v in row]
        for c in basis:
            if basis[c][piv]:
                f = basis[c][piv]
                basis[c] = [v ^ MUL[f][w] for v, w in zip(basis[c], row)]
        basis[piv] = row
    return basis


def in_span(basis, col, ncols):
    row = [0] * ncols
    row[col] = 1
    for c, prow in basis.items():
        if row[c]:
            f = row[c]
            row = [v ^ MUL[f][w] for v, w in zip(row, prow)]
    return not any(row)


def dense_decodes(plan, k):
    """Does user k's cache plus its received rows pin every packet of its file?"""
    comps = [m.components for m in plan.messages]
    rows = []
    for tx in plan.transmissions:
        if k not in tx.forward_to:
            continue
        for row in tx.rows(GF256):
            vec = {}
            for (m, p), a in row.items():
                for sub in comps[m]:
                    if k not in sub.holders:
                        vec[(sub, p)] = vec.get((sub, p), 0) ^ a
            rows.append(vec)
    s = plan.packets_per_subfile
    want = [(sub, p) for sub in plan.placement.subfiles(plan.demand[k - 1])
            if k not in sub.holders for p in range(s)]
    cols = sorted({c for v in rows for c in v} | set(want), key=repr)
    index = {c: i for i, c in enumerate(cols)}
    dense = []
    for v in rows:
        row = [0] * len(cols)
        for c, a in v.items():
            row[index[c]] = a
        dense.append(row)
    basis = rref(dense, len(cols))
    return all(in_span(basis, index[c], len(cols)) for c in want)


@pytest.mark.parametrize("H, r, t, scheme", [(4, 2, 2, "base"), (4, 2, 3, "improved"), (3, 2, 1, "improved")])
def test_dense_oracle_agrees(H, r, t, scheme):
    s = minimal_packets_per_subfile(build_topology(H, r), t)
    plan = compiled(H, r, t, scheme, s=s)
    rep = sim(plan, basis="subfile")
    for u in rep.users:
        assert u.decoded == dense_decodes(plan, u.user)


def test_dense_oracle_sees_tampering():
    s = minimal_packets_per_subfile(build_topology(4, 2), 2)
    plan = compiled(4, 2, 2, "base", s=s)
    bad = drop(plan, plan.phase2[0])
    rep = sim(bad, basis="subfile")
    assert not rep.all_decoded
    for u in rep.users:
        assert u.decoded == dense_decodes(bad, u.user)


def test_every_deletion_breaks_t2_plan(net42_t2_base):
    for tx in net42_t2_base.transmissions:
        rep = sim(drop(net42_t2_base, tx))
        assert not rep.all_decoded, tx.ident
        assert set(rep.failed_users()) <= set(tx.forward_to)


def test_dropping_a_forward_is_noticed(net42_t2_base):
    victim = net42_t2_base.phase1[0]
    k = victim.forward_to[0]
    bad = net42_t2_base.restrict(lambda tx: tuple(u for u in tx.forward_to if u != k) if tx is victim else tx.forward_to)
    rep = sim(bad)
    assert rep.failed_users() == [k]
    with pytest.raises(VerificationError) as err:
        rep.raise_for_failure()
    assert err.value.user == k
    assert rep.users[k - 1].missing


def test_solved_symbols_are_the_file_content(net42_t2_base):
    for salt in (0, 7):
        rep = sim(net42_t2_base, basis="subfile", config=SimulationConfig(salt=salt))
        assert all(u.wrong == 0 and u.decoded for u in rep.users)
    subs = list(net42_t2_base.placement.subfiles(1))
    a = [file_symbol(sub, p, 0, GF256) for sub in subs for p in range(4)]
    b = [file_symbol(sub, p, 7, GF256) for sub in subs for p in range(4)]
    assert a != b and len(set(a)) > 1


def test_config_checks_packet_count(net42_t2_base):
    with pytest.raises(ParameterError):
        sim(net42_t2_base, config=SimulationConfig(packets_per_subfile=net42_t2_base.packets_per_subfile + 1))


def test_report_json_round_trips(net42_t2_base):
    data = json.loads(json.dumps(sim(net42_t2_base).to_json()))
    assert data["ok"] and data["max_link_load"] == "7/15"
    assert set(data["server_relay_load"].values()) == {"7/15"}
    assert len(data["users"]) == 6


def test_cost_model_orders_cells():
    small = oracle_cost(compiled(4, 2, 2, "base"))
    big = oracle_cost(compiled(5, 2, 3, "improved"))
    assert 0 < small < big


def test_check_cell_and_budget():
    row = check_cell(4, 2, 2, "base")
    assert row.verified and row.ok and row.formula_match and row.max_link_load == Fraction(7, 15)
    skipped = check_cell(4, 2, 2, "base", budget=0.0)
    assert not skipped.verified and not skipped.ok
    assert skipped.max_link_load == Fraction(7, 15) and skipped.formula_match
    text = grid_csv([row, skipped])
    lines = text.splitlines()
    assert lines[0].startswith("H,r,t,scheme,decoded") and len(lines) == 3
    assert lines[2].split(",")[4] == ""


def test_grid_cells():
    cells = grid_cells([3, 4], [2, 3], strict_degree=True)
    assert (3, 3, 0) not in cells and (4, 3, 4) in cells
    assert len(cells) == (3 + 1) + (6 + 1) + (4 + 1)
