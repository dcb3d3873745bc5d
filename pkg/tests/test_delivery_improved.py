from fractions import Fraction

import pytest

from combcache import GF256, SpanBasis, build_topology
from combcache.delivery_improved import LSet, XSet, stage1_combine, stage2_size

from conftest import compiled


def xsets_at(plan, relay):
    return {(x.receivers, x.knowers): x for x in plan.extras["layout"].x_sets.values() if x.relay == relay}


def lsets_at(plan, relay):
    return {l.cover: l for l in plan.extras["layout"].l_sets[relay]}


def test_piece_of_four_relay_message_feeds_two_receiver_set(net42_t3_improved):
    layout = net42_t3_improved.extras["layout"]
    x = xsets_at(net42_t3_improved, 1)[((1, 2), (3,))]
    found = []
    for ci, _ in x.contributions:
        code = layout.codes[ci]
        p = layout.pieces[code.piece]
        if p.J == (1, 2, 5, 6) and p.relay == 4:
            found.append(code.rows_per_relay * 2 == p.length)
    assert found == [True]


def test_two_receiver_sets_split_cover_evenly(net42_t3_improved):
    xs = {k: v for k, v in xsets_at(net42_t3_improved, 1).items() if tuple(sorted(k[0] + k[1])) == (1, 2, 3)}
    two = [x for (W1, W2), x in xs.items() if len(W1) == 2]
    assert len(two) == 3
    union = sum(x.size for x in xs.values())
    assert all(3 * x.size == union for x in two)


def test_stage1_pair_reduces_to_xor(net42_t3_improved):
    L = lsets_at(net42_t3_improved, 1)[(1, 2)]
    x12, x21 = xsets_at(net42_t3_improved, 1)[((1,), (2,))], xsets_at(net42_t3_improved, 1)[((2,), (1,))]
    assert x12.size == x21.size
    assert L.size == x12.size and L.mode == "xor"


def test_stage1_triple_needs_two_thirds(net42_t3_improved):
    L = lsets_at(net42_t3_improved, 1)[(1, 2, 3)]
    x = xsets_at(net42_t3_improved, 1)[((2, 3), (1,))]
    assert L.size == 2 * x.size and L.mode == "cauchy"


def test_single_source_is_copied():
    x = XSet(1, (1,), (2,), [], 6)
    L = stage1_combine(1, (1, 2), [x])
    assert L.size == 6 and L.mode == "copy"


def test_one_lset_passes_through():
    topo = build_topology(4, 2)
    L = LSet(1, (1, 2), [XSet(1, (1,), (2,), [], 4)], 4, "copy")
    assert stage2_size(topo, 1, [L]) == 4


def test_known_to_requires_knower_in_every_source(net42_t3_improved):
    L = lsets_at(net42_t3_improved, 1)[(1, 2, 3)]
    assert not any(L.known_to(k) for k in (1, 2, 3))
    assert L.known_to(4) is False  # not in the cover: counted as unknown


def test_t3_loads(net42_t3_improved):
    assert set(net42_t3_improved.relay_loads(phases=(2,)).values()) == {Fraction(17, 160)}
    assert net42_t3_improved.max_link_load == Fraction(47, 160)
    base = compiled(4, 2, 3, "base")
    assert set(base.relay_loads(phases=(2,)).values()) == {Fraction(18, 160)}
    assert base.max_link_load - net42_t3_improved.max_link_load == Fraction(1, 160)


def test_stage2_forwards_everything_to_the_relay_users(net42_t3_improved):
    for tx in net42_t3_improved.phase2:
        assert tx.forward_to == net42_t3_improved.topology.users_of(tx.relay)


@pytest.mark.parametrize("H, r", [(3, 2), (4, 2), (4, 3), (5, 2), (5, 3)])
def test_improved_never_worse(H, r):
    for t in range(build_topology(H, r).num_users + 1):
        assert compiled(H, r, t, "improved").max_link_load <= compiled(H, r, t, "base").max_link_load


def row_span(rows):
    b = SpanBasis(GF256)
    for row in rows:
        b.insert(row)
    return b


def test_single_receiver_sets_reproduce_base_groups():
    """With only one-receiver X-sets, stage 1 sends the same span as the XOR groups."""
    base, imp = compiled(4, 2, 2, "base"), compiled(4, 2, 2, "improved")
    layout = imp.extras["layout"]
    assert all(len(x.receivers) == 1 for x in layout.x_sets.values())
    groups = {(tx.relay, tx.forward_to): tx.rows(base.field) for tx in base.phase2}
    for h, ls in layout.l_sets.items():
        for L in ls:
            mine = layout.l_packets(L, imp.field)
            theirs = groups[(h, L.cover)]
            a, b = row_span(mine), row_span(theirs)
            assert a.rank == b.rank == len(theirs)
            assert all(a.contains(row) for row in theirs)
