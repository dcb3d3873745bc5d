from __future__ import annotations

from functools import lru_cache

import pytest

from combcache import build_topology, compile_base, compile_improved, man_placement, worst_case_demand


@lru_cache(maxsize=None)
def compiled(H: int, r: int, t: int, scheme: str = "base", N: int | None = None, s: int | None = None):
    topo = build_topology(H, r)
    N = topo.num_users if N is None else N
    placement = man_placement(topo, N, t)
    compile_ = compile_base if scheme == "base" else compile_improved
    return compile_(topo, placement, worst_case_demand(topo.num_users, N), packets_per_subfile=s)


@pytest.fixture
def net42_t2_base():
    """(H=4, r=2, N=K=6, t=2), demands d = (1, ..., 6), base scheme."""
    return compiled(4, 2, 2, "base")


@pytest.fixture
def net42_t3_improved():
    """(H=4, r=2, N=K=6, t=3), improved scheme."""
    return compiled(4, 2, 3, "improved")
