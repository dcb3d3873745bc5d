"""Uncoded symmetric (MAN) placement and the XOR multicast messages built on it.

Files are split into C(K, t) equal subfiles ``F_{i,W}`` indexed by the t-subset
``W`` of users caching them. For every (t+1)-subset ``J`` the server forms
``W_J = XOR_{j in J} F_{d_j, J - {j}}``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterator, NamedTuple, Sequence

from .errors import ParameterError
from .field import SymbolVector
from .topology import Topology


class SubfileId(NamedTuple):
    file: int
    holders: tuple[int, ...]


@dataclass(frozen=True)
class Placement:
    num_files: int
    t: int
    num_users: int

    @property
    def N(self) -> int:
        return self.num_files

    @property
    def K(self) -> int:
        return self.num_users

    @property
    def subfiles_per_file(self) -> int:
        return comb(self.num_users, self.t)

    @property
    def subfile_len(self) -> Fraction:
        """Subfile size as a fraction of one file."""
        return Fraction(1, self.subfiles_per_file)

    @property
    def memory(self) -> Fraction:
        """Cache size M in files (= t N / K)."""
        return Fraction(self.t * self.num_files, self.num_users)

    def subfiles(self, file: int) -> Iterator[SubfileId]:
        for W in itertools.combinations(range(1, self.num_users + 1), self.t):
            yield SubfileId(file, W)

    def holds(self, k: int, sub: SubfileId) -> bool:
        return k in sub.holders

    def cache(self, k: int) -> list[SubfileId]:
        """Z_k: every subfile whose holder set contains k, all files."""
        if not 1 <= k <= self.num_users:
            raise ParameterError(f"unknown user {k}")
        others = [u for u in range(1, self.num_users + 1) if u != k]
        out = []
        for i in range(1, self.num_files + 1):
            for rest in itertools.combinations(others, self.t - 1) if self.t else ():
                out.append(SubfileId(i, tuple(sorted(rest + (k,)))))
        return out

    def cache_size(self, k: int) -> Fraction:
        return len(self.cache(k)) * self.subfile_len


def man_placement(topo: Topology, N: int, t: int) -> Placement:
    K = topo.num_users
    if N < 1:
        raise ParameterError(f"need at least one file, got N={N}")
    if not 0 <= t <= K:
        raise ParameterError(f"t must lie in [0, {K}], got {t}")
    return Placement(N, t, K)


def worst_case_demand(K: int, N: int) -> tuple[int, ...]:
    """d_k = ((k-1) mod N) + 1; all-distinct whenever N >= K."""
    return tuple((k - 1) % N + 1 for k in range(1, K + 1))


def check_demand(d: Sequence[int], K: int, N: int) -> tuple[int, ...]:
    d = tuple(int(x) for x in d)
    if len(d) != K:
        raise ParameterError(f"demand has {len(d)} entries, expected K={K}")
    bad = [x for x in d if not 1 <= x <= N]
    if bad:
        raise ParameterError(f"demand entries {bad} outside [1, {N}]")
    return d


@dataclass(frozen=True)
class MulticastMessage:
    J: tuple[int, ...]
    components: tuple[SubfileId, ...]  # F_{d_j, J-{j}} for j in J, same order as J
    length: Fraction

    def component_for(self, k: int) -> SubfileId:
        return self.components[self.J.index(k)]

    def packet_vector(self, p: int) -> SymbolVector:
        """Packet p of W_J over the (SubfileId, packet) basis; all coefficients 1."""
        return SymbolVector({(sub, p): 1 for sub in self.components})


def generate_multicast_messages(placement: Placement, d: Sequence[int]) -> list[MulticastMessage]:
    K, t = placement.num_users, placement.t
    d = check_demand(d, K, placement.num_files)
    length = placement.subfile_len
    out = []
    for J in itertools.combinations(range(1, K + 1), t + 1):
        comps = tuple(
            SubfileId(d[j - 1], tuple(u for u in J if u != j)) for j in J
        )
        out.append(MulticastMessage(J, comps, length))
    return out
