"""The (H, r) combination network: server -> H relays -> C(H, r) users.

Users and relays are 1-based. User ``k`` is attached to the ``k``-th r-subset
of ``[1..H]`` in lexicographic order, so for H=4, r=2 user 1 sees relays {1, 2}
and relay 1 serves users {1, 2, 3}.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Iterable

from .errors import ParameterError


def rank_subset(subset: Iterable[int], n: int) -> int:
    """0-based lexicographic rank of a k-subset of [1..n]."""
    s = sorted(subset)
    k = len(s)
    if len(set(s)) != k or (s and (s[0] < 1 or s[-1] > n)):
        raise ParameterError(f"{s} is not a subset of [1..{n}]")
    rank = 0
    prev = 0
    for i, x in enumerate(s):
        # count subsets whose i-th element is smaller than x
        for y in range(prev + 1, x):
            rank += comb(n - y, k - i - 1)
        prev = x
    return rank


def unrank_subset(index: int, n: int, k: int) -> tuple[int, ...]:
    """Inverse of :func:`rank_subset`."""
    total = comb(n, k)
    if not 0 <= index < total:
        raise ParameterError(f"rank {index} out of range [0, {total})")
    out = []
    x = 1
    for i in range(k):
        while True:
            block = comb(n - x, k - i - 1)
            if index < block:
                break
            index -= block
            x += 1
        out.append(x)
        x += 1
    return tuple(out)


@dataclass(frozen=True)
class Topology:
    num_relays: int
    degree: int
    user_relays: tuple[tuple[int, ...], ...] = field(repr=False)
    relay_users: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def H(self) -> int:
        return self.num_relays

    @property
    def r(self) -> int:
        return self.degree

    @property
    def num_users(self) -> int:
        return len(self.user_relays)

    K = num_users

    @property
    def users(self) -> range:
        return range(1, self.num_users + 1)

    @property
    def relays(self) -> range:
        return range(1, self.num_relays + 1)

    def relays_of(self, k: int) -> tuple[int, ...]:
        """H_k, ascending."""
        self._check_user(k)
        return self.user_relays[k - 1]

    def users_of(self, h: int) -> tuple[int, ...]:
        """U_h, ascending."""
        if not 1 <= h <= self.num_relays:
            raise ParameterError(f"unknown relay {h}")
        return self.relay_users[h - 1]

    def user_of_relays(self, relays: Iterable[int]) -> int:
        """The user attached to exactly this r-subset of relays."""
        s = tuple(sorted(relays))
        if len(s) != self.degree:
            raise ParameterError(f"{s} is not an r-subset with r={self.degree}")
        return rank_subset(s, self.num_relays) + 1

    def _check_user(self, k: int) -> None:
        if not 1 <= k <= self.num_users:
            raise ParameterError(f"unknown user {k} (K={self.num_users})")


def build_topology(H: int, r: int) -> Topology:
    if H < 1 or r < 1 or r > H:
        raise ParameterError(f"need 1 <= r <= H, got H={H}, r={r}")
    user_relays = tuple(itertools.combinations(range(1, H + 1), r))
    relay_users = tuple(
        tuple(k for k, rel in enumerate(user_relays, start=1) if h in rel)
        for h in range(1, H + 1)
    )
    return Topology(H, r, user_relays, relay_users)


def relays_of_userset(topo: Topology, users: Iterable[int]) -> set[int]:
    """H_W: union of the relay sets of the users in W."""
    out: set[int] = set()
    for k in users:
        out.update(topo.relays_of(k))
    return out
