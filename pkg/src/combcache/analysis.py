"""Closed-form loads, bounds and memory-sharing envelopes, all in exact rationals."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Sequence

from .errors import ParameterError
from .topology import Topology


def _min_missing(topo: Topology, J: Sequence[int]) -> int:
    """min_h |J - U_h| = |J| - max_h |U_h & J|."""
    counts = [0] * topo.num_relays
    for k in J:
        for h in topo.relays_of(k):
            counts[h - 1] += 1
    return len(J) - max(counts, default=0)


def theorem1_load(topo: Topology, t: int, literal: bool = False) -> Fraction:
    """Max link-load of the two-phase scheme at replication t.

    Sums ``(1 + min_h |J - U_h| / r) / (H C(K, t))`` over all (t+1)-subsets J.
    ``literal=True`` sums over t-subsets instead, as the closed form is printed;
    that variant does not match the worked examples and is kept for comparison.
    """
    K, H, r = topo.num_users, topo.num_relays, topo.degree
    if not 0 <= t <= K:
        raise ParameterError(f"t must lie in [0, {K}], got {t}")
    size = t if literal else t + 1
    total = Fraction(0)
    for J in itertools.combinations(range(1, K + 1), size):
        total += 1 + Fraction(_min_missing(topo, J), r)
    return total / (H * comb(K, t))


def simplified_upper_bound(topo: Topology, t: int) -> Fraction:
    K, H, r = topo.num_users, topo.num_relays, topo.degree
    if not 0 <= t <= K:
        raise ParameterError(f"t must lie in [0, {K}], got {t}")
    return comb(K, t + 1) * (1 + Fraction(t, r)) / (H * comb(K, t))


def cutset_point(topo: Topology, t: int) -> Fraction:
    """C(K, t+1) / (H C(K, t)); zero at t = K."""
    K, H = topo.num_users, topo.num_relays
    return Fraction(comb(K, t + 1), H * comb(K, t))


@dataclass(frozen=True)
class TradeoffCurve:
    points: tuple[tuple[Fraction, Fraction], ...]
    kind: str  # "achievable" | "lower_bound"

    def __post_init__(self):
        ms = [m for m, _ in self.points]
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ParameterError("curve memory values must be strictly increasing")

    def __call__(self, M) -> Fraction:
        """Piecewise-linear value at M (exact)."""
        M = Fraction(M)
        pts = self.points
        if not pts or M < pts[0][0] or M > pts[-1][0]:
            raise ParameterError(f"M={M} outside the curve's range")
        for (m0, v0), (m1, v1) in zip(pts, pts[1:]):
            if m0 <= M <= m1:
                return v0 + (v1 - v0) * (M - m0) / (m1 - m0)
        return pts[0][1]

    def is_convex(self) -> bool:
        slopes = [(v1 - v0) / (m1 - m0) for (m0, v0), (m1, v1) in zip(self.points, self.points[1:])]
        return all(a <= b for a, b in zip(slopes, slopes[1:]))

    def is_non_increasing(self) -> bool:
        return all(b[1] <= a[1] for a, b in zip(self.points, self.points[1:]))


def lower_convex_envelope(points, kind: str = "achievable") -> TradeoffCurve:
    """Lower hull (monotone chain) of (M, load) points, then made non-increasing.

    Memory sharing between two operating points realises every point on the
    segment joining them, and extra memory can always be left unused, so the
    achievable curve is the lower hull clipped to its minimum from the right.
    """
    pts = sorted({(Fraction(m), Fraction(v)) for m, v in points})
    best: dict[Fraction, Fraction] = {}
    for m, v in pts:
        best[m] = min(v, best.get(m, v))
    pts = sorted(best.items())
    hull: list[tuple[Fraction, Fraction]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop hull[-1] unless it lies strictly below the chord hull[-2] -> p
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    floor = min(v for _, v in hull)
    cut = next(i for i, (_, v) in enumerate(hull) if v == floor)
    hull = hull[: cut + 1] + [(m, floor) for m, _ in hull[cut + 1:]]
    return TradeoffCurve(tuple(hull), kind)


def theorem1_curve(topo: Topology, N: int) -> TradeoffCurve:
    K = topo.num_users
    pts = [(Fraction(t * N, K), theorem1_load(topo, t)) for t in range(K + 1)]
    return lower_convex_envelope(pts, "achievable")


def cutset_lower_envelope(topo: Topology, N: int) -> TradeoffCurve:
    K = topo.num_users
    if N < K:
        warnings.warn(f"N={N} < K={K}: outside the hypothesis of the lower bound", stacklevel=2)
    pts = [(Fraction(t * N, K), cutset_point(topo, t)) for t in range(K)]
    pts.append((Fraction(N), Fraction(0)))
    return lower_convex_envelope(pts, "lower_bound")


@dataclass(frozen=True)
class GapReport:
    uncoded_gap: Fraction
    general_gap: Fraction
    factor: Fraction  # 1 + t/r

    @property
    def within_factor(self) -> bool:
        return self.uncoded_gap <= self.factor


def gap_report(topo: Topology, N: int, t: int, measured_load: Fraction,
               envelope: TradeoffCurve | None = None) -> GapReport:
    if envelope is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            envelope = cutset_lower_envelope(topo, N)
    M = Fraction(t * N, topo.num_users)
    bound = envelope(M)
    factor = 1 + Fraction(t, topo.degree)
    if bound == 0:
        if measured_load != 0:
            raise ParameterError("positive load against a zero lower bound")
        gap = Fraction(1)  # 0/0 at M = N: both vanish
    else:
        gap = Fraction(measured_load) / bound
    return GapReport(gap, 2 * gap, factor)
