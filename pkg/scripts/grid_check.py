"""Distinct-demand grid: compile both schemes, run the decodability oracle, write CSV.

Cells whose estimated oracle time exceeds --budget seconds keep their compiled
loads but are marked unverified (empty ``decoded`` column).

Usage: python scripts/grid_check.py [--max-relays 6] [--budget 60] [--out results/grid.csv]
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from combcache import exhaustive_check, grid_csv
from combcache.verification import grid_cells


@dataclass(frozen=True)
class GridConfig:
    min_relays: int = 3
    max_relays: int = 6
    degrees: tuple[int, ...] = (2, 3)
    budget: float | None = 60.0
    out: Path = Path("results/grid.csv")


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--min-relays", type=int, default=GridConfig.min_relays)
    p.add_argument("--max-relays", type=int, default=GridConfig.max_relays)
    p.add_argument("--budget", type=float, default=GridConfig.budget, help="seconds per cell; <=0 for none")
    p.add_argument("--out", type=Path, default=GridConfig.out)
    a = p.parse_args()
    cfg = GridConfig(a.min_relays, a.max_relays, budget=a.budget if a.budget and a.budget > 0 else None, out=a.out)

    def progress(row):
        state = "skipped" if row.decoded is None else ("ok" if row.ok else "FAILED")
        print(f"H={row.H} r={row.r} t={row.t:>2} {row.scheme:<8} load={row.max_link_load} {state} "
              f"({row.seconds:.1f}s, estimate {row.estimated_seconds:.1f}s)", flush=True)

    cells = grid_cells(range(cfg.min_relays, cfg.max_relays + 1), cfg.degrees, strict_degree=True)
    rows = exhaustive_check(cfg.max_relays, max(cfg.degrees), cells=cells, budget=cfg.budget, progress=progress)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    cfg.out.write_text(grid_csv(rows))
    verified = sum(r.verified for r in rows)
    failed = [r for r in rows if r.verified and not r.ok]
    print(f"wrote {cfg.out}: {verified}/{len(rows)} cells verified, {len(failed)} failed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
