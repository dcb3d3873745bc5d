"""Memory-load tradeoff for H=6, r=2, N=K=15 as exact-rational CSV.

Usage: python scripts/tradeoff_curve.py [--out results/tradeoff_curve.csv]
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from combcache.cli import ExperimentSpec, curve_csv


@dataclass(frozen=True)
class CurveConfig:
    relays: int = 6
    degree: int = 2
    files: int = 15
    out: Path = Path("results/tradeoff_curve.csv")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=CurveConfig.out)
    cfg = CurveConfig(out=p.parse_args().out)
    text = curve_csv(ExperimentSpec(cfg.relays, cfg.degree, cfg.files))
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    cfg.out.write_text(text)
    print(f"wrote {cfg.out}")
    header, *rows = [line.split(",") for line in text.splitlines()]
    col = {name: i for i, name in enumerate(header)}
    for row in rows:
        base = Fraction(int(row[col["load_base_num"]]), int(row[col["load_base_den"]]))
        improved = Fraction(int(row[col["load_improved_num"]]), int(row[col["load_improved_den"]]))
        print(f"t={row[0]:>2}  base={float(base):.4f}  improved={float(improved):.4f}")


if __name__ == "__main__":
    main()
