"""Regenerate the closed-form tables and both simulation presets into one directory.

    python3 scripts/reproduce_figures.py --out results
"""

import argparse
from pathlib import Path

from iecs.cli import PRESETS, main


def run(argv):
    code = main(argv)
    if code:
        raise SystemExit(f"iecs {' '.join(argv)} exited with {code}")


def reproduce(out: Path, seed: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    run(["analyze", "--delay", "--out", str(out / "delay.csv")])
    run(["analyze", "--admissible", "--M", "8", "--R", "0", "--out", str(out / "admissible_m8_r0.csv")])
    run(["analyze", "--admissible", "--M", "7", "--R", "1", "--out", str(out / "admissible_m7_r1.csv")])
    run(["analyze", "--overlay", "--channels", "8", "--R", "1", "--out", str(out / "overlay.csv")])
    run(["analyze", "--success", "--M", "7", "--R", "1", "--pe", "0.1", "--lambda-max", "64", "--out", str(out / "success_p010.csv")])
    run(["analyze", "--success", "--M", "7", "--R", "1", "--pe", "1/8", "--lambda-max", "64", "--out", str(out / "success_p0125.csv")])
    run(["analyze", "--success", "--M", "7", "--R", "1", "--pe", "0.15", "--lambda-max", "64", "--out", str(out / "success_p015.csv")])
    for number in sorted(PRESETS):
        run(["simulate", "--figure", str(number), "--seed", str(seed), "--out", str(out)])


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()
    reproduce(args.out, args.seed)
    print(f"wrote tables and presets to {args.out}/")
