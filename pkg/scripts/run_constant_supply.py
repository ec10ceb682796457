"""Constant-supply benchmark: rights trading vs the free market.

Runs the two three-buyer scenarios (over-demanded claims, and the same
claims shrunk five-fold) under the proportional and contested-garment
mechanisms plus the free-market baseline, and writes one CSV per run.

    python scripts/run_constant_supply.py [outdir]
"""

import sys
from pathlib import Path

from rightsmarket.cli import load_scenario, write_trace_csv
from rightsmarket.engine import run

PRESETS = [
    "scenario-a-proportional",
    "scenario-a-contested-garment",
    "free-market-a",
    "scenario-b-proportional",
    "scenario-b-contested-garment",
    "free-market-b",
]


def main() -> None:
    outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
    outdir.mkdir(parents=True, exist_ok=True)
    for name in PRESETS:
        scenario = load_scenario(name)
        trace = run(scenario.config)
        target = outdir / f"{name}.csv"
        with open(target, "w", newline="") as fh:
            write_trace_csv(trace, fh)
        zero = trace.first_all_zero_frustration_round()
        print(
            f"{name}: E_f({trace.horizon}) = {trace.expected_frustration():.4f}, "
            f"final price {trace.price_path()[-1]:.6f}, "
            f"all-zero frustration from round {zero} -> {target}"
        )


if __name__ == "__main__":
    main()
