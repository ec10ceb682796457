"""Asymptotic frustration and price as the number of buyers grows.

Reproduces the buyer-count sweep in both claim regimes (total claim double
the supply, and claims shrunk by the number of buyers), 10 Dirichlet draws
per size, horizon 10 rounds per buyer.

    python scripts/run_buyer_sweep.py [outdir]
"""

import sys
from pathlib import Path

from rightsmarket.cli import main as cli_main


def main() -> None:
    outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
    outdir.mkdir(parents=True, exist_ok=True)
    for label, scale in (("double-demand", "1.0"), ("scaled-claims", "inv")):
        target = outdir / f"buyer-sweep-{label}.csv"
        code = cli_main(
            [
                "sweep",
                "--sizes",
                "3:10",
                "--seeds",
                "10",
                "--claim-scale",
                scale,
                "--out",
                str(target),
            ]
        )
        if code != 0:
            raise SystemExit(code)


if __name__ == "__main__":
    main()
