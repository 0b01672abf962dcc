"""Regenerate every sweep table into results/ (about an hour on one core).

    python scripts/run_all.py [--only rk-sweep] [--threads 4]
"""

import argparse
import sys
from pathlib import Path

from rydprep.cli import main as rydprep

HERE = Path(__file__).resolve().parent
RUNS = {
    "rk-sweep": ["rk-sweep", "--n", "5", "--method", "direct"],
    "rk-scaling": ["rk-scaling", "--config", str(HERE / "configs" / "rk_scaling.toml")],
    "w-sweep": ["w-sweep", "--config", str(HERE / "configs" / "w_sweep.toml")],
}


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", choices=sorted(RUNS), action="append")
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--threads", default="1")
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    status = 0
    for name in args.only or RUNS:
        out = Path(args.out_dir) / f"{name}.csv"
        print(f"== {name} -> {out}", flush=True)
        status = max(status, rydprep(RUNS[name] + ["--output", str(out), "--threads", args.threads,
                                                   "--verbose"]))
    sys.exit(status)
