"""Print the headline numbers from sweep tables written by run_all.py."""

import sys
from pathlib import Path

from rydprep.experiments import peak_table, read_csv


def report(path):
    rows = read_csv(path)
    print(f"{path.name}: {len(rows)} rows")
    for n, peak in peak_table(rows).items():
        sub = [r for r in rows if r.N == n]
        closest = min(sub, key=lambda r: abs(r.energy_ss - r.energy_gs))
        print(f"  N={n:2d}  max F = {peak['fidelity']:.4f} +/- {peak['fidelity_stderr']:.4f}"
              f" at delta = {peak['delta']:+.2f};  |E_ss - E_gs| smallest at"
              f" delta = {closest.delta:+.2f}")


if __name__ == "__main__":
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
    for csv_path in sorted(out_dir.glob("*.csv")):
        report(csv_path)
