#!/usr/bin/env python3
"""Plot log-log convergence curves from a converge report CSV.

Usage: plot_convergence.py REPORT.csv [OUTPUT.png]
"""

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = ("err_AU", "err_dhatU", "err_AhatU", "resid")


def run(report_path, out_path):
    series = defaultdict(list)
    with open(report_path) as fh:
        for row in csv.DictReader(fh):
            for m in METRICS:
                val = float(row[m])
                if val > 0:
                    series[(m, row["p"])].append((float(row["k"]), val))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (m, p), pts in sorted(series.items()):
        pts.sort()
        ks, es = zip(*pts)
        ax.loglog(ks, es, "o-", label=f"{m} (p={p})")
    ax.set_xlabel("time step k")
    ax.set_ylabel("error / estimator")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    print(f"wrote {out_path}")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print(__doc__)
        sys.exit(1)
    out = sys.argv[2] if len(sys.argv) > 2 else sys.argv[1].rsplit(".", 1)[0] + ".png"
    run(sys.argv[1], out)
