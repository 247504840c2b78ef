#!/usr/bin/env python3
"""Render trajectory CSVs (epoch,mode,kind,value) with matplotlib.

Convenience only; all acceptance-relevant output is the CSV itself.

    python3 scripts/plot_csv.py out/predict.csv [plot.png]
"""

import sys
from collections import defaultdict

STYLE = {"analytic_dae": "-", "analytic_wdae": "--", "simulated": ":", "estimated": "-."}


def main():
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib is not installed; nothing to render")
        return 1
    import csv

    series = defaultdict(list)
    with open(sys.argv[1], newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            series[(int(row["mode"]), row["kind"])].append(
                (float(row["epoch"]), float(row["value"])))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (mode, kind), points in sorted(series.items()):
        if mode == -1:
            continue  # weight-norm rows get their own axis below
        xs, ys = zip(*points)
        ax.plot(xs, ys, STYLE.get(kind, "-"), label=f"mode {mode} ({kind})")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mapped value")
    ax.legend(fontsize=7)
    norm = series.get((-1, "simulated"))
    if norm:
        twin = ax.twinx()
        xs, ys = zip(*norm)
        twin.plot(xs, ys, color="gray", alpha=0.5)
        twin.set_ylabel("weight norm")
    out = sys.argv[2] if len(sys.argv) > 2 else "plot.png"
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
