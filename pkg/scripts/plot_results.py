"""Plot CSVs written by ``isacdet slice`` and ``isacdet pd-sweep``.

    python scripts/plot_results.py slice slices.csv -o slices.png
    python scripts/plot_results.py pd pd.csv -o pd.png
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_slice(path, out):
    data = defaultdict(list)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            data[(int(r["iteration"]), r["constellation"])].append((float(r["range_m"]), float(r["value_db"])))
    fig, axes = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
    for (it, kind), pts in sorted(data.items()):
        xs, ys = zip(*pts)
        axes[it - 1].plot(xs, ys, label=kind)
    for it, ax in enumerate(axes, start=1):
        ax.set_title(f"iteration {it}")
        ax.set_ylabel("normalized power (dB)")
        ax.set_ylim(-80, 2)
        ax.legend(fontsize=8)
    axes[-1].set_xlabel("range (m)")
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_pd(path, out):
    data = defaultdict(list)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    numeric = True
    for r in rows:
        try:
            x = float(r["axis_value"])
        except ValueError:
            numeric, x = False, r["axis_value"]
        data[(r["detector"], r["constellation"] if numeric else "")].append(
            (x, float(r["pd"]), float(r["stderr"])))
    fig, ax = plt.subplots(figsize=(7, 4))
    for (det, kind), pts in sorted(data.items()):
        xs, ys, es = zip(*pts)
        pos = xs if numeric else range(len(xs))
        ax.errorbar(pos, ys, yerr=es, marker="o", capsize=2, label=f"{det} {kind}".strip())
        if not numeric:
            ax.set_xticks(range(len(xs)), xs)
    ax.set_ylabel("Pd")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("kind", choices=["slice", "pd"])
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True)
    a = p.parse_args()
    (plot_slice if a.kind == "slice" else plot_pd)(a.csv, a.output)
