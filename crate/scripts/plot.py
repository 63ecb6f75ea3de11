#!/usr/bin/env python3
"""Plot CSV output of `mirs sweep` (mean WSR with standard-error bars per
scheme) or `mirs solve` (WSR per outer iteration).

usage: plot.py INPUT.csv [-o OUT.png] [--bits]
"""

import argparse
import csv
import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_sweep(rows, ax, unit):
    groups = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[r["scheme"]][float(r["sweep_value"])].append(float(r[unit]))
    for scheme, by_value in groups.items():
        xs = sorted(by_value)
        means, errs = [], []
        for x in xs:
            v = by_value[x]
            m = sum(v) / len(v)
            sd = math.sqrt(sum((y - m) ** 2 for y in v) / (len(v) - 1)) if len(v) > 1 else 0.0
            means.append(m)
            errs.append(sd / math.sqrt(len(v)))
        ax.errorbar(xs, means, yerr=errs, marker="o", capsize=3, label=scheme)
    ax.set_xlabel(rows[0]["sweep_name"])
    ax.legend()


def plot_trace(rows, ax, unit):
    ax.plot([int(r["iter"]) for r in rows], [float(r[unit]) for r in rows], marker=".")
    ax.set_xlabel("outer iteration")


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--bits", action="store_true", help="plot bits/s/Hz instead of nats/s/Hz")
    args = p.parse_args()

    with open(args.input, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise SystemExit("no data rows")
    unit = "wsr_bits" if args.bits else "wsr_nats"

    fig, ax = plt.subplots(figsize=(6, 4))
    if "scheme" in rows[0]:
        plot_sweep(rows, ax, unit)
    else:
        plot_trace(rows, ax, unit)
    ax.set_ylabel("weighted sum rate (%s/s/Hz)" % ("bits" if args.bits else "nats"))
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out = args.output or args.input.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
