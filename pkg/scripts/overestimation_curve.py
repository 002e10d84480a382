#!/usr/bin/env python3
"""Closed-form-minus-simulated OSNR penalty vs. linewidth, from a
penalty-sweep results.csv. Positive values mean the equivalent-AWGN model
overestimates the penalty the DSP actually incurs.

Usage: overestimation_curve.py <results.csv> <out.png>
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv_path")
    ap.add_argument("out_png")
    args = ap.parse_args(argv)

    with open(args.csv_path) as fh:
        rows = [r for r in csv.DictReader(fh)
                if r.get("scenario_kind") == "PENALTY_SWEEP"]
    if not rows:
        print(f"no penalty rows in {args.csv_path}", file=sys.stderr)
        return 2

    groups = {}
    for r in rows:
        total = float(r["total_penalty_db"] or "nan")
        model = float(r["analytic_penalty_db"] or "nan")
        if np.isnan(total) or np.isnan(model):
            continue
        mode = "TX=LO" if r["lw_tx_hz"] == r["lw_lo_hz"] else "TX=0"
        key = (r["format"], float(r["baud_hz"]), mode)
        groups.setdefault(key, []).append((float(r["lw_lo_hz"]),
                                           model - total))

    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for (fmt, baud, mode), pts in sorted(groups.items()):
        pts.sort()
        ax.semilogx([p[0] for p in pts], [p[1] for p in pts], "o-",
                    label=f"{fmt} {baud / 1e9:g} GBd {mode}")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("linewidth [Hz]")
    ax.set_ylabel("model minus simulated penalty [dB]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out_png, dpi=130)
    print(f"wrote {args.out_png}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
