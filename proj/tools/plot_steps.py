#!/usr/bin/env python3
"""Plot step length and order from an adaptive step log (bdfns adaptive --log)."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("log", help="step log CSV with columns t,dt,q,EST,TOL,accepted,flags")
    ap.add_argument("-o", "--out", default="steps.png")
    args = ap.parse_args()

    df = pd.read_csv(args.log)
    acc = df[df["accepted"] == 1]
    rej = df[df["accepted"] == 0]

    fig, (ax_dt, ax_q) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    ax_dt.semilogy(acc["t"], acc["dt"], "-", lw=1, label="accepted")
    if not rej.empty:
        ax_dt.semilogy(rej["t"], rej["dt"], "x", color="tab:red", label="rejected")
    ax_dt.set_ylabel("dt")
    ax_dt.legend()
    ax_q.step(acc["t"], acc["q"], where="post")
    ax_q.set_ylabel("order q")
    ax_q.set_xlabel("t")
    ax_q.set_yticks(range(1, 6))
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()
