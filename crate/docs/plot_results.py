"""Plot a results.csv written by oamp-sim.

    python docs/plot_results.py results/results.csv --metric ber --t 30 -o ber.png

One curve per method against the sweep value, taken at iteration `t`
(default: the last one). `se_mse` and `se_ber` rows are drawn dashed.
"""
import argparse
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv")
    ap.add_argument("--metric", default="ber", choices=["ber", "mse"])
    ap.add_argument("--t", type=int, default=None, help="iteration to plot (default: last)")
    ap.add_argument("--vs-iteration", action="store_true", help="x axis is t; one curve per method and sweep value")
    ap.add_argument("-o", "--output", default=None, help="image file; shows the figure when omitted")
    args = ap.parse_args()

    df = pd.read_csv(args.csv, comment="#")
    df = df[df["metric"].isin([args.metric, "se_" + args.metric])]
    fig, ax = plt.subplots(figsize=(6, 4.5))

    if args.vs_iteration:
        for (method, metric, value), g in df.groupby(["method", "metric", "sweep_value"]):
            style = "--" if metric.startswith("se_") else "-"
            ax.semilogy(g["t"], g["value"], style, label=f"{method} {metric} @ {value:g}")
        ax.set_xlabel("iteration")
    else:
        t = args.t if args.t is not None else int(df["t"].max())
        df = df[df["t"] == t].copy()
        # an unclipped relay (cr_db = inf) is drawn one step past the last finite point
        finite = sorted(v for v in df["sweep_value"].unique() if math.isfinite(v))
        step = (finite[-1] - finite[0]) / (len(finite) - 1) if len(finite) > 1 else 3.0
        inf_at = finite[-1] + step if finite else 0.0
        has_inf = bool((~df["sweep_value"].apply(math.isfinite)).any())
        df.loc[~df["sweep_value"].apply(math.isfinite), "sweep_value"] = inf_at
        for (method, metric), g in df.groupby(["method", "metric"]):
            g = g.sort_values("sweep_value")
            style = "--x" if metric.startswith("se_") else "-o"
            err = g["stderr"] if g["stderr"].notna().any() else None
            ax.errorbar(g["sweep_value"], g["value"], yerr=err, fmt=style, capsize=2, label=f"{method} ({metric})")
        ax.set_yscale("log")
        ax.set_xlabel(df["axis"].iloc[0] if len(df) else "sweep value")
        ax.set_title(f"t = {t}")
        if has_inf:
            ax.set_xticks(finite + [inf_at], [f"{v:g}" for v in finite] + ["∞"])

    ax.set_ylabel(args.metric.upper())
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    if args.output:
        fig.savefig(args.output, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
