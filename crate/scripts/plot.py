#!/usr/bin/env python3
"""Plot `<experiment>_summary.csv` files written by `see sweep`."""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

PANELS = {
    "convergence": ["trace_see", "trace_asee"],
    "see_vs_t": ["mean_see"],
    "fairness": ["mean_see", "jain"],
    "outage": ["outage_freq"],
    "aux_rate": ["mean_see", "rel_gap"],
    "harvest": ["mean_see_common", "rel_gap"],
}

LABELS = {
    "t_fraction": "t / t^max",
    "phi_1": "PSR ratio of LUE 1",
    "p_max_dbm": "power budget (dBm)",
    "r_aux_nats_s": "auxiliary rate (nats/s)",
    "p_req_dbm": "harvest demand (dBm)",
}


def plot(path: Path, out_dir: Path) -> Path:
    df = pd.read_csv(path, comment="#")
    exp = df["experiment"].iloc[0]
    var = df["variable"].iloc[0]
    stats = [s for s in PANELS.get(exp, sorted(df["statistic"].unique())) if s in set(df["statistic"])]
    fig, axes = plt.subplots(1, len(stats), figsize=(5 * len(stats), 4), squeeze=False)
    for ax, stat in zip(axes[0], stats):
        part = df[df["statistic"] == stat]
        for method, g in part.groupby("method", sort=True):
            g = g.sort_values("x")
            ax.plot(g["x"], g["value"], marker="o", ms=3, label=method)
        ax.set_xlabel(LABELS.get(var, var))
        ax.set_ylabel(stat)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=7)
    fig.suptitle(exp)
    fig.tight_layout()
    out = out_dir / f"{exp}.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", nargs="+", type=Path, help="summary CSV files")
    ap.add_argument("--out", type=Path, default=Path("."), help="directory for PNG files")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for p in args.csv:
        print(plot(p, args.out))


if __name__ == "__main__":
    main()
