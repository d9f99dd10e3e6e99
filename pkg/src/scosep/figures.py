"""Report-path figure rendering: a PNG next to the delimited output.

matplotlib (Agg backend) draws per-axis means with trial scatter; the
deterministic SVG path lives in svgplot and does not go through matplotlib.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_png(records, metric: str, out_path: str, x_axis: str = "n",
               logx: bool = False, logy: bool = False) -> None:
    xs = [r[x_axis] for r in records if r["metric"] == metric]
    ys = [r["value"] for r in records if r["metric"] == metric]
    byx = {}
    for x, y in zip(xs, ys):
        byx.setdefault(x, []).append(y)
    line = sorted((x, sum(v) / len(v)) for x, v in byx.items())

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    ax.scatter(xs, ys, s=12, alpha=0.35, label="trials")
    ax.plot([p[0] for p in line], [p[1] for p in line], "-o", ms=4, label="mean")
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x_axis)
    ax.set_ylabel(metric)
    ax.set_title(f"{records[0]['experiment']}: {metric} vs {x_axis}")
    ax.grid(True, which="both", ls=":", alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
