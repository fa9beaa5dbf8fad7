"""Standalone matplotlib scripts written next to experiment outputs.

The package itself never imports matplotlib; each script reads the CSVs in
its own directory and saves a PNG there.
"""

_HEADER = '''"""Generated plot script; run with `python3 {name}` from this directory."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent


def read(name):
    with open(HERE / name, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)

'''

SYNTHETIC = _HEADER.format(name="plot_synthetic.py") + '''
def grid(name, col):
    _, a = read(name)
    x1, x2 = np.unique(a[:, 0]), np.unique(a[:, 1])
    return x1, x2, a[:, col].reshape(x1.size, x2.size)


fig, axs = plt.subplots(1, 3, figsize=(13, 4))
for ax, (name, col, title) in zip(axs, [("true_surface.csv", 2, "true weight"),
                                          ("pred_surface.csv", 2, "fitted weight"),
                                          ("pred_grid.csv", 2, "posterior mean")]):
    x1, x2, z = grid(name, col)
    im = ax.pcolormesh(x2, x1, z, shading="auto")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
_, p = read("predictions.csv")
axs[2].scatter(p[:, 1], p[:, 0], s=4, c="k")
fig.tight_layout()
fig.savefig(HERE / "synthetic.png", dpi=120)
'''

COAL = _HEADER.format(name="plot_coal.py") + '''
import json

_, a = read("coal_surface.csv")
summary = json.loads((HERE / "coal_summary.json").read_text())
fig, ax = plt.subplots(figsize=(8, 4))
ax.plot(a[:, 0], a[:, 2], "k-", label="cumulative accidents")
ax.set_xlabel("year")
ax.set_ylabel("cumulative count")
ax.axvline(summary["act_year"], color="r", ls="--", label="1887 act")
ax.axvline(summary["midpoint"], color="b", ls=":", label="fitted midpoint")
ax2 = ax.twinx()
ax2.plot(a[:, 0], a[:, 3], "b-", alpha=0.6)
ax2.set_ylim(0, 1)
ax2.set_ylabel("regime weight")
ax.legend(loc="upper left")
fig.tight_layout()
fig.savefig(HERE / "coal.png", dpi=120)
'''

BENCHMARK = _HEADER.format(name="plot_benchmark.py") + '''
with open(HERE / "benchmark_logdet.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
fig, axs = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
for col, r in enumerate(sorted({row["kernels"] for row in rows})):
    sub = [row for row in rows if row["kernels"] == r]
    for strat in dict.fromkeys(row["strategy"] for row in sub):
        pts = [row for row in sub if row["strategy"] == strat]
        n = [float(row["n"]) for row in pts]
        axs[0, col].plot(n, [float(row["ratio"]) for row in pts], "o-", label=strat)
        axs[1, col].loglog(n, [float(row["seconds"]) for row in pts], "o-", label=strat)
    axs[0, col].set_title(f"{r} kernels")
    axs[0, col].set_ylabel("bound / exact")
    axs[1, col].set_ylabel("seconds")
    axs[1, col].set_xlabel("n")
    axs[0, col].legend()
fig.tight_layout()
fig.savefig(HERE / "benchmark_logdet.png", dpi=120)
'''
