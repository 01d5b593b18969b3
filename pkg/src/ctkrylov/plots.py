"""Figure rendering for finished runs: convergence and parameter histories.

Reads the per-iteration CSVs referenced by run manifests and writes PNG
figures next to the delimited output. Kept separate from the solvers so
experiments never depend on a display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .experiment import read_records_csv


def _curves(manifests):
    for m in manifests:
        cols = read_records_csv(m["_csv_path"])
        yield m["solver"], cols


def render_report(manifests: list[dict], out_dir: str | Path) -> list[Path]:
    """Render convergence figures for one or more runs; returns file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    panels = [
        ("rre", "relative reconstruction error", "rre.png", "log"),
        ("ssim", "SSIM", "ssim.png", "linear"),
        ("data_residual", r"$\|b - A x_k\|_2$", "residual.png", "log"),
        ("lambda", r"selected $\lambda$", "lambda.png", "log"),
    ]
    for column, ylabel, filename, yscale in panels:
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        plotted = False
        for label, cols in _curves(manifests):
            y = cols.get(column)
            if y is None or np.all(np.isnan(y)) or not np.any(y > 0 if yscale == "log" else True):
                continue
            ax.plot(cols["k"], y, label=label)
            plotted = True
        if not plotted:
            plt.close(fig)
            continue
        ax.set_xlabel("iteration $k$")
        ax.set_ylabel(ylabel)
        if yscale == "log":
            ax.set_yscale("log")
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / filename
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
