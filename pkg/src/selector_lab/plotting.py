"""PNG figures written next to the CSV artifacts (headless Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}  # keep the PNG bytes free of version strings


def plot_trace(trace, path) -> None:
    """Batch gradient norm and batch surrogate loss against the iteration index."""
    it = np.arange(1, len(trace) + 1)
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    top.plot(it, trace.grad_norms, lw=0.8)
    top.set_ylabel("batch |g|")
    top.set_yscale("log")
    bottom.plot(it, trace.loss_estimates, lw=0.8, color="tab:orange")
    bottom.set_ylabel("batch surrogate loss")
    bottom.set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_sweep(rows: list[dict], path, fit: tuple[float, float] | None = None) -> None:
    """Conditional error (twice the joint error) against eps on log-log axes."""
    cells = [r for r in rows if r["seed"] != "median"]
    med = sorted((r for r in rows if r["seed"] == "median"), key=lambda r: r["eps"])
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.scatter([r["eps"] for r in cells], [2 * r["true_joint_error"] for r in cells], s=10, alpha=0.4,
               label="runs")
    eps = np.array([r["eps"] for r in med])
    ax.plot(eps, [2 * r["true_joint_error"] for r in med], "o-", color="black", label="median")
    ax.plot(eps, 2 * eps, ":", color="gray", label="optimum")
    if fit is not None:
        c, p = fit
        grid = np.geomspace(eps.min(), eps.max(), 50)
        ax.plot(grid, c * grid**p, "--", color="tab:red", label=f"fit p={p:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel("conditional error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
