"""Figures for oracle runs and non-identification certificates."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_trial_errors(reports, path) -> None:
    """Per-seed maximum pointwise error, one series per graph, log scale."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for r in reports:
        seeds = [t.seed for t in r.trials]
        errs = [max(t.max_error, 1e-18) for t in r.trials]
        ax.semilogy(seeds, errs, "o", ms=3, label=r.graph)
        ax.axhline(r.tolerance, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("seed")
    ax.set_ylabel("max |functional - target law|")
    ax.set_title("oracle trials")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_certificate(cert, observed_a, observed_b, target_a, target_b, path) -> None:
    """Side-by-side bars: the two observed laws coincide, the target laws do not."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, (a, b, title) in zip(axes, ((observed_a, observed_b, "observed law"),
                                        (target_a, target_b, "target law"))):
        labels = [";".join(f"{k}={'NA' if v == -1 else v}" for k, v in sorted(c.items()))
                  for c, _ in a.items()]
        pa = np.array([p for _, p in a.items()])
        pb = np.array([b.prob(c) for c, _ in a.items()])
        x = np.arange(len(labels))
        ax.bar(x - 0.2, pa, 0.4, label="law A")
        ax.bar(x + 0.2, pb, 0.4, label="law B")
        ax.set_xticks(x, labels, rotation=60, ha="right", fontsize=7)
        ax.set_title(title)
    axes[0].legend(fontsize="small")
    fig.suptitle(f"observed TV {cert.observed_tv:.1e}, target TV {cert.target_tv:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
