"""Figures rendered next to the CLI's CSV output.

Uses the Agg backend and strips the PNG software tag so that reruns give
identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["kernel_figure", "sample_figure", "modulus_figure", "resistance_figure"]

_STYLE = {
    "figure.figsize": (8.0, 3.4),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def kernel_figure(path, r, rho2, rho, label: str) -> Path:
    with plt.rc_context(_STYLE):
        fig, (a1, a2) = plt.subplots(1, 2)
        a1.plot(r, rho2)
        a1.set_xlabel("r")
        a1.set_ylabel(r"$\rho^2(r)$")
        a2.plot(r, rho)
        a2.set_xlabel("r")
        a2.set_ylabel(r"$\rho(r)$")
        fig.suptitle(label)
        return _save(fig, path)


def sample_figure(path, u, columns: dict) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for name, values in columns.items():
            ax.plot(u, values, label=name, lw=0.8)
        ax.axhline(0.0, color="0.7", lw=0.5)
        ax.set_xlabel("u (window widths)")
        ax.set_ylabel("moving average")
        ax.legend(frameon=False)
        return _save(fig, path)


def modulus_figure(path, r, ratio, form: str, levels, medians: dict) -> Path:
    with plt.rc_context(_STYLE):
        fig, (a1, a2) = plt.subplots(1, 2)
        a1.semilogx(r, ratio)
        a1.set_xlabel("r")
        a1.set_ylabel(rf"$\omega(r)$ / {form}")
        for name, med in medians.items():
            a2.loglog(levels, med, "o-", ms=3, label=name)
        a2.set_xlabel("grid intervals")
        a2.set_ylabel("median Lipschitz statistic")
        if medians:
            a2.legend(frameon=False)
        return _save(fig, path)


def resistance_figure(path, R) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        im = ax.imshow(np.asarray(R), cmap="viridis")
        fig.colorbar(im, ax=ax, label="R")
        ax.set_xlabel("node")
        ax.set_ylabel("node")
        return _save(fig, path)
