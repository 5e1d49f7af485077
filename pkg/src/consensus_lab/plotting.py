"""Figures for capacity sweeps and error curves, written with the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_capacity_sweep(param: str, rows: Sequence[dict], path: str | Path, title: str = "") -> Path:
    xs = [r["value"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, label, style in (
        ("c_p2p_common", "common-channel capacity", "--"),
        ("c_byz", "consensus capacity", "-"),
        ("c_com_msg", "common-message capacity", ":"),
    ):
        ax.plot(xs, [r[key] for r in rows], style, label=label)
    ax.set_xlabel(param)
    ax.set_ylabel("bits per channel use")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_error_curve(rows: Sequence[dict], path: str | Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = [r["n"] for r in rows]
    for key, label, marker in (("lambda_hat", "honest", "o"), ("eta_hat", "worst attack", "s"), ("p_e_hat", "max", "^")):
        pts = [(n, r[key]) for n, r in zip(ns, rows) if r[key] > 0]
        if pts:
            ax.loglog(*zip(*pts), marker=marker, label=label)
    ax.set_xlabel("block length n")
    ax.set_ylabel("estimated error probability")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    return _save(fig, path)


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
