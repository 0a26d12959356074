"""Deterministic SVG figures."""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed ids and no timestamp so repeated runs write identical files.
matplotlib.rcParams["svg.hashsalt"] = "pac-sim"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig: plt.Figure, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def workspace_svg(path: Path, clouds: Mapping[str, np.ndarray]) -> Path:
    """x-z and x-y projections of tip clouds, one series per load case."""
    fig, (side, top) = plt.subplots(1, 2, figsize=(10, 5))
    for label, cloud in clouds.items():
        cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
        side.scatter(cloud[:, 0], cloud[:, 2], s=8, label=label)
        top.scatter(cloud[:, 0], cloud[:, 1], s=8, label=label)
    side.set_xlabel("x [m]")
    side.set_ylabel("z [m]")
    top.set_xlabel("x [m]")
    top.set_ylabel("y [m]")
    for ax in (side, top):
        ax.set_aspect("equal", adjustable="datalim")
        ax.grid(True, linewidth=0.3)
    side.legend(loc="best")
    fig.tight_layout()
    return _save(fig, path)


def comparison_svg(
    path: Path,
    truth: np.ndarray,
    pac: np.ndarray,
    pcc: np.ndarray,
    title: str = "",
) -> Path:
    """x-z overlay of the ground-truth centerline and both reconstructions."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for label, curve, style in (
        ("ground truth", truth, "k-"),
        ("PAC", pac, "C0--"),
        ("PCC", pcc, "C3:"),
    ):
        curve = np.asarray(curve, dtype=float)
        ax.plot(curve[:, 0], curve[:, 2], style, label=label)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("z [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, linewidth=0.3)
    ax.legend(loc="best")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
