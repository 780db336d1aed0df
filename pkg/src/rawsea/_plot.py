"""Matplotlib glue producing byte-reproducible SVG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

# identical inputs must yield identical bytes: pin the clip-path hash salt
# and strip the creation-date metadata
matplotlib.rcParams["svg.hashsalt"] = "rawsea"

_NO_DATE = {"Date": None}


def save_svg(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=_NO_DATE)
    plt.close(fig)


def new_figure(width: float = 8.0, height: float = 4.5):
    return plt.figure(figsize=(width, height))
