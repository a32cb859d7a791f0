"""Static chart rendering for report tables.

Figures are written as SVG files next to the delimited output. Output is
byte-deterministic: element ids are derived from a fixed hash salt and no
creation date is embedded, so identical tables produce identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "scibranch"

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ChartSpec:
    kind: str  # "line" or "bar"
    x: str
    y: str
    series: str | None = None
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""

    def __post_init__(self):
        if self.kind not in ("line", "bar"):
            raise DataError(f"unknown chart kind '{self.kind}'")


def _column(header: Sequence[str], name: str) -> int:
    try:
        return list(header).index(name)
    except ValueError:
        raise DataError(f"chart spec references unknown column '{name}'") from None


def _sort_key(value: str):
    try:
        return (0, float(value), "")
    except (TypeError, ValueError):
        return (1, 0.0, str(value))


def emit_chart(header: Sequence[str], rows: Sequence[Sequence], spec: ChartSpec,
               path) -> None:
    """Render a table to an SVG line or bar chart.

    Line charts leave visible breaks at x positions where a series has no
    value (plotted as NaN). An empty table still produces a valid SVG
    with axes only.
    """
    xi = _column(header, spec.x)
    yi = _column(header, spec.y)
    si = _column(header, spec.series) if spec.series else None

    # Everything is keyed by the string form, matching CSV round-trips.
    series: dict[str, dict[str, float]] = {}
    x_seen: list[str] = []
    for row in rows:
        x = str(row[xi])
        if x not in x_seen:
            x_seen.append(x)
        name = str(row[si]) if si is not None else spec.y
        y = row[yi]
        value = float(y) if y not in (None, "") else float("nan")
        series.setdefault(name, {})[x] = value
    x_order = sorted(x_seen, key=_sort_key)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        positions = np.arange(len(x_order))
        if spec.kind == "line":
            for name in sorted(series):
                ys = [series[name].get(x, float("nan")) for x in x_order]
                ax.plot(positions, ys, marker="o", markersize=3, label=name)
        else:
            names = sorted(series)
            width = 0.8 / max(1, len(names))
            for j, name in enumerate(names):
                heights = [series[name].get(x, 0.0) for x in x_order]
                heights = [0.0 if h != h else h for h in heights]  # NaN -> 0
                ax.bar(positions + j * width, heights, width=width, label=name)
            positions = positions + 0.4 - width / 2
        ax.set_xticks(positions)
        ax.set_xticklabels(x_order, rotation=45, ha="right", fontsize=8)
        if spec.title:
            ax.set_title(spec.title)
        if spec.xlabel:
            ax.set_xlabel(spec.xlabel)
        if spec.ylabel:
            ax.set_ylabel(spec.ylabel)
        if series:
            ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
