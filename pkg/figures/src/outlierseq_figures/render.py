"""Figure rendering from simulation results CSV files.

The input is the results CSV the simulation harness writes, one row per
(test, grid point); the coupling is the file format alone, so any CSV
with the same columns renders equally well.  Figure ids fig3, fig4 and
fig5 plot error rate against sample length on a log axis, one series per
test name; fig6 plots average iterations against sample length and fig7
against the number of sequences M.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless backend; must be set before pyplot loads
import matplotlib.pyplot as plt

FIGURE_IDS = ("fig3", "fig4", "fig5", "fig6", "fig7")

_ERROR_FIGURES = frozenset({"fig3", "fig4", "fig5"})
_X_COLUMN = {"fig3": "n", "fig4": "n", "fig5": "n", "fig6": "n", "fig7": "M"}
_X_LABEL = {"n": "sample length n", "M": "number of sequences M"}
_SUFFIXES = (".svg", ".png")
_HASH_SALT = "outlierseq-figures"  # fixes the ids matplotlib salts into SVG output


class SchemaError(ValueError):
    """The CSV does not carry a column the figure needs."""


@dataclass(frozen=True)
class FigureSpec:
    """One rendering job: which layout, which CSV, where the image goes."""

    figure_id: str
    csv_path: Path
    out_path: Path

    def __post_init__(self) -> None:
        if self.figure_id not in FIGURE_IDS:
            raise ValueError(
                f"unknown figure id {self.figure_id!r}; choose from {', '.join(FIGURE_IDS)}"
            )
        object.__setattr__(self, "csv_path", Path(self.csv_path))
        object.__setattr__(self, "out_path", Path(self.out_path))
        suffix = self.out_path.suffix.lower()
        if suffix not in _SUFFIXES:
            raise ValueError(f"output must end in .svg or .png, got {suffix!r}")

    @property
    def x_column(self) -> str:
        return _X_COLUMN[self.figure_id]

    @property
    def y_column(self) -> str:
        return "error_rate" if self.figure_id in _ERROR_FIGURES else "avg_iterations"

    @property
    def log_y(self) -> bool:
        """Error probabilities go on a log axis; iteration counts stay linear."""
        return self.figure_id in _ERROR_FIGURES


@dataclass(frozen=True)
class RenderResult:
    """What was drawn: per-series point counts and the zero rows a log axis dropped."""

    out_path: Path
    x_column: str
    y_column: str
    log_y: bool
    series: dict[str, int]
    dropped: dict[str, int]


def _read_series(spec: FigureSpec) -> dict[str, list[tuple[float, float]]]:
    """Group (x, y) points by test name, sorted by x ascending."""
    with open(spec.csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in ("test_name", spec.x_column, spec.y_column):
            if column not in header:
                raise SchemaError(f"missing column {column!r} in {spec.csv_path}")
        series: dict[str, list[tuple[float, float]]] = {}
        for row in reader:
            point = (float(row[spec.x_column]), float(row[spec.y_column]))
            series.setdefault(row["test_name"], []).append(point)
    if not series:
        raise ValueError(f"no data rows in {spec.csv_path}")
    for points in series.values():
        points.sort(key=lambda p: p[0])
    return series


def _save(fig, path: Path) -> None:
    # strip the writer's date/version stamps so identical inputs give identical
    # bytes; fonttype "none" keeps SVG text as text instead of glyph paths
    with matplotlib.rc_context({"svg.hashsalt": _HASH_SALT, "svg.fonttype": "none"}):
        if path.suffix.lower() == ".svg":
            fig.savefig(path, metadata={"Date": None})
        else:
            fig.savefig(path, metadata={"Software": None})


def render(spec: FigureSpec) -> RenderResult:
    """Write the image and report what was drawn.

    One line per test name, in first-appearance order, with a legend and
    labeled axes.  Zero values cannot sit on a log axis, so on the
    error-rate figures points with rate exactly 0 are dropped with a note
    on stderr; a series whose points all drop keeps its legend entry and
    simply has no line.
    """
    series = _read_series(spec)
    dropped: dict[str, int] = {}
    if spec.log_y:
        for name, points in series.items():
            kept = [p for p in points if p[1] > 0.0]
            if len(kept) < len(points):
                dropped[name] = len(points) - len(kept)
                series[name] = kept
        if dropped:
            listing = ", ".join(f"{name} ({count})" for name, count in dropped.items())
            print(
                f"note: dropped {sum(dropped.values())} zero-error point(s) "
                f"from the log plot: {listing}",
                file=sys.stderr,
            )

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    try:
        for name, points in series.items():
            ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=name)
        if spec.log_y:
            ax.set_yscale("log")
            ax.set_ylabel("error rate (log axis, base 10)")
        else:
            ax.set_ylabel("average iterations")
        ax.set_xlabel(_X_LABEL[spec.x_column])
        ax.set_title(spec.figure_id)
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        _save(fig, spec.out_path)
    finally:
        plt.close(fig)
    return RenderResult(
        out_path=spec.out_path,
        x_column=spec.x_column,
        y_column=spec.y_column,
        log_y=spec.log_y,
        series={name: len(points) for name, points in series.items()},
        dropped=dropped,
    )
