"""Figure construction for the three cascade figure types.

Figures are built without pyplot so rendering carries no global state; a
``render`` call parses its inputs, draws them verbatim (no resampling or
smoothing), writes the image, and returns the figure object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .tables import Table, parse_table

KINDS = ("trajectories", "estimator-density", "posterior-density")

_LIGHT = {"linewidth": 0.8, "alpha": 0.35}
_HEAVY = {"linewidth": 2.4, "alpha": 1.0}
_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple")
_PANEL_WIDTH = 4.6
_PANEL_HEIGHT = 3.4


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input CSVs, figure kind, and the output image path."""

    kind: str
    inputs: tuple[Path, ...]
    out: Path
    truth: tuple[float, ...] = ()
    xlabel: str | None = None
    ylabel: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "out", Path(self.out))
        object.__setattr__(self, "truth", tuple(float(v) for v in self.truth))
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def render(spec: FigureSpec) -> Figure:
    """Draw the requested figure, write it to ``spec.out``, and return it."""
    tables = [parse_table(p) for p in spec.inputs]
    if spec.kind == "trajectories":
        fig = _draw_trajectories(spec, tables)
    else:
        fig = _draw_densities(spec, tables)
    FigureCanvasAgg(fig)
    fig.savefig(spec.out)
    return fig


def _value_columns(track: Table | None, reps: list[Table]) -> tuple[str, ...]:
    """Plottable columns: shared by every input, in the lead table's order."""
    lead = track if track is not None else reps[0]
    shared = [n for n in lead.names if n not in ("t", "rep")]
    for table in reps:
        shared = [n for n in shared if n in table.names]
    if not shared:
        raise ValueError("inputs share no value columns besides 't'/'rep'")
    return tuple(shared)


def _panel_title(table: Table) -> str:
    if "n" in table.meta:
        return f"n = {table.meta['n']}"
    return table.path.stem


def _draw_trajectories(spec: FigureSpec, tables: list[Table]) -> Figure:
    if spec.truth:
        raise ValueError("truth markers apply to density figures only")
    reps = [t for t in tables if "rep" in t.names]
    tracks = [t for t in tables if "rep" not in t.names]
    if len(tracks) > 1:
        names = ", ".join(t.path.name for t in tracks)
        raise ValueError(f"expected at most one limit track without a 'rep' column, got {names}")
    track = tracks[0] if tracks else None
    if track is None and not reps:
        raise ValueError("no inputs with trajectory columns")
    for table in tables:
        table.require("t")
    values = _value_columns(track, reps)

    n_panels = max(1, len(reps))
    fig = Figure(figsize=(_PANEL_WIDTH * n_panels, _PANEL_HEIGHT))
    axes = fig.subplots(1, n_panels, sharey=True)
    axes = np.atleast_1d(axes)

    for ax, table in zip(axes, reps or [None]):
        if table is not None:
            t = table.column("t")
            rep_ids = table.column("rep")
            for rep in np.unique(rep_ids):
                mask = rep_ids == rep
                for name, color in zip(values, _COLORS):
                    ax.plot(t[mask], table.column(name)[mask], color=color, **_LIGHT)
            ax.set_title(_panel_title(table))
        if track is not None:
            t = track.column("t")
            for name, color in zip(values, _COLORS):
                ax.plot(t, track.column(name), color=color, label=name, **_HEAVY)
        ax.set_xlabel(spec.xlabel or "t")
    axes[0].set_ylabel(spec.ylabel or "scaled abundance")
    if track is not None:
        axes[0].legend(frameon=False)
    fig.set_layout_engine("tight")
    return fig


def _density_title(table: Table) -> str:
    stem = table.path.stem
    _, sep, tail = stem.rpartition("kde_")
    return tail if sep else stem


def _draw_densities(spec: FigureSpec, tables: list[Table]) -> Figure:
    if spec.truth and len(spec.truth) != len(tables):
        raise ValueError(
            f"got {len(spec.truth)} truth values for {len(tables)} density inputs"
        )
    fig = Figure(figsize=(_PANEL_WIDTH * len(tables), _PANEL_HEIGHT))
    axes = np.atleast_1d(fig.subplots(1, len(tables)))
    for j, (ax, table) in enumerate(zip(axes, tables)):
        table.require("x", "density")
        ax.plot(table.column("x"), table.column("density"), color="tab:blue", **_HEAVY)
        if spec.truth:
            ax.axvline(spec.truth[j], color="black", linestyle="--", linewidth=1.0)
        ax.set_title(_density_title(table))
        ax.set_xlabel(spec.xlabel or ("estimate" if spec.kind == "estimator-density" else "parameter value"))
    axes[0].set_ylabel(spec.ylabel or "density")
    fig.set_layout_engine("tight")
    return fig
