"""Deterministic figure rendering from experiment CSVs.

Three figure kinds:

- ``gap_curves``: two side-by-side panels, last-iterate and average-iterate
  saddle-point gaps, one curve per input CSV (typically different learning
  rates), log scale by default.
- ``trajectory_panel``: one sub-panel per input run log, plotting the
  probability each player assigns to their first action over time.
- ``norm_trace``: joint iterate norms of continuous-game runs on a log axis.

Specs are plain dicts (usually loaded from JSON):

    {"kind": "gap_curves",
     "inputs": [{"path": "run_a/gap.csv", "label": "eta = 0.165"}, ...],
     "output": "kuhn_gaps.svg",
     "title": "Kuhn poker",
     "y_scale": "log", "x_scale": "log"}

Outputs are SVG with a pinned hash salt and no embedded date, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HASH_SALT = "gamelab-figures"
FLOOR = 1e-16  # keeps zero gaps plottable on log axes

STYLE = {
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "svg.hashsalt": HASH_SALT,
}


class FigureError(ValueError):
    """Bad spec or CSV that does not carry the columns a figure needs."""


def read_csv_columns(path: Path, wanted: list[str]) -> dict[str, np.ndarray]:
    """Load the named columns; empty cells become NaN; missing columns fail loudly."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FigureError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FigureError(f"{path} is empty")
    header = rows[0]
    missing = [c for c in wanted if c not in header]
    if missing:
        raise FigureError(f"{path} lacks column(s) {missing}; header is {header}")
    idx = {c: header.index(c) for c in wanted}
    out = {c: [] for c in wanted}
    for row in rows[1:]:
        for c in wanted:
            cell = row[idx[c]]
            out[c].append(float(cell) if cell != "" else np.nan)
    return {c: np.asarray(v) for c, v in out.items()}


def _validated_inputs(spec: dict, base: Path) -> list[tuple[Path, str]]:
    inputs = spec.get("inputs")
    if not inputs:
        raise FigureError("spec needs a non-empty 'inputs' list")
    resolved = []
    for item in inputs:
        if isinstance(item, str):
            item = {"path": item}
        path = Path(item["path"])
        if not path.is_absolute():
            path = base / path
        resolved.append((path, item.get("label", path.parent.name or path.stem)))
    return resolved


def _new_figure(n_panels: int, title: str | None):
    fig, axes = plt.subplots(1, n_panels, figsize=(3.4 * n_panels, 2.8), squeeze=False)
    if title:
        fig.suptitle(title)
    return fig, axes[0]


def _render_gap_curves(spec: dict, base: Path):
    fig, (ax_last, ax_avg) = _new_figure(2, spec.get("title"))
    for path, label in _validated_inputs(spec, base):
        data = read_csv_columns(path, ["iter", "last_gap", "avg_gap"])
        t = np.maximum(data["iter"], 1.0)  # log axis: fold t=0 into t=1
        ax_last.plot(t, np.maximum(data["last_gap"], FLOOR), label=label)
        ax_avg.plot(t, np.maximum(data["avg_gap"], FLOOR), label=label)
    for ax, name in ((ax_last, "last iterate"), (ax_avg, "average iterate")):
        ax.set_xscale(spec.get("x_scale", "log"))
        ax.set_yscale(spec.get("y_scale", "log"))
        ax.set_xlabel("iteration")
        ax.set_ylabel("saddle-point gap")
        ax.set_title(name)
        ax.legend(fontsize=7)
    return fig


def _render_trajectory_panel(spec: dict, base: Path):
    inputs = _validated_inputs(spec, base)
    fig, axes = _new_figure(len(inputs), spec.get("title"))
    for ax, (path, label) in zip(axes, inputs):
        data = read_csv_columns(path, ["iter", "player", "x0"])
        for player in np.unique(data["player"]):
            mask = data["player"] == player
            ax.plot(data["iter"][mask], data["x0"][mask], label=f"player {int(player)}")
        ax.set_xscale(spec.get("x_scale", "linear"))
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel("iteration")
        ax.set_ylabel("P(first action)")
        ax.set_title(label)
        ax.legend(fontsize=7)
    return fig


def _render_norm_trace(spec: dict, base: Path):
    fig, (ax,) = _new_figure(1, spec.get("title"))
    for path, label in _validated_inputs(spec, base):
        data = read_csv_columns(path, ["iter", "norm"])
        # the norm column repeats per player row; collapse to one value per iter
        t, keep = np.unique(data["iter"], return_index=True)
        ax.plot(t, np.maximum(data["norm"][keep], FLOOR), label=label)
    ax.set_yscale(spec.get("y_scale", "log"))
    ax.set_xscale(spec.get("x_scale", "linear"))
    ax.set_xlabel("iteration")
    ax.set_ylabel("joint iterate norm")
    ax.legend(fontsize=7)
    return fig


KINDS = {
    "gap_curves": _render_gap_curves,
    "trajectory_panel": _render_trajectory_panel,
    "norm_trace": _render_norm_trace,
}


def render(spec: dict, out_dir: str | Path, base_dir: str | Path | None = None) -> Path:
    """Render one spec to its vector-graphic output; returns the written path."""
    kind = spec.get("kind")
    if kind not in KINDS:
        raise FigureError(f"unknown figure kind {kind!r}; expected one of {sorted(KINDS)}")
    output = spec.get("output")
    if not output:
        raise FigureError("spec needs an 'output' filename")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    with plt.rc_context(STYLE):
        fig = KINDS[kind](spec, base)
        target = out_dir / output
        fig.savefig(target, format="svg", metadata={"Date": None}, bbox_inches="tight")
        plt.close(fig)
    return target
