"""Figure rendering for frames, detections, and placement censuses.

All functions write PNG files and return the path; matplotlib runs with
the Agg backend so no display is needed.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
from matplotlib import patches as mpatches  # noqa: E402
from matplotlib.colors import BoundaryNorm, ListedColormap  # noqa: E402

from .geometry import Mask  # noqa: E402
from .planner import Plan  # noqa: E402
from .world import Frame, World  # noqa: E402

_PALETTE = (
    "#ffffff",  # empty
    "#4d4d4d",  # then one colour per object, cycling
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#17becf",
)


def _draw_frame(ax, frame: Frame) -> dict[str, int]:
    ids = sorted(frame.masks)
    index = {object_id: 1 + i % (len(_PALETTE) - 1) for i, object_id in enumerate(ids)}
    grid = [[0] * frame.cols for _ in range(frame.rows)]
    for object_id in ids:
        for r, c in frame.masks[object_id]:
            grid[r][c] = index[object_id]
    cmap = ListedColormap(_PALETTE)
    norm = BoundaryNorm(range(len(_PALETTE) + 1), cmap.N)
    ax.imshow(grid, cmap=cmap, norm=norm, interpolation="none")
    ax.set_xticks([x - 0.5 for x in range(frame.cols + 1)], minor=True)
    ax.set_yticks([y - 0.5 for y in range(frame.rows + 1)], minor=True)
    ax.grid(which="minor", color="#dddddd", linewidth=0.4)
    ax.tick_params(which="both", length=0, labelsize=6)
    handles = [
        mpatches.Patch(color=_PALETTE[index[object_id]], label=object_id)
        for object_id in ids
    ]
    ax.legend(handles=handles, loc="upper right", fontsize=6, framealpha=0.8)
    return index


def _highlight(ax, mask: Mask, color: str, label: str | None = None) -> None:
    first = True
    for r, c in sorted(mask):
        ax.add_patch(
            mpatches.Rectangle(
                (c - 0.5, r - 0.5),
                1,
                1,
                facecolor=color,
                alpha=0.45,
                edgecolor=color,
                linewidth=1.2,
                label=label if first else None,
            )
        )
        first = False


def _finish(fig, ax, title: str, path: str | Path) -> Path:
    ax.set_title(title, fontsize=9)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=160, bbox_inches="tight")
    plt.close(fig)
    return out


def save_frame_figure(frame: Frame, path: str | Path, title: str | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(4, 4))
    _draw_frame(ax, frame)
    return _finish(fig, ax, title or f"tick {frame.tick}", path)


def save_mask_figure(
    frame: Frame,
    mask: Mask,
    path: str | Path,
    title: str | None = None,
    color: str = "#d62728",
) -> Path:
    fig, ax = plt.subplots(figsize=(4, 4))
    _draw_frame(ax, frame)
    _highlight(ax, mask, color)
    return _finish(fig, ax, title or f"mask at tick {frame.tick}", path)


def save_detection_figure(
    frame: Frame, detections: dict[str, Mask], path: str | Path, title: str | None = None
) -> Path:
    """One figure with every detected part region shaded."""
    fig, ax = plt.subplots(figsize=(4, 4))
    _draw_frame(ax, frame)
    shades = ("#d62728", "#bcbd22", "#17becf", "#e377c2")
    for i, concept in enumerate(sorted(detections)):
        _highlight(ax, detections[concept], shades[i % len(shades)], label=concept)
    if detections:
        ax.legend(loc="lower left", fontsize=6, framealpha=0.8)
    return _finish(fig, ax, title or f"detections at tick {frame.tick}", path)


def save_census_figure(
    world: World, frame: Frame, plan: Plan, path: str | Path, title: str | None = None
) -> Path:
    """Candidate anchor cells coloured by the stability verdict."""
    fig, ax = plt.subplots(figsize=(4, 4))
    _draw_frame(ax, frame)
    spec = world.spec(plan.object_id)
    for pose, ok in plan.verdicts:
        cells = frozenset((r + pose[0], c + pose[1]) for r, c in spec.cells)
        _highlight(ax, cells, "#2ca02c" if ok else "#d62728")
    if plan.pose is not None:
        ax.add_patch(
            mpatches.Rectangle(
                (plan.pose[1] - 0.5, plan.pose[0] - 0.5),
                1,
                1,
                fill=False,
                edgecolor="#000000",
                linewidth=2.0,
            )
        )
    header = title or f"{plan.mode} mode: {plan.candidate_count} candidates"
    return _finish(fig, ax, header, path)
