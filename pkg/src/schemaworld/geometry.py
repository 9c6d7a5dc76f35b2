"""Grid geometry helpers.

Cells are (row, col) tuples with row 0 at the top; gravity points toward
increasing row numbers.  Masks are frozensets of cells.  Everything here is
pure and deterministic.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable

Cell = tuple[int, int]
Mask = frozenset[Cell]

ORTHO_STEPS: tuple[Cell, ...] = ((-1, 0), (1, 0), (0, -1), (0, 1))


def translate(cells: Iterable[Cell], offset: Cell) -> Mask:
    dr, dc = offset
    return frozenset((r + dr, c + dc) for r, c in cells)


def in_bounds(cells: Iterable[Cell], rows: int, cols: int) -> bool:
    return all(0 <= r < rows and 0 <= c < cols for r, c in cells)


def centroid(cells: Mask) -> tuple[float, float]:
    n = len(cells)
    if n == 0:
        raise ValueError("centroid of empty mask")
    return (sum(r for r, _ in cells) / n, sum(c for _, c in cells) / n)


def adjacent_pairs(a: Mask, b: Mask) -> list[tuple[Cell, Cell]]:
    """All 4-adjacent (cell_of_a, cell_of_b) pairs, sorted."""
    pairs = []
    for r, c in a:
        for dr, dc in ORTHO_STEPS:
            nb = (r + dr, c + dc)
            if nb in b:
                pairs.append(((r, c), nb))
    return sorted(pairs)


def masks_adjacent(a: Mask, b: Mask) -> bool:
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    for r, c in small:
        for dr, dc in ORTHO_STEPS:
            if (r + dr, c + dc) in large:
                return True
    return False


def below_vote(a: Mask, b: Mask) -> bool:
    """Majority rule for the below(a, b) relation over a contact.

    Among all 4-adjacent cell pairs between a and b, a strict majority must
    be vertical with a's cell directly beneath b's cell.
    """
    pairs = adjacent_pairs(a, b)
    if not pairs:
        return False
    beneath = sum(1 for (ra, ca), (rb, cb) in pairs if ca == cb and ra == rb + 1)
    return 2 * beneath > len(pairs)


def min_manhattan(a: Mask, b: Mask) -> int:
    return min(abs(ra - rb) + abs(ca - cb) for ra, ca in a for rb, cb in b)


def chebyshev_ball(cell: Cell, radius: int) -> set[Cell]:
    r, c = cell
    return {
        (r + dr, c + dc)
        for dr in range(-radius, radius + 1)
        for dc in range(-radius, radius + 1)
    }


def clip(cells: Iterable[Cell], rows: int, cols: int) -> Mask:
    return frozenset((r, c) for r, c in cells if 0 <= r < rows and 0 <= c < cols)


def is_connected(cells: Mask) -> bool:
    """4-connectivity of a non-empty mask."""
    if not cells:
        return False
    seen = {next(iter(sorted(cells)))}
    frontier = deque(seen)
    while frontier:
        r, c = frontier.popleft()
        for dr, dc in ORTHO_STEPS:
            nb = (r + dr, c + dc)
            if nb in cells and nb not in seen:
                seen.add(nb)
                frontier.append(nb)
    return len(seen) == len(cells)


def enclosed_holes(cells: Mask) -> Mask:
    """Empty cells fully enclosed by the mask (unreachable from outside).

    Flood-fills the complement of the mask from just outside its bounding
    box; complement cells never reached are holes.
    """
    if not cells:
        return frozenset()
    rmin = min(r for r, _ in cells) - 1
    rmax = max(r for r, _ in cells) + 1
    cmin = min(c for _, c in cells) - 1
    cmax = max(c for _, c in cells) + 1
    start = (rmin, cmin)
    seen = {start}
    frontier = deque([start])
    while frontier:
        r, c = frontier.popleft()
        for dr, dc in ORTHO_STEPS:
            nb = (r + dr, c + dc)
            nr, nc = nb
            if not (rmin <= nr <= rmax and cmin <= nc <= cmax):
                continue
            if nb in cells or nb in seen:
                continue
            seen.add(nb)
            frontier.append(nb)
    holes = []
    for r in range(rmin, rmax + 1):
        for c in range(cmin, cmax + 1):
            if (r, c) not in cells and (r, c) not in seen:
                holes.append((r, c))
    return frozenset(holes)


def iou(a: Mask, b: Mask) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def mask_to_rle(cells: Mask) -> str:
    """Run-length encode a mask as ``row:c0-c1,c2,...;row:...`` ("-" if empty)."""
    if not cells:
        return "-"
    by_row: dict[int, list[int]] = {}
    for r, c in cells:
        by_row.setdefault(r, []).append(c)
    parts = []
    for r in sorted(by_row):
        cols = sorted(by_row[r])
        runs: list[tuple[int, int]] = []
        start = prev = cols[0]
        for c in cols[1:]:
            if c == prev + 1:
                prev = c
                continue
            runs.append((start, prev))
            start = prev = c
        runs.append((start, prev))
        encoded = ",".join(f"{a}-{b}" if a != b else f"{a}" for a, b in runs)
        parts.append(f"{r}:{encoded}")
    return ";".join(parts)


def rle_to_mask(text: str) -> Mask:
    """Inverse of mask_to_rle."""
    text = text.strip()
    if text == "-" or not text:
        return frozenset()
    cells: set[Cell] = set()
    for part in text.split(";"):
        row_text, runs = part.split(":", 1)
        r = int(row_text)
        for run in runs.split(","):
            if "-" in run:
                a, b = run.split("-", 1)
                cells.update((r, c) for c in range(int(a), int(b) + 1))
            else:
                cells.add((r, int(run)))
    return frozenset(cells)
