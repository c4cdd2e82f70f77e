"""Block partitioning math for dense n-dimensional arrays.

An array of a given ``shape`` is partitioned by a ``grid`` giving the number
of blocks along each axis.  Blocks are cut by a ceiling split: every block
along an axis has ``divup(dim, g)`` elements except possibly the last, which
is ragged.  Shapes, grids, and block ids are plain tuples of ints.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

Shape = tuple[int, ...]
Grid = tuple[int, ...]
BlockId = tuple[int, ...]


def divup(n: int, k: int) -> int:
    """Integer division of ``n`` by ``k`` rounded up."""
    if n < 1 or k < 1:
        raise ValueError(f"divup requires positive operands, got ({n}, {k})")
    return (n + k - 1) // k


def validate_shape(shape: Shape) -> None:
    if len(shape) == 0:
        raise ValueError("shape must have at least one axis")
    if any(int(d) != d or d < 1 for d in shape):
        raise ValueError(f"shape dims must be positive integers, got {shape}")


def validate_grid(shape: Shape, grid: Grid) -> None:
    """Check that ``grid`` tiles ``shape`` into non-empty blocks.

    Beyond rank and range checks, the ceiling split must not produce empty
    trailing blocks: e.g. shape 4 cannot be cut into 3 blocks of ceil(4/3)=2.
    """
    validate_shape(shape)
    if len(grid) != len(shape):
        raise ValueError(f"grid rank {len(grid)} != shape rank {len(shape)}")
    for a, (s, g) in enumerate(zip(shape, grid)):
        if int(g) != g or g < 1:
            raise ValueError(f"grid dims must be positive integers, got {grid}")
        if g > s:
            raise ValueError(f"grid dim {g} exceeds shape dim {s} on axis {a}")
        if (g - 1) * divup(s, g) >= s:
            raise ValueError(
                f"grid dim {g} on axis {a} leaves an empty block for shape dim {s}"
            )


def is_valid_grid(shape: Shape, grid: Grid) -> bool:
    try:
        validate_grid(shape, grid)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class BlockExtent:
    """Per-axis half-open index ranges of one block within the global array."""

    ranges: tuple[tuple[int, int], ...]

    @property
    def shape(self) -> Shape:
        return tuple(hi - lo for lo, hi in self.ranges)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(lo, hi) for lo, hi in self.ranges)


def block_extent(shape: Shape, grid: Grid, block_id: BlockId) -> BlockExtent:
    """Index ranges of block ``block_id`` under the ceiling split."""
    validate_grid(shape, grid)
    if len(block_id) != len(grid):
        raise ValueError(f"block id rank {len(block_id)} != grid rank {len(grid)}")
    ranges = []
    for a, (s, g, i) in enumerate(zip(shape, grid, block_id)):
        if not 0 <= i < g:
            raise ValueError(f"block coordinate {i} out of range [0, {g}) on axis {a}")
        c = divup(s, g)
        ranges.append((i * c, min((i + 1) * c, s)))
    return BlockExtent(tuple(ranges))


def block_ids(grid: Grid) -> list[BlockId]:
    """All block ids of a grid in row-major order."""
    return list(itertools.product(*(range(g) for g in grid)))


def block_shape(shape: Shape, grid: Grid) -> Shape:
    """Shape of the non-ragged blocks (the first block's shape)."""
    return tuple(divup(s, g) for s, g in zip(shape, grid))


def auto_grid(shape: Shape, p: int) -> Grid:
    """Partition ``shape`` over ``p`` workers, weighting larger axes more.

    The worker count is factored across axes as p**w, where the weights w are
    a numerically stable softmax of the axis lengths.  Each factor is rounded
    to the nearest integer, clamped to [1, dim], and if rounding overshoots
    the grid product is shrunk back to at most ``p`` by decrementing the
    largest grid dims first (lowest axis on ties).
    """
    validate_shape(shape)
    if int(p) != p or p < 1:
        raise ValueError(f"worker count must be a positive integer, got {p}")
    hi = max(shape)
    exps = [math.exp(d - hi) for d in shape]
    total = sum(exps)
    weights = [e / total for e in exps]
    grid = [
        min(max(int(round(p**w)), 1), d) for w, d in zip(weights, shape)
    ]
    while math.prod(grid) > p:
        axis = max(range(len(grid)), key=lambda a: (grid[a], -a))
        grid[axis] -= 1
    return tuple(grid)
