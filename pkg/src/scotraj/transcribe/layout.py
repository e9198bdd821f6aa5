"""Multi-dimensional views onto flat NLP variable blocks."""

from __future__ import annotations

import numpy as np


class VarGrid:
    """A variable block addressed by structured indices.

    `idx(*parts)` maps grid coordinates to flat positions in the NLP
    vector; parts broadcast like numpy indices, so whole index columns
    for vectorized constraint groups come out of one call.
    """

    def __init__(self, block, shape):
        self.block = block
        self.shape = tuple(int(s) for s in shape)
        if int(np.prod(self.shape)) != block.count:
            raise ValueError(
                f"grid shape {self.shape} does not fill block "
                f"{block.name!r} of size {block.count}"
            )

    @property
    def name(self) -> str:
        return self.block.name

    def idx(self, *parts):
        if len(parts) != len(self.shape):
            raise ValueError(
                f"{self.name}: expected {len(self.shape)} indices, got {len(parts)}"
            )
        if not self.shape:
            return self.block.offset
        flat = np.ravel_multi_index(tuple(np.asarray(p) for p in parts), self.shape)
        return self.block.offset + flat

    def decode(self, x: np.ndarray) -> np.ndarray:
        seg = x[self.block.offset: self.block.offset + self.block.count]
        return seg.reshape(self.shape)


def add_grid(builder, name, shape, lb=-np.inf, ub=np.inf, x0=0.0, scale=1.0,
             meta=None) -> VarGrid:
    """Register a block sized by `shape` and return its grid view."""
    shape = tuple(int(s) for s in shape)
    count = int(np.prod(shape))
    meta = dict(meta or {})
    meta["shape"] = shape
    block = builder.add_block(name, count, lb=lb, ub=ub, x0=x0, scale=scale,
                              meta=meta)
    return VarGrid(block, shape)


def decode_blocks(problem, x) -> dict:
    """Split a solution vector into per-block arrays, reshaped when known."""
    out = {}
    for block in problem.blocks:
        seg = np.asarray(x)[block.offset: block.offset + block.count]
        shape = block.meta.get("shape")
        out[block.name] = seg.reshape(shape) if shape else seg.copy()
    return out


def mesh(*dims):
    """Raveled index arrays enumerating the product grid of `dims`."""
    grids = np.meshgrid(*[np.arange(int(d)) for d in dims], indexing="ij")
    return tuple(g.ravel() for g in grids)


def pin(grid: VarGrid, parts, value):
    """Fix grid entries to `value` by equal lower/upper bounds (pre-build)."""
    local = grid.idx(*parts) - grid.block.offset
    grid.block.lb[local] = value
    grid.block.ub[local] = value
    grid.block.x0[local] = value


def set_guess(grid: VarGrid, parts, value):
    """Overwrite initial values of grid entries, clipped into bounds."""
    local = grid.idx(*parts) - grid.block.offset
    b = grid.block
    b.x0[local] = np.clip(value, b.lb[local], b.ub[local])
