"""Uniform lattices over a bounded box, cell masks, and grid functions.

The box [-half_width, half_width]^dim is split into resolution^dim equal
cells; functions live on cell centers and are extended by zero outside the
box (homogeneous Dirichlet exterior condition).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StructuralError

MAX_CELLS = 16384  # dense-assembly budget for grid construction


@dataclass(frozen=True)
class Grid:
    """Uniform lattice over [-half_width, half_width]^dim."""

    dim: int
    half_width: float
    resolution: int

    @property
    def h(self) -> float:
        """Cell width."""
        return 2.0 * self.half_width / self.resolution

    @property
    def n_cells(self) -> int:
        return self.resolution ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def axis_centers(self) -> np.ndarray:
        """1D coordinates of cell centers along one axis."""
        h = self.h
        return -self.half_width + h * (np.arange(self.resolution) + 0.5)

    @property
    def cell_centers(self) -> np.ndarray:
        """(n_cells, dim) array of cell-center coordinates, C-ordered."""
        ax = self.axis_centers
        if self.dim == 1:
            return ax[:, None]
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def multi_index(self, flat: np.ndarray) -> np.ndarray:
        """(k, dim) integer lattice coordinates of flat cell indices."""
        flat = np.asarray(flat)
        if self.dim == 1:
            return flat[:, None]
        return np.column_stack(np.unravel_index(flat, (self.resolution,) * 2))

    def flat_index(self, multi: np.ndarray) -> np.ndarray:
        multi = np.asarray(multi)
        if self.dim == 1:
            return multi[:, 0]
        return np.ravel_multi_index((multi[:, 0], multi[:, 1]), (self.resolution,) * 2)


def build_grid(dim: int, half_width: float, resolution: int) -> Grid:
    """Construct a uniform grid, validating the dense-assembly budget."""
    if dim not in (1, 2):
        raise ParameterError(f"dim must be 1 or 2, got {dim}")
    if not (half_width > 0):
        raise ParameterError(f"half_width must be > 0, got {half_width}")
    if not (isinstance(resolution, (int, np.integer)) and resolution >= 2):
        raise ParameterError(f"resolution must be an integer >= 2, got {resolution}")
    if resolution ** dim > MAX_CELLS:
        raise ParameterError(
            f"resolution {resolution} gives {resolution ** dim} cells, "
            f"over the budget of {MAX_CELLS}"
        )
    return Grid(dim=int(dim), half_width=float(half_width), resolution=int(resolution))


@dataclass(frozen=True)
class DomainMask:
    """Boolean cell subset of a grid; the discrete analogue of an open set."""

    grid: Grid
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.shape != (self.grid.n_cells,):
            raise StructuralError(
                f"mask has {cells.shape[0] if cells.ndim == 1 else 'bad'} cells, "
                f"grid has {self.grid.n_cells}"
            )
        object.__setattr__(self, "cells", cells)

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def volume(self) -> float:
        return self.grid.cell_volume * self.n_active

    @property
    def is_empty(self) -> bool:
        return self.n_active == 0

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.cells)

    def is_subset_of(self, other: "DomainMask") -> bool:
        if other.grid != self.grid:
            raise StructuralError("masks live on different grids")
        return bool(np.all(other.cells[self.cells]))


def full_mask(grid: Grid) -> DomainMask:
    return DomainMask(grid, np.ones(grid.n_cells, dtype=bool))


def empty_mask(grid: Grid) -> DomainMask:
    return DomainMask(grid, np.zeros(grid.n_cells, dtype=bool))


def mask_from_indices(grid: Grid, indices) -> DomainMask:
    cells = np.zeros(grid.n_cells, dtype=bool)
    cells[np.asarray(indices, dtype=int)] = True
    return DomainMask(grid, cells)


def translate_mask(mask: DomainMask, shift) -> DomainMask:
    """Translate a mask by a whole number of cells along each axis.

    Raises ParameterError if any cell would leave the box.
    """
    grid = mask.grid
    shift = np.atleast_1d(np.asarray(shift, dtype=int))
    if shift.shape != (grid.dim,):
        raise ParameterError(f"shift must have {grid.dim} components")
    multi = grid.multi_index(mask.active_indices) + shift
    if multi.size and (multi.min() < 0 or multi.max() >= grid.resolution):
        raise ParameterError("shift moves mask cells outside the box")
    return mask_from_indices(grid, grid.flat_index(multi))


@dataclass(frozen=True)
class GridFunction:
    """Real-valued function on grid cells, zero outside the box."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise StructuralError(
                f"function has {values.size} values, grid has {self.grid.n_cells} cells"
            )
        object.__setattr__(self, "values", values)

    def l2_norm_sq(self) -> float:
        """Squared L2 norm with the cell-volume weight."""
        return float(self.grid.cell_volume * np.dot(self.values, self.values))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.l2_norm_sq()))


def l2_inner(u: GridFunction, v: GridFunction) -> float:
    if u.grid != v.grid:
        raise StructuralError("functions live on different grids")
    return float(u.grid.cell_volume * np.dot(u.values, v.values))


def l2_distance(u: GridFunction, v: GridFunction) -> float:
    if u.grid != v.grid:
        raise StructuralError("functions live on different grids")
    d = u.values - v.values
    return float(np.sqrt(u.grid.cell_volume * np.dot(d, d)))


# --- JSON-friendly serialization -------------------------------------------

def grid_to_json(grid: Grid) -> dict:
    return {"dim": grid.dim, "half_width": grid.half_width, "resolution": grid.resolution}


def grid_from_json(obj: dict) -> Grid:
    return build_grid(obj["dim"], obj["half_width"], obj["resolution"])


def _rle_encode(bits: np.ndarray) -> str:
    """Run-length encoding: alternating run lengths, starting with zeros."""
    runs = []
    current, count = False, 0
    for b in bits:
        if bool(b) == current:
            count += 1
        else:
            runs.append(count)
            current, count = bool(b), 1
    runs.append(count)
    return ",".join(str(r) for r in runs)


def _rle_decode(text: str, length: int) -> np.ndarray:
    bits = np.zeros(length, dtype=bool)
    pos, value = 0, False
    for token in text.split(","):
        run = int(token)
        bits[pos:pos + run] = value
        pos += run
        value = not value
    if pos != length:
        raise ParameterError(f"cells run-length string decodes to {pos} bits, expected {length}")
    return bits


def mask_to_json(mask: DomainMask) -> dict:
    return {"grid": grid_to_json(mask.grid), "cells": _rle_encode(mask.cells)}


def mask_from_json(obj: dict) -> DomainMask:
    grid = grid_from_json(obj["grid"])
    return DomainMask(grid, _rle_decode(obj["cells"], grid.n_cells))
