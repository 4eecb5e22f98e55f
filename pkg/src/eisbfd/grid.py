"""Block grids: cells of width ``h`` carrying two nodes per axis at ``x_j -/+ h/4``.

Multi-dimensional grids are tensor products of the 1D construction. Fields on
them are stored as arrays of shape ``(2N,) * dim`` indexed ``[ix, iy, iz]``;
along each axis the nodes are cell-major and left-to-right within a cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class GridError(ValueError):
    """Invalid grid parameters."""


class InvalidSizeError(GridError):
    pass


class InvalidDomainError(GridError):
    pass


@dataclass(frozen=True)
class GhostLayer:
    """Exterior extrapolation nodes of a Dirichlet axis.

    ``left`` holds the nodes at ``-h/4`` and ``-3h/4`` (nearest first);
    ``right`` the nodes at ``L + h/4`` and ``L + 3h/4``.
    """

    left: np.ndarray
    right: np.ndarray


@dataclass(frozen=True)
class BlockGrid1D:
    n_cells: int
    length: float
    periodic: bool
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    ghosts: Optional[GhostLayer] = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 3:
            raise InvalidSizeError(
                f"n_cells must be an integer >= 3 (the stencil reaches two cells), got {self.n_cells}"
            )
        if not np.isfinite(self.length) or self.length <= 0:
            raise InvalidDomainError(f"length must be positive, got {self.length}")
        h = self.length / self.n_cells
        centers = h * np.arange(self.n_cells) + h / 2
        nodes = np.empty(2 * self.n_cells)
        nodes[0::2] = centers - h / 4
        nodes[1::2] = centers + h / 4
        nodes.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)
        if self.periodic:
            ghosts = None
        else:
            left = np.array([-h / 4, -3 * h / 4])
            right = self.length + np.array([h / 4, 3 * h / 4])
            ghosts = GhostLayer(left, right)
        object.__setattr__(self, "ghosts", ghosts)

    dim = 1

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_nodes,)

    @property
    def axes(self) -> tuple[BlockGrid1D, ...]:
        return (self,)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return (self.nodes,)


@dataclass(frozen=True)
class BlockGridND:
    """Tensor-product block grid with the same 1D construction on every axis."""

    axis: BlockGrid1D
    dim: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GridError(f"dim must be 2 or 3, got {self.dim}")

    @property
    def n_cells(self) -> int:
        return self.axis.n_cells

    @property
    def length(self) -> float:
        return self.axis.length

    @property
    def h(self) -> float:
        return self.axis.h

    @property
    def periodic(self) -> bool:
        return self.axis.periodic

    @property
    def axes(self) -> tuple[BlockGrid1D, ...]:
        return (self.axis,) * self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.axis.n_nodes,) * self.dim

    @property
    def n_nodes(self) -> int:
        return self.axis.n_nodes**self.dim

    @property
    def ghosts(self) -> Optional[GhostLayer]:
        return self.axis.ghosts

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis (``np.ix_`` style)."""
        return np.ix_(*(self.axis.nodes,) * self.dim)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(self.axis.nodes,) * self.dim, indexing="ij"))


BlockGrid2D = BlockGridND
BlockGrid3D = BlockGridND
BlockGrid = BlockGrid1D | BlockGridND


def build_grid_1d(n_cells: int, length: float = 2 * np.pi, periodic: bool = True) -> BlockGrid1D:
    return BlockGrid1D(n_cells, float(length), bool(periodic))


def build_grid_2d(n_cells: int, length: float = 2 * np.pi, periodic: bool = True) -> BlockGridND:
    return BlockGridND(build_grid_1d(n_cells, length, periodic), 2)


def build_grid_3d(n_cells: int, length: float = 2 * np.pi, periodic: bool = True) -> BlockGridND:
    return BlockGridND(build_grid_1d(n_cells, length, periodic), 3)


def build_grid(dim: int, n_cells: int, length: float = 2 * np.pi, periodic: bool = True) -> BlockGrid:
    if dim == 1:
        return build_grid_1d(n_cells, length, periodic)
    return BlockGridND(build_grid_1d(n_cells, length, periodic), dim)
