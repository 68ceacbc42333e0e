"""Regular grid frames and plot geometry.

A grid frame is a finite population of square cells laid out on a regular
lattice.  Cells are identified by a single row-major index: cell ``i`` sits
at column ``i % n_cols`` and row ``i // n_cols``, and its center is offset
half a cell side from the lower-left origin.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridFrame:
    """Finite population of N = n_cols * n_rows square cells.

    Parameters
    ----------
    n_cols, n_rows : int
        Lattice dimensions, each at least 2.
    cell_side : float
        Side length of a cell, strictly positive.
    origin : tuple of float
        Coordinates of the lower-left corner of cell 0.
    """

    n_cols: int
    n_rows: int
    cell_side: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        problems = []
        if not isinstance(self.n_cols, int) or self.n_cols < 2:
            problems.append(f"n_cols must be an integer >= 2, got {self.n_cols!r}")
        if not isinstance(self.n_rows, int) or self.n_rows < 2:
            problems.append(f"n_rows must be an integer >= 2, got {self.n_rows!r}")
        if not (isinstance(self.cell_side, (int, float)) and math.isfinite(self.cell_side)
                and self.cell_side > 0):
            problems.append(f"cell_side must be a finite positive number, got {self.cell_side!r}")
        if (len(self.origin) != 2
                or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in self.origin)):
            problems.append(f"origin must be a pair of finite numbers, got {self.origin!r}")
        if problems:
            raise ValueError("invalid frame: " + "; ".join(problems))
        object.__setattr__(self, "cell_side", float(self.cell_side))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    # conventional population-size alias
    N = n_cells

    @property
    def width(self) -> float:
        return self.n_cols * self.cell_side

    @property
    def height(self) -> float:
        return self.n_rows * self.cell_side


def make_grid_frame(n_cols: int, n_rows: int, cell_side: float,
                    origin: tuple[float, float] = (0.0, 0.0)) -> GridFrame:
    """Construct a validated GridFrame."""
    return GridFrame(n_cols, n_rows, cell_side, origin)


def cell_center(frame: GridFrame, index: int) -> tuple[float, float]:
    """Center coordinates of the cell at a row-major index.

    Raises
    ------
    IndexError
        If ``index`` is outside ``[0, frame.n_cells)``.
    """
    if not 0 <= index < frame.n_cells:
        raise IndexError(f"cell index {index} out of range [0, {frame.n_cells})")
    col = index % frame.n_cols
    row = index // frame.n_cols
    x0, y0 = frame.origin
    return (x0 + (col + 0.5) * frame.cell_side, y0 + (row + 0.5) * frame.cell_side)


def cell_centers(frame: GridFrame) -> np.ndarray:
    """All cell centers as an (N, 2) array in row-major cell order."""
    cols = np.arange(frame.n_cols)
    rows = np.arange(frame.n_rows)
    cgrid, rgrid = np.meshgrid(cols, rows)  # row-major: row varies slowest
    x0, y0 = frame.origin
    x = x0 + (cgrid.ravel() + 0.5) * frame.cell_side
    y = y0 + (rgrid.ravel() + 0.5) * frame.cell_side
    return np.column_stack([x, y])


def pairwise_distance(frame: GridFrame, i: int, j: int) -> float:
    """Euclidean distance between the centers of cells i and j."""
    xi, yi = cell_center(frame, i)
    xj, yj = cell_center(frame, j)
    return math.hypot(xi - xj, yi - yj)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangular region."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(
                f"degenerate region: ({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains_point(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


@dataclass(frozen=True)
class CircularPlot:
    """Circular sampling plot given by center and radius."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not (isinstance(self.radius, (int, float)) and self.radius > 0
                and math.isfinite(self.radius)):
            raise ValueError(f"plot radius must be finite and positive, got {self.radius!r}")

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def inside(self, region: Rect) -> bool:
        """Whether the full disk lies within the region."""
        cx, cy = self.center
        return (cx - self.radius >= region.xmin and cx + self.radius <= region.xmax
                and cy - self.radius >= region.ymin and cy + self.radius <= region.ymax)
