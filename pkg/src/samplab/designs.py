"""Sampling designs.

Two families:

* finite-frame designs selecting cell indices — simple random sampling
  without replacement and systematic lattice sampling with an enumerable
  set of starts;
* infinite-population plot designs selecting circular-plot centers inside
  a rectangular region — random placement with non-overlap constraints and
  a randomly offset systematic lattice.

Systematic start identifiers map row-major over the spacing cell, so
enumeration order is stable: ``start_id = oy * spacing_x + ox``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import LayoutError, PackingError
from .frame import GridFrame, Rect

DESIGN_SRS = "SRS"
DESIGN_SYS = "SYS"

# rejection-sampling attempt cap per requested plot
DEFAULT_ATTEMPTS_PER_PLOT = 10_000


@dataclass(frozen=True)
class SampleDraw:
    """One realized sample: cell indices on a frame, or plot centers.

    Exactly one of ``indices`` / ``centers`` is set.  ``start_id``
    identifies the systematic start when the design is enumerable.
    """

    design_tag: str
    n: int
    indices: np.ndarray = None
    centers: np.ndarray = None
    start_id: int = None

    def __post_init__(self):
        if (self.indices is None) == (self.centers is None):
            raise ValueError("exactly one of indices/centers must be given")
        if self.indices is not None:
            idx = np.asarray(self.indices)
            if len(np.unique(idx)) != len(idx):
                raise ValueError("sample indices must be distinct")
            if len(idx) != self.n:
                raise ValueError(f"n={self.n} but {len(idx)} indices given")
        else:
            if len(self.centers) != self.n:
                raise ValueError(f"n={self.n} but {len(self.centers)} centers given")
        if self.n < 1:
            raise ValueError(f"sample size must be at least 1, got {self.n}")


def srs_draw(frame: GridFrame, n: int, rng: np.random.Generator) -> SampleDraw:
    """Simple random sample of n distinct cells, all subsets equiprobable."""
    if not 2 <= n <= frame.n_cells:
        raise LayoutError(
            f"SRS size must satisfy 2 <= n <= N={frame.n_cells}, got {n}")
    idx = np.sort(rng.choice(frame.n_cells, size=n, replace=False))
    return SampleDraw(design_tag=DESIGN_SRS, n=n, indices=idx)


@dataclass(frozen=True)
class SystematicLayout:
    """A k_cols x k_rows sample lattice aligned to the frame grid.

    Spacings must divide the frame exactly, so the ``num_starts`` offset
    choices partition the frame into equal-probability samples.
    """

    frame: GridFrame
    k_cols: int
    k_rows: int
    spacing_x: int
    spacing_y: int
    num_starts: int

    @property
    def n(self) -> int:
        return self.k_cols * self.k_rows


def systematic_layout(frame: GridFrame, k_cols: int, k_rows: int) -> SystematicLayout:
    """Build a systematic layout, requiring exact spacing divisibility."""
    problems = []
    if not (isinstance(k_cols, int) and k_cols >= 1):
        problems.append(f"k_cols must be a positive integer, got {k_cols!r}")
    if not (isinstance(k_rows, int) and k_rows >= 1):
        problems.append(f"k_rows must be a positive integer, got {k_rows!r}")
    if not problems:
        if frame.n_cols % k_cols:
            problems.append(
                f"frame width {frame.n_cols} not divisible by k_cols={k_cols} "
                f"(spacing {frame.n_cols / k_cols:g})")
        if frame.n_rows % k_rows:
            problems.append(
                f"frame height {frame.n_rows} not divisible by k_rows={k_rows} "
                f"(spacing {frame.n_rows / k_rows:g})")
    if problems:
        raise LayoutError("; ".join(problems))
    sx = frame.n_cols // k_cols
    sy = frame.n_rows // k_rows
    return SystematicLayout(frame=frame, k_cols=k_cols, k_rows=k_rows,
                            spacing_x=sx, spacing_y=sy, num_starts=sx * sy)


def square_layout(frame: GridFrame, n: int) -> SystematicLayout:
    """Layout for a square sample lattice of n cells (n a perfect square)."""
    k = round(n ** 0.5)
    if k * k != n:
        raise LayoutError(f"square lattice needs a perfect-square n, got {n}")
    return systematic_layout(frame, k, k)


def systematic_draw(layout: SystematicLayout, start_id: int) -> SampleDraw:
    """The sample for one systematic start.

    ``start_id`` in ``[0, num_starts)`` maps row-major to an offset
    ``(ox, oy)`` within the spacing cell; the sample holds the cells at
    ``(ox + a*spacing_x, oy + b*spacing_y)``.
    """
    if not 0 <= start_id < layout.num_starts:
        raise IndexError(f"start_id {start_id} out of range [0, {layout.num_starts})")
    ox = start_id % layout.spacing_x
    oy = start_id // layout.spacing_x
    cols = ox + np.arange(layout.k_cols) * layout.spacing_x
    rows = oy + np.arange(layout.k_rows) * layout.spacing_y
    rgrid, cgrid = np.meshgrid(rows, cols, indexing="ij")
    idx = (rgrid * layout.frame.n_cols + cgrid).ravel()
    return SampleDraw(design_tag=DESIGN_SYS, n=layout.n, indices=idx,
                      start_id=int(start_id))


def systematic_random_draw(layout: SystematicLayout,
                           rng: np.random.Generator) -> SampleDraw:
    """The sample for one uniformly selected systematic start."""
    return systematic_draw(layout, int(rng.integers(layout.num_starts)))


def enumerate_systematic(layout: SystematicLayout):
    """All systematic samples in start_id order; together they partition the frame."""
    for start_id in range(layout.num_starts):
        yield systematic_draw(layout, start_id)


def _inset_region(region: Rect, radius: float) -> Rect:
    if 2 * radius >= region.width or 2 * radius >= region.height:
        raise PackingError(
            f"region {region.width:g} x {region.height:g} cannot hold a plot of "
            f"radius {radius:g} clear of its boundary")
    return Rect(region.xmin + radius, region.ymin + radius,
                region.xmax - radius, region.ymax - radius)


def plot_srs_draw(region: Rect, radius: float, n: int, rng: np.random.Generator,
                  max_attempts: int = None) -> SampleDraw:
    """n non-overlapping plot centers placed uniformly at random.

    Rejection sampling: candidate centers are uniform over the inset
    rectangle (boundary clearance >= radius) and accepted when at least
    2*radius from every accepted center.  Capped at ``max_attempts``
    candidates (default 10000 per plot).
    """
    if n < 1:
        raise PackingError(f"need at least one plot, got n={n}")
    inset = _inset_region(region, radius)
    if max_attempts is None:
        max_attempts = DEFAULT_ATTEMPTS_PER_PLOT * n
    lo = np.array([inset.xmin, inset.ymin])
    hi = np.array([inset.xmax, inset.ymax])
    min_d2 = (2 * radius) ** 2
    accepted = np.empty((n, 2))
    count = 0
    for _ in range(max_attempts):
        cand = rng.uniform(lo, hi)
        if count and np.min(np.sum((accepted[:count] - cand) ** 2, axis=1)) < min_d2:
            continue
        accepted[count] = cand
        count += 1
        if count == n:
            return SampleDraw(design_tag=DESIGN_SRS, n=n, centers=accepted)
    raise PackingError(
        f"placed only {count} of {n} plots after {max_attempts} attempts "
        f"(radius {radius:g} in {region.width:g} x {region.height:g})")


def plot_systematic_draw(region: Rect, radius: float, k_cols: int, k_rows: int,
                         rng: np.random.Generator) -> SampleDraw:
    """Randomly offset k_cols x k_rows lattice of plot centers.

    The offset is uniform over one spacing cell and then clipped to
    ``[radius, spacing - radius]`` on each axis, so every plot clears the
    region boundary; spacing >= 2*radius guarantees non-overlap.
    """
    sx = region.width / k_cols
    sy = region.height / k_rows
    if sx < 2 * radius or sy < 2 * radius:
        raise PackingError(
            f"lattice spacing {sx:g} x {sy:g} too small for plots of radius "
            f"{radius:g} (needs >= {2 * radius:g})")
    ox = np.clip(rng.uniform(0, sx), radius, sx - radius)
    oy = np.clip(rng.uniform(0, sy), radius, sy - radius)
    cx = region.xmin + ox + np.arange(k_cols) * sx
    cy = region.ymin + oy + np.arange(k_rows) * sy
    cxg, cyg = np.meshgrid(cx, cy)
    centers = np.column_stack([cxg.ravel(), cyg.ravel()])
    return SampleDraw(design_tag=DESIGN_SYS, n=k_cols * k_rows, centers=centers)


def draws_to_csv(draws, path) -> None:
    """Audit export: one row per sampled unit.

    Columns: replicate_id, design, start_id, unit_id, x, y.  Cell draws
    fill unit_id; plot draws fill x and y.  Empty fields do not apply.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate_id", "design", "start_id", "unit_id", "x", "y"])
        for rep, draw in enumerate(draws):
            start = "" if draw.start_id is None else draw.start_id
            if draw.indices is not None:
                for unit in draw.indices:
                    writer.writerow([rep, draw.design_tag, start, int(unit), "", ""])
            else:
                for x, y in draw.centers:
                    writer.writerow([rep, draw.design_tag, start, "",
                                     repr(float(x)), repr(float(y))])
