"""Tree-census stem maps, raster covariates, and plot-based studies.

A stem map is a complete census of tree locations with per-tree biomass
(kg) inside a rectangular region.  Sampling draws circular plots; the
response is the plot's aboveground-biomass density in Mg/ha:

    density = (sum of tree mass in the disk, kg -> Mg) / (disk area, m2 -> ha)

Trees at exactly the plot radius are included.  Plot-level covariates come
from gridded raster layers, aggregated by a probe lattice inside the disk
(area-weighted mean) or, optionally, by the single cell under the plot
center.

The module also ships a synthetic stem-map generator used as the test
stand-in for a real census: tree intensity follows a smooth site index
driven by two latent Gaussian fields, and raster layers mix the same
latents with white cell noise under a correlation knob, so plot biomass
and covariates are correlated with tunable strength.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky as _cholesky

from .errors import ConfigError, GeometryError, IngestionError
from .frame import CircularPlot, GridFrame, Rect, cell_centers
from .gaussfield import LOG_RANGE_DECAY
from .montecarlo import StudyConfig, StudySummary, ReplicateRecord, _ci_or_nan
from .designs import (DESIGN_SRS, DESIGN_SYS, plot_srs_draw,
                      plot_systematic_draw)
from .estimators import ESTIMATOR_MODELS, PopulationFeatures, fast_estimate
from .streams import (DOMAIN_BOOTSTRAP, DOMAIN_PLOT_SAMPLING, DOMAIN_STEMMAP,
                      stream)

# circular plot matching a 100 m2 raster cell footprint
PLOT_AREA_M2 = 100.0
PLOT_RADIUS_M = math.sqrt(PLOT_AREA_M2 / math.pi)

KG_PER_MG = 1000.0
M2_PER_HA = 10_000.0

DEFAULT_SUBGRID = 20

HF_ESTIMATORS = ("HF-HT", "HF-GREG1", "HF-GREG2")


@dataclass(frozen=True)
class StemMap:
    """Census of tree positions (m) and masses (kg) within a region."""

    points: np.ndarray
    agb_kg: np.ndarray
    region: Rect

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        agb = np.asarray(self.agb_kg, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must be (n, 2), got {pts.shape}")
        if len(agb) != len(pts):
            raise ValueError(f"{len(agb)} masses for {len(pts)} points")
        problems = []
        if not np.all(np.isfinite(pts)):
            problems.append("non-finite coordinates")
        if not np.all(np.isfinite(agb)):
            problems.append("non-finite masses")
        elif np.any(agb < 0):
            problems.append("negative masses")
        if not problems:
            inside = ((pts[:, 0] >= self.region.xmin) & (pts[:, 0] <= self.region.xmax)
                      & (pts[:, 1] >= self.region.ymin) & (pts[:, 1] <= self.region.ymax))
            if not inside.all():
                problems.append(f"{int((~inside).sum())} trees outside the region")
        if problems:
            raise ValueError("invalid stem map: " + "; ".join(problems))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "agb_kg", agb)

    @property
    def n_trees(self) -> int:
        return len(self.agb_kg)

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]


class BucketGrid:
    """Uniform spatial index over a region for tree-in-disk queries.

    Buckets are squares of ``bucket_size`` (default: the query radius so a
    disk query touches at most a 3x3 block plus remainder).  Queries return
    exactly the indices a linear scan would.
    """

    def __init__(self, points: np.ndarray, bucket_size: float, region: Rect):
        self.points = np.asarray(points, dtype=float)
        self.bucket_size = float(bucket_size)
        self.region = region
        self.nbx = int(np.ceil(region.width / self.bucket_size))
        self.nby = int(np.ceil(region.height / self.bucket_size))
        bx = np.minimum(((self.points[:, 0] - region.xmin) // self.bucket_size
                         ).astype(int), self.nbx - 1)
        by = np.minimum(((self.points[:, 1] - region.ymin) // self.bucket_size
                         ).astype(int), self.nby - 1)
        bucket_id = by * self.nbx + bx
        self.order = np.argsort(bucket_id, kind="stable")
        sorted_ids = bucket_id[self.order]
        self.starts = np.searchsorted(sorted_ids, np.arange(self.nby * self.nbx + 1))

    def candidates(self, cx: float, cy: float, radius: float) -> np.ndarray:
        """Indices of all points in buckets overlapping the disk's bounding box."""
        bs = self.bucket_size
        x0, y0 = self.region.xmin, self.region.ymin
        bx_lo = max(0, int((cx - x0 - radius) // bs))
        bx_hi = min(self.nbx - 1, int((cx - x0 + radius) // bs))
        by_lo = max(0, int((cy - y0 - radius) // bs))
        by_hi = min(self.nby - 1, int((cy - y0 + radius) // bs))
        chunks = []
        for by in range(by_lo, by_hi + 1):
            base = by * self.nbx
            for bx in range(bx_lo, bx_hi + 1):
                b = base + bx
                chunks.append(self.order[self.starts[b]:self.starts[b + 1]])
        return np.concatenate(chunks) if chunks else np.empty(0, dtype=int)

    def query_disk(self, cx: float, cy: float, radius: float) -> np.ndarray:
        """Indices of points with center distance <= radius (inclusive).

        Returned in ascending order so downstream sums are bit-identical
        to a linear scan over the full point set.
        """
        idx = self.candidates(cx, cy, radius)
        if len(idx) == 0:
            return idx
        dx = self.points[idx, 0] - cx
        dy = self.points[idx, 1] - cy
        return np.sort(idx[dx * dx + dy * dy <= radius * radius])


def plot_agb_density(stemmap: StemMap, plot: CircularPlot,
                     index: BucketGrid = None) -> float:
    """Aboveground-biomass density of one circular plot, Mg/ha.

    The plot disk must lie fully inside the stem-map region; trees at
    exactly the boundary distance count.
    """
    if not plot.inside(stemmap.region):
        raise GeometryError(
            f"plot at {plot.center} with radius {plot.radius:g} crosses the "
            f"stem-map region boundary")
    cx, cy = plot.center
    if index is None:
        dx = stemmap.x - cx
        dy = stemmap.y - cy
        mass = float(stemmap.agb_kg[dx * dx + dy * dy <= plot.radius ** 2].sum())
    else:
        mass = float(stemmap.agb_kg[index.query_disk(cx, cy, plot.radius)].sum())
    return (mass / KG_PER_MG) / (plot.area / M2_PER_HA)


def plot_agb_densities(stemmap: StemMap, centers: np.ndarray, radius: float,
                       index: BucketGrid) -> np.ndarray:
    """Densities for many plot centers using the spatial index."""
    out = np.empty(len(centers))
    area_ha = math.pi * radius ** 2 / M2_PER_HA
    for i, (cx, cy) in enumerate(centers):
        mass = stemmap.agb_kg[index.query_disk(cx, cy, radius)].sum()
        out[i] = mass / KG_PER_MG / area_ha
    return out


@dataclass(frozen=True)
class CovariateRaster:
    """Gridded covariate layers sharing one frame."""

    frame: GridFrame
    layers: dict

    def __post_init__(self):
        n = self.frame.n_cells
        problems = []
        for name, values in self.layers.items():
            values = np.asarray(values, dtype=float)
            if len(values) != n:
                problems.append(f"layer {name!r} has {len(values)} values, frame has {n}")
            elif not np.all(np.isfinite(values)):
                problems.append(f"layer {name!r} has non-finite values")
        if problems:
            raise ValueError("invalid raster: " + "; ".join(problems))
        object.__setattr__(self, "layers",
                           {k: np.asarray(v, dtype=float) for k, v in self.layers.items()})

    @property
    def extent(self) -> Rect:
        x0, y0 = self.frame.origin
        return Rect(x0, y0, x0 + self.frame.width, y0 + self.frame.height)


def probe_offsets(radius: float, subgrid: int = DEFAULT_SUBGRID) -> np.ndarray:
    """Offsets of a subgrid x subgrid probe lattice kept inside the disk."""
    u = (np.arange(subgrid) + 0.5) / subgrid * 2 * radius - radius
    ox, oy = np.meshgrid(u, u)
    off = np.column_stack([ox.ravel(), oy.ravel()])
    return off[np.hypot(off[:, 0], off[:, 1]) <= radius]


def _cell_indices(frame: GridFrame, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    x0, y0 = frame.origin
    col = np.clip(((xs - x0) // frame.cell_side).astype(int), 0, frame.n_cols - 1)
    row = np.clip(((ys - y0) // frame.cell_side).astype(int), 0, frame.n_rows - 1)
    return row * frame.n_cols + col


def plot_covariate_means(raster: CovariateRaster, centers: np.ndarray,
                         radius: float, subgrid: int = DEFAULT_SUBGRID,
                         mode: str = "probe") -> dict:
    """Per-plot covariate values for many centers.

    ``probe`` mode averages each layer over a probe lattice inside the
    disk; ``center`` mode reads the single cell containing the plot center.
    """
    centers = np.asarray(centers, dtype=float)
    if mode == "center":
        ci = _cell_indices(raster.frame, centers[:, 0], centers[:, 1])
        return {name: values[ci] for name, values in raster.layers.items()}
    if mode != "probe":
        raise ConfigError(f"covariate mode must be 'probe' or 'center', got {mode!r}")
    off = probe_offsets(radius, subgrid)
    pos = centers[:, None, :] + off[None, :, :]
    ci = _cell_indices(raster.frame, pos[..., 0], pos[..., 1])
    return {name: values[ci].mean(axis=1) for name, values in raster.layers.items()}


def plot_covariates(raster: CovariateRaster, plot: CircularPlot,
                    subgrid: int = DEFAULT_SUBGRID, mode: str = "probe") -> dict:
    """Covariate values for one plot (see plot_covariate_means)."""
    if not plot.inside(raster.extent):
        raise GeometryError(
            f"plot at {plot.center} with radius {plot.radius:g} extends outside "
            f"the raster extent")
    values = plot_covariate_means(raster, np.array([plot.center]), plot.radius,
                                  subgrid=subgrid, mode=mode)
    return {name: float(v[0]) for name, v in values.items()}


# ---------------------------------------------------------------------------
# file formats


def write_stemmap(stemmap: StemMap, path, delimiter: str = ",") -> None:
    """CSV of (x, y, agb) plus a JSON sidecar with region and units."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["x", "y", "agb"])
        for (x, y), m in zip(stemmap.points, stemmap.agb_kg):
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(m))])
    meta = {
        "region": [stemmap.region.xmin, stemmap.region.ymin,
                   stemmap.region.xmax, stemmap.region.ymax],
        "units": {"x": "m", "y": "m", "agb": "kg"},
        "delimiter": delimiter,
    }
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def _read_sidecar(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise IngestionError(
            f"missing metadata sidecar {path} (region bounds and units)") from None
    except json.JSONDecodeError as err:
        raise IngestionError(f"unreadable metadata sidecar {path}: {err}") from None


def load_stemmap(path) -> StemMap:
    """Load a stem-map CSV validated against its JSON sidecar.

    Problems are reported with data row numbers (first data row = 1).
    """
    path = str(path)
    meta = _read_sidecar(path + ".meta.json")
    try:
        region = Rect(*[float(v) for v in meta["region"]])
        delimiter = meta.get("delimiter", ",")
    except (KeyError, TypeError, ValueError) as err:
        raise IngestionError(f"bad sidecar for {path}: {err}") from None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        try:
            cols = {name: header.index(name) for name in ("x", "y", "agb")}
        except ValueError:
            raise IngestionError(
                f"{path} must have columns x, y, agb; found {header}") from None
        xs, ys, ms = [], [], []
        problems = []
        for rownum, rowvals in enumerate(reader, start=1):
            try:
                x = float(rowvals[cols["x"]])
                y = float(rowvals[cols["y"]])
                m = float(rowvals[cols["agb"]])
            except (ValueError, IndexError):
                problems.append(f"row {rownum}: non-numeric or short row {rowvals!r}")
                continue
            if not region.contains_point(x, y):
                problems.append(f"row {rownum}: tree at ({x:g}, {y:g}) outside region")
            elif m < 0 or not math.isfinite(m):
                problems.append(f"row {rownum}: bad mass {m!r}")
            else:
                xs.append(x)
                ys.append(y)
                ms.append(m)
        if problems:
            shown = "; ".join(problems[:20])
            more = f" (+{len(problems) - 20} more)" if len(problems) > 20 else ""
            raise IngestionError(f"{path}: {shown}{more}")
    return StemMap(points=np.column_stack([xs, ys]), agb_kg=np.array(ms),
                   region=region)


def write_covariate_raster(raster: CovariateRaster, path) -> None:
    """CSV of (col, row, layer...) in cell order plus a geometry sidecar."""
    path = str(path)
    names = list(raster.layers)
    frame = raster.frame
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["col", "row"] + names)
        for i in range(frame.n_cells):
            row, col = divmod(i, frame.n_cols)
            writer.writerow([col, row] + [repr(float(raster.layers[n][i]))
                                          for n in names])
    meta = {"n_cols": frame.n_cols, "n_rows": frame.n_rows,
            "cell_side": frame.cell_side, "origin": list(frame.origin)}
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def load_covariate_raster(path) -> CovariateRaster:
    """Load raster layers written by write_covariate_raster."""
    path = str(path)
    meta = _read_sidecar(path + ".meta.json")
    try:
        frame = GridFrame(int(meta["n_cols"]), int(meta["n_rows"]),
                          float(meta["cell_side"]),
                          tuple(meta.get("origin", (0.0, 0.0))))
    except (KeyError, TypeError, ValueError) as err:
        raise IngestionError(f"bad sidecar for {path}: {err}") from None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["col", "row"]:
            raise IngestionError(f"{path} must start with columns col, row")
        names = header[2:]
        if not names:
            raise IngestionError(f"{path} has no layer columns")
        layers = {name: np.full(frame.n_cells, np.nan) for name in names}
        seen = np.zeros(frame.n_cells, dtype=bool)
        problems = []
        for rownum, rowvals in enumerate(reader, start=1):
            try:
                col, row = int(rowvals[0]), int(rowvals[1])
                values = [float(v) for v in rowvals[2:2 + len(names)]]
                if len(values) != len(names):
                    raise ValueError("short row")
            except (ValueError, IndexError):
                problems.append(f"row {rownum}: malformed {rowvals!r}")
                continue
            if not (0 <= col < frame.n_cols and 0 <= row < frame.n_rows):
                problems.append(f"row {rownum}: cell ({col}, {row}) out of range")
                continue
            i = row * frame.n_cols + col
            if seen[i]:
                problems.append(f"row {rownum}: duplicate cell ({col}, {row})")
                continue
            seen[i] = True
            for name, v in zip(names, values):
                layers[name][i] = v
        if not seen.all():
            problems.append(f"{int((~seen).sum())} cells missing")
        if problems:
            shown = "; ".join(problems[:20])
            more = f" (+{len(problems) - 20} more)" if len(problems) > 20 else ""
            raise IngestionError(f"{path}: {shown}{more}")
    return CovariateRaster(frame=frame, layers=layers)


# ---------------------------------------------------------------------------
# synthetic census generator


@dataclass(frozen=True)
class StemMapSynthesisSpec:
    """Knobs of the synthetic stem-map generator.

    A smooth site index s = clamp(base + a*gA + b*gB, floor) built from two
    latent Gaussian fields (ranges in meters) drives tree intensity
    (proportional to s^2, thinning acceptance) and nothing else; tree
    masses are mean-calibrated lognormal marks independent of location.
    Raster layers blend a latent field with white per-cell noise:

        layer = offset + scale * (w * g + sqrt(1 - w^2) * noise),
        w = correlation * loading

    so ``correlation`` = 0 makes the layers pure noise (no usable signal)
    while values near 1 make them clean transforms of the latents that
    drive biomass.
    """

    cell_side: float = 10.0
    n_trees: int = 83_801
    range_a_m: float = 150.0
    range_b_m: float = 250.0
    site_base: float = 10.0
    site_a: float = 1.5
    site_b: float = 0.75
    site_floor: float = 0.5
    mark_mean_kg: float = 100.0
    mark_sigma: float = 0.35
    correlation: float = 0.95
    loadings: tuple = (0.9, 0.85, 0.8)
    ndvi_mix: float = 0.5
    layer_specs: tuple = (("P90", "a", 18.0, 6.0),
                          ("P10", "b", 4.0, 1.5),
                          ("NDVI", "mix", 0.8, 0.06))

    def __post_init__(self):
        problems = []
        if not 0 <= self.correlation <= 1:
            problems.append(f"correlation must be in [0, 1], got {self.correlation}")
        if len(self.loadings) != len(self.layer_specs):
            problems.append(
                f"{len(self.loadings)} loadings for {len(self.layer_specs)} layers")
        if not all(0 <= l <= 1 for l in self.loadings):
            problems.append(f"loadings must be in [0, 1], got {self.loadings}")
        if not 0 <= self.ndvi_mix <= 1:
            problems.append(f"ndvi_mix must be in [0, 1], got {self.ndvi_mix}")
        if self.n_trees < 1:
            problems.append(f"n_trees must be positive, got {self.n_trees}")
        if problems:
            raise ConfigError("; ".join(problems))


# stream components within the stem-map domain
_STREAM_FIELD_A = 0
_STREAM_FIELD_B = 1
_STREAM_LAYER_NOISE = 2   # one per layer: 2, 3, 4
_STREAM_POINTS = 5
_STREAM_MARKS = 6


def _latent_factor(xy: np.ndarray, esr_m: float) -> np.ndarray:
    """Cholesky factor of the unit-sill exponential correlation + tiny ridge."""
    from scipy.spatial.distance import cdist

    corr = cdist(xy, xy)
    corr *= -LOG_RANGE_DECAY / esr_m
    np.exp(corr, out=corr)
    idx = np.arange(len(corr))
    corr[idx, idx] += 1e-10
    return _cholesky(corr, lower=True, overwrite_a=True, check_finite=False)


def synthesize_stemmap(region: Rect, spec: StemMapSynthesisSpec,
                       master_seed: int):
    """Generate a (StemMap, CovariateRaster) pair; deterministic by seed."""
    w_cells = region.width / spec.cell_side
    h_cells = region.height / spec.cell_side
    if abs(w_cells - round(w_cells)) > 1e-9 or abs(h_cells - round(h_cells)) > 1e-9:
        raise GeometryError(
            f"region {region.width:g} x {region.height:g} is not a whole number "
            f"of {spec.cell_side:g} m cells")
    nc, nr = round(w_cells), round(h_cells)
    frame = GridFrame(nc, nr, spec.cell_side, origin=(region.xmin, region.ymin))
    xy = cell_centers(frame)
    n_cells = frame.n_cells

    factor_a = _latent_factor(xy, spec.range_a_m)
    g_a = factor_a @ stream(master_seed, DOMAIN_STEMMAP,
                            _STREAM_FIELD_A).standard_normal(n_cells)
    del factor_a
    factor_b = _latent_factor(xy, spec.range_b_m)
    g_b = factor_b @ stream(master_seed, DOMAIN_STEMMAP,
                            _STREAM_FIELD_B).standard_normal(n_cells)
    del factor_b

    latents = {"a": g_a, "b": g_b,
               "mix": (math.sqrt(spec.ndvi_mix) * g_a
                       + math.sqrt(1.0 - spec.ndvi_mix) * g_b)}
    layers = {}
    for k, ((name, latent_key, offset, scale), loading) in enumerate(
            zip(spec.layer_specs, spec.loadings)):
        noise = stream(master_seed, DOMAIN_STEMMAP,
                       _STREAM_LAYER_NOISE + k).standard_normal(n_cells)
        w = spec.correlation * loading
        layers[name] = offset + scale * (w * latents[latent_key]
                                         + np.sqrt(1.0 - w ** 2) * noise)

    site = np.maximum(spec.site_base + spec.site_a * g_a + spec.site_b * g_b,
                      spec.site_floor)
    intensity = site ** 2
    peak = intensity.max()

    rng_points = stream(master_seed, DOMAIN_STEMMAP, _STREAM_POINTS)
    lo = np.array([region.xmin, region.ymin])
    hi = np.array([region.xmax, region.ymax])
    points = np.empty((0, 2))
    while len(points) < spec.n_trees:
        cand = rng_points.uniform(lo, hi, size=(4 * spec.n_trees, 2))
        ci = _cell_indices(frame, cand[:, 0], cand[:, 1])
        accept = rng_points.uniform(size=len(cand)) < intensity[ci] / peak
        points = np.vstack([points, cand[accept]])
    points = points[:spec.n_trees]

    z = stream(master_seed, DOMAIN_STEMMAP, _STREAM_MARKS).standard_normal(spec.n_trees)
    agb = spec.mark_mean_kg * np.exp(spec.mark_sigma * z - spec.mark_sigma ** 2 / 2)

    stemmap = StemMap(points=points, agb_kg=agb, region=region)
    raster = CovariateRaster(frame=frame, layers=layers)
    return stemmap, raster


# ---------------------------------------------------------------------------
# plot-based repeated-sampling study


@dataclass(frozen=True)
class PlotDesignSpec:
    """Plot-placement design for stem-map studies."""

    kind: str
    n: int = None
    k_cols: int = None
    k_rows: int = None
    radius: float = PLOT_RADIUS_M
    subgrid: int = DEFAULT_SUBGRID
    covariate_mode: str = "probe"

    def __post_init__(self):
        if self.kind not in (DESIGN_SRS, DESIGN_SYS):
            raise ConfigError(f"plot design kind must be SRS or SYS, got {self.kind!r}")
        if self.kind == DESIGN_SRS and self.n is None:
            raise ConfigError("SRS plot design needs a sample size n")
        if self.kind == DESIGN_SYS and (self.k_cols is None or self.k_rows is None):
            raise ConfigError("SYS plot design needs k_cols and k_rows")
        if self.covariate_mode not in ("probe", "center"):
            raise ConfigError(
                f"covariate_mode must be 'probe' or 'center', got {self.covariate_mode!r}")

    @property
    def sample_size(self) -> int:
        return self.n if self.kind == DESIGN_SRS else self.k_cols * self.k_rows


def run_hf_study(stemmap: StemMap, raster: CovariateRaster,
                 design: PlotDesignSpec, config: StudyConfig,
                 population_id: int = 0):
    """Repeated plot sampling with the HF estimator family.

    Returns ``(summaries, records)`` shaped like the finite-frame harness
    output: empirical variance of the mean estimates across replicates
    (denominator R - 1; plot offsets form a continuum, so there is no
    enumeration mode), mean of estimated variances, percent bias, and
    bootstrap CIs.  One sequential stream drives all replicate draws, so
    a study is reproducible as a unit.
    """
    estimators = config.estimators
    missing = sorted({name for tag in estimators
                      for name in ESTIMATOR_MODELS[tag].columns}
                     - set(raster.layers))
    if missing:
        raise ConfigError(f"raster lacks layers needed by estimators: {missing}")
    features = PopulationFeatures(raster.layers, raster.frame.n_cells,
                                  tags=estimators)
    index = BucketGrid(stemmap.points, design.radius, stemmap.region)
    rng = stream(config.master_seed, DOMAIN_PLOT_SAMPLING)
    reps = config.replications
    mus = {tag: np.empty(reps) for tag in estimators}
    var_hats = {tag: np.empty(reps) for tag in estimators}
    records = [] if config.keep_replicates else None
    for r in range(reps):
        if design.kind == DESIGN_SYS:
            draw = plot_systematic_draw(stemmap.region, design.radius,
                                        design.k_cols, design.k_rows, rng)
        else:
            draw = plot_srs_draw(stemmap.region, design.radius, design.n, rng)
        y_s = plot_agb_densities(stemmap, draw.centers, design.radius, index)
        sample_covs = plot_covariate_means(raster, draw.centers, design.radius,
                                           subgrid=design.subgrid,
                                           mode=design.covariate_mode)
        for tag in estimators:
            rec = fast_estimate(tag, features, y_s, sample_covs)
            mus[tag][r] = rec.mu_hat
            var_hats[tag][r] = rec.var_hat
            if records is not None:
                records.append(ReplicateRecord(
                    population_id=population_id, replicate_id=r,
                    design=design.kind, estimator=tag, mu_hat=rec.mu_hat,
                    var_hat=rec.var_hat, s2=rec.s2, p=rec.p, n=rec.n))
    summaries = []
    for est_index, tag in enumerate(estimators):
        emp = float(np.var(mus[tag], ddof=1))
        mean_est = float(np.mean(var_hats[tag]))
        pbias = (100.0 * (mean_est - emp) / emp) if emp > 0 else float("nan")
        ci_emp = _ci_or_nan(
            mus[tag],
            stream(config.master_seed, DOMAIN_BOOTSTRAP, population_id, 0,
                   est_index, 0),
            B=config.bootstrap_B, level=config.bootstrap_level,
            statistic=lambda a, axis: np.var(a, axis=axis, ddof=1))
        ci_mean = _ci_or_nan(
            var_hats[tag],
            stream(config.master_seed, DOMAIN_BOOTSTRAP, population_id, 0,
                   est_index, 1),
            B=config.bootstrap_B, level=config.bootstrap_level,
            statistic=np.mean)
        summaries.append(StudySummary(
            population_id=population_id, esr=float("nan"), design=design.kind,
            n=design.sample_size, mode="sampled", replicates=reps,
            estimator=tag, true_mu=float("nan"),
            mean_of_mu_hat=float(np.mean(mus[tag])),
            empirical_variance=emp, mean_estimated_variance=mean_est,
            percent_bias=pbias,
            ci_empirical_lo=ci_emp[0], ci_empirical_hi=ci_emp[1],
            ci_mean_estimated_lo=ci_mean[0], ci_mean_estimated_hi=ci_mean[1]))
    return summaries, records
