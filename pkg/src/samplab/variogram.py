"""Empirical semivariograms and exponential-model fits.

The empirical estimator is the classical moment form

    gamma(bin) = sum over pairs in bin of (v_i - v_j)^2 / (2 * pairs)

on equal-width distance bins over (0, max_lag]; empty bins are omitted.
The fitted model is

    gamma(d) = nugget + partial_sill * (1 - exp(-phi * d))

with phi expressed through the effective spatial range, esr = -ln(0.05)/phi.
Fitting minimizes a weighted least-squares objective with Cressie-style
weights pairs/d^2, by a dense grid search followed by rounds of coordinate
line searches.  The search grids scale with max(gamma), which keeps the
fit scale-free: rescaling the values by c maps (nugget, partial_sill) to
c^2 times themselves and leaves esr unchanged.

When the best fit carries no spatial structure (partial sill at zero, or
the range pinned at the top of its search interval, where the decay rate
underflows the grid), the reported esr is the infinity sentinel and phi
is zero.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import FitError, InsufficientSampleError
from .gaussfield import LOG_RANGE_DECAY

DEFAULT_NUM_BINS = 15

GRID_POINTS = 40
REFINE_POINTS = 41
REFINE_ROUNDS = 3
REFINE_PASSES = 14
SENTINEL_RTOL = 1e-9


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned semivariance estimates.

    ``bin_centers`` holds the mean pair separation within each bin (not
    the geometric bin midpoint), matching common practice.
    """

    bin_centers: np.ndarray
    gamma: np.ndarray
    pair_counts: np.ndarray
    max_lag: float

    @property
    def n_bins(self) -> int:
        return len(self.bin_centers)


@dataclass(frozen=True)
class ExponentialFit:
    """Fitted exponential semivariogram parameters."""

    nugget: float
    partial_sill: float
    phi: float
    esr: float
    objective: float

    @property
    def sill(self) -> float:
        return self.nugget + self.partial_sill

    def predict(self, d) -> np.ndarray:
        return exponential_model(np.asarray(d, dtype=float), self.nugget,
                                 self.partial_sill, self.esr)


def exponential_model(d, nugget: float, partial_sill: float, esr: float):
    """Model semivariance at distance d for the given parameters."""
    if math.isinf(esr):
        return nugget + np.zeros_like(np.asarray(d, dtype=float))
    return nugget + partial_sill * (1.0 - np.exp(-LOG_RANGE_DECAY * np.asarray(d) / esr))


def empirical_semivariogram(locations, values, num_bins: int = DEFAULT_NUM_BINS,
                            max_lag: float = None) -> EmpiricalVariogram:
    """Matheron moment estimator on equal-width bins over (0, max_lag].

    ``max_lag`` defaults to half the shorter coordinate extent.  Bins with
    no pairs are omitted.
    """
    locations = np.asarray(locations, dtype=float)
    values = np.asarray(values, dtype=float)
    if locations.ndim != 2 or locations.shape[1] != 2:
        raise ValueError(f"locations must be (n, 2), got {locations.shape}")
    n = len(values)
    if len(locations) != n:
        raise ValueError(f"{len(locations)} locations for {n} values")
    if n < 10:
        raise InsufficientSampleError(f"semivariogram needs >= 10 points, got {n}")
    if max_lag is None:
        max_lag = 0.5 * min(np.ptp(locations[:, 0]), np.ptp(locations[:, 1]))
    if not max_lag > 0:
        raise ValueError(f"max_lag must be positive, got {max_lag}")
    d = pdist(locations)
    sq = pdist(values[:, None], metric="sqeuclidean")
    edges = np.linspace(0.0, max_lag, num_bins + 1)
    lags, gammas, counts = [], [], []
    for b in range(num_bins):
        mask = (d > edges[b]) & (d <= edges[b + 1])
        c = int(mask.sum())
        if c == 0:
            continue
        lags.append(float(d[mask].mean()))
        gammas.append(float(sq[mask].sum() / (2.0 * c)))
        counts.append(c)
    return EmpiricalVariogram(bin_centers=np.array(lags), gamma=np.array(gammas),
                              pair_counts=np.array(counts), max_lag=float(max_lag))


def _wls_objective(lags, gammas, weights, nugget, psill, esr):
    resid = gammas - (nugget + psill * (1.0 - np.exp(-LOG_RANGE_DECAY * lags / esr)))
    return float(np.sum(weights * resid * resid))


def fit_exponential(vario: EmpiricalVariogram) -> ExponentialFit:
    """Weighted least-squares exponential fit to an empirical variogram.

    Grid search over nugget and partial sill in [0, 2*max(gamma)] and esr
    in [min lag / 4, 4 * max_lag] (40 points per axis), then three rounds
    of per-coordinate line-search refinement with shrinking spans.
    """
    lags = np.asarray(vario.bin_centers, dtype=float)
    gammas = np.asarray(vario.gamma, dtype=float)
    counts = np.asarray(vario.pair_counts, dtype=float)
    if len(lags) < 4:
        raise FitError(f"exponential fit needs >= 4 bins, got {len(lags)}")
    weights = counts / (lags * lags)
    gmax = float(gammas.max())
    if gmax <= 0:
        # constant field: flat variogram at zero
        return ExponentialFit(nugget=0.0, partial_sill=0.0, phi=0.0,
                              esr=math.inf, objective=0.0)
    nug_grid = np.linspace(0.0, 2.0 * gmax, GRID_POINTS)
    ps_grid = np.linspace(0.0, 2.0 * gmax, GRID_POINTS)
    esr_lo = float(lags.min()) / 4.0
    esr_hi = 4.0 * float(vario.max_lag)
    esr_grid = np.linspace(esr_lo, esr_hi, GRID_POINTS)
    best = None
    for esr in esr_grid:
        shape = 1.0 - np.exp(-LOG_RANGE_DECAY * lags / esr)
        resid = (gammas[None, None, :]
                 - nug_grid[:, None, None]
                 - ps_grid[None, :, None] * shape[None, None, :])
        obj = np.sum(weights[None, None, :] * resid * resid, axis=2)
        i, j = np.unravel_index(np.argmin(obj), obj.shape)
        if best is None or obj[i, j] < best[0]:
            best = (float(obj[i, j]), float(nug_grid[i]), float(ps_grid[j]), float(esr))
    _, nugget, psill, esr = best
    x = [nugget, psill, esr]
    spans = [2.0 * gmax, 2.0 * gmax, esr_hi - esr_lo]
    bounds = [(0.0, 2.0 * gmax), (0.0, 2.0 * gmax), (esr_lo, esr_hi)]
    for rnd in range(REFINE_ROUNDS):
        for ci in range(3):
            span = spans[ci] / 2 ** (rnd + 1)
            for _ in range(REFINE_PASSES):
                lo = max(bounds[ci][0], x[ci] - span / 2)
                hi = min(bounds[ci][1], x[ci] + span / 2)
                grid = np.linspace(lo, hi, REFINE_POINTS)
                vals = [_wls_objective(lags, gammas, weights,
                                       *(x[:ci] + [g] + x[ci + 1:]))
                        for g in grid]
                x[ci] = float(grid[int(np.argmin(vals))])
                span /= 4
    nugget, psill, esr = x
    objective = _wls_objective(lags, gammas, weights, nugget, psill, esr)
    if psill <= SENTINEL_RTOL * gmax or esr >= esr_hi * (1.0 - SENTINEL_RTOL):
        return ExponentialFit(nugget=nugget, partial_sill=psill, phi=0.0,
                              esr=math.inf, objective=objective)
    return ExponentialFit(nugget=nugget, partial_sill=psill,
                          phi=LOG_RANGE_DECAY / esr, esr=esr,
                          objective=objective)


def variogram_to_csv(vario: EmpiricalVariogram, path, fit: ExponentialFit = None) -> None:
    """Export (lag, gamma, pairs) rows plus an optional fitted-parameter row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lag", "gamma", "pairs"])
        for lag, gamma, pairs in zip(vario.bin_centers, vario.gamma,
                                     vario.pair_counts):
            writer.writerow([repr(float(lag)), repr(float(gamma)), int(pairs)])
        if fit is not None:
            writer.writerow(["fit", "", ""])
            writer.writerow(["nugget", repr(fit.nugget), ""])
            writer.writerow(["partial_sill", repr(fit.partial_sill), ""])
            writer.writerow(["esr", repr(fit.esr), ""])
            writer.writerow(["phi", repr(fit.phi), ""])
