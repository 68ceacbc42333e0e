"""Gaussian random fields with exponential covariance on grid frames.

Covariates are draws of a stationary field with covariance
``sigma2 * exp(-phi * d)`` between cells at distance ``d``.  The practical
range of the field is expressed as the effective spatial range (esr), the
distance at which correlation decays to 0.05, so ``phi = -ln(0.05) / esr``.
Responses follow a linear model in two independent field draws plus white
noise.
"""

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cholesky as _cholesky
from scipy.spatial.distance import cdist

from .errors import CapacityError, FactorizationError
from .frame import GridFrame, cell_centers
from .streams import (COMPONENT_NOISE, COMPONENT_X1, COMPONENT_X2,
                      DOMAIN_POPULATION, stream)

# correlation level defining the effective spatial range
RANGE_DECAY = 0.05
LOG_RANGE_DECAY = -math.log(RANGE_DECAY)  # -ln(0.05), about 2.9957

# dense-covariance ceiling; 10_000 cells must stay workable
DEFAULT_MAX_CELLS = 12_000

JITTER_BASE = 1e-10
JITTER_GROWTH = 10.0
JITTER_RETRIES = 3


def esr_to_phi(esr: float) -> float:
    """Decay rate for a given effective spatial range.

    The exact constant ``-ln(0.05)`` (about 2.996) is used; informal
    descriptions often round it to 3.
    """
    if not (isinstance(esr, (int, float)) and math.isfinite(esr) and esr > 0):
        raise ValueError(f"esr must be finite and positive, got {esr!r}")
    return LOG_RANGE_DECAY / esr


def phi_to_esr(phi: float) -> float:
    """Effective spatial range for a given decay rate."""
    if not (isinstance(phi, (int, float)) and math.isfinite(phi) and phi > 0):
        raise ValueError(f"phi must be finite and positive, got {phi!r}")
    return LOG_RANGE_DECAY / phi


@dataclass(frozen=True)
class CovarianceSpec:
    """Exponential covariance: sigma2 * exp(-phi * d)."""

    sigma2: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError(f"sigma2 must be finite and positive, got {self.sigma2!r}")
        if not (math.isfinite(self.phi) and self.phi > 0):
            raise ValueError(f"phi must be finite and positive, got {self.phi!r}")

    @property
    def esr(self) -> float:
        return phi_to_esr(self.phi)

    @classmethod
    def from_esr(cls, sigma2: float, esr: float) -> "CovarianceSpec":
        return cls(sigma2=sigma2, phi=esr_to_phi(esr))


def build_covariance(frame: GridFrame, cov: CovarianceSpec,
                     max_cells: int = DEFAULT_MAX_CELLS) -> np.ndarray:
    """Dense N x N covariance matrix over the frame's cell centers.

    Raises
    ------
    CapacityError
        If the frame exceeds ``max_cells`` cells; the dense matrix would
        need ``8 * N**2`` bytes.
    """
    n = frame.n_cells
    if n > max_cells:
        raise CapacityError(
            f"frame has {n} cells, above the dense-covariance ceiling of {max_cells}; "
            f"the matrix alone would need {8 * n * n / 1e9:.1f} GB")
    xy = cell_centers(frame)
    sigma = cdist(xy, xy)        # exactly symmetric: same subtraction both ways
    sigma *= -cov.phi
    np.exp(sigma, out=sigma)
    sigma *= cov.sigma2
    return sigma


def cholesky_with_jitter(sigma: np.ndarray, sigma2: float) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Attempts the plain factorization first, then adds jitter starting at
    ``1e-10 * sigma2`` and growing tenfold, at most three retries.
    """
    jitters = [0.0] + [JITTER_BASE * sigma2 * JITTER_GROWTH ** k
                       for k in range(JITTER_RETRIES)]
    work = np.empty_like(sigma)
    for jitter in jitters:
        np.copyto(work, sigma)
        if jitter > 0.0:
            idx = np.arange(sigma.shape[0])
            work[idx, idx] += jitter
        try:
            return _cholesky(work, lower=True, overwrite_a=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(
        f"covariance factorization failed; attempted jitters {jitters}")


def draw_gaussian_field(frame: GridFrame, cov: CovarianceSpec,
                        rng: np.random.Generator,
                        max_cells: int = DEFAULT_MAX_CELLS) -> np.ndarray:
    """One mean-zero field draw over the frame, as a length-N vector."""
    sigma = build_covariance(frame, cov, max_cells=max_cells)
    lower = cholesky_with_jitter(sigma, cov.sigma2)
    return lower @ rng.standard_normal(frame.n_cells)


@dataclass(frozen=True)
class SuperPopulationSpec:
    """Linear response model over two field covariates.

    y = beta0 + beta1 * x1 + beta2 * x2 + sqrt(tau2) * eps, with x1 and x2
    independent draws of the field and eps unit white noise.
    """

    cov: CovarianceSpec
    beta: tuple[float, float, float] = (0.0, 1.0, 1.0)
    tau2: float = 1.0

    def __post_init__(self):
        if len(self.beta) != 3 or not all(math.isfinite(b) for b in self.beta):
            raise ValueError(f"beta must be three finite coefficients, got {self.beta!r}")
        if not (math.isfinite(self.tau2) and self.tau2 >= 0):
            raise ValueError(f"tau2 must be finite and nonnegative, got {self.tau2!r}")

    @property
    def esr(self) -> float:
        return self.cov.esr


@dataclass(frozen=True)
class Population:
    """A realized finite population on a grid frame."""

    frame: GridFrame
    spec: SuperPopulationSpec
    master_seed: int
    population_index: int
    x1: np.ndarray = field(repr=False)
    x2: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.frame.n_cells

    @property
    def esr(self) -> float:
        return self.spec.esr

    @property
    def true_mean(self) -> float:
        return float(np.mean(self.y))

    def covariate_columns(self) -> dict[str, np.ndarray]:
        return {"x1": self.x1, "x2": self.x2}


def generate_population(frame: GridFrame, spec: SuperPopulationSpec,
                        master_seed: int, population_index: int,
                        max_cells: int = DEFAULT_MAX_CELLS) -> Population:
    """Realize one population; each random component has its own stream.

    The covariance factorization is shared between the two covariate draws,
    so regenerating any single population is deterministic and independent
    of generation order.
    """
    sigma = build_covariance(frame, spec.cov, max_cells=max_cells)
    lower = cholesky_with_jitter(sigma, spec.cov.sigma2)
    del sigma
    n = frame.n_cells
    draws = {}
    for component in (COMPONENT_X1, COMPONENT_X2, COMPONENT_NOISE):
        rng = stream(master_seed, DOMAIN_POPULATION, population_index, component)
        draws[component] = rng.standard_normal(n)
    x1 = lower @ draws[COMPONENT_X1]
    x2 = lower @ draws[COMPONENT_X2]
    b0, b1, b2 = spec.beta
    y = b0 + b1 * x1 + b2 * x2 + math.sqrt(spec.tau2) * draws[COMPONENT_NOISE]
    return Population(frame=frame, spec=spec, master_seed=master_seed,
                      population_index=population_index, x1=x1, x2=x2, y=y)


def ladder_specs(base_spec: SuperPopulationSpec, esr_start: float,
                 esr_end: float, count: int) -> list[SuperPopulationSpec]:
    """Equally spaced esr ladder of super-population specs.

    Each spec copies ``base_spec`` except for its correlation range: the
    k-th of ``count`` specs has esr ``esr_start + k * step`` with
    ``step = (esr_end - esr_start) / (count - 1)``.
    """
    if count < 2:
        raise ValueError(f"ladder needs at least 2 specs, got {count}")
    if not (0 < esr_start < esr_end):
        raise ValueError(f"need 0 < esr_start < esr_end, got {esr_start}, {esr_end}")
    esrs = np.linspace(esr_start, esr_end, count)
    return [replace(base_spec,
                    cov=CovarianceSpec.from_esr(base_spec.cov.sigma2, float(e)))
            for e in esrs]


@dataclass(frozen=True)
class PopulationTask:
    """Deferred population: picklable recipe for workers to realize."""

    frame: GridFrame
    spec: SuperPopulationSpec
    master_seed: int
    population_index: int
    max_cells: int = DEFAULT_MAX_CELLS

    def build(self) -> Population:
        return generate_population(self.frame, self.spec, self.master_seed,
                                   self.population_index, max_cells=self.max_cells)


def ladder_tasks(frame: GridFrame, base_spec: SuperPopulationSpec,
                 esr_start: float, esr_end: float, count: int,
                 master_seed: int,
                 max_cells: int = DEFAULT_MAX_CELLS) -> list[PopulationTask]:
    """Deferred esr ladder, one picklable task per rung."""
    specs = ladder_specs(base_spec, esr_start, esr_end, count)
    return [PopulationTask(frame, spec, master_seed, k, max_cells)
            for k, spec in enumerate(specs)]


def population_ladder(frame: GridFrame, base_spec: SuperPopulationSpec,
                      esr_start: float, esr_end: float, count: int,
                      master_seed: int, max_cells: int = DEFAULT_MAX_CELLS):
    """Lazily realized esr ladder; populations are generated one at a time."""
    for task in ladder_tasks(frame, base_spec, esr_start, esr_end, count,
                             master_seed, max_cells):
        yield task.build()


def population_to_csv(population: Population, path) -> None:
    """Export cells as rows (cell_index, row, col, x1, x2, y)."""
    frame = population.frame
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_index", "row", "col", "x1", "x2", "y"])
        for i in range(frame.n_cells):
            writer.writerow([i, i // frame.n_cols, i % frame.n_cols,
                             repr(float(population.x1[i])),
                             repr(float(population.x2[i])),
                             repr(float(population.y[i]))])
