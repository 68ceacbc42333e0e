"""Repeated-sampling harness over (population x design x estimator) grids.

For each design the harness either enumerates the complete sample space
(systematic starts, or all subsets for tiny SRS problems) or draws seeded
replicates.  Every replicate is evaluated by every requested estimator, so
estimators are always compared on identical draws.  Summaries report the
empirical variance of the mean estimates, the mean of the estimated
variances, and their percent difference:

    percent_bias = 100 * (mean estimated variance - empirical variance)
                       / empirical variance

Empirical-variance denominators: the replicate count K for full
enumeration (the exact design variance) and R - 1 for sampled replicates
(unbiased across replications).  Summaries record which mode applied.

Reproducibility: replicate draws use streams keyed by
(master_seed, sampling-domain, population_index, design_index, replicate),
and bootstrap confidence intervals use a separate keyed domain, so results
are independent of evaluation order and worker count.
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .designs import (DESIGN_SRS, DESIGN_SYS, SystematicLayout, srs_draw,
                      systematic_draw, systematic_layout)
from .errors import (CapacityError, ConfigError, InsufficientSampleError,
                     LayoutError, UndefinedBiasError)
from .estimators import ESTIMATOR_MODELS, PopulationFeatures, fast_estimate
from .gaussfield import Population, PopulationTask
from .streams import DOMAIN_BOOTSTRAP, DOMAIN_SAMPLING, stream

MODE_AUTO = "auto"
MODE_FULL = "full"
MODE_SAMPLED = "sampled"

DEFAULT_ENUMERATION_BUDGET = 10_000


@dataclass(frozen=True)
class DesignSpec:
    """One design cell of a study.

    SRS needs ``n``.  SYS takes explicit lattice dimensions (k_cols,
    k_rows) or, for square lattices, just a perfect-square ``n``.  ``mode``
    selects full enumeration, sampled replication, or auto (enumerate when
    the sample space is within the study's enumeration budget).
    """

    kind: str
    n: int = None
    k_cols: int = None
    k_rows: int = None
    mode: str = MODE_AUTO

    def __post_init__(self):
        if self.kind not in (DESIGN_SRS, DESIGN_SYS):
            raise ConfigError(f"design kind must be SRS or SYS, got {self.kind!r}")
        if self.mode not in (MODE_AUTO, MODE_FULL, MODE_SAMPLED):
            raise ConfigError(f"design mode must be auto/full/sampled, got {self.mode!r}")
        if self.kind == DESIGN_SRS:
            if self.n is None:
                raise ConfigError("SRS design needs a sample size n")
        else:
            if (self.k_cols is None) != (self.k_rows is None):
                raise ConfigError("SYS design needs both k_cols and k_rows (or neither)")
            if self.k_cols is None and self.n is None:
                raise ConfigError("SYS design needs k_cols/k_rows or a square n")

    def layout(self, frame) -> SystematicLayout:
        if self.kind != DESIGN_SYS:
            raise ConfigError("only SYS designs have a lattice layout")
        if self.k_cols is not None:
            return systematic_layout(frame, self.k_cols, self.k_rows)
        k = round(self.n ** 0.5)
        if k * k != self.n:
            raise LayoutError(
                f"SYS design with n={self.n} is not a perfect square; "
                f"give k_cols and k_rows explicitly")
        return systematic_layout(frame, k, k)

    def sample_size(self, frame) -> int:
        return self.layout(frame).n if self.kind == DESIGN_SYS else self.n


@dataclass(frozen=True)
class StudyConfig:
    """Replication, estimator, and summary settings for one study."""

    designs: tuple
    estimators: tuple
    master_seed: int = 0
    replications: int = 1000
    bootstrap_B: int = 1000
    bootstrap_level: float = 0.95
    moving_average_window: int = 51
    enumeration_budget: int = DEFAULT_ENUMERATION_BUDGET
    use_fpc: bool = False
    keep_replicates: bool = False

    def __post_init__(self):
        object.__setattr__(self, "designs", tuple(self.designs))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        problems = []
        if self.replications < 2:
            problems.append(f"replications must be >= 2, got {self.replications}")
        if self.bootstrap_B < 100:
            problems.append(f"bootstrap_B must be >= 100, got {self.bootstrap_B}")
        if not 0 < self.bootstrap_level < 1:
            problems.append(f"bootstrap_level must be in (0,1), got {self.bootstrap_level}")
        if self.moving_average_window < 1:
            problems.append(
                f"moving_average_window must be >= 1, got {self.moving_average_window}")
        unknown = [t for t in self.estimators if t not in ESTIMATOR_MODELS]
        if unknown:
            problems.append(
                f"unknown estimator tags {unknown}; valid: {', '.join(ESTIMATOR_MODELS)}")
        if not self.estimators:
            problems.append("at least one estimator tag is required")
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass(frozen=True)
class StudySummary:
    """Variance-estimator performance for one (population, design, estimator)."""

    population_id: int
    esr: float
    design: str
    n: int
    mode: str
    replicates: int
    estimator: str
    true_mu: float
    mean_of_mu_hat: float
    empirical_variance: float
    mean_estimated_variance: float
    percent_bias: float
    ci_empirical_lo: float
    ci_empirical_hi: float
    ci_mean_estimated_lo: float
    ci_mean_estimated_hi: float


@dataclass(frozen=True)
class ReplicateRecord:
    """Per-replicate estimator output kept when keep_replicates is on."""

    population_id: int
    replicate_id: int
    design: str
    estimator: str
    mu_hat: float
    var_hat: float
    s2: float
    p: int
    n: int


def percent_bias(mean_estimated: float, empirical: float) -> float:
    """Percent difference of the mean estimated variance from the empirical."""
    if not (empirical > 0):
        raise UndefinedBiasError(
            f"percent bias undefined for empirical variance {empirical!r}")
    return 100.0 * (mean_estimated - empirical) / empirical


def bootstrap_ci(values, rng: np.random.Generator, B: int = 1000,
                 level: float = 0.95, statistic=None) -> tuple:
    """Percentile bootstrap interval for a statistic of the replicate values.

    ``statistic(array_2d, axis=1)`` maps resampled rows to the statistic;
    the default is the mean.  Deterministic given the generator state.
    """
    values = np.asarray(values, dtype=float)
    R = len(values)
    if R < 10:
        raise InsufficientSampleError(f"bootstrap needs >= 10 values, got {R}")
    if statistic is None:
        statistic = np.mean
    idx = rng.integers(0, R, size=(B, R))
    stats = statistic(values[idx], axis=1)
    alpha = 1.0 - level
    lo, hi = np.quantile(stats, [alpha / 2, 1.0 - alpha / 2])
    return float(lo), float(hi)


def _ci_or_nan(values, rng, B, level, statistic):
    """bootstrap_ci, or (nan, nan) when there are too few replicates.

    Exhaustive enumerations can legitimately have fewer than 10 draws
    (e.g. a 2 x 2 lattice has 4 starts); their summaries simply carry no
    interval.
    """
    if len(values) < 10:
        return float("nan"), float("nan")
    return bootstrap_ci(values, rng, B=B, level=level, statistic=statistic)


def moving_average(values, window: int) -> np.ndarray:
    """Centered moving average, truncated (not padded) at the edges."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    values = np.asarray(values, dtype=float)
    half = window // 2
    R = len(values)
    return np.array([values[max(0, i - half):min(R, i + half + 1)].mean()
                     for i in range(R)])


def resolve_design(frame, spec: DesignSpec, config: StudyConfig):
    """Mode and replicate count a design will actually run on a frame.

    Returns ``(mode, count)`` with mode 'full' (count = size of the sample
    space) or 'sampled' (count = configured replications).  Auto mode
    enumerates whenever the sample space fits the enumeration budget.
    """
    if spec.kind == DESIGN_SYS:
        K = spec.layout(frame).num_starts
        if spec.mode == MODE_FULL or (
                spec.mode == MODE_AUTO and K <= config.enumeration_budget):
            return MODE_FULL, K
        return MODE_SAMPLED, config.replications
    n_subsets = math.comb(frame.n_cells, spec.n)
    if spec.mode == MODE_FULL or (
            spec.mode == MODE_AUTO and n_subsets <= config.enumeration_budget):
        return MODE_FULL, n_subsets
    return MODE_SAMPLED, config.replications


def _iter_draws(population: Population, spec: DesignSpec, design_index: int,
                config: StudyConfig):
    """Yield sample index arrays; return value says whether enumeration ran."""
    frame = population.frame
    mode, n_reps = resolve_design(frame, spec, config)
    if spec.kind == DESIGN_SYS:
        layout = spec.layout(frame)
        if mode == MODE_FULL:
            return ((systematic_draw(layout, s).indices for s in range(n_reps)),
                    True, n_reps)
        K = layout.num_starts

        def sampled_sys():
            for r in range(n_reps):
                rng = stream(config.master_seed, DOMAIN_SAMPLING,
                             population.population_index, design_index, r)
                yield systematic_draw(layout, int(rng.integers(K))).indices
        return (sampled_sys(), False, n_reps)
    # SRS
    n = spec.n
    if mode == MODE_FULL:
        if n_reps > config.enumeration_budget:
            raise CapacityError(
                f"exhaustive SRS needs C({frame.n_cells},{n}) = {n_reps} draws, "
                f"above the enumeration budget {config.enumeration_budget}")
        return ((np.array(c) for c in combinations(range(frame.n_cells), n)),
                True, n_reps)

    def sampled_srs():
        for r in range(n_reps):
            rng = stream(config.master_seed, DOMAIN_SAMPLING,
                         population.population_index, design_index, r)
            yield srs_draw(population.frame, n, rng).indices
    return (sampled_srs(), False, n_reps)


def run_design(population: Population, spec: DesignSpec, config: StudyConfig,
               design_index: int = 0):
    """All estimators on all replicates of one design.

    Returns ``(summaries, records)``: one StudySummary per estimator and,
    when ``config.keep_replicates`` is set, the per-replicate records.
    """
    covariates = population.covariate_columns()
    features = PopulationFeatures(covariates, population.frame.n_cells,
                                  tags=config.estimators)
    needed = sorted({name for tag in config.estimators
                     for name in ESTIMATOR_MODELS[tag].columns})
    draws, enumerated, n_reps = _iter_draws(population, spec, design_index, config)
    fpc = population.frame.n_cells if config.use_fpc else None
    y = population.y
    mus = {tag: np.empty(n_reps) for tag in config.estimators}
    var_hats = {tag: np.empty(n_reps) for tag in config.estimators}
    records = [] if config.keep_replicates else None
    sample_n = None
    for r, idx in enumerate(draws):
        y_s = y[idx]
        sample_covs = {name: covariates[name][idx] for name in needed}
        sample_n = len(idx)
        for tag in config.estimators:
            rec = fast_estimate(tag, features, y_s, sample_covs,
                                fpc_population_size=fpc)
            mus[tag][r] = rec.mu_hat
            var_hats[tag][r] = rec.var_hat
            if records is not None:
                records.append(ReplicateRecord(
                    population_id=population.population_index, replicate_id=r,
                    design=spec.kind, estimator=tag, mu_hat=rec.mu_hat,
                    var_hat=rec.var_hat, s2=rec.s2, p=rec.p, n=rec.n))
    ddof = 0 if enumerated else 1
    mode = MODE_FULL if enumerated else MODE_SAMPLED
    true_mu = population.true_mean
    summaries = []
    for est_index, tag in enumerate(config.estimators):
        emp = float(np.var(mus[tag], ddof=ddof))
        mean_est = float(np.mean(var_hats[tag]))
        pbias = (100.0 * (mean_est - emp) / emp) if emp > 0 else float("nan")
        ci_emp = _ci_or_nan(
            mus[tag],
            stream(config.master_seed, DOMAIN_BOOTSTRAP,
                   population.population_index, design_index, est_index, 0),
            B=config.bootstrap_B, level=config.bootstrap_level,
            statistic=lambda a, axis: np.var(a, axis=axis, ddof=ddof))
        ci_mean = _ci_or_nan(
            var_hats[tag],
            stream(config.master_seed, DOMAIN_BOOTSTRAP,
                   population.population_index, design_index, est_index, 1),
            B=config.bootstrap_B, level=config.bootstrap_level,
            statistic=np.mean)
        summaries.append(StudySummary(
            population_id=population.population_index, esr=population.esr,
            design=spec.kind, n=sample_n, mode=mode, replicates=n_reps,
            estimator=tag, true_mu=true_mu,
            mean_of_mu_hat=float(np.mean(mus[tag])),
            empirical_variance=emp, mean_estimated_variance=mean_est,
            percent_bias=pbias,
            ci_empirical_lo=ci_emp[0], ci_empirical_hi=ci_emp[1],
            ci_mean_estimated_lo=ci_mean[0], ci_mean_estimated_hi=ci_mean[1]))
    return summaries, records


def run_cell(population: Population, spec: DesignSpec, estimator_tag: str,
             config: StudyConfig, design_index: int = 0):
    """One (population, design, estimator) cell.

    Draws are keyed independently of the estimator, so the replicates here
    are the exact draws run_design evaluates for every estimator.
    """
    single = replace(config, estimators=(estimator_tag,), keep_replicates=True)
    summaries, records = run_design(population, spec, single, design_index)
    return records, summaries[0]


@dataclass(frozen=True)
class SmoothedRow:
    """Raw and moving-average series entry for one population and estimator."""

    population_id: int
    esr: float
    design: str
    n: int
    estimator: str
    percent_bias: float
    percent_bias_smooth: float
    empirical_variance_smooth: float
    mean_estimated_variance_smooth: float


@dataclass(frozen=True)
class StudyResult:
    summaries: list
    smoothed: list
    records: list


def _study_one(item, config: StudyConfig):
    population = item.build() if isinstance(item, PopulationTask) else item
    summaries = []
    records = [] if config.keep_replicates else None
    for design_index, spec in enumerate(config.designs):
        s, r = run_design(population, spec, config, design_index)
        summaries.extend(s)
        if records is not None:
            records.extend(r)
    return summaries, records


def _study_star(args):
    return _study_one(*args)


def smooth_summaries(summaries, window: int):
    """Moving-average series per (design, n, estimator), in population order."""
    groups = {}
    for s in summaries:
        groups.setdefault((s.design, s.n, s.estimator), []).append(s)
    rows = []
    for (design, n, estimator), items in groups.items():
        items.sort(key=lambda s: s.population_id)
        pb = moving_average([s.percent_bias for s in items], window)
        emp = moving_average([s.empirical_variance for s in items], window)
        mev = moving_average([s.mean_estimated_variance for s in items], window)
        for i, s in enumerate(items):
            rows.append(SmoothedRow(
                population_id=s.population_id, esr=s.esr, design=design, n=n,
                estimator=estimator, percent_bias=s.percent_bias,
                percent_bias_smooth=float(pb[i]),
                empirical_variance_smooth=float(emp[i]),
                mean_estimated_variance_smooth=float(mev[i])))
    rows.sort(key=lambda r: (r.design, r.n, r.estimator, r.population_id))
    return rows


def ladder_study(items, config: StudyConfig, n_workers: int = 1) -> StudyResult:
    """Run the full study over an esr-ordered sequence of populations.

    ``items`` may hold realized Population objects or PopulationTask
    recipes; tasks are cheaper to ship to worker processes.  Results are
    identical for any worker count: populations and replicate draws are
    keyed by index, and aggregation preserves input order.
    """
    items = list(items)
    summaries = []
    records = [] if config.keep_replicates else None
    if n_workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_study_star,
                                    [(item, config) for item in items],
                                    chunksize=1))
    else:
        results = [_study_one(item, config) for item in items]
    for s, r in results:
        summaries.extend(s)
        if records is not None and r is not None:
            records.extend(r)
    smoothed = smooth_summaries(summaries, config.moving_average_window)
    return StudyResult(summaries=summaries, smoothed=smoothed, records=records)


SUMMARY_COLUMNS = [
    "population_id", "esr", "design", "n", "mode", "replicates", "estimator",
    "true_mu", "mean_of_mu_hat", "empirical_variance",
    "mean_estimated_variance", "percent_bias", "ci_empirical_lo",
    "ci_empirical_hi", "ci_mean_estimated_lo", "ci_mean_estimated_hi",
]

SMOOTHED_COLUMNS = [
    "population_id", "esr", "design", "n", "estimator", "percent_bias",
    "percent_bias_smooth", "empirical_variance_smooth",
    "mean_estimated_variance_smooth",
]


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return value


def summaries_to_csv(summaries, path=None) -> str:
    """Write summaries.csv; returns the exact text written.

    Floats are serialized with repr (shortest round-trip form), so output
    is byte-stable across runs and worker counts.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for s in summaries:
        writer.writerow([_format(getattr(s, c)) for c in SUMMARY_COLUMNS])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def smoothed_to_csv(rows, path=None) -> str:
    """Write smoothed.csv; returns the exact text written."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SMOOTHED_COLUMNS)
    for r in rows:
        writer.writerow([_format(getattr(r, c)) for c in SMOOTHED_COLUMNS])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def replicates_to_csv(records, path=None) -> str:
    """Write replicates.csv (per-replicate estimator outputs)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["population_id", "replicate_id", "design", "estimator",
                     "mu_hat", "var_hat", "s2", "p", "n"])
    for r in records:
        writer.writerow([r.population_id, r.replicate_id, r.design, r.estimator,
                         repr(r.mu_hat), repr(r.var_hat), repr(r.s2), r.p, r.n])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
