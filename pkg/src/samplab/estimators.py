"""Mean and variance estimators assisted by working linear models.

All estimators share one skeleton: fit an ordinary-least-squares assisting
model on the sample, predict over the whole population, and combine

    mu_hat = mean(y_hat_U) + mean(y_s - y_hat_s)

so the residual mean corrects the prediction mean.  With an intercept and
the identity transform the correction vanishes (OLS residuals sum to zero)
and the intercept-only model collapses to the sample mean — the classical
equal-probability expansion estimator.  Square-root-transform variants fit
on sqrt(y) and square the linear predictor back, in which case the residual
correction is generally nonzero and essential.

The estimated variance is s2 / n with s2 = sum((y_hat_s - y_s)^2) / (n - p),
with no finite-population correction by default (a correction factor can be
switched on for sensitivity checks).

Named estimator tags
--------------------
==========  ==================  =========
tag         covariate columns   transform
==========  ==================  =========
HT          (none)              identity
GREG1       x1                  identity
GREG2       x1, x2              identity
HF-HT       (none)              identity
HF-GREG1    P90                 sqrt
HF-GREG2    P90, P10, NDVI      sqrt
==========  ==================  =========

The HF- prefix marks the plot-based variants used with raster covariates
and strictly nonnegative responses (biomass densities).
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import (CollinearityError, ConfigError, InsufficientSampleError,
                     TransformError)

TRANSFORM_IDENTITY = "identity"
TRANSFORM_SQRT = "sqrt"

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class AssistingModel:
    """Specification of one working model: covariate columns + transform."""

    columns: tuple
    transform: str = TRANSFORM_IDENTITY

    def __post_init__(self):
        if self.transform not in (TRANSFORM_IDENTITY, TRANSFORM_SQRT):
            raise ConfigError(f"unknown transform {self.transform!r}")
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def p(self) -> int:
        """Number of fitted coefficients (intercept included)."""
        return 1 + len(self.columns)

    def column_name(self, j: int) -> str:
        return "intercept" if j == 0 else str(self.columns[j - 1])


ESTIMATOR_MODELS = {
    "HT": AssistingModel((), TRANSFORM_IDENTITY),
    "GREG1": AssistingModel(("x1",), TRANSFORM_IDENTITY),
    "GREG2": AssistingModel(("x1", "x2"), TRANSFORM_IDENTITY),
    "HF-HT": AssistingModel((), TRANSFORM_IDENTITY),
    "HF-GREG1": AssistingModel(("P90",), TRANSFORM_SQRT),
    "HF-GREG2": AssistingModel(("P90", "P10", "NDVI"), TRANSFORM_SQRT),
}

ESTIMATOR_TAGS = tuple(ESTIMATOR_MODELS)


@dataclass(frozen=True)
class ObservedSample:
    """Responses and covariate columns observed on the sampled units."""

    y: np.ndarray
    covariates: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class EstimateRecord:
    """One estimator applied to one sample."""

    estimator_tag: str
    mu_hat: float
    var_hat: float
    s2: float
    coefficients: np.ndarray
    residuals: np.ndarray
    n: int
    p: int


def ols_fit(design_matrix: np.ndarray, response: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via column-pivoted QR.

    Raises
    ------
    InsufficientSampleError
        If there are not strictly more observations than coefficients.
    CollinearityError
        If some pivot of R falls below 1e-10 times its column norm,
        naming the offending (original) column index.
    """
    X = np.asarray(design_matrix, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValueError(f"design matrix {X.shape} does not match response ({len(y)},)")
    n, p = X.shape
    if n <= p:
        raise InsufficientSampleError(
            f"need more observations than coefficients: n={n}, p={p}")
    Q, R, piv = qr(X, mode="economic", pivoting=True)
    col_norms = np.sqrt(np.sum(X * X, axis=0))
    diag = np.abs(np.diag(R))
    for k in range(p):
        if diag[k] <= RANK_RTOL * max(col_norms[piv[k]], 1e-300):
            err = CollinearityError(
                f"design matrix is rank deficient at column {piv[k]} "
                f"(|R[{k},{k}]| = {diag[k]:.3e} vs column norm "
                f"{col_norms[piv[k]]:.3e})")
            err.column = int(piv[k])
            raise err
    beta_piv = solve_triangular(R, Q.T @ y, lower=False)
    beta = np.empty(p)
    beta[piv] = beta_piv
    return beta


def design_matrix(model: AssistingModel, covariates, n: int) -> np.ndarray:
    """Intercept column plus the model's covariate columns, in order."""
    cols = [np.ones(n)]
    for name in model.columns:
        if name not in covariates:
            raise ConfigError(
                f"model needs covariate {name!r}; available: {sorted(covariates)}")
        col = np.asarray(covariates[name], dtype=float)
        if len(col) != n:
            raise ValueError(f"covariate {name!r} has length {len(col)}, expected {n}")
        cols.append(col)
    return np.column_stack(cols)


def fit_and_predict(model: AssistingModel, sample: ObservedSample,
                    population_covariates) -> tuple:
    """Fit the assisting model on the sample; predict units and population.

    Returns ``(y_hat_s, y_hat_U, coefficients)``.  Under the sqrt
    transform the model is fit on sqrt(y) and predictions are the squared
    linear predictor, on both the sample and the population.
    """
    y_s = np.asarray(sample.y, dtype=float)
    n = len(y_s)
    X_s = design_matrix(model, sample.covariates, n)
    n_pop = _population_length(model, population_covariates)
    X_U = design_matrix(model, population_covariates, n_pop)
    if model.transform == TRANSFORM_SQRT:
        if np.any(y_s < 0):
            bad = int(np.argmax(y_s < 0))
            raise TransformError(
                f"sqrt transform needs nonnegative responses; y[{bad}] = {y_s[bad]}")
        target = np.sqrt(y_s)
    else:
        target = y_s
    try:
        beta = ols_fit(X_s, target)
    except CollinearityError as err:
        j = getattr(err, "column", None)
        hint = f" [column {j} is {model.column_name(j)}]" if j is not None else ""
        raise CollinearityError(f"{err}{hint}") from err
    y_hat_s = X_s @ beta
    y_hat_U = X_U @ beta
    if model.transform == TRANSFORM_SQRT:
        y_hat_s = y_hat_s ** 2
        y_hat_U = y_hat_U ** 2
    return y_hat_s, y_hat_U, beta


def _population_length(model: AssistingModel, population_covariates) -> int:
    if model.columns:
        return len(np.asarray(population_covariates[model.columns[0]]))
    for name, value in population_covariates.items():
        if name == "__n__":
            return int(value)
        if np.ndim(value) == 1:
            return len(value)
    raise ConfigError(
        "population size unknown: pass at least one population-length column "
        "or a '__n__' entry in population_covariates")


def estimate_mean(y_hat_U: np.ndarray, y_hat_s: np.ndarray,
                  y_s: np.ndarray) -> float:
    """mu_hat = mean of population predictions + mean of sample residuals."""
    if len(y_hat_s) != len(y_s):
        raise ValueError(
            f"sample predictions ({len(y_hat_s)}) and responses ({len(y_s)}) differ")
    return float(np.mean(y_hat_U) + np.mean(np.asarray(y_s) - np.asarray(y_hat_s)))


def estimate_variance(y_hat_s: np.ndarray, y_s: np.ndarray, p: int,
                      fpc_population_size: int = None) -> tuple:
    """Estimated variance of mu_hat and the residual variance s2.

    Returns ``(var_hat, s2)`` with s2 = RSS / (n - p) and var_hat = s2 / n.
    The finite-population correction (1 - n/N) is OFF unless a population
    size is passed.
    """
    y_hat_s = np.asarray(y_hat_s, dtype=float)
    y_s = np.asarray(y_s, dtype=float)
    if len(y_hat_s) != len(y_s):
        raise ValueError(
            f"sample predictions ({len(y_hat_s)}) and responses ({len(y_s)}) differ")
    n = len(y_s)
    if n <= p:
        raise InsufficientSampleError(
            f"variance needs n > p, got n={n}, p={p}")
    resid = y_hat_s - y_s
    s2 = float(np.sum(resid * resid)) / (n - p)
    var_hat = s2 / n
    if fpc_population_size is not None:
        var_hat *= 1.0 - n / fpc_population_size
    return var_hat, s2


def named_estimator(tag: str, sample: ObservedSample, population_covariates,
                    fpc_population_size: int = None) -> EstimateRecord:
    """Run one named estimator end to end on an observed sample.

    ``population_covariates`` maps column names to full-population vectors;
    models with no covariates (HT, HF-HT) only need a ``"__n__"`` entry
    giving the population size.
    """
    model = _model_for(tag)
    y_hat_s, y_hat_U, beta = fit_and_predict(model, sample, population_covariates)
    y_s = np.asarray(sample.y, dtype=float)
    mu_hat = estimate_mean(y_hat_U, y_hat_s, y_s)
    var_hat, s2 = estimate_variance(y_hat_s, y_s, model.p, fpc_population_size)
    return EstimateRecord(estimator_tag=tag, mu_hat=mu_hat, var_hat=var_hat,
                          s2=s2, coefficients=beta, residuals=y_s - y_hat_s,
                          n=len(y_s), p=model.p)


def _model_for(tag: str) -> AssistingModel:
    try:
        return ESTIMATOR_MODELS[tag]
    except KeyError:
        raise ConfigError(
            f"unknown estimator tag {tag!r}; valid tags: {', '.join(ESTIMATOR_TAGS)}"
        ) from None


class PopulationFeatures:
    """Per-population caches that make repeated estimation cheap.

    For identity-transform models, mean(y_hat_U) = colmeans @ beta, where
    colmeans is the population mean of the design columns.  For the sqrt
    transform, mean((X_U @ beta)^2) = beta' (X_U' X_U / N) beta, so the
    population Gram matrix is cached instead.  Both identities are exact,
    and a test pins them against the literal full-vector path.
    """

    def __init__(self, covariates, n: int, tags=ESTIMATOR_TAGS):
        self.n = int(n)
        self._colmeans = {}
        self._grams = {}
        for tag in tags:
            model = _model_for(tag)
            X_U = design_matrix(model, covariates, self.n)
            if model.transform == TRANSFORM_SQRT:
                self._grams[tag] = (X_U.T @ X_U) / self.n
            else:
                self._colmeans[tag] = X_U.mean(axis=0)

    def tags(self):
        return tuple(self._colmeans) + tuple(self._grams)

    def mean_prediction(self, tag: str, beta: np.ndarray) -> float:
        """Population mean of the model predictions for fitted beta."""
        if tag in self._colmeans:
            return float(self._colmeans[tag] @ beta)
        return float(beta @ self._grams[tag] @ beta)


def fast_estimate(tag: str, features: PopulationFeatures, y_s: np.ndarray,
                  sample_covariates, fpc_population_size: int = None) -> EstimateRecord:
    """named_estimator without materializing population-length predictions.

    Numerically identical to the literal path: the population mean of
    predictions comes from the cached column means (identity transform)
    or Gram matrix (sqrt transform).
    """
    model = _model_for(tag)
    y_s = np.asarray(y_s, dtype=float)
    n = len(y_s)
    X_s = design_matrix(model, sample_covariates, n)
    if model.transform == TRANSFORM_SQRT:
        if np.any(y_s < 0):
            bad = int(np.argmax(y_s < 0))
            raise TransformError(
                f"sqrt transform needs nonnegative responses; y[{bad}] = {y_s[bad]}")
        beta = ols_fit(X_s, np.sqrt(y_s))
        y_hat_s = (X_s @ beta) ** 2
    else:
        beta = ols_fit(X_s, y_s)
        y_hat_s = X_s @ beta
    residuals = y_s - y_hat_s
    mu_hat = features.mean_prediction(tag, beta) + float(np.mean(residuals))
    var_hat, s2 = estimate_variance(y_hat_s, y_s, model.p, fpc_population_size)
    return EstimateRecord(estimator_tag=tag, mu_hat=mu_hat, var_hat=var_hat,
                          s2=s2, coefficients=beta, residuals=residuals,
                          n=n, p=model.p)


def records_to_csv(rows, path) -> None:
    """Per-replicate audit export.

    ``rows`` yields (population_id, replicate_id, design, record) tuples.
    Columns: population_id, replicate_id, design, estimator, mu_hat,
    var_hat, s2, p, n.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["population_id", "replicate_id", "design", "estimator",
                         "mu_hat", "var_hat", "s2", "p", "n"])
        for population_id, replicate_id, design, rec in rows:
            writer.writerow([population_id, replicate_id, design,
                             rec.estimator_tag, repr(rec.mu_hat),
                             repr(rec.var_hat), repr(rec.s2), rec.p, rec.n])
