"""samplab: a simulation laboratory for design-based variance estimation.

Synthetic spatial populations on grid frames, equal-probability sampling
designs (simple random and systematic), model-assisted estimators of the
population mean with their variance estimators, a repeated-sampling
harness that measures variance-estimator percent bias, variogram
diagnostics, and a tree-census (stem map) pipeline with plot sampling.
"""

__version__ = "0.1.0"

from .errors import (CapacityError, CollinearityError, ConfigError,
                     FactorizationError, FitError, GeometryError,
                     IngestionError, InsufficientSampleError, LayoutError,
                     PackingError, SamplabError, TransformError,
                     UndefinedBiasError)
from .frame import CircularPlot, GridFrame, Rect, cell_center, cell_centers
from .streams import stream
from .gaussfield import (CovarianceSpec, Population, PopulationTask,
                         SuperPopulationSpec, build_covariance,
                         draw_gaussian_field, esr_to_phi, generate_population,
                         ladder_specs, ladder_tasks, phi_to_esr,
                         population_ladder, population_to_csv)
from .designs import (SampleDraw, SystematicLayout, enumerate_systematic,
                      plot_srs_draw, plot_systematic_draw, square_layout,
                      srs_draw, systematic_draw, systematic_layout,
                      systematic_random_draw)
from .estimators import (ESTIMATOR_TAGS, EstimateRecord, ObservedSample,
                         PopulationFeatures, estimate_mean, estimate_variance,
                         fast_estimate, named_estimator, ols_fit)
from .montecarlo import (DesignSpec, StudyConfig, StudyResult, StudySummary,
                         bootstrap_ci, ladder_study, moving_average,
                         percent_bias, run_cell, run_design, smooth_summaries,
                         summaries_to_csv)
from .variogram import (EmpiricalVariogram, ExponentialFit,
                        empirical_semivariogram, exponential_model,
                        fit_exponential)
from .stemmap import (BucketGrid, CovariateRaster, PlotDesignSpec, StemMap,
                      StemMapSynthesisSpec, load_covariate_raster,
                      load_stemmap, plot_agb_density, plot_covariates,
                      run_hf_study, synthesize_stemmap,
                      write_covariate_raster, write_stemmap)

__all__ = [name for name in dir() if not name.startswith("_")]
