from .degrees import (
    DEFAULT_CONE_COUNTS,
    CcdfSeries,
    DegreeHistogram,
    InsufficientDataError,
    PowerLawFit,
    TailReport,
    ccdf,
    degree_histogram,
    fit_exponential_tail,
    fit_power_law,
    fit_tail,
    gamma_constant,
    harmonic,
    histogram_from_degrees,
    histogram_shape,
    pooled_counts,
    mean_ccdf,
)
from .experiments import (
    CostSeries,
    SelectionBiasReport,
    chi_square_uniform,
    cost_convergence_experiment,
    degree_snapshots,
    pearson,
    pooled_histogram,
    selection_bias_experiment,
    straight_line_optimum,
)
from .voronoi import (
    DecayTrace,
    VoronoiEstimate,
    clip_bisector,
    polygon_area,
    voronoi_areas_exact,
    voronoi_cell,
    voronoi_decay_experiment,
    voronoi_volumes_mc,
)
