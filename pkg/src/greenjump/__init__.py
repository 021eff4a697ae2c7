"""Green product-space diversification analytics.

Build the product-space proximity network from export data, find each
country's new green products between two years, compare their relatedness
to a dart-board counterfactual, and regress diversification shares on
green-growth indicators.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericError
from .ingest import (
    ExportRecord,
    ExportTensor,
    GreenProductList,
    build_export_tensor,
    load_green_list,
    load_trade_csv,
)
from .matrices import (
    CompetitivenessMatrix,
    ProximityMatrix,
    RcaMatrix,
    binarize,
    compute_proximity,
    compute_rca,
)
from .diversify import (
    BaselineBasket,
    NewGreenProductSet,
    RelatednessSample,
    baseline_basket,
    candidate_pool,
    identify_new_green_products,
    max_relatedness,
)
from .kde import DensityEstimate, kde_evaluate, silverman_bandwidth
from .counterfactual import (
    ClassificationIntervals,
    CounterfactualResult,
    classify_regions,
    monte_carlo_counterfactual,
)
from .regress import (
    IndicatorTable,
    RegressionResult,
    build_dependent_variable,
    build_regression_table,
    ols_fit,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DataError",
    "NumericError",
    "ExportRecord",
    "ExportTensor",
    "GreenProductList",
    "build_export_tensor",
    "load_green_list",
    "load_trade_csv",
    "CompetitivenessMatrix",
    "ProximityMatrix",
    "RcaMatrix",
    "binarize",
    "compute_proximity",
    "compute_rca",
    "BaselineBasket",
    "NewGreenProductSet",
    "RelatednessSample",
    "baseline_basket",
    "candidate_pool",
    "identify_new_green_products",
    "max_relatedness",
    "DensityEstimate",
    "kde_evaluate",
    "silverman_bandwidth",
    "ClassificationIntervals",
    "CounterfactualResult",
    "classify_regions",
    "monte_carlo_counterfactual",
    "IndicatorTable",
    "RegressionResult",
    "build_dependent_variable",
    "build_regression_table",
    "ols_fit",
]
