"""gridcast: carbon-intensity forecasting, imputation, and serving."""

from .series import (
    CarbonSeries,
    MaskedSeries,
    Resolution,
    SourceMix,
    Window,
    align_to_day_boundary,
    apply_mask,
    compute_carbon_intensity,
    missing_mask,
    slice_series,
)
from .backends import (
    BackendDescriptor,
    BackendRegistry,
    EwmaBackend,
    ForecastRecord,
    ForecastRequest,
    RemoteBackend,
    SeasonalNaiveBackend,
    default_registry,
    forecast,
    impute,
)
from .conformal import (
    CoverageTarget,
    IntervalSet,
    ResidualLedger,
    available_residuals,
    calibrate,
    coverage_probe,
    record_outcome,
)
from .imputation import (
    MaskPlan,
    evaluate_imputation,
    generate_mask,
    impute_cubic_spline,
    impute_linear,
    impute_naive,
    impute_with,
    mask_for_evaluation,
    natural_cubic_spline,
)
from .metrics import EvalReport, coverage, mape, niw, normalized_rmse, window_mapes
from .datastore import FetchJobConfig, FileStore, GridCatalog, run_fetch_cycle
from .config import ApiConfig, load_config
from .harness import (
    ProtocolSpec,
    degradation_table,
    emit_report,
    run_forecast_protocol,
    run_imputation_protocol,
)

__version__ = "0.1.0"
