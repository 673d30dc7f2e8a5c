"""Partial dependence and explainability analysis for black-box regression models."""

__version__ = "0.1.0"

from .errors import (
    ArgError,
    DegenerateModelError,
    EmitError,
    EngineError,
    FitError,
    IngestError,
    PdexplainError,
    PersistError,
    PredictError,
    SchemaError,
)
from .explainability import (
    ExplainabilityReport,
    SelectionStep,
    SelectionTrace,
    ase,
    ase_null,
    forward_select,
    upsilon,
    upsilon_table,
)
from .forest import BaggedForest, RegressionTree, fit_forest
from .pdp import (
    BackgroundSet,
    PdResult,
    pd_at_observations,
    pd_at_points,
    pd_grid,
    pd_null,
)
from .predictors import (
    LinearModel,
    PipePredictor,
    Predictor,
    fit_linear,
    load_model,
    save_model,
)
from .tabular import ColumnSpec, DataTable, FeatureSubset, load_csv, quantile_grid

__all__ = [
    "ArgError",
    "BackgroundSet",
    "BaggedForest",
    "ColumnSpec",
    "DataTable",
    "DegenerateModelError",
    "EmitError",
    "EngineError",
    "ExplainabilityReport",
    "FeatureSubset",
    "FitError",
    "IngestError",
    "LinearModel",
    "PdexplainError",
    "PdResult",
    "PersistError",
    "PipePredictor",
    "PredictError",
    "Predictor",
    "RegressionTree",
    "SchemaError",
    "SelectionStep",
    "SelectionTrace",
    "ase",
    "ase_null",
    "fit_forest",
    "fit_linear",
    "forward_select",
    "load_csv",
    "load_model",
    "pd_at_observations",
    "pd_at_points",
    "pd_grid",
    "pd_null",
    "quantile_grid",
    "save_model",
    "upsilon",
    "upsilon_table",
]
