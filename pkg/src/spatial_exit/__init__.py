"""Spatial lag probit models of firm exit with industry-blocked weights."""

__version__ = "0.1.0"

from .data import (BlockLevel, DesignMatrix, EnterpriseRecord, ExitTable,
                   IndustryCode, PanelDataset, build_design, exit_table,
                   load_panel, summarize)
from .gibbs import GibbsConfig, GibbsDraws, compare_estimators, gibbs_fit
from .model import (InstrumentMatrix, ReducedForm, SpatialFit,
                    build_instruments, generalized_residuals,
                    heteroskedastic_probabilities, linearized_gmm_fit,
                    moment_conditions, nl2sls_fit, probability_gradients,
                    reduced_form, simulate_latent)
from .probit import ProbitFit, probit_fit, probit_loglik
from .weights import SpatialWeights, build_weights, great_circle_km

__all__ = [
    "BlockLevel", "DesignMatrix", "EnterpriseRecord", "ExitTable",
    "IndustryCode", "PanelDataset", "build_design", "exit_table",
    "load_panel", "summarize", "GibbsConfig", "GibbsDraws",
    "compare_estimators", "gibbs_fit", "InstrumentMatrix", "ReducedForm",
    "SpatialFit", "build_instruments", "generalized_residuals",
    "heteroskedastic_probabilities", "linearized_gmm_fit",
    "moment_conditions", "nl2sls_fit", "probability_gradients",
    "reduced_form", "simulate_latent", "ProbitFit", "probit_fit",
    "probit_loglik", "SpatialWeights", "build_weights", "great_circle_km",
]
