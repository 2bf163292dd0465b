"""Reinforced Poisson process toolkit for popularity dynamics.

Event-count modelling, maximum-likelihood and empirical-Bayes fitting,
closed-form forecasts, exact simulation, time-series baselines and a
forecasting benchmark harness.
"""
from ._backend import BACKEND
from .errors import (
    DegenerateExposureError,
    DegenerateFitError,
    DivergentForecastError,
    DomainError,
    HorizonError,
    IllPosedError,
    InvalidParameterError,
    InvalidSequenceError,
    RPPError,
)
from .model import EventSequence, ItemParams, ModelConfig, PriorParams
from .likelihood import (
    exposure,
    grad_mu_sigma,
    log_likelihood,
    marginal_log_likelihood,
    mle_fitness,
    prior_gradients,
)
from .estimation import FitReport, ItemFit, fit_corpus_mle, fit_corpus_with_prior, fit_item_mle
from .prediction import Forecast, predict_bayes, predict_mle, predict_variance
from .simulation import SimConfig, ThetaSpec, simulate, simulate_corpus, simulate_item
from .baselines import CountSeries, aggregate, fit_predict_ar, fit_predict_sh
from .evaluation import EvalReport, accuracy, distribution_compare, horizon_sweep, mape
from .experiment import run_benchmark

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
