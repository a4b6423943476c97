"""rfsei: specific emitter identification from raw IQ.

Simulates QAM/PSK captures with transmitter IQ imbalance, trains small
convolutional regressors to estimate the gain and phase imbalance from raw
IQ samples, and identifies emitters by comparing point estimates against
Bayes-optimal boundaries between Gaussian-fitted estimator distributions.
"""

__version__ = "0.1.0"

from .signal_model import (ImpairmentParams, IqFrame, ModulationScheme,
                           add_awgn, apply_freq_offset, apply_iq_imbalance,
                           build_constellation, matched_filter_demod,
                           modulate, synthesize_frame)
from .dataset import (Dataset, DatasetSpec, EvalGrid, build_dataset,
                      build_eval_grid, load_dataset, save_dataset)
from .evaluation import (EvalReport, bias_curve,
                         bias_curve_from_estimates, evaluate_on_grid,
                         input_size_study, nmse, pearson_r, snr_sweep)
from .decision import (DecisionModel, GaussianFit, bayes_boundary,
                       build_decision_model, chi2_gof, classify, fit_gaussian,
                       min_separation, misid_probability, pairwise_misid)
from .pipeline import (EmitterProfile, SeiConfig, TABLE2_EMITTERS,
                       fit_emitter_pdfs, identify, run_scenario,
                       run_table2_scenario, wide_vs_narrow_study)
from . import network

__all__ = [
    "__version__",
    "ImpairmentParams", "IqFrame", "ModulationScheme", "add_awgn",
    "apply_freq_offset", "apply_iq_imbalance", "build_constellation",
    "matched_filter_demod", "modulate", "synthesize_frame",
    "Dataset", "DatasetSpec", "EvalGrid", "build_dataset", "build_eval_grid",
    "load_dataset", "save_dataset",
    "EvalReport", "bias_curve", "bias_curve_from_estimates",
    "evaluate_on_grid", "input_size_study",
    "nmse", "pearson_r", "snr_sweep",
    "DecisionModel", "GaussianFit", "bayes_boundary", "build_decision_model",
    "chi2_gof", "classify", "fit_gaussian", "min_separation",
    "misid_probability", "pairwise_misid",
    "EmitterProfile", "SeiConfig", "TABLE2_EMITTERS", "fit_emitter_pdfs",
    "identify", "run_scenario", "run_table2_scenario", "wide_vs_narrow_study",
    "network",
]
