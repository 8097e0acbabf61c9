"""CCA-gated driver behavior modeling for multi-agent intersection data."""

from .cca import CcaResult, SelectionReport, canonical_value, cross_covariance, fit_cca, select_features
from .dataset import (
    Channel,
    DesignMatrices,
    FeatureFrame,
    Participant,
    SynthConfig,
    TargetSpec,
    Trial,
    build_design_matrices,
    build_pooled_design,
    load_trials,
    standardize,
    synthesize_scenario,
    synthesize_trials,
    write_trials,
)
from .gmm_gmr import EmTrace, GmmModel, fit_gmm, gmm_density, gmr_predict, responsibilities
from .gpr import GprModel, Hyperparams, fit_gpr, gpr_predict, gram, kernel, nlml, nlml_grad
from .pipeline import EvaluationReport, ExperimentConfig, correlation_report, emit_report, rmse, run_experiment

__version__ = "0.1.0"
