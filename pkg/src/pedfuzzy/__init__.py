"""Explainable pedestrian-crossing prediction with mined weighted fuzzy rules."""

__version__ = "0.1.0"

from .dataset import MetaDataset, SamplingConfig, load_meta_dataset, prepare, save_meta_dataset
from .evaluation import confusion, evaluate, f1_score, load_plan, run_experiment
from .explain import ActivationLedger, explain_prediction, ledger_for, render_rule, top_rules
from .features import FeatureSchema, PedestrianSample
from .fuzzy import CrossingLabel, FisModel, FuzzyRule, LinguisticVariable, infer, predict
from .mining import MiningConfig, train
from .modelfile import load_model, save_model
from .synthetic import PlantedSpec, default_planted_model, generate

__all__ = [
    "ActivationLedger", "CrossingLabel", "FeatureSchema", "FisModel", "FuzzyRule", "LinguisticVariable",
    "MetaDataset", "MiningConfig", "PedestrianSample", "PlantedSpec", "SamplingConfig",
    "confusion", "default_planted_model", "evaluate", "explain_prediction", "f1_score", "generate",
    "infer", "ledger_for", "load_meta_dataset", "load_model", "load_plan", "predict", "prepare",
    "render_rule", "run_experiment", "save_meta_dataset", "save_model", "top_rules", "train",
]
