"""Sequence-agnostic sign language classification over hand-feature tracks."""
from .classifier import (ALL, TABLE_MASKS, BagOfWordsSignClassifier, ClassScore, FeatureMask,
                         ModelConfig, SignModel, classify, predict, train)
from .dataset import (ClassAnnotation, Dataset, HandTrack, Manifest, SignSample, load_dataset,
                      save_dataset, split_by_subject, split_stratified)
from .evaluation import (EvalConfig, confusion_matrix, run_subject_dependent,
                         run_subject_independent, run_subset)
from .exceptions import (DataValidationError, ModelFormatError, NumericalError, ParseError,
                         SignDataError)
from .hmm import HMMConfig, HMMSignClassifier, classify_hmm, train_hmm_backend
from .model_io import load_model, save_model
from .synth import GeneratorConfig, generate_dataset, oracle_accuracy, sample_prototypes
from .transform import BagOfWordsFeatures

__version__ = "0.1.0"

__all__ = [
    "ALL", "TABLE_MASKS", "BagOfWordsFeatures", "BagOfWordsSignClassifier", "ClassAnnotation",
    "ClassScore", "DataValidationError", "Dataset", "EvalConfig", "FeatureMask",
    "GeneratorConfig", "HMMConfig", "HMMSignClassifier", "HandTrack", "Manifest",
    "ModelConfig", "ModelFormatError", "NumericalError", "ParseError", "SignDataError",
    "SignModel", "SignSample", "classify", "classify_hmm", "confusion_matrix",
    "generate_dataset", "load_dataset", "load_model", "oracle_accuracy", "predict",
    "run_subject_dependent", "run_subject_independent", "run_subset", "sample_prototypes",
    "save_dataset", "save_model", "split_by_subject", "split_stratified", "train",
    "train_hmm_backend",
]
