"""
Hierarchical trace-learning network for invariant object and symmetry recognition.

Typical use::

    from visnet import RunConfig, load_dataset, run_experiment

    cfg = RunConfig({"dataset": "TWOCLASSES-SQUARE", "grid": 40, "epochs": 3})
    result = run_experiment(cfg)
    print(result.mean, result.sd)
"""

from .config import RunConfig
from .datasets import load_dataset
from .errors import (
    DegenerateWeightError,
    FormatError,
    GenerationError,
    ParameterError,
    StructuralError,
    UndefinedScoreError,
    VisNetError,
)
from .frontend import DogParams, FeatureStack, FrontendConfig, GaborParams
from .ingest import LabeledDataset, load_cifar10, load_mnist
from .learning import LearningParams, MahalanobisStats, train_network
from .modelfile import load_model, save_model
from .network import InhibitionParams, NetworkState, forward_network, init_network
from .readout import (
    ExperimentResult,
    LinearModel,
    evaluate,
    extract_features,
    readout_accuracy,
    run_experiment,
    train_linear,
)
from .symmetry_data import SymmetrySpec, build_dataset, dataset_spec, symmetry_score

__version__ = "0.1.0"
