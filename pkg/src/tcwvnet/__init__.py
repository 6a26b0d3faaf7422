"""Multilayer-perceptron regression of total column water vapour (TCWV)
from nine surface parameters, with the evaluation tools used to judge it."""

from .data import COLUMNS, FEATURES, TARGET, NormStats, SampleTable, SplitSpec, SynthConfig
from .errors import (ConfigError, DomainError, InsufficientDataError, NumericalError, SchemaError,
                     ShapeError, TcwvError)
from .evaluate import GridCube, Metrics, Transect, compute_metrics
from .nn import ForwardTrace, GradientSet, Layer, LayerSpec, MlpParams
from .optim import AdamConfig, AdamState
from .train import RunConfig, TrainingHistory, train

__version__ = "0.1.0"
