"""Run configuration and the minibatch training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nn
from .data import FEATURES, NormStats, SampleTable, SplitSpec, shuffle_split, standardize
from .errors import ConfigError, InsufficientDataError, NumericalError
from .nn import LayerSpec, MlpParams
from .optim import AdamConfig, AdamState, adam_step, sgd_step

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    architecture: list[LayerSpec] = field(default_factory=nn.default_architecture)
    epochs: int = 140
    batch_size: int = 64
    optimizer: str = "adam"
    adam: AdamConfig = field(default_factory=AdamConfig)
    sgd_learning_rate: float = 0.01
    split: SplitSpec = field(default_factory=SplitSpec)
    seed: int = 0
    output_relu: bool = False
    missing_policy: str = "drop"
    input_path: Optional[str] = None
    model_path: Optional[str] = None
    history_path: Optional[str] = None
    metrics_path: Optional[str] = None

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ConfigError(f"epochs: must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise ConfigError(f"batch_size: must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer: must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not self.sgd_learning_rate > 0:
            raise ConfigError("sgd_learning_rate: must be > 0")
        if self.missing_policy not in ("drop", "fill_mean"):
            raise ConfigError(f"missing_policy: unknown policy {self.missing_policy!r}")
        nn.check_chain(self.architecture)
        if self.architecture[-1].output_dim != 1:
            raise ConfigError("architecture: last layer must have output_dim 1")
        if self.output_relu and self.architecture[-1].activation != "relu":
            last = self.architecture[-1]
            self.architecture = [*self.architecture[:-1], LayerSpec(last.input_dim, 1, "relu")]

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        """Build from the JSON config layout; unknown keys are rejected."""
        known = {"architecture", "hidden", "epochs", "batch_size", "optimizer", "seed", "output_relu",
                 "split", "paths", "missing_policy"}
        for key in d:
            if key not in known:
                raise ConfigError(f"{key}: unknown config field")
        kw: dict = {}
        output_relu = _typed(d, "output_relu", bool, False)
        if "architecture" in d and "hidden" in d:
            raise ConfigError("architecture: give either 'architecture' or 'hidden', not both")
        if "architecture" in d:
            try:
                kw["architecture"] = [LayerSpec(int(l["in"]), int(l["out"]), l.get("activation", "relu"))
                                      for l in d["architecture"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"architecture: invalid layer list ({exc})") from None
        elif "hidden" in d:
            hidden = d["hidden"]
            if not isinstance(hidden, list) or not all(isinstance(h, int) and h >= 1 for h in hidden):
                raise ConfigError("hidden: must be a list of positive integers")
            kw["architecture"] = nn.default_architecture(len(FEATURES), hidden, output_relu)
        kw["epochs"] = _typed(d, "epochs", int, 140)
        kw["batch_size"] = _typed(d, "batch_size", int, 64)
        kw["seed"] = _typed(d, "seed", int, 0)
        kw["output_relu"] = output_relu
        kw["missing_policy"] = _typed(d, "missing_policy", str, "drop")

        opt = d.get("optimizer", {"name": "adam"})
        if isinstance(opt, str):
            opt = {"name": opt}
        if not isinstance(opt, dict):
            raise ConfigError("optimizer: must be a name or an object")
        kw["optimizer"] = opt.get("name", "adam")
        if kw["optimizer"] == "adam":
            extra = set(opt) - {"name", "alpha", "beta1", "beta2", "epsilon"}
            if extra:
                raise ConfigError(f"optimizer.{sorted(extra)[0]}: unknown Adam hyperparameter")
            try:
                kw["adam"] = AdamConfig(**{k: float(v) for k, v in opt.items() if k != "name"})
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"optimizer: {exc}") from None
        elif kw["optimizer"] == "sgd":
            extra = set(opt) - {"name", "learning_rate"}
            if extra:
                raise ConfigError(f"optimizer.{sorted(extra)[0]}: unknown SGD hyperparameter")
            kw["sgd_learning_rate"] = _number(opt, "learning_rate", 0.01, "optimizer.learning_rate")

        split = d.get("split", {})
        if not isinstance(split, dict):
            raise ConfigError("split: must be an object")
        extra = set(split) - {"train_fraction", "test_fraction", "seed"}
        if extra:
            raise ConfigError(f"split.{sorted(extra)[0]}: unknown field")
        kw["split"] = SplitSpec(_number(split, "train_fraction", 0.01, "split.train_fraction"),
                                _number(split, "test_fraction", 0.005, "split.test_fraction"),
                                _typed(split, "seed", int, kw["seed"], "split.seed"))

        paths = d.get("paths", {})
        if not isinstance(paths, dict):
            raise ConfigError("paths: must be an object")
        for key, attr in (("input", "input_path"), ("model", "model_path"),
                          ("history", "history_path"), ("metrics", "metrics_path")):
            if key in paths:
                if not isinstance(paths[key], str):
                    raise ConfigError(f"paths.{key}: must be a string")
                kw[attr] = paths[key]
        return cls(**kw)


def _typed(d: dict, key: str, typ, default, label: Optional[str] = None):
    if key not in d:
        return default
    value = d[key]
    # bool is an int subclass; reject it where an int is expected
    if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
        raise ConfigError(f"{label or key}: expected {typ.__name__}, got {value!r}")
    return value


def _number(d: dict, key: str, default: float, label: str) -> float:
    if key not in d:
        return default
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{label}: expected a number, got {value!r}")
    return float(value)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_mae: float
    val_loss: float
    val_mae: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)
    steps: int = 0

    def __len__(self):
        return len(self.records)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,train_mae,val_loss,val_mae\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.train_loss!r},{r.train_mae!r},{r.val_loss!r},{r.val_mae!r}\n")


@dataclass
class TrainResult:
    params: MlpParams
    stats: NormStats
    history: TrainingHistory
    train: SampleTable          # standardised training partition
    test: SampleTable           # standardised test partition
    adam_state: Optional[AdamState] = None


def _loss_mae(params: MlpParams, table: SampleTable) -> tuple[float, float]:
    if len(table) == 0:
        return float("nan"), float("nan")
    pred = nn.predict(params, table.features)
    r = table.target - pred
    return float(np.mean(r * r)), float(np.mean(np.abs(r)))


def train(config: RunConfig, table: SampleTable) -> TrainResult:
    """Split, standardise on the training rows, and run fixed-epoch minibatch training.

    Each epoch reshuffles the training rows with a generator seeded from
    ``config.seed``; the final short minibatch is kept.  The returned
    parameters are those after the last epoch.
    """
    if config.architecture[0].input_dim != table.features.shape[1]:
        raise ConfigError(f"architecture: first layer expects {config.architecture[0].input_dim} inputs, "
                          f"table has {table.features.shape[1]} features")
    raw_train, raw_test = shuffle_split(table, config.split)
    if len(raw_train) < 2:
        raise InsufficientDataError(f"training partition has {len(raw_train)} rows, need at least 2")
    train_t, stats = standardize(raw_train)
    test_t, _ = standardize(raw_test, stats)

    params = MlpParams.initialize(config.architecture, config.seed)
    state = AdamState.fresh(params) if config.optimizer == "adam" else None
    rng = np.random.default_rng([config.seed, 1])
    history = TrainingHistory()
    X, y = train_t.features, train_t.target
    n = len(train_t)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            grads, _ = nn.batch_gradients(params, X[idx], y[idx])
            if state is not None:
                params, state = adam_step(state, config.adam, params, grads)
            else:
                params = sgd_step(params, grads, config.sgd_learning_rate)
            history.steps += 1
        if not params.is_finite():
            raise NumericalError(f"parameters became non-finite in epoch {epoch}")
        tr_loss, tr_mae = _loss_mae(params, train_t)
        va_loss, va_mae = _loss_mae(params, test_t)
        history.records.append(EpochRecord(epoch, tr_loss, tr_mae, va_loss, va_mae))
        log.info("epoch %d/%d train_loss=%.4f train_mae=%.4f val_loss=%.4f val_mae=%.4f",
                 epoch, config.epochs, tr_loss, tr_mae, va_loss, va_mae)
    return TrainResult(params, stats, history, train_t, test_t, state)
