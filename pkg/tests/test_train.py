import numpy as np
import pytest

from tcwvnet import nn
from tcwvnet.data import SampleTable, SplitSpec, SynthConfig, synth_generate
from tcwvnet.errors import ConfigError, InsufficientDataError
from tcwvnet.nn import LayerSpec
from tcwvnet.train import RunConfig, train


@pytest.fixture(scope="module")
def table():
    return synth_generate(SynthConfig(n_samples=2000, noise_std=1.0, seed=2))


def small_config(**kw):
    base = dict(epochs=5, batch_size=32, split=SplitSpec(0.2, 0.1, seed=1), seed=4)
    base.update(kw)
    return RunConfig(**base)


def test_defaults_match_reference_setup():
    c = RunConfig()
    assert c.epochs == 140 and c.batch_size == 64 and c.optimizer == "adam"
    assert [(s.input_dim, s.output_dim) for s in c.architecture] == [(9, 64), (64, 32), (32, 1)]
    assert c.architecture[-1].activation == "linear"
    assert (c.split.train_fraction, c.split.test_fraction) == (0.01, 0.005)
    assert (c.adam.alpha, c.adam.beta1, c.adam.beta2, c.adam.epsilon) == (0.001, 0.9, 0.999, 1e-8)


def test_output_relu_flag():
    assert RunConfig(output_relu=True).architecture[-1].activation == "relu"


def test_config_validation():
    with pytest.raises(ConfigError, match="epochs"):
        RunConfig(epochs=0)
    with pytest.raises(ConfigError, match="batch_size"):
        RunConfig(batch_size=0)
    with pytest.raises(ConfigError, match="optimizer"):
        RunConfig(optimizer="rmsprop")
    with pytest.raises(ConfigError, match="architecture"):
        RunConfig(architecture=[LayerSpec(9, 4), LayerSpec(4, 2, "linear")])


@pytest.mark.parametrize("doc, field", [
    ({"epochs": "ten"}, "epochs"),
    ({"epochs": True}, "epochs"),
    ({"batch_size": -1}, "batch_size"),
    ({"split": {"train_fraction": 2.0}}, "train_fraction"),
    ({"split": {"bogus": 1}}, "split.bogus"),
    ({"optimizer": {"name": "adam", "alpha": -1}}, "alpha"),
    ({"optimizer": {"name": "adam", "lr": 0.1}}, "optimizer.lr"),
    ({"hidden": [64, 0]}, "hidden"),
    ({"colour": "red"}, "colour"),
    ({"paths": {"input": 3}}, "paths.input"),
])
def test_config_from_dict_names_bad_field(doc, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        RunConfig.from_dict(doc)


def test_config_from_dict_full():
    c = RunConfig.from_dict({
        "architecture": [{"in": 9, "out": 8, "activation": "relu"}, {"in": 8, "out": 1, "activation": "linear"}],
        "epochs": 3, "batch_size": 16, "seed": 9,
        "optimizer": {"name": "sgd", "learning_rate": 0.05},
        "split": {"train_fraction": 0.5, "test_fraction": 0.25},
        "paths": {"input": "a.csv", "model": "m.json"},
    })
    assert c.optimizer == "sgd" and c.sgd_learning_rate == 0.05
    assert c.split.seed == 9 and c.input_path == "a.csv" and c.model_path == "m.json"
    assert [s.output_dim for s in c.architecture] == [8, 1]


def test_single_step_degenerate_loop(table):
    cfg = small_config(epochs=1, batch_size=10_000)
    res = train(cfg, table)
    assert res.history.steps == 1 and len(res.history) == 1
    assert res.adam_state.t == 1


def test_step_count_includes_short_batch(table):
    cfg = small_config(epochs=2, batch_size=64)
    res = train(cfg, table)
    n_train = len(res.train)                     # 400 rows -> 7 batches per epoch
    assert res.history.steps == 2 * -(-n_train // 64)


def test_training_is_deterministic(table):
    a = train(small_config(), table)
    b = train(small_config(), table)
    assert all(np.array_equal(x, y) for x, y in zip(a.params.arrays(), b.params.arrays()))
    assert a.history.records == b.history.records


def test_seed_changes_result(table):
    a = train(small_config(), table)
    b = train(small_config(seed=5), table)
    assert not np.array_equal(a.params.layers[0].weights, b.params.layers[0].weights)


def test_training_reduces_validation_loss(table):
    res = train(small_config(epochs=30), table)
    h = res.history.records
    assert [r.epoch for r in h] == list(range(1, 31))
    assert h[-1].val_loss < 0.1 * h[0].val_loss
    assert res.params.is_finite()


def test_sgd_optimizer_trains(table):
    res = train(small_config(epochs=20, optimizer="sgd", sgd_learning_rate=1e-3), table)
    h = res.history.records
    assert res.adam_state is None
    assert h[-1].train_loss < h[0].train_loss


def test_standardisation_uses_training_rows_only(table):
    res = train(small_config(epochs=1), table)
    assert np.all(np.abs(res.train.features.mean(axis=0)) < 1e-10)
    assert np.any(np.abs(res.test.features.mean(axis=0)) > 1e-6)


def test_history_csv(tmp_path, table):
    res = train(small_config(epochs=3), table)
    p = tmp_path / "h.csv"
    res.history.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_mae,val_loss,val_mae"
    assert len(lines) == 4
    assert float(lines[-1].split(",")[2]) == res.history.records[-1].train_mae


def test_too_few_training_rows():
    t = SampleTable(np.zeros((50, 9)), np.zeros(50))
    with pytest.raises(InsufficientDataError):
        train(RunConfig(split=SplitSpec(0.01, 0.0)), t)


def test_feature_count_mismatch():
    cfg = RunConfig(architecture=nn.default_architecture(n_inputs=5))
    with pytest.raises(ConfigError):
        train(cfg, SampleTable(np.zeros((10, 9)), np.zeros(10)))
