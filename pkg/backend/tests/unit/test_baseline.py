"""
Tests for the baseline network and the shared training loop.
"""

import math

import numpy as np
import pytest

from app.exceptions import ClassError, DimensionError, DivergenceError
from app.models.configs import BaselineConfig, LossFunction, ModelKind
from app.models.records import Dataset
from app.nn import Tensor, param_count
from app.services.data_processor import Standardizer, load_dataset
from app.services.forecasting import AVAILABLE_MODELS, MODEL_FACTORIES, BaselineNet, CauseModel, build_model
from app.services.forecasting.baseline import baseline_param_count, forward_baseline, init_baseline, train_baseline
from app.services.resampling import apply_plan, split_plan


def _toy_dataset(n: int = 40, width: int = 20, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    features = rng.normal(size=(n, width)) + labels[:, None]
    return Dataset(features=features, labels=labels, ids=np.arange(n), columns=[f"f{i}" for i in range(width)])


@pytest.mark.parametrize("width,expected", [(20, 49705), (14, 48169), (22, 50217)])
def test_parameter_count(width, expected):
    """Learnable count for the vegetation, no-vegetation and hybrid-fused widths."""
    net = BaselineNet(BaselineConfig(input_dim=width))

    assert param_count(net) == expected
    assert baseline_param_count(width) == expected


def test_batchnorm_on_last_hidden_adds_eight_parameters():
    net = BaselineNet(BaselineConfig(input_dim=20, use_batchnorm_on_last_hidden=True))

    assert param_count(net) == 49705 + 8


def test_output_heads(rng):
    x = Tensor(rng.normal(size=(5, 20)))
    mse_net = BaselineNet(BaselineConfig(loss=LossFunction.MSE))
    ce_net = BaselineNet(BaselineConfig(loss=LossFunction.CROSS_ENTROPY))

    assert mse_net.eval()(x).shape == (5, 1)
    assert ce_net.eval()(x).shape == (5, 2)
    probs = forward_baseline(ce_net, x.data)
    assert probs.shape == (5,)
    assert np.all((probs.data > 0.0) & (probs.data < 1.0))


def test_wrong_width_raises(baseline_config, rng):
    net = BaselineNet(baseline_config)

    with pytest.raises(DimensionError):
        net.eval()(Tensor(rng.normal(size=(3, 14))))


def test_same_seed_same_initialisation():
    a = BaselineNet(BaselineConfig(), seed=3).state_dict()
    b = BaselineNet(BaselineConfig(), seed=3).state_dict()
    c = BaselineNet(BaselineConfig(), seed=4).state_dict()

    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not np.array_equal(a["layers.0.weight"], c["layers.0.weight"])


def test_registry_builds_baseline():
    model = build_model("baseline", {"input_dim": 14, "epochs": 2}, seed=1)

    assert isinstance(model, BaselineNet)
    assert AVAILABLE_MODELS["baseline"] is BaselineNet
    assert model.config.input_dim == 14


def test_registry_goes_through_the_init_factory():
    config = BaselineConfig(input_dim=14)
    built = build_model(ModelKind.BASELINE, config, seed=6).state_dict()
    direct = init_baseline(config, seed=6).state_dict()

    assert MODEL_FACTORIES["baseline"] is init_baseline
    assert built.keys() == direct.keys()
    assert all(np.array_equal(built[k], direct[k]) for k in built)


def test_training_is_deterministic(baseline_config):
    data = _toy_dataset()
    logs = [BaselineNet(baseline_config, seed=5).fit(data, seed=5) for _ in range(2)]

    assert logs[0] == logs[1]
    assert len(logs[0].epochs) == 5


def test_mini_batches_skip_single_row_remainder():
    config = BaselineConfig(input_dim=20, epochs=2, batch_size=5)
    log = BaselineNet(config).fit(_toy_dataset(n=11))

    assert len(log.batches) == 4
    assert all(b.rows == 5 for b in log.batches)
    assert log.batches[0].scaled_loss == pytest.approx(log.batches[0].loss * 5 / 11)


@pytest.mark.parametrize("n", [64, 100, 150])
def test_batches_per_epoch_cover_every_row(n):
    config = BaselineConfig(input_dim=20, epochs=2, batch_size=32)
    log = BaselineNet(config, seed=1).fit(_toy_dataset(n=n))

    for epoch in range(2):
        batches = [b for b in log.batches if b.epoch == epoch]
        assert len(batches) == math.ceil(n / 32)
        assert sum(b.rows for b in batches) == n


def test_first_epoch_mse_is_near_a_coin_flip():
    """Freshly initialised outputs sit near p = 0.5, so the first MSE is close to 0.25."""
    config = BaselineConfig(input_dim=20, epochs=1, loss=LossFunction.MSE)
    log = BaselineNet(config, seed=0).fit(_toy_dataset(n=200))

    assert log.epochs[0].loss == pytest.approx(0.25, abs=0.05)


def test_training_needs_both_classes(baseline_config):
    data = _toy_dataset()
    one_class = data.model_copy(update={"labels": np.zeros(len(data), dtype=int)})

    with pytest.raises(ClassError):
        BaselineNet(baseline_config).fit(one_class)


def test_non_finite_loss_becomes_divergence_error(baseline_config, monkeypatch):
    net = BaselineNet(baseline_config)
    monkeypatch.setattr(net, "loss", lambda out, labels: CauseModel.loss(net, out, labels) * np.inf)

    with pytest.raises(DivergenceError) as exc_info:
        net.fit(_toy_dataset())
    assert exc_info.value.epoch == 0
    assert exc_info.value.exit_code == 4


def test_baseline_learns_separable_weather(synthetic_data):
    """Full-batch Adam on 200 hard-margin rows reaches 95% test accuracy."""
    dataset = load_dataset(synthetic_data.csv)
    train, test = apply_plan(dataset, split_plan(len(dataset), 0.2, seed=0))
    std = Standardizer.fit(train.features)
    train = train.model_copy(update={"features": std.transform(train.features)})
    test = test.model_copy(update={"features": std.transform(test.features)})

    net = BaselineNet(BaselineConfig(input_dim=20, epochs=100, learning_rate=0.01), seed=0)
    log = train_baseline(net, train, test)
    report = net.evaluate(test)

    assert log.losses[-1] < log.losses[0]
    assert report.rates.accuracy >= 0.95
    assert log.final.test_acc == pytest.approx(report.rates.accuracy)
