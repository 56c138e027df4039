import math

import numpy as np
import pytest

from src.core.diffcore import Tensor
from src.core.signal_graphs import FeatureGrouping, SubsetPartition
from src.core.superman import ModelConfig, build_model, model_parameters, predict_logits
from src.core.synth import feature_xor_dataset
from src.core.training import (
    PlateauScheduler,
    TrainConfig,
    bce_loss,
    minority_upsample,
    shuffled_batches,
    train,
)
from src.errors import ConfigError, NumericalError


def fresh_model(seed=7, dropout=0.0):
    partition = SubsetPartition(subsets=(("a", "b"), ("c",)))
    groupings = {"a": FeatureGrouping.single(2), "b": FeatureGrouping.single(2), "c": FeatureGrouping(((0,), (1, 2)))}
    return build_model(partition, groupings, ModelConfig(hidden=6, layers=2, dropout=dropout), seed=seed)


def test_bce_at_zero_logit_is_log_two():
    assert bce_loss(Tensor(np.zeros(4)), [0, 1, 0, 1]).item() == pytest.approx(math.log(2.0))


def test_bce_is_stable_for_large_logits():
    assert bce_loss(Tensor(np.array([50.0])), [0]).item() == pytest.approx(50.0)
    assert bce_loss(Tensor(np.array([50.0])), [1]).item() == pytest.approx(0.0, abs=1e-20)


def test_bce_matches_naive_formula(rng):
    z = rng.normal(size=12)
    y = rng.integers(0, 2, size=12)
    p = 1.0 / (1.0 + np.exp(-z))
    naive = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert bce_loss(Tensor(z), y).item() == pytest.approx(naive, rel=1e-12)


def test_minority_upsample_balances_each_batch():
    labels = [1] * 10 + [0] * 90
    batches = minority_upsample(range(100), labels, 16, seed=0)
    assert len(batches) == 7
    for batch in batches:
        assert len(batch) == 16
        assert sum(labels[i] for i in batch) == 8


def test_minority_upsample_is_seeded():
    labels = [1] * 3 + [0] * 17
    a = minority_upsample(range(20), labels, 4, seed=11)
    b = minority_upsample(range(20), labels, 4, seed=11)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_minority_upsample_needs_both_classes():
    with pytest.raises(ConfigError):
        minority_upsample(range(5), [0] * 5, 4, seed=0)


def test_shuffled_batches_cover_every_index(rng):
    batches = shuffled_batches(range(10), 4, rng)
    assert [len(b) for b in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


def test_plateau_scheduler_drops_after_patience():
    scheduler = PlateauScheduler(lr=1.0, factor=0.5, patience=2, lr_min=1e-8)
    rates = [scheduler.step(1.0) for _ in range(3)]
    assert rates == [1.0, 1.0, 0.5]


def test_plateau_scheduler_respects_floor():
    scheduler = PlateauScheduler(lr=1e-7, factor=0.1, patience=1, lr_min=1e-8)
    scheduler.step(1.0)
    assert scheduler.step(1.0) == pytest.approx(1e-8)
    assert scheduler.step(1.0) == pytest.approx(1e-8)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=-1)
    with pytest.raises(ConfigError):
        TrainConfig(lr_min=1e-2, lr_max=1e-3)
    assert TrainConfig(batch_size=8).grid_deviations() == ["batch_size"]


def test_zero_epochs_keeps_initial_parameters(mixed_setup):
    model, samples = mixed_setup
    before = {k: v.data.copy() for k, v in model_parameters(model).items()}
    _, history = train(model, samples, samples, TrainConfig(epochs=0, batch_size=4, dropout=0.0))
    assert history == []
    for name, p in model_parameters(model).items():
        np.testing.assert_array_equal(p.data, before[name])


def test_training_is_deterministic(mixed_setup):
    _, samples = mixed_setup
    config = TrainConfig(epochs=3, batch_size=4, dropout=0.1, hidden=6, layers=2, seed=5)
    first_model, first = train(fresh_model(dropout=0.1), samples, samples, config)
    second_model, second = train(fresh_model(dropout=0.1), samples, samples, config)
    assert first == second
    np.testing.assert_array_equal(predict_logits(first_model, samples), predict_logits(second_model, samples))


def test_training_lowers_the_loss(mixed_setup):
    _, samples = mixed_setup
    config = TrainConfig(epochs=40, batch_size=6, lr_max=1e-2, dropout=0.0, upsample_minority=False)
    _, history = train(fresh_model(), samples, samples, config, batch_size=len(samples))
    assert min(r.val_loss for r in history) < history[0].val_loss


def test_empty_training_split_raises(mixed_setup):
    model, samples = mixed_setup
    with pytest.raises(ConfigError):
        train(model, [], samples, TrainConfig(epochs=1, batch_size=4))


def test_non_finite_parameters_raise_with_checkpoint(mixed_setup):
    model, samples = mixed_setup
    model.output_bias.data = np.array([np.nan])
    with pytest.raises(NumericalError) as info:
        train(model, samples, samples, TrainConfig(epochs=1, batch_size=4, dropout=0.0))
    assert info.value.checkpoint is model


@pytest.mark.slow
def test_grouped_encoder_fits_feature_xor():
    data = feature_xor_dataset(1, grouped=True)
    config = TrainConfig(epochs=600, batch_size=4, lr_max=1e-2, plateau_patience=100, dropout=0.0,
                         hidden=32, layers=3, upsample_minority=False)
    model = build_model(data.partition, data.groupings, ModelConfig(hidden=32, layers=3, dropout=0.0), seed=0)
    train(model, data.graph_sets, data.graph_sets, config)
    predictions = (predict_logits(model, data.graph_sets) > 0).astype(int)
    assert predictions.tolist() == [0, 1, 1, 0]
