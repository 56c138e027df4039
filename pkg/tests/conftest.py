import numpy as np
import pytest

from src.core.signal_graphs import (
    Direction,
    FeatureGrouping,
    GraphSet,
    SubsetPartition,
    bind_partition,
    build_graph,
    path_edges,
)
from src.core.superman import ModelConfig, build_model
from src.core.synth import SynthSpec, generate


def path_graph(signal_type, values, times, direction=Direction.FORWARD):
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    t = np.asarray(times, dtype=np.float64)
    return build_graph(signal_type, x, t, path_edges(t.shape[0], direction))


@pytest.fixture
def make_path():
    return path_graph


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def irregular_data():
    return generate(SynthSpec(n_samples=60, seed=3, oracle_draws=2000))


@pytest.fixture
def small_model(irregular_data):
    config = ModelConfig(hidden=8, layers=2, dropout=0.0, time_scale=10.0)
    model = build_model(irregular_data.partition, irregular_data.groupings, config, seed=0)
    model.output_bias.data = np.array([0.25])
    return model


@pytest.fixture
def mixed_setup():
    """Two signal types sharing a mixed subset plus one single-graph subset."""
    partition = SubsetPartition(subsets=(("a", "b"), ("c",)))
    groupings = {
        "a": FeatureGrouping.single(2),
        "b": FeatureGrouping.single(2),
        "c": FeatureGrouping(((0,), (1, 2))),
    }
    model = build_model(partition, groupings, ModelConfig(hidden=6, layers=2, dropout=0.0), seed=7)
    model.output_bias.data = np.array([-0.1])
    gen = np.random.default_rng(5)
    samples = []
    for i in range(6):
        graphs = (
            path_graph("a", gen.normal(size=(3, 2)), np.sort(gen.uniform(0, 5, 3))),
            path_graph("b", gen.normal(size=(2, 2)), np.sort(gen.uniform(0, 5, 2))),
            path_graph("c", gen.normal(size=(4, 3)), np.sort(gen.uniform(0, 5, 4))),
        )
        samples.append(GraphSet(entity_id=f"m{i}", graphs=graphs, label=i % 2))
    return model, bind_partition(samples, partition)
