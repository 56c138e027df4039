import numpy as np
import pytest

from src.cli import build_parser, main
from src.core.treemetric import WeightedPath, distance_matrix
from src.utils.csv_export import write_matrix_csv
from src.utils.json_export import read_json

TRAIN_FLAGS = ["--seeds", "0", "--epochs", "2", "--batch-size", "16", "--hidden", "8", "--layers", "2"]


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    assert main(["synth", "--n-samples", "40", "--seed", "3", "--out", str(out)]) == 0
    return out


def test_synth_writes_dataset_and_manifest(synth_dir):
    manifest = read_json(str(synth_dir / "manifest.json"))
    paths = {a["path"] for a in manifest["artifacts"]}
    assert {"run_config.json", "dataset.json", "measurements.csv", "partition.json"} <= paths
    assert manifest["command"] == "synth"


def test_train_without_seeds_is_a_config_error(synth_dir, tmp_path):
    code = main(["train", "--dataset", str(synth_dir / "dataset.json"), "--seeds", "", "--out", str(tmp_path / "t")])
    assert code == 2


def test_train_without_dataset_is_a_config_error(tmp_path):
    assert main(["train", "--out", str(tmp_path / "t")]) == 2


def test_missing_dataset_file_fails(tmp_path):
    assert main(["train", "--dataset", str(tmp_path / "none.json"), "--out", str(tmp_path / "t")]) != 0


def test_deterministic_training_is_reproducible(synth_dir, tmp_path):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        argv = ["train", "--dataset", str(synth_dir / "dataset.json"), "--deterministic", "--out", str(out)]
        assert main(argv + TRAIN_FLAGS) == 0
        outputs.append(out)
    for artifact in ("metrics.json", "checkpoint_seed0.json", "history_seed0.csv"):
        assert (outputs[0] / artifact).read_bytes() == (outputs[1] / artifact).read_bytes()


def test_end_to_end_flow(synth_dir, tmp_path):
    dataset = str(synth_dir / "dataset.json")
    train_dir = tmp_path / "train"
    argv = ["train", "--dataset", dataset, "--partition", str(synth_dir / "partition.json"), "--out", str(train_dir)]
    assert main(argv + TRAIN_FLAGS) == 0
    checkpoint = str(train_dir / "checkpoint_seed0.json")

    assert main(["eval", "--checkpoint", checkpoint, "--dataset", dataset, "--out", str(tmp_path / "eval")]) == 0
    metrics = read_json(str(tmp_path / "eval" / "metrics.json"))
    assert set(metrics) == {"auprc", "auroc", "accuracy", "ece"}

    assert main(["explain", "--checkpoint", checkpoint, "--dataset", dataset, "--out", str(tmp_path / "explain")]) == 0
    reports = read_json(str(tmp_path / "explain" / "contributions.json"))
    assert len(reports) == 40
    assert max(r["reconstruction_residual"] for r in reports) < 1e-9

    argv = ["robustness", "--checkpoint", checkpoint, "--dataset", dataset, "--kinds", "additive",
            "--levels", "0,0.5", "--seeds", "0,1", "--out", str(tmp_path / "robust")]
    assert main(argv) == 0
    assert (tmp_path / "robust" / "robustness_additive.csv").exists()
    assert read_json(str(tmp_path / "robust" / "manifest.json"))["seeds"] == [0, 1]


def test_treemetric_check_and_reconstruct(tmp_path, capsys):
    distances = distance_matrix(WeightedPath(order=[0, 2, 1], weights=[1.0, 2.0]))
    matrix = write_matrix_csv(distances, str(tmp_path / "d.csv"))
    assert main(["treemetric", "check", matrix, "--out", str(tmp_path / "check")]) == 0
    assert "OK" in capsys.readouterr().out
    assert main(["treemetric", "reconstruct", matrix, "--out", str(tmp_path / "rec")]) == 0
    assert read_json(str(tmp_path / "rec" / "path.json"))["order"] == [0, 2, 1]


def test_treemetric_reports_star_as_data_error(tmp_path):
    star = np.array([[0, 1, 1, 1], [1, 0, 2, 2], [1, 2, 0, 2], [1, 2, 2, 0]], dtype=float)
    matrix = write_matrix_csv(star, str(tmp_path / "star.csv"))
    assert main(["treemetric", "reconstruct", matrix, "--out", str(tmp_path / "rec")]) == 3


def test_parser_rejects_unknown_ablation():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["train", "--ablation", "bogus"])


@pytest.mark.slow
def test_feature_xor_bench(tmp_path):
    out = tmp_path / "xor"
    assert main(["xor-bench", "feature", "--configuration", "both", "--seeds", "0,1", "--out", str(out)]) == 0
    document = read_json(str(out / "xor_feature.json"))
    assert document["summary"]["grouped"]["solved"] == 2
    assert document["summary"]["univariate"]["max"] <= 0.75
    assert document["witness_outputs"] == [0.0, 1.0, 1.0, 0.0]
