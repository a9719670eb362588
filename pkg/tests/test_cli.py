import json

import numpy as np
import pandas as pd
import pytest

from data.volumedata import MODALITIES, load_case_labels, read_seed_record
from main import build_parser, main, phantom_seeds
from utils.files import MANIFEST_FILE, read_json

CONFIG = """preset=tiny
variant=M2
epochs=2
batch_size=4
samples_per_case=4
checkpoint_interval=1
bn_calibration_samples=8
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.env"
    path.write_text(CONFIG, encoding="utf-8")
    return path


def _tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != MANIFEST_FILE}


def test_phantom_command(tmp_path):
    out = tmp_path / "data"
    assert main(["phantom", "--out", str(out), "--count", "4", "--seed", "1", "--shape", "32,32,32"]) == 0

    cases = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert cases == ["phantom_000", "phantom_001", "phantom_002", "phantom_003"]
    for case, seed in zip(cases, phantom_seeds(1, 4)):
        files = sorted(p.name for p in (out / case).iterdir())
        assert files == sorted([f"{case}_{m}.nii.gz" for m in MODALITIES] + [f"{case}_seg.nii.gz"])
        assert read_seed_record(out / case) == seed
    manifest = read_json(out / MANIFEST_FILE)
    assert manifest["command"] == "phantom" and manifest["seed"] == 1

    again = tmp_path / "again"
    assert main(["phantom", "--out", str(again), "--count", "4", "--seed", "1", "--shape", "32,32,32",
                 "--jobs", "2"]) == 0
    assert _tree_bytes(out) == _tree_bytes(again)


def test_phantom_shape_too_small(tmp_path, capsys):
    code = main(["phantom", "--out", str(tmp_path / "d"), "--count", "1", "--shape", "16,16,16"])
    assert code == 1
    assert "shape too small" in capsys.readouterr().err


def test_parser_rejects_bad_shape():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["phantom", "--out", "x", "--shape", "1,2"])


def test_invalid_config_lists_keys(tmp_path, phantom_dataset, capsys):
    path = tmp_path / "bad.env"
    path.write_text("preset=tiny\nepochs=0\nflavour=mint\n", encoding="utf-8")
    code = main(["train", "--data", str(phantom_dataset), "--config", str(path), "--out", str(tmp_path / "run")])
    assert code == 1
    err = capsys.readouterr().err
    assert "epochs" in err and "flavour" in err


def _train(data, config, out, *extra):
    return main(["train", "--data", str(data), "--config", str(config), "--out", str(out), *extra])


def test_train_predict_evaluate(tmp_path, phantom_dataset, config_file, capsys):
    run = tmp_path / "run"
    assert _train(phantom_dataset, config_file, run, "--seed", "5") == 0
    assert len((run / "training_log.jsonl").read_text().splitlines()) == 2
    assert (run / "final" / "manifest.json").exists()
    assert (run / "checkpoints" / "epoch_0002" / "manifest.json").exists()
    assert read_json(run / MANIFEST_FILE)["seed"] == 5

    predictions = tmp_path / "pred"
    assert main(["predict", "--data", str(phantom_dataset), "--weights", str(run / "final"),
                 "--out", str(predictions), "--probs"]) == 0
    for case in ("case_000", "case_001"):
        labels = load_case_labels(predictions / case)
        assert labels.shape == (32, 32, 32)
        assert set(np.unique(labels.labels)) <= {0, 1, 2, 4}
        for suffix in ("prob_wt", "prob_tc", "prob_et"):
            assert (predictions / case / f"{case}_{suffix}.nii.gz").exists()

    scores_dir = tmp_path / "scores"
    capsys.readouterr()
    assert main(["evaluate", "--pred", str(predictions), "--truth", str(phantom_dataset),
                 "--out", str(scores_dir)]) == 0
    assert "Dice ET" in capsys.readouterr().out
    scores = pd.read_csv(scores_dir / "scores.csv", index_col="case_id")
    assert list(scores.index) == ["case_000", "case_001"]
    assert (scores_dir / "summary.txt").exists()

    assert main(["inspect", str(run / "final")]) == 0
    out = capsys.readouterr().out
    assert "decoder" in out and "total" in out


def test_evaluate_perfect_predictions(tmp_path, phantom_dataset):
    out = tmp_path / "perfect"
    assert main(["evaluate", "--pred", f"truth={phantom_dataset}", "--truth", str(phantom_dataset),
                 "--out", str(out)]) == 0
    scores = pd.read_csv(out / "scores.csv", index_col="case_id")
    assert np.all(scores[["dice_et", "dice_wt", "dice_tc"]].to_numpy() == 1.0)
    assert np.all(scores[["hd95_et", "hd95_wt", "hd95_tc"]].to_numpy() == 0.0)


def test_evaluate_comparison(tmp_path, phantom_dataset):
    out = tmp_path / "compare"
    assert main(["evaluate", "--pred", f"A={phantom_dataset}", "--pred", f"B={phantom_dataset}",
                 "--truth", str(phantom_dataset), "--out", str(out)]) == 0
    assert (out / "A" / "scores.csv").exists() and (out / "B" / "summary.txt").exists()
    assert "Mean A" in (out / "comparison.txt").read_text()


def test_evaluate_missing_prediction(tmp_path, phantom_dataset, capsys):
    predictions = tmp_path / "partial"
    (predictions / "case_000").mkdir(parents=True)
    source = phantom_dataset / "case_000" / "case_000_seg.nii.gz"
    (predictions / "case_000" / "case_000_seg.nii.gz").write_bytes(source.read_bytes())

    code = main(["evaluate", "--pred", str(predictions), "--truth", str(phantom_dataset),
                 "--out", str(tmp_path / "scores")])
    assert code == 1
    assert "case_001" in capsys.readouterr().err


def test_train_with_incompatible_weights(tmp_path, phantom_dataset, config_file, capsys):
    run = tmp_path / "m2"
    assert _train(phantom_dataset, config_file, run) == 0
    m1_config = tmp_path / "m1.env"
    m1_config.write_text(CONFIG.replace("variant=M2", "variant=M1"), encoding="utf-8")
    capsys.readouterr()
    assert _train(phantom_dataset, m1_config, tmp_path / "m1", "--weights", str(run / "final")) == 1
    assert "fingerprint mismatch" in capsys.readouterr().err


def test_end_to_end_is_reproducible(tmp_path, config_file):
    outputs = []
    for name in ("first", "second"):
        root = tmp_path / name
        assert main(["phantom", "--out", str(root / "data"), "--count", "2", "--seed", "3",
                     "--shape", "32,32,32"]) == 0
        assert _train(root / "data", config_file, root / "run", "--seed", "3") == 0
        assert main(["predict", "--data", str(root / "data"), "--weights", str(root / "run" / "final"),
                     "--out", str(root / "pred")]) == 0
        assert main(["evaluate", "--pred", str(root / "pred"), "--truth", str(root / "data"),
                     "--out", str(root / "scores")]) == 0
        outputs.append({part: _tree_bytes(root / part) for part in ("data", "pred", "scores")}
                       | {"checkpoints": _tree_bytes(root / "run" / "checkpoints"),
                          "final": _tree_bytes(root / "run" / "final")})
    assert outputs[0] == outputs[1]
    assert json.loads(outputs[0]["final"]["manifest.json"])["metadata"]["epoch"] == 2
