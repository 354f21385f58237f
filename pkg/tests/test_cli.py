from __future__ import annotations

from pathlib import Path

import pytest

from pyamulet.cli import CONFIG_ECHO, TRAIN_LOG, main
from pyamulet.config import SEED_ENV, RunConfig
from pyamulet.data.manifest import MANIFEST_NAME, MASK_DIR
from pyamulet.errors import ArityError, ConvSpecError, DivergenceError, GradCheckError, ShapeError
from pyamulet.models import DataConfig
from pyamulet.telemetry import METRICS_FILE
from pyamulet.training import FINAL_CHECKPOINT, LOG_HEADER, checkpoint_name

from .helpers import tiny_network, tiny_run_config


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(SEED_ENV, raising=False)


def _config(tmp_path: Path, max_iters: int = 10) -> Path:
    path = tmp_path / "run.json"
    tiny_run_config(max_iters).dump(path)
    return path


def _synth(tmp_path: Path, config: Path, count: int = 8, name: str = "data") -> Path:
    out = tmp_path / name
    assert main(["synth", "--spec", str(config), "--out", str(out), "--count", str(count)]) == 0
    return out / MANIFEST_NAME


def test_synth_is_byte_identical(tmp_path: Path) -> None:
    config = _config(tmp_path)
    first = _synth(tmp_path, config, name="one")
    second = _synth(tmp_path, config, name="two")
    assert len(first.read_text().splitlines()) == 8
    assert first.read_bytes() == second.read_bytes()
    for mask in sorted((first.parent / MASK_DIR).iterdir()):
        assert mask.read_bytes() == (second.parent / MASK_DIR / mask.name).read_bytes()


def test_synth_rejects_zero_count(tmp_path: Path) -> None:
    assert main(["synth", "--out", str(tmp_path), "--count", "0"]) == 2


def test_gradcheck_exit_codes(tmp_path: Path) -> None:
    passing = tmp_path / "pass.json"
    RunConfig(network=tiny_network(), data=DataConfig(seed=1)).dump(passing)
    assert main(["gradcheck", "--config", str(passing), "--max-entries", "20"]) == 0
    assert main(["gradcheck", "--config", str(passing), "--tolerance", "1e-12", "--max-entries", "5"]) == 1

    single_level = tmp_path / "single.json"
    single_level.write_text('{"network": {"levels": 1, "backbone_channels": [4]}}')
    assert main(["gradcheck", "--config", str(single_level)]) == 2

    # 1x1 at the top level leaves batch norm a single value per channel
    one_pixel = tmp_path / "one_pixel.json"
    one_pixel.write_text(
        '{"network": {"levels": 2, "input_hw": [2, 2], "backbone_channels": [4, 4], "agg_width": 4, "stage_depth": 1}}'
    )
    assert main(["gradcheck", "--config", str(one_pixel)]) == 2


def test_train_and_resume(tmp_path: Path) -> None:
    config = _config(tmp_path)
    manifest = _synth(tmp_path, config)
    full = tmp_path / "full"
    assert main(["train", "--config", str(config), "--data", str(manifest), "--out", str(full)]) == 0
    rows = (full / TRAIN_LOG).read_text().splitlines()
    assert len(rows) == 11
    assert (full / CONFIG_ECHO).is_file() and (full / METRICS_FILE).is_file()
    assert (full / FINAL_CHECKPOINT).is_file()

    resumed = tmp_path / "resumed"
    checkpoint = full / checkpoint_name(5)
    argv = ["train", "--config", str(config), "--data", str(manifest), "--out", str(resumed), "--resume", str(checkpoint)]
    assert main(argv) == 0
    assert (resumed / TRAIN_LOG).read_text().splitlines()[1:] == rows[6:]


def test_train_config_errors(tmp_path: Path) -> None:
    manifest = _synth(tmp_path, _config(tmp_path))
    bad = tmp_path / "bad.json"
    bad.write_text('{"optim": {"learning_rate": 0.1}}')
    assert main(["train", "--config", str(bad), "--data", str(manifest), "--out", str(tmp_path / "out")]) == 2


def test_train_divergence_exit_code(tmp_path: Path, mocker) -> None:
    config = _config(tmp_path)
    manifest = _synth(tmp_path, config)
    mocker.patch("pyamulet.cli.train", side_effect=DivergenceError("loss is nan", iteration=1))
    out = tmp_path / "out"
    assert main(["train", "--config", str(config), "--data", str(manifest), "--out", str(out)]) == 3
    assert (out / TRAIN_LOG).read_text().splitlines() == [LOG_HEADER]


def test_predict_and_eval(tmp_path: Path) -> None:
    config = _config(tmp_path, max_iters=2)
    manifest = _synth(tmp_path, config)
    run = tmp_path / "run"
    assert main(["train", "--config", str(config), "--data", str(manifest), "--out", str(run)]) == 0

    first, second = tmp_path / "pred1", tmp_path / "pred2"
    for out in (first, second):
        argv = ["predict", "--ckpt", str(run / FINAL_CHECKPOINT), "--data", str(manifest), "--out", str(out)]
        assert main(argv + ["--attention"]) == 0
    maps = sorted(p.name for p in first.glob("*.pgm"))
    assert len(maps) == 8
    for name in maps:
        assert (first / name).read_bytes() == (second / name).read_bytes()

    report = tmp_path / "report.csv"
    assert main(["eval", "--pred", str(first), "--data", str(manifest), "--out", str(report)]) == 0
    assert len(report.read_text().splitlines()) == 10


def test_eval_of_masks_is_perfect(tmp_path: Path) -> None:
    manifest = _synth(tmp_path, _config(tmp_path))
    report, pr = tmp_path / "report.csv", tmp_path / "pr.csv"
    argv = ["eval", "--pred", str(manifest.parent / MASK_DIR), "--data", str(manifest), "--out", str(report)]
    assert main(argv + ["--pr", str(pr)]) == 0
    assert report.read_text().splitlines()[-1].startswith("MEAN,1.000000,1.000000,0.000000,")
    assert len(pr.read_text().splitlines()) == 257


def test_eval_with_missing_predictions(tmp_path: Path) -> None:
    manifest = _synth(tmp_path, _config(tmp_path))
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["eval", "--pred", str(empty), "--data", str(manifest), "--out", str(tmp_path / "r.csv")]) == 5


def test_predict_rejects_corrupt_checkpoint(tmp_path: Path) -> None:
    manifest = _synth(tmp_path, _config(tmp_path))
    broken = tmp_path / "broken.ckpt"
    broken.write_bytes(b"NOTACKPT" + bytes(64))
    assert main(["predict", "--ckpt", str(broken), "--data", str(manifest), "--out", str(tmp_path / "p")]) == 4


def test_ablate(tmp_path: Path) -> None:
    config = _config(tmp_path, max_iters=2)
    manifest = _synth(tmp_path, config)
    out = tmp_path / "ablation"
    argv = ["ablate", "--config", str(config), "--data", str(manifest), "--out", str(out), "--seeds", "1"]
    assert main(argv + ["--variants", "a,e"]) == 0
    lines = (out / "ablation.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["a", "e"]
    assert main(argv + ["--variants", "a,x"]) == 2


@pytest.mark.parametrize(
    "error, code",
    [
        (ShapeError("tensor: bad dims"), 2),
        (ArityError("aggregate: missing input"), 2),
        (ConvSpecError("conv: bad stride"), 2),
        (GradCheckError("grad_check: non-finite"), 1),
    ],
)
def test_internal_errors_map_to_exit_codes(tmp_path: Path, mocker, error: Exception, code: int) -> None:
    config = tmp_path / "run.json"
    RunConfig(network=tiny_network()).dump(config)
    mocker.patch("pyamulet.cli.check_network", side_effect=error)
    assert main(["gradcheck", "--config", str(config)]) == code
