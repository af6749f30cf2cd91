import json

import numpy as np
import pandas as pd
import pytest

import app
from utils.image_io import load_image, load_mask, save_mask, save_png, save_samples_csv
from utils.sampling import SampleMask, sample_with_strategy
from utils.validators import CentroidStrategy


def run(capsys, *argv):
    """Executa a CLI e devolve (código, stdout, stderr)"""
    code = app.main(["--config-dir", "cfg", *map(str, argv)])
    out, err = capsys.readouterr()
    return code, out, err


def fields(line):
    return dict(item.split("=", 1) for item in line.split())


@pytest.fixture
def image_file(workdir, astronaut):
    return save_png(astronaut[:64, :64], workdir / "img.png")


@pytest.mark.integration
class TestSampleCommand:
    """Subcomando sample"""

    def test_centroid_ratio(self, capsys, image_file):
        code, out, _ = run(capsys, "sample", image_file, "--strategy", "centroid", "--ratio", "0.3",
                           "--mask-out", "out/mask.png", "--samples-out", "out/samples.csv")
        assert code == 0
        info = fields(out.strip().splitlines()[-1])
        rows = len(pd.read_csv("out/samples.csv"))
        assert rows == int(info["observed"])
        assert abs(rows - 0.3 * 64 * 64) <= 0.02 * 64 * 64
        assert load_mask("out/mask.png").observed_count == rows

    def test_full_ratio(self, capsys, image_file):
        code, out, _ = run(capsys, "sample", image_file, "--ratio", "1.0", "--mask-out", "m.png")
        assert code == 0
        assert load_mask("m.png").observed.all()

    def test_uniform_strategy(self, capsys, image_file):
        code, out, _ = run(capsys, "sample", image_file, "--strategy", "uniform", "--seed", "3",
                           "--ratio", "0.25", "--mask-out", "m.png")
        assert code == 0
        assert fields(out.strip().splitlines()[-1])["clusters"] == "-"
        assert load_mask("m.png").observed_count == 1024

    def test_bad_ratio(self, capsys, image_file):
        code, _, err = run(capsys, "sample", image_file, "--ratio", "1.5")
        assert code == 2
        assert "error" in err

    def test_missing_image(self, capsys, workdir):
        code, _, _ = run(capsys, "sample", "nada.png", "--ratio", "0.3")
        assert code == 2

    def test_config_file_and_overrides(self, capsys, image_file):
        config = {"inputs": [str(image_file)], "sampling": {"strategy": {"kind": "boundary"}, "ratio": 0.1},
                  "outputs": {"mask": "from_config.png"}}
        with open("run.json", "w") as f:
            json.dump(config, f)
        code, _, _ = run(capsys, "sample", "--config", "run.json", "--segments", "50")
        assert code == 0
        mask = load_mask("from_config.png")
        assert 40 <= mask.observed_count <= 60


@pytest.mark.integration
class TestCompleteCommand:
    """Subcomando complete"""

    def test_fully_observed_round_trip(self, capsys, image_file):
        assert run(capsys, "sample", image_file, "--ratio", "1.0", "--samples-out", "s.csv")[0] == 0
        code, _, _ = run(capsys, "complete", "--samples", "s.csv", "--output", "rec.png",
                         "--history", "h.csv")
        assert code == 0
        np.testing.assert_array_equal(load_image("rec.png"), load_image(image_file))
        assert list(pd.read_csv("h.csv").columns) == ["iter", "criterion", "data_fit", "mu"]

    def test_observed_pixels_survive(self, capsys, image_file):
        run(capsys, "sample", image_file, "--ratio", "0.3", "--mask-out", "m.png", "--samples-out", "s.csv")
        code, out, _ = run(capsys, "complete", "--samples", "s.csv", "--shape", "64,64",
                           "--max-iters", "30", "--algorithm", "smnn", "--output", "rec.png")
        assert code == 0
        assert fields(out.strip().splitlines()[-1])["algorithm"] == "smnn"
        mask = load_mask("m.png").observed
        np.testing.assert_array_equal(load_image("rec.png")[mask], load_image(image_file)[mask])

    def test_tubal_rank_one_end_to_end(self, capsys, workdir, rank1_tensor):
        mask, _ = sample_with_strategy(rank1_tensor, CentroidStrategy(), ratio=0.6)
        save_samples_csv(rank1_tensor, mask, "s.csv")
        save_png(rank1_tensor, "ref.png")
        code, out, _ = run(capsys, "complete", "--samples", "s.csv", "--shape", "16,16",
                           "--no-smoothing", "--reference", "ref.png", "--output", "rec.png")
        assert code == 0
        metrics = fields(out.strip().splitlines()[-1])
        assert float(metrics["psnr_db"]) > 40.0

    def test_image_and_mask_inputs(self, capsys, image_file):
        save_mask(SampleMask(np.indices((64, 64)).sum(axis=0) % 2 == 0), "m.png")
        code, _, _ = run(capsys, "complete", "--image", image_file, "--mask", "m.png",
                         "--max-iters", "10", "--output", "rec.png")
        assert code == 0

    def test_missing_mask_file(self, capsys, image_file):
        code, _, _ = run(capsys, "complete", "--image", image_file, "--mask", "nada.png")
        assert code == 2

    def test_empty_mask_is_numerical_failure(self, capsys, image_file):
        save_mask(np.zeros((64, 64), dtype=bool), "m.png")
        code, _, err = run(capsys, "complete", "--image", image_file, "--mask", "m.png")
        assert code == 3
        assert "error" in err

    def test_divergence_exit_code(self, capsys, image_file):
        save_mask(np.indices((64, 64))[0] % 2 == 0, "m.png")
        cfg = {"completion": {"params": {"divergence_limit": 1e-12}}}
        with open("div.json", "w") as f:
            json.dump(cfg, f)
        code, _, err = run(capsys, "complete", "--config", "div.json", "--image", image_file,
                           "--mask", "m.png")
        assert code == 3
        assert "numerical failure" in err

    def test_requires_input(self, capsys, workdir):
        assert run(capsys, "complete")[0] == 2

    def test_unexpected_failure(self, capsys, mocker, image_file):
        save_mask(SampleMask.full((64, 64)), "m.png")
        engine = mocker.patch("app.complete", side_effect=RuntimeError("boom"))
        code, _, err = run(capsys, "complete", "--image", image_file, "--mask", "m.png")
        assert code == 1
        assert "unexpected failure: boom" in err
        engine.assert_called_once()


@pytest.mark.integration
class TestMaskgenCommand:
    """Subcomando maskgen"""

    @pytest.mark.parametrize("flags, zeros", [
        (["--pattern", "lines", "--count", "1", "--thickness", "1"], 64),
        (["--pattern", "circles", "--count", "1", "--radius", "0"], 1),
        (["--pattern", "circles", "--count", "1", "--radius", "5"], 81),
    ])
    def test_patterns(self, capsys, workdir, flags, zeros):
        code, out, _ = run(capsys, "maskgen", "--shape", "64,64", *flags, "--output", "m.png")
        assert code == 0
        assert load_mask("m.png").missing_count == zeros
        assert fields(out.strip())["missing"] == str(zeros)

    def test_shape_from_image(self, capsys, image_file):
        code, _, _ = run(capsys, "maskgen", "--image", image_file, "--pattern", "scratches",
                         "--count", "2", "--output", "m.png")
        assert code == 0
        assert load_mask("m.png").dims == (64, 64)

    def test_bad_shape(self, capsys, workdir):
        assert run(capsys, "maskgen", "--shape", "64x64", "--pattern", "lines", "--output", "m.png")[0] == 2


@pytest.mark.integration
class TestEvalCommand:
    """Subcomando eval"""

    def test_identical(self, capsys, image_file):
        code, out, _ = run(capsys, "eval", image_file, image_file)
        assert code == 0
        header, row = out.strip().splitlines()[-2:]
        assert header == "file,psnr_db,ssim"
        assert row.split(",")[1:] == ["inf", "1.000000"]

    def test_constant_pair(self, capsys, workdir):
        save_png(np.zeros((16, 16, 1)), "zero.png")
        save_png(np.full((16, 16, 1), 128 / 255), "half.png")
        code, out, _ = run(capsys, "eval", "zero.png", "half.png", "--output", "metrics.csv")
        assert code == 0
        _, psnr_text, ssim_text = out.strip().splitlines()[-1].split(",")
        assert float(psnr_text) == pytest.approx(20 * np.log10(255 / 128), abs=1e-3)
        assert float(ssim_text) < 1.0
        assert pd.read_csv("metrics.csv").shape == (1, 3)

    def test_missing_file(self, capsys, image_file):
        assert run(capsys, "eval", image_file, "nada.png")[0] == 2

    def test_dimension_mismatch(self, capsys, image_file):
        save_png(np.zeros((32, 32, 3)), "small.png")
        assert run(capsys, "eval", image_file, "small.png")[0] == 2


@pytest.mark.integration
class TestBenchAndSegmentCommands:
    """Subcomandos bench e segment"""

    def _config(self, image_file):
        config = {"images": [str(image_file)], "strategies": [{"kind": "centroid"}, {"kind": "uniform"}],
                  "ratios": [0.5], "algorithms": ["stnn"], "params": {"max_iters": 15}}
        with open("bench.json", "w") as f:
            json.dump(config, f)
        return "bench.json"

    def test_grid_cardinality_and_determinism(self, capsys, image_file):
        config = self._config(image_file)
        assert run(capsys, "bench", config, "--output", "a/bench.csv")[0] == 0
        assert run(capsys, "bench", config, "--output", "b/bench.csv", "--workers", "2")[0] == 0
        frame = pd.read_csv("a/bench.csv")
        assert len(frame) == 2
        assert frame["strategy"].tolist() == ["centroid", "uniform"]
        assert (frame["status"] == "ok").all()
        with open("a/bench.csv", "rb") as a, open("b/bench.csv", "rb") as b:
            assert a.read() == b.read()

    def test_segment_exports(self, capsys, image_file):
        code, out, _ = run(capsys, "segment", image_file, "--segments", "40",
                           "--labels-out", "labels.png", "--overlay-out", "overlay.png")
        assert code == 0
        info = fields(out.strip().splitlines()[-1])
        assert info["requested"] == "40"
        assert load_image("overlay.png").shape == (64, 64, 3)

    def test_segment_needs_budget(self, capsys, image_file):
        assert run(capsys, "segment", image_file)[0] == 2


@pytest.mark.unit
def test_unknown_subcommand_is_usage_error(capsys):
    assert app.main(["voar"]) == 2
