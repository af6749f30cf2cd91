import math

import numpy as np
import pandas as pd
import pytest
import yaml

from utils.benchmark import BENCH_COLUMNS, build_cells, run_bench, summarize, write_bench
from utils.validators import BenchConfig, CentroidStrategy, CirclesPattern, UniformRandomStrategy


@pytest.fixture
def small_images(astronaut):
    return {"astro": astronaut[:32, :32]}


def make_config(**kwargs):
    base = {"images": ["astro"], "ratios": [0.5], "params": {"max_iters": 10}}
    base.update(kwargs)
    return BenchConfig(**base)


@pytest.mark.unit
class TestGrid:
    """Expansão da grade de experimentos"""

    def test_cardinality(self):
        config = make_config(strategies=[CentroidStrategy(), UniformRandomStrategy()],
                             ratios=[0.5, 0.3], algorithms=["stnn", "smnn"], seeds=[0, 1],
                             smoothing=[True, False], patterns=[CirclesPattern()])
        cells = build_cells(config)
        assert len(cells) == 2 * 2 * 2 * 2 * 2 + 1 * 2 * 2 * 2

    def test_order_and_pattern_cells(self):
        config = make_config(strategies=[CentroidStrategy(), UniformRandomStrategy()],
                             patterns=[CirclesPattern(radius=2)])
        cells = build_cells(config)
        assert [c.source.kind for c in cells] == ["centroid", "uniform", "circles"]
        assert cells[-1].ratio is None


@pytest.mark.integration
class TestRunBench:
    """Execução da grade"""

    def test_rows_follow_config_order(self, small_images):
        config = make_config(strategies=[CentroidStrategy(), UniformRandomStrategy()],
                             patterns=[CirclesPattern(radius=3)])
        frame = run_bench(config, small_images)
        assert list(frame.columns) == BENCH_COLUMNS
        assert frame["strategy"].tolist() == ["centroid", "uniform", "circles"]
        assert (frame["status"] == "ok").all()
        assert math.isnan(frame["ratio"].iloc[-1])
        assert frame["observed_ratio"].iloc[1] == pytest.approx(0.5)

    def test_parallel_matches_serial(self, small_images):
        config = make_config(strategies=[CentroidStrategy(), UniformRandomStrategy()], seeds=[0, 1])
        serial = run_bench(config, small_images)
        parallel = run_bench(config.model_copy(update={"workers": 3}), small_images)
        pd.testing.assert_frame_equal(serial, parallel)

    def test_failed_cell_is_recorded(self, small_images):
        images = {"astro": small_images["astro"], "tiny": np.full((8, 8, 3), 0.5)}
        config = make_config(images=["tiny", "astro"])
        frame = run_bench(config, images)
        assert frame["status"].tolist() == ["failed", "ok"]
        assert "SSIM" in frame["error"].iloc[0]
        assert math.isnan(frame["psnr_db"].iloc[0])

    def test_wall_time_is_opt_in(self, small_images):
        frame = run_bench(make_config(record_wall_time=True), small_images)
        assert frame.columns[-1] == "wall_time_s"
        assert (frame["wall_time_s"] > 0).all()

    def test_write_saves_config(self, tmp_path, small_images):
        config = make_config()
        frame = run_bench(config, small_images)
        path = write_bench(frame, config, str(tmp_path / "out" / "bench.csv"))
        assert pd.read_csv(path).shape[0] == 1
        saved = yaml.safe_load((tmp_path / "out" / "bench.config.yml").read_text())
        assert BenchConfig(**saved) == config

    def test_summary(self, small_images):
        config = make_config(strategies=[CentroidStrategy()], smoothing=[True, False],
                             patterns=[CirclesPattern(radius=2)])
        summary = summarize(run_bench(config, small_images))
        assert len(summary) == 4
        assert set(summary.columns) >= {"strategy", "ratio", "algorithm", "psnr_db", "ssim"}
