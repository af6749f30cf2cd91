"""
Executor da grade de experimentos do comando `bench`.

Cada célula (imagem, estratégia ou padrão, razão, algoritmo, semente,
suavização) amostra, completa e avalia de forma isolada. As células podem
rodar em paralelo, mas as linhas do CSV saem na ordem da configuração.
Falhas de uma célula ficam registradas na própria linha.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from utils.completion import complete
from utils.config_manager import ConfigManager
from utils.error_middleware import track_performance
from utils.image_io import load_tensor
from utils.logger import log_error, log_info, log_operation
from utils.metrics import psnr, ssim
from utils.sampling import apply_mask, sample_with_strategy, structured_mask
from utils.validators import Algorithm, BenchConfig, UniformRandomStrategy

BENCH_COLUMNS = ["image", "strategy", "ratio", "algorithm", "seed", "smoothing",
                 "observed_ratio", "psnr_db", "ssim", "iterations", "converged",
                 "status", "error"]


@dataclass(frozen=True)
class BenchCell:
    image: str
    source: object          # estratégia de amostragem ou padrão estruturado
    ratio: Optional[float]
    algorithm: Algorithm
    seed: int
    smoothing: bool


def build_cells(config: BenchConfig) -> List[BenchCell]:
    """Expande a grade na ordem: imagem > estratégia/padrão > razão > algoritmo > semente > suavização."""
    cells = []
    for image in config.images:
        for strategy in config.strategies:
            for ratio in config.ratios:
                for algorithm in config.algorithms:
                    for seed in config.seeds:
                        for smoothing in config.smoothing:
                            cells.append(BenchCell(image, strategy, ratio, algorithm, seed, smoothing))
        for pattern in config.patterns:
            for algorithm in config.algorithms:
                for seed in config.seeds:
                    for smoothing in config.smoothing:
                        cells.append(BenchCell(image, pattern, None, algorithm, seed, smoothing))
    return cells


def _cell_mask(image: np.ndarray, cell: BenchCell, config: BenchConfig):
    source = cell.source
    if cell.ratio is None:
        return structured_mask(image.shape[:2], source.model_copy(update={"seed": cell.seed}))
    if isinstance(source, UniformRandomStrategy):
        source = source.model_copy(update={"seed": cell.seed})
    mask, _ = sample_with_strategy(image, source, ratio=cell.ratio, slic=config.slic)
    return mask


def run_cell(image: np.ndarray, cell: BenchCell, config: BenchConfig) -> Dict:
    """Executa uma célula e devolve a linha do CSV."""
    row = {"image": cell.image, "strategy": cell.source.kind,
           "ratio": cell.ratio if cell.ratio is not None else float("nan"),
           "algorithm": cell.algorithm.value, "seed": cell.seed, "smoothing": cell.smoothing}
    start = time.perf_counter()
    try:
        mask = _cell_mask(image, cell, config)
        smoothing = config.params.smoothing.model_copy(update={"enabled": cell.smoothing})
        params = config.params.model_copy(update={"smoothing": smoothing})
        report = complete(apply_mask(image, mask), mask, cell.algorithm, params)
        row.update(observed_ratio=mask.ratio,
                   psnr_db=psnr(image, report.reconstruction),
                   ssim=ssim(image, report.reconstruction),
                   iterations=report.iterations_run, converged=report.converged,
                   status="ok", error="")
    except Exception as e:
        log_error("Falha em célula do bench", extra={**row, "error": str(e)})
        row.update(observed_ratio=float("nan"), psnr_db=float("nan"), ssim=float("nan"),
                   iterations=0, converged=False, status="failed", error=str(e))
    row["wall_time_s"] = time.perf_counter() - start
    return row


@track_performance(threshold_s=600.0)
def run_bench(config: BenchConfig, images: Optional[Dict[str, np.ndarray]] = None) -> pd.DataFrame:
    """Roda a grade completa; as imagens são carregadas uma única vez."""
    if images is None:
        images = {name: load_tensor(name, resize=config.resize) for name in config.images}
    cells = build_cells(config)
    log_operation("bench", {"cells": len(cells), "workers": config.workers})

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_cell, images[c.image], c, config) for c in cells]
            rows = [f.result() for f in futures]
    else:
        rows = [run_cell(images[c.image], c, config) for c in cells]

    columns = BENCH_COLUMNS + (["wall_time_s"] if config.record_wall_time else [])
    frame = pd.DataFrame(rows)[columns]
    failed = int((frame["status"] != "ok").sum())
    log_info("Bench concluído", extra={"rows": len(frame), "failed": failed})
    return frame


def write_bench(frame: pd.DataFrame, config: BenchConfig, output: str,
                config_manager: Optional[ConfigManager] = None) -> Path:
    """Salva o CSV e, ao lado, a configuração validada (registro de reprodutibilidade)."""
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g")
    manager = config_manager or ConfigManager(config_dir=str(path.parent))
    manager.save_config(config, str(path.with_suffix(".config.yml")))
    return path


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """PSNR/SSIM médios por estratégia, razão e algoritmo (células com sucesso)."""
    ok = frame[frame["status"] == "ok"].copy()
    ok["ratio"] = ok["ratio"].fillna(-1.0)
    summary = (ok.groupby(["strategy", "ratio", "algorithm", "smoothing"], sort=False)
                 [["psnr_db", "ssim"]].mean().reset_index())
    summary["ratio"] = summary["ratio"].where(summary["ratio"] >= 0, math.nan)
    return summary
