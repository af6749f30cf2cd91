# app.py
"""
CLI do SPTC: amostragem por superpixels na origem e completamento na chegada.

Subcomandos:
    sample    gera máscara + CSV esparso de amostras a partir de uma imagem
    complete  reconstrói a imagem (SMNN ou STNN) a partir das amostras
    maskgen   gera máscaras estruturadas (círculos, linhas, riscos)
    eval      calcula PSNR / SSIM entre referência e reconstrução
    bench     roda uma grade de experimentos descrita em arquivo de configuração
    segment   exporta o mapa de rótulos SLIC e a sobreposição das fronteiras

Códigos de saída: 0 sucesso, 1 erro inesperado, 2 erro de uso/entrada, 3 falha numérica.
"""

import argparse
import math
import sys
from pathlib import Path
from typing import List, Optional, Tuple

# Adicionar o diretório raiz ao path se necessário
project_root = Path(__file__).parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from utils.benchmark import run_bench, write_bench
from utils.completion import complete
from utils.config_manager import ConfigManager
from utils.error_middleware import EXIT_USAGE, ParameterError, cli_error_boundary
from utils.image_io import (load_mask, load_samples_csv, load_tensor, save_history_csv,
                            save_label_map, save_mask, save_metrics_csv, save_overlay,
                            save_samples_csv, save_tensor)
from utils.logger import log_info
from utils.metrics import evaluate
from utils.sampling import apply_mask, k_for_ratio, sample_with_strategy, structured_mask
from utils.superpixel import segment_image
from utils.validators import (BoundaryStrategy, CentroidStrategy, CirclesPattern, LinesPattern,
                              MultiStageStrategy, ScratchesPattern, UniformRandomStrategy)

STRATEGIES = {
    "centroid": lambda a: CentroidStrategy(),
    "boundary": lambda a: BoundaryStrategy(),
    "multistage": lambda a: MultiStageStrategy(stages=a.stages,
                                               per_stage_fraction=a.per_stage_fraction),
    "uniform": lambda a: UniformRandomStrategy(seed=a.seed),
}

PATTERNS = {
    "circles": lambda a: CirclesPattern(count=a.count, radius=a.radius, seed=a.seed),
    "lines": lambda a: LinesPattern(count=a.count, thickness=a.thickness,
                                    orientation=a.orientation, seed=a.seed),
    "scratches": lambda a: ScratchesPattern(count=a.count, length=a.length, seed=a.seed),
}


def parse_shape(text: Optional[str]) -> Optional[Tuple[int, int]]:
    """'H,W' -> (H, W)."""
    if text is None:
        return None
    try:
        h, w = (int(v) for v in text.split(","))
    except ValueError:
        raise ParameterError(f"dimensões devem ser 'H,W', recebeu {text!r}")
    if h < 1 or w < 1:
        raise ParameterError(f"dimensões devem ser positivas, recebeu {text!r}")
    return h, w


# ---------------------------------------------------------------------------
# Subcomandos
# ---------------------------------------------------------------------------

@cli_error_boundary
def cmd_sample(args) -> int:
    manager = ConfigManager(config_dir=args.config_dir)
    overrides = {
        "inputs": args.images or None,
        "sampling.ratio": args.ratio,
        "sampling.n_segments": args.segments,
        "slic.compactness": args.compactness,
        "slic.max_iters": args.slic_iters,
        "outputs.mask": args.mask_out,
        "outputs.samples": args.samples_out,
    }
    if args.strategy:
        overrides["sampling.strategy"] = STRATEGIES[args.strategy](args).model_dump()
    config = manager.load_run_config(args.config, overrides)
    if not config.inputs:
        raise ParameterError("nenhuma imagem de entrada informada")

    image = load_tensor(config.inputs)
    sampling = config.sampling
    ratio = sampling.ratio if sampling.n_segments is None else None
    mask, label_map = sample_with_strategy(image, sampling.strategy, ratio=ratio,
                                           n_segments=sampling.n_segments, slic=config.slic)

    if config.outputs.mask:
        save_mask(mask, config.outputs.mask)
    if config.outputs.samples:
        save_samples_csv(image, mask, config.outputs.samples)
    clusters = label_map.n_clusters if label_map is not None else "-"
    print(f"observed={mask.observed_count} pixels={mask.observed.size} "
          f"ratio={mask.ratio:.6f} clusters={clusters}")
    return 0


@cli_error_boundary
def cmd_complete(args) -> int:
    manager = ConfigManager(config_dir=args.config_dir)
    params = {
        "lam": args.lam, "mu0": args.mu0, "alpha": args.alpha, "mu_max": args.mu_max,
        "tol": args.tol, "max_iters": args.max_iters, "transform": args.transform,
        "unfold_mode": args.unfold_mode, "smoothing.sigma": args.sigma,
        "smoothing.every_n_iters": args.smooth_every,
        "smoothing.enabled": False if args.no_smoothing else None,
    }
    overrides = {f"completion.params.{k}": v for k, v in params.items()}
    overrides.update({
        "completion.algorithm": args.algorithm,
        "outputs.reconstruction": args.output,
        "outputs.history": args.history,
    })
    config = manager.load_run_config(args.config, overrides)

    if args.samples:
        observed, mask = load_samples_csv(args.samples, parse_shape(args.shape))
    elif args.image and args.mask:
        mask = load_mask(args.mask)
        observed = apply_mask(load_tensor(args.image), mask)
    else:
        raise ParameterError("informe --samples ou --image com --mask")

    report = complete(observed, mask, config.completion.algorithm, config.completion.params)

    if config.outputs.reconstruction:
        save_tensor(report.reconstruction, config.outputs.reconstruction)
    if config.outputs.history:
        save_history_csv(report.to_frame(), config.outputs.history)
    print(f"algorithm={config.completion.algorithm.value} iterations={report.iterations_run} "
          f"converged={report.converged} wall_time={report.wall_time:.3f}s")
    if args.reference:
        metrics = evaluate(load_tensor(args.reference), report.reconstruction)
        print(f"psnr_db={metrics.psnr_db:.4f} ssim={metrics.ssim:.4f}")
    return 0


@cli_error_boundary
def cmd_maskgen(args) -> int:
    dims = parse_shape(args.shape)
    if dims is None:
        if not args.image:
            raise ParameterError("informe --shape H,W ou --image")
        dims = load_tensor(args.image).shape[:2]
    mask = structured_mask(dims, PATTERNS[args.pattern](args))
    save_mask(mask, args.output)
    print(f"missing={mask.missing_count} pixels={mask.observed.size}")
    return 0


@cli_error_boundary
def cmd_eval(args) -> int:
    report = evaluate(load_tensor(args.reference), load_tensor(args.reconstruction), peak=args.peak)
    row = report.as_row(args.reconstruction)
    print("file,psnr_db,ssim")
    psnr_text = "inf" if math.isinf(report.psnr_db) else f"{report.psnr_db:.4f}"
    print(f"{row['file']},{psnr_text},{report.ssim:.6f}")
    if args.output:
        save_metrics_csv([row], args.output, append=True)
    return 0


@cli_error_boundary
def cmd_bench(args) -> int:
    manager = ConfigManager(config_dir=args.config_dir)
    overrides = {"workers": args.workers} if args.workers is not None else None
    config = manager.load_bench_config(args.config, overrides)
    frame = run_bench(config)
    path = write_bench(frame, config, args.output, manager)
    failed = int((frame["status"] != "ok").sum())
    print(f"rows={len(frame)} failed={failed} csv={path}")
    return 0


@cli_error_boundary
def cmd_segment(args) -> int:
    image = load_tensor(args.image)
    n = image.shape[0] * image.shape[1]
    if args.segments is None and args.ratio is None:
        raise ParameterError("informe --segments ou --ratio")
    K = args.segments if args.segments is not None else k_for_ratio(n, args.ratio)
    label_map = segment_image(image, K, compactness=args.compactness, max_iters=args.slic_iters,
                              enforce=not args.no_connectivity)
    if args.labels_out:
        save_label_map(label_map.labels, args.labels_out)
    if args.overlay_out:
        save_overlay(image, label_map.labels, args.overlay_out)
    print(f"requested={K} clusters={label_map.n_clusters} iterations={len(label_map.residuals)}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_slic_flags(parser):
    parser.add_argument("--compactness", type=float, default=None, help="peso m do SLIC")
    parser.add_argument("--slic-iters", type=int, default=None, help="iterações máximas do SLIC")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sptc", description="Amostragem por superpixels e completamento tensorial")
    parser.add_argument("--config-dir", default="config", help="diretório de configurações")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="gera máscara e amostras esparsas")
    p.add_argument("images", nargs="*", help="imagem, manifesto ou lista de bandas")
    p.add_argument("--config", help="arquivo de configuração (YAML/JSON)")
    p.add_argument("--strategy", choices=sorted(STRATEGIES))
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--ratio", type=float)
    budget.add_argument("--segments", type=int, help="K de superpixels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stages", type=int, default=2)
    p.add_argument("--per-stage-fraction", type=float, default=None)
    _add_slic_flags(p)
    p.add_argument("--mask-out")
    p.add_argument("--samples-out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("complete", help="reconstrói a imagem a partir das amostras")
    p.add_argument("--config")
    p.add_argument("--samples", help="CSV esparso row,col,c0,...")
    p.add_argument("--shape", help="H,W da imagem (padrão: maior linha/coluna + 1)")
    p.add_argument("--image", help="imagem mascarada")
    p.add_argument("--mask", help="máscara (255 observado)")
    p.add_argument("--algorithm", choices=["smnn", "stnn"])
    p.add_argument("--lam", type=float)
    p.add_argument("--mu0", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mu-max", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--smooth-every", type=int)
    p.add_argument("--no-smoothing", action="store_true")
    p.add_argument("--transform", choices=["dft", "dct"])
    p.add_argument("--unfold-mode", type=int, choices=[1, 2, 3])
    p.add_argument("--output", help="PNG (ou manifesto multibanda) da reconstrução")
    p.add_argument("--history", help="CSV iter,criterion,data_fit,mu")
    p.add_argument("--reference", help="imagem original para relatar PSNR/SSIM")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("maskgen", help="gera máscara estruturada")
    p.add_argument("--shape")
    p.add_argument("--image")
    p.add_argument("--pattern", choices=sorted(PATTERNS), required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--thickness", type=int, default=1)
    p.add_argument("--orientation", choices=["horizontal", "vertical"], default="horizontal")
    p.add_argument("--length", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_maskgen)

    p = sub.add_parser("eval", help="PSNR / SSIM")
    p.add_argument("reference")
    p.add_argument("reconstruction")
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--output", help="CSV de métricas (acrescenta linhas)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="grade de experimentos")
    p.add_argument("config")
    p.add_argument("--output", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("segment", help="exporta rótulos SLIC e sobreposição")
    p.add_argument("image")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--segments", type=int)
    budget.add_argument("--ratio", type=float)
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--slic-iters", type=int, default=10)
    p.add_argument("--no-connectivity", action="store_true")
    p.add_argument("--labels-out")
    p.add_argument("--overlay-out")
    p.set_defaults(func=cmd_segment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    log_info("SPTC iniciado", extra={"command": args.command})
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
