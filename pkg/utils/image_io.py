"""
Leitura e escrita de imagens, máscaras, amostras esparsas e CSVs de resultados.

Imagens são sempre devolvidas como tensores H x W x C em float64 no
intervalo [0, 1]. Entradas multibanda são manifestos (lista YAML/JSON ou um
caminho por linha) de imagens de um canal, empilhadas na ordem listada.
Nomes no formato "builtin:<nome>" carregam imagens de skimage.data.
"""

from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from PIL import Image
from skimage import data as skdata
from skimage import transform
from skimage.segmentation import mark_boundaries

from utils.error_middleware import DimensionError, ParameterError
from utils.logger import log_debug, log_info
from utils.sampling import SampleMask, mask_array
from utils.tensor_core import as_tensor3

PathLike = Union[str, Path]

MANIFEST_SUFFIXES = {".txt", ".lst", ".yml", ".yaml", ".json"}
BUILTIN_PREFIX = "builtin:"


# ---------------------------------------------------------------------------
# Leitura de imagens
# ---------------------------------------------------------------------------

def _normalize(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == bool:
        out = arr.astype(np.float64)
    elif np.issubdtype(arr.dtype, np.integer):
        out = arr.astype(np.float64) / float(np.iinfo(arr.dtype).max)
    else:
        out = np.clip(arr.astype(np.float64), 0.0, 1.0)
    return out if out.ndim == 3 else out[:, :, np.newaxis]


def _load_pillow(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(img, dtype=np.uint32)
            return np.clip(arr / 65535.0, 0.0, 1.0)[:, :, np.newaxis]
        if img.mode not in ("L", "RGB"):
            img = img.convert("L" if img.mode in ("1", "LA") else "RGB")
        return _normalize(np.asarray(img))


def _load_builtin(name: str) -> np.ndarray:
    loader = getattr(skdata, name, None)
    if loader is None or not callable(loader):
        raise ParameterError(f"imagem embutida desconhecida: {name}")
    arr = np.asarray(loader())
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return _normalize(arr)


def load_image(path: PathLike) -> np.ndarray:
    """Lê uma imagem (PNG, PPM/PGM ou builtin:<nome>) como tensor H x W x C em [0, 1]."""
    text = str(path)
    if text.startswith(BUILTIN_PREFIX):
        tensor = _load_builtin(text[len(BUILTIN_PREFIX):])
    else:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"imagem não encontrada: {p}")
        tensor = _load_pillow(p)
    log_debug("Imagem carregada", extra={"path": text, "shape": tensor.shape})
    return tensor


def read_manifest(path: PathLike) -> List[Path]:
    """Caminhos listados num manifesto, relativos ao diretório do manifesto."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"manifesto não encontrado: {p}")
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() in {".yml", ".yaml", ".json"}:
        entries = yaml.safe_load(text) or []
        if isinstance(entries, dict):
            entries = entries.get("bands", [])
    else:
        entries = [line.strip() for line in text.splitlines()
                   if line.strip() and not line.strip().startswith("#")]
    if not isinstance(entries, list) or not entries:
        raise ParameterError(f"manifesto vazio ou inválido: {p}")
    return [Path(e) if Path(e).is_absolute() else p.parent / e for e in map(str, entries)]


def stack_bands(paths: Sequence[PathLike]) -> np.ndarray:
    """Empilha imagens de um canal (as de três canais entram como luminância)."""
    bands = []
    for band_path in paths:
        band = load_image(band_path)
        if band.shape[2] != 1:
            band = band.mean(axis=2, keepdims=True)
        bands.append(band)
    shapes = {b.shape[:2] for b in bands}
    if len(shapes) != 1:
        raise DimensionError(f"bandas com dimensões diferentes: {sorted(shapes)}")
    return np.concatenate(bands, axis=2)


def resize_image(tensor: np.ndarray, side: int) -> np.ndarray:
    """Redimensiona para side x side (com anti-aliasing)."""
    out = transform.resize(tensor, (side, side, tensor.shape[2]), anti_aliasing=True,
                           preserve_range=True)
    return np.clip(out, 0.0, 1.0)


def load_tensor(inputs: Union[PathLike, Sequence[PathLike]], resize: Optional[int] = None) -> np.ndarray:
    """
    Carrega a entrada da CLI: uma imagem, um manifesto multibanda ou uma
    lista ordenada de imagens de um canal.
    """
    items = [inputs] if isinstance(inputs, (str, Path)) else list(inputs)
    if not items:
        raise ParameterError("nenhuma imagem de entrada informada")
    if len(items) > 1:
        tensor = stack_bands(items)
    elif not str(items[0]).startswith(BUILTIN_PREFIX) and Path(items[0]).suffix.lower() in MANIFEST_SUFFIXES:
        tensor = stack_bands(read_manifest(items[0]))
    else:
        tensor = load_image(items[0])
    if resize is not None:
        tensor = resize_image(tensor, resize)
    return tensor


# ---------------------------------------------------------------------------
# Escrita de imagens
# ---------------------------------------------------------------------------

def quantize(x: np.ndarray) -> np.ndarray:
    """round(clip(x, 0, 1) * 255) em uint8."""
    return np.rint(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)


def _ensure_parent(path: PathLike) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def save_png(tensor: np.ndarray, path: PathLike) -> Path:
    """Salva um tensor de 1 ou 3 canais como PNG de 8 bits."""
    x = as_tensor3(tensor)
    if x.shape[2] not in (1, 3):
        raise DimensionError(f"PNG aceita 1 ou 3 canais, recebeu {x.shape[2]}")
    p = _ensure_parent(path)
    q = quantize(x)
    Image.fromarray(q[:, :, 0] if x.shape[2] == 1 else q).save(p)
    return p


def save_tensor(tensor: np.ndarray, path: PathLike) -> List[Path]:
    """
    Salva uma reconstrução. Com 1 ou 3 canais e sufixo de imagem escreve um
    PNG; caso contrário escreve uma banda por arquivo e um manifesto em `path`.
    """
    x = as_tensor3(tensor)
    p = Path(path)
    if x.shape[2] in (1, 3) and p.suffix.lower() not in MANIFEST_SUFFIXES:
        return [save_png(x, p)]
    manifest = _ensure_parent(p if p.suffix.lower() in MANIFEST_SUFFIXES else p.with_suffix(".txt"))
    written = []
    for band in range(x.shape[2]):
        band_path = manifest.with_name(f"{manifest.stem}_band{band:03d}.png")
        written.append(save_png(x[:, :, band:band + 1], band_path))
    manifest.write_text("\n".join(b.name for b in written) + "\n", encoding="utf-8")
    return [manifest] + written


# ---------------------------------------------------------------------------
# Máscaras
# ---------------------------------------------------------------------------

def save_mask(mask, path: PathLike) -> Path:
    """Máscara de 8 bits: 255 observado, 0 ausente."""
    observed = mask_array(mask)
    p = _ensure_parent(path)
    Image.fromarray(np.where(observed, 255, 0).astype(np.uint8)).save(p)
    return p


def load_mask(path: PathLike) -> SampleMask:
    """Lê uma máscara; valores >= 128 contam como observados."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"máscara não encontrada: {p}")
    with Image.open(p) as img:
        arr = np.asarray(img.convert("L"))
    return SampleMask(arr >= 128)


# ---------------------------------------------------------------------------
# Amostras esparsas
# ---------------------------------------------------------------------------

def samples_frame(tensor: np.ndarray, mask) -> pd.DataFrame:
    """Tabela row, col, c0, c1, ... dos pixels observados em ordem raster."""
    x = as_tensor3(tensor)
    observed = mask_array(mask)
    if observed.shape != x.shape[:2]:
        raise DimensionError(f"máscara {observed.shape} incompatível com tensor {x.shape}")
    rows, cols = np.nonzero(observed)
    frame = pd.DataFrame({"row": rows, "col": cols})
    for c in range(x.shape[2]):
        frame[f"c{c}"] = x[rows, cols, c]
    return frame


def save_samples_csv(tensor: np.ndarray, mask, path: PathLike) -> Path:
    """CSV esparso com 17 dígitos significativos (sem perda para float64)."""
    p = _ensure_parent(path)
    samples_frame(tensor, mask).to_csv(p, index=False, float_format="%.17g")
    log_info("Amostras salvas", extra={"path": str(p)})
    return p


def load_samples_csv(path: PathLike, shape: Optional[Tuple[int, int]] = None) -> Tuple[np.ndarray, SampleMask]:
    """
    Reconstrói o tensor observado P_Ω(Y) e a máscara a partir do CSV esparso.
    Sem `shape`, as dimensões são (max(row) + 1, max(col) + 1).
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"arquivo de amostras não encontrado: {p}")
    frame = pd.read_csv(p, float_precision="round_trip")
    channels = [c for c in frame.columns if c.startswith("c") and c[1:].isdigit()]
    if "row" not in frame.columns or "col" not in frame.columns or not channels:
        raise ParameterError(f"cabeçalho inválido em {p}: esperado row,col,c0[,c1,...]")
    channels.sort(key=lambda c: int(c[1:]))
    rows = frame["row"].to_numpy(dtype=np.int64)
    cols = frame["col"].to_numpy(dtype=np.int64)
    if shape is None:
        if frame.empty:
            raise ParameterError("arquivo de amostras vazio e sem dimensões informadas")
        shape = (int(rows.max()) + 1, int(cols.max()) + 1)
    H, W = shape
    if frame.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= H or cols.max() >= W):
        raise DimensionError(f"amostras fora das dimensões {shape}")
    tensor = np.zeros((H, W, len(channels)))
    tensor[rows, cols, :] = frame[channels].to_numpy(dtype=np.float64)
    observed = np.zeros((H, W), dtype=bool)
    observed[rows, cols] = True
    return tensor, SampleMask(observed)


# ---------------------------------------------------------------------------
# CSVs de resultados
# ---------------------------------------------------------------------------

def save_history_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """Histórico de convergência: iter,criterion,data_fit,mu."""
    p = _ensure_parent(path)
    frame.to_csv(p, index=False, float_format="%.17g")
    return p


def save_metrics_csv(rows: Iterable[dict], path: PathLike, append: bool = False) -> Path:
    """Escreve (ou acrescenta) linhas de métricas; PSNR infinito sai como 'inf'."""
    p = _ensure_parent(path)
    frame = pd.DataFrame(list(rows))
    write_header = not (append and p.exists())
    frame.to_csv(p, index=False, mode="a" if append else "w", header=write_header,
                 float_format="%.10g")
    return p


# ---------------------------------------------------------------------------
# Exportação de depuração da segmentação
# ---------------------------------------------------------------------------

def save_label_map(labels: np.ndarray, path: PathLike) -> Path:
    """Mapa de rótulos como PNG de 16 bits em tons de cinza."""
    labels = np.asarray(labels)
    if labels.max() > np.iinfo(np.uint16).max:
        raise ParameterError(f"{int(labels.max()) + 1} rótulos não cabem em 16 bits")
    p = _ensure_parent(path)
    Image.fromarray(labels.astype(np.uint16)).save(p)
    return p


def save_overlay(image: np.ndarray, labels: np.ndarray, path: PathLike) -> Path:
    """Fronteiras dos superpixels desenhadas sobre a imagem (RGB)."""
    x = as_tensor3(image)
    rgb = x if x.shape[2] == 3 else np.repeat(x[:, :, :1], 3, axis=2)
    overlay = mark_boundaries(rgb, labels, color=(1, 1, 0), mode="inner")
    return save_png(overlay, path)
