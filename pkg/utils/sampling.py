"""
Máscaras de observação Ω: uma amostra por superpixel (centroide, borda ou
multiestágio), amostragem uniforme aleatória, padrões estruturados de
remoção (círculos, linhas, riscos) e o operador de projeção P_Ω.

Amostrar um pixel mantém todos os canais daquela posição: a mesma máscara
2-D vale para todas as fatias frontais do tensor.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import ndimage
from skimage import draw

from utils.error_middleware import ConsistencyError, DimensionError, ParameterError
from utils.logger import log_debug, log_info
from utils.superpixel import LabelMap, LabImage, slic_segment, tensor_to_lab
from utils.tensor_core import as_tensor3
from utils.validators import (BoundaryStrategy, CentroidStrategy, CirclesPattern,
                              LinesPattern, MultiStageStrategy, ScratchesPattern,
                              SlicParams, SlicSection, UniformRandomStrategy)


@dataclass(frozen=True)
class SampleMask:
    """Indicador booleano H x W de pixels observados."""
    observed: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.observed)
        if arr.ndim != 2:
            raise DimensionError(f"máscara deve ser 2-D, recebeu {arr.shape}")
        object.__setattr__(self, "observed", arr.astype(bool))

    @property
    def dims(self) -> Tuple[int, int]:
        return tuple(self.observed.shape)

    @property
    def observed_count(self) -> int:
        return int(self.observed.sum())

    @property
    def missing_count(self) -> int:
        return int(self.observed.size - self.observed_count)

    @property
    def ratio(self) -> float:
        return self.observed_count / self.observed.size

    def complement(self) -> "SampleMask":
        return SampleMask(~self.observed)

    @classmethod
    def full(cls, dims: Tuple[int, int]) -> "SampleMask":
        return cls(np.ones(dims, dtype=bool))

    @classmethod
    def from_indices(cls, dims: Tuple[int, int], flat_indices: np.ndarray) -> "SampleMask":
        observed = np.zeros(dims[0] * dims[1], dtype=bool)
        observed[np.asarray(flat_indices, dtype=np.int64)] = True
        return cls(observed.reshape(dims))


MaskLike = Union[SampleMask, np.ndarray]


def mask_array(mask: MaskLike) -> np.ndarray:
    return mask.observed if isinstance(mask, SampleMask) else SampleMask(mask).observed


# ---------------------------------------------------------------------------
# Orçamento
# ---------------------------------------------------------------------------

def _check_ratio(ratio: float) -> float:
    if not (0 < ratio <= 1):
        raise ParameterError(f"razão de amostragem deve estar em (0, 1], recebeu {ratio}")
    return float(ratio)


def k_for_ratio(pixel_count: int, ratio: float) -> int:
    """K = round(ratio * N) (meio para cima), limitado a [1, N]."""
    ratio = _check_ratio(ratio)
    if pixel_count < 1:
        raise ParameterError(f"número de pixels deve ser positivo, recebeu {pixel_count}")
    return int(min(pixel_count, max(1, math.floor(ratio * pixel_count + 0.5))))


# ---------------------------------------------------------------------------
# Amostragem por superpixel
# ---------------------------------------------------------------------------

def _first_per_group(groups: np.ndarray, *keys: np.ndarray) -> np.ndarray:
    """Índice do menor elemento (por keys, em ordem de prioridade) de cada grupo."""
    order = np.lexsort(tuple(reversed(keys)) + (groups,))
    g = groups[order]
    first = np.ones(g.size, dtype=bool)
    first[1:] = g[1:] != g[:-1]
    return order[first]


def _cover_lines(flat: np.ndarray, pick_of: np.ndarray, mean_r: np.ndarray, mean_c: np.ndarray,
                 d2: np.ndarray, W: int) -> np.ndarray:
    """
    Linha ou coluna da imagem sem nenhuma amostra recebe a de um cluster que
    a cruza, desde que o novo pixel fique a no máximo 1 pixel do centroide em
    cada eixo e a linha e a coluna de origem continuem cobertas. Entre os
    candidatos vence o menor acréscimo de distância (empate: índice raster).
    Cada troca cobre uma linha nova sem descobrir outra, então o laço termina.
    """
    H = flat.size // W
    pick_of = pick_of.copy()
    row_count = np.bincount(pick_of // W, minlength=H)
    col_count = np.bincount(pick_of % W, minlength=W)
    moved = True
    while moved:
        moved = False
        for counts, lines in ((row_count, lambda r: np.arange(r * W, (r + 1) * W)),
                              (col_count, lambda c: np.arange(c, H * W, W))):
            for line in np.flatnonzero(counts == 0):
                if counts[line] > 0:
                    continue
                cand = lines(line)
                k = flat[cand]
                cr, cc = np.divmod(cand, W)
                pr, pc = np.divmod(pick_of[k], W)
                ok = (np.abs(cr - mean_r[k]) <= 1.0) & (np.abs(cc - mean_c[k]) <= 1.0)
                ok &= (pr == cr) | (row_count[pr] >= 2)
                ok &= (pc == cc) | (col_count[pc] >= 2)
                if not ok.any():
                    continue
                cand, k = cand[ok], k[ok]
                cost = d2[cand] - d2[pick_of[k]]
                best = np.lexsort((cand, cost))[0]
                old_r, old_c = divmod(int(pick_of[k[best]]), W)
                new_r, new_c = divmod(int(cand[best]), W)
                row_count[old_r] -= 1
                col_count[old_c] -= 1
                row_count[new_r] += 1
                col_count[new_c] += 1
                pick_of[k[best]] = cand[best]
                moved = True
    return pick_of


def _centroid_indices(labels: np.ndarray) -> np.ndarray:
    H, W = labels.shape
    flat = labels.ravel()
    K = int(flat.max()) + 1
    rows, cols = np.divmod(np.arange(flat.size), W)
    counts = np.bincount(flat, minlength=K).astype(float)
    mean_r = np.bincount(flat, weights=rows, minlength=K) / counts
    mean_c = np.bincount(flat, weights=cols, minlength=K) / counts
    d2 = (rows - mean_r[flat]) ** 2 + (cols - mean_c[flat]) ** 2
    # menor distância ao centroide; empate pelo índice raster
    picks = _first_per_group(flat, d2, np.arange(flat.size))
    pick_of = np.empty(K, dtype=np.int64)
    pick_of[flat[picks]] = picks
    return _cover_lines(flat, pick_of, mean_r, mean_c, d2, W)


def sample_centroid(labels: LabelMap) -> SampleMask:
    """
    Por cluster, o pixel membro mais próximo do centroide espacial. Com
    clusters de um ou dois pixels de lado, a escolha pode passar a um vizinho
    do centroide para que nenhuma linha ou coluna da imagem fique sem amostra.
    """
    picks = _centroid_indices(labels.labels)
    return SampleMask.from_indices(labels.shape, picks)


def boundary_pixels(labels: np.ndarray) -> np.ndarray:
    """Pixels com algum 4-vizinho em outro cluster ou na borda da imagem."""
    padded = np.pad(labels, 1, mode="constant", constant_values=-1)
    center = padded[1:-1, 1:-1]
    return ((padded[:-2, 1:-1] != center) | (padded[2:, 1:-1] != center)
            | (padded[1:-1, :-2] != center) | (padded[1:-1, 2:] != center))


def sample_boundary(labels: LabelMap) -> SampleMask:
    """Por cluster, o pixel de borda lexicograficamente menor (linha, coluna)."""
    lab = labels.labels
    flat = lab.ravel()
    on_border = boundary_pixels(lab).ravel()
    idx = np.flatnonzero(on_border)
    picks = _first_per_group(flat[idx], idx)
    if picks.size != labels.n_clusters:
        raise ConsistencyError("cluster sem pixel de borda")
    return SampleMask.from_indices(labels.shape, idx[picks])


def _leaf_members(lab: LabImage, member: np.ndarray, origin: Tuple[int, int],
                  stages_left: int, fraction: float, slic: SlicSection) -> List[np.ndarray]:
    """
    Sub-clusters folha de um cluster, como pares (linhas, colunas) globais.
    `lab` e `member` são recortes da imagem cujo canto superior é `origin`.
    """
    rows, cols = np.nonzero(member)
    size = rows.size
    k_sub = max(1, math.floor(fraction * size + 0.5))
    if stages_left == 0 or k_sub <= 1 or size == 1:
        return [np.stack([rows + origin[0], cols + origin[1]])]

    r0, r1, c0, c1 = rows.min(), rows.max() + 1, cols.min(), cols.max() + 1
    crop = lab[r0:r1, c0:c1]
    crop_member = member[r0:r1, c0:c1]
    params = SlicParams(n_segments=min(k_sub, crop_member.size),
                        compactness=slic.compactness, max_iters=slic.max_iters,
                        residual_threshold=slic.residual_threshold,
                        enforce_connectivity=slic.enforce_connectivity)
    sub = slic_segment(crop, params).labels
    child_origin = (origin[0] + r0, origin[1] + c0)
    leaves: List[np.ndarray] = []
    for value in np.unique(sub[crop_member]):
        leaves.extend(_leaf_members(crop, crop_member & (sub == value), child_origin,
                                    stages_left - 1, fraction, slic))
    return leaves


def sample_multistage(lab: LabImage, labels: LabelMap, stages: int = 2,
                      per_stage_fraction: float = 0.3,
                      slic: Optional[SlicSection] = None) -> SampleMask:
    """
    Re-clusteriza cada superpixel (SLIC completo em Lab-xy dentro da caixa
    envolvente, restrito ao cluster) até a profundidade `stages` e observa
    o centroide de cada sub-cluster folha, com a mesma regra de sample_centroid.
    """
    if stages < 2:
        raise ParameterError(f"stages deve ser >= 2, recebeu {stages}")
    if not (0 < per_stage_fraction <= 1):
        raise ParameterError(f"per_stage_fraction deve estar em (0, 1], recebeu {per_stage_fraction}")
    slic = slic or SlicSection()
    lab = np.asarray(lab, dtype=np.float64)
    if lab.shape[:2] != labels.shape:
        raise DimensionError(f"imagem Lab {lab.shape[:2]} e rótulos {labels.shape} divergem")

    leaf_labels = np.empty(labels.shape, dtype=np.int64)
    n_leaves = 0
    boxes = ndimage.find_objects(labels.labels + 1)
    for k, box in enumerate(boxes):
        member = labels.labels[box] == k
        origin = (box[0].start, box[1].start)
        for rows, cols in _leaf_members(lab[box], member, origin, stages - 1, per_stage_fraction, slic):
            leaf_labels[rows, cols] = n_leaves
            n_leaves += 1
    picks = _centroid_indices(leaf_labels)
    log_debug("Amostragem multiestágio", extra={"clusters": labels.n_clusters, "observed": n_leaves})
    return SampleMask.from_indices(labels.shape, picks)


# ---------------------------------------------------------------------------
# Aleatória e estruturada
# ---------------------------------------------------------------------------

def sample_uniform_random(dims: Tuple[int, int], ratio: float, seed: int = 0) -> SampleMask:
    """floor(ratio * H * W) pixels sorteados sem reposição."""
    ratio = _check_ratio(ratio)
    H, W = dims
    n = H * W
    # tolerância evita que 0.29 * 100 vire 28
    count = min(n, math.floor(ratio * n + 1e-9))
    rng = np.random.default_rng(seed)
    picks = rng.choice(n, size=count, replace=False)
    return SampleMask.from_indices((H, W), picks)


def _circles(dims, pattern: CirclesPattern, rng) -> np.ndarray:
    H, W = dims
    missing = np.zeros(dims, dtype=bool)
    rows, cols = np.mgrid[0:H, 0:W]
    r = pattern.radius
    for _ in range(pattern.count):
        lo_r, hi_r = min(r, (H - 1) // 2), max(min(r, (H - 1) // 2), H - 1 - r)
        lo_c, hi_c = min(r, (W - 1) // 2), max(min(r, (W - 1) // 2), W - 1 - r)
        r0 = rng.integers(lo_r, hi_r + 1)
        c0 = rng.integers(lo_c, hi_c + 1)
        missing |= (rows - r0) ** 2 + (cols - c0) ** 2 <= r * r
    return missing


def _lines(dims, pattern: LinesPattern, rng) -> np.ndarray:
    H, W = dims
    missing = np.zeros(dims, dtype=bool)
    extent = H if pattern.orientation == "horizontal" else W
    thickness = min(pattern.thickness, extent)
    for _ in range(pattern.count):
        start = rng.integers(0, extent - thickness + 1)
        if pattern.orientation == "horizontal":
            missing[start:start + thickness, :] = True
        else:
            missing[:, start:start + thickness] = True
    return missing


def _scratches(dims, pattern: ScratchesPattern, rng) -> np.ndarray:
    H, W = dims
    missing = np.zeros(dims, dtype=bool)
    for _ in range(pattern.count):
        r0 = rng.integers(0, H)
        c0 = rng.integers(0, W)
        angle = rng.uniform(0.0, np.pi)
        r1 = int(np.clip(round(r0 + pattern.length * np.sin(angle)), 0, H - 1))
        c1 = int(np.clip(round(c0 + pattern.length * np.cos(angle)), 0, W - 1))
        rr, cc = draw.line(int(r0), int(c0), r1, c1)
        missing[rr, cc] = True
    return missing


_PATTERNS = {"circles": _circles, "lines": _lines, "scratches": _scratches}


def structured_mask(dims: Tuple[int, int], pattern) -> SampleMask:
    """Máscara falsa dentro das formas rasterizadas, verdadeira no resto."""
    H, W = dims
    if H < 1 or W < 1:
        raise DimensionError(f"dimensões inválidas: {dims}")
    rng = np.random.default_rng(pattern.seed)
    missing = _PATTERNS[pattern.kind]((H, W), pattern, rng)
    log_debug("Máscara estruturada gerada", extra={"pattern": pattern.kind,
                                                   "missing": int(missing.sum())})
    return SampleMask(~missing)


# ---------------------------------------------------------------------------
# Projeção
# ---------------------------------------------------------------------------

def _check_dims(x: np.ndarray, observed: np.ndarray):
    if x.shape[:2] != observed.shape:
        raise DimensionError(f"máscara {observed.shape} incompatível com tensor {x.shape}")


def apply_mask(x, mask: MaskLike) -> np.ndarray:
    """P_Ω: mantém entradas observadas e zera as demais, em todas as fatias."""
    x = as_tensor3(x)
    observed = mask_array(mask)
    _check_dims(x, observed)
    return np.where(observed[:, :, np.newaxis], x, 0.0)


def apply_complement(x, mask: MaskLike) -> np.ndarray:
    """P_Ω⊥: mantém apenas as entradas não observadas."""
    x = as_tensor3(x)
    observed = mask_array(mask)
    _check_dims(x, observed)
    return np.where(observed[:, :, np.newaxis], 0.0, x)


# ---------------------------------------------------------------------------
# Despacho por estratégia
# ---------------------------------------------------------------------------

def sample_with_strategy(image: np.ndarray, strategy, ratio: Optional[float] = None,
                         n_segments: Optional[int] = None,
                         slic: Optional[SlicSection] = None) -> Tuple[SampleMask, Optional[LabelMap]]:
    """
    Gera a máscara de uma imagem segundo a estratégia. O orçamento é dado
    por `ratio` (K = k_for_ratio) ou diretamente por `n_segments`.
    Devolve também o LabelMap quando a estratégia usa superpixels.
    """
    x = as_tensor3(image, "image")
    H, W = x.shape[:2]
    N = H * W
    if ratio is None and n_segments is None:
        raise ParameterError("informe ratio ou n_segments")
    slic = slic or SlicSection()

    if isinstance(strategy, UniformRandomStrategy):
        effective = ratio if ratio is not None else min(1.0, n_segments / N)
        return sample_uniform_random((H, W), effective, strategy.seed), None

    K = n_segments if n_segments is not None else k_for_ratio(N, ratio)
    fraction = None
    if isinstance(strategy, MultiStageStrategy):
        target = ratio if ratio is not None else K / N
        fraction = strategy.per_stage_fraction or target
        # K no primeiro nível: cada superpixel gera ~branching amostras
        K = max(1, round(K / strategy.branching))

    lab = tensor_to_lab(x)
    params = SlicParams(n_segments=min(K, N), compactness=slic.compactness,
                        max_iters=slic.max_iters, residual_threshold=slic.residual_threshold,
                        enforce_connectivity=slic.enforce_connectivity)
    label_map = slic_segment(lab, params)

    if isinstance(strategy, CentroidStrategy):
        mask = sample_centroid(label_map)
    elif isinstance(strategy, BoundaryStrategy):
        mask = sample_boundary(label_map)
    elif isinstance(strategy, MultiStageStrategy):
        mask = sample_multistage(lab, label_map, strategy.stages, fraction, slic)
    else:
        raise ParameterError(f"estratégia desconhecida: {strategy!r}")

    log_info("Máscara de amostragem gerada", extra={
        "strategy": strategy.kind, "requested_k": K, "clusters": label_map.n_clusters,
        "observed": mask.observed_count, "ratio": round(mask.ratio, 6)})
    return mask, label_map
