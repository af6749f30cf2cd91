"""
Segmentação em superpixels (SLIC) sobre imagens CIELAB.

O agrupamento é um k-means no espaço (l, a, b, x, y) com janela de busca
limitada a 2S x 2S em torno de cada centro, onde S = sqrt(H*W/K).
A distância usada é

    D = sqrt(dl² + da² + db²) + (m / S) * sqrt(dx² + dy²)

com diferenças ao quadrado dentro das raízes (forma original do SLIC).
As coordenadas dos centros seguem a convenção x = coluna, y = linha.
"""

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.sparse.csgraph import connected_components
from skimage import color

from utils.error_middleware import ConsistencyError, DimensionError, ParameterError
from utils.logger import log_debug
from utils.validators import SlicParams

LabImage = np.ndarray

# Colunas da tabela de centros
CENTER_COLUMNS = ("l", "a", "b", "x", "y")

# Fragmentos de um único pixel nunca viram clusters próprios (relevante com S pequeno)
MIN_FRAGMENT = 2


@dataclass(frozen=True)
class LabelMap:
    """Resultado do SLIC: rótulo por pixel, tabela de centros e traço dos resíduos."""
    labels: np.ndarray
    centers: np.ndarray
    step: float
    requested: int
    residuals: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def n_clusters(self) -> int:
        return int(self.centers.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.labels.shape)

    def sizes(self) -> np.ndarray:
        """Número de pixels de cada cluster."""
        return np.bincount(self.labels.ravel(), minlength=self.n_clusters)


# ---------------------------------------------------------------------------
# Cor
# ---------------------------------------------------------------------------

def rgb_to_lab(rgb_image: np.ndarray) -> LabImage:
    """Converte uma imagem sRGB em [0,1] (H x W x 3) para CIELAB (D65)."""
    rgb = np.asarray(rgb_image, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"rgb_to_lab espera H x W x 3, recebeu {rgb.shape}")
    if rgb.size and (rgb.min() < -1e-9 or rgb.max() > 1 + 1e-9):
        raise ParameterError("valores RGB devem estar em [0, 1]")
    lab = color.rgb2lab(np.clip(rgb, 0.0, 1.0), illuminant="D65", observer="2")
    lab[..., 0] = np.clip(lab[..., 0], 0.0, 100.0)
    return lab


def tensor_to_lab(image: np.ndarray) -> LabImage:
    """
    Converte um tensor de imagem (H x W x C) para Lab. Com C != 3 a primeira
    fatia é tratada como tons de cinza e replicada nos três canais.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise DimensionError(f"imagem deve ser H x W x C, recebeu {arr.shape}")
    if arr.shape[2] != 3:
        arr = np.repeat(arr[:, :, :1], 3, axis=2)
    return rgb_to_lab(np.clip(arr, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Distância e gradiente
# ---------------------------------------------------------------------------

def slic_distance(pixel: Sequence[float], center: Sequence[float], m: float, S: float) -> float:
    """Distância SLIC entre dois vetores (l, a, b, x, y)."""
    if S <= 0:
        raise ParameterError(f"S deve ser positivo, recebeu {S}")
    p = np.asarray(pixel, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    if p.shape != (5,) or c.shape != (5,):
        raise DimensionError("pixel e centro devem ser vetores (l, a, b, x, y)")
    d_lab = np.sqrt(np.sum((p[:3] - c[:3]) ** 2))
    d_xy = np.sqrt(np.sum((p[3:] - c[3:]) ** 2))
    return float(d_lab + (m / S) * d_xy)


def gradient_map(lab: LabImage) -> np.ndarray:
    """
    G(x, y) = ||I(x+1, y) - I(x-1, y)||² + ||I(x, y+1) - I(x, y-1)||²
    sobre o vetor Lab, com bordas replicadas.
    """
    lab = _check_lab(lab)
    padded = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = padded[1:-1, 2:, :] - padded[1:-1, :-2, :]
    dy = padded[2:, 1:-1, :] - padded[:-2, 1:-1, :]
    return np.sum(dx ** 2, axis=2) + np.sum(dy ** 2, axis=2)


def image_gradient(lab: LabImage, pos: Tuple[int, int]) -> float:
    """Gradiente em uma posição (linha, coluna)."""
    lab = _check_lab(lab)
    row, col = pos
    if not (0 <= row < lab.shape[0] and 0 <= col < lab.shape[1]):
        raise ParameterError(f"posição {pos} fora da imagem {lab.shape[:2]}")
    return float(gradient_map(lab)[row, col])


def _check_lab(lab: LabImage) -> LabImage:
    lab = np.asarray(lab, dtype=np.float64)
    if lab.ndim != 3 or lab.shape[2] != 3:
        raise DimensionError(f"imagem Lab deve ser H x W x 3, recebeu {lab.shape}")
    if not np.all(np.isfinite(lab)):
        raise ParameterError("imagem Lab contém valores não finitos")
    return lab


# ---------------------------------------------------------------------------
# SLIC
# ---------------------------------------------------------------------------

def _seed_grid(K: int, H: int, W: int):
    """
    Exatamente K sementes: ny linhas da grade e, em cada linha, uma fatia
    de K distribuída por divisão inteira (linhas vizinhas diferem em no
    máximo uma semente). Devolve (linhas, colunas, passo_y, menor passo_x).
    """
    ny = max(1, min(H, K, max(math.ceil(K / W), round(math.sqrt(K * H / W)))))
    per_row = np.diff(np.arange(ny + 1) * K // ny)
    step_y = H / ny
    rows = np.floor((np.arange(ny) + 0.5) * step_y).astype(int)
    cy = np.repeat(rows, per_row)
    cx = np.concatenate([np.floor((np.arange(nx) + 0.5) * (W / nx)).astype(int) for nx in per_row])
    return cy, cx, step_y, W / int(per_row.max())


def _initial_centers(lab: LabImage, K: int, grad: np.ndarray, window: int) -> np.ndarray:
    H, W = lab.shape[:2]
    cy, cx, step_y, step_x = _seed_grid(K, H, W)

    if min(step_y, step_x) >= window and window > 1:
        half = window // 2
        offsets = [(0, 0)] + [(dy, dx) for dy in range(-half, half + 1)
                              for dx in range(-half, half + 1) if (dy, dx) != (0, 0)]
        cand_y = np.stack([np.clip(cy + dy, 0, H - 1) for dy, _ in offsets])
        cand_x = np.stack([np.clip(cx + dx, 0, W - 1) for _, dx in offsets])
        # argmin devolve a primeira ocorrência: empate mantém o centro da grade
        best = np.argmin(grad[cand_y, cand_x], axis=0)
        pick = np.arange(cy.size)
        cy, cx = cand_y[best, pick], cand_x[best, pick]

    return np.column_stack([lab[cy, cx, :], cx.astype(float), cy.astype(float)])


def _assign(features: np.ndarray, centers: np.ndarray, H: int, W: int, S: float, m: float) -> np.ndarray:
    """
    Atribui cada pixel ao centro mais próximo entre aqueles cuja janela
    2S x 2S (|dx| <= S e |dy| <= S) o contém. Pixel fora de todas as janelas
    fica com o centro de menor distância de Chebyshev.
    """
    radius = int(math.ceil(S)) + 1
    K = centers.shape[0]
    cy = np.clip(np.rint(centers[:, 4]).astype(int), 0, H - 1)
    cx = np.clip(np.rint(centers[:, 3]).astype(int), 0, W - 1)
    spatial_weight = m / S

    idx_parts: List[np.ndarray] = []
    dist_parts: List[np.ndarray] = []
    k_parts: List[np.ndarray] = []

    def add(rows, cols, ks):
        flat = rows * W + cols
        feats = features[flat]
        ctr = centers[ks]
        inside = np.all(np.abs(feats[:, 3:] - ctr[:, 3:]) <= S, axis=1)
        flat, feats, ctr, ks = flat[inside], feats[inside], ctr[inside], ks[inside]
        d_lab = np.sqrt(np.sum((feats[:, :3] - ctr[:, :3]) ** 2, axis=1))
        d_xy = np.sqrt(np.sum((feats[:, 3:] - ctr[:, 3:]) ** 2, axis=1))
        idx_parts.append(flat)
        dist_parts.append(d_lab + spatial_weight * d_xy)
        k_parts.append(ks)

    n_offsets = (2 * radius + 1) ** 2
    if K <= n_offsets:
        # poucos centros: varre as janelas centro a centro
        for k in range(K):
            r0, r1 = max(0, cy[k] - radius), min(H, cy[k] + radius + 1)
            c0, c1 = max(0, cx[k] - radius), min(W, cx[k] + radius + 1)
            rr, cc = np.mgrid[r0:r1, c0:c1]
            add(rr.ravel(), cc.ravel(), np.full(rr.size, k))
    else:
        all_k = np.arange(K)
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                rows, cols = cy + dy, cx + dx
                ok = (rows >= 0) & (rows < H) & (cols >= 0) & (cols < W)
                add(rows[ok], cols[ok], all_k[ok])

    idx = np.concatenate(idx_parts)
    dist = np.concatenate(dist_parts)
    ks = np.concatenate(k_parts)
    # ordena por pixel, depois distância, depois índice do cluster (desempate)
    order = np.lexsort((ks, dist, idx))
    idx, ks = idx[order], ks[order]
    first = np.ones(idx.size, dtype=bool)
    first[1:] = idx[1:] != idx[:-1]

    new_labels = np.full(H * W, -1, dtype=np.int64)
    new_labels[idx[first]] = ks[first]
    uncovered = np.flatnonzero(new_labels < 0)
    if uncovered.size:
        _, nearest = cKDTree(centers[:, 3:]).query(features[uncovered, 3:], p=np.inf)
        new_labels[uncovered] = nearest
    return new_labels.reshape(H, W)


def _update_centers(features: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    K = centers.shape[0]
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=K).astype(float)
    new_centers = centers.copy()
    filled = counts > 0
    for j in range(features.shape[1]):
        sums = np.bincount(flat, weights=features[:, j], minlength=K)
        new_centers[filled, j] = sums[filled] / counts[filled]
    return new_centers


def _neighbor_edges(H: int, W: int) -> Tuple[np.ndarray, np.ndarray]:
    """Pares (p, q) de 4-vizinhos em ordem raster, cada aresta uma vez."""
    grid = np.arange(H * W).reshape(H, W)
    p = np.concatenate([grid[:, :-1].ravel(), grid[:-1, :].ravel()])
    q = np.concatenate([grid[:, 1:].ravel(), grid[1:, :].ravel()])
    return p, q


def _components(flat_labels: np.ndarray, p: np.ndarray, q: np.ndarray, n: int):
    same = flat_labels[p] == flat_labels[q]
    graph = sparse.coo_matrix((np.ones(int(same.sum())), (p[same], q[same])), shape=(n, n))
    return connected_components(graph.tocsr(), directed=False)


def _relabel_raster(flat_labels: np.ndarray) -> np.ndarray:
    """Renumera rótulos pela ordem de primeira aparição em varredura raster."""
    _, first_idx, inverse = np.unique(flat_labels, return_index=True, return_inverse=True)
    rank = np.empty(first_idx.size, dtype=np.int64)
    rank[np.argsort(first_idx, kind="stable")] = np.arange(first_idx.size)
    return rank[inverse.ravel()]


def enforce_connectivity(labels: np.ndarray, S: float) -> np.ndarray:
    """
    Garante clusters conexos. Para cada rótulo mantém o maior componente
    (e qualquer componente com pelo menos max(S²/4, 2) pixels); fragmentos menores
    são incorporados ao vizinho já estável com quem compartilham mais arestas
    (empate: menor rótulo). Componentes finais viram clusters distintos.
    """
    H, W = labels.shape
    n = H * W
    flat = labels.ravel().astype(np.int64)
    p, q = _neighbor_edges(H, W)
    n_comp, comp = _components(flat, p, q, n)

    comp_label = np.empty(n_comp, dtype=np.int64)
    comp_label[comp] = flat
    comp_size = np.bincount(comp, minlength=n_comp)
    order = np.lexsort((np.arange(n_comp), -comp_size, comp_label))
    largest = np.ones(n_comp, dtype=bool)
    largest[1:] = comp_label[order][1:] != comp_label[order][:-1]
    keep = np.zeros(n_comp, dtype=bool)
    keep[order[largest]] = True
    keep |= comp_size >= max(S * S / 4.0, MIN_FRAGMENT)

    settled = keep[comp]
    both_p = np.concatenate([p, q])
    both_q = np.concatenate([q, p])
    n_labels = int(flat.max()) + 1
    while not settled.all():
        sel = ~settled[both_p] & settled[both_q]
        if not sel.any():
            raise ConsistencyError("fragmentos de superpixel sem vizinho estável")
        keys = comp[both_p[sel]] * n_labels + flat[both_q[sel]]
        uniq, counts = np.unique(keys, return_counts=True)
        c_of, l_of = uniq // n_labels, uniq % n_labels
        choice = np.lexsort((l_of, -counts, c_of))
        first = np.ones(choice.size, dtype=bool)
        first[1:] = c_of[choice][1:] != c_of[choice][:-1]
        target = np.full(n_comp, -1, dtype=np.int64)
        target[c_of[choice][first]] = l_of[choice][first]
        moving = ~settled & (target[comp] >= 0)
        flat[moving] = target[comp[moving]]
        settled |= moving

    _, final_comp = _components(flat, p, q, n)
    return _relabel_raster(final_comp).reshape(H, W)


def _features(lab: LabImage) -> np.ndarray:
    H, W = lab.shape[:2]
    rows, cols = np.mgrid[0:H, 0:W]
    return np.column_stack([lab.reshape(-1, 3), cols.ravel().astype(float), rows.ravel().astype(float)])


def slic_segment(lab: LabImage, params: SlicParams) -> LabelMap:
    """
    SLIC: exatamente K sementes em grade de passo ~S, perturbação para o menor
    gradiente numa janela n x n, e iterações de atribuição/atualização até
    o resíduo L1 dos centros ficar abaixo do limiar ou atingir max_iters.
    Uma última atribuição usa os centros finais. Sem a etapa de conectividade,
    `centers` são exatamente esses centros; com ela, a média de cada componente.
    """
    start = time.perf_counter()
    lab = _check_lab(lab)
    H, W = lab.shape[:2]
    K = params.n_segments
    if K > H * W:
        raise ParameterError(f"n_segments={K} excede o número de pixels ({H * W})")

    S = math.sqrt(H * W / K)
    features = _features(lab)
    centers = _initial_centers(lab, K, gradient_map(lab), params.perturb_window)

    residuals: List[float] = []
    for _ in range(params.max_iters):
        labels = _assign(features, centers, H, W, S, params.compactness)
        new_centers = _update_centers(features, labels, centers)
        residual = float(np.abs(new_centers - centers).sum())
        centers = new_centers
        residuals.append(residual)
        if residual < params.residual_threshold:
            break

    # rótulos coerentes com os centros finais
    labels = _assign(features, centers, H, W, S, params.compactness)
    if params.enforce_connectivity:
        labels = enforce_connectivity(labels, S)
        n_final = int(labels.max()) + 1
        final_centers = _update_centers(features, labels, np.zeros((n_final, 5)))
    else:
        flat = labels.ravel()
        relabeled = _relabel_raster(flat)
        n_final = int(relabeled.max()) + 1
        final_centers = np.empty((n_final, 5))
        final_centers[relabeled] = centers[flat]
        labels = relabeled.reshape(H, W)

    result = LabelMap(labels=labels, centers=final_centers, step=S,
                      requested=K, residuals=tuple(residuals))

    log_debug("SLIC concluído", extra={"shape": (H, W), "requested": K, "actual": n_final,
                                       "iterations": len(residuals),
                                       "residual": residuals[-1] if residuals else None,
                                       "duration_s": round(time.perf_counter() - start, 6)})
    return result


def segment_image(image: np.ndarray, n_segments: int, compactness: float = 10.0,
                  max_iters: int = 10, residual_threshold: float = 1.0,
                  enforce: bool = True, lab: Optional[LabImage] = None) -> LabelMap:
    """Atalho: converte para Lab (se necessário) e roda o SLIC."""
    params = SlicParams(n_segments=n_segments, compactness=compactness, max_iters=max_iters,
                        residual_threshold=residual_threshold, enforce_connectivity=enforce)
    return slic_segment(tensor_to_lab(image) if lab is None else lab, params)
