"""
Álgebra de tensores de terceira ordem usada pelos motores de completamento.

Tensores são ``numpy.ndarray`` comuns de forma (I1, I2, I3) e dtype
float64. Toda operação é função pura das entradas.

Convenções
----------
* O desdobramento modo-n segue a ordem de Kolda: no modo 1 a coluna da
  entrada (i1, i2, i3) é ``i2 + I2 * i3`` (modo 2: ``i1 + I1 * i3``; modo 3:
  ``i1 + I1 * i2``).
* A transformada DFT é a FFT não normalizada ao longo do modo 3: os produtos
  fatia a fatia no domínio transformado reproduzem o t-produto circulante e a
  primeira fatia transformada é a soma das fatias frontais. A transformada DCT
  é a DCT-II ortonormal.
* Nenhuma escala 1/I3 é aplicada à norma nuclear tensorial nem ao limiar
  da SVT.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
import scipy.fft

from utils.error_middleware import ConsistencyError, DimensionError, ParameterError
from utils.validators import TransformKind

Tensor3 = np.ndarray
SpectralTensor3 = np.ndarray

IMAG_RESIDUE_RTOL = 1e-8
IMAG_RESIDUE_ATOL = 1e-12
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class TSvdFactors:
    """
    Fatores da t-SVD truncada: X ~= U * S * V^T.

    ``singular_values`` guarda as diagonais de S no domínio transformado, forma
    (rank, I3), não negativas. As fatias espaciais de S são diagonais.
    """
    U: Tensor3
    S: Tensor3
    V: Tensor3
    rank: int
    singular_values: np.ndarray
    kind: TransformKind = TransformKind.DFT

    def reconstruct(self) -> Tensor3:
        return t_product(t_product(self.U, self.S, self.kind), t_transpose(self.V, self.kind), self.kind)


def _kind(kind: Union[TransformKind, str]) -> TransformKind:
    try:
        return TransformKind(kind)
    except ValueError:
        raise ParameterError(f"transformada desconhecida: {kind!r}")


def as_tensor3(x, name: str = "x") -> Tensor3:
    """Valida e converte para array float64 finito de 3 vias; entrada 2-D ganha I3 = 1."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise DimensionError(f"{name} deve ser um array de 3 vias não vazio, recebeu forma {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contém valores não finitos")
    return arr


def _check_mode(mode: int) -> int:
    if mode not in (1, 2, 3):
        raise DimensionError(f"modo deve ser 1, 2 ou 3, recebeu {mode}")
    return mode


# ---------------------------------------------------------------------------
# Desdobramento, produto interno, norma
# ---------------------------------------------------------------------------

def unfold(x: Tensor3, mode: int) -> np.ndarray:
    """Desdobramento modo-n (ordem de Kolda); as linhas indexam o modo n."""
    x = as_tensor3(x)
    axis = _check_mode(mode) - 1
    return np.reshape(np.moveaxis(x, axis, 0), (x.shape[axis], -1), order="F")


def fold(m: np.ndarray, mode: int, dims: Tuple[int, int, int]) -> Tensor3:
    """Inversa de :func:`unfold` para um tensor de forma ``dims``."""
    axis = _check_mode(mode) - 1
    m = np.asarray(m)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise DimensionError(f"dims deve ter 3 entradas, recebeu {dims}")
    rest = int(np.prod([d for k, d in enumerate(dims) if k != axis]))
    if m.shape != (dims[axis], rest):
        raise DimensionError(f"matriz de forma {m.shape} não dobra em {dims} no modo {mode}")
    moved_shape = (dims[axis],) + tuple(d for k, d in enumerate(dims) if k != axis)
    return np.moveaxis(np.reshape(m, moved_shape, order="F"), 0, axis)


def inner(x: Tensor3, y: Tensor3) -> float:
    x, y = as_tensor3(x, "x"), as_tensor3(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"produto interno de formas diferentes {x.shape} e {y.shape}")
    return float(np.vdot(x, y))


def fro_norm(x: Tensor3) -> float:
    x = as_tensor3(x)
    return float(np.sqrt(max(inner(x, x), 0.0)))


# ---------------------------------------------------------------------------
# Transformadas no modo 3
# ---------------------------------------------------------------------------

def mode3_transform(x: Tensor3, kind: TransformKind = TransformKind.DFT) -> SpectralTensor3:
    """Aplica a transformada do modo 3 a cada tubo x(i, j, :) separadamente."""
    x = as_tensor3(x)
    if _kind(kind) is TransformKind.DFT:
        return scipy.fft.fft(x, axis=2)
    return scipy.fft.dct(x, type=2, norm="ortho", axis=2)


def mode3_inverse(s: SpectralTensor3, kind: TransformKind = TransformKind.DFT) -> Tensor3:
    """
    Transformada inversa do modo 3. Na DFT o resíduo imaginário precisa ficar abaixo de
    ``1e-8 * ||parte real||_F`` (mais um piso absoluto mínimo) e é descartado.
    """
    s = np.asarray(s)
    if s.ndim != 3:
        raise DimensionError(f"tensor espectral deve ter 3 vias, recebeu forma {s.shape}")
    if _kind(kind) is TransformKind.DCT:
        return np.real(scipy.fft.idct(s, type=2, norm="ortho", axis=2))
    out = scipy.fft.ifft(s, axis=2)
    real = np.ascontiguousarray(out.real)
    residue = np.linalg.norm(out.imag)
    if residue > IMAG_RESIDUE_RTOL * np.linalg.norm(real) + IMAG_RESIDUE_ATOL:
        raise ConsistencyError(f"resíduo imaginário {residue:.3e} após a DFT inversa não é desprezível")
    return real


def _computed_slices(n3: int, kind: TransformKind) -> int:
    # DFT de tensor real: as fatias k e n3-k são conjugadas, então só as
    # fatias 0..n3//2 precisam de decomposição.
    return n3 // 2 + 1 if kind is TransformKind.DFT else n3


def _self_conjugate(k: int, n3: int) -> bool:
    return k == 0 or (n3 % 2 == 0 and k == n3 // 2)


def _half_stack(xh: SpectralTensor3, kind: TransformKind) -> np.ndarray:
    """Fatias do domínio transformado que precisam de cálculo, empilhadas como (h, I1, I2)."""
    h = _computed_slices(xh.shape[2], kind)
    return np.moveaxis(xh[:, :, :h], 2, 0)


def _full_from_half(stack: np.ndarray, n3: int, kind: TransformKind) -> SpectralTensor3:
    """Remonta fatias (h, A, B) num tensor espectral (A, B, n3), espelhando as conjugadas."""
    half = np.moveaxis(stack, 0, 2)
    if kind is not TransformKind.DFT:
        return half
    h = stack.shape[0]
    full = np.empty(half.shape[:2] + (n3,), dtype=np.complex128)
    full[:, :, :h] = half
    for k in range(h):
        if _self_conjugate(k, n3):
            full[:, :, k] = full[:, :, k].real
    for k in range(h, n3):
        full[:, :, k] = np.conj(full[:, :, n3 - k])
    return full


# ---------------------------------------------------------------------------
# Álgebra do t-produto
# ---------------------------------------------------------------------------

def t_product(x: Tensor3, y: Tensor3, kind: TransformKind = TransformKind.DFT) -> Tensor3:
    """t-produto: produtos matriciais fatia a fatia no domínio transformado."""
    kind = _kind(kind)
    x, y = as_tensor3(x, "x"), as_tensor3(y, "y")
    if x.shape[1] != y.shape[0] or x.shape[2] != y.shape[2]:
        raise DimensionError(f"t-produto de formas não conformes {x.shape} e {y.shape}")
    xh = mode3_transform(x, kind)
    yh = mode3_transform(y, kind)
    return mode3_inverse(np.einsum("ijk,jlk->ilk", xh, yh), kind)


def t_transpose(x: Tensor3, kind: TransformKind = TransformKind.DFT) -> Tensor3:
    """
    Transposta tensorial. DFT: transpõe cada fatia frontal e inverte a ordem
    das fatias 2..I3. DCT: transposta fatia a fatia.
    """
    x = as_tensor3(x)
    xt = np.transpose(x, (1, 0, 2))
    if _kind(kind) is TransformKind.DCT:
        return np.ascontiguousarray(xt)
    return np.concatenate([xt[:, :, :1], xt[:, :, :0:-1]], axis=2)


def t_identity(n: int, n3: int, kind: TransformKind = TransformKind.DFT) -> Tensor3:
    """Tensor identidade: toda fatia transformada é I_n (DFT: primeira fatia I_n, demais zero)."""
    if n < 1 or n3 < 1:
        raise ParameterError(f"dimensões da identidade devem ser positivas, recebeu n={n}, I3={n3}")
    kind = _kind(kind)
    if kind is TransformKind.DFT:
        eye = np.zeros((n, n, n3))
        eye[:, :, 0] = np.eye(n)
        return eye
    return mode3_inverse(np.repeat(np.eye(n)[:, :, np.newaxis], n3, axis=2), kind)


def t_svd(x: Tensor3, rank: int, kind: TransformKind = TransformKind.DFT) -> TSvdFactors:
    """t-SVD truncada: SVD por fatia no domínio transformado, truncada em ``rank``."""
    kind = _kind(kind)
    x = as_tensor3(x)
    n1, n2, n3 = x.shape
    if not 1 <= rank <= min(n1, n2):
        raise ParameterError(f"rank deve estar em [1, {min(n1, n2)}], recebeu {rank}")

    stack = _half_stack(mode3_transform(x, kind), kind)
    h = stack.shape[0]
    dtype = np.complex128 if kind is TransformKind.DFT else np.float64
    u = np.zeros((h, n1, rank), dtype=dtype)
    v = np.zeros((h, n2, rank), dtype=dtype)
    s = np.zeros((h, rank))
    for k in range(h):
        slice_k = stack[k]
        if kind is TransformKind.DFT and _self_conjugate(k, n3):
            # fatia real: fatores reais mantêm a DFT inversa real
            slice_k = slice_k.real
        u_k, s_k, vh_k = np.linalg.svd(slice_k, full_matrices=False)
        u[k] = u_k[:, :rank]
        s[k] = s_k[:rank]
        v[k] = np.conj(vh_k[:rank, :]).T
    s_diag = np.zeros((h, rank, rank), dtype=dtype)
    idx = np.arange(rank)
    s_diag[:, idx, idx] = s

    U = mode3_inverse(_full_from_half(u, n3, kind), kind)
    S = mode3_inverse(_full_from_half(s_diag, n3, kind), kind)
    V = mode3_inverse(_full_from_half(v, n3, kind), kind)
    sv_full = np.real(_full_from_half(s[:, np.newaxis, :], n3, kind))[0]
    return TSvdFactors(U=U, S=S, V=V, rank=rank, singular_values=sv_full, kind=kind)


def _slice_singular_values(x: Tensor3, kind: TransformKind) -> np.ndarray:
    stack = _half_stack(mode3_transform(x, kind), kind)
    return np.linalg.svd(stack, compute_uv=False)


def tubal_rank(x: Tensor3, kind: TransformKind = TransformKind.DFT) -> int:
    """Maior posto entre as fatias transformadas, tolerância 1e-8 * sigma_max."""
    x = as_tensor3(x)
    sv = _slice_singular_values(x, _kind(kind))
    sigma_max = float(sv.max()) if sv.size else 0.0
    if sigma_max == 0.0:
        return 0
    return int((sv > RANK_RTOL * sigma_max).sum(axis=1).max())


def tnn(x: Tensor3) -> float:
    """
    Norma nuclear tensorial: norma nuclear da primeira fatia DFT, que é a soma
    das fatias frontais. Igual à soma dos traços das fatias espaciais do núcleo da t-SVD.
    """
    x = as_tensor3(x)
    return float(np.linalg.svd(x.sum(axis=2), compute_uv=False).sum())


# ---------------------------------------------------------------------------
# Limiarização de valores singulares
# ---------------------------------------------------------------------------

def _svt_stack(stack: np.ndarray, beta: float) -> np.ndarray:
    u, s, vh = np.linalg.svd(stack, full_matrices=False)
    shrunk = np.maximum(s - beta, 0.0)
    return np.matmul(u * shrunk[..., np.newaxis, :], vh)


def matrix_svt(m: np.ndarray, beta: float) -> np.ndarray:
    """D_beta(M) = U diag(max(sigma - beta, 0)) V^T, o operador proximal de beta*||.||_*."""
    if beta < 0:
        raise ParameterError(f"limiar deve ser não negativo, recebeu {beta}")
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"matrix_svt espera array 2-D, recebeu forma {m.shape}")
    return _svt_stack(m, float(beta))


def tensor_svt(x: Tensor3, beta: float, kind: TransformKind = TransformKind.DFT) -> Tensor3:
    """SVT tensorial: SVT matricial em cada fatia transformada, depois a transformada inversa."""
    if beta < 0:
        raise ParameterError(f"limiar deve ser não negativo, recebeu {beta}")
    kind = _kind(kind)
    x = as_tensor3(x)
    stack = _half_stack(mode3_transform(x, kind), kind)
    return mode3_inverse(_full_from_half(_svt_stack(stack, float(beta)), x.shape[2], kind), kind)
