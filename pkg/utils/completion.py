"""
Motores de completamento por ADMM com etapa de suavização gaussiana.

O SMNN trabalha sobre um desdobramento modo-n do tensor e limiariza valores
singulares da matriz; o STNN trabalha sobre o próprio tensor e limiariza as
fatias do domínio transformado (t-SVD). Os dois compartilham o laço:

    X  <- SVT(Z - T/mu, lam/mu)
    Z  <- P_perp(X + T/mu) + P_Omega(Y)
    Z  <- gaussian(Z)                  (opcional, a cada n iterações)
    T  <- T + mu (X - Z)
    mu <- min(alpha mu, mu_max)

e param quando ||X_k+1 - X_k||_F / max(1, ||X_k||_F) <= tol. As entradas
observadas são reimpostas na saída final.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import pandas as pd
from scipy import ndimage

from utils.error_middleware import (DimensionError, EmptyMaskError, NumericalError, ParameterError,
                                    track_performance)
from utils.logger import log_convergence, log_data_processing, log_iteration
from utils.sampling import MaskLike, apply_mask, mask_array
from utils.tensor_core import as_tensor3, fold, matrix_svt, tensor_svt, unfold
from utils.validators import AdmmParams, Algorithm, TransformKind

HISTORY_COLUMNS = ("iter", "criterion", "data_fit", "mu")


@dataclass
class AdmmState:
    """Iterados de uma execução ADMM (matrizes no SMNN, tensores no STNN)."""
    X: np.ndarray
    Z: np.ndarray
    T: np.ndarray
    mu: float
    iteration: int = 0
    history: List[dict] = field(default_factory=list)


@dataclass
class CompletionReport:
    reconstruction: np.ndarray
    iterations_run: int
    converged: bool
    history: List[dict]
    wall_time: float
    algorithm: Algorithm = Algorithm.STNN

    def to_frame(self) -> pd.DataFrame:
        """Traço de convergência como DataFrame com colunas iter, criterion, data_fit, mu."""
        return pd.DataFrame(self.history, columns=list(HISTORY_COLUMNS))


# ---------------------------------------------------------------------------
# Passos individuais
# ---------------------------------------------------------------------------

def _check_mu(mu: float):
    if not mu > 0:
        raise ParameterError(f"mu deve ser positivo, recebeu {mu}")


def x_update_matrix(Z: np.ndarray, T: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """X = D_{lam/mu}(Z - T/mu)."""
    _check_mu(mu)
    return matrix_svt(Z - T / mu, lam / mu)


def x_update_tensor(Z: np.ndarray, T: np.ndarray, mu: float, lam: float,
                    kind: TransformKind = TransformKind.DFT) -> np.ndarray:
    """Versão tensorial de :func:`x_update_matrix` (limiarização t-SVD)."""
    _check_mu(mu)
    return tensor_svt(Z - T / mu, lam / mu, kind)


def z_update(X: np.ndarray, T: np.ndarray, mu: float, Y: np.ndarray,
             observed: np.ndarray) -> np.ndarray:
    """
    Entradas observadas recebem Y, as demais X + T/mu. ``observed`` é um
    array booleano compatível por broadcast com X (máscara H x W serve para H x W x C).
    """
    _check_mu(mu)
    if X.shape != Y.shape or X.shape != T.shape:
        raise DimensionError(f"formas dos iterados divergem: X {X.shape}, T {T.shape}, Y {Y.shape}")
    observed = np.asarray(observed, dtype=bool)
    if observed.ndim == 2 and X.ndim == 3:
        observed = observed[:, :, np.newaxis]
    try:
        return np.where(observed, Y, X + T / mu)
    except ValueError as e:
        raise DimensionError(f"máscara {observed.shape} incompatível por broadcast com {X.shape}") from e


def t_update(T: np.ndarray, X: np.ndarray, Z: np.ndarray, mu: float) -> np.ndarray:
    return T + mu * (X - Z)


def mu_update(mu: float, alpha: float, mu_max: float) -> float:
    if alpha <= 1:
        raise ParameterError(f"alpha deve ser > 1, recebeu {alpha}")
    return min(alpha * mu, mu_max)


def gaussian_smooth(x: np.ndarray, sigma: float) -> np.ndarray:
    """
    Filtro gaussiano 2-D por fatia frontal: meia-largura do núcleo ceil(2 sigma),
    bordas replicadas, núcleo normalizado.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma deve ser positivo, recebeu {sigma}")
    x = as_tensor3(x)
    radius = int(math.ceil(2 * sigma))
    return ndimage.gaussian_filter(x, sigma=(sigma, sigma, 0), mode="nearest", radius=radius)


# ---------------------------------------------------------------------------
# Laço compartilhado
# ---------------------------------------------------------------------------

def _run_admm(engine: str, y_obs: np.ndarray, observed: np.ndarray, params: AdmmParams,
              lam: float, x_step: Callable, smooth: Callable) -> AdmmState:
    state = AdmmState(X=y_obs.copy(), Z=y_obs.copy(), T=np.zeros_like(y_obs), mu=params.mu0)
    fully_observed = bool(observed.all())
    smoothing = params.smoothing

    for k in range(1, params.max_iters + 1):
        X_new = x_step(state.Z, state.T, state.mu, lam)
        Z = z_update(X_new, state.T, state.mu, y_obs, observed)
        if smoothing.enabled and k % smoothing.every_n_iters == 0:
            Z = smooth(Z)
        data_fit = float(np.linalg.norm(np.where(observed, Z - y_obs, 0.0)))
        T = t_update(state.T, X_new, Z, state.mu)
        criterion = float(np.linalg.norm(X_new - state.X) / max(1.0, np.linalg.norm(state.X)))

        state.history.append({"iter": k, "criterion": criterion, "data_fit": data_fit, "mu": state.mu})
        log_iteration(engine, k, criterion, data_fit, state.mu)
        if not math.isfinite(criterion) or criterion > params.divergence_limit:
            raise NumericalError(f"{engine} divergiu na iteração {k} (criterion={criterion})",
                                 history=state.history)

        state.X, state.Z, state.T = X_new, Z, T
        state.mu = mu_update(state.mu, params.alpha, params.mu_max)
        state.iteration = k
        if criterion <= params.tol or fully_observed:
            break
    return state


def _prepare(Y, mask: MaskLike, params: Optional[AdmmParams]):
    y = as_tensor3(Y, "Y")
    observed = mask_array(mask)
    if observed.shape != y.shape[:2]:
        raise DimensionError(f"máscara {observed.shape} incompatível com tensor {y.shape}")
    if not observed.any():
        raise EmptyMaskError("máscara sem nenhuma entrada observada")
    return y, observed, params or AdmmParams()


def _converged(state: AdmmState, params: AdmmParams, observed: np.ndarray) -> bool:
    if observed.all():
        return True
    return bool(state.history) and state.history[-1]["criterion"] <= params.tol


@track_performance(threshold_s=120.0)
def smnn_complete(Y, mask: MaskLike, params: Optional[AdmmParams] = None) -> CompletionReport:
    """
    Completamento por norma nuclear matricial suavizada sobre o desdobramento
    modo-``unfold_mode``. A suavização dobra Z de volta à forma da imagem, filtra
    cada fatia e desdobra de novo.
    """
    start = time.perf_counter()
    y, observed, params = _prepare(Y, mask, params)
    dims = y.shape
    mode = params.unfold_mode
    lam = params.resolved_lambda(dims)
    y_obs = unfold(apply_mask(y, observed), mode)
    observed_m = unfold(np.broadcast_to(observed[:, :, np.newaxis], dims).astype(float), mode) > 0.5

    def smooth(Z):
        return unfold(gaussian_smooth(fold(Z, mode, dims), params.smoothing.sigma), mode)

    state = _run_admm("smnn", y_obs, observed_m, params, lam, x_update_matrix, smooth)
    reconstruction = fold(np.where(observed_m, y_obs, state.X), mode, dims)
    return _report("smnn", Algorithm.SMNN, reconstruction, state, params, observed, start, dims)


@track_performance(threshold_s=120.0)
def stnn_complete(Y, mask: MaskLike, params: Optional[AdmmParams] = None) -> CompletionReport:
    """
    Completamento por norma nuclear tensorial suavizada: a atualização de X
    limiariza os valores singulares de cada fatia transformada.
    """
    start = time.perf_counter()
    y, observed, params = _prepare(Y, mask, params)
    dims = y.shape
    lam = params.resolved_lambda(dims)
    y_obs = apply_mask(y, observed)
    observed3 = np.broadcast_to(observed[:, :, np.newaxis], dims)

    def x_step(Z, T, mu, lam_):
        return x_update_tensor(Z, T, mu, lam_, params.transform)

    def smooth(Z):
        return gaussian_smooth(Z, params.smoothing.sigma)

    state = _run_admm("stnn", y_obs, observed3, params, lam, x_step, smooth)
    reconstruction = np.where(observed3, y_obs, state.X)
    return _report("stnn", Algorithm.STNN, reconstruction, state, params, observed, start, dims)


def _report(engine: str, algorithm: Algorithm, reconstruction: np.ndarray, state: AdmmState,
            params: AdmmParams, observed: np.ndarray, start: float, dims) -> CompletionReport:
    converged = _converged(state, params, observed)
    wall_time = time.perf_counter() - start
    log_convergence(engine, converged, state.iteration,
                    state.history[-1]["criterion"] if state.history else 0.0)
    log_data_processing(f"{engine}_complete", input_shape=dims, output_shape=reconstruction.shape,
                        duration=wall_time)
    return CompletionReport(reconstruction=reconstruction, iterations_run=state.iteration,
                            converged=converged, history=state.history, wall_time=wall_time,
                            algorithm=algorithm)


ENGINES = {Algorithm.SMNN: smnn_complete, Algorithm.STNN: stnn_complete}


def complete(Y, mask: MaskLike, algorithm: Algorithm = Algorithm.STNN,
             params: Optional[AdmmParams] = None) -> CompletionReport:
    """Despacha para o motor indicado por ``algorithm``."""
    return ENGINES[Algorithm(algorithm)](Y, mask, params)
