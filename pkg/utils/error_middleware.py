"""
Tratamento centralizado de erros do SPTC.

Define a hierarquia de exceções da biblioteca e o "error boundary" dos
subcomandos da CLI, que converte exceções em códigos de saída:

    0  sucesso
    1  erro inesperado
    2  erro de uso / entrada (parâmetros, dimensões, arquivos)
    3  falha numérica (máscara vazia, divergência)
"""

import functools
import sys
import time
from typing import Callable, List, Optional

from pydantic import ValidationError

from utils.logger import log_critical, log_error, log_performance, log_warning

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class SPTCError(Exception):
    """Erro base do SPTC."""


class DimensionError(SPTCError, ValueError):
    """Dimensões incompatíveis entre tensores, máscaras ou matrizes."""


class ParameterError(SPTCError, ValueError):
    """Parâmetro fora do domínio válido."""


class EmptyMaskError(ParameterError):
    """Máscara sem nenhuma entrada observada."""


class NumericalError(SPTCError, RuntimeError):
    """
    Falha numérica (critério não finito ou acima do limite de divergência).
    Carrega o histórico de iterações registrado até a falha.
    """

    def __init__(self, message: str, history: Optional[List[dict]] = None):
        super().__init__(message)
        self.history = list(history or [])


class ConsistencyError(SPTCError, RuntimeError):
    """Violação de consistência interna (ex.: resíduo imaginário após DFT inversa)."""


def format_validation_error(validation_error: ValidationError) -> str:
    """Formata erros de validação pydantic como 'campo: mensagem; ...'."""
    parts = []
    for error in validation_error.errors():
        field = '.'.join(str(loc) for loc in error['loc']) or '<root>'
        parts.append(f"{field}: {error['msg']}")
    return "; ".join(parts)


def exit_code_for(exc: BaseException) -> int:
    """Mapeia uma exceção para o código de saída da CLI."""
    if isinstance(exc, (EmptyMaskError, NumericalError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ValidationError, SPTCError, FileNotFoundError, OSError, ValueError)):
        return EXIT_USAGE
    return EXIT_UNEXPECTED


def cli_error_boundary(func: Callable[..., int]) -> Callable[..., int]:
    """
    Decorator para subcomandos da CLI: captura exceções, registra no log,
    escreve um diagnóstico em stderr e devolve o código de saída.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            result = func(*args, **kwargs)
            return EXIT_OK if result is None else result
        except ValidationError as e:
            message = format_validation_error(e)
            log_warning(f"Validation error in {func.__name__}", extra={"errors": message})
            print(f"error: invalid configuration: {message}", file=sys.stderr)
            return EXIT_USAGE
        except NumericalError as e:
            log_error(f"Numerical failure in {func.__name__}", exception=e,
                      extra={"iterations_recorded": len(e.history)})
            print(f"error: numerical failure: {e} (after {len(e.history)} iterations)", file=sys.stderr)
            return EXIT_NUMERICAL
        except EmptyMaskError as e:
            log_error(f"Empty mask in {func.__name__}", extra={"error": str(e)})
            print(f"error: {e}", file=sys.stderr)
            return EXIT_NUMERICAL
        except (SPTCError, FileNotFoundError, OSError, ValueError) as e:
            log_error(f"Input error in {func.__name__}", extra={"error": str(e)})
            print(f"error: {e}", file=sys.stderr)
            return exit_code_for(e)
        except Exception as e:
            log_critical(f"Unexpected error in {func.__name__}", exception=e)
            print(f"error: unexpected failure: {e}", file=sys.stderr)
            return EXIT_UNEXPECTED
    return wrapper


def track_performance(threshold_s: float = 30.0):
    """
    Decorator para monitorar a duração de uma operação.
    Operações acima de threshold_s geram aviso.
    """

    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                execution_time = time.perf_counter() - start_time
                if execution_time > threshold_s:
                    log_warning(f"Slow operation: {func.__name__}", extra={
                        "execution_time": execution_time,
                        "threshold_s": threshold_s
                    })
                else:
                    log_performance(func.__name__, execution_time)
        return wrapper
    return decorator


__all__ = [
    "SPTCError", "DimensionError", "ParameterError", "EmptyMaskError",
    "NumericalError", "ConsistencyError", "cli_error_boundary", "track_performance",
    "format_validation_error", "exit_code_for",
    "EXIT_OK", "EXIT_UNEXPECTED", "EXIT_USAGE", "EXIT_NUMERICAL",
]
