"""
Módulo de logging estruturado para o SPTC.

Exemplo de uso:
    from utils.logger import log_info, log_error
    log_info("Mensagem informativa")
    log_error("Mensagem de erro", exception=Exception("Erro!"))

Utilize as funções de conveniência para logs padronizados em toda a biblioteca.
O diretório e o nível podem ser definidos por SPTC_LOG_DIR / SPTC_LOG_LEVEL
(variáveis de ambiente ou arquivo .env).
"""

import json
import logging
import os
import sys
from datetime import datetime
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


class JSONFormatter(logging.Formatter):
    """
    Formatter JSON para logs estruturados (uma linha por registro).
    """

    def format(self, record):
        log_entry = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno
        }
        if hasattr(record, 'details'):
            log_entry['extra'] = record.details
        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)
        return json.dumps(log_entry, ensure_ascii=False, default=str)


class StructuredLogger:
    """
    Sistema de logging estruturado para o SPTC.
    Oferece métodos para logs de operação, performance, processamento de dados
    e acompanhamento das iterações dos algoritmos de completamento.
    """

    def __init__(self, name: str = "SPTC", log_level: Optional[str] = None,
                 log_dir: Optional[str] = None):
        self.logger = logging.getLogger(name)
        level = (log_level or os.getenv("SPTC_LOG_LEVEL", "INFO")).upper()
        self.logger.setLevel(getattr(logging, level, logging.INFO))
        self.log_dir = log_dir or os.getenv("SPTC_LOG_DIR", "logs")

        # Evitar duplicação de handlers
        if not self.logger.handlers:
            self._setup_handlers()

    def _setup_handlers(self):
        """Configura os handlers de logging para console e arquivos."""
        formatter = logging.Formatter(
            '%(asctime)s | %(name)s | %(levelname)s | %(module)s:%(funcName)s:%(lineno)d | %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        # stdout fica reservado para a saída dos subcomandos
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        try:
            os.makedirs(self.log_dir, exist_ok=True)
        except OSError:
            # Sem diretório gravável: somente console
            return

        file_handler = logging.FileHandler(
            os.path.join(self.log_dir, f"sptc_{datetime.now().strftime('%Y%m%d')}.log"),
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        self.logger.addHandler(file_handler)

        error_handler = logging.FileHandler(
            os.path.join(self.log_dir, "errors.log"),
            encoding='utf-8'
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(formatter)
        self.logger.addHandler(error_handler)

        json_handler = logging.FileHandler(
            os.path.join(self.log_dir, "structured.jsonl"),
            encoding='utf-8'
        )
        json_handler.setLevel(logging.INFO)
        json_handler.setFormatter(JSONFormatter())
        self.logger.addHandler(json_handler)

    @staticmethod
    def _extra(extra: Optional[dict]) -> dict:
        # 'details' evita colisão com atributos reservados do LogRecord
        return {"details": extra} if extra else {}

    # stacklevel conta a partir de quem chamou o método: 1 = chamador direto,
    # cada camada de conveniência acima soma 1

    def info(self, message: str, extra: Optional[dict] = None, stacklevel: int = 1):
        """Log de informação."""
        self.logger.info(message, extra=self._extra(extra), stacklevel=stacklevel + 1)

    def warning(self, message: str, extra: Optional[dict] = None, stacklevel: int = 1):
        """Log de aviso."""
        self.logger.warning(message, extra=self._extra(extra), stacklevel=stacklevel + 1)

    def error(self, message: str, exception: Optional[Exception] = None, extra: Optional[dict] = None,
              stacklevel: int = 1):
        """Log de erro. Se exception for fornecida, inclui traceback."""
        if exception:
            self.logger.error(f"{message} | Exception: {str(exception)}", exc_info=exception,
                              extra=self._extra(extra), stacklevel=stacklevel + 1)
        else:
            self.logger.error(message, extra=self._extra(extra), stacklevel=stacklevel + 1)

    def debug(self, message: str, extra: Optional[dict] = None, stacklevel: int = 1):
        """Log de debug."""
        self.logger.debug(message, extra=self._extra(extra), stacklevel=stacklevel + 1)

    def critical(self, message: str, exception: Optional[Exception] = None, extra: Optional[dict] = None,
                 stacklevel: int = 1):
        """Log crítico. Se exception for fornecida, inclui traceback."""
        if exception:
            self.logger.critical(f"{message} | Exception: {str(exception)}", exc_info=exception,
                                 extra=self._extra(extra), stacklevel=stacklevel + 1)
        else:
            self.logger.critical(message, extra=self._extra(extra), stacklevel=stacklevel + 1)

    def log_operation(self, operation: str, details: dict = None, level: str = "INFO", stacklevel: int = 1):
        """Log estruturado para operações específicas."""
        details = details or {}
        message = f"Operation: {operation}"
        if details:
            message += f" | Details: {details}"

        getattr(self.logger, level.lower())(message, extra=self._extra(details), stacklevel=stacklevel + 1)

    def log_performance(self, operation: str, duration: float, details: dict = None, stacklevel: int = 1):
        """Log de performance para operações."""
        details = details or {}
        message = f"Performance: {operation} | Duration: {duration:.4f}s"
        if details:
            message += f" | Details: {details}"

        self.logger.info(message, extra=self._extra({**details, "duration_s": round(duration, 6)}),
                         stacklevel=stacklevel + 1)

    def log_data_processing(self, operation: str, input_shape: tuple = None,
                            output_shape: tuple = None, duration: float = None, error: Exception = None,
                            stacklevel: int = 1):
        """Log específico para processamento de dados (tensores, imagens, máscaras)."""
        details = {
            "operation": operation,
            "input_shape": input_shape,
            "output_shape": output_shape,
            "duration": f"{duration:.4f}s" if duration else None
        }

        # Remove valores None
        details = {k: v for k, v in details.items() if v is not None}

        if error:
            self.error(f"Data processing failed: {operation}", exception=error, extra=details,
                       stacklevel=stacklevel + 1)
        else:
            self.info(f"Data processing successful: {operation}", extra=details, stacklevel=stacklevel + 1)

    def log_iteration(self, engine: str, iteration: int, criterion: float,
                      data_fit: float, mu: float, stacklevel: int = 1):
        """Log de uma iteração ADMM (nível DEBUG para não poluir o console)."""
        self.logger.debug(
            f"{engine} iter={iteration} criterion={criterion:.3e} data_fit={data_fit:.3e} mu={mu:.3e}",
            extra=self._extra({"engine": engine, "iter": iteration, "criterion": criterion,
                               "data_fit": data_fit, "mu": mu}),
            stacklevel=stacklevel + 1
        )

    def log_convergence(self, engine: str, converged: bool, iterations: int, criterion: float,
                        stacklevel: int = 1):
        """Log do encerramento de um algoritmo iterativo."""
        details = {"engine": engine, "converged": converged,
                   "iterations": iterations, "criterion": criterion}
        if converged:
            self.info(f"{engine} convergiu em {iterations} iterações", extra=details,
                      stacklevel=stacklevel + 1)
        else:
            self.warning(f"{engine} atingiu max_iters={iterations} sem convergir", extra=details,
                         stacklevel=stacklevel + 1)


# Instância global do logger
app_logger = StructuredLogger()


# Funções de conveniência para uso direto
def log_info(message: str, extra: dict = None):
    """Função de conveniência para log de informação."""
    app_logger.info(message, extra, stacklevel=2)


def log_warning(message: str, extra: dict = None):
    """Função de conveniência para log de aviso."""
    app_logger.warning(message, extra, stacklevel=2)


def log_error(message: str, exception: Exception = None, extra: dict = None):
    """Função de conveniência para log de erro."""
    app_logger.error(message, exception, extra, stacklevel=2)


def log_debug(message: str, extra: dict = None):
    """Função de conveniência para log de debug."""
    app_logger.debug(message, extra, stacklevel=2)


def log_critical(message: str, exception: Exception = None, extra: dict = None):
    """Função de conveniência para log crítico."""
    app_logger.critical(message, exception, extra, stacklevel=2)


def log_operation(operation: str, details: dict = None, level: str = "INFO"):
    """Função de conveniência para log de operação."""
    app_logger.log_operation(operation, details, level, stacklevel=2)


def log_performance(operation: str, duration: float, details: dict = None):
    """Função de conveniência para log de performance."""
    app_logger.log_performance(operation, duration, details, stacklevel=2)


def log_data_processing(operation: str, input_shape: tuple = None,
                        output_shape: tuple = None, duration: float = None, error: Exception = None):
    """Função de conveniência para log de processamento de dados."""
    app_logger.log_data_processing(operation, input_shape, output_shape, duration, error, stacklevel=2)


def log_iteration(engine: str, iteration: int, criterion: float, data_fit: float, mu: float):
    """Função de conveniência para log de iteração ADMM."""
    app_logger.log_iteration(engine, iteration, criterion, data_fit, mu, stacklevel=2)


def log_convergence(engine: str, converged: bool, iterations: int, criterion: float):
    """Função de conveniência para log de convergência."""
    app_logger.log_convergence(engine, converged, iterations, criterion, stacklevel=2)
