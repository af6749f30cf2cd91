# utils/config_manager.py
import copy
import os
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel

from utils.logger import log_debug, log_info
from utils.validators import BenchConfig, RunConfig

ModelT = TypeVar("ModelT", bound=BaseModel)


class ConfigManager:
    """
    Gerencia arquivos de configuração do SPTC (execução e bench).

    Os arquivos podem ser YAML ou JSON (JSON é lido pelo próprio parser YAML),
    são validados pelos modelos pydantic de utils.validators e podem ser
    sobrescritos por flags da CLI (chaves pontuadas, ex.: 'completion.params.tol').
    """

    def __init__(self, config_dir: str = "config", env_file: str = ".env"):
        """
        Inicializa o ConfigManager, garantindo o diretório de configuração e
        carregando variáveis de ambiente do .env (se existir).
        """
        self.config_dir = Path(config_dir)
        self.env_file = env_file
        self.ensure_directories()
        load_dotenv(self.env_file)
        log_debug("ConfigManager inicializado", extra={"config_dir": str(self.config_dir),
                                                      "env_file": self.env_file})

    def ensure_directories(self):
        """Garante que o diretório de configuração exista."""
        self.config_dir.mkdir(parents=True, exist_ok=True)

    def resolve(self, path: str) -> Path:
        """Resolve um caminho relativo primeiro em relação ao cwd e depois ao config_dir."""
        candidate = Path(path)
        if candidate.exists() or candidate.is_absolute():
            return candidate
        in_config = self.config_dir / candidate
        return in_config if in_config.exists() else candidate

    def load_raw(self, path: str) -> Dict[str, Any]:
        """Lê um arquivo YAML/JSON e devolve o dicionário (vazio se o arquivo estiver vazio)."""
        resolved = self.resolve(path)
        if not resolved.exists():
            raise FileNotFoundError(f"arquivo de configuração não encontrado: {path}")
        with open(resolved, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ValueError(f"configuração deve ser um mapeamento: {path}")
        log_info("Configuração carregada", extra={"config_file": str(resolved)})
        return data

    def load_model(self, path: Optional[str], model: Type[ModelT],
                   overrides: Optional[Dict[str, Any]] = None) -> ModelT:
        """Carrega (opcionalmente) um arquivo, aplica overrides e valida no modelo."""
        data = self.load_raw(path) if path else {}
        data = merge_overrides(data, overrides or {})
        return model.model_validate(data)

    def load_run_config(self, path: Optional[str] = None,
                        overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """Carrega a configuração de execução (sample / complete)."""
        return self.load_model(path, RunConfig, overrides)

    def load_bench_config(self, path: str,
                          overrides: Optional[Dict[str, Any]] = None) -> BenchConfig:
        """Carrega a configuração de bench; SPTC_BENCH_WORKERS sobrescreve 'workers'."""
        overrides = dict(overrides or {})
        env_workers = os.getenv("SPTC_BENCH_WORKERS")
        if env_workers and "workers" not in overrides:
            overrides["workers"] = int(env_workers)
        return self.load_model(path, BenchConfig, overrides)

    def save_config(self, config: BaseModel, path: str) -> Path:
        """Salva uma configuração validada como YAML (registro de reprodutibilidade)."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, 'w', encoding='utf-8') as f:
            yaml.safe_dump(config.model_dump(mode="json"), f, default_flow_style=False, sort_keys=False)
        log_info("Configuração salva", extra={"config_file": str(target)})
        return target


def merge_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Aplica overrides com chaves pontuadas sobre um dicionário aninhado.
    Valores None são ignorados (flag não informada na CLI).
    """
    merged = copy.deepcopy(data)
    for dotted_key, value in overrides.items():
        if value is None:
            continue
        node = merged
        parts = dotted_key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[parts[-1]] = value
    return merged

