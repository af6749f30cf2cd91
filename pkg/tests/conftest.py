import os
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Configurar variáveis de ambiente para testes (antes de importar utils.logger)
_LOG_DIR = tempfile.mkdtemp(prefix="sptc_test_logs_")
os.environ['SPTC_LOG_DIR'] = _LOG_DIR
os.environ['SPTC_LOG_LEVEL'] = 'WARNING'
os.environ.pop('SPTC_BENCH_WORKERS', None)

from utils.image_io import load_image, resize_image  # noqa: E402
from utils.superpixel import LabelMap  # noqa: E402
from utils.tensor_core import t_product  # noqa: E402

NATURAL_IMAGES = ["astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry"]


def pytest_sessionfinish(session, exitstatus):
    shutil.rmtree(_LOG_DIR, ignore_errors=True)


@pytest.fixture
def rng():
    """Gerador com semente fixa"""
    return np.random.default_rng(1234)


@pytest.fixture
def random_tensor(rng):
    """Fábrica de tensores aleatórios reais"""
    def make(*dims):
        return rng.standard_normal(dims)
    return make


@pytest.fixture
def rank1_tensor():
    """Tensor 16x16x3 de posto tubal 1 com valores em [0, 1]"""
    gen = np.random.default_rng(7)
    a = gen.uniform(0.2, 1.0, size=(16, 1, 3))
    b = gen.uniform(0.2, 1.0, size=(1, 16, 3))
    x = t_product(a, b)
    return x / x.max()


@pytest.fixture
def rank1_matrix():
    """Matriz 8x8 de posto 1 em [0, 1], como tensor 8x8x1"""
    gen = np.random.default_rng(11)
    u = gen.uniform(0.2, 1.0, size=8)
    v = gen.uniform(0.2, 1.0, size=8)
    m = np.outer(u, v)
    return (m / m.max())[:, :, None]


@pytest.fixture(scope="session")
def natural_images():
    """Imagens naturais de teste redimensionadas para 128x128"""
    return {name: resize_image(load_image(f"builtin:{name}"), 128) for name in NATURAL_IMAGES}


@pytest.fixture(scope="session")
def astronaut(natural_images):
    return natural_images["astronaut"]


@pytest.fixture
def make_label_map():
    """Constrói um LabelMap a partir de uma matriz de rótulos"""
    def make(labels):
        labels = np.asarray(labels, dtype=np.int64)
        k = int(labels.max()) + 1
        return LabelMap(labels=labels, centers=np.zeros((k, 5)), step=1.0, requested=k)
    return make


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Diretório de trabalho temporário (cwd)"""
    monkeypatch.chdir(tmp_path)
    return Path(tmp_path)
