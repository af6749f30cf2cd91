#!/usr/bin/env python3
"""
Prepara o ambiente de experimentos do SPTC: diretórios, arquivo .env e as
imagens naturais de teste (skimage.data) redimensionadas para PNG.
"""

import argparse
import sys
from pathlib import Path

# Adicionar o diretório raiz ao path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from utils.image_io import load_image, resize_image, save_png  # noqa: E402

TEST_IMAGES = ["astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry"]


def create_env_file(root: Path) -> None:
    """Cria .env com os padrões de log e de execução (não sobrescreve)"""
    env_file = root / ".env"
    if env_file.exists():
        print(f"Arquivo .env já existe em {env_file}, mantendo")
        return
    env_file.write_text(
        "# Logging\n"
        "SPTC_LOG_DIR=logs\n"
        "SPTC_LOG_LEVEL=INFO\n"
        "\n"
        "# Bench\n"
        "SPTC_BENCH_WORKERS=1\n",
        encoding="utf-8",
    )
    print(f"Arquivo .env criado em {env_file}")


def create_directories(root: Path) -> None:
    """Cria diretórios usados pelos experimentos"""
    for directory in ("logs", "data/images", "results"):
        (root / directory).mkdir(parents=True, exist_ok=True)
        print(f"Diretório criado: {directory}")


def export_images(root: Path, side: int) -> int:
    """Exporta as imagens de teste em side x side"""
    target = root / "data" / "images"
    count = 0
    for name in TEST_IMAGES:
        try:
            image = resize_image(load_image(f"builtin:{name}"), side)
        except Exception as e:
            print(f"Falha ao exportar {name}: {e}")
            continue
        path = save_png(image, target / f"{name}_{side}.png")
        print(f"Imagem exportada: {path}")
        count += 1
    return count


def main():
    """Função principal de preparação"""
    parser = argparse.ArgumentParser(description="Prepara imagens e diretórios de teste")
    parser.add_argument("--side", type=int, default=128, help="lado das imagens exportadas")
    args = parser.parse_args()

    print(f"Diretório do projeto: {project_root}")
    create_env_file(project_root)
    create_directories(project_root)
    exported = export_images(project_root, args.side)
    print(f"\n{exported}/{len(TEST_IMAGES)} imagens exportadas")
    sys.exit(0 if exported == len(TEST_IMAGES) else 1)


if __name__ == "__main__":
    main()
