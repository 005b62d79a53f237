"""Gravação de relatórios CSV/JSON e da configuração resolvida de cada execução."""

import csv
import json
import os
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

from loguru import logger
from pydantic import BaseModel


def write_csv(
    path: Union[str, os.PathLike],
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comments: Optional[List[str]] = None,
) -> Path:
    """Gravar um CSV; linhas de comentário (`# ...`) antecedem o cabeçalho."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        for comment in comments or []:
            f.write(f"# {comment}\n")
        writer = csv.writer(f)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(["" if value is None else value for value in row])
    logger.debug(f"💾 CSV gravado: {path}")
    return path


def read_csv(path: Union[str, os.PathLike]) -> List[dict]:
    """Ler um CSV gravado por write_csv (ignora comentários)."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def write_json(path: Union[str, os.PathLike], payload: Union[BaseModel, dict, list]) -> Path:
    """Gravar JSON indentado (modelos pydantic via model_dump)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, ensure_ascii=False)
    path.write_text(text, encoding="utf-8")
    logger.debug(f"💾 JSON gravado: {path}")
    return path
