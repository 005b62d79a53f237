"""Configuração do sistema de logging (loguru)."""

import sys
from typing import Optional

from loguru import logger

from fqlab.core.config import Settings, settings as default_settings


def configure_logging(config: Optional[Settings] = None, level: Optional[str] = None) -> None:
    """
    Configurar sinks do loguru a partir das configurações.

    Args:
        config: Configurações a usar (padrão: singleton global)
        level: Nível de log que sobrescreve o das configurações (flag --log-level)
    """
    config = config or default_settings
    log_level = (level or config.log_level).upper()

    logger.remove()
    logger.add(
        sys.stderr,
        level=log_level,
        format=config.log_format,
        colorize=False,
    )

    if config.log_file:
        logger.add(
            config.log_file,
            level=log_level,
            format=config.log_format,
            rotation=config.log_rotation_size,
            retention=f"{config.log_retention_days} days",
            encoding="utf-8",
        )
