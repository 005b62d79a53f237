"""Exceções base do fqlab."""


class FqlabError(Exception):
    """Exceção base para todos os erros do fqlab."""
    pass


class ConfigError(FqlabError, ValueError):
    """Configuração de experimento inválida ou arquivo de configuração ilegível."""
    pass


class UsageError(FqlabError, ValueError):
    """Uso incorreto da linha de comando (flags ou especificações inválidas)."""
    pass
