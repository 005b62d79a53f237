"""Testes do fqlab."""
