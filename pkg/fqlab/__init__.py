"""
fqlab - análise de atalhos de frequência (frequency shortcuts) em classificadores de imagens.

Pipeline completo em escala de desktop: geração de datasets sintéticos com viés de frequência,
treino de uma CNN residual compacta, métricas espectrais por classe (ADCS) e identificação de
atalhos via Dominant Frequency Maps (DFM).
"""

__version__ = "1.0.0"
