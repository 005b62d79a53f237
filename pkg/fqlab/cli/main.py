"""
Ponto de entrada da linha de comando: `python -m fqlab <subcomando> [flags]`.

Códigos de saída: 0 sucesso, 2 erro de uso, 1 erro de execução.
"""

import argparse
import sys
from typing import List, Optional

from loguru import logger

from fqlab import __version__
from fqlab.cli import commands
from fqlab.core.config import BAND_PAIR_CODES, ExperimentConfig, settings
from fqlab.core.exceptions import FqlabError, UsageError
from fqlab.core.logging_config import configure_logging
from fqlab.schemas.dataset import ALL_BANDS, SPLITS


def _csv_list(cast):
    def parse(text: str):
        try:
            return [cast(item.strip()) for item in text.split(",") if item.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"lista inválida '{text}': {e}") from e
    return parse


def _per_class(text: str) -> List[int]:
    values = _csv_list(int)(text)
    if len(values) != 3 or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"use train,val,test com inteiros positivos, recebido '{text}'")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fqlab",
        description="Análise de atalhos de frequência em classificadores de imagens",
    )
    parser.add_argument("--version", action="version", version=f"fqlab {__version__}")
    parser.add_argument("--config", default=None, help="Arquivo de experimento JSON ou YAML")
    parser.add_argument("--log-level", default=None, help="Nível de log (sobrescreve FQLAB_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthgen", help="Gerar um dataset sintético Syn_b")
    p.add_argument("--band", type=str.upper, choices=[b.value for b in ALL_BANDS], default=None)
    p.add_argument("--per-class", type=_per_class, default=None, help="Amostras por classe: train,val,test")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k-min", type=int, default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-previews", action="store_true", help="Não gravar prévias PNG")
    p.set_defaults(handler=commands.cmd_synthgen)

    p = sub.add_parser("train", help="Treinar a CNN compacta")
    p.add_argument("--data", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--probe-split", choices=list(SPLITS), default=None)
    p.add_argument("--probe-filter", default=None, help="Máscara do probe (ex.: lowpass:4, highpass:12)")
    p.add_argument("--probe-iterations", type=int, default=None)
    p.add_argument("--probe-stride", type=int, default=None)
    p.set_defaults(handler=commands.cmd_train)

    p = sub.add_parser("bandstop-eval", help="Matrizes Δ em testes band-stop")
    p.add_argument("--data", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--pairs", type=_csv_list(str), default=None,
                   help=f"Pares de bandas mantidas ({','.join(BAND_PAIR_CODES)})")
    p.set_defaults(handler=commands.cmd_bandstop_eval)

    p = sub.add_parser("adcs", help="Mapas ADCS por classe")
    p.add_argument("--data", default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--side", type=int, default=None, help="Lado para crop/resize de PNGs")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=commands.cmd_adcs)

    p = sub.add_parser("dfm", help="Pontuação de frequências, DFMs e relatório de atalhos")
    p.add_argument("--data", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--score-split", choices=list(SPLITS), default=None)
    p.add_argument("--test-split", choices=list(SPLITS), default=None)
    p.add_argument("--x-grid", type=_csv_list(float), default=None, help="Percentuais X (ex.: 1,5,10)")
    p.add_argument("--report-x", type=float, default=None)
    p.add_argument("--tau-tpr", type=float, default=None)
    p.add_argument("--tau-fpr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None, help="Lote de inferência do modelo")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-previews", action="store_true")
    p.set_defaults(handler=commands.cmd_dfm)

    p = sub.add_parser("shortcut-report", help="Aplicar DFMs existentes a um preditor/teste")
    p.add_argument("--data", default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--dfm-dir", default=None)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--checkpoint", default=None)
    group.add_argument("--predictions", default=None, help="CSV id,score_0,...")
    p.add_argument("--out", default=None)
    p.add_argument("--x", type=float, default=None)
    p.add_argument("--tau-tpr", type=float, default=None)
    p.add_argument("--tau-fpr", type=float, default=None)
    p.add_argument("--side", type=int, default=None)
    p.set_defaults(handler=commands.cmd_shortcut_report)

    p = sub.add_parser("filter", help="Aplicar uma máscara de frequência a um dataset")
    p.add_argument("--data", default=None)
    p.add_argument("--mask", default=None, help="all, B14, keep:B1,B4, bandstop:B2,B3, lowpass:R, highpass:R, dfm:arquivo")
    p.add_argument("--splits", type=_csv_list(str), default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(handler=commands.cmd_filter)

    p = sub.add_parser("encode", help="Converter PNG em tensor .f32")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--side", type=int, default=None)
    p.set_defaults(handler=commands.cmd_encode)

    p = sub.add_parser("decode", help="Ler tensor .f32 (cabeçalho e prévia PNG)")
    p.add_argument("input")
    p.add_argument("--output", default=None)
    p.set_defaults(handler=commands.cmd_decode)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        configure_logging(settings, level=args.log_level)
    except ValueError as e:
        print(f"❌ Nível de log inválido: {e}", file=sys.stderr)
        return 2
    if settings.torch_threads:
        import torch
        torch.set_num_threads(settings.torch_threads)

    try:
        config = ExperimentConfig.from_file(args.config)
        return args.handler(args, config)
    except UsageError as e:
        logger.error(f"❌ Erro de uso: {e}")
        return 2
    except (FqlabError, OSError) as e:
        logger.error(f"❌ {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
