#!/usr/bin/env python3
"""Script para reproduzir os experimentos completos nos datasets Syn_B1..Syn_B4."""

import argparse
import sys
import time
from pathlib import Path

# Adicionar o diretório raiz ao path
sys.path.insert(0, str(Path(__file__).parent.parent))

from fqlab.core.config import ExperimentConfig
from fqlab.core.exceptions import FqlabError
from fqlab.core.logging_config import configure_logging
from fqlab.schemas.dataset import ALL_BANDS
from fqlab.services.experiment_service import run_syn_experiment
from fqlab.services.synthgen_service import build_spec
from fqlab.utils.report_io import write_json


def print_summary(summary) -> None:
    """Imprimir o resultado de cada critério de um experimento."""
    print(f"\n📋 {summary.dataset} ({summary.output_dir})")
    print(f"   Acurácia por classe no teste: {[round(a, 3) for a in summary.test_accuracy]}")
    print(f"   F1 inicial por classe: {[round(f, 3) for f in summary.early_f1]}")
    for check in summary.checks:
        icon = "✅" if check.passed else "❌"
        print(f"   {icon} {check.name}: {check.value} (limite {check.threshold}) {check.detail}".rstrip())


def main() -> int:
    """Função principal."""
    parser = argparse.ArgumentParser(description="Experimentos completos em Syn_b")
    parser.add_argument("--bands", default="B1,B2,B3,B4", help="Bandas de viés (ex.: B1,B3)")
    parser.add_argument("--config", default=None, help="Arquivo de experimento JSON ou YAML")
    parser.add_argument("--out", default="runs/syn_experiments", help="Diretório de saída")
    parser.add_argument("--seed", type=int, default=None, help="Semente de geração e treino")
    parser.add_argument("--epochs", type=int, default=None, help="Sobrescrever o número de épocas")
    parser.add_argument("--workers", type=int, default=4, help="Threads de geração e pontuação")
    parser.add_argument("--log-level", default="INFO", help="Nível de log")
    args = parser.parse_args()

    configure_logging(level=args.log_level)
    try:
        config = ExperimentConfig.from_file(args.config)
    except FqlabError as e:
        print(f"❌ {e}")
        return 1
    generation = config.synthgen.generation
    recipe = config.train.recipe
    if args.seed is not None:
        generation = generation.model_copy(update={"seed": args.seed})
        recipe = recipe.model_copy(update={"seed": args.seed})
    if args.epochs is not None:
        recipe = recipe.model_copy(update={"epochs": args.epochs})

    valid = {b.value for b in ALL_BANDS}
    bands = [b.strip().upper() for b in args.bands.split(",") if b.strip()]
    invalid = [b for b in bands if b not in valid]
    if invalid:
        print(f"❌ Bandas inválidas: {', '.join(invalid)}")
        return 2

    out_root = Path(args.out)
    results = {}
    try:
        for band in bands:
            spec = build_spec(band)
            print(f"🚀 Executando {spec.name} (seed={generation.seed}, épocas={recipe.epochs})")
            start = time.time()
            summary = run_syn_experiment(
                spec, generation, recipe, config.dfm, out_root / spec.name, workers=args.workers
            )
            print(f"⏱️  {spec.name} concluído em {time.time() - start:.1f}s")
            print_summary(summary)
            results[spec.name] = summary.model_dump(mode="json")
    except KeyboardInterrupt:
        print("\n⚠️ Execução interrompida pelo usuário")
        return 1

    write_json(out_root / "acceptance.json", results)
    failed = [name for name, result in results.items() if not all(c["passed"] for c in result["checks"])]
    if failed:
        print(f"\n❌ Critérios não atendidos em: {', '.join(failed)}")
        return 1
    print(f"\n🎉 Todos os critérios atendidos ({len(results)} experimentos)")
    print(f"💾 Resumo gravado em {out_root / 'acceptance.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
