from pathlib import Path

import click

from app.cli.common import build_config, common_options, handle_errors, parse_csv_list, parse_int_list
from app.config import settings
from app.schemas.config import EvalConfig
from app.services.evaluation_service import run_grid
from app.storage.reports import write_report


@click.command(name="eval")
@common_options
@click.option(
    "--layers",
    default=None,
    callback=lambda ctx, param, value: parse_csv_list(value),
    help="Comma-separated subset of none,first,second,both.",
)
@click.option(
    "--lengths",
    default=None,
    callback=lambda ctx, param, value: parse_int_list(value),
    help="Comma-separated bit-stream lengths, e.g. 8,16,32.",
)
@click.option("--subset", "subset_size", type=int, default=None, help="Clean test images per BeforeAttack cell.")
@click.option(
    "--weights",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="SCNN weight file (default: the train output).",
)
@click.option(
    "--adversarial",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="SCAE adversarial set (default: the attack output).",
)
@handle_errors
def evaluate(seed, out, config_path, layers, lengths, subset_size, weights, adversarial):
    """Accuracy grid over SC layer, bit-stream length and attack phase; writes CSV and JSON."""
    cfg = build_config(EvalConfig, config_path, "eval", layers=layers, lengths=lengths, subset_size=subset_size)
    csv_path = out or settings.ARTIFACTS_PATH / settings.REPORT_CSV
    json_path = csv_path.with_suffix(".json") if out else settings.ARTIFACTS_PATH / settings.REPORT_JSON

    report = run_grid(
        weights or settings.weights_path,
        adversarial or settings.adversarial_path,
        cfg.layers,
        cfg.lengths,
        cfg.subset_size,
        seed=settings.DEFAULT_SEED if seed is None else seed,
    )
    write_report(report, csv_path, json_path)
    click.echo(f"report={csv_path} rows={len(report.rows)}")
