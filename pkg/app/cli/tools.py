import click
from loguru import logger

from app.cli.common import build_config, common_options, emit, handle_errors, parse_int_list
from app.config import settings
from app.sc.sobol import MAX_DIMENSIONS
from app.schemas.config import BenchConfig
from app.services.benchmark_service import encoded_streams, sc_bench as run_bench, sobol_csv


@click.command(name="sobol-dump")
@common_options
@click.option("--count", type=click.IntRange(min=1), default=16, show_default=True, help="Points per dimension.")
@click.option(
    "--dims", type=click.IntRange(1, MAX_DIMENSIONS), default=2, show_default=True, help="Dimensions to print."
)
@click.option("--bits", is_flag=True, help="Print the encoded stream of --value on each dimension instead.")
@click.option("--value", type=float, default=0.5, show_default=True, help="Value encoded with --bits.")
@handle_errors
def sobol_dump(seed, out, config_path, count, dims, bits, value):
    """Print Sobol points as CSV, or the bit-streams they encode."""
    # the sequence is deterministic; the seed is accepted for a uniform command surface
    logger.debug(f"sobol-dump count={count} dims={dims} bits={bits} seed={seed}")
    text = encoded_streams(value, count, dims) if bits else sobol_csv(count, dims)
    emit(text, out)


@click.command(name="sc-bench")
@common_options
@click.option("--n", "lengths", default=None, callback=lambda ctx, param, value: parse_int_list(value),
              help="Comma-separated bit-stream lengths.")
@click.option("--pairs", type=int, default=None, help="Random operand pairs per length.")
@click.option("--max-error", type=float, default=None, help="Exit 1 if any length exceeds this max error.")
@handle_errors
def sc_bench(seed, out, config_path, lengths, pairs, max_error):
    """Sweep the error of Sobol AND multiplication over random operand pairs."""
    cfg = build_config(BenchConfig, config_path, "sc_bench", lengths=lengths, pairs=pairs, max_error=max_error)
    seed = settings.DEFAULT_SEED if seed is None else seed

    results = run_bench(cfg.lengths, cfg.pairs, seed)
    emit("".join(result.line() + "\n" for result in results), out)

    if cfg.max_error is not None:
        worst = max(results, key=lambda r: r.max_error, default=None)
        if worst is not None and worst.max_error > cfg.max_error:
            raise click.ClickException(
                f"max_error {worst.max_error:.6f} at n={worst.n} exceeds the limit {cfg.max_error}"
            )
