from pathlib import Path

import click

from app.cli.common import build_config, common_options, handle_errors
from app.config import settings
from app.data.mnist import load_mnist
from app.schemas.config import AttackConfig
from app.services.attack_service import AttackService
from app.storage.adversarial import save_adversarial_set
from app.storage.reports import write_sidecar
from app.storage.weights import load_weights


@click.command()
@common_options
@click.option("--count", type=click.IntRange(min=1), default=200, show_default=True, help="Correctly classified test images to attack.")
@click.option(
    "--weights",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="SCNN weight file (default: the train output).",
)
@click.option("--kappa", "confidence_kappa", type=float, default=None, help="Required target-logit margin.")
@click.option("--max-iterations", type=int, default=None, help="Gradient steps per binary-search step.")
@click.option("--binary-search-steps", type=int, default=None, help="Binary-search steps over c.")
@click.option("--step-size", type=float, default=None, help="Gradient-descent step size.")
@click.option("--batch-size", type=click.IntRange(min=1), default=None, help="Images optimized together.")
@handle_errors
def attack(
    seed, out, config_path, count, weights, confidence_kappa, max_iterations, binary_search_steps, step_size, batch_size
):
    """Run the targeted C&W L2 attack and write the SCAE adversarial set."""
    cfg = build_config(
        AttackConfig,
        config_path,
        "attack",
        confidence_kappa=confidence_kappa,
        max_iterations=max_iterations,
        binary_search_steps=binary_search_steps,
        step_size=step_size,
    )
    seed = settings.DEFAULT_SEED if seed is None else seed
    out = out or settings.adversarial_path

    model = load_weights(weights or settings.weights_path)
    test_data = load_mnist(settings.DATA_DIR, "test")

    service = AttackService(cfg, batch_size=batch_size or settings.ATTACK_BATCH_SIZE)
    results, summary = service.run(model, test_data, count, seed)

    save_adversarial_set([r.to_record() for r in results], out)
    write_sidecar(summary, out.with_suffix(".summary.json"))
    click.echo(
        f"adversarial_set={out} attempted={summary.attempted} succeeded={summary.succeeded} "
        f"success_rate={summary.success_rate:.4f}"
    )
