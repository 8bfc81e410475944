import click
from loguru import logger

from app.cli.common import build_config, common_options, handle_errors
from app.config import settings
from app.data.mnist import load_mnist
from app.schemas.config import TrainConfig
from app.services.training_service import TrainingService
from app.storage.reports import write_sidecar
from app.storage.weights import save_weights


@click.command()
@common_options
@click.option("--epochs", type=int, default=None, help="Passes over the training set.")
@click.option("--batch-size", type=int, default=None, help="Mini-batch size.")
@click.option("--learning-rate", type=float, default=None, help="SGD step size.")
@click.option("--momentum", type=float, default=None, help="SGD momentum coefficient.")
@click.option("--train-subset", type=int, default=None, help="Train on the first N images only.")
@handle_errors
def train(seed, out, config_path, epochs, batch_size, learning_rate, momentum, train_subset):
    """Train LeNet-5 on MNIST and write the SCNN weight file."""
    cfg = build_config(
        TrainConfig,
        config_path,
        "train",
        seed=seed,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        momentum=momentum,
        train_subset=train_subset,
    )
    out = out or settings.weights_path

    train_data = load_mnist(settings.DATA_DIR, "train")
    test_data = load_mnist(settings.DATA_DIR, "test")

    service = TrainingService(cfg)
    model = service.initialize()
    for entry in model.describe():
        logger.debug(f"layer {entry['index']}: {entry['kind']} -> {entry['output_shape']} ({entry['parameters']} params)")
    result = service.train(model, train_data, test_data)

    save_weights(result.model, out)
    write_sidecar(result.metrics, out.with_suffix(".metrics.json"))
    final = result.metrics[-1]
    click.echo(f"weights={out} epochs={final.epoch} test_accuracy={final.test_accuracy:.4f}")
