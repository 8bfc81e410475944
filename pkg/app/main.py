import sys

import click
from loguru import logger

from app.cli.attack import attack
from app.cli.evaluate import evaluate
from app.cli.tools import sc_bench, sobol_dump
from app.cli.train import train
from app.config import settings


def configure_logging() -> None:
    """stderr plus a rotating file; stdout stays free for command output"""
    logger.remove()
    logger.add(
        sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>",
        level="DEBUG" if settings.DEBUG else settings.LOG_LEVEL,
    )
    settings.LOG_FILE.parent.mkdir(parents=True, exist_ok=True)
    logger.add(settings.LOG_FILE, rotation="50 MB", retention="10 days", level=settings.LOG_LEVEL)


@click.group()
@click.version_option(settings.APP_VERSION, prog_name=settings.APP_NAME)
def cli():
    """Stochastic-computing defense against adversarial attacks on LeNet-5/MNIST."""
    configure_logging()
    logger.debug(f"Starting {settings.APP_NAME} v{settings.APP_VERSION}")


cli.add_command(train)
cli.add_command(attack)
cli.add_command(evaluate)
cli.add_command(sobol_dump)
cli.add_command(sc_bench)


if __name__ == "__main__":
    cli()
