"""Options and error handling shared by every subcommand."""

import functools
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar

import click
from loguru import logger
from pydantic import BaseModel, ValidationError

from app.utils.errors import ConfigurationError, ScDefenseError

ModelT = TypeVar("ModelT", bound=BaseModel)

CONFIG_SECTIONS = ("train", "attack", "eval", "sc_bench")


def common_options(func):
    """--seed, --out and --config, accepted by every subcommand"""
    func = click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False, path_type=Path),
        default=None,
        help="JSON file with optional 'train', 'attack', 'eval' and 'sc_bench' sections.",
    )(func)
    func = click.option(
        "--out",
        type=click.Path(dir_okay=False, path_type=Path),
        default=None,
        help="Output file (defaults depend on the command).",
    )(func)
    func = click.option("--seed", type=int, default=None, help="Seed recorded with (and driving) the run.")(func)
    return func


def handle_errors(func):
    """Turn library failures into a one-line message and exit code 1"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ScDefenseError, ValidationError) as e:
            logger.error(f"{func.__name__} failed: {e}")
            raise click.ClickException(str(e))
        except OSError as e:
            logger.error(f"{func.__name__} failed: {e}")
            raise click.ClickException(f"I/O error: {e}")

    return wrapper


def read_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}")
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path} must hold a JSON object")
    unknown = set(document) - set(CONFIG_SECTIONS)
    if unknown:
        raise ConfigurationError(f"{path}: unknown sections {sorted(unknown)}; allowed {list(CONFIG_SECTIONS)}")
    return document


def build_config(model: Type[ModelT], config_path: Optional[Path], section: str, **flags: Any) -> ModelT:
    """Model defaults, overridden by the config file section, overridden by explicit flags"""
    values = dict(read_config_file(config_path).get(section) or {})
    values.update({key: value for key, value in flags.items() if value is not None})
    try:
        return model.model_validate(values)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid {section} configuration: {e}")


def parse_csv_list(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_int_list(value: Optional[str]) -> Optional[List[int]]:
    items = parse_csv_list(value)
    if items is None:
        return None
    try:
        return [int(item) for item in items]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{value}'")


def emit(text: str, out: Optional[Path]) -> None:
    """Write command output to ``out`` or stdout"""
    if out is None:
        click.echo(text, nl=False)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {out}")
