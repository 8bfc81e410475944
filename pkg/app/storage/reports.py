"""CSV / JSON emission of evaluation reports and run sidecars."""

import csv
import io
import json
from pathlib import Path
from typing import List, Sequence, Union

from loguru import logger
from pydantic import BaseModel

from app.schemas.report import CSV_COLUMNS, EvalReport, EvalRow


def report_to_csv(report: EvalReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow(
            [
                row.sc_layer.value,
                row.bitstream_len,
                row.phase.value,
                repr(row.accuracy),
                row.num_images,
                row.seed,
                repr(row.wall_time_s),
            ]
        )
    return buffer.getvalue()


def rows_from_csv(text: str) -> List[EvalRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"Unexpected report header {reader.fieldnames}")
    return [EvalRow.model_validate(record) for record in reader]


def report_to_json(report: EvalReport) -> str:
    return report.model_dump_json(indent=2) + "\n"


def write_report(report: EvalReport, csv_path, json_path) -> None:
    csv_path, json_path = Path(csv_path), Path(json_path)
    try:
        for path, text in ((csv_path, report_to_csv(report)), (json_path, report_to_json(report))):
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {len(report.rows)} report rows to {csv_path} and {json_path}")
    except OSError as e:
        logger.error(f"Failed to write report: {e}")
        raise


def write_sidecar(records: Union[BaseModel, Sequence[BaseModel]], path) -> Path:
    """Pretty-printed JSON dump of pydantic records next to a binary artifact"""
    if isinstance(records, BaseModel):
        payload = records.model_dump(mode="json")
    else:
        payload = [record.model_dump(mode="json") for record in records]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
