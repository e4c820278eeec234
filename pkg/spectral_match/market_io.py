"""File formats for markets, run records and result tables."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO

import numpy as np

from .errors import MalformedInput
from .market_model import Market, validate_market

LOGGER = logging.getLogger(__name__)

NEG_INF_TOKEN = "-inf"


def _read_rows(path: Path) -> List[List[str]]:
    try:
        with Path(path).open(newline="", encoding="utf-8") as handle:
            return [row for row in csv.reader(handle) if any(cell.strip() for cell in row)]
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc}") from exc


def _to_matrix(rows: List[List[str]], path: Path) -> np.ndarray:
    try:
        values = [[float(cell) for cell in row] for row in rows]
    except ValueError as exc:
        raise MalformedInput(f"{path}: non-numeric entry ({exc})") from exc
    widths = {len(row) for row in values}
    if len(widths) > 1:
        raise MalformedInput(f"{path}: rows have different lengths {sorted(widths)}")
    return np.array(values, dtype=float, ndmin=2) if values else np.empty((0, 0))


def load_matrix_csv(path: Path) -> np.ndarray:
    """Numeric CSV with a one-line header; rows are objects or agents."""

    rows = _read_rows(path)
    if not rows:
        raise MalformedInput(f"{path} is empty")
    return _to_matrix(rows[1:], path)


def load_capacities(path: Path) -> np.ndarray:
    rows = _read_rows(path)
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    matrix = _to_matrix(rows, path)
    if matrix.size and matrix.shape[1] != 1:
        raise MalformedInput(f"{path}: expected one capacity per line")
    return matrix.ravel()


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_market_csv(features_path: Path, preferences_path: Path, capacities_path: Path) -> Market:
    market = validate_market(
        load_matrix_csv(features_path),
        load_matrix_csv(preferences_path),
        load_capacities(capacities_path),
    )
    LOGGER.info(
        "Loaded market with %s agents, %s objects, %s features",
        market.num_agents,
        market.num_objects,
        market.num_features,
    )
    return market


def load_market_json(path: Path) -> Market:
    """Bundled format: ``{"features": ..., "preferences": ..., "capacities": ..., "metadata": ...}``."""

    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"cannot read market {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedInput(f"{path}: market file must hold a JSON object")
    missing = [key for key in ("features", "preferences", "capacities") if key not in payload]
    if missing:
        raise MalformedInput(f"{path}: missing keys {missing}")
    return validate_market(payload["features"], payload["preferences"], payload["capacities"])


def write_matrix_csv(values: np.ndarray, path: Path, prefix: str) -> None:
    values = np.atleast_2d(values)
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"{prefix}{index + 1}" for index in range(values.shape[1])])
        writer.writerows([[repr(float(v)) for v in row] for row in values])


def write_market_csv(market: Market, directory: Path) -> Dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "features": directory / "features.csv",
        "preferences": directory / "preferences.csv",
        "capacities": directory / "capacities.csv",
    }
    write_matrix_csv(market.features, paths["features"], "x")
    write_matrix_csv(market.preferences, paths["preferences"], "x")
    with paths["capacities"].open("w", encoding="utf-8") as handle:
        handle.write("capacity\n")
        handle.writelines(f"{int(cap)}\n" for cap in market.capacities)
    return paths


def write_market_json(market: Market, path: Path, metadata: Optional[dict] = None) -> None:
    payload = {
        "features": market.features.tolist(),
        "preferences": market.preferences.tolist(),
        "capacities": market.capacities.tolist(),
        "metadata": metadata or {},
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def to_plain(value: Any) -> Any:
    """Recursively convert numpy values to JSON-safe Python; ``-inf`` becomes a token."""

    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if value == -math.inf:
            return NEG_INF_TOKEN
        if math.isinf(value):
            raise MalformedInput("cannot emit +inf")
        return value
    if isinstance(value, Path):
        return str(value)
    return value


def from_plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: from_plain(item) for key, item in value.items()}
    if isinstance(value, list):
        return [from_plain(item) for item in value]
    if value == NEG_INF_TOKEN:
        return -math.inf
    return value


def _cell(value: Any) -> str:
    value = to_plain(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


def _write_csv_rows(rows: List[dict], stream: TextIO) -> None:
    columns: List[str] = []
    for row in rows:
        columns.extend(key for key in row if key not in columns)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(column)) for column in columns])


def render_records(rows: List[dict], fmt: str) -> str:
    buffer = io.StringIO()
    if fmt == "json":
        buffer.write(json.dumps(to_plain(rows), indent=2) + "\n")
    elif rows:
        _write_csv_rows(rows, buffer)
    return buffer.getvalue()


def render_tables(tables: Dict[str, List[dict]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(to_plain(tables), indent=2) + "\n"
    parts = []
    for name, rows in tables.items():
        parts.append(f"# {name}\n")
        parts.append(render_records(rows, "csv"))
    return "".join(parts)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    LOGGER.info("Wrote %s", out)


def write_records(rows: List[dict], fmt: str, out: Optional[Path] = None) -> None:
    _emit(render_records(rows, fmt), out)


def write_tables(tables: Dict[str, List[dict]], fmt: str, out: Optional[Path] = None) -> None:
    """One JSON document, or CSV tables; a CSV ``out`` fans out to ``<stem>_<table>.csv``."""

    if fmt == "csv" and out is not None:
        out = Path(out)
        for name, rows in tables.items():
            _emit(render_records(rows, "csv"), out.with_name(f"{out.stem}_{name}{out.suffix or '.csv'}"))
        return
    _emit(render_tables(tables, fmt), out)


def read_records(path: Path) -> Any:
    try:
        return from_plain(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"cannot read records {path}: {exc}") from exc
