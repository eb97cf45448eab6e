"""
Storage layer: CSV result tables and their JSON provenance sidecars.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path

from config import LIBRARY_VERSION

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".meta.json"


# ─── Formatting ─────────────────────────────────────────────

def format_cell(value) -> str:
    """Floats with 17 significant digits; bools lowercase; None as empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if hasattr(value, "item"):
        return format_cell(value.item())
    if hasattr(value, "value") and isinstance(value.value, str):
        return value.value
    return str(value)


def render_table(columns: list[str], rows: list[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        missing = [col for col in columns if col not in row]
        if missing:
            raise KeyError(f"row is missing columns {missing}")
        writer.writerow([format_cell(row[col]) for col in columns])
    return buffer.getvalue()


# ─── Files ──────────────────────────────────────────────────

def sidecar_path(output: str | Path) -> Path:
    output = Path(output)
    return output.with_name(output.stem + SIDECAR_SUFFIX)


def build_sidecar(config_hash: str, seed: int, subcommand: str, extra: dict | None = None) -> dict:
    """Provenance record; carries no timestamps so reruns stay byte-identical."""
    meta = {
        "config_hash": config_hash,
        "seed": int(seed),
        "library_version": LIBRARY_VERSION,
        "subcommand": subcommand,
    }
    if extra:
        meta.update(extra)
    return meta


def write_results(output: str | Path, columns: list[str], rows: list[dict],
                  config_hash: str, seed: int, subcommand: str,
                  extra: dict | None = None) -> tuple[Path, Path]:
    """Write the CSV table and its sidecar. Both are rendered before either file is touched."""
    output = Path(output)
    table = render_table(columns, rows)
    meta = build_sidecar(config_hash, seed, subcommand, extra)
    meta_text = json.dumps(meta, sort_keys=True, indent=2) + "\n"

    if output.parent and not output.parent.exists():
        output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(table, encoding="utf-8")
    meta_path = sidecar_path(output)
    meta_path.write_text(meta_text, encoding="utf-8")

    logger.info(f"Wrote {len(rows)} rows to {output} (sidecar {meta_path.name})")
    return output, meta_path


def read_table(path: str | Path) -> list[dict]:
    """Rows of a written table as dicts of strings."""
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def read_sidecar(output: str | Path) -> dict:
    return json.loads(sidecar_path(output).read_text(encoding="utf-8"))
