"""Readers for the versioned run-directory file formats."""

from __future__ import annotations

import json
from pathlib import Path


class SchemaError(ValueError):
    """Input file does not match the expected schema; message names the problem."""


def read_csv(path, expected_schema: str) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    lines = path.read_text(encoding="utf-8").rstrip("\n").split("\n")
    if not lines or not lines[0].startswith("#schema:"):
        raise SchemaError(f"{path}: missing schema line")
    schema = lines[0][len("#schema:"):]
    if schema != expected_schema:
        raise SchemaError(f"{path}: expected schema {expected_schema}, found {schema}")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return header, rows


def column(path, header: list[str], rows: list[list[str]], name: str) -> list[str]:
    if name not in header:
        raise SchemaError(f"{path}: missing column {name}")
    idx = header.index(name)
    return [row[idx] for row in rows]


def float_column(path, header, rows, name: str) -> list[float]:
    return [float(v) for v in column(path, header, rows, name)]


def read_json(path, expected_schema: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("schema") != expected_schema:
        raise SchemaError(f"{path}: expected schema {expected_schema}, found {payload.get('schema')}")
    return payload
