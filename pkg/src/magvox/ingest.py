"""Readers and writers for the exported magnetization and geometry CSV files.

Format: UTF-8, comma-delimited, exact lowercase header, LF or CRLF.

    <name>.mag.csv   id,mx,my,mz
    <name>.geom.csv  id,l,w,h,x,y,z      (all lengths in mm)
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .voxel_model import Design, merge_datasets

MAG_COLUMNS = ("id", "mx", "my", "mz")
GEOM_COLUMNS = ("id", "l", "w", "h", "x", "y", "z")

# float() alone would accept "nan", "inf" and "1_000"
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_INTEGER = re.compile(r"\+?\d+")


class IngestError(ValueError):
    pass


class EmptyInputError(IngestError):
    pass


class ParseError(IngestError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class MagRecord:
    id: int
    mx: float
    my: float
    mz: float
    passive: bool = False


@dataclass(frozen=True)
class GeomRecord:
    id: int
    l: float
    w: float
    h: float
    x: float
    y: float
    z: float


def _number(text: str, line: int, column: str) -> float:
    s = text.strip()
    if not _NUMBER.fullmatch(s):
        raise ParseError(line, f"column {column!r}: not a number: {text!r}")
    value = float(s)
    if not math.isfinite(value):
        raise ParseError(line, f"column {column!r}: value out of range: {text!r}")
    return value


def _voxel_id(text: str, line: int) -> int:
    s = text.strip()
    if not _INTEGER.fullmatch(s) or int(s) <= 0:
        raise ParseError(line, f"id must be a positive integer, got {text!r}")
    return int(s)


def _rows(file_text: str, columns: tuple[str, ...]):
    if not file_text.strip():
        raise EmptyInputError("input is empty")
    if file_text.startswith("﻿"):
        file_text = file_text[1:]
    reader = csv.reader(io.StringIO(file_text, newline=""), strict=True)
    header = next(reader)
    if tuple(h.strip() for h in header) != columns:
        raise ParseError(1, f"expected header {','.join(columns)!r}, got {','.join(header)!r}")
    n = 0
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(columns):
            raise ParseError(reader.line_num, f"expected {len(columns)} columns, got {len(row)}")
        n += 1
        yield reader.line_num, row
    if n == 0:
        raise EmptyInputError("input has a header but no data rows")


def parse_magnetization(file_text: str, allow_passive: bool = False) -> list[MagRecord]:
    """Parse ``id,mx,my,mz`` rows in file order.

    An all-zero row is a parse error unless ``allow_passive`` is set, in which
    case the record is flagged passive.
    """
    records = []
    for line, row in _rows(file_text, MAG_COLUMNS):
        vid = _voxel_id(row[0], line)
        mx, my, mz = (_number(v, line, c) for v, c in zip(row[1:], MAG_COLUMNS[1:]))
        passive = mx == 0.0 and my == 0.0 and mz == 0.0
        if passive and not allow_passive:
            raise ParseError(line, f"voxel {vid}: zero magnetization (mark passive voxels explicitly)")
        records.append(MagRecord(vid, mx, my, mz, passive))
    return records


def parse_geometry(file_text: str) -> list[GeomRecord]:
    records = []
    for line, row in _rows(file_text, GEOM_COLUMNS):
        vid = _voxel_id(row[0], line)
        l, w, h, x, y, z = (_number(v, line, c) for v, c in zip(row[1:], GEOM_COLUMNS[1:]))
        if min(l, w, h) <= 0:
            raise ParseError(line, f"voxel {vid}: non-positive dimension (l={l:g}, w={w:g}, h={h:g})")
        records.append(GeomRecord(vid, l, w, h, x, y, z))
    return records


def _fmt(v: float) -> str:
    # repr round-trips exactly
    return repr(float(v))


def emit_magnetization(records) -> str:
    lines = [",".join(MAG_COLUMNS)]
    lines += [f"{r.id},{_fmt(r.mx)},{_fmt(r.my)},{_fmt(r.mz)}" for r in records]
    return "\n".join(lines) + "\n"


def emit_geometry(records) -> str:
    lines = [",".join(GEOM_COLUMNS)]
    lines += [",".join([str(r.id)] + [_fmt(getattr(r, c)) for c in GEOM_COLUMNS[1:]]) for r in records]
    return "\n".join(lines) + "\n"


def design_name(path: str | Path) -> str:
    name = Path(path).name
    for suffix in (".mag.csv", ".geom.csv", ".csv"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def load_design(
    mag_path: str | Path,
    geom_path: str | Path,
    name: str | None = None,
    position_convention: str = "center",
    allow_passive: bool = False,
) -> Design:
    mag = parse_magnetization(Path(mag_path).read_text(encoding="utf-8"), allow_passive)
    geom = parse_geometry(Path(geom_path).read_text(encoding="utf-8"))
    return merge_datasets(mag, geom, name or design_name(mag_path), position_convention)
