"""The printer's G-code dialect.

    ;MAGVOX v1                 header, line 1
    ;CFG <fingerprint>         header, line 2 (machine config hash)
    G28                        home
    G1 X<mm> Y<mm> Z<mm>       absolute move
    M20 A<deg> B<deg>          magnet azimuth (-180, 180] / inclination [0, 180]
    M10 P<ms>                  cure
    G4 P<ms>                   dwell
    ; text                     comment

Numbers are written with six decimals; durations are integers. Files are UTF-8
with LF line endings.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .kinematics import MachineConfig, cartesian_to_spherical
from .path_planner import ToolPath
from .voxel_model import Design

DIALECT = "MAGVOX v1"
DECIMALS = 6

_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")
_INTEGER = re.compile(r"\+?\d+")


class GCodeError(ValueError):
    pass


class GCodeParseError(GCodeError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class EmitError(GCodeError):
    def __init__(self, message: str, voxel_id: int | None = None):
        self.voxel_id = voxel_id
        super().__init__(message)


def quantize(value: float) -> float:
    """Round to the printed precision; never returns -0.0."""
    return round(float(value), DECIMALS) + 0.0


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v}")


def _check_duration(ms: int) -> None:
    if isinstance(ms, bool) or int(ms) != ms or ms <= 0:
        raise ValueError(f"duration must be a positive integer, got {ms!r}")


@dataclass(frozen=True)
class Home:
    pass


@dataclass(frozen=True)
class MoveTo:
    x: float
    y: float
    z: float

    def __post_init__(self):
        _check_finite(self.x, self.y, self.z)


@dataclass(frozen=True)
class OrientMagnet:
    azimuth_deg: float
    inclination_deg: float

    def __post_init__(self):
        _check_finite(self.azimuth_deg, self.inclination_deg)


@dataclass(frozen=True)
class Cure:
    duration_ms: int

    def __post_init__(self):
        _check_duration(self.duration_ms)


@dataclass(frozen=True)
class Dwell:
    ms: int

    def __post_init__(self):
        _check_duration(self.ms)


@dataclass(frozen=True)
class Comment:
    text: str

    def __post_init__(self):
        if "\n" in self.text or "\r" in self.text:
            raise ValueError("comment text must be a single line")


Instruction = Union[Home, MoveTo, OrientMagnet, Cure, Dwell, Comment]


@dataclass(frozen=True)
class Program:
    fingerprint: str
    instructions: tuple[Instruction, ...]
    dialect: str = DIALECT

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))

    @property
    def cure_count(self) -> int:
        return sum(isinstance(i, Cure) for i in self.instructions)


def check_program(instructions) -> None:
    """Raise ``GCodeError`` unless the program starts with Home and each Cure
    has its own move and orientation since the previous Cure."""
    body = [i for i in instructions if not isinstance(i, Comment)]
    if not body or not isinstance(body[0], Home):
        raise GCodeError("program must begin with G28 (home)")
    moved = oriented = False
    for ins in body:
        if isinstance(ins, MoveTo):
            moved = True
        elif isinstance(ins, OrientMagnet):
            oriented = True
        elif isinstance(ins, Cure):
            if not (moved and oriented):
                raise GCodeError("cure without a preceding move and magnet orientation")
            moved = oriented = False


def _orientation(voxel) -> tuple[float, float]:
    m = voxel.magnetization
    if m.passive and m.magnitude == 0.0:
        return 0.0, 0.0
    az, inc = cartesian_to_spherical(m)
    az, inc = quantize(az), quantize(inc)
    if az == -180.0:
        az = 180.0
    return az, inc


def emit(path: ToolPath, d: Design, cfg: MachineConfig, dwell_ms: int | None = None) -> Program:
    """Move, orient, cure for every voxel in path order.

    ``dwell_ms`` inserts a settle pause between orientation and cure.
    """
    order = path.order
    if not order:
        raise EmitError("cannot emit a program for an empty tool path")
    vox = d.by_id()
    if sorted(order) != sorted(vox) or len(order) != len(d.voxels):
        raise EmitError("tool path does not cover the design exactly once")
    ins: list[Instruction] = [Home()]
    for vid in order:
        v = vox[vid]
        for axis, value in zip("xyz", v.position):
            lo, hi = cfg.travel_limits[axis]
            if not lo <= value <= hi:
                raise EmitError(f"voxel {vid}: {axis}={value:g} mm outside travel [{lo:g}, {hi:g}]", vid)
        p = v.position
        ins.append(MoveTo(quantize(p.x), quantize(p.y), quantize(p.z)))
        ins.append(OrientMagnet(*_orientation(v)))
        if dwell_ms:
            ins.append(Dwell(dwell_ms))
        ins.append(Cure(cfg.cure_duration_ms))
    return Program(cfg.fingerprint(), tuple(ins))


def _num(v: float) -> str:
    s = f"{v:.{DECIMALS}f}"
    return "0.000000" if s == "-0.000000" else s


def format_instruction(ins: Instruction) -> str:
    if isinstance(ins, Home):
        return "G28"
    if isinstance(ins, MoveTo):
        return f"G1 X{_num(ins.x)} Y{_num(ins.y)} Z{_num(ins.z)}"
    if isinstance(ins, OrientMagnet):
        return f"M20 A{_num(ins.azimuth_deg)} B{_num(ins.inclination_deg)}"
    if isinstance(ins, Cure):
        return f"M10 P{int(ins.duration_ms)}"
    if isinstance(ins, Dwell):
        return f"G4 P{int(ins.ms)}"
    if isinstance(ins, Comment):
        return f";{ins.text}"
    raise TypeError(f"not an instruction: {ins!r}")


def to_text(p: Program) -> str:
    lines = [f";{p.dialect}", f";CFG {p.fingerprint}"]
    lines += [format_instruction(i) for i in p.instructions]
    return "\n".join(lines) + "\n"


def emit_text(path: ToolPath, d: Design, cfg: MachineConfig, dwell_ms: int | None = None) -> str:
    return to_text(emit(path, d, cfg, dwell_ms))


# -- parsing -------------------------------------------------------------------


def _words(line_no: int, parts: list[str], expected: tuple[str, ...]) -> dict[str, str]:
    found: dict[str, str] = {}
    for part in parts:
        letter, value = part[:1], part[1:]
        if letter not in expected:
            raise GCodeParseError(line_no, f"unexpected word {part!r}")
        if letter in found:
            raise GCodeParseError(line_no, f"duplicate word {letter}")
        found[letter] = value
    for letter in expected:
        if letter not in found:
            raise GCodeParseError(line_no, f"missing axis word {letter}" if letter in "XYZ" else f"missing word {letter}")
    return found


def _real(line_no: int, letter: str, text: str) -> float:
    if not _NUMBER.fullmatch(text):
        raise GCodeParseError(line_no, f"malformed number in {letter}{text}")
    return float(text) + 0.0


def _duration(line_no: int, letter: str, text: str) -> int:
    if not _INTEGER.fullmatch(text) or int(text) <= 0:
        raise GCodeParseError(line_no, f"{letter} must be a positive integer, got {text!r}")
    return int(text)


def parse_line(line_no: int, line: str) -> Instruction:
    if line.startswith(";"):
        return Comment(line[1:])
    parts = line.split(" ")
    if any(p == "" for p in parts):
        raise GCodeParseError(line_no, "words must be separated by single spaces")
    head, rest = parts[0], parts[1:]
    if head == "G28":
        if rest:
            raise GCodeParseError(line_no, "G28 takes no arguments")
        return Home()
    if head == "G1":
        w = _words(line_no, rest, ("X", "Y", "Z"))
        return MoveTo(*(_real(line_no, k, w[k]) for k in "XYZ"))
    if head == "M20":
        w = _words(line_no, rest, ("A", "B"))
        az, inc = _real(line_no, "A", w["A"]), _real(line_no, "B", w["B"])
        if not -180.0 < az <= 180.0:
            raise GCodeParseError(line_no, f"azimuth out of range (-180, 180]: {az:g}")
        if not 0.0 <= inc <= 180.0:
            raise GCodeParseError(line_no, f"inclination out of range [0, 180]: {inc:g}")
        return OrientMagnet(az, inc)
    if head == "M10":
        return Cure(_duration(line_no, "P", _words(line_no, rest, ("P",))["P"]))
    if head == "G4":
        return Dwell(_duration(line_no, "P", _words(line_no, rest, ("P",))["P"]))
    raise GCodeParseError(line_no, f"unknown word {head!r}")


def parse(text: str) -> Program:
    if not text.endswith("\n"):
        text += "\n"
    lines = text.split("\n")[:-1]
    if len(lines) < 2 or lines[0] != f";{DIALECT}":
        raise GCodeParseError(1, f"missing ';{DIALECT}' header")
    if not lines[1].startswith(";CFG ") or not re.fullmatch(r"[0-9a-f]+", lines[1][5:]):
        raise GCodeParseError(2, "missing ';CFG <fingerprint>' header")
    fingerprint = lines[1][5:]

    ins: list[Instruction] = []
    moved = oriented = homed = False
    for n, line in enumerate(lines[2:], start=3):
        if not line:
            raise GCodeParseError(n, "blank line")
        i = parse_line(n, line)
        if isinstance(i, Comment):
            ins.append(i)
            continue
        if not homed and not isinstance(i, Home):
            raise GCodeParseError(n, "missing Home (G28) before first instruction")
        if isinstance(i, Home):
            homed = True
        elif isinstance(i, MoveTo):
            moved = True
        elif isinstance(i, OrientMagnet):
            oriented = True
        elif isinstance(i, Cure):
            if not moved:
                raise GCodeParseError(n, "cure before any MoveTo since the previous cure")
            if not oriented:
                raise GCodeParseError(n, "cure before any OrientMagnet since the previous cure")
            moved = oriented = False
        ins.append(i)
    if not homed:
        raise GCodeParseError(len(lines), "missing Home (G28)")
    return Program(fingerprint, tuple(ins))
