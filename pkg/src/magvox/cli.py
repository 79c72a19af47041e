"""Command line entry point: ``magvox {validate,slice,verify,preview,forces}``.

Exit codes: 0 ok, 1 internal error, 2 bad input, 3 design validation failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import fixtures
from .actuation_preview import ConvergenceError, Material, NotAChainError, build_chain, render_svg, solve_equilibrium
from .gcode import EmitError, GCodeError, emit, parse, to_text
from .ingest import IngestError, design_name, load_design
from .kinematics import ConfigError, MachineConfig
from .magnetostatics import ScenarioError, force_torque_table, load_scenario_file, source_from_dict, table_to_csv
from .path_planner import plan
from .virtual_printer import FingerprintMismatchError, compare, execute
from .voxel_model import Contact, DesignError, ValidationError, classify_adjacency, validate_design

log = logging.getLogger("magvox")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_VALIDATION, EXIT_VERIFY = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _config(args) -> MachineConfig:
    if not args.config:
        return MachineConfig()
    if not Path(args.config).is_file():
        raise CliError(EXIT_INPUT, f"input not found: {args.config}")
    try:
        return MachineConfig.load(args.config)
    except ConfigError as exc:
        raise CliError(EXIT_INPUT, f"bad config: {exc}") from exc


def _design(args):
    for p in (args.mag, args.geom):
        if not Path(p).is_file():
            raise CliError(EXIT_INPUT, f"input not found: {p}")
    try:
        return load_design(args.mag, args.geom, position_convention=args.position_convention, allow_passive=args.allow_passive)
    except IngestError as exc:
        raise CliError(EXIT_INPUT, f"cannot read design: {exc}") from exc
    except DesignError as exc:
        raise CliError(EXIT_INPUT, f"cannot merge design: {exc}") from exc


def _validation_failure(report) -> CliError:
    lines = [f"{i.severity.value}: {i.message}" for i in report.errors]
    return CliError(EXIT_VALIDATION, "design failed validation\n" + "\n".join(lines))


def cmd_validate(args) -> int:
    d = _design(args)
    cfg = _config(args) if args.config else None
    report = validate_design(d, cfg)
    sys.stdout.write(_dump(report.to_dict()))
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_slice(args) -> int:
    d = _design(args)
    cfg = _config(args)
    try:
        path = plan(d, cfg, order=args.order)
    except ValidationError as exc:
        raise _validation_failure(exc.report) from exc
    try:
        program = emit(path, d, cfg, dwell_ms=args.dwell_ms)
    except EmitError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from exc

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = design_name(args.mag)
    gcode_path = out / f"{name}.gcode"
    report_path = out / f"{name}.path.json"
    gcode_path.write_text(to_text(program), encoding="utf-8", newline="\n")
    report = path.to_dict()
    report["order_mode"] = args.order
    report["config_fingerprint"] = cfg.fingerprint()
    report_path.write_text(_dump(report), encoding="utf-8")
    print(f"voxels: {len(path.order)}")
    print(f"layers: {len(path.layers)}")
    print(f"total xy travel: {path.total_xy_travel:.6f} mm")
    print(f"wrote {gcode_path} and {report_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    if not Path(args.gcode).is_file():
        raise CliError(EXIT_INPUT, f"input not found: {args.gcode}")
    try:
        program = parse(Path(args.gcode).read_text(encoding="utf-8"))
    except GCodeError as exc:
        raise CliError(EXIT_INPUT, f"{args.gcode}: {exc}") from exc
    d = _design(args)
    try:
        recon = execute(program, cfg)
    except FingerprintMismatchError as exc:
        raise CliError(EXIT_VERIFY, str(exc)) from exc
    except GCodeError as exc:
        raise CliError(EXIT_VERIFY, f"execution failed: {exc}") from exc
    try:
        report = compare(d, recon, cfg, order=plan(d, cfg, order=args.order).order)
    except ValidationError as exc:
        raise _validation_failure(exc.report) from exc
    text = report.to_json()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: {len(recon)} voxels, max position error {report.max_position_error_mm:.6f} mm, "
          f"max angular error {report.max_angular_error_deg:.6f} deg")
    for m in report.messages:
        print(m, file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERIFY


_FIXTURES = {
    "worm": fixtures.worm,
    "gripper": fixtures.gripper,
    "zipper": fixtures.zipper,
    "zipper-overlap": lambda: fixtures.zipper(overlap=0.005),
}


def _scenario_design(spec: dict, root: Path):
    if "fixture" in spec:
        if spec["fixture"] not in _FIXTURES:
            raise CliError(EXIT_INPUT, f"unknown fixture {spec['fixture']!r}")
        return _FIXTURES[spec["fixture"]]()
    ns = argparse.Namespace(
        mag=str(root / spec["mag"]),
        geom=str(root / spec["geom"]),
        position_convention=spec.get("position_convention", "center"),
        allow_passive=spec.get("allow_passive", False),
    )
    return _design(ns)


def run_preview(scenario: dict, root: Path, out: Path, cfg: MachineConfig | None = None) -> dict:
    name = scenario.get("name", "preview")
    if "design" not in scenario:
        raise CliError(EXIT_INPUT, "scenario needs a 'design'")
    d = _scenario_design(scenario["design"], root)
    report = validate_design(d, cfg)
    adj = classify_adjacency(d)
    result = {
        "name": name,
        "voxels": len(d.voxels),
        "validation": report.to_dict(),
        "adjacency": {
            cls.value: [list(p) for p in adj.of_class(cls)] for cls in Contact if cls is not Contact.NONE
        },
        "overlap_volumes_mm3": {f"{a}-{b}": v for (a, b), v in sorted(adj.overlap_volumes.items())},
        "equilibrium": None,
    }
    if not report.ok:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.preview.json").write_text(_dump(result), encoding="utf-8")
        raise _validation_failure(report)

    if scenario.get("solve", True):
        try:
            src = source_from_dict(scenario.get("field", {"type": "uniform", "B": [0.0, 0.0, 0.0]}))
        except ScenarioError as exc:
            raise CliError(EXIT_INPUT, str(exc)) from exc
        mat = scenario.get("material", {})
        material = Material(float(mat.get("E", 4.6e6)), float(mat.get("nu", 0.49)))
        chain_opts = scenario.get("chain", {})
        try:
            chain = build_chain(
                d,
                material,
                axis=chain_opts.get("axis", "x"),
                hinge=chain_opts.get("hinge"),
                magnetization_A_per_m=scenario.get("magnetization_A_per_m"),
                clamp=chain_opts.get("clamp", "min"),
            )
        except NotAChainError as exc:
            raise CliError(EXIT_VALIDATION, f"not a chain: {exc}") from exc
        try:
            eq = solve_equilibrium(chain, src)
        except ConvergenceError as exc:
            raise CliError(EXIT_INTERNAL, str(exc)) from exc
        result["equilibrium"] = eq.to_dict()
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.svg").write_text(render_svg(chain, eq), encoding="utf-8")

    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.preview.json").write_text(_dump(result), encoding="utf-8")
    return result


def cmd_preview(args) -> int:
    cfg = _config(args) if args.config else None
    code = EXIT_OK
    for scen_path in args.scenario:
        p = Path(scen_path)
        if not p.is_file():
            raise CliError(EXIT_INPUT, f"input not found: {p}")
        try:
            scenario = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_INPUT, f"{p}: {exc}") from exc
        res = run_preview(scenario, p.parent, Path(args.out), cfg)
        warns = [i for i in res["validation"]["issues"] if i["severity"] == "warning"]
        line = f"{res['name']}: {res['voxels']} voxels, {len(warns)} warning(s)"
        if res["equilibrium"]:
            eq = res["equilibrium"]
            line += f", tip angle {eq['tip_angle_deg']:.6f} deg after {eq['iterations']} iteration(s)"
        print(line)
        for w in warns:
            print(f"  warning: {w['message']}")
    return code


def cmd_forces(args) -> int:
    if not Path(args.scenario).is_file():
        raise CliError(EXIT_INPUT, f"input not found: {args.scenario}")
    try:
        src, bodies = load_scenario_file(args.scenario)
    except (ScenarioError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_INPUT, f"{args.scenario}: {exc}") from exc
    text = table_to_csv(force_torque_table(src, bodies))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _design_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mag", required=True, help="<name>.mag.csv (id,mx,my,mz)")
    p.add_argument("--geom", required=True, help="<name>.geom.csv (id,l,w,h,x,y,z in mm)")
    p.add_argument("--position-convention", choices=("center", "corner"), default="center")
    p.add_argument("--allow-passive", action="store_true", help="accept all-zero magnetization rows as passive voxels")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magvox", description="Voxel magnetization slicer and actuation preview")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a design for geometric and magnetization problems")
    _design_args(p)
    p.add_argument("--config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("slice", help="plan the cure order and write G-code")
    _design_args(p)
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--order", choices=("paper", "nn"), default="paper")
    p.add_argument("--dwell-ms", type=int, default=None, help="settle pause between orientation and cure")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("verify", help="dry-run G-code and compare against the design")
    p.add_argument("--gcode", required=True)
    _design_args(p)
    p.add_argument("--config")
    p.add_argument("--order", choices=("paper", "nn"), default="paper")
    p.add_argument("--out", help="fidelity report JSON path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("preview", help="adjacency checks and bending equilibrium for scenarios")
    p.add_argument("--scenario", required=True, action="append")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("forces", help="force/torque table for a magnetostatics scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_forces)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"magvox: {exc}", file=sys.stderr)
        return exc.code
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
