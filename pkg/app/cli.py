#!/usr/bin/env python3
"""
Command line entry point

    python -m app [--config run.json] [--out DIR] [--threads N] [--grid N] <command>

Commands: spectrum, fef-surface, reconstruct, validate-fef, weakstar.
Exit codes: 0 success, 1 numerical failure, 2 bad configuration or arguments,
3 invalid data, 4 surface contract violation. Every failure writes one JSON
line to stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from app.analysis.fef import LambdaSurface, fef_surface
from app.analysis.inverse import reconstruct, roundtrip_check, tabulate_candidate, validate_fef
from app.analysis.measure_lab import weakstar_convergence_study
from app.core.config_loader import RunConfig, expand_t_grid, load_run_config
from app.core.exceptions import ConfigError, FefToolkitError, InvalidArgumentError
from app.core.logging_config import setup_logging
from app.handlers.artifact_writer import ArtifactWriter, read_coefficient_csv, read_surface
from app.handlers.spectrum import compute_spectrum, verify_simplicity
from app.models.coefficients import POTENTIAL, WEIGHT, CoefficientFunction, sample_coefficient
from app.models.grid import Grid, make_uniform_grid
from app.models.problem import DirichletProblem
from app.models.rules import is_candidate_rule, is_coefficient_rule, parse_candidate_rule, parse_coefficient_rule

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors through the JSON error channel"""

    def error(self, message: str):
        raise ConfigError(f"command line: {message}", "argv")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="Run configuration JSON")
    common.add_argument("--out", default=argparse.SUPPRESS, help="Output directory")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="Worker processes")
    common.add_argument("--grid", type=int, default=argparse.SUPPRESS, help="Grid points on [0,1]")
    common.add_argument("--log-dir", dest="log_dir", default=argparse.SUPPRESS, help="Directory for log files")
    common.add_argument("--debug", action="store_true", default=argparse.SUPPRESS, help="Enable debug logging")

    parser = _Parser(
        description="First eigenvalue functions of Dirichlet problems with point interactions",
        parents=[common],
    )
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)
    commands.required = True
    commands.add_parser("spectrum", parents=[common], help="Eigenvalues and eigenfunctions")
    commands.add_parser("fef-surface", parents=[common], help="Tabulate lambda(t, r)")
    rec = commands.add_parser("reconstruct", parents=[common], help="Recover q from a surface")
    rec.add_argument("--validate", action="store_true", help="Also run the first-eigenvalue-function validator")
    commands.add_parser("validate-fef", parents=[common], help="Validate a candidate lambda(t, r)")
    commands.add_parser("weakstar", parents=[common], help="Bump approximation of a point interaction")
    return parser


# -- inputs ----------------------------------------------------------------


def _load_coefficient(spec: str, grid: Grid, kind: str) -> CoefficientFunction:
    if is_coefficient_rule(spec):
        return sample_coefficient(parse_coefficient_rule(spec), grid, kind=kind, name=spec)
    coefficient = read_coefficient_csv(spec, kind=kind)
    if coefficient.grid != grid:
        raise InvalidArgumentError(f"{Path(spec).name} is not on the grid of the other coefficient")
    return coefficient


def build_problem(config: RunConfig) -> DirichletProblem:
    """Potential and weight from rules or CSV files; a CSV fixes the grid"""
    settings = config.get_problem_config()
    grid = None
    for key, kind in (("potential", POTENTIAL), ("weight", WEIGHT)):
        if not is_coefficient_rule(settings[key]):
            grid = read_coefficient_csv(settings[key], kind=kind).grid
            if grid.n_points != settings["grid_points"]:
                logger.info(f"Using the {grid.n_points}-point grid of {Path(settings[key]).name}")
            break
    grid = grid or make_uniform_grid(settings["grid_points"])
    q = _load_coefficient(settings["potential"], grid, POTENTIAL)
    w = _load_coefficient(settings["weight"], grid, WEIGHT)
    return DirichletProblem(q, w)


def _default_surface(config: RunConfig) -> str:
    return str(Path(config.get("runtime.output_dir")) / "surface.json")


def _load_surface(spec: str, config: RunConfig) -> LambdaSurface:
    """A surface file, or a candidate rule tabulated on the validation grid"""
    if is_candidate_rule(spec):
        return tabulate_candidate(
            parse_candidate_rule(spec),
            expand_t_grid(config.get("validate_fef.t_grid"), "validate_fef.t_grid"),
            config.get("validate_fef.r_list"),
            name=spec,
        )
    return read_surface(spec)


# -- commands --------------------------------------------------------------


def cmd_spectrum(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem = build_problem(config)
    results = compute_spectrum(problem, config.get("spectrum.count"))
    writer = ArtifactWriter(config.get("runtime.output_dir"))
    modes = []
    for result in results:
        report = verify_simplicity(result, problem)
        modes.append({**result.to_dict(), "simplicity": report.to_dict()})
        writer.write_csv(f"eigenfunction_{result.index}.csv", result.eigenfunction.to_frame())
    writer.write_json(
        "spectrum.json",
        {"problem": problem.describe(), "eigenvalues": [r.lambda_m for r in results], "modes": modes},
    )
    return writer.result(eigenvalues=[r.lambda_m for r in results])


def cmd_fef_surface(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem = build_problem(config)
    settings = config.get_section("fef_surface")
    surface = fef_surface(
        problem,
        expand_t_grid(settings["t_grid"], "fef_surface.t_grid"),
        settings["r_list"],
        workers=config.get("runtime.threads"),
        cross_check=settings["cross_check"],
        r_max=settings["r_max"],
    )
    writer = ArtifactWriter(config.get("runtime.output_dir"))
    writer.write_csv("surface.csv", surface.to_frame())
    writer.write_json("surface.json", surface.to_json_dict())
    writer.write_text("surface.dat", surface.to_gnuplot())
    return writer.result(lambda1=surface.lambda1)


def _write_validation(writer: ArtifactWriter, config: RunConfig, candidate: Any, w: CoefficientFunction) -> Dict[str, Any]:
    settings = config.get_section("validate_fef")
    report = validate_fef(
        candidate,
        w,
        t_grid=expand_t_grid(settings["t_grid"], "validate_fef.t_grid"),
        r_list=settings["r_list"],
        margin=settings["margin"],
    )
    writer.write_json("validation.json", report.to_json_dict())
    return {"verdict": report.verdict, "reason": report.reason}


def cmd_reconstruct(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem = build_problem(config)
    settings = config.get_section("reconstruct")
    surface_spec = settings["surface"] or _default_surface(config)
    surface = _load_surface(surface_spec, config)
    result = reconstruct(
        surface, problem.w, margin=settings["margin"], smoothing=settings["smoothing"], order=settings["order"]
    )
    writer = ArtifactWriter(config.get("runtime.output_dir"))
    extra: Dict[str, Any] = {}
    payload = result.to_json_dict()
    if settings["ground_truth"]:
        q_true = _load_coefficient(settings["ground_truth"], problem.grid, POTENTIAL)
        report = roundtrip_check(q_true, result, problem.w)
        payload["diagnostics"]["roundtrip_lambda1_error"] = report["lambda1_error"]
        payload["diagnostics"]["residual_norms"] = {
            "l2": report["l2_error"],
            "linf": report["linf_error"],
            "relative_l2": report["relative_l2_error"],
        }
        writer.write_json("roundtrip.json", report)
        extra["roundtrip"] = report
    writer.write_csv("reconstruction.csv", result.to_frame())
    writer.write_json("reconstruction.json", payload)
    if getattr(args, "validate", False):
        spec = settings["candidate"] or surface_spec
        candidate = parse_candidate_rule(spec) if is_candidate_rule(spec) else read_surface(spec)
        extra.update(_write_validation(writer, config, candidate, problem.w))
    return writer.result(**extra)


def cmd_validate_fef(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem = build_problem(config)
    spec = config.get("validate_fef.candidate") or _default_surface(config)
    candidate = parse_candidate_rule(spec) if is_candidate_rule(spec) else read_surface(spec)
    writer = ArtifactWriter(config.get("runtime.output_dir"))
    return writer.result(**_write_validation(writer, config, candidate, problem.w))


def cmd_weakstar(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem = build_problem(config)
    settings = config.get_section("weakstar")
    frame = weakstar_convergence_study(
        problem.q,
        problem.w,
        settings["t"],
        settings["r"],
        settings["n_list"],
        workers=config.get("runtime.threads"),
    )
    writer = ArtifactWriter(config.get("runtime.output_dir"))
    writer.write_csv("weakstar.csv", frame)
    return writer.result(lambda_reference=frame.attrs["lambda_reference"])


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], Dict[str, Any]]] = {
    "spectrum": cmd_spectrum,
    "fef-surface": cmd_fef_surface,
    "reconstruct": cmd_reconstruct,
    "validate-fef": cmd_validate_fef,
    "weakstar": cmd_weakstar,
}


def _emit_error(payload: Dict[str, Any]) -> None:
    sys.stderr.write(json.dumps(payload, default=str) + "\n")
    sys.stderr.flush()


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    try:
        setup_logging()
        args = build_parser().parse_args(argv)
        config = load_run_config(getattr(args, "config", None)).apply_overrides(
            output_dir=getattr(args, "out", None),
            threads=getattr(args, "threads", None),
            grid_points=getattr(args, "grid", None),
        )
        if getattr(args, "log_dir", None):
            config.set("runtime.log_dir", str(Path(args.log_dir).expanduser().resolve()))
        level = "DEBUG" if getattr(args, "debug", False) else config.get("runtime.log_level")
        setup_logging(config.get("runtime.log_dir"), level)

        logger.info(f"🚀 Running {args.command}")
        result = COMMANDS[args.command](config, args)
        logger.info(f"✅ {args.command} finished: {len(result['files'])} file(s) written")
        return 0
    except FefToolkitError as e:
        logger.error(f"❌ {e.kind}: {e}")
        _emit_error(e.to_dict())
        return e.exit_code
    except KeyboardInterrupt:
        _emit_error({"error": "interrupted", "message": "interrupted by user"})
        return 130
    except Exception as e:
        logger.exception(f"❌ Unexpected failure: {e}")
        _emit_error({"error": "internal", "message": str(e)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
