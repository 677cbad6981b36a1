#!/usr/bin/env python
"""
Command-line entry point for the lattice defect spectra.

Every subcommand reads a run configuration (``--config`` JSON and/or flags),
computes one artifact and writes it as CSV or JSON to ``--output`` (stdout by
default). Failures print a JSON error object to stderr and exit nonzero.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from lattice.config import RunConfig, load_run_config
from lattice.env import logfire, set_thread_override, setup_env
from lattice.errors import ConfigError, LatticeError
from lattice.evaluation import EvaluationPipeline, reference_cases
from lattice.guided import GUARD, scan_guided
from lattice.localized import (
    classify_existence,
    d_loc_values,
    gap_structure,
    region_map,
    scan_localized,
)
from lattice.models import LatticeSpec
from lattice.modes import (
    oracle_agreement,
    reconstruct_guided_mode,
    reconstruct_localized_mode,
)
from lattice.oracle import finite_oracle
from lattice.output import make_header, write_csv, write_json
from lattice.propagative import (
    CLIP_ZERO,
    dispersion_table,
    propagative_projection_full,
    propagative_projection_k1,
)
from lattice.roots import scan_grid
from lattice.workers import parallel_map

EXIT_DOMAIN = 1
EXIT_CONFIG = 2
EXIT_IO = 3

FIGURE1_STRIPS = {"a": -0.9, "b": -0.5, "c": 0.5, "d": 2.0}


def _uniform_parameters(spec: LatticeSpec) -> tuple[float, float] | None:
    """(m1, m2) when ``spec`` is the unit-mass one-node example."""
    if (spec.n1, spec.n2) != (1, 1) or spec.adjacency != "square":
        return None
    if spec.mass_vector()[0] != 1.0:
        return None
    return float(spec.strip_vector()[0]), float(spec.point_vector()[0])


def _k1_samples(count: int) -> np.ndarray:
    return np.linspace(0.0, np.pi, count)


# subcommands


def cmd_bands(config: RunConfig, spec: LatticeSpec, output: Path | None):
    table = dispersion_table(spec, grid=config.grid)
    header = make_header(spec, command="bands", grid=config.grid, eigenvalue_clip=CLIP_ZERO)
    write_csv(output, header, ["k1", "k2", "branch", "omega"], table.rows())


def cmd_project(config: RunConfig, spec: LatticeSpec, output: Path | None):
    if config.k1 is None:
        bands = propagative_projection_full(spec, grid=config.grid, tol=config.edge_tol)
    else:
        bands = propagative_projection_k1(
            spec, config.k1, grid=config.grid, tol=config.edge_tol
        )
    header = make_header(
        spec, command="project", grid=config.grid, k1=config.k1, edge_tol=config.edge_tol
    )
    write_json(output, header, {"intervals": [list(i) for i in bands.intervals]})


def guided_sweep(spec: LatticeSpec, k1s: np.ndarray, config: RunConfig):
    """Guided roots and I_p(k1) bands at each sample."""

    def at(k1: float):
        roots = scan_guided(spec, k1, tol=config.tol).roots
        return roots, propagative_projection_k1(spec, k1, tol=config.edge_tol)

    return parallel_map(at, list(k1s), threads=config.threads)


def _write_guided(k1s, sweep, output: Path | None, header: dict):
    rows = [
        (float(k1), branch, omega)
        for k1, (roots, _) in zip(k1s, sweep, strict=True)
        for branch, omega in enumerate(roots)
    ]
    write_csv(output, header, ["k1", "branch", "omega_g"], rows)
    if output is None or str(output) == "-":
        return
    sidecar = {
        "bands": [
            {"k1": float(k1), "intervals": [list(i) for i in bands.intervals]}
            for k1, (_, bands) in zip(k1s, sweep, strict=True)
        ]
    }
    write_json(output.with_suffix(".bands.json"), header, sidecar)


def cmd_guided(config: RunConfig, spec: LatticeSpec, output: Path | None):
    k1s = _k1_samples(config.k1_samples)
    sweep = guided_sweep(spec, k1s, config)
    header = make_header(
        spec,
        command="guided",
        k1_samples=config.k1_samples,
        tol=config.tol,
        edge_tol=config.edge_tol,
    )
    _write_guided(k1s, sweep, output, header)


def localized_payload(spec: LatticeSpec, tol: float) -> dict:
    scan = scan_localized(spec, tol=tol)
    structure = scan.structure
    payload = {
        "i_p": [list(i) for i in structure.i_p.intervals],
        "i_g": [list(i) for i in structure.i_g.intervals],
        "gaps": [
            {"interval": list(gap), "tail": structure.is_tail(index)}
            for index, gap in enumerate(structure.gaps.intervals)
        ],
        "roots": [
            {"omega": m.omega, "gap_index": m.gap_index, "residual": m.residual}
            for m in scan.modes
        ],
        "rejected": scan.rejected,
        "saturated": [list(s) for s in scan.saturated],
        "d_loc_limit": scan.limit,
        "classification": None,
        "thresholds": None,
    }
    uniform = _uniform_parameters(spec)
    if uniform is not None:
        report = classify_existence(*uniform)
        payload["classification"] = report.model_dump(mode="json")
        payload["thresholds"] = {"m2": report.threshold, "d1_edge": report.d1_edge}
    return payload


def cmd_localized(config: RunConfig, spec: LatticeSpec, output: Path | None):
    header = make_header(spec, command="localized", tol=config.tol)
    write_json(output, header, localized_payload(spec, config.tol))


def region_rows(config: RunConfig):
    m_tildes = np.geomspace(config.m_tilde_min, config.m_tilde_max, config.m_tilde_samples)
    return [
        (r["m_tilde"], r["m_bar_boundary"], r["m_bar_diagonal"], r["regime"])
        for r in region_map(m_tildes)
    ]


def cmd_region_map(config: RunConfig, output: Path | None):
    header = make_header(
        None,
        command="region-map",
        m_tilde_min=config.m_tilde_min,
        m_tilde_max=config.m_tilde_max,
        m_tilde_samples=config.m_tilde_samples,
    )
    columns = ["m_tilde", "m_bar_boundary", "m_bar_diagonal", "regime"]
    write_csv(output, header, columns, region_rows(config))


def dloc_trace(spec: LatticeSpec, samples: int, tol: float):
    """(omega, gap, Re d_loc, Im d_loc) sampled inside every gap."""
    structure = gap_structure(spec)
    bands = structure.i_p.union(structure.i_g)
    rows = []
    for index, (a, b) in enumerate(structure.gaps.intervals):
        tail = structure.is_tail(index)
        omegas = scan_grid(
            a,
            b,
            points=samples,
            open_lo=bands.contains(a, margin=1e-12),
            open_hi=not tail,
            tail=tail,
        )
        omegas = np.array([w for w in omegas if bands.distance(w) >= GUARD])
        if not omegas.size:
            continue
        values = d_loc_values(spec, omegas, tol=tol)
        rows += [(float(w), index, v.real, v.imag) for w, v in zip(omegas, values, strict=True)]
    return rows


def cmd_dloc_trace(config: RunConfig, spec: LatticeSpec, output: Path | None):
    header = make_header(
        spec, command="dloc-trace", omega_samples=config.omega_samples, tol=config.tol
    )
    rows = dloc_trace(spec, config.omega_samples, config.tol)
    write_csv(output, header, ["omega", "gap_index", "d_loc", "d_loc_imag"], rows)


def cmd_oracle(config: RunConfig, spec: LatticeSpec, output: Path | None):
    modes = finite_oracle(spec, size=(config.size, config.size), seed=config.seed)
    roots = [m.omega for m in scan_localized(spec, tol=config.tol).modes] if spec.has_point() else []
    window = (config.window, config.window)
    agreement = oracle_agreement(spec, modes, roots, window=window, grid=config.synthesis_grid)
    header = make_header(
        spec,
        command="oracle",
        size=config.size,
        seed=config.seed,
        window=config.window,
        synthesis_grid=config.synthesis_grid,
        tol=config.tol,
    )
    payload = {
        "candidates": [[m.omega, m.participation_ratio] for m in modes if m.is_candidate],
        "modes": [
            {
                "omega": m.omega,
                "participation_ratio": m.participation_ratio,
                "gap_index": m.gap_index,
                "boundary_ratio": m.boundary_ratio,
            }
            for m in modes
        ],
        "roots": roots,
        "agreement": [
            {
                "oracle_omega": a.oracle_omega,
                "root_omega": a.root_omega,
                "frequency_error": a.frequency_error,
                "shape_similarity": a.shape_similarity,
            }
            for a in agreement
        ],
    }
    write_json(output, header, payload)


def cmd_modeshape(config: RunConfig, spec: LatticeSpec, output: Path | None, kind: str):
    window = (config.window, config.window)
    if kind == "localized":
        omega = config.omega
        if omega is None:
            modes = scan_localized(spec, tol=config.tol).modes
            if not modes:
                raise LatticeError("no localized mode to draw; pass --omega")
            omega = modes[0].omega
        mode = reconstruct_localized_mode(spec, omega, window=window, grid=config.synthesis_grid)
    else:
        k1 = config.k1 if config.k1 is not None else np.pi
        omega = config.omega
        if omega is None:
            roots = scan_guided(spec, k1).roots
            if not roots:
                raise LatticeError(f"no guided mode at k1={k1}; pass --omega")
            omega = roots[0]
        mode = reconstruct_guided_mode(spec, k1, omega, window=window, grid=config.synthesis_grid)

    ox, oy = mode.origin
    rows = [
        (x - ox, y - oy, value.real, value.imag, abs(value))
        for (x, y), value in np.ndenumerate(mode.shape)
    ]
    header = make_header(
        spec,
        command="modeshape",
        kind=kind,
        omega=mode.omega,
        k1=mode.k1,
        decay_rate_x=mode.decay_rate_x,
        decay_rate_y=mode.decay_rate_y,
        participation_ratio=mode.participation_ratio,
    )
    write_csv(output, header, ["n1", "n2", "re", "im", "abs"], rows)


def cmd_classify(config: RunConfig, output: Path | None):
    if config.m1 is None or config.m2 is None:
        raise ConfigError("classify needs both --m1 and --m2")
    report = classify_existence(config.m1, config.m2)
    header = make_header(None, command="classify", m1=config.m1, m2=config.m2)
    payload = report.model_dump(mode="json")
    payload["total_modes"] = report.total_modes
    write_json(output, header, payload)


def repro_figure1(config: RunConfig, directory: Path):
    k1s = _k1_samples(config.k1_samples)
    for panel, m1 in FIGURE1_STRIPS.items():
        spec = LatticeSpec.uniform(m1)
        sweep = guided_sweep(spec, k1s, config)
        header = make_header(
            spec,
            command="repro",
            figure=1,
            panel=panel,
            m1=m1,
            k1_samples=config.k1_samples,
            tol=config.tol,
            edge_tol=config.edge_tol,
        )
        _write_guided(k1s, sweep, directory / f"fig1_{panel}.csv", header)


def repro_figure2(config: RunConfig, directory: Path):
    for case in reference_cases():
        spec = LatticeSpec.uniform(case.m1, case.m2)
        header = make_header(
            spec,
            command="repro",
            figure=2,
            panel=case.panel,
            m1=case.m1,
            m2=case.m2,
            omega_samples=config.omega_samples,
            tol=config.tol,
        )
        rows = dloc_trace(spec, config.omega_samples, config.tol)
        write_csv(
            directory / f"fig2_{case.panel}.csv",
            header,
            ["omega", "gap_index", "d_loc", "d_loc_imag"],
            rows,
        )
    report = EvaluationPipeline().run_full_evaluation()
    write_json(
        directory / "fig2_roots.json",
        make_header(None, command="repro", figure=2),
        report.model_dump(mode="json"),
    )


def repro_figure3(config: RunConfig, directory: Path):
    header = make_header(
        None,
        command="repro",
        figure=3,
        m_tilde_min=config.m_tilde_min,
        m_tilde_max=config.m_tilde_max,
        m_tilde_samples=config.m_tilde_samples,
    )
    columns = ["m_tilde", "m_bar_boundary", "m_bar_diagonal", "regime"]
    write_csv(directory / "fig3_region_map.csv", header, columns, region_rows(config))


REPRO = {"1": repro_figure1, "2": repro_figure2, "3": repro_figure3}


def cmd_repro(config: RunConfig, figure: str, directory: Path):
    figures = sorted(REPRO) if figure == "all" else [figure]
    for name in figures:
        with logfire.span("repro", figure=name):
            REPRO[name](config, directory)


# argument parsing


class JsonErrorParser(argparse.ArgumentParser):
    """Argument parser that raises ConfigError instead of printing usage and exiting."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    common.add_argument("--m1", type=float, default=None, help="strip mass increment")
    common.add_argument("--m2", type=float, default=None, help="point defect increment")
    common.add_argument("-o", "--output", type=Path, default=None, help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=None, help="worker threads")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--tol", type=float, default=None, help="determinant quadrature tolerance")

    parser = JsonErrorParser(
        prog="lattice-defects",
        description="Propagative, guided and localized spectra of a defected mass-spring lattice",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bands = sub.add_parser("bands", parents=[common], help="dispersion table (CSV)")
    bands.add_argument("--grid", type=int, default=None)

    project = sub.add_parser("project", parents=[common], help="propagative band projection (JSON)")
    project.add_argument("--grid", type=int, default=None)
    project.add_argument("--k1", type=float, default=None, help="project at fixed k1 only")

    guided = sub.add_parser("guided", parents=[common], help="guided dispersion curves (CSV)")
    guided.add_argument("--k1-samples", type=int, default=None)

    sub.add_parser("localized", parents=[common], help="localized roots and gaps (JSON)")

    region = sub.add_parser("region-map", parents=[common], help="existence region boundary (CSV)")
    region.add_argument("--m-tilde-min", type=float, default=None)
    region.add_argument("--m-tilde-max", type=float, default=None)
    region.add_argument("--m-tilde-samples", type=int, default=None)

    trace = sub.add_parser("dloc-trace", parents=[common], help="localized determinant in the gaps (CSV)")
    trace.add_argument("--omega-samples", type=int, default=None)

    oracle = sub.add_parser("oracle", parents=[common], help="finite clamped lattice eigenmodes (JSON)")
    oracle.add_argument("--size", type=int, default=None)

    shape = sub.add_parser("modeshape", parents=[common], help="real-space mode shape (CSV)")
    shape.add_argument("--kind", choices=["localized", "guided"], default="localized")
    shape.add_argument("--omega", type=float, default=None)
    shape.add_argument("--k1", type=float, default=None)
    shape.add_argument("--window", type=int, default=None)

    sub.add_parser("classify", parents=[common], help="existence verdict for the uniform example (JSON)")

    repro = sub.add_parser("repro", parents=[common], help="regenerate figure data")
    repro.add_argument("--figure", choices=["1", "2", "3", "all"], default="all")
    repro.add_argument("--output-dir", type=Path, default=Path("repro"))
    repro.add_argument("--k1-samples", type=int, default=None, help="guided curve samples (figure 1)")
    repro.add_argument("--omega-samples", type=int, default=None, help="determinant trace samples (figure 2)")
    repro.add_argument("--m-tilde-min", type=float, default=None)
    repro.add_argument("--m-tilde-max", type=float, default=None)
    repro.add_argument("--m-tilde-samples", type=int, default=None, help="region map samples (figure 3)")
    return parser


OVERRIDE_KEYS = (
    "m1",
    "m2",
    "threads",
    "seed",
    "tol",
    "grid",
    "k1",
    "k1_samples",
    "m_tilde_min",
    "m_tilde_max",
    "m_tilde_samples",
    "omega_samples",
    "size",
    "omega",
    "window",
)


def _overrides(args: argparse.Namespace) -> dict:
    return {
        key: getattr(args, key)
        for key in OVERRIDE_KEYS
        if getattr(args, key, None) is not None
    }


def _error_json(error: Exception) -> str:
    body = {"type": type(error).__name__, "message": str(error)}
    if isinstance(error, ConfigError):
        body.update(line=error.line, column=error.column)
    return json.dumps({"error": body}, sort_keys=True)


def dispatch(args: argparse.Namespace) -> None:
    config = load_run_config(args.config, _overrides(args))
    set_thread_override(config.threads)
    output = args.output

    if args.command == "classify":
        return cmd_classify(config, output)
    if args.command == "region-map":
        return cmd_region_map(config, output)
    if args.command == "repro":
        return cmd_repro(config, args.figure, args.output_dir)

    base = args.config.parent if args.config is not None else None
    spec = config.resolve_spec(base)
    if args.command == "bands":
        cmd_bands(config, spec, output)
    elif args.command == "project":
        cmd_project(config, spec, output)
    elif args.command == "guided":
        cmd_guided(config, spec, output)
    elif args.command == "localized":
        cmd_localized(config, spec, output)
    elif args.command == "dloc-trace":
        cmd_dloc_trace(config, spec, output)
    elif args.command == "oracle":
        cmd_oracle(config, spec, output)
    elif args.command == "modeshape":
        cmd_modeshape(config, spec, output, args.kind)


def run(argv: list[str] | None = None) -> int:
    """Run one subcommand and return its exit status."""
    setup_env()
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        sys.stderr.write(_error_json(e) + "\n")
        return EXIT_CONFIG
    try:
        with logfire.span("lattice-defects {command}", command=args.command):
            dispatch(args)
    except ConfigError as e:
        sys.stderr.write(_error_json(e) + "\n")
        return EXIT_CONFIG
    except LatticeError as e:
        sys.stderr.write(_error_json(e) + "\n")
        return EXIT_DOMAIN
    except OSError as e:
        sys.stderr.write(_error_json(e) + "\n")
        return EXIT_IO
    finally:
        set_thread_override(None)
    return 0


def main() -> None:
    """Console-script entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
