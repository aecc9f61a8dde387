"""Command-line front end: ``polyvem gen-mesh | check-mesh | solve | study``.

Exit codes: 0 success, 2 invalid configuration or input, 3 mesh generation
failure, 4 solver failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .assembly import BoundarySpecError, SolverError
from .mesh import MeshError, MeshFormatError, check_quality, format_mesh, read_mesh
from .report import markdown_summary, svg_loglog, write_csv
from .verification import CASES, build_mesh, make_case, projected_coefficients, run_study, solve_case

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_SOLVER = 4

FAMILIES = ("tri", "dquad", "voronoi")


class ConfigError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser, with_case: bool = True) -> None:
    p.add_argument("--family", choices=FAMILIES, default="voronoi")
    p.add_argument("--n", type=int, default=16, help="seeds (voronoi) or cells per side (tri, dquad)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed; POLYVEM_SEED overrides it")
    p.add_argument("--jitter", type=float, default=0.2, help="vertex jitter for tri meshes")
    p.add_argument("--lloyd", type=int, default=50, help="Lloyd iterations for voronoi meshes")
    p.add_argument("--config", help="file of key=value lines supplying defaults for these flags")
    if with_case:
        p.add_argument("--case", choices=sorted(CASES), default="test1")
        p.add_argument("--alpha", type=float, default=0.5, help="edge split fraction in (0, 1)")
        p.add_argument("--mu", type=float, default=None, help="default: 1, or 0.5 for test2")
        p.add_argument("--no-split", action="store_true", help="run on the unsplit mesh (baseline)")
        p.add_argument("--solver", choices=("direct", "cg"), default="direct")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyvem", description="Locking-free polygonal VEM for plane elasticity")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-mesh", help="generate a mesh file and a quality report")
    _add_common(g, with_case=False)
    g.add_argument("--out", required=True, help="mesh file path; the report goes to <out>.quality.txt")

    c = sub.add_parser("check-mesh", help="print the quality report of a mesh file")
    c.add_argument("path")

    s = sub.add_parser("solve", help="solve one case on one mesh")
    _add_common(s)
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--mesh", help="read this mesh file instead of generating one")
    s.add_argument("--out", help="directory for solution.csv and report.txt")

    st = sub.add_parser("study", help="convergence study over mesh levels and lambda values")
    _add_common(st)
    st.add_argument("--lambda", dest="lam", type=_float_list, default=[1.0], help="comma-separated list")
    st.add_argument("--sizes", type=_int_list, help="explicit comma-separated mesh sizes")
    st.add_argument("--levels", type=int, default=4, help="levels refined from --n when --sizes is absent")
    st.add_argument("--out", required=True, help="output directory")
    st.add_argument("--svg", action="store_true", help="also write log-log plots")
    st.add_argument("--jobs", type=int, default=1)
    st.add_argument("--deterministic", action="store_true", help="serial execution (forces --jobs 1)")
    return parser


def read_config(path) -> list[str]:
    """Turn ``key = value`` lines into flags; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    argv = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if flag in ("--config", "--command"):
            raise ConfigError(f"{path}:{lineno}: key {key!r} is not allowed in a config file")
        low = value.lower()
        if low in ("true", "yes", "on"):
            argv.append(flag)
        elif low in ("false", "no", "off"):
            continue
        else:
            argv.extend([flag, value])
    return argv


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    out = list(argv)
    for i, a in enumerate(out):
        if a == "--config" and i + 1 < len(out):
            path = out[i + 1]
            del out[i:i + 2]
            break
        if a.startswith("--config="):
            path = a.split("=", 1)[1]
            del out[i]
            break
    else:
        raise ConfigError("--config requires a path")
    # config values go right after the subcommand so explicit flags win
    return out[:1] + read_config(path) + out[1:]


def _validate(args) -> None:
    if getattr(args, "n", 1) < 1:
        raise ConfigError("--n must be at least 1")
    alpha = getattr(args, "alpha", 0.5)
    if not 0.0 < alpha < 1.0:
        raise ConfigError("--alpha must lie in (0, 1)")
    if getattr(args, "mu", None) is not None and args.mu <= 0:
        raise ConfigError("--mu must be positive")
    lam = getattr(args, "lam", 1.0)
    lams = lam if isinstance(lam, list) else [lam]
    if not lams or any(not (v > 0 and math.isfinite(v)) for v in lams):
        raise ConfigError("lambda values must be positive")
    if getattr(args, "levels", 1) < 1:
        raise ConfigError("--levels must be at least 1")
    sizes = getattr(args, "sizes", None)
    if sizes is not None and (not sizes or min(sizes) < 1):
        raise ConfigError("--sizes must be positive integers")
    if getattr(args, "jobs", 1) < 1:
        raise ConfigError("--jobs must be at least 1")


def _seed(args) -> int:
    env = os.environ.get("POLYVEM_SEED")
    if env is None or env == "":
        return args.seed
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"POLYVEM_SEED must be an integer, got {env!r}") from None


def level_sizes(family: str, n: int, levels: int) -> list[int]:
    """Sizes that roughly halve h per level: 4x seeds for voronoi, 2x cells per side otherwise."""
    factor = 4 if family == "voronoi" else 2
    return [n * factor ** i for i in range(levels)]


def cmd_gen_mesh(args) -> int:
    seed = _seed(args)
    try:
        mesh = build_mesh(args.family, args.n, seed, args.jitter, args.lloyd)
        report = check_quality(mesh)
    except (MeshError, ValueError) as exc:
        print(f"error: mesh generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(format_mesh(mesh))
    text = (
        f"family: {args.family}\nn: {args.n}\nseed: {seed}\n"
        f"vertices: {mesh.n_vertices}\n{report}"
    )
    Path(str(out) + ".quality.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_check_mesh(args) -> int:
    try:
        mesh = read_mesh(args.path)
    except MeshFormatError as exc:
        print(f"error: {args.path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = check_quality(mesh)
    print(f"vertices: {mesh.n_vertices}\n{report}", end="")
    return EXIT_OK


def vertex_values(disc, dofs) -> np.ndarray:
    """Projected displacement at every vertex, averaged over the cells sharing it."""
    coeffs = projected_coefficients(disc, dofs)
    nv = disc.mesh.n_vertices
    acc = np.zeros((nv, 2))
    count = np.zeros(nv)
    for k, cell in enumerate(disc.mesh.cells):
        geom = disc.projections[k].geometry
        p = disc.mesh.vertices[cell]
        s = (p[:, 0] - geom.centroid[0]) / geom.diameter
        t = (p[:, 1] - geom.centroid[1]) / geom.diameter
        c = coeffs[k]
        acc[cell, 0] += c[0] + c[1] * s + c[2] * t
        acc[cell, 1] += c[3] + c[4] * s + c[5] * t
        count[cell] += 1
    return acc / count[:, None]


def cmd_solve(args) -> int:
    seed = _seed(args)
    try:
        case = make_case(args.case, args.lam, args.mu)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.mesh:
            mesh = read_mesh(args.mesh)
        else:
            mesh = build_mesh(args.family, args.n, seed, args.jitter, args.lloyd)
    except MeshFormatError as exc:
        print(f"error: {args.mesh}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MeshError, ValueError, OSError) as exc:
        print(f"error: mesh generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    try:
        result = solve_case(case, mesh, args.alpha, not args.no_split, args.solver)
    except BoundarySpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    err = result.errors
    text = (
        f"case: {case.name}\nlambda: {case.lam:g}\nmu: {case.mu:g}\n"
        f"split: {'no' if args.no_split else 'yes'}\nh: {err.h:.6e}\n"
        f"ErrH1: {err.err_h1:.6e}\nErrL2: {err.err_l2:.6e}\n"
        f"div_norm: {result.div_norm:.6e}\n{result.solution.report}"
    )
    if result.solution.multipliers is not None:
        text += "multipliers: " + " ".join(f"{b:.6e}" for b in result.solution.multipliers) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        vals = vertex_values(result.disc, result.solution.dofs)
        lines = ["x,y,ux,uy"]
        for (x, y), (ux, uy) in zip(result.disc.mesh.vertices, vals):
            lines.append(f"{x:.17g},{y:.17g},{ux:.17g},{uy:.17g}")
        (out / "solution.csv").write_text("\n".join(lines) + "\n")
    if not (math.isfinite(err.err_h1) and math.isfinite(err.err_l2)):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_study(args) -> int:
    seed = _seed(args)
    sizes = args.sizes or level_sizes(args.family, args.n, args.levels)
    jobs = 1 if args.deterministic else args.jobs
    try:
        make_case(args.case, args.lam[0], args.mu)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    tables = run_study(args.case, args.family, sizes, args.lam, args.alpha, args.mu, seed, args.lloyd,
                       not args.no_split, args.solver, jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t in tables:
        path = write_csv(t, out)
        if args.svg:
            path.with_suffix(".svg").write_text(svg_loglog(t))
    summary = markdown_summary(tables)
    stem = f"{args.case}_{args.family}" + ("_unsplit" if args.no_split else "")
    (out / f"{stem}_summary.md").write_text(summary)
    for t in tables:
        tag = f" [{t.label}]" if t.label else ""
        print(f"{t.case} lambda={t.lam:g}{tag}: H1 rate {t.rate_h1:.3f}, L2 rate {t.rate_l2:.3f}")
    failures = [r for t in tables for r in t.reports if r.failed]
    for r in failures:
        print(f"warning: level failed: {r.message}", file=sys.stderr)
    return EXIT_SOLVER if failures else EXIT_OK


COMMANDS = {"gen-mesh": cmd_gen_mesh, "check-mesh": cmd_check_mesh, "solve": cmd_solve, "study": cmd_study}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        _validate(args)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
