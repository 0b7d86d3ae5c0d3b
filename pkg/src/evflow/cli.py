"""Command-line driver: evflow solve | convergence | compare-dd.

Parameters come either from a TOML config file (--config) or from inline
flags, not both. The convergence command writes a deterministic CSV
(n,e_u,order_u,e_rec,order_rec; 6 significant digits, scientific notation,
orders empty on the first row). EVFLOW_THREADS caps how many study levels
run concurrently (default 1).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config, validate_config
from .coupling import compare_dd
from .darcy import SolverError, solve_case
from .mesh import (
    Discretization,
    MeshError,
    build_checkerboard,
    build_multiblock,
    build_two_blocks,
    discretize,
)
from .postprocess import edge_value_arrays, recover
from .verification import (
    ConvergenceRow,
    interface_velocity_error,
    study_levels,
)
from .vtkio import subdomain_cell_arrays, write_structured_points


def _fmt(x: float) -> str:
    return f"{x:.5e}"


def rows_to_csv(rows: list[ConvergenceRow]) -> str:
    lines = ["n,e_u,order_u,e_rec,order_rec"]
    for r in rows:
        ou = _fmt(r.order_u) if r.order_u is not None else ""
        orr = _fmt(r.order_rec) if r.order_rec is not None else ""
        lines.append(f"{r.n},{_fmt(r.e_u)},{ou},{_fmt(r.e_rec)},{orr}")
    return "\n".join(lines) + "\n"


def csv_to_rows(text: str) -> list[ConvergenceRow]:
    rows = []
    lines = text.strip().split("\n")
    assert lines[0] == "n,e_u,order_u,e_rec,order_rec"
    for line in lines[1:]:
        n, e_u, ou, e_rec, orr = line.split(",")
        rows.append(
            ConvergenceRow(
                int(n),
                float(e_u),
                float(ou) if ou else None,
                float(e_rec),
                float(orr) if orr else None,
            )
        )
    return rows


def build_mesh(cfg: RunConfig) -> Discretization:
    if cfg.layout == "checkerboard2x2":
        # table convention: level n means coarse spacing 1/n, fine cells 2n
        return discretize(build_checkerboard(2 * cfg.n, ratio=cfg.ratio))
    if cfg.layout == "two_blocks":
        return discretize(build_two_blocks(cfg.n, ratio=cfg.ratio))
    blocks = [b[0] for b in cfg.blocks]
    res = [b[1] for b in cfg.blocks]
    return discretize(build_multiblock(blocks, res, layout="explicit"))


def _workers(levels: list[int]) -> int:
    try:
        cap = int(os.environ.get("EVFLOW_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(len(levels), cap))


def cmd_solve(cfg: RunConfig) -> int:
    case = cfg.resolve_case()
    disc = build_mesh(cfg)
    sol = solve_case(disc, case, tol=cfg.solver_tol)
    post = recover(sol, case.K, disc, case.g)
    edge_values = edge_value_arrays(sol, disc)
    outdir = Path(cfg.vtk)
    outdir.mkdir(parents=True, exist_ok=True)
    for sub in disc.mesh.subdomains:
        off = disc.dofmap.cell_offset[sub.id]
        cells = subdomain_cell_arrays(
            sub, sol.p[off : off + sub.n_cells], *edge_values[sub.id]
        )
        path = outdir / f"{case.name}_block{sub.id}.vtk"
        write_structured_points(
            path, sub, {"recovered_pressure": post.nodal[sub.id].values}, cells
        )
        print(f"wrote {path}")
    if disc.trace.sub_edges:
        raw = sol.u[disc.dofmap.subedge_dof]
        e_u = interface_velocity_error(raw, case, disc, weighted=cfg.weighted_norm)
        e_rec = interface_velocity_error(
            post.recovered.values, case, disc, weighted=cfg.weighted_norm
        )
        print(f"interface error: raw {_fmt(e_u)}  recovered {_fmt(e_rec)}")
    print(f"conservation residual: {sol.conservation_residual:.3e}")
    return 0


def cmd_convergence(cfg: RunConfig) -> int:
    case = cfg.resolve_case()
    rows = study_levels(
        case,
        cfg.levels,
        ratio=cfg.ratio,
        weighted=cfg.weighted_norm,
        workers=_workers(cfg.levels),
        solver_tol=cfg.solver_tol,
    )
    csv = rows_to_csv(rows)
    out = Path(cfg.output)
    if out.parent != Path("."):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(csv, encoding="utf-8")
    print(csv, end="")
    print(f"wrote {out}")
    return 0


def cmd_compare_dd(cfg: RunConfig) -> int:
    if cfg.layout == "checkerboard2x2":
        cfg.layout = "two_blocks"  # DD path is two-block by construction
    case = cfg.resolve_case()
    disc = build_mesh(cfg)
    result = compare_dd(disc, case, tol=cfg.dd_tol, max_iter=cfg.dd_max_iter)
    print(
        f"block-jacobi vs monolithic: max |du| {result['max_du']:.3e}  "
        f"max |dp| {result['max_dp']:.3e}  iterations {result['iterations']}"
    )
    return 0


_COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "compare-dd": cmd_compare_dd,
}


def run(command: str, cfg: RunConfig) -> int:
    if command not in _COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    return _COMMANDS[command](cfg)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="evflow",
        description="Darcy flow on non-matching multiblock grids with "
        "interface flux recovery",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("solve", "solve one level and write VTK fields"),
        ("convergence", "run a refinement study and write the CSV table"),
        ("compare-dd", "Block-Jacobi vs monolithic on a two-block split"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="TOML config file")
        p.add_argument("--test", type=int, choices=(1, 2), help="builtin case id")
        p.add_argument("--n", type=int, help="level parameter")
        p.add_argument("--levels", type=str, help="comma-separated levels")
        p.add_argument("--ratio", type=int, help="coarse/fine spacing ratio")
        p.add_argument("--layout", type=str, help="checkerboard2x2 or two_blocks")
        p.add_argument("--output", type=str, help="CSV output path")
        p.add_argument("--vtk", type=str, help="VTK output directory")
        p.add_argument(
            "--unweighted",
            action="store_true",
            help="drop length weights in the interface error norm",
        )
    return ap


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    inline = {
        k: v
        for k, v in (
            ("test", args.test),
            ("n", args.n),
            ("ratio", args.ratio),
            ("layout", args.layout),
            ("output", args.output),
            ("vtk", args.vtk),
        )
        if v is not None
    }
    if args.levels is not None:
        try:
            inline["levels"] = [int(v) for v in args.levels.split(",")]
        except ValueError:
            raise ConfigError([("levels", "must be comma-separated integers")])
    if args.unweighted:
        inline["weighted_norm"] = False
    if args.config is not None:
        if inline:
            raise ConfigError(
                [("<args>", "give either --config or inline flags, not both")]
            )
        return parse_config(args.config.read_text(encoding="utf-8"))
    inline["schema"] = 1
    return validate_config(inline)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return run(args.command, cfg)
    except ConfigError as exc:
        for key, reason in exc.errors:
            print(f"config error: {key}: {reason}", file=sys.stderr)
        return 2
    except (MeshError, SolverError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
