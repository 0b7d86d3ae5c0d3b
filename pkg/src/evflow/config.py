"""Run configuration: a versioned TOML document, fully validated up front.

Schema (version 1):

    schema = 1                    # required
    test = 1                      # builtin case id (1 or 2), or a [case] table
    layout = "checkerboard2x2"    # "checkerboard2x2" | "two_blocks" | "explicit"
    levels = [8, 16, 32, 48]      # convergence levels (each divisible by ratio)
    n = 8                         # level for solve / compare-dd
    ratio = 4                     # coarse-to-fine spacing ratio H/h
    solver_tol = 1e-12            # pressure solve relative residual
    weighted_norm = true          # length-weighted interface error norm
    dd_tol = 1e-10                # Block-Jacobi stopping tolerance
    dd_max_iter = 5000
    output = "convergence.csv"    # CSV path for the convergence command
    vtk = "evflow_out"            # output directory for the solve command

    [case]                        # custom manufactured case (instead of test)
    p = "sin(2*pi*x)*sin(2*pi*y)" # analytic pressure, variables x and y
    k = "1"                       # diagonal permeability (or kxx = / kyy =)

    [[blocks]]                    # explicit layout (layout = "explicit")
    extent = [0.0, 0.5, 0.0, 1.0]
    resolution = [8, 16]

Unknown keys are rejected. Custom-case sources and boundary data are derived
symbolically from p and k.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .darcy import ManufacturedCase, PermField


class ConfigError(ValueError):
    """Validation failure; `errors` lists (key, reason) pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{k}: {r}" for k, r in errors))


_TOP_KEYS = {
    "schema", "test", "case", "layout", "blocks", "levels", "n", "ratio",
    "solver_tol", "weighted_norm", "dd_tol", "dd_max_iter", "output", "vtk",
}
_CASE_KEYS = {"p", "k", "kxx", "kyy"}


@dataclass
class RunConfig:
    schema: int = 1
    test: int | None = None
    case_exprs: dict | None = None
    layout: str = "checkerboard2x2"
    blocks: list = field(default_factory=list)
    levels: list[int] = field(default_factory=lambda: [8, 16, 32, 48])
    n: int = 8
    ratio: int = 4
    solver_tol: float = 1e-12
    weighted_norm: bool = True
    dd_tol: float = 1e-10
    dd_max_iter: int = 5000
    output: str = "convergence.csv"
    vtk: str = "evflow_out"

    def resolve_case(self) -> ManufacturedCase:
        from .verification import manufactured_case

        if self.case_exprs is not None:
            return symbolic_case(self.case_exprs)
        return manufactured_case(self.test if self.test is not None else 1)


def symbolic_case(exprs: dict) -> ManufacturedCase:
    """Manufactured case from analytic expressions for p and the diagonal
    permeability; u, f and g are derived symbolically."""
    import sympy as sym

    x, y = sym.symbols("x y")
    local = {"x": x, "y": y, "pi": sym.pi}
    try:
        p = sym.sympify(exprs["p"], locals=local)
        if "k" in exprs:
            kxx = kyy = sym.sympify(exprs["k"], locals=local)
        else:
            kxx = sym.sympify(exprs["kxx"], locals=local)
            kyy = sym.sympify(exprs["kyy"], locals=local)
    except (sym.SympifyError, TypeError) as exc:
        raise ConfigError([("case", f"cannot parse expression: {exc}")]) from exc
    ux = -kxx * sym.diff(p, x)
    uy = -kyy * sym.diff(p, y)
    f = sym.diff(ux, x) + sym.diff(uy, y)
    fns = {
        name: sym.lambdify((x, y), e, modules="numpy")
        for name, e in (("p", p), ("ux", ux), ("uy", uy), ("f", f),
                        ("kxx", kxx), ("kyy", kyy))
    }

    def broadcast(fn):
        # lambdified constants return scalars; promote to the input shape
        def wrapped(a, b):
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            out = np.asarray(fn(a, b), dtype=float)
            shape = np.broadcast_shapes(a.shape, b.shape)
            return np.broadcast_to(out, shape).copy()

        return wrapped

    pf = broadcast(fns["p"])
    kf = PermField(
        lambda a, b: (broadcast(fns["kxx"])(a, b), broadcast(fns["kyy"])(a, b)),
        kmin=np.nan,
        kmax=np.nan,
    )
    return ManufacturedCase(
        name="custom",
        p=pf,
        u=lambda a, b: (broadcast(fns["ux"])(a, b), broadcast(fns["uy"])(a, b)),
        f=broadcast(fns["f"]),
        g=pf,
        K=kf,
    )


def _expect(errors, cond, key, reason):
    if not cond:
        errors.append((key, reason))
    return cond


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML config; raises ConfigError listing every
    offending key with its reason."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([("<document>", f"not valid TOML: {exc}")]) from exc
    return validate_config(data)


def validate_config(data: dict) -> RunConfig:
    errors: list[tuple[str, str]] = []
    for key in data:
        if key not in _TOP_KEYS:
            errors.append((key, "unknown key"))

    if "schema" not in data:
        errors.append(("schema", "required key missing"))
    elif data["schema"] != 1:
        errors.append(("schema", f"unsupported version {data['schema']!r}"))

    cfg = RunConfig()

    if "test" in data and "case" in data:
        errors.append(("test", "give either a builtin test id or a [case] table, not both"))
    if "test" in data:
        if _expect(errors, data["test"] in (1, 2), "test", "must be 1 or 2"):
            cfg.test = int(data["test"])
    if "case" in data:
        case = data["case"]
        if _expect(errors, isinstance(case, dict), "case", "must be a table"):
            for key in case:
                if key not in _CASE_KEYS:
                    errors.append((f"case.{key}", "unknown key"))
            has_p = "p" in case
            has_k = "k" in case or ("kxx" in case and "kyy" in case)
            _expect(errors, has_p, "case.p", "required")
            _expect(errors, has_k, "case.k", "required (k, or kxx and kyy)")
            if has_p and has_k:
                cfg.case_exprs = case

    if "layout" in data:
        if _expect(
            errors,
            data["layout"] in ("checkerboard2x2", "two_blocks", "explicit"),
            "layout",
            "must be checkerboard2x2, two_blocks or explicit",
        ):
            cfg.layout = data["layout"]
    if cfg.layout == "explicit" or "blocks" in data:
        blocks = data.get("blocks")
        if _expect(errors, isinstance(blocks, list) and blocks, "blocks",
                   "explicit layout needs a nonempty [[blocks]] list"):
            parsed = []
            for k, blk in enumerate(blocks):
                ext = blk.get("extent") if isinstance(blk, dict) else None
                res = blk.get("resolution") if isinstance(blk, dict) else None
                ok_ext = isinstance(ext, list) and len(ext) == 4 and all(
                    isinstance(v, (int, float)) for v in ext
                )
                ok_res = isinstance(res, list) and len(res) == 2 and all(
                    isinstance(v, int) and v >= 1 for v in res
                )
                _expect(errors, ok_ext, f"blocks[{k}].extent", "need [x0, x1, y0, y1]")
                _expect(errors, ok_res, f"blocks[{k}].resolution",
                        "need two positive integers")
                if ok_ext and ok_res:
                    parsed.append((tuple(float(v) for v in ext), tuple(res)))
            cfg.blocks = parsed
            if isinstance(blocks, list) and blocks:
                cfg.layout = "explicit"

    if "ratio" in data:
        if _expect(errors, isinstance(data["ratio"], int) and data["ratio"] >= 1,
                   "ratio", "must be a positive integer"):
            cfg.ratio = data["ratio"]
    if "levels" in data:
        lv = data["levels"]
        ok = isinstance(lv, list) and lv and all(isinstance(v, int) and v > 0 for v in lv)
        if _expect(errors, ok, "levels", "must be a nonempty list of positive integers"):
            if _expect(errors, sorted(lv) == lv, "levels", "must be increasing"):
                cfg.levels = list(lv)
    if "n" in data:
        if _expect(errors, isinstance(data["n"], int) and data["n"] > 0,
                   "n", "must be a positive integer"):
            cfg.n = data["n"]

    for key, attr, typ in (
        ("solver_tol", "solver_tol", float),
        ("dd_tol", "dd_tol", float),
    ):
        if key in data:
            v = data[key]
            if _expect(errors, isinstance(v, (int, float)) and v > 0, key,
                       "must be a positive number"):
                setattr(cfg, attr, float(v))
    if "dd_max_iter" in data:
        v = data["dd_max_iter"]
        if _expect(errors, isinstance(v, int) and v >= 1, "dd_max_iter",
                   "must be a positive integer"):
            cfg.dd_max_iter = v
    if "weighted_norm" in data:
        v = data["weighted_norm"]
        if _expect(errors, isinstance(v, bool), "weighted_norm", "must be a boolean"):
            cfg.weighted_norm = v
    for key in ("output", "vtk"):
        if key in data:
            v = data[key]
            if _expect(errors, isinstance(v, str) and v, key, "must be a nonempty path"):
                setattr(cfg, key, v)

    # mesh/solver preconditions
    if cfg.layout == "checkerboard2x2":
        for n in cfg.levels:
            if n % cfg.ratio != 0:
                errors.append(("levels", f"{n} not divisible by {cfg.ratio}"))
        if cfg.n % cfg.ratio != 0:
            errors.append(("n", f"{cfg.n} not divisible by {cfg.ratio}"))
    if cfg.layout == "two_blocks" and cfg.n % cfg.ratio != 0:
        errors.append(("n", f"{cfg.n} not divisible by {cfg.ratio}"))

    if errors:
        raise ConfigError(errors)
    return cfg
