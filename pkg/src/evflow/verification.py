"""Manufactured solutions, interface error metric and convergence studies.

Both built-in cases use p = sin(2 pi x) sin(2 pi y) on the unit square with
homogeneous Dirichlet data; case 1 has unit permeability, case 2 the
oscillating diagonal coefficient 15 - 10 sin(3 pi x) sin(3 pi y). Sources
and boundary data are derived analytically from the exact solution.

The interface error is a length-weighted discrete L2 norm of the normal
flux mismatch at sub-edge midpoints, normalized by the same norm of the
exact flux (an unweighted variant is available for sensitivity checks).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .darcy import ManufacturedCase, MixedSolution, PermField, solve_case
from .mesh import Discretization, build_checkerboard, discretize
from .postprocess import PostFields, recover

TWO_PI = 2.0 * np.pi


def _case1() -> ManufacturedCase:
    def p(x, y):
        return np.sin(TWO_PI * x) * np.sin(TWO_PI * y)

    def u(x, y):
        return (
            -TWO_PI * np.cos(TWO_PI * x) * np.sin(TWO_PI * y),
            -TWO_PI * np.sin(TWO_PI * x) * np.cos(TWO_PI * y),
        )

    def f(x, y):
        return 8.0 * np.pi**2 * np.sin(TWO_PI * x) * np.sin(TWO_PI * y)

    return ManufacturedCase(
        name="uniform-permeability", p=p, u=u, f=f, g=p, K=PermField.constant(1.0)
    )


def _case2() -> ManufacturedCase:
    three_pi = 3.0 * np.pi

    def k(x, y):
        return 15.0 - 10.0 * np.sin(three_pi * x) * np.sin(three_pi * y)

    def kfield(x, y):
        v = k(x, y)
        return (v, v)

    def p(x, y):
        return np.sin(TWO_PI * x) * np.sin(TWO_PI * y)

    def px(x, y):
        return TWO_PI * np.cos(TWO_PI * x) * np.sin(TWO_PI * y)

    def py(x, y):
        return TWO_PI * np.sin(TWO_PI * x) * np.cos(TWO_PI * y)

    def u(x, y):
        kk = k(x, y)
        return (-kk * px(x, y), -kk * py(x, y))

    def f(x, y):
        kx = -10.0 * three_pi * np.cos(three_pi * x) * np.sin(three_pi * y)
        ky = -10.0 * three_pi * np.sin(three_pi * x) * np.cos(three_pi * y)
        return -(kx * px(x, y) + ky * py(x, y)) + k(x, y) * 8.0 * np.pi**2 * p(x, y)

    return ManufacturedCase(
        name="oscillating-permeability",
        p=p,
        u=u,
        f=f,
        g=p,
        K=PermField(kfield, 5.0, 25.0),
    )


def manufactured_case(case_id: int) -> ManufacturedCase:
    if case_id == 1:
        return _case1()
    if case_id == 2:
        return _case2()
    raise ValueError(f"unknown test case id {case_id!r}; expected 1 or 2")


def exact_normal_flux(disc: Discretization, case: ManufacturedCase) -> np.ndarray:
    """u_exact . normal at every sub-edge midpoint."""
    out = np.zeros(len(disc.trace.sub_edges))
    for k, e in enumerate(disc.trace.sub_edges):
        x, y = e.midpoint
        ux, uy = case.u(x, y)
        out[k] = float(ux) if e.axis == "x" else float(uy)
    return out


def interface_velocity_error(
    values: np.ndarray,
    case: ManufacturedCase,
    disc: Discretization,
    weighted: bool = True,
) -> float:
    """Relative discrete L2 error of normal fluxes over all sub-edges.

    Falls back to the unnormalized error when the exact interface flux is
    identically zero.
    """
    values = np.asarray(values, dtype=float)
    exact = exact_normal_flux(disc, case)
    w = (
        np.array([e.length for e in disc.trace.sub_edges])
        if weighted
        else np.ones_like(exact)
    )
    num = math.sqrt(float(np.sum(w * (values - exact) ** 2)))
    den = math.sqrt(float(np.sum(w * exact**2)))
    if den == 0.0:
        return num
    return num / den


def convergence_order(e1: float, e2: float, n1: int, n2: int) -> float:
    if e1 <= 0 or e2 <= 0 or n1 <= 0 or n2 <= n1:
        raise ValueError("need positive errors and n2 > n1")
    return math.log(e1 / e2) / math.log(n2 / n1)


def interior_velocity_error(
    sol: MixedSolution,
    case: ManufacturedCase,
    disc: Discretization,
    min_distance: float = 0.2,
) -> float:
    """Relative L2 error of cell-center velocities over cells farther than
    min_distance from the interface skeleton."""
    dm = disc.dofmap
    num = den = 0.0
    for sub in disc.mesh.subdomains:
        area = sub.hx * sub.hy
        for j in range(sub.ny):
            for i in range(sub.nx):
                cx, cy = sub.cell_center(i, j)
                if disc.mesh.distance_to_interfaces(cx, cy) <= min_distance:
                    continue
                dofs = (
                    dm.vdof[sub.id][i, j],
                    dm.vdof[sub.id][i + 1, j],
                    dm.hdof[sub.id][i, j],
                    dm.hdof[sub.id][i, j + 1],
                )
                assert min(dofs) >= 0
                ucx = 0.5 * (sol.u[dofs[0]] + sol.u[dofs[1]])
                ucy = 0.5 * (sol.u[dofs[2]] + sol.u[dofs[3]])
                ex, ey = case.u(cx, cy)
                num += area * ((ucx - ex) ** 2 + (ucy - ey) ** 2)
                den += area * (float(ex) ** 2 + float(ey) ** 2)
    if den == 0.0:
        return math.sqrt(num)
    return math.sqrt(num / den)


@dataclass
class ConvergenceRow:
    n: int
    e_u: float
    order_u: float | None
    e_rec: float
    order_rec: float | None


@dataclass
class LevelResult:
    n: int
    disc: Discretization
    sol: MixedSolution
    post: PostFields
    e_u: float
    e_rec: float


def run_level(
    case: ManufacturedCase,
    n: int,
    ratio: int = 4,
    weighted: bool = True,
    solver_tol: float = 1e-12,
) -> LevelResult:
    """Solve one checkerboard level and recover the interface flux.

    Fine blocks carry 2n cells per direction, so h = 1/(4n) and the coarse
    spacing is H = ratio * h (1/n at the default ratio 4).
    """
    if ratio < 1 or n % ratio != 0:
        raise ValueError(f"{n} not divisible by {ratio}")
    disc = discretize(build_checkerboard(2 * n, ratio=ratio))
    sol = solve_case(disc, case, tol=solver_tol)
    post = recover(sol, case.K, disc, case.g)
    raw = sol.u[disc.dofmap.subedge_dof]
    e_u = interface_velocity_error(raw, case, disc, weighted=weighted)
    e_rec = interface_velocity_error(post.recovered.values, case, disc, weighted=weighted)
    return LevelResult(n, disc, sol, post, e_u, e_rec)


def rows_from_levels(results: list[LevelResult]) -> list[ConvergenceRow]:
    rows = []
    for k, r in enumerate(results):
        if k == 0:
            rows.append(ConvergenceRow(r.n, r.e_u, None, r.e_rec, None))
        else:
            prev = results[k - 1]
            rows.append(
                ConvergenceRow(
                    r.n,
                    r.e_u,
                    convergence_order(prev.e_u, r.e_u, prev.n, r.n),
                    r.e_rec,
                    convergence_order(prev.e_rec, r.e_rec, prev.n, r.n),
                )
            )
    return rows


def study_levels(
    case: ManufacturedCase,
    levels: list[int],
    ratio: int = 4,
    weighted: bool = True,
    workers: int = 1,
    solver_tol: float = 1e-12,
) -> list[ConvergenceRow]:
    """Errors and observed orders over a sequence of checkerboard levels.

    Levels run independently (optionally in a thread pool); output order is
    deterministic regardless of worker count.
    """
    if sorted(levels) != list(levels):
        raise ValueError("levels must be increasing")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda n: run_level(case, n, ratio, weighted, solver_tol), levels)
            )
    else:
        results = [run_level(case, n, ratio, weighted, solver_tol) for n in levels]
    return rows_from_levels(results)


def convergence_study(
    case_id: int,
    levels: list[int],
    ratio: int = 4,
    weighted: bool = True,
    workers: int = 1,
    solver_tol: float = 1e-12,
) -> list[ConvergenceRow]:
    return study_levels(
        manufactured_case(case_id), levels, ratio, weighted, workers, solver_tol
    )
