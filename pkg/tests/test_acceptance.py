"""Acceptance suite: one test per criterion, one printed PASS line each.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
The two convergence studies are computed once (module scope) and shared; the
TEST*_ constants are the golden reference errors and observed orders the
studies are held against.
"""

import time

import numpy as np
import pytest
import scipy.sparse as sp

from evflow.coupling import (
    SubdomainSolver,
    block_jacobi_solve,
    ghost_pressures,
    ghost_resistances,
    interface_operators,
    trace_projection,
)
from evflow.darcy import (
    ManufacturedCase,
    PermField,
    assemble_divergence,
    assemble_velocity_mass,
    solve_case,
)
from evflow.mesh import build_multiblock, build_two_blocks, discretize
from evflow.postprocess import recover
from evflow.verification import (
    convergence_order,
    interior_velocity_error,
    manufactured_case,
    rows_from_levels,
    run_level,
)

LEVELS = [8, 16, 32, 48]

TEST1_EU = [1.47e-01, 7.70e-02, 3.94e-02, 2.65e-02]
TEST1_EREC = [3.55e-01, 1.12e-01, 3.73e-02, 2.09e-02]
TEST1_ORD_U = [0.93, 0.97, 0.98]
TEST1_ORD_REC = [1.67, 1.58, 1.43]
TEST2_ORD_REC = [1.91, 1.81, 1.51]


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"criterion {criterion}: {detail}"


@pytest.fixture(scope="module")
def study1():
    case = manufactured_case(1)
    t0 = time.monotonic()
    results = [run_level(case, n) for n in LEVELS]
    elapsed = time.monotonic() - t0
    return case, results, elapsed


@pytest.fixture(scope="module")
def study2():
    case = manufactured_case(2)
    results = [run_level(case, n) for n in LEVELS]
    return case, results


def _orders(rows, attr):
    return [getattr(r, attr) for r in rows[1:]]


def test_criterion_1_test1_orders_and_magnitudes(study1):
    _, results, elapsed = study1
    rows = rows_from_levels(results)
    ord_u = _orders(rows, "order_u")
    ord_rec = _orders(rows, "order_rec")
    ok = all(abs(o - t) <= 0.15 for o, t in zip(ord_u, TEST1_ORD_U))
    ok &= all(abs(o - t) <= 0.30 for o, t in zip(ord_rec, TEST1_ORD_REC))
    ok &= all(o >= u + 0.4 for o, u in zip(ord_rec, ord_u))
    # magnitudes: never worse than twice the reference values; the raw column
    # also matches from below (the recovered one comes out smaller here)
    ok &= all(r.e_u <= 2.0 * t and r.e_u >= 0.5 * t for r, t in zip(rows, TEST1_EU))
    ok &= all(r.e_rec <= 2.0 * t for r, t in zip(rows, TEST1_EREC))
    ok &= elapsed <= 60.0
    report(
        "1",
        ok,
        f"test 1 raw orders {[f'{o:.2f}' for o in ord_u]} (target {TEST1_ORD_U} +-0.15), "
        f"recovered {[f'{o:.2f}' for o in ord_rec]} (target {TEST1_ORD_REC} +-0.30), "
        f"e_u x{rows[0].e_u / TEST1_EU[0]:.2f} of reference, {elapsed:.1f}s",
    )


def test_criterion_2_test2_orders(study2):
    _, results = study2
    rows = rows_from_levels(results)
    ord_u = _orders(rows, "order_u")
    ord_rec = _orders(rows, "order_rec")
    ok = all(abs(o - 1.0) <= 0.10 for o in ord_u)
    ok &= all(abs(o - t) <= 0.35 for o, t in zip(ord_rec, TEST2_ORD_REC))
    ok &= all(o >= u + 0.4 for o, u in zip(ord_rec, ord_u))
    report(
        "2",
        ok,
        f"test 2 raw orders {[f'{o:.2f}' for o in ord_u]} (target 1.00 +-0.10), "
        f"recovered {[f'{o:.2f}' for o in ord_rec]} (target {TEST2_ORD_REC} +-0.35)",
    )


def _matching_case():
    pi = np.pi
    return ManufacturedCase(
        name="smooth",
        p=lambda x, y: np.cos(pi * x) * np.cos(2 * pi * y),
        u=lambda x, y: (
            pi * np.sin(pi * x) * np.cos(2 * pi * y),
            2 * pi * np.cos(pi * x) * np.sin(2 * pi * y),
        ),
        f=lambda x, y: 5 * pi**2 * np.cos(pi * x) * np.cos(2 * pi * y),
        g=lambda x, y: np.cos(pi * x) * np.cos(2 * pi * y),
        K=PermField.constant(1.0),
    )


def _edge_flux_map(disc, sol):
    out = {}
    dm = disc.dofmap
    for s in disc.mesh.subdomains:
        for i in range(s.nx + 1):
            for j in range(s.ny):
                d = dm.vdof[s.id][i, j]
                if d >= 0:
                    out[("v", round(s.x0 + i * s.hx, 12),
                         round(s.y0 + (j + 0.5) * s.hy, 12))] = sol.u[d]
        for i in range(s.nx):
            for j in range(s.ny + 1):
                d = dm.hdof[s.id][i, j]
                if d >= 0:
                    out[("h", round(s.x0 + (i + 0.5) * s.hx, 12),
                         round(s.y0 + j * s.hy, 12))] = sol.u[d]
    for k, e in enumerate(disc.trace.sub_edges):
        x, y = e.midpoint
        ori = "v" if e.axis == "x" else "h"
        out[(ori, round(x, 12), round(y, 12))] = sol.u[dm.subedge_dof[k]]
    return out


def test_criterion_3_matching_grid_oracle():
    m = 6
    blocks = [
        (0.0, 0.5, 0.0, 0.5),
        (0.5, 1.0, 0.0, 0.5),
        (0.0, 0.5, 0.5, 1.0),
        (0.5, 1.0, 0.5, 1.0),
    ]
    multi = discretize(build_multiblock(blocks, [(m, m)] * 4))
    merged = discretize(build_multiblock([(0.0, 1.0, 0.0, 1.0)], [(2 * m, 2 * m)]))
    case = _matching_case()
    sa, sb = solve_case(multi, case), solve_case(merged, case)
    fa, fb = _edge_flux_map(multi, sa), _edge_flux_map(merged, sb)
    du = max(abs(fa[k] - fb[k]) for k in fb)
    pa = {}
    for s in multi.mesh.subdomains:
        off = multi.dofmap.cell_offset[s.id]
        for j in range(s.ny):
            for i in range(s.nx):
                c = s.cell_center(i, j)
                pa[(round(c[0], 12), round(c[1], 12))] = sa.p[off + s.cell_index(i, j)]
    s0 = merged.mesh.subdomains[0]
    dp = max(
        abs(pa[(round(s0.cell_center(i, j)[0], 12), round(s0.cell_center(i, j)[1], 12))]
            - sb.p[s0.cell_index(i, j)])
        for j in range(s0.ny)
        for i in range(s0.nx)
    )
    ok = du <= 1e-10 and dp <= 1e-10
    report("3", ok, f"matching 2x2 blocks vs merged RT0(TM): max|du| {du:.2e}, max|dp| {dp:.2e}")


def _hand_five_point(n):
    h = 1.0 / n
    A = np.zeros((n * n, n * n))
    idx = lambda i, j: j * n + i
    for j in range(n):
        for i in range(n):
            k = idx(i, j)
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < n and 0 <= jj < n:
                    A[k, k] += 1.0
                    A[k, idx(ii, jj)] -= 1.0
                else:
                    A[k, k] += 2.0
    return A


def test_criterion_4_cell_centered_fd_equivalence():
    worst = 0.0
    for n in (3, 5):
        disc = discretize(build_multiblock([(0.0, 1.0, 0.0, 1.0)], [(n, n)]))
        B = assemble_velocity_mass(disc, PermField.constant(1.0))
        D = assemble_divergence(disc)
        S = (D @ sp.diags(1.0 / B) @ D.T).toarray()
        worst = max(worst, float(np.max(np.abs(S - _hand_five_point(n)))))
    report("4", worst <= 1e-13, f"Schur vs hand-assembled 5-point matrix: max diff {worst:.2e}")


def test_criterion_5_conservation_everywhere(study1, study2):
    residuals = [r.sol.conservation_residual for r in study1[1]]
    residuals += [r.sol.conservation_residual for r in study2[1]]
    worst = max(residuals)
    report(
        "5",
        worst <= 1e-10,
        f"max cell mass residual across {len(residuals)} suite solves: {worst:.2e}",
    )


def test_criterion_6_pipeline_exactness():
    blocks = [
        (0.0, 0.5, 0.0, 0.5),
        (0.5, 1.0, 0.0, 0.5),
        (0.0, 0.5, 0.5, 1.0),
        (0.5, 1.0, 0.5, 1.0),
    ]
    disc = discretize(build_multiblock(blocks, [(4, 4)] * 4))
    zero = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    worst = 0.0

    c = 2.0
    const = ManufacturedCase(
        "const", p=lambda x, y: np.full_like(np.asarray(x, dtype=float), c),
        u=lambda x, y: (zero(x, y), zero(x, y)), f=zero,
        g=lambda x, y: np.full_like(np.asarray(x, dtype=float), c),
        K=PermField.constant(1.0),
    )
    sol = solve_case(disc, const)
    post = recover(sol, const.K, disc, const.g)
    for arr in post.multipliers.values:
        worst = max(worst, float(np.max(np.abs(arr - c))))
    for arr in post.pressure.coeffs:
        worst = max(worst, float(np.max(np.abs(arr[:, :, 0] - c))),
                    float(np.max(np.abs(arr[:, :, 1:]))))
    for field in post.nodal:
        worst = max(worst, float(np.max(np.abs(field.values - c))))
    worst = max(worst, float(np.max(np.abs(post.recovered.values))))

    xfun = lambda x, y: np.asarray(x, dtype=float) + 0.0 * np.asarray(y)
    linear = ManufacturedCase(
        "linear", p=xfun,
        u=lambda x, y: (-np.ones_like(np.asarray(x, dtype=float)), zero(x, y)),
        f=zero, g=xfun, K=PermField.constant(1.0),
    )
    sol = solve_case(disc, linear)
    post = recover(sol, linear.K, disc, linear.g)
    for sub in disc.mesh.subdomains:
        lam = post.multipliers.values[sub.id]
        for i in range(sub.nx):
            xw = sub.x0 + i * sub.hx
            xc = xw + 0.5 * sub.hx
            worst = max(
                worst,
                float(np.max(np.abs(lam[i, :, 0] - xw))),
                float(np.max(np.abs(lam[i, :, 1] - (xw + sub.hx)))),
                float(np.max(np.abs(lam[i, :, 2] - xc))),
                float(np.max(np.abs(lam[i, :, 3] - xc))),
            )
        field = post.nodal[sub.id]
        xs = sub.x0 + np.arange(2 * sub.nx + 1) * 0.5 * sub.hx
        worst = max(worst, float(np.max(np.abs(field.values - xs[:, None]))))
    exact = np.array(
        [-1.0 if e.axis == "x" else 0.0 for e in disc.trace.sub_edges]
    )
    worst = max(worst, float(np.max(np.abs(post.recovered.values - exact))))
    report("6", worst <= 1e-10, f"constant + linear pipeline max deviation {worst:.2e}")


@pytest.mark.parametrize("case_id", [1, 2])
def test_criterion_7_interface_coupling_consistency(case_id):
    case = manufactured_case(case_id)
    disc = discretize(build_two_blocks(8, ratio=4))
    mono = solve_case(disc, case)
    ops = interface_operators(disc, case.K)[0]
    worst_op = float(np.max(np.abs(ops.apply(mono.p) - mono.u[ops.dofs])))

    projs = (trace_projection(disc, 0, "left"), trace_projection(disc, 0, "right"))
    betas = ghost_resistances(disc, 0, case.K)
    pl = mono.p[ops.left_layer]
    pr = mono.p[ops.right_layer]
    pe_l, pe_r = ghost_pressures(pl, pr, ops, projs, betas)
    flux = ops.apply(mono.p)
    worst_ghost = 0.0
    for sid, pe, proj in ((0, pe_l, projs[0]), (1, pe_r, projs[1])):
        sv = SubdomainSolver(disc, sid, case)
        _, u_loc = sv.solve(proj.parent_edges, pe)
        got = np.array([u_loc[sv.iface_dofs[r]] for r in proj.parent_edges])
        worst_ghost = max(worst_ghost, float(np.max(np.abs(got - proj.apply(flux)))))

    dd, iterations = block_jacobi_solve(disc, case, tol=1e-10, max_iter=5000)
    worst_dd = max(
        float(np.max(np.abs(dd.u - mono.u))), float(np.max(np.abs(dd.p - mono.p)))
    )
    ok = worst_op <= 1e-12 and worst_ghost <= 1e-10 and worst_dd <= 1e-8
    report(
        f"7 (test {case_id})",
        ok,
        f"operators {worst_op:.2e} (<=1e-12), ghost re-solve {worst_ghost:.2e} "
        f"(<=1e-10), block-jacobi {worst_dd:.2e} (<=1e-8, {iterations} sweeps)",
    )


def _constraint_residuals(result):
    """Independent Simpson check of cell-mean and edge-average constraints."""
    worst = 0.0
    disc, sol, post = result.disc, result.sol, result.post
    w = np.array([1.0, 4.0, 1.0]) / 6.0
    loc = np.array([-1.0, 0.0, 1.0])
    ones = np.ones(3)
    # factor each basis monomial as f(xi) * g(eta) at the 3x3 Simpson nodes
    F = np.stack([ones, loc, ones, loc**2, ones], axis=1)
    G = np.stack([ones, ones, loc, ones, loc**2], axis=1)
    for sub in disc.mesh.subdomains:
        c = post.pressure.coeffs[sub.id]
        vals = np.einsum("ijk,ak,bk->ijab", c, F, G)
        # vals[i,j,a,b] = p~ at local node (xi_a, eta_b)
        mean = np.einsum("ijab,a,b->ij", vals, w, w)
        off = disc.dofmap.cell_offset[sub.id]
        p = sol.p[off : off + sub.n_cells].reshape(sub.ny, sub.nx).T
        lam = post.multipliers.values[sub.id]
        edge_w = np.einsum("ijb,b->ij", vals[:, :, 0, :], w)
        edge_e = np.einsum("ijb,b->ij", vals[:, :, 2, :], w)
        edge_s = np.einsum("ija,a->ij", vals[:, :, :, 0], w)
        edge_n = np.einsum("ija,a->ij", vals[:, :, :, 2], w)
        worst = max(
            worst,
            float(np.max(np.abs(mean - p))),
            float(np.max(np.abs(edge_w - lam[:, :, 0]))),
            float(np.max(np.abs(edge_e - lam[:, :, 1]))),
            float(np.max(np.abs(edge_s - lam[:, :, 2]))),
            float(np.max(np.abs(edge_n - lam[:, :, 3]))),
        )
    return worst


def test_criterion_8_postprocess_constraints(study1, study2):
    worst = 0.0
    cells = 0
    for result in study1[1] + study2[1]:
        worst = max(worst, _constraint_residuals(result))
        cells += result.disc.mesh.n_cells
    report(
        "8",
        worst <= 1e-12,
        f"local mean/edge constraint residual over {cells} cells: {worst:.2e}",
    )


def test_criterion_9_interior_rate(study1):
    case, results, _ = study1
    errs = [
        interior_velocity_error(r.sol, case, r.disc, min_distance=0.2)
        for r in results[:3]
    ]
    orders = [
        convergence_order(errs[k], errs[k + 1], LEVELS[k], LEVELS[k + 1])
        for k in range(2)
    ]
    ok = all(o >= 0.9 for o in orders)
    report(
        "9",
        ok,
        f"interior velocity orders {[f'{o:.2f}' for o in orders]} (>= 0.9), "
        f"errors {[f'{e:.2e}' for e in errs]}",
    )
