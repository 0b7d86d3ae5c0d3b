import numpy as np
import pytest

from evflow.coupling import (
    SubdomainSolver,
    block_jacobi_solve,
    compare_dd,
    ghost_pressures,
    ghost_resistances,
    interface_operators,
    project_trace,
    trace_projection,
)
from evflow.darcy import ManufacturedCase, PermField, SolverError, solve_case
from evflow.mesh import build_multiblock, discretize

PI = np.pi


def make_case(f=None, g=None, K=None, name="test"):
    zero = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))
    zero2 = lambda x, y: (zero(x, y), zero(x, y))
    return ManufacturedCase(
        name=name, p=zero, u=zero2, f=f or zero, g=g or zero,
        K=K or PermField.constant(1.0),
    )


def two_blocks(left, right):
    return discretize(
        build_multiblock([(0.0, 0.5, 0.0, 1.0), (0.5, 1.0, 0.0, 1.0)], [left, right])
    )


def linear_x_case():
    return make_case(g=lambda x, y: np.asarray(x, dtype=float) + 0.0 * np.asarray(y))


def sin_case(K=None):
    f = lambda x, y: 8 * PI**2 * np.sin(2 * PI * x) * np.sin(2 * PI * y)
    return make_case(f=f, K=K)


def test_operators_matching_equal_h():
    disc = two_blocks((4, 8), (4, 8))
    ops = interface_operators(disc, PermField.constant(1.0))[0]
    h = 1.0 / 8.0
    np.testing.assert_allclose(ops.coef, 1.0 / h)
    assert ops.A1.shape == (8, 8)
    np.testing.assert_allclose(ops.A1.toarray(), np.eye(8) / h)
    np.testing.assert_allclose(ops.A2.toarray(), -np.eye(8) / h)


def test_operators_scale_with_k():
    disc = two_blocks((2, 4), (1, 3))
    o1 = interface_operators(disc, PermField.constant(1.0))[0]
    o2 = interface_operators(disc, PermField.constant(2.0))[0]
    np.testing.assert_allclose(o2.coef, 2.0 * o1.coef)


def test_operators_reproduce_monolithic_fluxes():
    disc = two_blocks((1, 2), (1, 3))
    rng = np.random.default_rng(7)
    for _ in range(10):
        a, b, c, d = rng.normal(size=4)
        case = make_case(
            f=lambda x, y: a + b * np.sin(x + 2 * y),
            g=lambda x, y: c * np.asarray(x, dtype=float) + d * np.asarray(y) ** 2,
        )
        sol = solve_case(disc, case)
        ops = interface_operators(disc, case.K)[0]
        np.testing.assert_allclose(
            ops.apply(sol.p), sol.u[ops.dofs], atol=1e-12
        )


def test_project_trace_constant_preserved():
    disc = two_blocks((1, 2), (1, 3))
    psi = np.full(4, 2.5)
    np.testing.assert_allclose(project_trace(disc, 0, "left", psi), 2.5)
    np.testing.assert_allclose(project_trace(disc, 0, "right", psi), 2.5)


def test_project_trace_weighted_average():
    # left coarse edge [0, 1/2] holds sub-edges of lengths 1/3 and 1/6
    disc = two_blocks((1, 2), (1, 3))
    psi = np.array([1.0, 4.0, 0.0, 0.0])
    got = project_trace(disc, 0, "left", psi)
    assert got[0] == pytest.approx((1 / 3 * 1.0 + 1 / 6 * 4.0) / (1 / 2))
    assert got[0] == pytest.approx(2.0)


def test_project_trace_matching_identity():
    disc = two_blocks((3, 5), (2, 5))
    psi = np.arange(5, dtype=float)
    np.testing.assert_allclose(project_trace(disc, 0, "left", psi), psi)
    np.testing.assert_allclose(project_trace(disc, 0, "right", psi), psi)


def test_projection_idempotent_matrix_identity():
    disc = two_blocks((2, 4), (1, 3))
    proj = trace_projection(disc, 0, "left")
    ops = interface_operators(disc, PermField.constant(1.0))[0]
    rng = np.random.default_rng(3)
    pl = rng.normal(size=ops.A1.shape[1])
    pr = rng.normal(size=ops.A2.shape[1])
    lhs = proj.apply(ops.apply_layers(pl, pr))
    rhs = proj.matrix @ ops.A1 @ pl + proj.matrix @ ops.A2 @ pr
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)
    const = np.ones(ops.A1.shape[0])
    np.testing.assert_allclose(proj.apply(const), 1.0)


def test_ghost_pressures_matching_linear():
    disc = two_blocks((4, 8), (4, 8))
    case = linear_x_case()
    sol = solve_case(disc, case)
    ops = interface_operators(disc, case.K)[0]
    projs = (trace_projection(disc, 0, "left"), trace_projection(disc, 0, "right"))
    betas = ghost_resistances(disc, 0, case.K)
    pl = sol.p[ops.left_layer]
    pr = sol.p[ops.right_layer]
    pe_l, pe_r = ghost_pressures(pl, pr, ops, projs, betas)
    # ghost values equal the neighbor layer's cell values of p = x
    np.testing.assert_allclose(pe_l, pr, atol=1e-10)
    np.testing.assert_allclose(pe_r, pl, atol=1e-10)
    np.testing.assert_allclose(pe_l, 0.5 + 0.5 / 8, atol=1e-10)


def test_ghost_pressures_constant():
    disc = two_blocks((2, 4), (1, 3))
    ops = interface_operators(disc, PermField.constant(1.0))[0]
    projs = (trace_projection(disc, 0, "left"), trace_projection(disc, 0, "right"))
    betas = ghost_resistances(disc, 0, PermField.constant(1.0))
    c = 4.2
    pe_l, pe_r = ghost_pressures(
        np.full(ops.A1.shape[1], c), np.full(ops.A2.shape[1], c), ops, projs, betas
    )
    np.testing.assert_allclose(pe_l, c, atol=1e-13)
    np.testing.assert_allclose(pe_r, c, atol=1e-13)


@pytest.mark.parametrize("K", [None, "variable"])
def test_ghost_resolve_reproduces_projected_flux(K):
    if K == "variable":
        kf = lambda x, y: (2.0 + np.sin(3 * x) * np.cos(y), 2.0 + np.sin(3 * x) * np.cos(y))
        K = PermField(kf, 1.0, 3.0)
    case = make_case(
        f=lambda x, y: np.sin(2 * PI * x) * np.sin(PI * y),
        g=lambda x, y: np.asarray(y, dtype=float) * (1 - np.asarray(x)),
        K=K,
    )
    disc = two_blocks((1, 2), (1, 3))
    sol = solve_case(disc, case)
    ops = interface_operators(disc, case.K)[0]
    projs = (trace_projection(disc, 0, "left"), trace_projection(disc, 0, "right"))
    betas = ghost_resistances(disc, 0, case.K)
    off = disc.dofmap.cell_offset
    pl = sol.p[ops.left_layer]
    pr = sol.p[ops.right_layer]
    pe_l, pe_r = ghost_pressures(pl, pr, ops, projs, betas)
    flux = ops.apply(sol.p)

    for sid, pe, proj in ((0, pe_l, projs[0]), (1, pe_r, projs[1])):
        sv = SubdomainSolver(disc, sid, case)
        p_loc, u_loc = sv.solve(proj.parent_edges, pe)
        want_flux = proj.apply(flux)
        got_flux = np.array([u_loc[sv.iface_dofs[r]] for r in proj.parent_edges])
        np.testing.assert_allclose(got_flux, want_flux, atol=1e-10)
        n = disc.mesh.subdomains[sid].n_cells
        np.testing.assert_allclose(p_loc, sol.p[off[sid] : off[sid] + n], atol=1e-10)


def test_block_jacobi_requires_two_blocks():
    from evflow.mesh import build_checkerboard

    disc = discretize(build_checkerboard(8))
    with pytest.raises(SolverError):
        block_jacobi_solve(disc, make_case())


def test_block_jacobi_constant_two_iterations():
    disc = two_blocks((2, 4), (1, 3))
    case = make_case(g=lambda x, y: np.full_like(np.asarray(x, dtype=float), 2.0))
    sol, iterations = block_jacobi_solve(disc, case, tol=1e-12)
    assert iterations <= 2
    np.testing.assert_allclose(sol.p, 2.0, atol=1e-12)
    np.testing.assert_allclose(sol.u, 0.0, atol=1e-12)


def test_block_jacobi_matching_linear_matches_monolithic():
    disc = two_blocks((4, 8), (4, 8))
    case = linear_x_case()
    mono = solve_case(disc, case)
    dd, iterations = block_jacobi_solve(disc, case, tol=1e-9)
    assert np.max(np.abs(dd.p - mono.p)) <= 1e-8
    assert np.max(np.abs(dd.u - mono.u)) <= 1e-8
    assert iterations >= 1


def test_block_jacobi_nonmatching_sin_case():
    disc = two_blocks((8, 16), (2, 4))
    case = sin_case()
    out = compare_dd(disc, case, tol=1e-10)
    assert out["max_du"] <= 1e-8
    assert out["max_dp"] <= 1e-8
    assert out["iterations"] >= 1
