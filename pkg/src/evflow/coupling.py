"""Interface flux operators, trace projections and two-block domain decomposition.

Because the velocity mass matrix is diagonal, the flux on an interface
sub-edge depends only on the two cell pressures beside it:

    u[e] = |e| (p_left(e) - p_right(e)) / B[e]

which splits into a pair of operators acting on the one-element cell layers
along the interface. Projecting sub-edge fluxes onto one side's coarse edge
trace (length-weighted averages) and moving that flux across a mirrored
ghost cell produces Dirichlet ghost pressures; exchanging those each sweep
decouples the blocks into independent subdomain solves (Block-Jacobi).

Ghost values solve the subdomain momentum relation on the interface edge,

    pe_left(E)  = p_left(E)  - beta_left(E)  * (P_left u)(E)
    pe_right(E) = p_right(E) + beta_right(E) * (P_right u)(E)

with beta(E) = h_n / K_nn(midpoint of E), the flow resistance across a
layer cell plus its mirror ghost cell. A subdomain re-solve with this Dirichlet
data reproduces the projected interface flux exactly, so the Block-Jacobi
fixed point coincides with the monolithic solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .darcy import (
    ManufacturedCase,
    MixedSolution,
    PermField,
    SolverError,
    assemble_divergence,
    assemble_rhs,
    assemble_velocity_mass,
)
from .mesh import (
    INTERFACE,
    Discretization,
    EdgeRef,
    build_multiblock,
    discretize,
)


@dataclass
class TraceProjection:
    """L2 projection of sub-edge values onto one side's coarse edge trace.

    Rows are the side's parent edges along the interface, in trace order;
    row E holds |e| / |E| for each sub-edge e inside E. Preserves constants
    and is the identity for matching grids.
    """

    side: str
    parent_edges: list[EdgeRef]
    parent_lengths: np.ndarray
    parent_mids: np.ndarray  # (n_parents, 2) midpoints on the interface line
    parent_cells: np.ndarray  # global pressure DOF of the adjacent layer cell
    matrix: sp.csr_matrix

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix @ psi


def trace_projection(disc: Discretization, iface: int, side: str) -> TraceProjection:
    mesh = disc.mesh
    idxs = disc.trace.by_interface[iface]
    parents: list[EdgeRef] = []
    slot: dict[EdgeRef, int] = {}
    rows, cols, vals = [], [], []
    lengths, mids, cells = [], [], []
    for col, k in enumerate(idxs):
        e = disc.trace.sub_edges[k]
        ref = e.left_edge if side == "left" else e.right_edge
        sub = mesh.subdomains[ref.sub]
        if ref not in slot:
            slot[ref] = len(parents)
            parents.append(ref)
            if ref.ori == "v":
                L = sub.hy
                mids.append((sub.x0 + ref.i * sub.hx, sub.y0 + (ref.j + 0.5) * sub.hy))
            else:
                L = sub.hx
                mids.append((sub.x0 + (ref.i + 0.5) * sub.hx, sub.y0 + ref.j * sub.hy))
            lengths.append(L)
            cell = e.left_cell if side == "left" else e.right_cell
            cells.append(disc.dofmap.cell_offset[ref.sub] + sub.cell_index(*cell))
        rows.append(slot[ref])
        cols.append(col)
        vals.append(e.length / lengths[slot[ref]])
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(len(parents), len(idxs)))
    return TraceProjection(
        side,
        parents,
        np.asarray(lengths),
        np.asarray(mids),
        np.asarray(cells, dtype=np.int64),
        matrix,
    )


def project_trace(
    disc: Discretization, iface: int, side: str, psi: np.ndarray
) -> np.ndarray:
    """Length-weighted averages of per-sub-edge values onto one side's edges."""
    return trace_projection(disc, iface, side).apply(np.asarray(psi, dtype=float))


@dataclass
class InterfaceOperators:
    """Sub-edge fluxes as a linear map of the two one-element cell layers.

    Layer vectors are ordered like the corresponding side's parent edges
    (one layer cell per parent edge). flux = A1 @ p_left + A2 @ p_right.
    """

    iface: int
    subedge_ids: np.ndarray  # indices into disc.trace.sub_edges
    dofs: np.ndarray  # velocity DOFs of the sub-edges
    coef: np.ndarray  # |e| / B[e]
    left_slot: np.ndarray  # per sub-edge: layer index on each side
    right_slot: np.ndarray
    left_layer: np.ndarray  # global pressure DOFs, one per parent edge
    right_layer: np.ndarray
    A1: sp.csr_matrix
    A2: sp.csr_matrix

    def apply_layers(self, p_left: np.ndarray, p_right: np.ndarray) -> np.ndarray:
        return self.A1 @ p_left + self.A2 @ p_right

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Sub-edge fluxes from a full pressure vector."""
        return self.coef * (p[self.left_layer[self.left_slot]] - p[self.right_layer[self.right_slot]])


def interface_operators(
    disc: Discretization, K: PermField, B: np.ndarray | None = None
) -> list[InterfaceOperators]:
    """One operator pair per interface, read off the eliminated system rows."""
    if B is None:
        B = assemble_velocity_mass(disc, K)
    out = []
    for iface in range(len(disc.mesh.interfaces)):
        pl = trace_projection(disc, iface, "left")
        pr = trace_projection(disc, iface, "right")
        lslot = {ref: s for s, ref in enumerate(pl.parent_edges)}
        rslot = {ref: s for s, ref in enumerate(pr.parent_edges)}
        idxs = disc.trace.by_interface[iface]
        dofs = disc.dofmap.subedge_dof[idxs]
        coef, ls, rs = [], [], []
        for k in idxs:
            e = disc.trace.sub_edges[k]
            coef.append(e.length / B[disc.dofmap.subedge_dof[k]])
            ls.append(lslot[e.left_edge])
            rs.append(rslot[e.right_edge])
        coef = np.asarray(coef)
        ls = np.asarray(ls, dtype=np.int64)
        rs = np.asarray(rs, dtype=np.int64)
        n = len(idxs)
        A1 = sp.csr_matrix((coef, (np.arange(n), ls)), shape=(n, len(pl.parent_edges)))
        A2 = sp.csr_matrix((-coef, (np.arange(n), rs)), shape=(n, len(pr.parent_edges)))
        out.append(
            InterfaceOperators(
                iface, np.asarray(idxs), dofs, coef, ls, rs,
                pl.parent_cells, pr.parent_cells, A1, A2,
            )
        )
    return out


def ghost_resistances(
    disc: Discretization, iface: int, K: PermField
) -> tuple[np.ndarray, np.ndarray]:
    """Ghost-layer flow resistance beta(E) = h_n / K_nn(m_E) per parent
    edge, for the left and right side."""
    gam = disc.mesh.interfaces[iface]
    out = []
    for side, sub_id in (("left", gam.left), ("right", gam.right)):
        proj = trace_projection(disc, iface, side)
        sub = disc.mesh.subdomains[sub_id]
        hn = sub.hx if gam.axis == "x" else sub.hy
        kxx, kyy = K(proj.parent_mids[:, 0], proj.parent_mids[:, 1])
        knn = np.asarray(kxx if gam.axis == "x" else kyy, dtype=float)
        out.append(hn / knn)
    return out[0], out[1]


def ghost_pressures(
    p_left: np.ndarray,
    p_right: np.ndarray,
    ops: InterfaceOperators,
    projections: tuple[TraceProjection, TraceProjection],
    betas: tuple[np.ndarray, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet ghost values per parent edge from the two layer pressures.

    Built so that a subdomain solve with this data returns the projected
    interface flux: the layer pressure minus the ghost resistance times the
    projected flux (plus on the right side, where the global normal points
    into the block).
    """
    flux = ops.apply_layers(p_left, p_right)
    proj_l, proj_r = projections
    beta_l, beta_r = betas
    ut_l = proj_l.apply(flux)
    ut_r = proj_r.apply(flux)
    pe_l = p_left - beta_l * ut_l
    pe_r = p_right + beta_r * ut_r
    return pe_l, pe_r


class SubdomainSolver:
    """One block solved standalone, with ghost-layer coupling on its interface
    edges: their mass entry is doubled (mirror ghost cell) and the Dirichlet
    value there comes from the ghost pressures instead of g."""

    def __init__(self, disc: Discretization, sub_id: int, case: ManufacturedCase):
        sub = disc.mesh.subdomains[sub_id]
        self.sub_id = sub_id
        self.local = discretize(
            build_multiblock([(sub.x0, sub.x1, sub.y0, sub.y1)], [(sub.nx, sub.ny)])
        )
        self.B = assemble_velocity_mass(self.local, case.K)
        self.D = assemble_divergence(self.local)
        self.b_u0, self.b_p = assemble_rhs(self.local, case)

        # local DOFs of the rim edges that sit on a global interface
        gdm, ldm = disc.dofmap, self.local.dofmap
        self.iface_dofs: dict[EdgeRef, int] = {}
        self.iface_sign: dict[EdgeRef, float] = {}
        for ori, gkind, ldof in (
            ("v", gdm.vkind[sub_id], ldm.vdof[0]),
            ("h", gdm.hkind[sub_id], ldm.hdof[0]),
        ):
            ii, jj = np.nonzero(gkind == INTERFACE)
            for i, j in zip(ii, jj):
                ref = EdgeRef(sub_id, ori, int(i), int(j))
                self.iface_dofs[ref] = int(ldof[i, j])
                hi = sub.nx if ori == "v" else sub.ny
                self.iface_sign[ref] = 1.0 if (i if ori == "v" else j) == hi else -1.0

        # ghost layer: the mirror cell doubles the half-cell mass term
        for d in self.iface_dofs.values():
            self.B[d] *= 2.0
            self.b_u0[d] = 0.0

        binv = 1.0 / self.B
        self.binv = binv
        self.lu = spla.splu((self.D @ sp.diags(binv) @ self.D.T).tocsc())
        # no-flow variant for the initial sweep: interface DOFs frozen at zero
        binv0 = binv.copy()
        for d in self.iface_dofs.values():
            binv0[d] = 0.0
        self.binv0 = binv0
        self.lu0 = spla.splu((self.D @ sp.diags(binv0) @ self.D.T).tocsc())

    def edge_lengths(self, refs: list[EdgeRef]) -> np.ndarray:
        sub = self.local.mesh.subdomains[0]
        return np.asarray([sub.hy if r.ori == "v" else sub.hx for r in refs])

    def solve(self, parent_edges: list[EdgeRef], pe: np.ndarray | None):
        """Mixed solve; pe=None means no-flow on the interface edges."""
        b_u = self.b_u0.copy()
        if pe is None:
            binv, lu = self.binv0, self.lu0
        else:
            binv, lu = self.binv, self.lu
            lengths = self.edge_lengths(parent_edges)
            for ref, val, L in zip(parent_edges, pe, lengths):
                d = self.iface_dofs[ref]
                b_u[d] = -val * self.iface_sign[ref] * L
        rhs = self.b_p - self.D @ (binv * b_u)
        p = lu.solve(rhs)
        u = binv * (self.D.T @ p + b_u)
        return p, u


def _require_two_blocks(disc: Discretization) -> None:
    if len(disc.mesh.subdomains) != 2 or len(disc.mesh.interfaces) != 1:
        raise SolverError("Block-Jacobi supports exactly two blocks and one interface")


def block_jacobi_solve(
    disc: Discretization,
    case: ManufacturedCase,
    tol: float = 1e-9,
    max_iter: int = 2000,
) -> tuple[MixedSolution, int]:
    """Decoupled subdomain sweeps with ghost-pressure exchange.

    Starts from no-flow subdomain solves; stops when the l2 mismatch of
    successive interface flux vectors drops below tol. Raises with the
    mismatch history if max_iter is exceeded.
    """
    _require_two_blocks(disc)
    iface = 0
    gam = disc.mesh.interfaces[iface]
    ops = interface_operators(disc, case.K)[iface]
    proj_l = trace_projection(disc, iface, "left")
    proj_r = trace_projection(disc, iface, "right")
    betas = ghost_resistances(disc, iface, case.K)

    solvers = {
        gam.left: SubdomainSolver(disc, gam.left, case),
        gam.right: SubdomainSolver(disc, gam.right, case),
    }
    p_loc = {}
    u_loc = {}
    for sid, sv in solvers.items():
        p_loc[sid], u_loc[sid] = sv.solve([], None)

    off = disc.dofmap.cell_offset

    def layers():
        pl = p_loc[gam.left][ops.left_layer - off[gam.left]]
        pr = p_loc[gam.right][ops.right_layer - off[gam.right]]
        return pl, pr

    flux_prev = ops.apply_layers(*layers())
    history = []
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        pe_l, pe_r = ghost_pressures(*layers(), ops, (proj_l, proj_r), betas)
        for sid, pe, proj in (
            (gam.left, pe_l, proj_l),
            (gam.right, pe_r, proj_r),
        ):
            p_loc[sid], u_loc[sid] = solvers[sid].solve(proj.parent_edges, pe)
        flux = ops.apply_layers(*layers())
        mismatch = float(np.linalg.norm(flux - flux_prev))
        history.append(mismatch)
        flux_prev = flux
        if mismatch < tol:
            break
    else:
        raise SolverError(
            f"Block-Jacobi did not converge in {max_iter} iterations; "
            f"last mismatches {['%.3e' % m for m in history[-5:]]}"
        )

    # assemble the global coefficient vectors
    dm = disc.dofmap
    u = np.zeros(dm.n_velocity)
    p = np.zeros(dm.n_pressure)
    for sid, sv in solvers.items():
        ldm = sv.local.dofmap
        for garr, larr in ((dm.vdof[sid], ldm.vdof[0]), (dm.hdof[sid], ldm.hdof[0])):
            mask = garr >= 0
            u[garr[mask]] = u_loc[sid][larr[mask]]
        n = disc.mesh.subdomains[sid].n_cells
        p[off[sid] : off[sid] + n] = p_loc[sid]
    u[ops.dofs] = ops.apply_layers(*layers())
    return MixedSolution(u=u, p=p), iterations


def compare_dd(
    disc: Discretization,
    case: ManufacturedCase,
    tol: float = 1e-10,
    max_iter: int = 5000,
) -> dict:
    """Block-Jacobi versus monolithic solve; returns the max discrepancies."""
    from .darcy import solve_case

    mono = solve_case(disc, case)
    dd, iterations = block_jacobi_solve(disc, case, tol=tol, max_iter=max_iter)
    return {
        "max_du": float(np.max(np.abs(dd.u - mono.u))),
        "max_dp": float(np.max(np.abs(dd.p - mono.p))),
        "iterations": iterations,
    }
