"""Mixed RT0 assembly and solve for incompressible Darcy flow.

The velocity mass form uses the trapezoidal rule in the flux direction and
the midpoint rule tangentially, which makes the mass matrix strictly
diagonal: each edge DOF picks up (h_n / 2) / K_nn(node) * |e| from every
adjacent cell, with the node on the face at the edge's tangential midpoint.
Eliminating the velocity then reduces the saddle-point system to an SPD
cell-centered pressure system (the classical 5-point scheme for K = I on a
single uniform block).

Sign conventions: velocity DOFs are normal components along the fixed global
normals (+x for vertical edges, +y for horizontal). The divergence row of a
cell carries +|e| where the global normal leaves the cell and -|e| where it
enters. Dirichlet data g enters the momentum RHS as -g(midpoint) * (signed
edge length) on outer-boundary DOFs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import BOUNDARY, Discretization, SubdomainGrid


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class PermField:
    """Diagonal permeability-over-viscosity tensor field.

    `func` maps point arrays (x, y) to (Kxx, Kyy); kmin/kmax are the claimed
    uniform positivity bounds. Assembly rejects nonpositive samples.
    """

    func: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    kmin: float
    kmax: float

    def __call__(self, x, y):
        return self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @staticmethod
    def constant(kxx: float, kyy: float | None = None) -> "PermField":
        kyy = kxx if kyy is None else kyy
        if kxx <= 0 or kyy <= 0:
            raise ValueError("permeability must be positive")

        def f(x, y):
            return (np.full_like(x, kxx), np.full_like(x, kyy))

        return PermField(f, min(kxx, kyy), max(kxx, kyy))


@dataclass(frozen=True)
class ManufacturedCase:
    """Analytic solution bundle: p, u = -K grad p, f = div u, g = p on the rim."""

    name: str
    p: Callable
    u: Callable
    f: Callable
    g: Callable
    K: PermField


@dataclass
class MixedSolution:
    """Coefficient vectors: u indexed by velocity DOFs, p by cell DOFs."""

    u: np.ndarray
    p: np.ndarray
    conservation_residual: float = np.nan


def _check_positive(k: np.ndarray, what: str) -> None:
    if np.any(~np.isfinite(k)) or np.any(k <= 0.0):
        raise SolverError(f"nonpositive permeability sample in {what}")


def _vedge_nodes(sub: SubdomainGrid) -> tuple[np.ndarray, np.ndarray]:
    xs = sub.x0 + np.arange(sub.nx + 1) * sub.hx
    ys = sub.y0 + (np.arange(sub.ny) + 0.5) * sub.hy
    return np.meshgrid(xs, ys, indexing="ij")


def _hedge_nodes(sub: SubdomainGrid) -> tuple[np.ndarray, np.ndarray]:
    xs = sub.x0 + (np.arange(sub.nx) + 0.5) * sub.hx
    ys = sub.y0 + np.arange(sub.ny + 1) * sub.hy
    return np.meshgrid(xs, ys, indexing="ij")


def assemble_velocity_mass(disc: Discretization, K: PermField) -> np.ndarray:
    """Diagonal of the velocity mass matrix, as a vector over velocity DOFs."""
    dm = disc.dofmap
    B = np.zeros(dm.n_velocity)
    for sub in disc.mesh.subdomains:
        xx, yy = _vedge_nodes(sub)
        kxx, _ = K(xx, yy)
        _check_positive(kxx, f"subdomain {sub.id} vertical edges")
        ncells = np.full(sub.nx + 1, 2.0)
        ncells[0] = ncells[-1] = 1.0
        coef = ncells[:, None] * (0.5 * sub.hx) * sub.hy / kxx
        dofs = dm.vdof[sub.id]
        mask = dofs >= 0
        B[dofs[mask]] += coef[mask]

        xx, yy = _hedge_nodes(sub)
        _, kyy = K(xx, yy)
        _check_positive(kyy, f"subdomain {sub.id} horizontal edges")
        ncells = np.full(sub.ny + 1, 2.0)
        ncells[0] = ncells[-1] = 1.0
        coef = ncells[None, :] * (0.5 * sub.hy) * sub.hx / kyy
        dofs = dm.hdof[sub.id]
        mask = dofs >= 0
        B[dofs[mask]] += coef[mask]

    for k, e in enumerate(disc.trace.sub_edges):
        x, y = e.midpoint
        kxx, kyy = K(x, y)
        knn = float(kxx) if e.axis == "x" else float(kyy)
        if not np.isfinite(knn) or knn <= 0.0:
            raise SolverError("nonpositive permeability sample on interface")
        sl = disc.mesh.subdomains[e.left_sub]
        sr = disc.mesh.subdomains[e.right_sub]
        hl = sl.hx if e.axis == "x" else sl.hy
        hr = sr.hx if e.axis == "x" else sr.hy
        B[dm.subedge_dof[k]] = 0.5 * (hl + hr) * e.length / knn
    return B


def assemble_divergence(disc: Discretization) -> sp.csr_matrix:
    """Divergence matrix D (cells x velocity DOFs): (div v, 1)_T per cell."""
    dm = disc.dofmap
    rows, cols, vals = [], [], []
    for sub in disc.mesh.subdomains:
        off = dm.cell_offset[sub.id]
        vd, hd = dm.vdof[sub.id], dm.hdof[sub.id]
        for i in range(sub.nx + 1):
            for j in range(sub.ny):
                d = vd[i, j]
                if d < 0:
                    continue
                if i > 0:  # global +x leaves the left cell
                    rows.append(off + sub.cell_index(i - 1, j))
                    cols.append(d)
                    vals.append(sub.hy)
                if i < sub.nx:
                    rows.append(off + sub.cell_index(i, j))
                    cols.append(d)
                    vals.append(-sub.hy)
        for i in range(sub.nx):
            for j in range(sub.ny + 1):
                d = hd[i, j]
                if d < 0:
                    continue
                if j > 0:
                    rows.append(off + sub.cell_index(i, j - 1))
                    cols.append(d)
                    vals.append(sub.hx)
                if j < sub.ny:
                    rows.append(off + sub.cell_index(i, j))
                    cols.append(d)
                    vals.append(-sub.hx)

    for k, e in enumerate(disc.trace.sub_edges):
        d = dm.subedge_dof[k]
        sl = disc.mesh.subdomains[e.left_sub]
        sr = disc.mesh.subdomains[e.right_sub]
        rows.append(dm.cell_offset[e.left_sub] + sl.cell_index(*e.left_cell))
        cols.append(d)
        vals.append(e.length)
        rows.append(dm.cell_offset[e.right_sub] + sr.cell_index(*e.right_cell))
        cols.append(d)
        vals.append(-e.length)

    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(dm.n_pressure, dm.n_velocity)
    )


def assemble_rhs(
    disc: Discretization, case: ManufacturedCase
) -> tuple[np.ndarray, np.ndarray]:
    """Momentum RHS from Dirichlet data (midpoint rule on boundary edges) and
    mass RHS f(cell center) * area."""
    dm = disc.dofmap
    b_u = np.zeros(dm.n_velocity)
    b_p = np.zeros(dm.n_pressure)
    for sub in disc.mesh.subdomains:
        xx, yy = _vedge_nodes(sub)
        g = np.asarray(case.g(xx, yy), dtype=float)
        sgn = np.zeros(sub.nx + 1)
        sgn[0], sgn[-1] = -1.0, 1.0  # +x enters at i=0, leaves at i=nx
        contrib = -g * sgn[:, None] * sub.hy
        sel = dm.vkind[sub.id] == BOUNDARY
        b_u[dm.vdof[sub.id][sel]] += contrib[sel]

        xx, yy = _hedge_nodes(sub)
        g = np.asarray(case.g(xx, yy), dtype=float)
        sgn = np.zeros(sub.ny + 1)
        sgn[0], sgn[-1] = -1.0, 1.0
        contrib = -g * sgn[None, :] * sub.hx
        sel = dm.hkind[sub.id] == BOUNDARY
        b_u[dm.hdof[sub.id][sel]] += contrib[sel]

        centers = sub.cell_centers()
        f = np.asarray(case.f(centers[:, 0], centers[:, 1]), dtype=float)
        off = dm.cell_offset[sub.id]
        b_p[off : off + sub.n_cells] = f * sub.hx * sub.hy
    return b_u, b_p


def solve_monolithic(
    B: np.ndarray,
    D: sp.spmatrix,
    b_u: np.ndarray,
    b_p: np.ndarray,
    tol: float = 1e-12,
) -> MixedSolution:
    """Eliminate u = B^-1 (D^T p + b_u) and solve the SPD Schur system.

    The pressure system (D B^-1 D^T) p = b_p - D B^-1 b_u is solved with a
    sparse direct factorization; the relative residual is checked against
    `tol` afterwards.
    """
    if np.any(B <= 0):
        raise SolverError("velocity mass diagonal must be strictly positive")
    binv = 1.0 / B
    S = (D @ sp.diags(binv) @ D.T).tocsc()
    rhs = b_p - D @ (binv * b_u)
    try:
        p = spla.splu(S).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"singular pressure system: {exc}") from exc
    ref = np.linalg.norm(rhs)
    res = np.linalg.norm(S @ p - rhs)
    if res > tol * max(ref, 1.0):
        raise SolverError(f"pressure solve residual {res:.3e} exceeds tolerance")
    u = binv * (D.T @ p + b_u)
    return MixedSolution(u=u, p=p)


def residual_mass_conservation(
    sol: MixedSolution, case: ManufacturedCase, disc: Discretization
) -> float:
    """max over cells of |sum of signed face fluxes - f(center) * area|."""
    D = assemble_divergence(disc)
    _, b_p = assemble_rhs(disc, case)
    return float(np.max(np.abs(D @ sol.u - b_p)))


def solve_case(
    disc: Discretization, case: ManufacturedCase, tol: float = 1e-12
) -> MixedSolution:
    """Assemble and solve one manufactured case; checks discrete conservation."""
    B = assemble_velocity_mass(disc, case.K)
    D = assemble_divergence(disc)
    b_u, b_p = assemble_rhs(disc, case)
    sol = solve_monolithic(B, D, b_u, b_p, tol=tol)
    sol.conservation_residual = float(np.max(np.abs(D @ sol.u - b_p)))
    if sol.conservation_residual > 1e-10:
        raise SolverError(
            f"conservation residual {sol.conservation_residual:.3e} too large"
        )
    return sol
