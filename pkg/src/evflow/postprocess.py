"""Pressure postprocessing and interface flux recovery.

Pipeline, per solved (u_h, p_h):

1. Edge pressure traces (Lagrange multipliers): on each cell and each of its
   four edges, lambda = p_T - (h_n / 2) / K_nn(node) * u_n * sign, the local
   momentum residual divided by the edge length. On interface cells the edge
   flux is first averaged back onto the cell's own edge (the trace
   projection), so every cell sees exactly four values. The sign is chosen
   so a constant pressure reproduces itself on every edge.

2. Local quadratic pressure: per cell, the unique polynomial in
   span{1, xi, eta, xi^2, eta^2} (cell-local coordinates in [-1, 1]^2)
   whose cell mean equals p_T and whose four edge averages equal the
   multipliers. The 5x5 constraint matrix is the same for every cell in
   local coordinates, so its inverse is precomputed once.

3. Continuous nodal field: per block, average the local polynomials at the
   nine biquadratic Lagrange nodes of each cell (corners, edge midpoints,
   center). Interior-of-cell nodes keep their own value, shared nodes take
   the arithmetic mean, rim nodes on the outer boundary take the Dirichlet
   data, and nodes on an interface average one-sided within the block.

4. Recovered interface flux: a two-point flux between the nodal fields of
   the two blocks, evaluated half a cell away from each sub-edge midpoint
   along the normal, with harmonic transmissibility
   -(s_R - s_L) / (d_L / K_L + d_R / K_R).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coupling import trace_projection
from .darcy import MixedSolution, PermField
from .mesh import Discretization, EdgeRef, SubdomainGrid

# Rows: cell mean, then edge averages W/E/S/N of {1, xi, eta, xi^2, eta^2}.
_CONSTRAINTS = np.array(
    [
        [1.0, 0.0, 0.0, 1 / 3, 1 / 3],
        [1.0, -1.0, 0.0, 1.0, 1 / 3],
        [1.0, 1.0, 0.0, 1.0, 1 / 3],
        [1.0, 0.0, -1.0, 1 / 3, 1.0],
        [1.0, 0.0, 1.0, 1 / 3, 1.0],
    ]
)
_CONSTRAINTS_INV = np.linalg.inv(_CONSTRAINTS)


@dataclass
class EdgeMultipliers:
    """Per-cell edge pressure traces, stacked (nx, ny, 4) in W/E/S/N order."""

    values: list[np.ndarray]


@dataclass
class QuadraticCellField:
    """Per-cell coefficients (nx, ny, 5) in the local {1, xi, eta, xi^2, eta^2}
    basis; xi = (x - xc) / (hx / 2), eta = (y - yc) / (hy / 2)."""

    coeffs: list[np.ndarray]

    def eval_local(self, sub_id: int, i, j, xi, eta) -> np.ndarray:
        c = self.coeffs[sub_id][i, j]
        return (
            c[..., 0]
            + c[..., 1] * xi
            + c[..., 2] * eta
            + c[..., 3] * xi**2
            + c[..., 4] * eta**2
        )


def _q2_shape(t: np.ndarray) -> np.ndarray:
    """Quadratic Lagrange shapes on [-1, 1] at nodes (-1, 0, +1); (..., 3)."""
    t = np.asarray(t, dtype=float)
    return np.stack(
        [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)], axis=-1
    )


@dataclass
class NodalField:
    """Continuous biquadratic field on one block: values on the (2nx+1) by
    (2ny+1) node lattice with spacing (hx/2, hy/2)."""

    sub: SubdomainGrid
    values: np.ndarray

    def evaluate(self, x, y) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = self.sub
        ci = np.clip(np.floor((x - s.x0) / s.hx).astype(int), 0, s.nx - 1)
        cj = np.clip(np.floor((y - s.y0) / s.hy).astype(int), 0, s.ny - 1)
        xc = s.x0 + (ci + 0.5) * s.hx
        yc = s.y0 + (cj + 0.5) * s.hy
        nx_ = _q2_shape((x - xc) / (0.5 * s.hx))
        ny_ = _q2_shape((y - yc) / (0.5 * s.hy))
        out = np.zeros_like(x)
        for a in range(3):
            for b in range(3):
                out += self.values[2 * ci + a, 2 * cj + b] * nx_[..., a] * ny_[..., b]
        return out


@dataclass
class RecoveredFlux:
    """Recovered normal velocity per interface sub-edge (positive from the
    left/bottom block into the right/top block)."""

    values: np.ndarray


@dataclass
class PostFields:
    multipliers: EdgeMultipliers
    pressure: QuadraticCellField
    nodal: list[NodalField]
    recovered: RecoveredFlux


def projected_interface_values(
    disc: Discretization, flux: np.ndarray
) -> dict[EdgeRef, float]:
    """Average per-sub-edge values onto every parent edge (both sides).

    Edges split across several interfaces accumulate their full-length
    average from the pieces.
    """
    out: dict[EdgeRef, float] = defaultdict(float)
    for iface, idxs in enumerate(disc.trace.by_interface):
        psi = flux[idxs]
        for side in ("left", "right"):
            proj = trace_projection(disc, iface, side)
            vals = proj.apply(psi)
            for ref, v in zip(proj.parent_edges, vals):
                out[ref] += float(v)
    return dict(out)


def edge_value_arrays(
    sol: MixedSolution, disc: Discretization
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per block: (vertical, horizontal) edge flux arrays with interface
    edges holding their projected coarse-trace value."""
    dm = disc.dofmap
    projected = projected_interface_values(disc, sol.u[dm.subedge_dof])
    out = []
    for sub in disc.mesh.subdomains:
        vv = np.zeros((sub.nx + 1, sub.ny))
        hh = np.zeros((sub.nx, sub.ny + 1))
        mv = dm.vdof[sub.id] >= 0
        vv[mv] = sol.u[dm.vdof[sub.id][mv]]
        mh = dm.hdof[sub.id] >= 0
        hh[mh] = sol.u[dm.hdof[sub.id][mh]]
        for ref, val in projected.items():
            if ref.sub != sub.id:
                continue
            if ref.ori == "v":
                vv[ref.i, ref.j] = val
            else:
                hh[ref.i, ref.j] = val
        out.append((vv, hh))
    return out


def compute_lagrange_multipliers(
    sol: MixedSolution, K: PermField, disc: Discretization
) -> EdgeMultipliers:
    from .darcy import _hedge_nodes, _vedge_nodes

    dm = disc.dofmap
    edge_values = edge_value_arrays(sol, disc)
    values = []
    for sub in disc.mesh.subdomains:
        vv, hh = edge_values[sub.id]

        xx, yy = _vedge_nodes(sub)
        kxx, _ = K(xx, yy)
        xx, yy = _hedge_nodes(sub)
        _, kyy = K(xx, yy)

        off = dm.cell_offset[sub.id]
        p = sol.p[off : off + sub.n_cells].reshape(sub.ny, sub.nx).T
        lam = np.empty((sub.nx, sub.ny, 4))
        lam[:, :, 0] = p + 0.5 * sub.hx / kxx[:-1, :] * vv[:-1, :]
        lam[:, :, 1] = p - 0.5 * sub.hx / kxx[1:, :] * vv[1:, :]
        lam[:, :, 2] = p + 0.5 * sub.hy / kyy[:, :-1] * hh[:, :-1]
        lam[:, :, 3] = p - 0.5 * sub.hy / kyy[:, 1:] * hh[:, 1:]
        values.append(lam)
    return EdgeMultipliers(values)


def postprocess_pressure(
    sol: MixedSolution, multipliers: EdgeMultipliers, disc: Discretization
) -> QuadraticCellField:
    """Per cell, solve mean + four edge-average constraints for the local
    quadratic coefficients."""
    coeffs = []
    for sub in disc.mesh.subdomains:
        off = disc.dofmap.cell_offset[sub.id]
        p = sol.p[off : off + sub.n_cells].reshape(sub.ny, sub.nx).T
        rhs = np.concatenate(
            [p[:, :, None], multipliers.values[sub.id]], axis=2
        )
        coeffs.append(rhs @ _CONSTRAINTS_INV.T)
    return QuadraticCellField(coeffs)


def oswald_average(
    poly: QuadraticCellField,
    disc: Discretization,
    sub_id: int,
    boundary_values: Callable,
) -> NodalField:
    """Node-wise averaging of the cell polynomials on one block.

    Outer-boundary nodes take the Dirichlet data; interface nodes stay
    one-sided (averaged over this block's cells only).
    """
    sub = disc.mesh.subdomains[sub_id]
    nx, ny = sub.nx, sub.ny
    sums = np.zeros((2 * nx + 1, 2 * ny + 1))
    counts = np.zeros_like(sums)
    c = poly.coeffs[sub_id]
    loc = np.array([-1.0, 0.0, 1.0])
    for a in range(3):
        rs = slice(a, a + 2 * (nx - 1) + 1, 2)
        for b in range(3):
            cs = slice(b, b + 2 * (ny - 1) + 1, 2)
            vals = (
                c[:, :, 0]
                + c[:, :, 1] * loc[a]
                + c[:, :, 2] * loc[b]
                + c[:, :, 3] * loc[a] ** 2
                + c[:, :, 4] * loc[b] ** 2
            )
            sums[rs, cs] += vals
            counts[rs, cs] += 1.0
    values = sums / counts

    xmin, xmax, ymin, ymax = disc.mesh.bbox
    xs = sub.x0 + np.arange(2 * nx + 1) * 0.5 * sub.hx
    ys = sub.y0 + np.arange(2 * ny + 1) * 0.5 * sub.hy
    tol = 1e-12 * max(xmax - xmin, ymax - ymin)
    on_x = (np.abs(xs - xmin) <= tol) | (np.abs(xs - xmax) <= tol)
    on_y = (np.abs(ys - ymin) <= tol) | (np.abs(ys - ymax) <= tol)
    rim = on_x[:, None] | on_y[None, :]
    if np.any(rim):
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        g = np.asarray(boundary_values(xx, yy), dtype=float)
        values[rim] = g[rim]
    return NodalField(sub, values)


def recover_interface_velocity(
    nodal: list[NodalField], K: PermField, disc: Discretization
) -> RecoveredFlux:
    """Two-point flux between the two blocks' nodal fields at every sub-edge."""
    n = len(disc.trace.sub_edges)
    values = np.zeros(n)
    for k, e in enumerate(disc.trace.sub_edges):
        sl = disc.mesh.subdomains[e.left_sub]
        sr = disc.mesh.subdomains[e.right_sub]
        x, y = e.midpoint
        if e.axis == "x":
            dl, dr = 0.5 * sl.hx, 0.5 * sr.hx
            pl, pr = (x - dl, y), (x + dr, y)
        else:
            dl, dr = 0.5 * sl.hy, 0.5 * sr.hy
            pl, pr = (x, y - dl), (x, y + dr)
        s_l = float(nodal[e.left_sub].evaluate(*pl)[0])
        s_r = float(nodal[e.right_sub].evaluate(*pr)[0])
        kxx_l, kyy_l = K(*pl)
        kxx_r, kyy_r = K(*pr)
        k_l = float(kxx_l) if e.axis == "x" else float(kyy_l)
        k_r = float(kxx_r) if e.axis == "x" else float(kyy_r)
        values[k] = -(s_r - s_l) / (dl / k_l + dr / k_r)
    return RecoveredFlux(values)


def recover(
    sol: MixedSolution, K: PermField, disc: Discretization, boundary_values: Callable
) -> PostFields:
    """Full recovery pipeline: multipliers, local quadratics, nodal averaging,
    two-point interface flux."""
    lam = compute_lagrange_multipliers(sol, K, disc)
    poly = postprocess_pressure(sol, lam, disc)
    nodal = [
        oswald_average(poly, disc, s.id, boundary_values)
        for s in disc.mesh.subdomains
    ]
    rec = recover_interface_velocity(nodal, K, disc)
    return PostFields(lam, poly, nodal, rec)
