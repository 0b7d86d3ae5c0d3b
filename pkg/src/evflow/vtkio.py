"""Legacy ASCII VTK output, one STRUCTURED_POINTS file per block.

The point lattice is the biquadratic node grid (spacing h/2), so the
recovered nodal pressure is written as point data directly. Cell data lives
on the half-cell lattice: each solver cell maps to a 2x2 patch of VTK cells
carrying the cell pressure (replicated) and, per patch quadrant, the flux of
the nearest x-face and y-face (interface edges carry their projected value).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import SubdomainGrid


def write_structured_points(
    path: str | Path,
    sub: SubdomainGrid,
    point_scalars: dict[str, np.ndarray],
    cell_scalars: dict[str, np.ndarray],
) -> None:
    """point_scalars arrays: (2nx+1, 2ny+1); cell_scalars: (2nx, 2ny)."""
    nx, ny = 2 * sub.nx, 2 * sub.ny
    lines = [
        "# vtk DataFile Version 3.0",
        f"evflow block {sub.id}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx + 1} {ny + 1} 1",
        f"ORIGIN {sub.x0:.12g} {sub.y0:.12g} 0",
        f"SPACING {0.5 * sub.hx:.12g} {0.5 * sub.hy:.12g} 1",
        f"POINT_DATA {(nx + 1) * (ny + 1)}",
    ]
    for name, arr in point_scalars.items():
        lines.append(f"SCALARS {name} float 1")
        lines.append("LOOKUP_TABLE default")
        for j in range(ny + 1):  # x varies fastest in legacy VTK
            lines.extend(f"{v:.9g}" for v in arr[:, j])
    lines.append(f"CELL_DATA {nx * ny}")
    for name, arr in cell_scalars.items():
        lines.append(f"SCALARS {name} float 1")
        lines.append("LOOKUP_TABLE default")
        for j in range(ny):
            lines.extend(f"{v:.9g}" for v in arr[:, j])
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def subdomain_cell_arrays(
    sub: SubdomainGrid,
    p_cells: np.ndarray,
    vv: np.ndarray,
    hh: np.ndarray,
) -> dict[str, np.ndarray]:
    """Half-cell lattice arrays: replicated pressure plus nearest-face fluxes."""
    nx, ny = sub.nx, sub.ny
    p = p_cells.reshape(ny, nx).T
    pressure = np.repeat(np.repeat(p, 2, axis=0), 2, axis=1)
    flux_x = np.empty((2 * nx, 2 * ny))
    flux_y = np.empty((2 * nx, 2 * ny))
    for qi in range(2):
        for qj in range(2):
            flux_x[qi::2, qj::2] = vv[qi : qi + nx, :]
            flux_y[qi::2, qj::2] = hh[:, qj : qj + ny]
    return {"pressure": pressure, "flux_x": flux_x, "flux_y": flux_y}


def read_structured_points(path: str | Path) -> dict:
    """Parse back a file written by write_structured_points (for checks)."""
    tokens = Path(path).read_text(encoding="utf-8").split("\n")
    out: dict = {"point_data": {}, "cell_data": {}}
    i = 0
    section = None
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("DIMENSIONS"):
            out["dimensions"] = tuple(int(v) for v in line.split()[1:])
        elif line.startswith("ORIGIN"):
            out["origin"] = tuple(float(v) for v in line.split()[1:])
        elif line.startswith("SPACING"):
            out["spacing"] = tuple(float(v) for v in line.split()[1:])
        elif line.startswith("POINT_DATA"):
            section = ("point_data", int(line.split()[1]))
        elif line.startswith("CELL_DATA"):
            section = ("cell_data", int(line.split()[1]))
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            count = section[1]
            vals = []
            i += 2  # skip LOOKUP_TABLE
            while len(vals) < count:
                vals.append(float(tokens[i].strip()))
                i += 1
            out[section[0]][name] = np.asarray(vals)
            continue
        i += 1
    return out
