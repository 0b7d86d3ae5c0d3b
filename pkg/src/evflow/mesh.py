"""Multiblock Cartesian meshes with non-matching interface traces.

The domain is a rectangle tiled by axis-aligned rectangular blocks, each
carrying its own uniform nx-by-ny cell grid. Neighboring blocks need not
match along their shared segment; the interface trace mesh is built by
intersecting the edge traces from both sides, and each resulting sub-edge
carries a single normal-flux degree of freedom shared by the two blocks.

Edge indexing convention per subdomain (local):
  vertical edges   (i, j): x = x0 + i*hx, spans [y0 + j*hy, y0 + (j+1)*hy],
                           global normal +x, i in [0, nx], j in [0, ny)
  horizontal edges (i, j): y = y0 + j*hy, spans [x0 + i*hx, x0 + (i+1)*hx],
                           global normal +y, i in [0, nx), j in [0, ny]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Edge classification codes stored in DofMap kind arrays.
INTERIOR = 0
BOUNDARY = 1
INTERFACE = 2

_REL_TOL = 1e-12


class MeshError(ValueError):
    """Raised for invalid layouts or resolutions."""


@dataclass(frozen=True)
class SubdomainGrid:
    """Uniform Cartesian grid on an axis-aligned rectangle."""

    id: int
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise MeshError(f"subdomain {self.id}: degenerate extent")
        if self.nx < 1 or self.ny < 1:
            raise MeshError(f"subdomain {self.id}: cell counts must be >= 1")

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def cell_index(self, i: int, j: int) -> int:
        return j * self.nx + i

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (self.x0 + (i + 0.5) * self.hx, self.y0 + (j + 0.5) * self.hy)

    def cell_centers(self) -> np.ndarray:
        """All cell centers, row-major (j outer, i inner), shape (n_cells, 2)."""
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.hx
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.hy
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def locate_cell(self, x: float, y: float) -> tuple[int, int]:
        """Cell containing (x, y); points on grid lines snap to the lower cell."""
        i = int(np.clip(np.floor((x - self.x0) / self.hx), 0, self.nx - 1))
        j = int(np.clip(np.floor((y - self.y0) / self.hy), 0, self.ny - 1))
        return i, j


@dataclass(frozen=True)
class Interface:
    """Shared segment between two blocks.

    axis 'x': vertical segment x = const, tangential interval [lo, hi] in y,
    global normal +x pointing from the left block into the right block.
    axis 'y': horizontal segment y = const, normal +y from below into above.
    """

    left: int
    right: int
    axis: str
    const: float
    lo: float
    hi: float

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass
class MultiblockMesh:
    subdomains: list[SubdomainGrid]
    interfaces: list[Interface]
    bbox: tuple[float, float, float, float]
    layout: str = "custom"

    @property
    def n_cells(self) -> int:
        return sum(s.n_cells for s in self.subdomains)

    def distance_to_interfaces(self, x: float, y: float) -> float:
        """Euclidean distance from a point to the union of interface segments."""
        best = np.inf
        for gam in self.interfaces:
            if gam.axis == "x":
                dt = max(gam.lo - y, y - gam.hi, 0.0)
                dn = x - gam.const
            else:
                dt = max(gam.lo - x, x - gam.hi, 0.0)
                dn = y - gam.const
            best = min(best, float(np.hypot(dn, dt)))
        return best


@dataclass(frozen=True)
class EdgeRef:
    """Reference to one edge of one subdomain: orientation 'v' or 'h'."""

    sub: int
    ori: str
    i: int
    j: int


@dataclass(frozen=True)
class SubEdge:
    """One element of the interface trace mesh.

    lo/hi/mid are tangential coordinates (y for axis 'x', x for axis 'y').
    left_cell/right_cell are (i, j) local cell indices in the respective
    blocks; left/right parent edges are the full block edges containing
    this sub-edge.
    """

    iface: int
    lo: float
    hi: float
    const: float
    axis: str
    left_sub: int
    left_cell: tuple[int, int]
    left_edge: EdgeRef
    right_sub: int
    right_cell: tuple[int, int]
    right_edge: EdgeRef

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def midpoint(self) -> tuple[float, float]:
        if self.axis == "x":
            return (self.const, self.mid)
        return (self.mid, self.const)


@dataclass
class InterfaceMesh:
    sub_edges: list[SubEdge]
    # per interface: indices into sub_edges, sorted by arc coordinate
    by_interface: list[list[int]] = field(default_factory=list)


def _tol(scale: float) -> float:
    return _REL_TOL * max(scale, 1.0)


def build_multiblock(
    blocks: list[tuple[float, float, float, float]],
    resolutions: list[tuple[int, int]],
    layout: str = "custom",
) -> MultiblockMesh:
    """Assemble a multiblock mesh from block extents and per-block (nx, ny).

    Blocks must tile their bounding box exactly: pairwise disjoint interiors
    and total area equal to the bounding-box area (relative 1e-12).
    """
    if len(blocks) != len(resolutions):
        raise MeshError("blocks and resolutions must have equal length")
    if not blocks:
        raise MeshError("at least one block required")
    subs = [
        SubdomainGrid(k, x0, x1, y0, y1, nx, ny)
        for k, ((x0, x1, y0, y1), (nx, ny)) in enumerate(zip(blocks, resolutions))
    ]

    xmin = min(s.x0 for s in subs)
    xmax = max(s.x1 for s in subs)
    ymin = min(s.y0 for s in subs)
    ymax = max(s.y1 for s in subs)
    scale = max(xmax - xmin, ymax - ymin)
    tol = _tol(scale)

    bbox_area = (xmax - xmin) * (ymax - ymin)
    total = sum(s.area for s in subs)
    if abs(total - bbox_area) > _REL_TOL * bbox_area * len(subs):
        raise MeshError(
            f"blocks do not tile the bounding box: area {total} vs {bbox_area}"
        )
    for a in subs:
        for b in subs:
            if a.id >= b.id:
                continue
            ox = min(a.x1, b.x1) - max(a.x0, b.x0)
            oy = min(a.y1, b.y1) - max(a.y0, b.y0)
            if ox > tol and oy > tol:
                raise MeshError(f"blocks {a.id} and {b.id} overlap")

    interfaces = []
    for a in subs:
        for b in subs:
            if a.id == b.id:
                continue
            # a's right side against b's left side
            if abs(a.x1 - b.x0) <= tol:
                lo, hi = max(a.y0, b.y0), min(a.y1, b.y1)
                if hi - lo > tol:
                    interfaces.append(Interface(a.id, b.id, "x", a.x1, lo, hi))
            # a's top side against b's bottom side
            if abs(a.y1 - b.y0) <= tol:
                lo, hi = max(a.x0, b.x0), min(a.x1, b.x1)
                if hi - lo > tol:
                    interfaces.append(Interface(a.id, b.id, "y", a.y1, lo, hi))

    return MultiblockMesh(subs, interfaces, (xmin, xmax, ymin, ymax), layout)


def build_checkerboard(n: int, ratio: int = 4) -> MultiblockMesh:
    """2x2 split of the unit square at (0.5, 0.5).

    Fine blocks (n cells per direction) sit at lower-left and upper-right;
    the two other blocks are coarsened by `ratio` per direction.
    """
    if ratio < 1 or n % ratio != 0:
        raise MeshError(f"n={n} not divisible by ratio={ratio}")
    m = n // ratio
    blocks = [
        (0.0, 0.5, 0.0, 0.5),  # fine
        (0.5, 1.0, 0.0, 0.5),  # coarse
        (0.0, 0.5, 0.5, 1.0),  # coarse
        (0.5, 1.0, 0.5, 1.0),  # fine
    ]
    res = [(n, n), (m, m), (m, m), (n, n)]
    return build_multiblock(blocks, res, layout="checkerboard2x2")


def build_two_blocks(n: int, ratio: int = 4) -> MultiblockMesh:
    """Vertical split of the unit square at x = 0.5.

    Left block is fine with square cells (n by 2n), right block is coarsened
    by `ratio` per direction. Used by the two-block domain-decomposition path.
    """
    if ratio < 1 or n % ratio != 0:
        raise MeshError(f"n={n} not divisible by ratio={ratio}")
    m = n // ratio
    blocks = [(0.0, 0.5, 0.0, 1.0), (0.5, 1.0, 0.0, 1.0)]
    res = [(n, 2 * n), (m, 2 * m)]
    return build_multiblock(blocks, res, layout="two_blocks")


def _trace_breakpoints(sub: SubdomainGrid, axis: str, lo: float, hi: float) -> np.ndarray:
    """Grid-line coordinates of `sub` along an interface, clipped to [lo, hi]."""
    if axis == "x":  # tangential direction is y
        ticks = sub.y0 + np.arange(sub.ny + 1) * sub.hy
    else:
        ticks = sub.x0 + np.arange(sub.nx + 1) * sub.hx
    t = _tol(hi - lo)
    return ticks[(ticks > lo + t) & (ticks < hi - t)]


def compute_interface_trace(mesh: MultiblockMesh) -> InterfaceMesh:
    """Intersect the two edge traces along every interface.

    Breakpoints from both sides are merged (tolerance 1e-12 relative to the
    segment length); degenerate intervals are dropped. Each sub-edge links to
    exactly one cell and one parent edge per side.
    """
    sub_edges: list[SubEdge] = []
    by_interface: list[list[int]] = []
    for k, gam in enumerate(mesh.interfaces):
        sl = mesh.subdomains[gam.left]
        sr = mesh.subdomains[gam.right]
        pts = np.concatenate(
            [
                [gam.lo, gam.hi],
                _trace_breakpoints(sl, gam.axis, gam.lo, gam.hi),
                _trace_breakpoints(sr, gam.axis, gam.lo, gam.hi),
            ]
        )
        pts = np.sort(pts)
        t = _tol(gam.length)
        merged = [pts[0]]
        for p in pts[1:]:
            if p - merged[-1] > t:
                merged.append(p)
        idxs = []
        for a, b in zip(merged[:-1], merged[1:]):
            m = 0.5 * (a + b)
            if gam.axis == "x":
                jl = int(np.clip(np.floor((m - sl.y0) / sl.hy), 0, sl.ny - 1))
                jr = int(np.clip(np.floor((m - sr.y0) / sr.hy), 0, sr.ny - 1))
                lcell, rcell = (sl.nx - 1, jl), (0, jr)
                ledge = EdgeRef(sl.id, "v", sl.nx, jl)
                redge = EdgeRef(sr.id, "v", 0, jr)
            else:
                il = int(np.clip(np.floor((m - sl.x0) / sl.hx), 0, sl.nx - 1))
                ir = int(np.clip(np.floor((m - sr.x0) / sr.hx), 0, sr.nx - 1))
                lcell, rcell = (il, sl.ny - 1), (ir, 0)
                ledge = EdgeRef(sl.id, "h", il, sl.ny)
                redge = EdgeRef(sr.id, "h", ir, 0)
            idxs.append(len(sub_edges))
            sub_edges.append(
                SubEdge(k, a, b, gam.const, gam.axis, sl.id, lcell, ledge, sr.id, rcell, redge)
            )
        by_interface.append(idxs)
    return InterfaceMesh(sub_edges, by_interface)


@dataclass
class DofMap:
    """Global numbering of velocity and pressure unknowns.

    Velocity: one DOF per non-interface block edge (interior and outer
    boundary) plus one per interface sub-edge; interface edges of the blocks
    themselves carry no DOF (marked -1). Pressure: one DOF per cell,
    block-by-block row-major.
    """

    vdof: list[np.ndarray]
    hdof: list[np.ndarray]
    vkind: list[np.ndarray]
    hkind: list[np.ndarray]
    subedge_dof: np.ndarray
    cell_offset: list[int]
    n_velocity: int
    n_pressure: int

    def pressure_dof(self, sub: int, i: int, j: int, mesh: MultiblockMesh) -> int:
        return self.cell_offset[sub] + mesh.subdomains[sub].cell_index(i, j)

    def edge_dof(self, ref: EdgeRef) -> int:
        arr = self.vdof if ref.ori == "v" else self.hdof
        return int(arr[ref.sub][ref.i, ref.j])

    def edge_kind(self, ref: EdgeRef) -> int:
        arr = self.vkind if ref.ori == "v" else self.hkind
        return int(arr[ref.sub][ref.i, ref.j])


def _classify_side(
    sub: SubdomainGrid,
    mesh: MultiblockMesh,
    side: str,
) -> list[tuple[float, float]]:
    """Interface coverage intervals (tangential) of one side of a block."""
    cov = []
    for gam in mesh.interfaces:
        if side == "right" and gam.axis == "x" and gam.left == sub.id:
            cov.append((gam.lo, gam.hi))
        elif side == "left" and gam.axis == "x" and gam.right == sub.id:
            cov.append((gam.lo, gam.hi))
        elif side == "top" and gam.axis == "y" and gam.left == sub.id:
            cov.append((gam.lo, gam.hi))
        elif side == "bottom" and gam.axis == "y" and gam.right == sub.id:
            cov.append((gam.lo, gam.hi))
    return cov


def _edge_on_segments(lo: float, hi: float, segments, tol: float) -> str:
    """'full' if the segments cover [lo,hi], 'none' if disjoint from all.

    Segments of distinct interfaces are tangentially disjoint, so summing
    positive overlaps measures the covered length; an edge may span two
    adjacent interfaces and still count as fully covered.
    """
    covered = 0.0
    for a, b in segments:
        covered += max(0.0, min(hi, b) - max(lo, a))
    if covered <= tol:
        return "none"
    if covered >= (hi - lo) - tol:
        return "full"
    return "partial"


def enumerate_dofs(mesh: MultiblockMesh, interface: InterfaceMesh) -> DofMap:
    """Number velocity and pressure unknowns.

    Order: block by block, vertical edges (i outer, j inner) then horizontal,
    skipping interface edges; interface sub-edges follow in trace order;
    pressures are block-by-block row-major.
    """
    scale = max(mesh.bbox[1] - mesh.bbox[0], mesh.bbox[3] - mesh.bbox[2])
    tol = _tol(scale)
    xmin, xmax, ymin, ymax = mesh.bbox

    vdof, hdof, vkind, hkind = [], [], [], []
    ndof = 0
    for sub in mesh.subdomains:
        vk = np.full((sub.nx + 1, sub.ny), INTERIOR, dtype=np.uint8)
        hk = np.full((sub.nx, sub.ny + 1), INTERIOR, dtype=np.uint8)

        for side, icol, on_outer in (
            ("left", 0, abs(sub.x0 - xmin) <= tol),
            ("right", sub.nx, abs(sub.x1 - xmax) <= tol),
        ):
            segs = _classify_side(sub, mesh, side)
            for j in range(sub.ny):
                lo = sub.y0 + j * sub.hy
                st = _edge_on_segments(lo, lo + sub.hy, segs, tol)
                if st == "full":
                    vk[icol, j] = INTERFACE
                elif st == "partial":
                    raise MeshError(
                        f"subdomain {sub.id}: edge straddles an interface end"
                    )
                elif on_outer:
                    vk[icol, j] = BOUNDARY
                else:
                    raise MeshError(
                        f"subdomain {sub.id}: uncovered {side} side at interior x"
                    )
        for side, jrow, on_outer in (
            ("bottom", 0, abs(sub.y0 - ymin) <= tol),
            ("top", sub.ny, abs(sub.y1 - ymax) <= tol),
        ):
            segs = _classify_side(sub, mesh, side)
            for i in range(sub.nx):
                lo = sub.x0 + i * sub.hx
                st = _edge_on_segments(lo, lo + sub.hx, segs, tol)
                if st == "full":
                    hk[i, jrow] = INTERFACE
                elif st == "partial":
                    raise MeshError(
                        f"subdomain {sub.id}: edge straddles an interface end"
                    )
                elif on_outer:
                    hk[i, jrow] = BOUNDARY
                else:
                    raise MeshError(
                        f"subdomain {sub.id}: uncovered {side} side at interior y"
                    )

        vd = np.full((sub.nx + 1, sub.ny), -1, dtype=np.int64)
        hd = np.full((sub.nx, sub.ny + 1), -1, dtype=np.int64)
        for i in range(sub.nx + 1):
            for j in range(sub.ny):
                if vk[i, j] != INTERFACE:
                    vd[i, j] = ndof
                    ndof += 1
        for i in range(sub.nx):
            for j in range(sub.ny + 1):
                if hk[i, j] != INTERFACE:
                    hd[i, j] = ndof
                    ndof += 1
        vdof.append(vd)
        hdof.append(hd)
        vkind.append(vk)
        hkind.append(hk)

    subedge_dof = np.arange(ndof, ndof + len(interface.sub_edges), dtype=np.int64)
    ndof += len(interface.sub_edges)

    cell_offset = []
    npres = 0
    for sub in mesh.subdomains:
        cell_offset.append(npres)
        npres += sub.n_cells

    return DofMap(vdof, hdof, vkind, hkind, subedge_dof, cell_offset, ndof, npres)


@dataclass
class Discretization:
    """Mesh, trace mesh and DOF numbering bundled for the assembly layers."""

    mesh: MultiblockMesh
    trace: InterfaceMesh
    dofmap: DofMap


def discretize(mesh: MultiblockMesh) -> Discretization:
    trace = compute_interface_trace(mesh)
    dofmap = enumerate_dofs(mesh, trace)
    return Discretization(mesh, trace, dofmap)
