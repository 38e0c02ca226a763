"""Cracked reference cells and periodically cracked tilings.

The reference cell is the unit cell Y = (0,1)^d containing an inclusion
whose boundary carries an open crack patch.  The cracked matrix Y* is
meshed conformingly with the crack resolved as internal facets; after
duplication the crack facets exist in geometrically coincident +/- pairs
so that displacement fields may jump across them.

Tiling translates and scales the reference mesh onto an integer lattice
of cells inside a box domain.  Cell interfaces are conforming by
construction, which keeps the unfolding operators pure re-indexings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class GeometryError(ValueError):
    """Invalid crack/cell/tiling geometry."""


# ---------------------------------------------------------------------------
# crack shape descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrackSpec:
    """Descriptor of the inclusion boundary and the crack patch on it.

    kind "circle": inclusion is a disk, the crack is an angular fraction
    ``theta`` of its boundary, centred on angle 0.  The facet parameter is
    the polar angle.

    kind "line": a flat horizontal crack segment at height ``y0`` for
    x in (x0, x1); the minus side is below.  The facet parameter is x.

    kind "sphere" (d=3): inclusion is a ball, the crack is a polar cap
    covering an area fraction ``theta`` of the sphere.  Only the surface
    is meshed; volume FE operations are two-dimensional in this package.
    """

    kind: str = "circle"
    center: tuple = (0.5, 0.5)
    radius: float = 0.25
    theta: float = 1.0
    y0: float = 0.5
    x0: float = 0.25
    x1: float = 0.75

    def validate(self, dim: int) -> None:
        if self.kind not in ("circle", "line", "sphere"):
            raise GeometryError(f"unknown crack kind {self.kind!r}")
        if self.kind == "circle" and dim != 2 or self.kind == "sphere" and dim != 3:
            if self.kind == "line" and dim != 2:
                raise GeometryError("line cracks are two-dimensional")
        if not 0.0 < self.theta <= 1.0:
            raise GeometryError("crack fraction theta must lie in (0, 1]")
        if self.kind in ("circle", "sphere"):
            c = np.asarray(self.center[:dim], dtype=float)
            margin = min(float(np.min(c)), float(np.min(1.0 - c))) - self.radius
            if margin <= 1e-9:
                raise GeometryError("inclusion boundary touches the cell boundary")
            if self.radius <= 0:
                raise GeometryError("radius must be positive")
        if self.kind == "line":
            if not (0.0 < self.x0 < self.x1 < 1.0) or not (0.0 < self.y0 < 1.0):
                raise GeometryError("line crack must be strictly inside the cell")

    # -- parametrisation -------------------------------------------------
    def point(self, t):
        """Point on the inclusion boundary at parameter t."""
        t = np.asarray(t, dtype=float)
        if self.kind == "circle":
            cx, cy = self.center[:2]
            return np.stack([cx + self.radius * np.cos(t),
                             cy + self.radius * np.sin(t)], axis=-1)
        if self.kind == "line":
            return np.stack([t, np.full_like(t, self.y0)], axis=-1)
        raise GeometryError("no 2D parametrisation for kind %r" % self.kind)

    def normal(self, t):
        """Outward unit normal of the inclusion at parameter t."""
        t = np.asarray(t, dtype=float)
        if self.kind == "circle":
            return np.stack([np.cos(t), np.sin(t)], axis=-1)
        if self.kind == "line":
            z = np.zeros_like(t)
            return np.stack([z, np.ones_like(t)], axis=-1)
        raise GeometryError("no 2D parametrisation for kind %r" % self.kind)


# ---------------------------------------------------------------------------
# reference cell
# ---------------------------------------------------------------------------

@dataclass
class ReferenceCell:
    """Conforming simplicial mesh of the cracked unit cell Y*.

    ``crack_minus``/``crack_plus`` list the crack facets by vertex ids on
    the inclusion (-) and matrix (+) sides; they coincide until
    :func:`duplicate_crack_vertices` splits them.  ``crack_param`` holds
    the facet endpoint parameters used for analytic normals.
    """

    dim: int
    spec: CrackSpec
    h: float
    points: np.ndarray          # (nv, 2)
    tris: np.ndarray            # (nt, 3)
    tri_plus: np.ndarray        # (nt,) bool, True outside the inclusion (+)
    crack_minus: np.ndarray     # (nf, 2) inclusion-side facet copies
    crack_plus: np.ndarray      # (nf, 2) matrix-side facet copies
    crack_param: np.ndarray     # (nf, 2)
    vertex_on_boundary: np.ndarray  # (nv,) bool, on the cell boundary
    duplicated: bool = False
    surface: tuple | None = None    # d=3: (points, tris) of the crack patch

    @property
    def n_vertices(self) -> int:
        return 0 if self.points is None else self.points.shape[0]

    def crack_measure(self) -> float:
        """Length (d=2) or area (d=3) of the crack, by facet summation."""
        if self.dim == 3:
            pts, tris = self.surface
            a = pts[tris[:, 1]] - pts[tris[:, 0]]
            b = pts[tris[:, 2]] - pts[tris[:, 0]]
            return float(0.5 * np.linalg.norm(np.cross(a, b), axis=1).sum())
        p = self.points
        seg = p[self.crack_minus[:, 1]] - p[self.crack_minus[:, 0]]
        return float(np.linalg.norm(seg, axis=1).sum())

    def tri_areas(self) -> np.ndarray:
        p = self.points
        a = p[self.tris[:, 1]] - p[self.tris[:, 0]]
        b = p[self.tris[:, 2]] - p[self.tris[:, 0]]
        return 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def duplicated_cell(self) -> "ReferenceCell":
        if self.duplicated:
            return self
        return duplicate_crack_vertices(self)


def _circle_cell(spec: CrackSpec, h: float) -> ReferenceCell:
    c = np.asarray(spec.center[:2], dtype=float)
    r = spec.radius
    # angular resolution: multiple of 8 so the square corners are ray targets
    n_theta = max(16, 8 * int(math.ceil(2 * math.pi * r / (8 * h))))
    n_arc = max(1, round(spec.theta * n_theta))
    n_r = max(2, round(r / h))
    n_s = max(2, round(0.35 / h))

    ang = 2 * math.pi * np.arange(n_theta) / n_theta
    ring_dir = np.stack([np.cos(ang), np.sin(ang)], axis=1)

    pts = [c[None, :]]                      # vertex 0: centre
    # interior rings of the disk
    for j in range(1, n_r):
        pts.append(c + (r * j / n_r) * ring_dir)
    circle0 = 1 + (n_r - 1) * n_theta       # first vertex id on the circle
    pts.append(c + r * ring_dir)
    # square boundary hit by each ray, and layers between circle and square
    t_hit = np.empty(n_theta)
    for i, (dx, dy) in enumerate(ring_dir):
        cand = []
        if dx > 1e-14:
            cand.append((1.0 - c[0]) / dx)
        if dx < -1e-14:
            cand.append((0.0 - c[0]) / dx)
        if dy > 1e-14:
            cand.append((1.0 - c[1]) / dy)
        if dy < -1e-14:
            cand.append((0.0 - c[1]) / dy)
        t_hit[i] = min(cand)
    outer = c + t_hit[:, None] * ring_dir
    np.clip(outer, 0.0, 1.0, out=outer)
    layer0 = circle0 + n_theta
    for j in range(1, n_s + 1):
        s = j / n_s
        pts.append(c + r * ring_dir + s * (outer - c - r * ring_dir))
    points = np.concatenate(pts, axis=0)

    def ring_ids(j):
        # vertex ids of radial layer j: 0=centre fan base handled separately
        if j == 0:
            return None
        if j <= n_r:
            return 1 + (j - 1) * n_theta + np.arange(n_theta)
        return layer0 + (j - n_r - 1) * n_theta + np.arange(n_theta)

    tris = []
    i0 = np.arange(n_theta)
    i1 = (i0 + 1) % n_theta
    fan = ring_ids(1)
    for k in range(n_theta):
        tris.append([0, fan[i0[k]], fan[i1[k]]])
    for j in range(1, n_r + n_s):
        inner, outer_ids = ring_ids(j), ring_ids(j + 1)
        for k in range(n_theta):
            a, b = inner[i0[k]], inner[i1[k]]
            d, e = outer_ids[i0[k]], outer_ids[i1[k]]
            tris.append([a, d, e])
            tris.append([a, e, b])
    tris = np.asarray(tris, dtype=np.int64)

    p0, p1, p2 = (points[tris[:, k]] for k in range(3))
    det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - \
          (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    flip = det < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    cent = points[tris].mean(axis=1)
    # "+" side carries the trace from outside the inclusion, "-" from inside;
    # nu is outward from the inclusion and [v] = v+ - v-
    tri_plus = np.linalg.norm(cent - c, axis=1) > r

    # crack facets: circle edges whose midpoint angle lies inside the arc
    circle_ids = ring_ids(n_r)
    facets, params = [], []
    half = math.pi * n_arc / n_theta
    for k in range(n_theta):
        a0 = ang[i0[k]]
        a1 = ang[i1[k]] if i1[k] != 0 else 2 * math.pi
        mid = 0.5 * (a0 + a1)
        mid_w = math.atan2(math.sin(mid), math.cos(mid))   # wrap to (-pi, pi]
        if spec.theta >= 1.0 or abs(mid_w) < half - 1e-12:
            facets.append([circle_ids[i0[k]], circle_ids[i1[k]]])
            d0 = math.atan2(math.sin(a0), math.cos(a0))
            params.append([d0, d0 + 2 * math.pi / n_theta])
    crack = np.asarray(facets, dtype=np.int64)
    crack_param = np.asarray(params, dtype=float)

    onb = (np.abs(points) < 1e-12) | (np.abs(points - 1.0) < 1e-12)
    vertex_on_boundary = onb.any(axis=1)

    return ReferenceCell(
        dim=2, spec=spec, h=h, points=points, tris=tris, tri_plus=tri_plus,
        crack_minus=crack, crack_plus=crack.copy(), crack_param=crack_param,
        vertex_on_boundary=vertex_on_boundary)


def _line_cell(spec: CrackSpec, h: float) -> ReferenceCell:
    n = max(4, int(round(1.0 / h)))
    n += n % 2  # even so the crack line is a grid line
    # snap the crack extent and height to the grid
    j0 = round(spec.y0 * n)
    k0, k1 = round(spec.x0 * n), round(spec.x1 * n)
    if k0 <= 0 or k1 >= n or k0 >= k1 or j0 <= 0 or j0 >= n:
        raise GeometryError("line crack does not fit strictly inside the grid")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    points = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append([v00, v10, v11])
            tris.append([v00, v11, v01])
    tris = np.asarray(tris, dtype=np.int64)
    cent = points[tris].mean(axis=1)
    tri_plus = cent[:, 1] > spec.y0  # nu = +e2, "+" side above

    facets, params = [], []
    for k in range(k0, k1):
        facets.append([vid(k, j0), vid(k + 1, j0)])
        params.append([xs[k], xs[k + 1]])
    crack = np.asarray(facets, dtype=np.int64)
    crack_param = np.asarray(params, dtype=float)

    onb = (np.abs(points) < 1e-12) | (np.abs(points - 1.0) < 1e-12)
    return ReferenceCell(
        dim=2, spec=spec, h=1.0 / n, points=points, tris=tris, tri_plus=tri_plus,
        crack_minus=crack, crack_plus=crack.copy(), crack_param=crack_param,
        vertex_on_boundary=onb.any(axis=1))


def _sphere_cap_surface(spec: CrackSpec, h: float):
    r = spec.radius
    c = np.asarray(spec.center[:3] if len(spec.center) >= 3 else (0.5, 0.5, 0.5))
    phi0 = math.acos(1.0 - 2.0 * spec.theta)    # cap area fraction -> polar angle
    m = max(4, int(round(r * phi0 / h)))
    n_t = max(8, int(round(2 * math.pi * r / h)))
    pts = [c + r * np.array([0.0, 0.0, 1.0])]
    for j in range(1, m + 1):
        phi = phi0 * j / m
        for k in range(n_t):
            t = 2 * math.pi * k / n_t
            pts.append(c + r * np.array([math.sin(phi) * math.cos(t),
                                         math.sin(phi) * math.sin(t),
                                         math.cos(phi)]))
    pts = np.asarray(pts)

    def rid(j, k):
        return 1 + (j - 1) * n_t + (k % n_t)

    tris = []
    for k in range(n_t):
        tris.append([0, rid(1, k), rid(1, k + 1)])
    for j in range(1, m):
        for k in range(n_t):
            tris.append([rid(j, k), rid(j + 1, k), rid(j + 1, k + 1)])
            tris.append([rid(j, k), rid(j + 1, k + 1), rid(j, k + 1)])
    return pts, np.asarray(tris, dtype=np.int64)


def build_reference_cell(spec: CrackSpec | None = None, h: float = 0.1,
                         dim: int = 2) -> ReferenceCell:
    """Mesh the cracked reference cell Y* at target mesh size h.

    For dim=3 only the crack surface is triangulated (measures, scalings);
    FE solves are restricted to dim=2.
    """
    spec = spec or CrackSpec()
    if dim == 3 and spec.kind == "circle":
        spec = replace(spec, kind="sphere")
    spec.validate(dim)
    if dim == 3:
        if spec.kind != "sphere":
            raise GeometryError("3D reference cells require a spherical inclusion")
        surf = _sphere_cap_surface(spec, h)
        empty2 = np.empty((0, 2), dtype=np.int64)
        return ReferenceCell(
            dim=3, spec=spec, h=h, points=None, tris=None,
            tri_plus=None, crack_minus=empty2, crack_plus=empty2,
            crack_param=np.empty((0, 2)), vertex_on_boundary=None,
            surface=surf)
    if spec.kind == "circle":
        return _circle_cell(spec, h)
    if spec.kind == "line":
        return _line_cell(spec, h)
    raise GeometryError(f"cannot mesh crack kind {spec.kind!r} in 2D")


def duplicate_crack_vertices(cell: ReferenceCell) -> ReferenceCell:
    """Split the mesh along the crack: interior crack vertices get a
    plus-side copy and plus-side triangles are re-pointed to it.

    Crack tips stay single-valued so jumps vanish there.
    """
    if cell.duplicated or len(cell.crack_minus) == 0:
        return replace(cell, duplicated=True,
                       crack_plus=cell.crack_minus.copy())
    counts = np.zeros(cell.n_vertices, dtype=int)
    for a, b in cell.crack_minus:
        counts[a] += 1
        counts[b] += 1
    closed = cell.spec.kind in ("circle",) and cell.spec.theta >= 1.0
    interior = np.where(counts >= 2)[0] if not closed else np.where(counts >= 1)[0]
    if closed:
        interior = np.where(counts >= 2)[0]  # every vertex has two facets

    points = cell.points
    nv = points.shape[0]
    dup_of = {}
    new_pts = []
    for v in interior:
        dup_of[int(v)] = nv + len(new_pts)
        new_pts.append(points[v])
    points = np.vstack([points, np.asarray(new_pts).reshape(-1, 2)])

    tris = cell.tris.copy()
    plus_rows = np.where(cell.tri_plus)[0]
    for r in plus_rows:
        for loc in range(3):
            v = int(tris[r, loc])
            if v in dup_of:
                tris[r, loc] = dup_of[v]

    crack_plus = cell.crack_minus.copy()
    for f in range(crack_plus.shape[0]):
        for loc in range(2):
            v = int(crack_plus[f, loc])
            if v in dup_of:
                crack_plus[f, loc] = dup_of[v]

    vob = np.concatenate([cell.vertex_on_boundary,
                          np.zeros(len(new_pts), dtype=bool)])
    return replace(cell, points=points, tris=tris, crack_plus=crack_plus,
                   vertex_on_boundary=vob, duplicated=True)


# ---------------------------------------------------------------------------
# tiling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned box domain with named faces for the Dirichlet part."""

    lengths: tuple = (1.0, 1.0)
    origin: tuple = (0.0, 0.0)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def diameter(self) -> float:
        return float(np.linalg.norm(self.lengths))


_FACES_2D = ("left", "right", "bottom", "top")
_FACE_AXIS = {"left": (0, 0), "right": (0, 1), "bottom": (1, 0), "top": (1, 1),
              "back": (2, 0), "front": (2, 1)}


@dataclass
class PeriodicCrackedMesh:
    """Tiling of a box by epsilon-scaled copies of the reference cell.

    ``cell_vertex_map[c, v]`` is the global vertex id of reference vertex v
    in cell c; unfolding is pure re-indexing through this table.  Cells
    outside the exact tiling form the boundary layer, carried here by its
    exact area only (FE solves require an exact tiling).
    """

    epsilon: float
    cell: ReferenceCell
    domain: Box
    gamma: tuple
    xi: np.ndarray                  # (nc, d) integer translates
    exact_tiling: bool
    layer_volume: float
    points: np.ndarray | None = None
    tris: np.ndarray | None = None
    tri_plus: np.ndarray | None = None
    tri_cell: np.ndarray | None = None
    cell_vertex_map: np.ndarray | None = None   # (nc, nv_ref)
    duplicated: bool = False

    @property
    def n_cells(self) -> int:
        return self.xi.shape[0]

    @property
    def meshed(self) -> bool:
        return self.points is not None

    def tiled_volume(self) -> float:
        return self.n_cells * self.epsilon ** self.domain.dim

    def crack_measure(self) -> float:
        d = self.domain.dim
        return self.n_cells * self.epsilon ** (d - 1) * self.cell.crack_measure()

    def cell_origin(self, c: int) -> np.ndarray:
        return self.epsilon * self.xi[c].astype(float)

    def crack_minus_global(self) -> np.ndarray:
        """(nc, nf, 2) global vertex ids of minus-side crack facets."""
        return self.cell_vertex_map[:, self.cell.crack_minus]

    def crack_plus_global(self) -> np.ndarray:
        return self.cell_vertex_map[:, self.cell.crack_plus]


def _lattice(domain: Box, epsilon: float) -> np.ndarray:
    tol = 1e-10 * epsilon
    ranges = []
    for o, L in zip(domain.origin, domain.lengths):
        lo = math.ceil(o / epsilon - 1e-10)
        xs = []
        k = lo
        while epsilon * (k + 1) <= o + L + tol:
            xs.append(k)
            k += 1
        ranges.append(xs)
    if any(len(r) == 0 for r in ranges):
        return np.empty((0, domain.dim), dtype=np.int64)
    grids = np.meshgrid(*[np.asarray(r) for r in ranges], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def tile_domain(domain: Box, gamma, cell: ReferenceCell,
                epsilon: float) -> PeriodicCrackedMesh:
    """Tile the box by epsilon-cells; build the global conforming mesh when
    the tiling is exact.
    """
    if epsilon <= 0 or epsilon > domain.diameter():
        raise GeometryError("epsilon must lie in (0, diam(domain)]")
    gamma = tuple(gamma)
    faces = _FACES_2D if domain.dim == 2 else tuple(_FACE_AXIS)
    for g in gamma:
        if g not in faces:
            raise GeometryError(f"unknown face {g!r}")
    if not gamma:
        raise GeometryError("the Dirichlet part must contain at least one face")
    xi = _lattice(domain, epsilon)
    if xi.shape[0] == 0:
        raise GeometryError("epsilon too large: no cell fits inside the domain")
    d = domain.dim
    vol = domain.volume()
    tiled = xi.shape[0] * epsilon ** d
    exact = abs(vol - tiled) <= 1e-12 * vol
    mesh = PeriodicCrackedMesh(
        epsilon=epsilon, cell=cell, domain=domain, gamma=gamma, xi=xi,
        exact_tiling=exact, layer_volume=vol - tiled,
        duplicated=cell.duplicated)
    if d == 2 and exact and cell.points is not None:
        _build_global_mesh(mesh)
    return mesh


def _build_global_mesh(mesh: PeriodicCrackedMesh) -> None:
    cell = mesh.cell
    eps = mesh.epsilon
    nv = cell.n_vertices
    nc = mesh.xi.shape[0]
    onb = cell.vertex_on_boundary
    interior_ids = np.where(~onb)[0]
    boundary_ids = np.where(onb)[0]

    # quantised coordinates for interface matching
    scale = 1.0 / (1e-9 * eps)
    shared: dict = {}
    cmap = np.empty((nc, nv), dtype=np.int64)
    pts_list = []
    nxt = 0
    for c in range(nc):
        org = eps * mesh.xi[c].astype(float)
        loc = org + eps * cell.points
        ids = np.empty(nv, dtype=np.int64)
        for v in boundary_ids:
            key = (round(loc[v, 0] * scale), round(loc[v, 1] * scale))
            g = shared.get(key)
            if g is None:
                g = nxt
                shared[key] = g
                pts_list.append(loc[v])
                nxt += 1
            ids[v] = g
        for v in interior_ids:
            ids[v] = nxt
            pts_list.append(loc[v])
            nxt += 1
        cmap[c] = ids
    points = np.asarray(pts_list)
    tris = np.concatenate([cmap[c][cell.tris] for c in range(nc)], axis=0)
    mesh.points = points
    mesh.tris = tris
    mesh.tri_plus = np.tile(cell.tri_plus, nc)
    mesh.tri_cell = np.repeat(np.arange(nc), cell.tris.shape[0])
    mesh.cell_vertex_map = cmap


def duplicate_crack_dofs(mesh: PeriodicCrackedMesh) -> PeriodicCrackedMesh:
    """Return the tiling built on the crack-duplicated reference cell.

    Every crack facet then has a geometrically coincident plus-side twin;
    all non-crack unknowns stay single.
    """
    if mesh.duplicated:
        return mesh
    return tile_domain(mesh.domain, mesh.gamma, mesh.cell.duplicated_cell(),
                       mesh.epsilon)


def build_periodic_mesh(domain: Box, gamma, spec: CrackSpec | None = None,
                        h: float = 0.1, epsilon: float = 0.5,
                        dim: int = 2) -> PeriodicCrackedMesh:
    """Convenience: reference cell -> duplication -> tiling."""
    cell = build_reference_cell(spec, h=h, dim=dim).duplicated_cell()
    return tile_domain(domain, gamma, cell, epsilon)


def gamma_vertex_mask(mesh: PeriodicCrackedMesh) -> np.ndarray:
    """Boolean mask of global vertices lying on the Dirichlet faces."""
    pts = mesh.points
    d = mesh.domain.dim
    mask = np.zeros(pts.shape[0], dtype=bool)
    for g in mesh.gamma:
        ax, side = _FACE_AXIS[g]
        val = mesh.domain.origin[ax] + side * mesh.domain.lengths[ax]
        mask |= np.abs(pts[:, ax] - val) < 1e-9 * mesh.epsilon
    return mask


# ---------------------------------------------------------------------------
# VTK export
# ---------------------------------------------------------------------------

def export_vtk(mesh: PeriodicCrackedMesh, path, point_data: dict | None = None,
               cell_data: dict | None = None) -> None:
    """Write the tiled mesh as a legacy ASCII VTK unstructured grid.

    Cell index xi and the +/- side flag are always attached as cell data.
    """
    if not mesh.meshed:
        raise GeometryError("mesh has no global triangulation to export")
    pts, tris = mesh.points, mesh.tris
    cd = {"cell_index": mesh.tri_cell.astype(float),
          "plus_side": mesh.tri_plus.astype(float)}
    if cell_data:
        cd.update(cell_data)
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\ncrackhom mesh\nASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(pts)} double\n")
        for p in pts:
            f.write(f"{p[0]:.12g} {p[1]:.12g} 0\n")
        f.write(f"CELLS {len(tris)} {4 * len(tris)}\n")
        for t in tris:
            f.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        f.write(f"CELL_TYPES {len(tris)}\n")
        f.write("\n".join(["5"] * len(tris)) + "\n")
        f.write(f"CELL_DATA {len(tris)}\n")
        for name, arr in cd.items():
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            f.write("\n".join(f"{v:.12g}" for v in arr) + "\n")
        if point_data:
            f.write(f"POINT_DATA {len(pts)}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr)
                if arr.ndim == 1:
                    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    f.write("\n".join(f"{v:.12g}" for v in arr) + "\n")
                else:
                    f.write(f"VECTORS {name} double\n")
                    for row in arr:
                        z = row[2] if len(row) > 2 else 0.0
                        f.write(f"{row[0]:.12g} {row[1]:.12g} {z:.12g}\n")
