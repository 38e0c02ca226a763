"""Periodic unfolding calculus as pure re-indexing.

A field on the exactly tiled domain is unfolded by slicing its
coefficients cell by cell through dof maps onto the reference cell; all
norm identities then hold to machine precision because both sides use the
same quadrature on affinely scaled elements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import CrackLayout
from .fem import P2Space, gauss01, p2_shape_1d
from .geometry import PeriodicCrackedMesh


class UnfoldingError(ValueError):
    pass


@dataclass
class TiledSetup:
    """Global and reference discretizations of one exactly tiled domain."""

    mesh: PeriodicCrackedMesh
    ref_space: P2Space
    gspace: P2Space
    node_maps: np.ndarray        # (nc, nn_ref)
    ref_layout: CrackLayout
    g_layout: CrackLayout
    tmaps: np.ndarray            # (nc, ntd_ref)
    gamma_nodes: np.ndarray      # bool (nn_global,)

    @property
    def gamma_dofs(self) -> np.ndarray:
        m = np.zeros(self.gspace.n_vector_dofs, dtype=bool)
        idx = np.where(self.gamma_nodes)[0]
        m[2 * idx] = True
        m[2 * idx + 1] = True
        return m


def build_setup(mesh: PeriodicCrackedMesh) -> TiledSetup:
    """Build P2 spaces, crack layouts and unfolding maps for a tiled mesh."""
    from .assembly import build_crack_layout
    from .geometry import _FACE_AXIS
    if not mesh.exact_tiling or not mesh.meshed:
        raise UnfoldingError("setup requires an exactly tiled, meshed domain")
    cell = mesh.cell
    ref_space = P2Space(cell.points, cell.tris, cell.crack_minus,
                        cell.crack_plus, cell.tri_plus,
                        duplicated=cell.duplicated)
    nc = mesh.n_cells
    gcm = mesh.crack_minus_global().reshape(-1, 2)
    gcp = mesh.crack_plus_global().reshape(-1, 2)
    gspace = P2Space(mesh.points, mesh.tris, gcm, gcp, mesh.tri_plus,
                     duplicated=cell.duplicated)
    nm = cell_node_maps(gspace, mesh, ref_space)
    ref_layout = build_crack_layout(ref_space, cell.spec, cell.crack_param)
    g_layout = build_crack_layout(gspace, cell.spec, cell.crack_param,
                                  n_cells=nc)
    tm = trace_cell_maps(g_layout, ref_layout, nc)
    gamma = np.zeros(gspace.n_nodes, dtype=bool)
    xy = gspace.node_xy
    for gface in mesh.gamma:
        ax, side = _FACE_AXIS[gface]
        val = mesh.domain.origin[ax] + side * mesh.domain.lengths[ax]
        gamma |= np.abs(xy[:, ax] - val) < 1e-9 * mesh.epsilon
    return TiledSetup(mesh=mesh, ref_space=ref_space, gspace=gspace,
                      node_maps=nm, ref_layout=ref_layout, g_layout=g_layout,
                      tmaps=tm, gamma_nodes=gamma)


# ---------------------------------------------------------------------------
# dof maps
# ---------------------------------------------------------------------------

def cell_node_maps(gspace: P2Space, mesh: PeriodicCrackedMesh,
                   ref_space: P2Space) -> np.ndarray:
    """(nc, nn_ref) scalar-node map: reference node -> global node."""
    cmap = mesh.cell_vertex_map
    nc = mesh.n_cells
    out = np.empty((nc, ref_space.n_nodes), dtype=np.int64)
    for rn, key in enumerate(ref_space.node_key):
        if key[0] == "v":
            out[:, rn] = cmap[:, key[1]]
        else:
            _, a, b, tag = key
            for c in range(nc):
                ga, gb = int(cmap[c, a]), int(cmap[c, b])
                out[c, rn] = gspace.edge_id[(min(ga, gb), max(ga, gb), tag)]
    return out


def trace_cell_maps(g_layout: CrackLayout, ref_layout: CrackLayout,
                    n_cells: int) -> np.ndarray:
    """(nc, ntd_ref) trace-dof map via the cell-major facet ordering."""
    nf_ref = ref_layout.n_facets
    out = np.empty((n_cells, ref_layout.n_trace_dofs), dtype=np.int64)
    for c in range(n_cells):
        for f in range(nf_ref):
            out[c, ref_layout.facet_tds[f]] = \
                g_layout.facet_tds[c * nf_ref + f]
    return out


# ---------------------------------------------------------------------------
# unfolded fields
# ---------------------------------------------------------------------------

@dataclass
class UnfoldedField:
    """Cellwise reference-cell coefficients of T*_eps(phi); zero on the
    boundary layer by convention (not stored -- solves use exact tilings).
    """

    mesh: PeriodicCrackedMesh
    ref_space: P2Space
    values: np.ndarray        # (nc, ndof_ref) scalar or vector coefficients
    vector: bool = False


@dataclass
class BoundaryUnfoldedField:
    mesh: PeriodicCrackedMesh
    ref_layout: CrackLayout
    values: np.ndarray        # (nc, ntd_ref) or (nc, ntd_ref, 2)


def unfold_domain(coeffs, gspace: P2Space, mesh: PeriodicCrackedMesh,
                  ref_space: P2Space, node_maps=None,
                  vector=False) -> UnfoldedField:
    if not mesh.exact_tiling:
        raise UnfoldingError("unfolding requires an exactly tiled mesh")
    nm = node_maps if node_maps is not None else \
        cell_node_maps(gspace, mesh, ref_space)
    coeffs = np.asarray(coeffs)
    if vector:
        vals = coeffs.reshape(-1, 2)[nm].reshape(mesh.n_cells, -1)
    else:
        vals = coeffs[nm]
    return UnfoldedField(mesh, ref_space, vals, vector)


def fold_domain(uf: UnfoldedField, gspace: P2Space, node_maps) -> np.ndarray:
    """Left inverse of unfold_domain on exact tilings."""
    if uf.vector:
        out = np.empty((gspace.n_nodes, 2))
        out[node_maps] = uf.values.reshape(uf.values.shape[0], -1, 2)
        return out.reshape(-1)
    out = np.empty(gspace.n_nodes)
    out[node_maps] = uf.values
    return out


def unfolded_l2_norm(uf: UnfoldedField, ref_mass) -> float:
    """L2(Omega x Y*) norm: per-cell slot measure eps^d times ref norms."""
    eps = uf.mesh.epsilon
    d = uf.mesh.domain.dim
    V = uf.values
    if uf.vector:
        q = np.einsum("ci,ij,cj->", V.reshape(len(V), -1),
                      _vec_expand(ref_mass), V.reshape(len(V), -1))
    else:
        q = np.einsum("ci,ij,cj->", V, ref_mass, V)
    return float(np.sqrt(max(eps ** d * q, 0.0)))


def _vec_expand(M):
    import scipy.sparse as sp
    return sp.kron(sp.csr_matrix(M), sp.eye(2)).tocsr() \
        if not isinstance(M, np.ndarray) else np.kron(M, np.eye(2))


# ---------------------------------------------------------------------------
# boundary unfolding
# ---------------------------------------------------------------------------

def unfold_boundary(trace_values, g_layout: CrackLayout,
                    ref_layout: CrackLayout, mesh: PeriodicCrackedMesh,
                    tmaps=None) -> BoundaryUnfoldedField:
    tm = tmaps if tmaps is not None else \
        trace_cell_maps(g_layout, ref_layout, mesh.n_cells)
    vals = np.asarray(trace_values)[tm]
    return BoundaryUnfoldedField(mesh, ref_layout, vals)


def average_boundary(buf: BoundaryUnfoldedField, tmaps, n_global) -> np.ndarray:
    """U^b_eps: re-index cellwise traces back onto S_eps (left inverse)."""
    shape = (n_global,) + buf.values.shape[2:]
    out = np.empty(shape)
    out[tmaps] = buf.values
    return out


def boundary_integral(buf: BoundaryUnfoldedField) -> float:
    """int_{Omega x S} of the unfolded trace (x-measure eps^d per cell)."""
    eps = buf.mesh.epsilon
    d = buf.mesh.domain.dim
    tq, wq = gauss01(4)
    N = p2_shape_1d(tq)
    lay = buf.ref_layout
    vals = buf.values
    tot = 0.0
    for f in range(lay.n_facets):
        vf = vals[:, lay.facet_tds[f]]           # (nc, 3[, 2])
        vq = np.einsum("qa,ca...->cq...", N, vf)
        tot += lay.lengths[f] * np.einsum("q,cq...->", wq, vq)
    return float(eps ** d * tot)


def crack_integral(trace_values, layout: CrackLayout) -> float:
    tq, wq = gauss01(4)
    N = p2_shape_1d(tq)
    vals = np.asarray(trace_values)
    tot = 0.0
    for f in range(layout.n_facets):
        vq = np.einsum("qa,a...->q...", N, vals[layout.facet_tds[f]])
        tot += layout.lengths[f] * np.einsum("q,q...->", wq, vq)
    return float(tot)


def crack_lp_norm(trace_values, layout: CrackLayout, p: float) -> float:
    """L^p norm of a quadratic trace by facet Gauss quadrature."""
    tq, wq = gauss01(6)
    N = p2_shape_1d(tq)
    vals = np.asarray(trace_values)
    tot = 0.0
    for f in range(layout.n_facets):
        vq = N @ vals[layout.facet_tds[f]]
        if vq.ndim > 1:
            mag = np.linalg.norm(vq, axis=-1)
        else:
            mag = np.abs(vq)
        tot += layout.lengths[f] * float(wq @ mag ** p)
    return tot ** (1.0 / p)


def boundary_lp_norm(buf: BoundaryUnfoldedField, p: float) -> float:
    """L^p(Omega x S) norm of the unfolded trace."""
    eps = buf.mesh.epsilon
    d = buf.mesh.domain.dim
    tq, wq = gauss01(6)
    N = p2_shape_1d(tq)
    lay = buf.ref_layout
    tot = 0.0
    for f in range(lay.n_facets):
        vq = np.einsum("qa,ca...->cq...", N, buf.values[:, lay.facet_tds[f]])
        if vq.ndim > 2:
            mag = np.linalg.norm(vq, axis=-1)
        else:
            mag = np.abs(vq)
        tot += lay.lengths[f] * float(np.einsum("q,cq->", wq, mag ** p))
    return (eps ** d * tot) ** (1.0 / p)


# ---------------------------------------------------------------------------
# dual unfolding
# ---------------------------------------------------------------------------

def unfold_dual(g_per_cell: np.ndarray, epsilon: float) -> np.ndarray:
    """T^b_eps by duality: cell density of the unfolded functional.

    <T(g), Phi> = eps <g, U(Phi)> = sum_c eps^d <(g_c / eps^{d-1}), Phi_c>,
    so the x-density on cell c is g_c / eps^{d-1} (d=2: g_c / eps).
    """
    return np.asarray(g_per_cell) / epsilon


def dual_pairing(g_per_cell, phi_per_cell, epsilon: float, d: int = 2) -> float:
    """<T(g), Phi> over Omega x S = eps^d sum_c <density_c, Phi_c>."""
    dens = np.asarray(g_per_cell) / epsilon ** (d - 1)
    return float(epsilon ** d * np.einsum("ci,ci->", dens,
                                          np.asarray(phi_per_cell)))


def unfolded_dual_norm(g_per_cell, epsilon: float, ref_norms) -> float:
    """|| T^b(g) ||_{L2(Omega; H^-alpha(S))} with the discrete Riesz map."""
    import scipy.linalg as sla
    dens = np.asarray(g_per_cell) / epsilon
    X = sla.cho_solve(ref_norms.chol, dens.T).T
    d = 2
    return float(np.sqrt(max(epsilon ** d * np.einsum("ci,ci->", dens, X),
                             0.0)))


# ---------------------------------------------------------------------------
# macroscopic Q1 interpolation
# ---------------------------------------------------------------------------

def _xi_index(mesh: PeriodicCrackedMesh) -> dict:
    return {tuple(x): c for c, x in enumerate(mesh.xi)}


def interior_cells(mesh: PeriodicCrackedMesh, margin: int = 1) -> np.ndarray:
    """Cells whose +e_k neighbours up to `margin` exist (an interior omega)."""
    idx = _xi_index(mesh)
    keep = []
    for c, x in enumerate(mesh.xi):
        ok = all((tuple(x + dx) in idx)
                 for dx in np.ndindex(*(margin + 1,) * mesh.domain.dim))
        if ok:
            keep.append(c)
    return np.asarray(keep, dtype=np.int64)


def interpolate_Q(uf: UnfoldedField, nq_macro: int = 2):
    """Q1 macro interpolation of cell-corner unfolded values.

    Returns per-cell samples (ncq, nq_macro^d, ndof_ref) of the
    interpolant at tensor-Gauss points of each interior cell slot, plus
    the list of cells where all corner neighbours exist.
    """
    mesh = uf.mesh
    idx = _xi_index(mesh)
    tq, wq = gauss01(nq_macro)
    S, T = np.meshgrid(tq, tq, indexing="ij")
    s, t = S.ravel(), T.ravel()
    w2 = np.outer(wq, wq).ravel()
    cells, samples = [], []
    for c, x in enumerate(mesh.xi):
        corners = [(0, 0), (1, 0), (0, 1), (1, 1)]
        ids = []
        ok = True
        for dx in corners:
            cc = idx.get((x[0] + dx[0], x[1] + dx[1]))
            if cc is None:
                ok = False
                break
            ids.append(cc)
        if not ok:
            continue
        V = uf.values[ids]                     # (4, ndof_ref)
        wts = np.stack([(1 - s) * (1 - t), s * (1 - t),
                        (1 - s) * t, s * t], axis=1)  # (nqm,4)
        samples.append(wts @ V)
        cells.append(c)
    return np.asarray(cells, dtype=np.int64), np.asarray(samples), w2


def q_interp_error(uf: UnfoldedField, ref_h1_gram, nq_macro: int = 2) -> float:
    """|| Q_eps(phi) - T*_eps(phi) ||_{L2(omega; H1(Y*))} on interior cells."""
    cells, samples, w2 = interpolate_Q(uf, nq_macro)
    eps = uf.mesh.epsilon
    d = uf.mesh.domain.dim
    M = _vec_expand(ref_h1_gram) if uf.vector else ref_h1_gram
    total = 0.0
    for k, c in enumerate(cells):
        diff = samples[k] - uf.values[c][None, :]
        q = np.einsum("qi,ij,qj->q", diff, M, diff) \
            if isinstance(M, np.ndarray) else \
            np.einsum("qi,qi->q", diff, (M @ diff.T).T)
        total += eps ** d * float(w2 @ q)
    return float(np.sqrt(max(total, 0.0)))


# ---------------------------------------------------------------------------
# shift operator
# ---------------------------------------------------------------------------

def shift_difference(uf: UnfoldedField, k: int, cells=None):
    """Delta_k phi = phi(. + eps e_k) - phi by cell re-indexing.

    Returns (valid cell ids, per-cell coefficient differences).
    """
    mesh = uf.mesh
    idx = _xi_index(mesh)
    e = np.zeros(mesh.domain.dim, dtype=np.int64)
    e[k] = 1
    pool = range(mesh.n_cells) if cells is None else cells
    out_cells, diffs = [], []
    for c in pool:
        nb = idx.get(tuple(mesh.xi[c] + e))
        if nb is None:
            continue
        out_cells.append(c)
        diffs.append(uf.values[nb] - uf.values[c])
    if not out_cells:
        raise UnfoldingError("shift leaves the tiled region everywhere")
    return np.asarray(out_cells, dtype=np.int64), np.asarray(diffs)


def n_eps_cellwise(diffs: np.ndarray, ref_strain_gram, ref_reg_gram,
                   epsilon: float) -> float:
    """N_eps of a cellwise-coefficient field: sqrt(||e||^2 + eps^2||grad e||^2).

    Element scaling on eps-cells turns both terms into reference quadratic
    forms (d=2): ||e(v)||^2 = sum_c v_c^T E_ref v_c and
    eps^2 ||grad e||^2 = sum_c v_c^T B_ref v_c.
    """
    E = ref_strain_gram
    B = ref_reg_gram
    q = np.einsum("ci,ci->", diffs, (E @ diffs.T).T) \
        + np.einsum("ci,ci->", diffs, (B @ diffs.T).T)
    return float(np.sqrt(max(q, 0.0)))
