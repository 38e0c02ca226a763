"""Quadratic Lagrange elements on triangles with crack-aware node tables.

Scalar nodes are mesh vertices plus edge midpoints.  On a crack-duplicated
mesh, edges lying on crack facets are keyed by (vertices, side) so the
midpoint unknowns split into +/- copies even when a facet's endpoints are
both crack tips (single shared vertices).

Vector dofs interleave components: dof(node i, comp c) = 2 i + c.
"""

from __future__ import annotations

import numpy as np


# 7-point degree-5 triangle rule (barycentric points, weights summing to 1)
_A1 = 0.0597158717897698
_B1 = 0.4701420641051151
_A2 = 0.7974269853530873
_B2 = 0.1012865073234563
TRI_QP = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
TRI_QW = np.array([0.225,
                   0.1323941527885062, 0.1323941527885062, 0.1323941527885062,
                   0.1259391805448271, 0.1259391805448271, 0.1259391805448271])

_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def gauss01(n: int):
    """Gauss-Legendre rule on (0,1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def p2_shape(lam: np.ndarray) -> np.ndarray:
    """P2 shape values; lam is (..., 3) barycentric, returns (..., 6)."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)


def p2_grad_ref(lam: np.ndarray) -> np.ndarray:
    """Gradients w.r.t. reference coords (xi, eta) with (l1,l2)=(xi,eta).

    lam (..., 3) -> (..., 6, 2).
    """
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    z = np.zeros_like(l0)
    d0 = 1 - 4 * l0
    g = np.stack([
        np.stack([d0, d0], axis=-1),
        np.stack([4 * l1 - 1, z], axis=-1),
        np.stack([z, 4 * l2 - 1], axis=-1),
        np.stack([4 * (l0 - l1), -4 * l1], axis=-1),
        np.stack([4 * l2, 4 * l1], axis=-1),
        np.stack([-4 * l2, 4 * (l0 - l2)], axis=-1)], axis=-2)
    return g


def p2_shape_1d(t: np.ndarray) -> np.ndarray:
    """Quadratic trace shapes along an edge, nodes (end0, mid, end1); t in [0,1]."""
    t = np.asarray(t)
    return np.stack([(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)],
                    axis=-1)


class P2Space:
    """Scalar/vector P2 node table over a (possibly crack-duplicated) mesh."""

    def __init__(self, points, tris, crack_minus=None, crack_plus=None,
                 tri_plus=None, duplicated=False):
        self.points = np.asarray(points, dtype=float)
        self.tris = np.asarray(tris, dtype=np.int64)
        nv = self.points.shape[0]
        nt = self.tris.shape[0]

        crack_tag = {}
        if duplicated and crack_minus is not None and len(crack_minus):
            for a, b in np.asarray(crack_minus):
                crack_tag[(min(a, b), max(a, b))] = True
            for a, b in np.asarray(crack_plus):
                crack_tag[(min(a, b), max(a, b))] = True
        self._cracked_pairs = crack_tag
        self.duplicated = duplicated

        edge_id: dict = {}
        tri_nodes = np.empty((nt, 6), dtype=np.int64)
        tri_nodes[:, :3] = self.tris
        node_key = [("v", int(v)) for v in range(nv)]
        coords = [self.points]
        extra = []
        nxt = nv
        tp = tri_plus if tri_plus is not None else np.zeros(nt, dtype=bool)
        for t in range(nt):
            for le, (i, j) in enumerate(_LOCAL_EDGES):
                a, b = int(self.tris[t, i]), int(self.tris[t, j])
                key = (min(a, b), max(a, b))
                tag = 0
                if key in crack_tag:
                    tag = 1 if tp[t] else -1
                full = key + (tag,)
                g = edge_id.get(full)
                if g is None:
                    g = nxt
                    edge_id[full] = g
                    node_key.append(("e", full[0], full[1], tag))
                    extra.append(0.5 * (self.points[a] + self.points[b]))
                    nxt += 1
                tri_nodes[t, 3 + le] = g
        self.tri_nodes = tri_nodes
        self.edge_id = edge_id
        self.node_key = node_key
        self.n_nodes = nxt
        self.node_xy = np.vstack([self.points,
                                  np.asarray(extra).reshape(-1, 2)])

        # crack facet node tables: (end0, mid, end1) per side
        if crack_minus is not None and len(crack_minus):
            self.crack_minus_nodes = self._facet_nodes(crack_minus, -1)
            self.crack_plus_nodes = self._facet_nodes(
                crack_plus, 1 if duplicated else -1)
        else:
            self.crack_minus_nodes = np.empty((0, 3), dtype=np.int64)
            self.crack_plus_nodes = np.empty((0, 3), dtype=np.int64)

        # geometry caches
        p = self.points[self.tris]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (nt,2,2)
        self.det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        self.area = 0.5 * np.abs(self.det)
        Jinv = np.empty_like(J)
        Jinv[:, 0, 0] = J[:, 1, 1]
        Jinv[:, 0, 1] = -J[:, 0, 1]
        Jinv[:, 1, 0] = -J[:, 1, 0]
        Jinv[:, 1, 1] = J[:, 0, 0]
        Jinv /= self.det[:, None, None]
        self.Jinv = Jinv  # maps ref gradients: grad_x = Jinv^T grad_ref

    def _facet_nodes(self, facets, tag):
        out = np.empty((len(facets), 3), dtype=np.int64)
        for f, (a, b) in enumerate(np.asarray(facets)):
            key = (min(int(a), int(b)), max(int(a), int(b)),
                   tag if self.duplicated and
                   (min(int(a), int(b)), max(int(a), int(b))) in self._cracked_pairs
                   else 0)
            mid = self.edge_id.get(key)
            if mid is None:
                # fall back: unduplicated mesh, tag 0
                mid = self.edge_id[(key[0], key[1], 0)]
            out[f] = (a, mid, b)
        return out

    # -- dof helpers -----------------------------------------------------
    @property
    def n_scalar_dofs(self) -> int:
        return self.n_nodes

    @property
    def n_vector_dofs(self) -> int:
        return 2 * self.n_nodes

    def vector_dofs(self, nodes) -> np.ndarray:
        """Interleaved vector dof indices for scalar node array (..., k) -> (..., 2k)."""
        nodes = np.asarray(nodes)
        out = np.empty(nodes.shape + (2,), dtype=np.int64)
        out[..., 0] = 2 * nodes
        out[..., 1] = 2 * nodes + 1
        return out.reshape(nodes.shape[:-1] + (-1,))

    def interpolate_scalar(self, fn) -> np.ndarray:
        return np.asarray(fn(self.node_xy), dtype=float)

    def interpolate_vector(self, fn) -> np.ndarray:
        vals = np.asarray(fn(self.node_xy), dtype=float)  # (nn, 2)
        return vals.reshape(-1)

    # -- elementwise evaluation ------------------------------------------
    def quad_points(self):
        """Physical quadrature points (nt, nq, 2) and weights (nt, nq)."""
        p = self.points[self.tris]  # (nt,3,2)
        x = np.einsum("qk,tkd->tqd", TRI_QP, p)
        w = self.area[:, None] * TRI_QW[None, :]
        return x, w

    def shape_grads(self):
        """Physical P2 gradients at quadrature points: (nt, nq, 6, 2)."""
        gref = p2_grad_ref(TRI_QP)  # (nq,6,2)
        return np.einsum("tdr,qnr->tqnd", np.swapaxes(self.Jinv, 1, 2), gref)

    def eval_scalar(self, coeffs, tri_ids=None):
        """(nt, nq) values of a scalar P2 field at quadrature points."""
        N = p2_shape(TRI_QP)  # (nq,6)
        tn = self.tri_nodes if tri_ids is None else self.tri_nodes[tri_ids]
        return np.einsum("qn,tn->tq", N, np.asarray(coeffs)[tn])

    def eval_vector(self, coeffs, tri_ids=None):
        """(nt, nq, 2) values of an interleaved vector P2 field."""
        N = p2_shape(TRI_QP)
        tn = self.tri_nodes if tri_ids is None else self.tri_nodes[tri_ids]
        c = np.asarray(coeffs).reshape(-1, 2)[tn]  # (nt,6,2)
        return np.einsum("qn,tnd->tqd", N, c)

    def eval_vector_grad(self, coeffs, tri_ids=None):
        """(nt, nq, 2, 2) gradients du_i/dx_j of an interleaved vector field."""
        G = self.shape_grads()
        if tri_ids is not None:
            G = G[tri_ids]
            tn = self.tri_nodes[tri_ids]
        else:
            tn = self.tri_nodes
        c = np.asarray(coeffs).reshape(-1, 2)[tn]  # (nt,6,2)
        return np.einsum("tqnj,tni->tqij", G, c)

    def integrate(self, vals) -> float:
        """Integrate values sampled at quadrature points (nt, nq, ...)."""
        w = self.area[:, None] * TRI_QW[None, :]
        if vals.ndim > 2:
            vals = vals.reshape(vals.shape[0], vals.shape[1], -1).sum(axis=2)
        return float(np.einsum("tq,tq->", w, vals))


def strain(grad):
    """Symmetric part of (..., 2, 2) gradients."""
    return 0.5 * (grad + np.swapaxes(grad, -1, -2))


def crack_facet_geometry(space: P2Space, params=None, spec=None):
    """Per-crack-facet lengths, tangents, analytic normals at 1D Gauss points.

    Returns dict with t (gauss params in [0,1]), w (weights), lengths (nf,),
    normals (nf, nq, 2), points (nf, nq, 2).
    """
    t, w = gauss01(4)
    fn = space.crack_minus_nodes
    p0 = space.node_xy[fn[:, 0]]
    p1 = space.node_xy[fn[:, 2]]
    seg = p1 - p0
    lengths = np.linalg.norm(seg, axis=1)
    pts = p0[:, None, :] + t[None, :, None] * seg[:, None, :]
    if spec is not None and params is not None:
        par = params[:, 0][:, None] + t[None, :] * (params[:, 1] - params[:, 0])[:, None]
        normals = spec.normal(par)
    else:
        tang = seg / lengths[:, None]
        normals = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
        normals = np.repeat(normals[:, None, :], len(t), axis=1)
    return {"t": t, "w": w, "lengths": lengths, "normals": normals,
            "points": pts}
