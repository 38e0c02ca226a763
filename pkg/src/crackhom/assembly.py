"""Bilinear forms and crack-trace plumbing on P2 spaces.

Covers the oscillating elasticity form, the fourth-order regularization
(C0 interior penalty), jump operators on the duplicated crack, loads, and
normal-stress trace extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fem import (P2Space, TRI_QP, TRI_QW, gauss01, p2_grad_ref, p2_shape,
                  p2_shape_1d, strain)


# ---------------------------------------------------------------------------
# elasticity tensors
# ---------------------------------------------------------------------------

def _iso_tensor(lam, mu):
    I = np.eye(2)
    a = (lam * np.einsum("ij,kl->ijkl", I, I)
         + mu * (np.einsum("ik,jl->ijkl", I, I)
                 + np.einsum("il,jk->ijkl", I, I)))
    return a


@dataclass
class ElasticityTensor:
    """Periodic fourth-order tensor a(y) with its structural bounds.

    ``fn`` maps cell points (n, 2) to tensors (n, 2, 2, 2, 2); the bounds
    alpha_bar (coercivity), C_A (continuity) and w1inf_S (W^{1,inf} norm of
    the coefficients near the crack) are carried for diagnostics.
    """

    fn: callable
    alpha_bar: float
    C_A: float
    w1inf_S: float
    name: str = "custom"

    @staticmethod
    def isotropic(lam: float = 1.0, mu: float = 1.0) -> "ElasticityTensor":
        a = _iso_tensor(lam, mu)

        def fn(y):
            return np.broadcast_to(a, y.shape[:-1] + a.shape)

        # eigenvalues of the isotropic map on symmetric matrices
        return ElasticityTensor(fn, alpha_bar=2 * mu, C_A=2 * mu + 2 * lam,
                                w1inf_S=2 * mu + 2 * lam, name="isotropic")

    @staticmethod
    def two_phase(lam: float = 1.0, mu: float = 1.0, contrast: float = 0.25,
                  center=(0.5, 0.5), radius: float = 0.25,
                  width: float = 0.08) -> "ElasticityTensor":
        """Stiff matrix / compliant inclusion, smoothly blended near the
        interface so the coefficients are W^{1,inf} in a neighbourhood of S.
        """
        a1 = _iso_tensor(lam, mu)
        c = np.asarray(center, dtype=float)

        def fn(y):
            d = np.linalg.norm(y - c, axis=-1) - radius
            s = np.clip(d / width, -1.0, 1.0)
            w = 0.5 * (1.0 + np.sin(0.5 * np.pi * s))   # C^1 ramp, 0 inside
            fac = contrast + (1.0 - contrast) * w
            return fac[..., None, None, None, None] * a1

        grad_scale = (1.0 - contrast) * (np.pi / 4) / width
        return ElasticityTensor(
            fn, alpha_bar=contrast * 2 * mu, C_A=2 * mu + 2 * lam,
            w1inf_S=(2 * mu + 2 * lam) * max(1.0, grad_scale),
            name="two_phase")

    def check_symmetry(self, y) -> float:
        a = self.fn(np.atleast_2d(y))
        return max(np.abs(a - np.swapaxes(a, -4, -3)).max(),
                   np.abs(a - np.transpose(a, (0, 3, 4, 1, 2))).max())


TENSOR_PRESETS = {
    "isotropic": ElasticityTensor.isotropic,
    "two_phase": ElasticityTensor.two_phase,
}


def evaluate_tensor(tensor: ElasticityTensor, x, epsilon: float):
    """Periodic evaluation a({x/eps}) at physical points x (n, 2)."""
    y = np.mod(np.asarray(x, dtype=float) / epsilon, 1.0)
    return tensor.fn(y)


# ---------------------------------------------------------------------------
# volume forms
# ---------------------------------------------------------------------------

def _scatter(space: P2Space, blocks, dofs) -> sp.csr_matrix:
    """Assemble (nt, k, k) blocks at (nt, k) dof indices into CSR."""
    nt, k, _ = blocks.shape
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    n = space.n_vector_dofs
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _vector_dofs(space: P2Space) -> np.ndarray:
    return space.vector_dofs(space.tri_nodes)  # (nt, 12)


def scalar_mass(space: P2Space) -> sp.csr_matrix:
    N = p2_shape(TRI_QP)  # (nq,6)
    Me = np.einsum("q,qn,qm->nm", TRI_QW, N, N)
    blocks = space.area[:, None, None] * Me[None]
    nt, k = blocks.shape[0], 6
    rows = np.repeat(space.tri_nodes, k, axis=1).ravel()
    cols = np.tile(space.tri_nodes, (1, k)).ravel()
    n = space.n_nodes
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def vector_mass(space: P2Space) -> sp.csr_matrix:
    N = p2_shape(TRI_QP)
    Me = np.einsum("q,qn,qm->nm", TRI_QW, N, N)
    Mv = np.kron(Me, np.eye(2))
    blocks = space.area[:, None, None] * Mv[None]
    return _scatter(space, blocks, _vector_dofs(space))


def grad_gram(space: P2Space) -> sp.csr_matrix:
    """Vector H1 seminorm form: int grad(u):grad(v)."""
    G = space.shape_grads()  # (nt,nq,6,2)
    Ke = np.einsum("q,tqnd,tqmd->tnm", TRI_QW, G, G) * space.area[:, None, None]
    blocks = np.einsum("tnm,ij->tnimj", Ke, np.eye(2)).reshape(-1, 12, 12)
    return _scatter(space, blocks, _vector_dofs(space))


def strain_form(space: P2Space, tensor_qp=None) -> sp.csr_matrix:
    """int a e(u):e(v); tensor_qp is (nt, nq, 2,2,2,2) or None for a = id."""
    G = space.shape_grads()  # (nt,nq,6,2)
    nt, nq = G.shape[:2]
    # strain basis: E[t,q,n,i,:,:] for dof (node n, comp i)
    E = np.zeros((nt, nq, 6, 2, 2, 2))
    for i in range(2):
        E[:, :, :, i, i, :] += 0.5 * G
        E[:, :, :, i, :, i] += 0.5 * G
    if tensor_qp is None:
        Ke = np.einsum("q,tqnikl,tqmjkl->tnimj", TRI_QW, E, E)
    else:
        AE = np.einsum("tqklrs,tqmjrs->tqmjkl", tensor_qp, E)
        Ke = np.einsum("q,tqnikl,tqmjkl->tnimj", TRI_QW, E, AE)
    Ke *= space.area[:, None, None, None, None]
    blocks = Ke.reshape(nt, 12, 12)
    return _scatter(space, blocks, _vector_dofs(space))


def assemble_elastic_form(space: P2Space, tensor: ElasticityTensor,
                          epsilon: float) -> sp.csr_matrix:
    x, _ = space.quad_points()
    A_qp = evaluate_tensor(tensor, x.reshape(-1, 2), epsilon)
    A_qp = A_qp.reshape(x.shape[0], x.shape[1], 2, 2, 2, 2)
    A = strain_form(space, A_qp)
    return 0.5 * (A + A.T)


def assemble_load(space: P2Space, f) -> np.ndarray:
    """(f, v) over the mesh; f callable (n,2)->(n,2) or constant pair."""
    x, w = space.quad_points()
    if callable(f):
        fv = np.asarray(f(x.reshape(-1, 2))).reshape(x.shape)
    else:
        fv = np.broadcast_to(np.asarray(f, dtype=float), x.shape)
    N = p2_shape(TRI_QP)  # (nq,6)
    Fe = np.einsum("tq,qn,tqd->tnd", w, N, fv)  # (nt,6,2)
    out = np.zeros(space.n_vector_dofs)
    np.add.at(out, _vector_dofs(space).ravel(), Fe.reshape(-1, 12).ravel())
    return out


# ---------------------------------------------------------------------------
# C0 interior-penalty regularization  [grad e(u), grad e(v)]
# ---------------------------------------------------------------------------

def _edge_table(space: P2Space):
    """Interior non-crack edges: (ne, 2) tri ids, (ne, 2) local edges."""
    from .fem import _LOCAL_EDGES
    owner: dict = {}
    pairs = []
    for t in range(space.tris.shape[0]):
        for le, (i, j) in enumerate(_LOCAL_EDGES):
            a, b = int(space.tris[t, i]), int(space.tris[t, j])
            key = (min(a, b), max(a, b))
            if key in space._cracked_pairs:
                continue
            if key in owner:
                pairs.append((owner[key][0], owner[key][1], t, le))
                del owner[key]
            else:
                owner[key] = (t, le)
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 4)


def _hess_ops(space: P2Space):
    """Constant second derivatives of P2 dofs per triangle.

    Returns D (nt, 12, 2, 2, 2): for vector dof (n,i) packed as 2n+i, the
    tensor d(e(u))_{kl}/dx_m  -- i.e. grad of the strain.
    """
    # second derivatives of shapes on reference: d2N/dxi_a dxi_b, constant
    H = np.zeros((6, 2, 2))
    H[0] = [[4, 4], [4, 4]]
    H[1] = [[4, 0], [0, 0]]
    H[2] = [[0, 0], [0, 4]]
    H[3] = [[-8, -4], [-4, 0]]
    H[4] = [[0, 4], [4, 0]]
    H[5] = [[0, -4], [-4, -8]]
    JiT = np.swapaxes(space.Jinv, 1, 2)  # (nt,2,2): grad_x = JiT @ grad_ref
    Hx = np.einsum("tad,ndb,tcb->tnac", JiT, H, JiT)  # d2N/dx_a dx_c
    nt = Hx.shape[0]
    # e(u)_{kl} = 0.5(d_l u_k + d_k u_l); u_k = delta_{ki} N_n
    # => d_m e_{kl} = 0.5(delta_{ki} H_{n,lm} + delta_{li} H_{n,km})
    D = np.zeros((nt, 6, 2, 2, 2, 2))   # (tri, node, comp, k, l, m)
    for i in range(2):
        D[:, :, i, i, :, :] += 0.5 * Hx
        D[:, :, i, :, i, :] += 0.5 * Hx
    return D.reshape(nt, 12, 2, 2, 2)


def assemble_regularization(space: P2Space, eta: float = 10.0) -> sp.csr_matrix:
    """C0 interior-penalty form for int grad(e(u)) : grad(e(v)).

    Element term: grad e is constant per element.  Facet term: (eta/h)
    int_F [e(u)]:[e(v)] over interior non-crack facets (strain jumps are
    penalized; across the crack the strain jump is physical).
    """
    D = _hess_ops(space)  # (nt,12,2,2,2)
    Ke = np.einsum("tnabc,tmabc->tnm", D, D) * space.area[:, None, None]
    B = _scatter(space, Ke, _vector_dofs(space))

    # facet penalty on strain jumps
    edges = _edge_table(space)
    if len(edges) == 0:
        return 0.5 * (B + B.T)
    from .fem import _LOCAL_EDGES
    tq, wq = gauss01(3)
    rows, cols, vals = [], [], []
    for t1, le1, t2, le2 in edges:
        i1, j1 = _LOCAL_EDGES[le1]
        a, b = space.tris[t1, i1], space.tris[t1, j1]
        pa, pb = space.points[a], space.points[b]
        h = np.linalg.norm(pb - pa)
        # barycentric coords along the edge for each triangle
        lam1 = _edge_bary(le1, tq)
        # locate the same physical points in t2's local edge
        ia2, jb2 = _LOCAL_EDGES[le2]
        if space.tris[t2, ia2] == a:
            lam2 = _edge_bary(le2, tq)
        else:
            lam2 = _edge_bary(le2, 1 - tq)
        E1 = _strain_basis_at(space, t1, lam1)   # (nq,12,2,2)
        E2 = _strain_basis_at(space, t2, lam2)
        d1 = space.vector_dofs(space.tri_nodes[t1][None, :])[0]
        d2 = space.vector_dofs(space.tri_nodes[t2][None, :])[0]
        dofs = np.concatenate([d1, d2])
        Ejump = np.concatenate([E1, -E2], axis=1)  # (nq,24,2,2)
        Kf = (eta / h) * h * np.einsum("q,qnkl,qmkl->nm", wq, Ejump, Ejump)
        rows.append(np.repeat(dofs, 24))
        cols.append(np.tile(dofs, 24))
        vals.append(Kf.ravel())
    n = space.n_vector_dofs
    P = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    B = B + P
    return 0.5 * (B + B.T)


def _edge_bary(le: int, t):
    """Barycentric coords along local edge le at parameter t in [0,1]."""
    lam = np.zeros((len(t), 3))
    i, j = ((0, 1), (1, 2), (2, 0))[le]
    lam[:, i] = 1 - t
    lam[:, j] = t
    return lam


def _strain_basis_at(space: P2Space, t: int, lam):
    """Strain of each vector dof of triangle t at barycentric points lam.

    Returns (nq, 12, 2, 2) with dof packing matching vector_dofs(tri_nodes).
    """
    gref = p2_grad_ref(lam)                      # (nq,6,2)
    JiT = space.Jinv[t].T
    G = np.einsum("dr,qnr->qnd", JiT, gref)      # (nq,6,2)
    nq = G.shape[0]
    E = np.zeros((nq, 6, 2, 2, 2))               # (q, node, comp, k, l)
    for i in range(2):
        E[:, :, i, i, :] += 0.5 * G
        E[:, :, i, :, i] += 0.5 * G
    return E.reshape(nq, 12, 2, 2)


# ---------------------------------------------------------------------------
# crack layout, jumps, traces
# ---------------------------------------------------------------------------

@dataclass
class CrackLayout:
    """Trace-space bookkeeping on the (duplicated) crack facets.

    Trace dofs are the geometric crack nodes (minus-side enumeration,
    cell-major for tiled meshes); each carries its +/- scalar node pair,
    analytic normal and in-plane tangent.
    """

    space: P2Space
    facet_minus: np.ndarray     # (nf, 3) scalar nodes (end0, mid, end1)
    facet_plus: np.ndarray
    facet_tds: np.ndarray       # (nf, 3) trace dof ids
    td_minus: np.ndarray        # (ntd,) scalar node ids
    td_plus: np.ndarray
    td_xy: np.ndarray           # (ntd, 2)
    td_normal: np.ndarray       # (ntd, 2)
    td_tau: np.ndarray          # (ntd, 2)
    lengths: np.ndarray         # (nf,)
    n_cells: int = 1

    @property
    def n_trace_dofs(self) -> int:
        return len(self.td_minus)

    @property
    def n_facets(self) -> int:
        return len(self.facet_minus)

    def weights(self) -> np.ndarray:
        """Lumped trace weights: w_i = int of the i-th trace hat (Simpson)."""
        w = np.zeros(self.n_trace_dofs)
        per = np.array([1 / 6, 4 / 6, 1 / 6])
        np.add.at(w, self.facet_tds, self.lengths[:, None] * per[None, :])
        return w


def build_crack_layout(space: P2Space, spec, crack_param,
                       n_cells: int = 1) -> CrackLayout:
    """Assemble trace-dof tables; crack_param is the reference facet
    parameter table, repeated per cell for tiled meshes.
    """
    fm = space.crack_minus_nodes
    fp = space.crack_plus_nodes
    nf = len(fm)
    if nf == 0:
        raise ValueError("mesh carries no crack facets")
    nodes, inv = np.unique(fm, return_inverse=True)
    facet_tds = inv.reshape(nf, 3)
    ntd = len(nodes)
    td_plus = np.empty(ntd, dtype=np.int64)
    td_plus[facet_tds] = fp
    params = np.tile(np.asarray(crack_param), (n_cells, 1))
    td_param = np.empty(ntd)
    pfull = np.stack([params[:, 0], 0.5 * (params[:, 0] + params[:, 1]),
                      params[:, 1]], axis=1)
    td_param[facet_tds] = pfull
    normal = spec.normal(td_param)
    tau = np.stack([-normal[:, 1], normal[:, 0]], axis=1)
    p0 = space.node_xy[fm[:, 0]]
    p1 = space.node_xy[fm[:, 2]]
    return CrackLayout(space=space, facet_minus=fm, facet_plus=fp,
                       facet_tds=facet_tds, td_minus=nodes, td_plus=td_plus,
                       td_xy=space.node_xy[nodes], td_normal=normal,
                       td_tau=tau, lengths=np.linalg.norm(p1 - p0, axis=1),
                       n_cells=n_cells)


@dataclass
class JumpOperator:
    """Sparse maps from displacement dofs to crack-trace jump values."""

    layout: CrackLayout
    full: sp.csr_matrix        # (2 ntd, ndof): [v] components interleaved
    normal: sp.csr_matrix      # (ntd, ndof): [v_nu]
    tangential: sp.csr_matrix  # (ntd, ndof): [v_tau] (scalar along tau)

    def check_decomposition(self, v: np.ndarray) -> float:
        j = (self.full @ v).reshape(-1, 2)
        jn = self.normal @ v
        jt = self.tangential @ v
        rec = jn[:, None] * self.layout.td_normal + \
            jt[:, None] * self.layout.td_tau
        return float(np.abs(rec - j).max())


def assemble_jump_operators(layout: CrackLayout) -> JumpOperator:
    ntd = layout.n_trace_dofs
    ndof = layout.space.n_vector_dofs
    rows, cols, vals = [], [], []
    for c in range(2):
        r = 2 * np.arange(ntd) + c
        rows += [r, r]
        cols += [2 * layout.td_plus + c, 2 * layout.td_minus + c]
        vals += [np.ones(ntd), -np.ones(ntd)]
    full = sp.coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(2 * ntd, ndof)).tocsr()
    diag_n = sp.coo_matrix(
        (layout.td_normal.ravel(),
         (np.repeat(np.arange(ntd), 2), np.arange(2 * ntd))),
        shape=(ntd, 2 * ntd)).tocsr()
    diag_t = sp.coo_matrix(
        (layout.td_tau.ravel(),
         (np.repeat(np.arange(ntd), 2), np.arange(2 * ntd))),
        shape=(ntd, 2 * ntd)).tocsr()
    return JumpOperator(layout=layout, full=full, normal=diag_n @ full,
                        tangential=diag_t @ full)


def crack_l2_mass(layout: CrackLayout) -> sp.csr_matrix:
    """Exact L2 mass of the quadratic trace space on the crack polyline."""
    tq, wq = gauss01(3)
    N = p2_shape_1d(tq)  # (nq,3)
    Me = np.einsum("q,qa,qb->ab", wq, N, N)
    blocks = layout.lengths[:, None, None] * Me[None]
    ntd = layout.n_trace_dofs
    rows = np.repeat(layout.facet_tds, 3, axis=1).ravel()
    cols = np.tile(layout.facet_tds, (1, 3)).ravel()
    return sp.coo_matrix((blocks.ravel(), (rows, cols)),
                         shape=(ntd, ntd)).tocsr()


def _facet_adjacent_tris(layout: CrackLayout, side: str) -> np.ndarray:
    """Triangle adjacent to each crack facet on the given side."""
    space = layout.space
    fnodes = layout.facet_minus if side == "minus" else layout.facet_plus
    want_plus = side == "plus"
    # map: midpoint node -> triangle containing it (midpoints are unique
    # to an edge; the crack edge has exactly one adjacent tri per side)
    tri_of_mid = {}
    for t in range(space.tris.shape[0]):
        for n in space.tri_nodes[t, 3:]:
            tri_of_mid.setdefault(int(n), []).append(t)
    out = np.empty(layout.n_facets, dtype=np.int64)
    for f in range(layout.n_facets):
        owners = tri_of_mid[int(fnodes[f, 1])]
        if len(owners) != 1:
            raise ValueError("crack facet midpoint shared by several tris")
        out[f] = owners[0]
    return out


def normal_stress_trace(u: np.ndarray, tensor: ElasticityTensor,
                        layout: CrackLayout, epsilon: float,
                        side: str = "plus") -> np.ndarray:
    """Nodal trace values of (a^eps e(u) nu) . nu on the crack, from one side.

    L2-projects the facetwise co-normal stress onto the quadratic trace
    space and returns nodal values (ntd,).
    """
    space = layout.space
    tris = _facet_adjacent_tris(layout, side)
    tq, wq = gauss01(4)
    N1 = p2_shape_1d(tq)                       # (nq,3)
    fnodes = layout.facet_minus if side == "minus" else layout.facet_plus
    ntd = layout.n_trace_dofs
    rhs = np.zeros(ntd)
    coeffs = np.asarray(u).reshape(-1, 2)
    for f in range(layout.n_facets):
        t = tris[f]
        p0 = space.node_xy[fnodes[f, 0]]
        p1 = space.node_xy[fnodes[f, 2]]
        x = p0[None, :] + tq[:, None] * (p1 - p0)[None, :]
        lam = _phys_to_bary(space, t, x)
        gref = p2_grad_ref(lam)
        G = np.einsum("dr,qnr->qnd", space.Jinv[t].T, gref)
        cu = coeffs[space.tri_nodes[t]]        # (6,2)
        grad = np.einsum("qnj,ni->qij", G, cu)
        e = strain(grad)
        A = evaluate_tensor(tensor, x, epsilon)
        sig = np.einsum("qijkl,qkl->qij", A, e)
        nu = _facet_normals(layout, f, tq)
        sn = np.einsum("qij,qi,qj->q", sig, nu, nu)
        rhs[layout.facet_tds[f]] += layout.lengths[f] * \
            np.einsum("q,q,qa->a", wq, sn, N1)
    from scipy.sparse.linalg import spsolve
    M = crack_l2_mass(layout)
    return spsolve(M.tocsc(), rhs)


def _facet_normals(layout: CrackLayout, f: int, t):
    """Unit normals at parameters t along facet f, from nodal normals."""
    N1 = p2_shape_1d(t)
    nn = layout.td_normal[layout.facet_tds[f]]  # (3,2)
    nu = N1 @ nn
    return nu / np.linalg.norm(nu, axis=1, keepdims=True)


def _phys_to_bary(space: P2Space, t: int, x):
    p = space.points[space.tris[t]]
    T = np.stack([p[1] - p[0], p[2] - p[0]], axis=1)
    ref = np.linalg.solve(T, (x - p[0]).T).T
    lam = np.empty((len(x), 3))
    lam[:, 1] = ref[:, 0]
    lam[:, 2] = ref[:, 1]
    lam[:, 0] = 1 - ref.sum(axis=1)
    return lam


def export_matrix_market(A, path) -> None:
    from scipy.io import mmwrite
    mmwrite(str(path), sp.coo_matrix(A))
