"""Norms, rigid-motion projections and empirical constants.

Fractional Slobodetsky (semi)norms on crack polylines are assembled as
Gram matrices by facet-pair quadrature: identical-facet pairs reduce to an
exact Gauss-Jacobi rule in the difference variable (straight facets make
|x-y| proportional to |s-t|), adjacent pairs use geometrically graded
subdivision toward the shared corner, distant pairs plain tensor Gauss.
Dual norms are discrete Riesz norms sqrt(g^T M^{-1} g).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import roots_jacobi

from .assembly import (CrackLayout, crack_l2_mass, grad_gram, strain_form,
                       vector_mass)
from .fem import P2Space, gauss01, p2_shape_1d


@dataclass
class Field:
    """Coefficient vector over a P2 space (vector-valued by default)."""

    space: P2Space
    coeffs: np.ndarray
    vector: bool = True

    def copy(self) -> "Field":
        return Field(self.space, self.coeffs.copy(), self.vector)


def mean_value(space: P2Space, coeffs, tri_ids=None, vector=False):
    """Mean of a P2 field over the mesh (or a triangle subset)."""
    if tri_ids is not None and len(tri_ids) == 0:
        raise ValueError("empty region")
    areas = space.area if tri_ids is None else space.area[tri_ids]
    total = float(areas.sum())
    if total <= 0:
        raise ValueError("region has zero measure")
    from .fem import TRI_QW
    w = areas[:, None] * TRI_QW[None, :]
    if vector:
        vals = space.eval_vector(coeffs, tri_ids)
        return np.einsum("tq,tqd->d", w, vals) / total
    vals = space.eval_scalar(coeffs, tri_ids)
    return float(np.einsum("tq,tq->", w, vals)) / total


# ---------------------------------------------------------------------------
# rigid motions
# ---------------------------------------------------------------------------

@dataclass
class RigidMotionBasis:
    """(PS)-orthonormal basis of {a + b rot(x)} as coefficient columns."""

    space: P2Space
    raw: np.ndarray          # (ndof, 3) translations + rotation
    ortho: np.ndarray        # (ndof, 3) PS-orthonormalized
    ps_gram: sp.csr_matrix   # E + M


def ps_gram(space: P2Space) -> sp.csr_matrix:
    """Scalar product int e(u):e(v) + int u.v."""
    return strain_form(space) + vector_mass(space)


def rigid_basis(space: P2Space, gram=None) -> RigidMotionBasis:
    xy = space.node_xy
    n = space.n_nodes
    raw = np.zeros((2 * n, 3))
    raw[0::2, 0] = 1.0
    raw[1::2, 1] = 1.0
    raw[0::2, 2] = -xy[:, 1]
    raw[1::2, 2] = xy[:, 0]
    M = gram if gram is not None else ps_gram(space)
    G = raw.T @ (M @ raw)
    L = np.linalg.cholesky(G)
    ortho = np.linalg.solve(L, raw.T).T
    return RigidMotionBasis(space=space, raw=raw, ortho=ortho, ps_gram=M)


def project_rigid(basis: RigidMotionBasis, v: np.ndarray) -> np.ndarray:
    """(PS)-orthogonal projection of v onto the rigid space."""
    c = basis.ortho.T @ (basis.ps_gram @ v)
    return basis.ortho @ c


# ---------------------------------------------------------------------------
# Slobodetsky seminorm Gram matrices
# ---------------------------------------------------------------------------

def _same_facet_ref(alpha: float):
    """Exact reference block int int (Na(s)-Na(t))(Nb(s)-Nb(t))/|s-t|^{1+2a}.

    Uses u = t - s: the difference quotients q_a(s,u) = (Na(s+u)-Na(s))/u
    are polynomials, so Gauss-Jacobi (weight u^{1-2a}) x Gauss is exact.
    Result must be scaled by L^{1-2alpha} for a facet of length L.
    """
    xj, wj = roots_jacobi(4, 0.0, 1.0 - 2.0 * alpha)
    u = 0.5 * (xj + 1.0)
    wu = wj / 2.0 ** (2.0 - 2.0 * alpha)
    sg, wg = gauss01(4)
    out = np.zeros((3, 3))
    for ui, wi in zip(u, wu):
        s = sg * (1.0 - ui)
        ws = wg * (1.0 - ui)
        qa = (p2_shape_1d(s + ui) - p2_shape_1d(s)) / ui  # (ns,3)
        out += wi * np.einsum("s,sa,sb->ab", ws, qa, qa)
    return 2.0 * out


def _pair_block(pA, pB, LA, LB, alpha, tq, wq):
    """Kernel quadrature block for facet pair with physical gauss points."""
    NA = p2_shape_1d(tq)
    d = pA[:, None, :] - pB[None, :, :]
    K = np.sum(d * d, axis=2) ** (-(0.5 + alpha))
    W = (LA * wq)[:, None] * (LB * wq)[None, :] * K
    Baa = np.einsum("st,sa,sb->ab", W, NA, NA)
    Bbb = np.einsum("st,ta,tb->ab", W, NA, NA)
    Bab = np.einsum("st,sa,tb->ab", W, NA, NA)
    return Baa, Bbb, Bab


def _graded_segments(a, b, depth):
    """Split segment (a -> b) geometrically refined toward a."""
    ts = np.concatenate([[0.0], 0.5 ** np.arange(depth - 1, -1.0, -1)])
    segs = []
    for i in range(len(ts) - 1):
        segs.append((a + ts[i] * (b - a), a + ts[i + 1] * (b - a)))
    return segs


def slobodetsky_gram(endpoints, facet_dofs, n_dofs, alpha,
                     ng=6, depth=12) -> np.ndarray:
    """Dense Gram of the H^alpha seminorm on a crack polyline.

    endpoints (nf, 2, 2), facet_dofs (nf, 3) trace dof ids.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    endpoints = np.asarray(endpoints, dtype=float)
    nf = len(endpoints)
    seg = endpoints[:, 1] - endpoints[:, 0]
    L = np.linalg.norm(seg, axis=1)
    G = np.zeros((n_dofs, n_dofs))
    # same-facet blocks, exact
    ref = _same_facet_ref(alpha)
    for f in range(nf):
        d = facet_dofs[f]
        G[np.ix_(d, d)] += L[f] ** (1.0 - 2.0 * alpha) * ref
    tq, wq = gauss01(ng)
    # distinct pairs
    for f in range(nf):
        for g in range(f + 1, nf):
            shared = _shared_corner(endpoints[f], endpoints[g])
            df, dg = facet_dofs[f], facet_dofs[g]
            if shared is None:
                pA = endpoints[f, 0] + tq[:, None] * seg[f]
                pB = endpoints[g, 0] + tq[:, None] * seg[g]
                Baa, Bbb, Bab = _pair_block(pA, pB, L[f], L[g], alpha, tq, wq)
                _accumulate(G, df, dg, Baa, Bbb, Bab, 2.0)
            else:
                _adjacent_pair(G, endpoints[f], endpoints[g], df, dg,
                               alpha, shared, tq, wq, depth)
    return G


def _shared_corner(ef, eg):
    for i in range(2):
        for j in range(2):
            if np.linalg.norm(ef[i] - eg[j]) < 1e-12 * max(
                    np.linalg.norm(ef[1] - ef[0]), 1e-30):
                return i, j
    return None


def _accumulate(G, df, dg, Baa, Bbb, Bab, factor):
    # kernel pairing (u(x)-u(y))(v(x)-v(y)) over x in f, y in g; the
    # symmetric (g,f) ordering doubles everything
    G[np.ix_(df, df)] += factor * Baa
    G[np.ix_(dg, dg)] += factor * Bbb
    G[np.ix_(df, dg)] -= factor * Bab
    G[np.ix_(dg, df)] -= factor * Bab.T


def _adjacent_pair(G, ef, eg, df, dg, alpha, shared, tq, wq, depth):
    i, j = shared
    cf = ef[i]
    # orient both segments away from the shared corner
    af, bf = ef[i], ef[1 - i]
    ag, bg = eg[j], eg[1 - j]
    segs_f = _graded_segments(af, bf, depth)
    segs_g = _graded_segments(ag, bg, depth)
    Lf = np.linalg.norm(bf - af)
    Lg = np.linalg.norm(bg - ag)

    def tr_param(p, a0, b0, flip):
        t = np.linalg.norm(p - a0, axis=1) / np.linalg.norm(b0 - a0)
        return 1.0 - t if flip else t

    for (a1, b1) in segs_f:
        p1 = a1[None, :] + tq[:, None] * (b1 - a1)[None, :]
        l1 = np.linalg.norm(b1 - a1)
        t1 = tr_param(p1, af, bf, flip=(i == 1))
        N1 = p2_shape_1d(t1)
        for (a2, b2) in segs_g:
            p2 = a2[None, :] + tq[:, None] * (b2 - a2)[None, :]
            l2 = np.linalg.norm(b2 - a2)
            t2 = tr_param(p2, ag, bg, flip=(j == 1))
            N2 = p2_shape_1d(t2)
            d = p1[:, None, :] - p2[None, :, :]
            r2 = np.sum(d * d, axis=2)
            if r2.min() <= 0.0:
                continue  # touching sub-pair at the corner: zero-measure tip
            K = r2 ** (-(0.5 + alpha))
            W = (l1 * wq)[:, None] * (l2 * wq)[None, :] * K
            Baa = np.einsum("st,sa,sb->ab", W, N1, N1)
            Bbb = np.einsum("st,ta,tb->ab", W, N2, N2)
            Bab = np.einsum("st,sa,tb->ab", W, N1, N2)
            _accumulate(G, df, dg, Baa, Bbb, Bab, 2.0)


def layout_endpoints(layout: CrackLayout) -> np.ndarray:
    p0 = layout.space.node_xy[layout.facet_minus[:, 0]]
    p1 = layout.space.node_xy[layout.facet_minus[:, 2]]
    return np.stack([p0, p1], axis=1)


def slobodetsky_seminorm(layout: CrackLayout, values, alpha,
                         gram=None) -> float:
    """Seminorm of nodal trace values; vector values (ntd, 2) are summed
    componentwise under the square root.
    """
    if gram is None:
        gram = slobodetsky_gram(layout_endpoints(layout), layout.facet_tds,
                                layout.n_trace_dofs, alpha)
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        return float(np.sqrt(max(v @ (gram @ v), 0.0)))
    return float(np.sqrt(max(sum(v[:, c] @ (gram @ v[:, c])
                                 for c in range(v.shape[1])), 0.0)))


@dataclass
class CrackNorms:
    """Frozen Gram matrices of one connected crack copy (reference S)."""

    layout: CrackLayout
    alpha: float
    mass: np.ndarray         # L2
    semi: np.ndarray         # |.|'^2
    full: np.ndarray         # H^alpha = L2 + semi
    chol: tuple              # factor of full, for Riesz solves

    @staticmethod
    def build(layout: CrackLayout, alpha: float, ng=6, depth=12) -> "CrackNorms":
        M0 = np.asarray(crack_l2_mass(layout).todense())
        S = slobodetsky_gram(layout_endpoints(layout), layout.facet_tds,
                             layout.n_trace_dofs, alpha, ng=ng, depth=depth)
        F = M0 + S
        return CrackNorms(layout, alpha, M0, S, F, sla.cho_factor(F))

    def norm(self, values) -> float:
        v = np.asarray(values, dtype=float)
        return float(np.sqrt(max(v @ (self.full @ v), 0.0)))

    def dual_norm(self, g) -> float:
        g = np.asarray(g, dtype=float)
        return float(np.sqrt(max(g @ sla.cho_solve(self.chol, g), 0.0)))

    def riesz(self, g) -> np.ndarray:
        return sla.cho_solve(self.chol, np.asarray(g, dtype=float))


def scaled_crack_norm(values_per_cell, alpha, epsilon, ref: CrackNorms) -> float:
    """NH1/2-type norm on S_eps from per-cell nodal values (nc, ntd).

    Per cell, the weighted Gram on eps*S equals eps^{d-1} * (reference
    H^alpha Gram) exactly, so the sum collapses to a scaled quadratic form.
    """
    V = np.atleast_2d(np.asarray(values_per_cell, dtype=float))
    return float(np.sqrt(max(epsilon * np.einsum("ci,ij,cj->", V, ref.full, V),
                             0.0)))


def scaled_crack_dual_norm(g_per_cell, alpha, epsilon, ref: CrackNorms) -> float:
    """Dual (H^{-alpha}(S_eps)) norm of per-cell functionals (nc, ntd)."""
    Gm = np.atleast_2d(np.asarray(g_per_cell, dtype=float))
    X = sla.cho_solve(ref.chol, Gm.T).T
    return float(np.sqrt(max(np.einsum("ci,ci->", Gm, X) / epsilon, 0.0)))


def dual_norm(g, gram) -> float:
    """Discrete Riesz dual norm sqrt(g^T M^{-1} g) for a dense Gram."""
    g = np.asarray(g, dtype=float)
    x = sla.solve(gram, g, assume_a="pos")
    return float(np.sqrt(max(g @ x, 0.0)))


# ---------------------------------------------------------------------------
# Korn constants
# ---------------------------------------------------------------------------

@dataclass
class KornReport:
    tag: str
    variant: str
    constant: float
    extremal: np.ndarray | None = None


def korn_constant(space: P2Space, variant: str = "wirtinger",
                  dirichlet_mask=None, tag: str = "",
                  dense_limit: int = 6000) -> KornReport:
    """Smallest C with ||v||_H1 <= C ||e(v)|| over W(O) (or H^1_Gamma).

    Computed from the extremal generalized eigenvalue of the strain form
    against the H1 Gram; rigid motions are removed by L2-orthogonality for
    the Wirtinger variant.
    """
    E = strain_form(space)
    H = grad_gram(space) + vector_mass(space)
    n = space.n_vector_dofs
    if variant == "dirichlet":
        if dirichlet_mask is None:
            raise ValueError("dirichlet variant needs a constrained-dof mask")
        free = ~np.asarray(dirichlet_mask)
        Ef = E[np.ix_(free, free)].tocsc()
        Hf = H[np.ix_(free, free)].tocsc()
        lam, vec = spla.eigsh(Ef, k=1, M=Hf, sigma=0.0, which="LM")
        v = np.zeros(n)
        v[free] = vec[:, 0]
        return KornReport(tag, variant, float(1.0 / np.sqrt(lam[0])), v)
    if variant != "wirtinger":
        raise ValueError(f"unknown variant {variant!r}")
    if n > dense_limit:
        raise ValueError("region too large for the dense Korn eigen solve")
    M = vector_mass(space)
    R = componentwise_rigid(space)
    # euclidean-orthonormal basis of {v | R^T M v = 0}
    Q = sla.null_space((M @ R).T)
    Er = Q.T @ (E @ Q)
    Hr = Q.T @ (H @ Q)
    lam, vec = sla.eigh(Er, Hr, subset_by_index=[0, 0])
    v = Q @ vec[:, 0]
    return KornReport(tag, variant, float(1.0 / np.sqrt(lam[0])), v)


def componentwise_rigid(space: P2Space) -> np.ndarray:
    """Rigid-motion coefficient columns restricted to each connected
    component of the mesh (the strain form's exact kernel).
    """
    from scipy.sparse.csgraph import connected_components
    nn = space.n_nodes
    tn = space.tri_nodes
    # adjacency: connect every node of a triangle to its first node
    r = np.concatenate([tn[:, 0]] * 5)
    c = np.concatenate([tn[:, k] for k in range(1, 6)])
    adj = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(nn, nn))
    ncomp, labels = connected_components(adj, directed=False)
    xy = space.node_xy
    cols = []
    for comp in range(ncomp):
        m = labels == comp
        for vec in ((1.0, 0.0), (0.0, 1.0)):
            col = np.zeros((nn, 2))
            col[m] = vec
            cols.append(col.ravel())
        col = np.zeros((nn, 2))
        col[m, 0] = -xy[m, 1]
        col[m, 1] = xy[m, 0]
        cols.append(col.ravel())
    return np.stack(cols, axis=1)


def h1_norm(space: P2Space, v) -> float:
    H = grad_gram(space) + vector_mass(space)
    return float(np.sqrt(max(v @ (H @ v), 0.0)))


def strain_norm(space: P2Space, v) -> float:
    E = strain_form(space)
    return float(np.sqrt(max(v @ (E @ v), 0.0)))


# ---------------------------------------------------------------------------
# co-normal dual estimate (divergence lemma diagnostic)
# ---------------------------------------------------------------------------

def conormal_dual_estimate(layout: CrackLayout, ref: CrackNorms,
                           v_fn, h_fn, epsilon: float,
                           inclusion_space: P2Space,
                           inclusion_tris) -> dict:
    """Dual norm of the flux functional phi -> int_S (v.nu) phi against
    eps ||h||_L2 + ||v||_L2 over the inclusion region.
    """
    tq, wq = gauss01(4)
    N1 = p2_shape_1d(tq)
    ntd = layout.n_trace_dofs
    g = np.zeros(ntd)
    for f in range(layout.n_facets):
        p0 = layout.space.node_xy[layout.facet_minus[f, 0]]
        p1 = layout.space.node_xy[layout.facet_minus[f, 2]]
        x = p0[None, :] + tq[:, None] * (p1 - p0)[None, :]
        nu = layout.td_normal[layout.facet_tds[f]]
        nuq = N1 @ nu
        nuq /= np.linalg.norm(nuq, axis=1, keepdims=True)
        vv = np.asarray(v_fn(x))
        flux = np.einsum("qd,qd->q", vv, nuq)
        g[layout.facet_tds[f]] += layout.lengths[f] * \
            np.einsum("q,q,qa->a", wq, flux, N1)
    nc = layout.n_cells
    gc = g.reshape(nc, -1)
    dn = scaled_crack_dual_norm(gc, ref.alpha, epsilon, ref)
    x, w = inclusion_space.quad_points()
    x, w = x[inclusion_tris], w[inclusion_tris]
    vv = np.asarray(v_fn(x.reshape(-1, 2))).reshape(x.shape)
    hv = np.asarray(h_fn(x.reshape(-1, 2))).reshape(x.shape[:2])
    nv = np.sqrt(np.einsum("tq,tqd,tqd->", w, vv, vv))
    nh = np.sqrt(np.einsum("tq,tq,tq->", w, hv, hv))
    denom = epsilon * nh + nv
    return {"dual": dn, "h_l2": nh, "v_l2": nv,
            "ratio": dn / denom if denom > 0 else 0.0}
