"""Coupled macro/micro (two-scale) limit problem with crack contact and
friction on the reference cell, and the epsilon-convergence study.

Discretization: macro displacement u is P2 on a structured triangulation
of the box; the corrector u-hat carries one periodic micro field on Y*
per macro *edge midpoint* node.  All coupled terms are integrated with
the edge-midpoint rule (degree-2 exact), which makes the micro-micro
block diagonal per carrier node while the macro block coincides with the
exact constant-tensor elasticity form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .assembly import (CrackLayout, ElasticityTensor, assemble_jump_operators,
                       assemble_load, assemble_regularization,
                       build_crack_layout, crack_l2_mass, evaluate_tensor,
                       normal_stress_trace, strain_form, vector_mass)
from .contact import SolverError, _Reduced, solve_vi
from .fem import P2Space, p2_grad_ref, p2_shape
from .geometry import _FACE_AXIS, Box, GeometryError, ReferenceCell


# barycentric coordinates of the local edge midpoints (edges 01, 12, 20)
_MID_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


# ---------------------------------------------------------------------------
# macro mesh
# ---------------------------------------------------------------------------

@dataclass
class MacroMesh:
    """Structured P2 triangulation of the box with carrier-node tables."""

    domain: Box
    n: int
    space: P2Space
    gamma_nodes: np.ndarray       # bool (nn,)
    carriers: np.ndarray          # (M,) scalar node ids of edge midpoints
    carrier_xy: np.ndarray        # (M, 2)
    carrier_w: np.ndarray         # (M,) quadrature weights sum |T|/3
    tri_carrier: np.ndarray       # (nt, 3) carrier index per local edge

    @property
    def gamma_dofs(self) -> np.ndarray:
        m = np.zeros(2 * len(self.gamma_nodes), dtype=bool)
        idx = np.where(self.gamma_nodes)[0]
        m[2 * idx] = True
        m[2 * idx + 1] = True
        return m


def build_macro(domain: Box, gamma, n: int = 4) -> MacroMesh:
    if n < 1:
        raise GeometryError("macro resolution must be >= 1")
    Lx, Ly = domain.lengths
    ox, oy = domain.origin
    xs = ox + Lx * np.arange(n + 1) / n
    ys = oy + Ly * np.arange(n + 1) / n
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), \
                vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    tris = np.asarray(tris, dtype=np.int64)
    nt = len(tris)
    space = P2Space(pts, tris, np.zeros((0, 2), dtype=np.int64),
                    np.zeros((0, 2), dtype=np.int64),
                    np.zeros(nt, dtype=bool), duplicated=False)

    # carrier nodes: every P2 edge-midpoint node
    edge_nodes = np.array([i for i, k in enumerate(space.node_key)
                           if k[0] == "e"], dtype=np.int64)
    cindex = {nid: i for i, nid in enumerate(edge_nodes)}
    tri_carrier = np.empty((nt, 3), dtype=np.int64)
    w = np.zeros(len(edge_nodes))
    for t in range(nt):
        for le in range(3):
            nid = space.tri_nodes[t, 3 + le]
            ci = cindex[nid]
            tri_carrier[t, le] = ci
            w[ci] += space.area[t] / 3.0

    gamma_mask = np.zeros(space.n_nodes, dtype=bool)
    xy = space.node_xy
    tol = 1e-9 * max(Lx, Ly)
    for gface in gamma:
        ax, side = _FACE_AXIS[gface]
        val = domain.origin[ax] + side * domain.lengths[ax]
        gamma_mask |= np.abs(xy[:, ax] - val) < tol
    return MacroMesh(domain=domain, n=n, space=space, gamma_nodes=gamma_mask,
                     carriers=edge_nodes, carrier_xy=xy[edge_nodes],
                     carrier_w=w, tri_carrier=tri_carrier)


def locate_point(macro: MacroMesh, x) -> tuple:
    """(triangle id, barycentric coords) of a point in the structured mesh."""
    Lx, Ly = macro.domain.lengths
    ox, oy = macro.domain.origin
    n = macro.n
    fx = (x[0] - ox) / Lx * n
    fy = (x[1] - oy) / Ly * n
    i = min(max(int(math.floor(fx)), 0), n - 1)
    j = min(max(int(math.floor(fy)), 0), n - 1)
    # square (i,j) holds triangles 2*(i*n+j) [a,b,c] and +1 [a,c,d]
    lx, ly = fx - i, fy - j
    if lx >= ly:          # lower triangle (a,b,c) = (i,j),(i+1,j),(i+1,j+1)
        t = 2 * (i * n + j)
        lam = np.array([1.0 - lx, lx - ly, ly])
    else:                 # upper triangle (a,c,d) = (i,j),(i+1,j+1),(i,j+1)
        t = 2 * (i * n + j) + 1
        lam = np.array([1.0 - ly, lx, ly - lx])
    return t, lam


def macro_eval(macro: MacroMesh, coeffs, x) -> np.ndarray:
    """Value of a macro P2 vector field at a point."""
    t, lam = locate_point(macro, x)
    N = p2_shape(np.asarray([lam]))
    c = np.asarray(coeffs).reshape(-1, 2)[macro.space.tri_nodes[t]]
    return (N[0] @ c)


def macro_eval_strain(macro: MacroMesh, coeffs, x) -> np.ndarray:
    """Strain e(u) of a macro P2 field at a point (2x2)."""
    t, lam = locate_point(macro, x)
    gref = p2_grad_ref(np.asarray([lam]))[0]         # (6,2)
    gphys = gref @ macro.space.Jinv[t]                   # (6,2)
    c = np.asarray(coeffs).reshape(-1, 2)[macro.space.tri_nodes[t]]
    grad = c.T @ gphys                                   # du_i/dx_j
    return 0.5 * (grad + grad.T)


def cr_weights(lam) -> np.ndarray:
    """Crouzeix-Raviart edge-midpoint interpolation weights (edges 01,12,20)."""
    l0, l1, l2 = lam
    return np.array([1.0 - 2.0 * l2, 1.0 - 2.0 * l0, 1.0 - 2.0 * l1])


# ---------------------------------------------------------------------------
# micro model (periodic cracked cell)
# ---------------------------------------------------------------------------

@dataclass
class MicroModel:
    """Reference-cell operators reduced by periodic dof identification."""

    cell: ReferenceCell
    space: P2Space
    layout: CrackLayout
    P: sp.csr_matrix              # vector dofs: full = P @ reduced
    A_red: sp.csr_matrix          # int a(y) e_y : e_y (reduced)
    B_red: sp.csr_matrix          # interior-penalty grad e_y form (reduced)
    PS_red_cols: np.ndarray       # (nred, 3) PS-products with rigid motions
    q_cols: np.ndarray            # (nred, 3) couplings int a B_m : e_y(.)
    affine: np.ndarray            # (3, ndof_full) unit-strain affine fields
    A_bar: np.ndarray             # (2,2,2,2) cell average of a(y)
    Jn_red: sp.csr_matrix
    Jt_red: sp.csr_matrix
    crack_mass: np.ndarray        # dense trace L2 mass
    n_red: int


#: unit macro strains spanned by the coupling columns
_UNIT_STRAINS = np.array([[[1.0, 0.0], [0.0, 0.0]],
                          [[0.0, 0.0], [0.0, 1.0]],
                          [[0.0, 1.0], [1.0, 0.0]]])


def periodic_reduction(space: P2Space, tol: float = 1e-9) -> sp.csr_matrix:
    """Scalar-node master/slave identification of opposite cell faces.

    Returns the vector-dof prolongation P with full = P @ reduced.
    """
    xy = space.node_xy
    nn = space.n_nodes

    def canon(p):
        x = 0.0 if abs(p[0] - 1.0) < tol else p[0]
        y = 0.0 if abs(p[1] - 1.0) < tol else p[1]
        return (round(x / tol) * tol, round(y / tol) * tol)

    slave = (np.abs(xy[:, 0] - 1.0) < tol) | (np.abs(xy[:, 1] - 1.0) < tol)
    master_of = {}
    for i in np.where(~slave)[0]:
        master_of[canon(xy[i])] = i
    target = np.empty(nn, dtype=np.int64)
    red_id = np.full(nn, -1, dtype=np.int64)
    nred = 0
    for i in range(nn):
        if not slave[i]:
            red_id[i] = nred
            nred += 1
    for i in range(nn):
        if slave[i]:
            key = canon(xy[i])
            if key not in master_of:
                raise GeometryError(
                    f"periodic identification failed at node {xy[i]}")
            target[i] = master_of[key]
        else:
            target[i] = i
    rows = np.arange(nn)
    cols = red_id[target]
    Ps = sp.csr_matrix((np.ones(nn), (rows, cols)), shape=(nn, nred))
    return sp.kron(Ps, sp.eye(2)).tocsr()


def build_micro(cell: ReferenceCell, tensor: ElasticityTensor,
                eta: float = 10.0) -> MicroModel:
    space = P2Space(cell.points, cell.tris, cell.crack_minus,
                    cell.crack_plus, cell.tri_plus,
                    duplicated=cell.duplicated)
    layout = build_crack_layout(space, cell.spec, cell.crack_param)
    P = periodic_reduction(space)

    x, w = space.quad_points()
    a_qp = evaluate_tensor(tensor, x.reshape(-1, 2), 1.0)
    a_qp = a_qp.reshape(x.shape[0], x.shape[1], 2, 2, 2, 2)
    A_full = strain_form(space, tensor_qp=a_qp)
    B_full = assemble_regularization(space, eta=eta)
    A_bar = np.einsum("tq,tqijkl->ijkl", w, a_qp)

    affine = np.stack([space.interpolate_vector(lambda p, B=B: p @ B.T)
                       for B in _UNIT_STRAINS])
    q_cols = np.asarray((P.T @ (A_full @ affine.T)))     # (nred, 3)

    PS = strain_form(space) + vector_mass(space)
    xyn = space.node_xy
    rigid = np.zeros((space.n_vector_dofs, 3))
    rigid[0::2, 0] = 1.0
    rigid[1::2, 1] = 1.0
    rigid[0::2, 2] = -xyn[:, 1]
    rigid[1::2, 2] = xyn[:, 0]
    PS_red_cols = np.asarray(P.T @ (PS @ rigid))

    jump = assemble_jump_operators(layout)
    return MicroModel(cell=cell, space=space, layout=layout, P=P,
                      A_red=(P.T @ A_full @ P).tocsr(),
                      B_red=(P.T @ B_full @ P).tocsr(),
                      PS_red_cols=PS_red_cols, q_cols=q_cols, affine=affine,
                      A_bar=A_bar,
                      Jn_red=(jump.normal @ P).tocsr(),
                      Jt_red=(jump.tangential @ P).tocsr(),
                      crack_mass=np.asarray(crack_l2_mass(layout).todense()),
                      n_red=P.shape[1])


# ---------------------------------------------------------------------------
# two-scale operators
# ---------------------------------------------------------------------------

@dataclass
class TwoScaleProblem:
    macro: MacroMesh
    micro: MicroModel
    tensor: ElasticityTensor
    kappa: float
    k: int                         # constraint-set flag (1: no kappa-term)
    K_sys: sp.csc_matrix
    f_sys: np.ndarray
    Jn_sys: sp.csr_matrix
    Jt_sys: sp.csr_matrix
    free_macro: np.ndarray         # macro dof mask into system ordering
    n_macro_free: int
    n_mult: int
    live: np.ndarray
    _dual_cache: object = None

    @property
    def n_carriers(self) -> int:
        return len(self.macro.carriers)

    def split(self, X):
        """System vector -> (macro coeffs full, uhat_red (M, nred))."""
        nm = self.n_macro_free
        M = self.n_carriers
        nred = self.micro.n_red
        U = np.zeros(self.macro.space.n_vector_dofs)
        U[~self.macro.gamma_dofs] = X[:nm]
        uh = X[nm:nm + M * nred].reshape(M, nred)
        return U, uh


def assemble_twoscale(macro: MacroMesh, micro: MicroModel,
                      tensor: ElasticityTensor, kappa: float,
                      f, k: int = 2) -> TwoScaleProblem:
    """Block system for the coupled limit problem.

    Unknowns: [macro free dofs | per-carrier reduced micro dofs |
    per-carrier rigid-orthogonality multipliers].
    """
    if k == 2 and kappa <= 0:
        raise ValueError("the k=2 problem requires kappa > 0")
    ms = macro.space
    nt = len(ms.tris)
    M = len(macro.carriers)
    nred = micro.n_red

    a_const = np.broadcast_to(micro.A_bar, (nt, 7, 2, 2, 2, 2))
    A_mac = strain_form(ms, tensor_qp=np.ascontiguousarray(a_const))
    load = assemble_load(ms, f)

    free = ~macro.gamma_dofs
    nm = int(free.sum())
    fidx = np.full(len(free), -1, dtype=np.int64)
    fidx[free] = np.arange(nm)

    # coupling: sum_T |T|/3 * beta_m(E_T(x_e)) * q_m . uhat_e
    gref = p2_grad_ref(_MID_BARY)                 # (3,6,2)
    rows, cols, vals = [], [], []
    vdofs = ms.vector_dofs(ms.tri_nodes)                 # (nt, 12)
    for t in range(nt):
        gphys = np.einsum("qnr,rd->qnd", gref, ms.Jinv[t])   # (3,6,2)
        # strain components of each vector dof at each midpoint
        beta = np.zeros((3, 12, 3))                      # (mid, dof, m)
        for nloc in range(6):
            for comp in range(2):
                jdof = 2 * nloc + comp
                g = gphys[:, nloc, :]                    # (3,2) d/dx_j
                E11 = g[:, 0] * (comp == 0)
                E22 = g[:, 1] * (comp == 1)
                E12 = 0.5 * (g[:, 1] * (comp == 0) + g[:, 0] * (comp == 1))
                beta[:, jdof, 0] = E11
                beta[:, jdof, 1] = E22
                beta[:, jdof, 2] = E12
        wt = ms.area[t] / 3.0
        for le in range(3):
            ci = macro.tri_carrier[t, le]
            # E = E11 B1 + E22 B2 + E12 B3 with B3 holding both
            # off-diagonals, so the plain (q_m, beta_m) pairing is exact
            block = wt * micro.q_cols @ beta[le].T
            mdofs = fidx[vdofs[t]]
            keep = mdofs >= 0
            r = np.repeat(np.arange(nred) + ci * nred, keep.sum())
            c = np.tile(mdofs[keep], nred)
            rows.append(r)
            cols.append(c)
            vals.append(block[:, keep].ravel())
    C = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(M * nred, nm))

    micro_block = micro.A_red + (kappa * micro.B_red if k == 2 else 0)
    blocks = [micro_block * w for w in macro.carrier_w]
    D = sp.block_diag(blocks, format="csr")

    Cw = sp.block_diag([sp.csr_matrix(micro.PS_red_cols)] * M,
                       format="csr")                     # (M*nred, 3M)

    A_ff = A_mac[np.ix_(free, free)]
    K_sys = sp.bmat([[A_ff, C.T, None],
                     [C, D, Cw],
                     [None, Cw.T, None]], format="csc")
    ntot = K_sys.shape[0]
    f_sys = np.zeros(ntot)
    f_sys[:nm] = load[free]

    ntd = micro.layout.n_trace_dofs
    Jn_blocks = sp.block_diag([micro.Jn_red] * M, format="csr")
    Jt_blocks = sp.block_diag([micro.Jt_red] * M, format="csr")
    pad = sp.csr_matrix((M * ntd, nm))
    padm = sp.csr_matrix((M * ntd, 3 * M))
    Jn_sys = sp.hstack([pad, Jn_blocks, padm], format="csr")
    Jt_sys = sp.hstack([pad, Jt_blocks, padm], format="csr")

    live_ref = np.asarray((np.abs(micro.Jn_red)
                           @ np.ones(micro.Jn_red.shape[1])) > 1e-13)
    live = np.tile(live_ref, M)
    return TwoScaleProblem(macro=macro, micro=micro, tensor=tensor,
                           kappa=kappa, k=k, K_sys=K_sys, f_sys=f_sys,
                           Jn_sys=Jn_sys, Jt_sys=Jt_sys, free_macro=free,
                           n_macro_free=nm, n_mult=3 * M, live=live)


# ---------------------------------------------------------------------------
# limit solves
# ---------------------------------------------------------------------------

@dataclass
class TwoScaleSolution:
    problem: TwoScaleProblem
    u: np.ndarray                  # macro coefficients (full)
    uhat: np.ndarray               # (M, nred) reduced micro coefficients
    lam_nu: np.ndarray             # (M, ntd)
    lam_tau: np.ndarray
    Sigma_nu: np.ndarray           # (M, ntd) interface normal stress
    energy: float
    history: list = field(default_factory=list)
    G: np.ndarray | None = None

    def uhat_full(self, i: int) -> np.ndarray:
        return self.problem.micro.P @ self.uhat[i]

    def carrier_strain(self, i: int) -> np.ndarray:
        """omega-averaged macro strain at carrier i."""
        return _carrier_strains(self.problem, self.u)[i]


def _carrier_strains(problem: TwoScaleProblem, U) -> np.ndarray:
    """Weight-averaged macro strain e(u) at every carrier node (M,2,2)."""
    macro = problem.macro
    ms = macro.space
    gref = p2_grad_ref(_MID_BARY)
    out = np.zeros((len(macro.carriers), 2, 2))
    c = np.asarray(U).reshape(-1, 2)
    for t in range(len(ms.tris)):
        gphys = np.einsum("qnr,rd->qnd", gref, ms.Jinv[t])
        cc = c[ms.tri_nodes[t]]                           # (6,2)
        grad = np.einsum("qnd,ni->qid", gphys, cc)        # (3,2,2)
        E = 0.5 * (grad + np.swapaxes(grad, 1, 2))
        wt = ms.area[t] / 3.0
        for le in range(3):
            out[macro.tri_carrier[t, le]] += wt * E[le]
    out /= macro.carrier_w[:, None, None]
    return out


def _carrier_gact(problem: TwoScaleProblem, G) -> tuple:
    """(Ghat (M, ntd), gact (M*ntd,)) from a bound G.

    G may be a scalar, an (M, ntd) array, or a callable G(x, y) with macro
    point x (2,) and crack points y (ntd, 2).
    """
    micro = problem.micro
    macro = problem.macro
    M = len(macro.carriers)
    ntd = micro.layout.n_trace_dofs
    if G is None:
        Gh = np.zeros((M, ntd))
    elif callable(G):
        Gh = np.stack([np.asarray(G(macro.carrier_xy[i],
                                    micro.layout.td_xy), dtype=float)
                       for i in range(M)])
    else:
        Ga = np.asarray(G, dtype=float)
        Gh = np.broadcast_to(Ga, (M, ntd)).copy() if Ga.ndim < 2 else Ga
    if np.any(Gh < 0):
        raise ValueError("friction bound must be non-negative")
    wy = micro.layout.weights()
    gact = (macro.carrier_w[:, None] * wy[None, :] * Gh).ravel()
    return Gh, gact


def solve_limit_given_friction(problem: TwoScaleProblem, G=None,
                               max_iter: int = 60) -> TwoScaleSolution:
    """Solve the coupled limit problem with prescribed friction bound."""
    Gh, gact = _carrier_gact(problem, G)
    d = _Reduced(Kf=problem.K_sys, Jnf=problem.Jn_sys, Jtf=problem.Jt_sys,
                 ff=problem.f_sys, free=np.ones(problem.K_sys.shape[0],
                                                dtype=bool),
                 live=problem.live, gact=gact, ntd=problem.Jn_sys.shape[0])
    X, ln, lt, history = solve_vi(d, max_iter=max_iter, cache_host=problem)
    U, uh = problem.split(X)
    M = problem.n_carriers
    ntd = problem.micro.layout.n_trace_dofs
    sol = TwoScaleSolution(problem=problem, u=U, uhat=uh,
                           lam_nu=ln.reshape(M, ntd),
                           lam_tau=lt.reshape(M, ntd),
                           Sigma_nu=np.zeros((M, ntd)),
                           energy=_ts_energy(problem, X, gact),
                           history=history, G=Gh)
    sol.Sigma_nu = interface_stress(sol)
    return sol


def _ts_energy(problem: TwoScaleProblem, X, gact) -> float:
    jt = problem.Jt_sys @ X
    return float(0.5 * X @ (problem.K_sys @ X) - problem.f_sys @ X
                 + np.sum(gact * np.abs(jt)))


def interface_stress(sol: TwoScaleSolution) -> np.ndarray:
    """Sigma_nu = ((a(y)(e(u) + e_y(uhat)) nu) . nu on the crack, per carrier."""
    problem = sol.problem
    micro = problem.micro
    E = _carrier_strains(problem, sol.u)
    out = np.zeros((problem.n_carriers, micro.layout.n_trace_dofs))
    for i in range(problem.n_carriers):
        beta = np.array([E[i, 0, 0], E[i, 1, 1], E[i, 0, 1]])
        coeffs = micro.affine.T @ beta + micro.P @ sol.uhat[i]
        out[i] = normal_stress_trace(coeffs, problem.tensor, micro.layout,
                                     1.0, side="plus")
    return out


def solve_limit_coulomb(problem: TwoScaleProblem, mu,
                        tol: float = 1e-6,
                        max_iter: int = 40) -> TwoScaleSolution:
    """Banach fixed point G_{k+1}(x,y) = mu(x) |Sigma_nu(x,y)| (k=2)."""
    if problem.k != 2 or problem.kappa <= 0:
        raise ValueError("Coulomb limit problem requires k=2 and kappa > 0")
    macro = problem.macro
    micro = problem.micro
    M = problem.n_carriers
    mu_vals = mu(macro.carrier_xy, macro.domain)
    Ms = micro.crack_mass

    def l2(dG):
        return float(np.sqrt(max(np.einsum(
            "i,ij,jk,ik->", macro.carrier_w, dG, Ms, dG), 0.0)))

    Gh = np.zeros((M, micro.layout.n_trace_dofs))
    changes = []
    norm1 = None
    sol = None
    for k in range(max_iter):
        sol = solve_limit_given_friction(problem, Gh)
        Gn = mu_vals[:, None] * np.abs(sol.Sigma_nu)
        ch = l2(Gn - Gh)
        changes.append(ch)
        if k == 0:
            norm1 = max(l2(Gn), 1e-30)
        if k >= 3 and changes[-1] > changes[-2] > changes[-3]:
            raise SolverError("two-scale Coulomb iteration diverging")
        Gh = Gn
        if ch <= tol * norm1:
            sol = solve_limit_given_friction(problem, Gh)
            break
    else:
        raise SolverError("two-scale Coulomb fixed point not converged")
    sol.history.append({"phase": "coulomb", "changes": changes})
    sol.G = Gh
    return sol


def n_norm(problem: TwoScaleProblem, U, uhat) -> float:
    """Coupled strain norm sqrt(||e(u)||^2 + sum_i w_i ||e_y(uhat_i)||^2)."""
    ms = problem.macro.space
    E_form = strain_form(ms)
    q = float(U @ (E_form @ U))
    Ey = strain_form(problem.micro.space)
    Ey_red = (problem.micro.P.T @ Ey @ problem.micro.P).tocsr()
    for i in range(problem.n_carriers):
        q += problem.macro.carrier_w[i] * \
            float(uhat[i] @ (Ey_red @ uhat[i]))
    return float(np.sqrt(max(q, 0.0)))


# ---------------------------------------------------------------------------
# two-scale Korn constant (reference cell only)
# ---------------------------------------------------------------------------

def two_scale_korn_constant(cell: ReferenceCell,
                            tensor: ElasticityTensor | None = None) -> float:
    """Largest C* with C*(|zeta| + ||e_y(w)||) <= ||zeta + e_y(w)|| over
    symmetric matrices zeta and periodic w orthogonal to rigid motions.
    """
    micro = build_micro(cell, tensor or ElasticityTensor.isotropic(0.0, 0.5))
    Ey = strain_form(micro.space)
    Ey_red = np.asarray((micro.P.T @ Ey @ micro.P).todense())
    # constrain to W: null space of the three PS-orthogonality rows
    Z = sla.null_space(micro.PS_red_cols.T)
    EyZ = Z.T @ Ey_red @ Z
    # cross term 2 int zeta : e_y(w): the identity-tensor coupling columns
    # already pair B3 with both off-diagonals, matching the zeta
    # parametrization (z1, z2, z3) -> [[z1, z3], [z3, z2]]
    q_id = _identity_coupling(micro)
    QZ = q_id.T @ Z                                # (3, nz)
    area = float(np.sum(micro.space.area))        # |Y*| = 1
    Mz = area * np.diag([1.0, 1.0, 2.0])          # int |zeta|^2_F
    nz = Z.shape[1]
    Afull = np.block([[Mz, QZ], [QZ.T, EyZ]])
    Bfull = np.block([[np.diag([1.0, 1.0, 2.0]), np.zeros((3, nz))],
                      [np.zeros((nz, 3)), EyZ]])
    vals = sla.eigh(Afull, Bfull, subset_by_index=[0, 0],
                    eigvals_only=True)
    lam_min = max(float(vals[0]), 0.0)
    return math.sqrt(lam_min / 2.0)


def _identity_coupling(micro: MicroModel) -> np.ndarray:
    """Columns int B_m : e_y(phi_p) dy on reduced dofs (nred, 3)."""
    Ey = strain_form(micro.space)       # identity tensor
    return np.asarray(micro.P.T @ (Ey @ micro.affine.T))


# ---------------------------------------------------------------------------
# epsilon-convergence study
# ---------------------------------------------------------------------------

def omega_prime_cells(mesh, scale: float = 0.6) -> np.ndarray:
    """Cells whose centre lies in the concentric sub-box of the domain."""
    dom = mesh.domain
    o = np.asarray(dom.origin)
    L = np.asarray(dom.lengths)
    centers = mesh.epsilon * (mesh.xi + 0.5)
    c0 = o + 0.5 * L
    inside = np.all(np.abs(centers - c0) <= 0.5 * scale * L, axis=1)
    return np.where(inside)[0]


def _cell_strains(ref_space: P2Space, coeffs_per_cell: np.ndarray):
    """(nc, nt, nq, 2, 2) reference-cell strains of cellwise coefficients."""
    G = ref_space.shape_grads()                      # (nt, nq, 6, 2)
    tn = ref_space.tri_nodes
    c = np.asarray(coeffs_per_cell)
    cc = c.reshape(c.shape[0], -1, 2)[:, tn]         # (nc, nt, 6, 2)
    grad = np.einsum("tqnj,ctni->ctqij", G, cc)
    return 0.5 * (grad + np.swapaxes(grad, -1, -2))


def unfolded_strain_error(setup, u_eps, limit: TwoScaleSolution,
                          omega_scale: float = 0.6) -> float:
    """|| T*(e(u_eps)) - (e(u) + e_y(uhat)) ||_{L2(Omega' x Y*)}.

    Requires the epsilon-mesh and the micro model to share the same
    reference-cell discretization.
    """
    mesh = setup.mesh
    micro = limit.problem.micro
    rs = setup.ref_space
    if rs.n_nodes != micro.space.n_nodes:
        raise ValueError("epsilon mesh and micro model use different cells")
    eps = mesh.epsilon
    cells = omega_prime_cells(mesh, omega_scale)
    nm = setup.node_maps[cells]
    vals = np.asarray(u_eps).reshape(-1, 2)[nm]      # (nc, nn_ref, 2)
    E_unf = _cell_strains(rs, vals.reshape(len(cells), -1)) / eps

    macro = limit.problem.macro
    uh_cells = np.empty((len(cells), micro.n_red))
    E_mac = np.empty((len(cells), 2, 2))
    for k, c in enumerate(cells):
        xc = eps * (mesh.xi[c] + 0.5)
        t, lam = locate_point(macro, xc)
        cw = cr_weights(lam)
        ci = macro.tri_carrier[t]
        uh_cells[k] = cw @ limit.uhat[ci]
        E_mac[k] = macro_eval_strain(macro, limit.u, xc)
    uh_full = (micro.P @ uh_cells.T).T               # (nc, ndof)
    E_y = _cell_strains(rs, uh_full)
    diff = E_unf - E_y - E_mac[:, None, None]
    _, w = rs.quad_points()                          # (nt, nq)
    err2 = eps ** 2 * np.einsum("tq,ctqij->", w, diff ** 2)
    return float(np.sqrt(max(err2, 0.0)))


def unfolded_sigma_error(setup, sigma_nu, limit: TwoScaleSolution,
                         omega_scale: float = 0.6) -> float:
    """|| T^b(sigma_nu(u_eps)) - Sigma_nu ||_{L2(Omega' x S)}."""
    mesh = setup.mesh
    micro = limit.problem.micro
    macro = limit.problem.macro
    eps = mesh.epsilon
    cells = omega_prime_cells(mesh, omega_scale)
    Ms = micro.crack_mass
    err2 = 0.0
    for c in cells:
        xc = eps * (mesh.xi[c] + 0.5)
        t, lam = locate_point(macro, xc)
        cw = cr_weights(lam)
        ci = macro.tri_carrier[t]
        target = cw @ limit.Sigma_nu[ci]
        d = sigma_nu[setup.tmaps[c]] - target
        err2 += eps ** 2 * float(d @ (Ms @ d))
    return float(np.sqrt(max(err2, 0.0)))


def convergence_study(domain, gamma, cell: ReferenceCell,
                      tensor: ElasticityTensor, f, eps_list,
                      G0: float = 0.0, kappa: float = 0.1,
                      macro_n: int = 3, eta: float = 10.0,
                      signorini_sigma: bool = False) -> dict:
    """Given-friction epsilon-solves against the two-scale limit solution.

    ``G0`` is a constant friction bound applied both to the epsilon
    problems and (scaled through the trace weights) to the limit problem.
    """
    from .contact import build_problem, solve_given_friction
    from .unfolding import build_setup
    from .geometry import tile_domain
    if len(eps_list) < 2:
        raise ValueError("need at least two epsilon levels")
    micro = build_micro(cell, tensor, eta=eta)
    macro = build_macro(domain, gamma, n=macro_n)
    k = 2 if kappa > 0 else 1
    tsp = assemble_twoscale(macro, micro, tensor, kappa=kappa, f=f, k=k)
    limit = solve_limit_given_friction(tsp, G0)
    rows = []
    for eps in eps_list:
        mesh = tile_domain(domain, gamma, cell, eps)
        setup = build_setup(mesh)
        pb = build_problem(setup, tensor, f, kappa=kappa, eta=eta)
        G = G0 * np.ones(setup.g_layout.n_trace_dofs)
        sol = solve_given_friction(pb, G)
        row = {"epsilon": eps,
               "strain_error": unfolded_strain_error(setup, sol.u, limit)}
        if signorini_sigma:
            row["sigma_error"] = unfolded_sigma_error(setup, sol.sigma_nu,
                                                      limit)
        rows.append(row)
    return {"rows": rows, "limit_energy": limit.energy}


def manufactured_error(cell: ReferenceCell, domain, gamma, eps: float,
                       Phi, dPhi, psi, w_y, dw_y) -> float:
    """Error of the synthetic two-scale field v(x) = Phi(x) + eps
    psi(x) w(x/eps) against its exact limit strain, both nodally
    interpolated on the same meshes.

    Phi, psi smooth macro fields; w_y periodic micro field with exact
    y-gradient dw_y; dPhi returns the macro strain of Phi.
    """
    from .geometry import tile_domain
    from .unfolding import build_setup
    mesh = tile_domain(domain, gamma, cell, eps)
    setup = build_setup(mesh)
    gs = setup.gspace
    xy = gs.node_xy
    y_frac = np.mod(xy / eps, 1.0)
    vals = Phi(xy) + eps * psi(xy)[:, None] * w_y(y_frac)
    coeffs = vals.reshape(-1)

    rs = setup.ref_space
    cells = omega_prime_cells(mesh, 1.1)             # all cells
    nm = setup.node_maps[cells]
    vc = coeffs.reshape(-1, 2)[nm].reshape(len(cells), -1)
    E_unf = _cell_strains(rs, vc) / eps

    yn = rs.node_xy
    err2 = 0.0
    _, wq = rs.quad_points()
    for k, c in enumerate(cells):
        xc = eps * (mesh.xi[c] + 0.5)
        # limit corrector at xc, nodally interpolated on the same cell mesh
        tau = (psi(xc[None])[0] * w_y(np.mod(yn, 1.0))).reshape(-1)
        E_y = _cell_strains(rs, tau[None])[0]
        diff = E_unf[k] - E_y - dPhi(xc)[None, None]
        err2 += eps ** 2 * np.einsum("tq,tqij->", wq, diff ** 2)
    return float(np.sqrt(max(err2, 0.0)))
