"""Given-friction contact solves, Coulomb fixed point, KKT and estimate
diagnostics.

The regularized given-friction problem is the strictly convex program

    min  1/2 u^T (A + kappa eps^2 B) u - f^T u + sum_i w_i G_i |[u_tau]_i|
    s.t. [u_nu]_i <= 0,

over Gamma-constrained displacements, with nodal crack constraints and
lumped (Simpson) trace weights w.  It is solved by a primal-dual
active-set method with exact equality-constrained subproblem solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (ElasticityTensor, JumpOperator, assemble_elastic_form,
                       assemble_jump_operators, assemble_load,
                       assemble_regularization, crack_l2_mass,
                       normal_stress_trace)
from .spaces import CrackNorms, scaled_crack_norm
from .unfolding import TiledSetup


class SolverError(RuntimeError):
    """Non-convergence of an iterative contact solve."""


@dataclass
class FrictionCoefficient:
    """Non-negative friction coefficient with compact support Omega'."""

    value: float = 0.3
    support_scale: float = 0.6      # concentric box, fraction of Omega

    def __call__(self, x, domain) -> np.ndarray:
        x = np.asarray(x)
        o = np.asarray(domain.origin)
        L = np.asarray(domain.lengths)
        c = o + 0.5 * L
        half = 0.5 * self.support_scale * L
        inside = np.all(np.abs(x - c) <= half, axis=-1)
        return self.value * inside.astype(float)

    @property
    def linf(self) -> float:
        return self.value


@dataclass
class GivenFrictionProblem:
    setup: TiledSetup
    tensor: ElasticityTensor
    A: sp.csr_matrix
    B: sp.csr_matrix | None
    load: np.ndarray
    jump: JumpOperator
    kappa: float
    epsilon: float
    tol: float = 1e-12
    max_iter: int = 60

    @property
    def K(self) -> sp.csr_matrix:
        if self.B is None or self.kappa == 0.0:
            return self.A
        return (self.A + (self.kappa * self.epsilon ** 2) * self.B).tocsr()


def build_problem(setup: TiledSetup, tensor: ElasticityTensor,
                  f, kappa: float, eta: float = 10.0) -> GivenFrictionProblem:
    gs = setup.gspace
    eps = setup.mesh.epsilon
    A = assemble_elastic_form(gs, tensor, eps)
    B = assemble_regularization(gs, eta=eta) if kappa > 0 else None
    load = assemble_load(gs, f)
    jump = assemble_jump_operators(setup.g_layout)
    return GivenFrictionProblem(setup=setup, tensor=tensor, A=A, B=B,
                                load=load, jump=jump, kappa=kappa,
                                epsilon=eps)


@dataclass
class ContactSolution:
    u: np.ndarray
    lam_nu: np.ndarray          # contact pressure >= 0 at trace dofs
    lam_tau: np.ndarray         # friction multiplier, |lam_tau| <= w G
    sigma_nu: np.ndarray        # extracted normal stress (plus side)
    energy: float
    iterations: list
    converged: bool
    G: np.ndarray


def _energy(problem: GivenFrictionProblem, u, G, w) -> float:
    K = problem.K
    jt = problem.jump.tangential @ u
    return float(0.5 * u @ (K @ u) - problem.load @ u
                 + np.sum(w * G * np.abs(jt)))


@dataclass
class _Reduced:
    """Gamma-eliminated system with crack jump maps."""

    Kf: sp.csc_matrix
    Jnf: sp.csr_matrix
    Jtf: sp.csr_matrix
    ff: np.ndarray
    free: np.ndarray
    live: np.ndarray            # trace dofs with a real +/- pair (not tips)
    gact: np.ndarray            # nodal friction capacity w_i G_i
    ntd: int


def _reduce(problem: GivenFrictionProblem, G) -> _Reduced:
    setup = problem.setup
    free = ~setup.gamma_dofs
    K = problem.K.tocsr()
    Jn = problem.jump.normal.tocsr()
    Jt = problem.jump.tangential.tocsr()
    live = np.asarray((np.abs(Jn) @ np.ones(Jn.shape[1])) > 1e-13)
    return _Reduced(Kf=K[np.ix_(free, free)].tocsc(),
                    Jnf=Jn[:, free].tocsr(), Jtf=Jt[:, free].tocsr(),
                    ff=problem.load[free], free=free, live=live,
                    gact=setup.g_layout.weights() * G,
                    ntd=setup.g_layout.n_trace_dofs)


def _saddle_solve(d: _Reduced, act, stick, slip_sign):
    """Exact solve with jn=0 on act, jt=0 on stick, slip traction imposed."""
    rows = []
    if act.any():
        rows.append(d.Jnf[act])
    if stick.any():
        rows.append(d.Jtf[stick])
    rhs = d.ff.copy()
    slip = d.live & (~stick) & (d.gact > 0) & (slip_sign != 0)
    if slip.any():
        rhs = rhs - d.Jtf[slip].T @ (d.gact[slip] * slip_sign[slip])
    nfree = len(d.ff)
    if rows:
        C = sp.vstack(rows).tocsr()
        m = C.shape[0]
        KKTm = sp.bmat([[d.Kf, C.T], [C, None]], format="csc")
        sol = spla.splu(KKTm).solve(np.concatenate([rhs, np.zeros(m)]))
        uf, mult = sol[:nfree], sol[nfree:]
    else:
        uf = spla.splu(d.Kf).solve(rhs)
        mult = np.zeros(0)
    ln = np.zeros(d.ntd)
    lt = np.zeros(d.ntd)
    k = 0
    if act.any():
        ln[act] = mult[k:k + int(act.sum())]
        k += int(act.sum())
    if stick.any():
        lt[stick] = mult[k:]
    if slip.any():
        lt[slip] = d.gact[slip] * slip_sign[slip]
    return uf, ln, lt


def _set_violation(d: _Reduced, uf, ln, lt, act, stick) -> float:
    """Max scaled KKT violation of an exact active-set solve."""
    jn = d.Jnf @ uf
    jt = d.Jtf @ uf
    su = max(float(np.abs(jn).max(initial=0.0)),
             float(np.abs(jt).max(initial=0.0)), 1e-30)
    sl = max(float(np.abs(ln).max(initial=0.0)),
             float(np.abs(lt).max(initial=0.0)),
             float(d.gact.max(initial=0.0)), 1e-30)
    v = max(float(jn[d.live].max(initial=-np.inf)) / su,      # penetration
            float((-ln).max(initial=0.0)) / sl)               # sign of lam_nu
    v = max(v, float((np.abs(lt) - d.gact).max(initial=0.0)) / sl)
    slipping = d.live & (np.abs(jt) > 1e-9 * su)
    if slipping.any():
        v = max(v, float(np.abs(lt[slipping] - d.gact[slipping]
                                * np.sign(jt[slipping])).max()) / sl)
    return v


def solve_given_friction(problem: GivenFrictionProblem, G=None,
                         active0=None) -> ContactSolution:
    """Solve the given-friction problem exactly (to linear-solver precision).

    A primal-dual active-set loop is tried first; if its sets cycle (common
    with many slip nodes), the convex program is solved through its dual
    box-constrained QP on the crack Schur complement, then polished by an
    exact active-set solve.
    """
    setup = problem.setup
    lay = setup.g_layout
    ntd = lay.n_trace_dofs
    if G is None:
        G = np.zeros(ntd)
    G = np.asarray(G, dtype=float)
    if np.any(G < -1e-12 * max(1.0, np.abs(G).max())):
        raise ValueError("friction bound G must be non-negative")
    G = np.maximum(G, 0.0)
    w = lay.weights()
    d = _reduce(problem, G)
    uf, ln, lt, history = solve_vi(d, max_iter=problem.max_iter,
                                   cache_host=problem, active0=active0)
    u = np.zeros(problem.K.shape[0])
    u[d.free] = uf
    sn = normal_stress_trace(u, problem.tensor, lay, problem.epsilon,
                             side="plus")
    return ContactSolution(u=u, lam_nu=ln, lam_tau=lt, sigma_nu=sn,
                           energy=_energy(problem, u, G, w),
                           iterations=history, converged=True, G=G)


def solve_vi(d: _Reduced, max_iter: int = 60, cache_host=None,
             active0=None):
    """Solve min 1/2 u'Ku - f'u + sum gact|jt| s.t. jn <= 0 on the reduced
    system; K may be an indefinite saddle matrix as long as it is regular
    and its inverse is positive definite on the jump rows.

    Returns (uf, lam_nu, lam_tau, history).
    """
    ntd = d.ntd
    # --- phase 1: primal-dual active set -------------------------------
    dK = np.asarray(d.Kf.diagonal())
    cpen = max(np.median(np.abs(dK)), 1e-30)
    if active0 is not None:
        act, stick, sgn = (a.copy() for a in active0)
    else:
        act = d.live.copy()
        stick = d.live & (d.gact > 0)
        sgn = np.zeros(ntd)
    history = []
    seen = set()
    for it in range(30):
        key = (act.tobytes(), stick.tobytes(), sgn.tobytes())
        if key in seen:
            break                       # cycling: hand over to the dual QP
        seen.add(key)
        uf, ln, lt = _saddle_solve(d, act, stick, sgn)
        jn = d.Jnf @ uf
        jt = d.Jtf @ uf
        new_act = d.live & ((ln + cpen * jn) > 0)
        trial = lt + cpen * jt
        new_stick = d.live & (d.gact > 0) & \
            (np.abs(trial) <= d.gact * (1 + 1e-12))
        new_sgn = np.sign(trial)
        new_sgn[new_stick] = 0.0
        history.append({"phase": "pdas", "iter": it,
                        "n_active": int(act.sum()),
                        "n_stick": int(stick.sum())})
        same = (np.array_equal(new_act, act)
                and np.array_equal(new_stick, stick)
                and np.array_equal(new_sgn[~new_stick & d.live],
                                   sgn[~new_stick & d.live]))
        if same and _set_violation(d, uf, ln, lt, act, stick) < 1e-9:
            return uf, ln, lt, history
        act, stick, sgn = new_act, new_stick, new_sgn

    # --- phase 2: dual box QP on the crack Schur complement ------------
    # min 1/2 L^T S L - b^T L over L = (lam_nu, lam_tau), lam_nu >= 0,
    # |lam_tau| <= gact; S = J K^-1 J^T is friction-independent, so it is
    # cached on the host and reused across Coulomb iterations.
    lu, idx_n, idx_t, S, b = _dual_system(d, cache_host)
    mn = len(idx_n)
    lo = np.concatenate([np.zeros(mn), -d.gact[idx_t]])
    hi = np.concatenate([np.full(mn, np.inf), d.gact[idx_t]])
    x0 = np.concatenate([ln[idx_n], lt[idx_t]])
    lam, n_qp = _box_qp(S, b, lo, hi, x0, max_iter=max_iter * 100)
    ln = np.zeros(ntd)
    lt = np.zeros(ntd)
    ln[idx_n] = lam[:mn]
    lt[idx_t] = lam[mn:]
    history.append({"phase": "dual-qp", "iter": n_qp,
                    "n_active": int((ln > 0).sum()),
                    "n_stick": int((np.abs(lt[idx_t])
                                    < d.gact[idx_t]).sum())})

    # polish: exact saddle solve on the sets the dual solution identifies
    sl = max(float(np.abs(lam).max(initial=0.0)),
             float(d.gact.max(initial=0.0)), 1e-30)
    act = ln > 1e-12 * sl
    stick = d.live & (d.gact > 0) & (np.abs(lt) < d.gact - 1e-12 * sl)
    sgn = np.sign(lt)
    sgn[stick] = 0.0
    puf, pln, plt = _saddle_solve(d, act, stick, sgn)
    viol = _set_violation(d, puf, pln, plt, act, stick)
    history.append({"phase": "polish", "iter": 0, "n_active": int(act.sum()),
                    "n_stick": int(stick.sum()), "polish_violation": viol})
    if viol < 1e-9:
        return puf, pln, plt, history
    # fall back to the raw dual solution (optimal up to QP tolerance)
    sel = sp.vstack([d.Jnf[idx_n], d.Jtf[idx_t]]).tocsr()
    uf = lu.solve(d.ff - sel.T @ lam)
    return uf, ln, lt, history


def _dual_system(d: _Reduced, cache_host=None):
    """Factor K and form the dense crack Schur complement (cached).

    The Schur matrix depends only on K and the jump rows, not on the
    friction bound, so it is stored on ``cache_host`` when given.
    """
    if cache_host is not None:
        cache = getattr(cache_host, "_dual_cache", None)
        if cache is not None:
            return cache
    idx_n = np.where(d.live)[0]
    idx_t = np.where(d.live)[0]
    sel = sp.vstack([d.Jnf[idx_n], d.Jtf[idx_t]]).tocsr()
    lu = spla.splu(d.Kf)
    X = lu.solve(np.asarray(sel.todense()).T)      # K^-1 J^T, (nfree, m)
    S = np.asarray(sel @ X)
    S = 0.5 * (S + S.T)
    b = sel @ lu.solve(d.ff)
    cache = (lu, idx_n, idx_t, S, b)
    if cache_host is not None:
        cache_host._dual_cache = cache
    return cache


def _box_qp(S, b, lo, hi, x0, max_iter=5000, tol_rel=1e-13):
    """Primal active-set solve of min 1/2 x'Sx - b'x, lo <= x <= hi.

    S must be positive definite.  Exact subspace solves with single-
    constraint release give finite convergence; returns (x, n_iter).
    """
    m = len(b)
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    scale = max(np.abs(b).max(initial=0.0), np.abs(S).max(), 1e-30)
    tol = tol_rel * scale
    fixed = (hi - lo) <= 0            # degenerate bounds: frozen forever
    at_lo = (x <= lo + tol) & ~fixed
    at_hi = (x >= hi - tol) & ~fixed
    for it in range(1, max_iter + 1):
        free = ~(at_lo | at_hi | fixed)
        g = S @ x - b
        if not free.any():
            cand = x
        else:
            F = np.where(free)[0]
            xs = x.copy()
            rhs = b[F] - S[np.ix_(F, ~free)] @ x[~free] \
                if (~free).any() else b[F]
            xs[F] = np.linalg.solve(S[np.ix_(F, F)], rhs)
            cand = xs
        dx = cand - x
        if np.abs(dx).max(initial=0.0) <= 1e-15 * max(
                np.abs(x).max(initial=0.0), 1.0):
            # subspace optimal; check multiplier signs at the bounds
            g = S @ x - b
            viol_lo = np.where(at_lo & (g < -tol))[0]
            viol_hi = np.where(at_hi & (g > tol))[0]
            if len(viol_lo) == 0 and len(viol_hi) == 0:
                return x, it
            worst = None
            if len(viol_lo):
                worst = viol_lo[np.argmin(g[viol_lo])]
            if len(viol_hi):
                j = viol_hi[np.argmax(g[viol_hi])]
                if worst is None or g[j] > -g[worst]:
                    worst = j
            at_lo[worst] = False
            at_hi[worst] = False
            continue
        # longest feasible step toward the subspace minimizer
        alpha = 1.0
        block = -1
        idx = np.where(np.abs(dx) > 0)[0]
        for i in idx:
            if dx[i] > 0 and np.isfinite(hi[i]):
                a = (hi[i] - x[i]) / dx[i]
            elif dx[i] < 0:
                a = (lo[i] - x[i]) / dx[i]
            else:
                continue
            if a < alpha:
                alpha = a
                block = i
        x = x + alpha * dx
        x = np.clip(x, lo, hi)
        if block >= 0:
            if dx[block] > 0:
                at_hi[block] = True
            else:
                at_lo[block] = True
        else:
            at_lo = (x <= lo + tol) & ~fixed
            at_hi = (x >= hi - tol) & ~fixed
    raise SolverError(f"box QP did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# KKT verification
# ---------------------------------------------------------------------------

def verify_kkt(problem: GivenFrictionProblem, solution: ContactSolution,
               n_random: int = 50, seed: int = 0) -> dict:
    """Max residuals of the strong-form optimality system, after load
    normalization.
    """
    setup = problem.setup
    lay = setup.g_layout
    w = lay.weights()
    scale = max(float(np.linalg.norm(problem.load)), 1e-30)
    u, ln, lt = solution.u, solution.lam_nu, solution.lam_tau
    jn = problem.jump.normal @ u
    jt = problem.jump.tangential @ u
    gact = w * solution.G

    free = ~setup.gamma_dofs
    res_vec = (problem.K @ u - problem.load
               + problem.jump.normal.T @ ln + problem.jump.tangential.T @ lt)
    rng = np.random.default_rng(seed)
    eq = 0.0
    for _ in range(n_random):
        v = rng.standard_normal(len(u))
        v[~free] = 0.0
        # jump-free test field: symmetrize across the crack copies
        v = _remove_jumps(setup, v)
        r = float((problem.K @ u - problem.load) @ v) / \
            max(np.linalg.norm(v), 1e-30)
        eq = max(eq, abs(r))
    report = {
        "stationarity": float(np.abs(res_vec[free]).max()) / scale,
        "equilibrium_jump_free": eq / scale,
        "penetration": float(max(jn.max(), 0.0)) / scale,
        "lam_nu_sign": float(max(-ln.min(), 0.0)) / scale,
        "complementarity": float(np.abs(ln * jn).max()) / scale ** 2,
        "friction_bound": float(max((np.abs(lt) - gact).max(), 0.0)) / scale,
        "slip_alignment": _slip_alignment(lt, jt, gact) / scale,
    }
    report["max"] = max(v for k, v in report.items())
    return report


def _slip_alignment(lt, jt, gact) -> float:
    # where sliding ([u_tau] != 0): lam_tau = gact * sign(jt)
    m = np.abs(jt) > 1e-9 * max(np.abs(jt).max(), 1e-30)
    if not m.any():
        return 0.0
    return float(np.abs(lt[m] - gact[m] * np.sign(jt[m])).max())


def _remove_jumps(setup: TiledSetup, v: np.ndarray) -> np.ndarray:
    """Average the +/- crack copies so the field is single-valued."""
    lay = setup.g_layout
    out = v.copy().reshape(-1, 2)
    mean = 0.5 * (out[lay.td_plus] + out[lay.td_minus])
    out[lay.td_plus] = mean
    out[lay.td_minus] = mean
    return out.reshape(-1)


# ---------------------------------------------------------------------------
# Coulomb fixed point
# ---------------------------------------------------------------------------

@dataclass
class CoulombResult:
    solution: ContactSolution
    G: np.ndarray
    changes: list
    rho_hat: float
    converged: bool
    n_iter: int
    contraction_report: dict = field(default_factory=dict)


def coulomb_iterate(problem: GivenFrictionProblem, mu: FrictionCoefficient,
                    tol: float = 1e-6, max_iter: int = 40) -> CoulombResult:
    """Banach iteration G_{k+1} = mu |sigma_nu(u_G_k)|, G_0 = 0."""
    setup = problem.setup
    lay = setup.g_layout
    Ms = crack_l2_mass(lay)
    mu_vals = mu(lay.td_xy, setup.mesh.domain)

    def l2(v):
        return float(np.sqrt(max(v @ (Ms @ v), 0.0)))

    G = np.zeros(lay.n_trace_dofs)
    sol = None
    changes = []
    norm_G1 = None
    diverging = 0
    for k in range(max_iter):
        sol = solve_given_friction(problem, G)
        Gn = mu_vals * np.abs(sol.sigma_nu)
        ch = l2(Gn - G)
        changes.append(ch)
        if k == 0:
            norm_G1 = max(l2(Gn), 1e-30)
            if mu.linf == 0.0:
                return CoulombResult(solution=sol, G=G, changes=changes,
                                     rho_hat=0.0, converged=True, n_iter=1)
        if k >= 1 and changes[-2] > 0:
            if ch / changes[-2] >= 1.0:
                diverging += 1
            else:
                diverging = 0
            if diverging >= 3:
                rep = contraction_context(problem, mu)
                raise SolverError(
                    "Coulomb iteration diverging (rho >= 1 for 3 steps); "
                    f"contraction context: {rep}")
        G = Gn
        if ch <= tol * norm_G1:
            sol = solve_given_friction(problem, G)
            break
    else:
        raise SolverError(f"Coulomb fixed point not converged in {max_iter} "
                          "iterations")
    ratios = [changes[i + 1] / changes[i]
              for i in range(1, len(changes) - 1) if changes[i] > 1e-14]
    rho = max(ratios) if ratios else 0.0
    return CoulombResult(solution=sol, G=G, changes=changes, rho_hat=rho,
                         converged=True, n_iter=len(changes),
                         contraction_report=contraction_context(problem, mu))


def contraction_context(problem: GivenFrictionProblem,
                        mu: FrictionCoefficient) -> dict:
    t = problem.tensor
    denom = min(t.alpha_bar, problem.kappa) if problem.kappa > 0 \
        else t.alpha_bar
    return {"w1inf_a": t.w1inf_S, "mu_linf": mu.linf,
            "min_alpha_kappa": denom,
            "radius_scale": (1.0 + 1.0 / np.sqrt(problem.kappa))
            if problem.kappa > 0 else np.inf}


# ---------------------------------------------------------------------------
# probes and estimate suites
# ---------------------------------------------------------------------------

def n_eps_norm(problem: GivenFrictionProblem, v) -> float:
    from .assembly import strain_form
    E = strain_form(problem.setup.gspace)
    q = float(v @ (E @ v))
    if problem.B is not None:
        q += problem.epsilon ** 2 * float(v @ (problem.B @ v))
    return float(np.sqrt(max(q, 0.0)))


def lipschitz_probe(problem: GivenFrictionProblem, G1, G2,
                    ref_norms: CrackNorms) -> dict:
    """Continuity of sigma_nu (and of u in N_eps) w.r.t. the friction bound."""
    G1 = np.asarray(G1, dtype=float)
    G2 = np.asarray(G2, dtype=float)
    if np.allclose(G1, G2):
        raise ValueError("G1 and G2 coincide")
    lay = problem.setup.g_layout
    Ms = crack_l2_mass(lay)
    dG = G2 - G1
    denom = float(np.sqrt(dG @ (Ms @ dG)))
    s1 = solve_given_friction(problem, G1)
    s2 = solve_given_friction(problem, G2)
    tm = problem.setup.tmaps
    dsn = (s1.sigma_nu - s2.sigma_nu)[tm]
    num = scaled_crack_norm(dsn, ref_norms.alpha, problem.epsilon, ref_norms)
    du = s1.u - s2.u
    nd = n_eps_norm(problem, du)
    return {"sigma_ratio": num / denom,
            "n_ratio": nd / (np.sqrt(problem.epsilon) * denom),
            "dG_l2": denom}


def a_priori_check(problem: GivenFrictionProblem, solution: ContactSolution,
                   ref_half: CrackNorms) -> dict:
    """The four a-priori ratios of the estimate suite (H^{1/2} crack norms)."""
    from .spaces import h1_norm
    setup = problem.setup
    gs = setup.gspace
    eps = problem.epsilon
    fn = float(np.sqrt(max(_load_l2(problem), 0.0)))
    if fn == 0.0:
        return {"applicable": False}
    u = solution.u
    tm = setup.tmaps
    r1 = np.nan
    if problem.B is not None and problem.kappa > 0:
        gb = float(np.sqrt(max(u @ (problem.B @ u), 0.0)))
        r1 = np.sqrt(problem.kappa) * eps * gb / fn
    r2 = h1_norm(gs, u) / fn
    ju = (problem.jump.full @ u).reshape(-1, 2)
    jcell = ju[tm]                       # (nc, ntd_ref, 2)
    jn = np.sqrt(sum(scaled_crack_norm(jcell[..., c], 0.5, eps, ref_half) ** 2
                     for c in range(2)))
    r3 = jn / (np.sqrt(eps) * fn)
    sn = solution.sigma_nu[tm]
    r4 = np.sqrt(eps) * scaled_crack_norm(sn, 0.5, eps, ref_half) / fn
    return {"applicable": True, "grad_e": r1, "h1": r2, "jump": r3,
            "sigma_nu": r4}


def _load_l2(problem) -> float:
    from .assembly import vector_mass
    gs = problem.setup.gspace
    M = vector_mass(gs)
    # Riesz-lift the load to measure ||f||_{L2}: the load presets are
    # interpolated exactly by P2, so use the consistent mass inverse
    f = spla.spsolve(M.tocsc(), problem.load)
    return float(f @ (M @ f))


def kappa_limit_study(setup: TiledSetup, tensor: ElasticityTensor, f,
                      G, kappa_list, eta: float = 10.0) -> dict:
    """Distance of regularized solutions to the kappa=0 solution."""
    from .spaces import h1_norm
    base = build_problem(setup, tensor, f, kappa=0.0, eta=eta)
    u0 = solve_given_friction(base, G)
    diffs = []
    for kap in kappa_list:
        pb = build_problem(setup, tensor, f, kappa=kap, eta=eta)
        sk = solve_given_friction(pb, G)
        diffs.append(h1_norm(setup.gspace, sk.u - u0.u))
    return {"kappa": list(kappa_list), "diff_h1": diffs,
            "u0_h1": h1_norm(setup.gspace, u0.u)}


# ---------------------------------------------------------------------------
# load presets
# ---------------------------------------------------------------------------

def load_preset(name: str, magnitude: float = 1.0):
    """Volume force presets; 'compression' pushes toward the Dirichlet side
    so the cracks close (full-contact linear oracle regime).
    """
    if name == "compression":
        def f(x):
            out = np.zeros_like(x)
            out[:, 1] = -magnitude
            return out
        return f
    if name == "shear":
        def f(x):
            out = np.zeros_like(x)
            out[:, 0] = magnitude * (x[:, 1] - 0.5)
            out[:, 1] = -0.3 * magnitude
            return out
        return f
    if name == "smooth":
        def f(x):
            return magnitude * np.stack(
                [np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]),
                 -np.cos(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]) - 0.5],
                axis=1)
        return f
    raise ValueError(f"unknown load preset {name!r}")
