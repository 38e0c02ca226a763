"""Acceptance gate: ten primary criteria, one pass/fail line each.

Shared expensive solves are session-cached; every criterion prints
``[PASS]``/``[FAIL] criterion-k`` with its measured numbers before
asserting, so the run log doubles as the acceptance report.
"""

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import crackhom.contact as ct
import crackhom.twoscale as ts
import crackhom.unfolding as uf
from crackhom.assembly import (assemble_regularization, build_crack_layout,
                               crack_l2_mass, scalar_mass, strain_form,
                               vector_mass)
from crackhom.spaces import (CrackNorms, h1_norm, layout_endpoints,
                             scaled_crack_norm, slobodetsky_gram, strain_norm)
from conftest import setup_for


def _report(k, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion-{k}: {detail}")


def _load_l2(setup, f):
    x, w = setup.gspace.quad_points()
    v = f(x.reshape(-1, 2)).reshape(x.shape)
    return float(np.sqrt(np.einsum("tq,tqd->", w, v ** 2)))


# ---------------------------------------------------------------------------
# shared solves
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def gf30(cell30, tensor):
    """Given-friction solutions, fixed per-cell resolution, three eps."""
    out = {}
    f = ct.load_preset("shear")
    for eps in (0.5, 0.25, 0.125):
        setup = setup_for(cell30, eps, "h30")
        pb = ct.build_problem(setup, tensor, f, kappa=0.1)
        G = 0.02 * np.ones(setup.g_layout.n_trace_dofs)
        out[eps] = (setup, pb, ct.solve_given_friction(pb, G))
    return out


@pytest.fixture(scope="session")
def coulomb25(cell25, tensor):
    """Coulomb fixed-point solutions at two eps levels."""
    out = {}
    f = ct.load_preset("shear")
    mu = ct.FrictionCoefficient(value=0.3, support_scale=0.6)
    for eps in (0.5, 0.25):
        setup = setup_for(cell25, eps, "h25")
        pb = ct.build_problem(setup, tensor, f, kappa=0.1)
        out[eps] = (setup, pb, ct.coulomb_iterate(pb, mu, tol=1e-8))
    return out


@pytest.fixture(scope="session")
def ref_half30(cell30):
    setup = setup_for(cell30, 0.5, "h30")
    return CrackNorms.build(setup.ref_layout, 0.5)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_criterion_1_unfolding_identities(cell25, rng):
    """Exact unfolding identities, rel err <= 1e-12, 20 random fields."""
    tol = 1e-12
    worst = 0.0
    for eps in (0.5, 0.25, 0.125):
        setup = setup_for(cell25, eps, "h25")
        Mref = scalar_mass(setup.ref_space).toarray()
        Mg = vector_mass(setup.gspace)
        nt = setup.ref_space.tris.shape[0]
        for _ in range(20):
            v = rng.standard_normal(setup.gspace.n_vector_dofs)
            ufd = uf.unfold_domain(v, setup.gspace, setup.mesh,
                                   setup.ref_space, setup.node_maps,
                                   vector=True)
            # L2 preservation
            lhs = uf.unfolded_l2_norm(ufd, Mref)
            rhs = float(np.sqrt(v @ (Mg @ v)))
            worst = max(worst, abs(lhs - rhs) / rhs)
            # gradient identity on a sample cell
            c = int(rng.integers(setup.mesh.n_cells))
            gy = setup.ref_space.eval_vector_grad(ufd.values[c])
            gx = setup.gspace.eval_vector_grad(
                v, np.arange(c * nt, (c + 1) * nt))
            worst = max(worst, np.abs(gy - eps * gx).max()
                        / np.abs(gy).max())
            # boundary identities
            g = rng.standard_normal(setup.g_layout.n_trace_dofs)
            buf = uf.unfold_boundary(g, setup.g_layout, setup.ref_layout,
                                     setup.mesh, setup.tmaps)
            bi = uf.boundary_integral(buf)
            ci = eps * uf.crack_integral(g, setup.g_layout)
            worst = max(worst, abs(bi - ci)
                        / max(abs(ci), uf.crack_lp_norm(
                            g, setup.g_layout, 1.0) * eps))
            for p in (1.0, 2.0):
                lhs = uf.boundary_lp_norm(buf, p)
                rhs = eps ** (1.0 / p) * uf.crack_lp_norm(
                    g, setup.g_layout, p)
                worst = max(worst, abs(lhs - rhs) / rhs)
            back = uf.average_boundary(buf, setup.tmaps,
                                       setup.g_layout.n_trace_dofs)
            worst = max(worst, np.abs(back - g).max() / np.abs(g).max())
    ok = worst <= tol
    _report(1, ok, f"max relative identity error {worst:.3e} (tol 1e-12)")
    assert ok


def test_criterion_2_fractional_scaling(cell25, rng):
    """Seminorm factor eps^(1/2+alpha) and dual factor eps^(1/2), both
    sides computed by independent quadratures, rel err <= 1e-8."""
    from dataclasses import replace
    tol = 1e-8
    setup = setup_for(cell25, 0.5, "h25")
    lay = setup.ref_layout
    ep_ref = layout_endpoints(lay)
    mass_ref = np.asarray(crack_l2_mass(lay).todense())
    worst = 0.0
    for alpha in (0.25, 0.5, 0.75):
        semi_ref = slobodetsky_gram(ep_ref, lay.facet_tds, lay.n_trace_dofs,
                                    alpha)
        norms = CrackNorms(lay, alpha, mass_ref, semi_ref,
                           mass_ref + semi_ref,
                           sla.cho_factor(mass_ref + semi_ref))
        for eps in (0.5, 0.25):
            nc = int(round(1.0 / eps ** 2))
            semi_eps = slobodetsky_gram(eps * ep_ref, lay.facet_tds,
                                        lay.n_trace_dofs, alpha)
            mass_eps = np.asarray(crack_l2_mass(
                replace(lay, lengths=eps * lay.lengths)).todense())
            g = rng.standard_normal((nc, lay.n_trace_dofs))
            # seminorm: ||T(g)||'_{L2(Omega;H^a(S))} = eps^{1/2+a} |g|_{S_eps}
            lhs = np.sqrt(eps ** 2 * np.einsum("ci,ij,cj->", g, semi_ref, g))
            semi_s_eps = np.sqrt(np.einsum("ci,ij,cj->", g, semi_eps, g))
            rel = abs(lhs - eps ** (0.5 + alpha) * semi_s_eps) / lhs
            worst = max(worst, rel)
            # dual: ||T^b(g)|| = eps^{1/2} ||g||_{H^{-a}(S_eps)} with the
            # eps^{2a}-weighted Gram assembled on the scaled geometry
            W_eps = mass_eps + eps ** (2 * alpha) * semi_eps
            X = sla.solve(W_eps, g.T, assume_a="pos").T
            dual_eps = np.sqrt(np.einsum("ci,ci->", g, X))
            lhs = uf.unfolded_dual_norm(g, eps, norms)
            rel = abs(lhs - eps ** 0.5 * dual_eps) / lhs
            worst = max(worst, rel)
    ok = worst <= tol
    _report(2, ok, f"max relative scaling error {worst:.3e} (tol 1e-8)")
    assert ok


def test_criterion_3_korn_jump_uniformity(gf30, ref_half30):
    """H1/strain and scaled-jump/strain ratios vary < x2 across eps."""
    r1, r2 = {}, {}
    for eps, (setup, pb, sol) in gf30.items():
        en = strain_norm(setup.gspace, sol.u)
        r1[eps] = h1_norm(setup.gspace, sol.u) / en
        jumps = np.asarray((pb.jump.full @ sol.u)).reshape(-1, 2)
        per_cell = jumps[setup.tmaps]                  # (nc, ntd_ref, 2)
        jn = np.sqrt(sum(scaled_crack_norm(per_cell[:, :, c], 0.5, eps,
                                           ref_half30) ** 2
                         for c in range(2)))
        r2[eps] = jn / (np.sqrt(eps) * en)
    s1 = max(r1.values()) / min(r1.values())
    s2 = max(r2.values()) / min(r2.values())
    ok = s1 < 2.0 and s2 < 2.0
    _report(3, ok, "H1/strain spread x%.3f, jump/strain spread x%.3f "
            "(both < 2 required); ratios %s | %s"
            % (s1, s2, {e: round(v, 3) for e, v in r1.items()},
               {e: round(v, 3) for e, v in r2.items()}))
    assert ok


def test_criterion_4_kkt_and_linear_oracles(gf30, cell25, tensor):
    """KKT residuals <= 1e-8 (load-normalized) and the stick/Signorini
    linear oracles match within 1e-8."""
    kkt_max = 0.0
    for eps, (setup, pb, sol) in gf30.items():
        kkt_max = max(kkt_max, ct.verify_kkt(pb, sol)["max"])

    setup = setup_for(cell25, 0.5, "h25")
    free = ~setup.gamma_dofs
    lay = setup.g_layout
    live = lay.td_plus != lay.td_minus

    # tangential-stick linear oracle (huge friction bound, no contact)
    pb = ct.build_problem(setup, tensor, ct.load_preset("compression"),
                          kappa=0.1)
    sol = ct.solve_given_friction(pb, 1e3 * np.ones(lay.n_trace_dofs))
    K = pb.K[np.ix_(free, free)].tocsc()
    Jt = pb.jump.tangential[live][:, free]
    S = sp.bmat([[K, Jt.T], [Jt, None]], format="csc")
    x = spla.spsolve(S, np.concatenate([pb.load[free],
                                        np.zeros(Jt.shape[0])]))
    u_stick = np.zeros(setup.gspace.n_vector_dofs)
    u_stick[free] = x[:int(free.sum())]
    err_stick = np.abs(sol.u - u_stick).max() / np.abs(u_stick).max()

    # Signorini open-crack linear oracle (manufactured strictly open state)
    pb2 = ct.build_problem(setup, tensor, ct.load_preset("shear"), kappa=0.1)
    base = setup.gspace.interpolate_vector(
        lambda x: 0.1 * np.stack([x[:, 1] * (1 - x[:, 0]),
                                  x[:, 1] * x[:, 0]], axis=1))
    ustar = base.reshape(-1, 2).copy()
    ustar[lay.td_plus[live]] -= 0.005 * lay.td_normal[live]
    ustar[lay.td_minus[live]] += 0.005 * lay.td_normal[live]
    ustar = ustar.ravel()
    pb2.load = np.asarray(pb2.K @ ustar)
    pb2.load[~free] = 0.0
    sol2 = ct.solve_given_friction(pb2, np.zeros(lay.n_trace_dofs))
    err_open = np.abs(sol2.u - ustar).max() / np.abs(ustar).max()

    ok = kkt_max <= 1e-8 and err_stick <= 1e-8 and err_open <= 1e-8
    _report(4, ok, f"KKT max {kkt_max:.3e}, stick oracle {err_stick:.3e}, "
            f"Signorini oracle {err_open:.3e} (all <= 1e-8)")
    assert ok


def test_criterion_5_friction_continuity(cell25, tensor, coulomb25, rng):
    """Lipschitz-probe ratios eps-independent (< x2) and the observed
    contraction factor within the probe-based bound."""
    probes = {}
    for eps in (0.5, 0.25):
        setup = setup_for(cell25, eps, "h25")
        pb = ct.build_problem(setup, tensor, ct.load_preset("shear"),
                              kappa=0.1)
        ntd = setup.g_layout.n_trace_dofs
        ref = CrackNorms.build(setup.ref_layout, 0.5)
        G1 = 0.02 * np.ones(ntd)
        G2 = G1 + 0.005 * (1 + np.sin(3 * np.arange(ntd)))
        probes[eps] = ct.lipschitz_probe(pb, G1, G2, ref)
    spread_s = max(p["sigma_ratio"] for p in probes.values()) / \
        min(p["sigma_ratio"] for p in probes.values())
    spread_n = max(p["n_ratio"] for p in probes.values()) / \
        min(p["n_ratio"] for p in probes.values())
    ok = spread_s < 2.0 and spread_n < 2.0

    rho_ok = True
    rho_info = []
    for eps, (setup, pb, res) in coulomb25.items():
        lip = probes[eps]["sigma_ratio"]
        prod = lip * 0.3
        if prod < 0.9:
            bound = prod + 0.1
            rho_ok &= res.rho_hat <= bound
            rho_info.append(f"eps={eps}: rho {res.rho_hat:.3f} <= "
                            f"{bound:.3f}")
    ok = ok and rho_ok
    _report(5, ok, f"sigma-probe spread x{spread_s:.3f}, N-probe spread "
            f"x{spread_n:.3f} (< 2); {'; '.join(rho_info)}")
    assert ok


def test_criterion_6_a_priori_ratios(gf30, ref_half30, cell30, tensor):
    """Four a-priori ratios bounded (< x2 spread across eps) and the
    normal-stress ratio within the 1+1/sqrt(kappa) envelope."""
    table = {}
    for eps, (setup, pb, sol) in gf30.items():
        table[eps] = ct.a_priori_check(pb, sol, ref_half30)
    keys = ("grad_e", "h1", "jump", "sigma_nu")
    spreads = {k: max(t[k] for t in table.values())
               / min(t[k] for t in table.values()) for k in keys}
    ok = all(v < 2.0 for v in spreads.values())

    setup = setup_for(cell30, 0.25, "h30")
    G = 0.02 * np.ones(setup.g_layout.n_trace_dofs)
    env_coef = {}
    for kap in (1.0, 0.1, 0.01):
        pbk = ct.build_problem(setup, tensor, ct.load_preset("shear"),
                               kappa=kap)
        solk = ct.solve_given_friction(pbk, G)
        r = ct.a_priori_check(pbk, solk, ref_half30)["sigma_nu"]
        env_coef[kap] = r / (1.0 + 1.0 / np.sqrt(kap))
    # "at most like 1+1/sqrt(kappa)": the envelope coefficient must not
    # grow as kappa decreases
    ok_env = all(env_coef[k] <= env_coef[1.0] * 1.1 for k in (0.1, 0.01))
    ok = ok and ok_env
    _report(6, ok, "spreads %s (< 2); envelope coefficients %s "
            "(non-increasing within 10%%)"
            % ({k: round(v, 3) for k, v in spreads.items()},
               {k: round(v, 4) for k, v in env_coef.items()}))
    assert ok


def test_criterion_7_kappa_limit(cell25, tensor):
    """Distance to the unregularized solution strictly decreasing in
    kappa, final <= 10% of initial."""
    setup = setup_for(cell25, 1.0, "h25")
    G = 0.02 * np.ones(setup.g_layout.n_trace_dofs)
    rep = ct.kappa_limit_study(setup, tensor, ct.load_preset("smooth"), G,
                               [1e-1, 1e-2, 1e-3], eta=1.0)
    d = rep["diff_h1"]
    ok = d[0] > d[1] > d[2] and d[2] <= 0.1 * d[0]
    _report(7, ok, "H1 distances %s, final/initial %.3f (<= 0.10)"
            % ([f"{x:.3e}" for x in d], d[2] / d[0]))
    assert ok


def test_criterion_8_two_scale_convergence(cell30, tensor, domain):
    """Unfolded strain error strictly decreasing over three eps;
    manufactured field recovers order eps within a factor 3."""
    rep = ts.convergence_study(domain, ("bottom",), cell30, tensor,
                               ct.load_preset("shear"), (0.5, 0.25, 0.125),
                               G0=0.02, kappa=0.1, macro_n=3,
                               signorini_sigma=True)
    rows = rep["rows"]
    se = [r["strain_error"] for r in rows]
    sg = [r["sigma_error"] for r in rows]
    dec = se[0] > se[1] > se[2]
    dec_sigma = sg[0] > sg[1] > sg[2]

    def Phi(x):
        return 0.05 * np.stack([np.sin(np.pi * x[:, 0]) * x[:, 1],
                                x[:, 1] ** 2], axis=1)

    def dPhi(x):
        single = np.ndim(x) == 1
        x = np.atleast_2d(x)
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 0] = 0.05 * np.pi * np.cos(np.pi * x[:, 0]) * x[:, 1]
        g[:, 0, 1] = 0.05 * np.sin(np.pi * x[:, 0])
        g[:, 1, 1] = 0.1 * x[:, 1]
        e = 0.5 * (g + np.swapaxes(g, 1, 2))
        return e[0] if single else e

    def psi(x):
        return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])

    def w_y(y):
        return 0.1 * np.stack([np.sin(2 * np.pi * y[:, 0]),
                               np.sin(2 * np.pi * y[:, 1])], axis=1)

    errs = [ts.manufactured_error(cell30, domain, ("bottom",), e,
                                  Phi, dPhi, psi, w_y, None)
            for e in (0.5, 0.25, 0.125)]
    orders = [np.log(errs[i] / errs[i + 1]) / np.log(2.0) for i in range(2)]
    ok_orders = all(o > 1.0 / 3.0 for o in orders)
    ok = dec and dec_sigma and ok_orders
    _report(8, ok, "strain errors %s decreasing=%s, sigma errors %s "
            "decreasing=%s, manufactured orders %s (> 1/3)"
            % ([f"{x:.3e}" for x in se], dec, [f"{x:.3e}" for x in sg],
               dec_sigma, [f"{o:.2f}" for o in orders]))
    assert ok


def test_criterion_9_uniqueness_homogeneity(cell25, tensor, coulomb25):
    """Duplicate Coulomb solves agree to 1e-8; f -> 2f doubles the
    solution to 1e-8 relative."""
    setup = setup_for(cell25, 0.25, "h25")
    mu = ct.FrictionCoefficient(value=0.3, support_scale=0.6)
    _, _, res1 = coulomb25[0.25]
    pb_dup = ct.build_problem(setup, tensor, ct.load_preset("shear"),
                              kappa=0.1)
    res_dup = ct.coulomb_iterate(pb_dup, mu, tol=1e-8)
    ref = np.abs(res1.solution.u).max()
    err_dup = np.abs(res_dup.solution.u - res1.solution.u).max() / ref

    pb2 = ct.build_problem(setup, tensor, ct.load_preset("shear", 2.0),
                           kappa=0.1)
    res2 = ct.coulomb_iterate(pb2, mu, tol=1e-8)
    err_hom = np.abs(res2.solution.u - 2 * res1.solution.u).max() / (2 * ref)
    ok = err_dup <= 1e-8 and err_hom <= 1e-8
    _report(9, ok, f"duplicate-solve error {err_dup:.3e}, homogeneity "
            f"error {err_hom:.3e} (both <= 1e-8)")
    assert ok


def test_criterion_10_equicontinuity(coulomb25, cell30):
    """N_eps(Delta_k u)/(eps ||f||) bounded within x2 across eps on the
    interior subdomain."""
    vals = {}
    f = ct.load_preset("shear")
    for eps, (setup, pb, res) in coulomb25.items():
        assert res.converged and res.rho_hat < 1.0
        rs = setup.ref_space
        E_ref = strain_form(rs)
        B_ref = assemble_regularization(rs, eta=10.0)
        ufd = uf.unfold_domain(res.solution.u, setup.gspace, setup.mesh,
                               rs, setup.node_maps, vector=True)
        omega = uf.interior_cells(setup.mesh, margin=1)
        fl2 = _load_l2(setup, f)
        worst = 0.0
        for k in (0, 1):
            _, diffs = uf.shift_difference(ufd, k, cells=omega)
            n = uf.n_eps_cellwise(diffs, E_ref, B_ref, eps)
            worst = max(worst, n / (eps * fl2))
        vals[eps] = worst
    spread = max(vals.values()) / min(vals.values())
    ok = spread < 2.0
    _report(10, ok, "N_eps(shift)/(eps||f||) = %s, spread x%.3f (< 2)"
            % ({e: round(v, 4) for e, v in vals.items()}, spread))
    assert ok
