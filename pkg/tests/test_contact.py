import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import crackhom.contact as ct
from conftest import setup_for


@pytest.fixture(scope="module")
def setup(cell25):
    return setup_for(cell25, 0.5, "h25")


@pytest.fixture(scope="module")
def problem(setup, tensor):
    return ct.build_problem(setup, tensor, ct.load_preset("shear"),
                            kappa=0.1)


@pytest.fixture(scope="module")
def solution(problem, setup):
    G = 0.02 * np.ones(setup.g_layout.n_trace_dofs)
    return ct.solve_given_friction(problem, G)


def test_kkt_certificate(problem, solution):
    rep = ct.verify_kkt(problem, solution)
    assert rep["max"] <= 1e-8, rep


def test_energy_below_unconstrained(problem, solution):
    assert solution.converged
    # constrained minimum cannot beat the unconstrained one
    free = ~problem.setup.gamma_dofs
    K = problem.K[np.ix_(free, free)].tocsc()
    uf = spla.spsolve(K, problem.load[free])
    e_unc = 0.5 * uf @ (K @ uf) - problem.load[free] @ uf
    assert solution.energy >= e_unc - 1e-12


def test_deterministic_resolve(problem, setup):
    G = 0.02 * np.ones(setup.g_layout.n_trace_dofs)
    a = ct.solve_given_friction(problem, G)
    b = ct.solve_given_friction(problem, G)
    ref = np.abs(a.u).max()
    assert np.abs(a.u - b.u).max() <= 1e-12 * ref
    assert np.abs(a.lam_nu - b.lam_nu).max() <= 1e-10 * ref


def test_scaling_homogeneity(setup, tensor):
    """Doubling f and G doubles the given-friction solution."""
    f1 = ct.load_preset("shear", 1.0)
    f2 = ct.load_preset("shear", 2.0)
    ntd = setup.g_layout.n_trace_dofs
    p1 = ct.build_problem(setup, tensor, f1, kappa=0.1)
    p2 = ct.build_problem(setup, tensor, f2, kappa=0.1)
    s1 = ct.solve_given_friction(p1, 0.02 * np.ones(ntd))
    s2 = ct.solve_given_friction(p2, 0.04 * np.ones(ntd))
    assert np.abs(s2.u - 2 * s1.u).max() <= 1e-8 * np.abs(s1.u).max()


def test_full_stick_oracle(setup, tensor):
    """With a huge friction bound the tangential jump is forced to zero;
    when no normal contact is active, the solution solves the linear
    problem with tangential-stick equality constraints."""
    f = ct.load_preset("compression")
    pb = ct.build_problem(setup, tensor, f, kappa=0.1)
    lay = setup.g_layout
    sol = ct.solve_given_friction(pb, 1e3 * np.ones(lay.n_trace_dofs))
    assert np.abs(pb.jump.tangential @ sol.u).max() <= 1e-10
    assert np.abs(sol.lam_nu).max() == 0.0     # no normal contact here
    free = ~setup.gamma_dofs
    K = pb.K[np.ix_(free, free)].tocsc()
    live = lay.td_plus != lay.td_minus
    Jt = pb.jump.tangential[live][:, free]
    m = Jt.shape[0]
    S = sp.bmat([[K, Jt.T], [Jt, None]], format="csc")
    rhs = np.concatenate([pb.load[free], np.zeros(m)])
    x = spla.spsolve(S, rhs)
    u = np.zeros(setup.gspace.n_vector_dofs)
    u[free] = x[:int(free.sum())]
    ref = np.abs(u).max()
    assert np.abs(sol.u - u).max() <= 1e-8 * ref


def test_signorini_open_oracle(setup, tensor):
    """Manufactured load K u* with a strictly open crack: the G=0 Signorini
    solve must reproduce the unconstrained linear solution u* exactly."""
    free = ~setup.gamma_dofs
    lay = setup.g_layout
    gs = setup.gspace
    pb = ct.build_problem(setup, tensor, ct.load_preset("shear"), kappa=0.1)
    # smooth single-valued part vanishing on the Dirichlet face
    base = gs.interpolate_vector(
        lambda x: 0.1 * np.stack([x[:, 1] * (1 - x[:, 0]),
                                  x[:, 1] * x[:, 0]], axis=1))
    ustar = base.reshape(-1, 2).copy()
    # open the crack: push the sides apart so [u*_nu] = -delta < 0
    live = lay.td_plus != lay.td_minus
    delta = 0.01
    ustar[lay.td_plus[live]] -= 0.5 * delta * lay.td_normal[live]
    ustar[lay.td_minus[live]] += 0.5 * delta * lay.td_normal[live]
    ustar = ustar.ravel()
    assert (pb.jump.normal @ ustar)[live].max() < -delta / 2
    pb.load = np.asarray(pb.K @ ustar)
    pb.load[~free] = 0.0
    sol = ct.solve_given_friction(pb, np.zeros(lay.n_trace_dofs))
    ref = np.abs(ustar).max()
    assert np.abs(sol.u - ustar).max() <= 1e-8 * ref
    assert np.abs(sol.lam_nu).max() <= 1e-8
    assert np.abs(sol.lam_tau).max() <= 1e-8


def test_coulomb_fixed_point(setup, tensor):
    pb = ct.build_problem(setup, tensor, ct.load_preset("shear"), kappa=0.1)
    mu = ct.FrictionCoefficient(value=0.3, support_scale=0.6)
    res = ct.coulomb_iterate(pb, mu, tol=1e-8)
    assert res.converged
    # geometric decrease of the friction-bound updates
    ch = res.changes
    assert all(ch[i + 1] < ch[i] for i in range(len(ch) - 1))
    assert res.rho_hat < 1.0
    rep = ct.verify_kkt(pb, res.solution)
    assert rep["max"] <= 1e-8


def test_friction_coefficient_support(setup):
    mu = ct.FrictionCoefficient(value=0.3, support_scale=0.6)
    x = np.array([[0.5, 0.5], [0.01, 0.01], [0.99, 0.5]])
    vals = mu(x, setup.mesh.domain)
    assert vals[0] == pytest.approx(0.3)
    assert vals[1] == 0.0 and vals[2] == 0.0
    assert mu.linf == pytest.approx(0.3)


def test_load_presets_reject_unknown():
    with pytest.raises(ValueError):
        ct.load_preset("vortex")
