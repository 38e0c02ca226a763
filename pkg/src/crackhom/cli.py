"""Command-line interface: configuration, run orchestration, reports.

Subcommands: verify-unfolding | korn-report | solve-contact | coulomb |
two-scale | convergence | kappa-study.  Config is TOML; reports are CSV
rows tagged with the config hash; fields go out as legacy VTK.

Exit codes: 0 success, 2 config error, 3 solver non-convergence,
4 identity-check failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # python < 3.11
    import tomli as tomllib

OUT_ROOT_ENV = "CRACKHOM_OUT_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IDENTITY = 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_SCHEMA = {
    "geometry": {"lengths", "origin", "gamma", "crack_kind", "crack_center",
                 "crack_radius", "crack_theta", "crack_y0", "crack_x0",
                 "crack_x1", "dim"},
    "discretization": {"h", "macro_n"},
    "physics": {"tensor", "lam", "mu_lame", "load", "load_magnitude",
                "mu", "mu_support", "kappa"},
    "solver": {"epsilon", "epsilon_list", "kappa_list", "g0", "alpha_list",
               "tol_fixed_point", "max_iter", "n_random", "eta"},
    "outputs": {"write_vtk", "write_matrix", "micro_vtk_limit"},
}

_DEFAULTS = {
    "geometry": {"lengths": [1.0, 1.0], "origin": [0.0, 0.0],
                 "gamma": ["bottom"], "crack_kind": "circle",
                 "crack_center": [0.5, 0.5], "crack_radius": 0.25,
                 "crack_theta": 0.5, "crack_y0": 0.5, "crack_x0": 0.25,
                 "crack_x1": 0.75, "dim": 2},
    "discretization": {"h": 0.25, "macro_n": 3},
    "physics": {"tensor": "isotropic", "lam": 1.0, "mu_lame": 1.0,
                "load": "shear", "load_magnitude": 1.0, "mu": 0.3,
                "mu_support": 0.6, "kappa": 0.1},
    "solver": {"epsilon": 0.25, "epsilon_list": [0.5, 0.25, 0.125],
               "kappa_list": [0.1, 0.01, 0.001],
               "g0": 0.02, "alpha_list": [0.25, 0.5, 0.75],
               "tol_fixed_point": 1e-6, "max_iter": 60, "n_random": 20,
               "eta": 10.0},
    "outputs": {"write_vtk": True, "write_matrix": False,
                "micro_vtk_limit": 4},
}


@dataclass
class RunConfig:
    geometry: dict
    discretization: dict
    physics: dict
    solver: dict
    outputs: dict
    hash: str = ""

    @staticmethod
    def from_toml(path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
        return RunConfig.from_dict(raw)

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        sections = {}
        for name, val in raw.items():
            if name not in _SCHEMA:
                raise ConfigError(f"unknown config section [{name}]")
            if not isinstance(val, dict):
                raise ConfigError(f"[{name}] must be a table")
            unknown = set(val) - _SCHEMA[name]
            if unknown:
                raise ConfigError(
                    f"unknown key(s) in [{name}]: {sorted(unknown)}")
            sections[name] = {**_DEFAULTS[name], **val}
        for name in _SCHEMA:
            sections.setdefault(name, dict(_DEFAULTS[name]))
        cfg = RunConfig(**sections)
        cfg.validate()
        cfg.hash = cfg.config_hash()
        return cfg

    def validate(self) -> None:
        g, p, s = self.geometry, self.physics, self.solver
        if s["epsilon"] <= 0:
            raise ConfigError("epsilon must be > 0")
        diam = float(np.hypot(*g["lengths"]))
        if s["epsilon"] > diam:
            raise ConfigError(
                f"epsilon {s['epsilon']} exceeds the domain diameter {diam}")
        if p["kappa"] < 0:
            raise ConfigError("kappa must be >= 0")
        if p["mu"] < 0:
            raise ConfigError("mu must be >= 0")
        if s["g0"] < 0:
            raise ConfigError("g0 must be >= 0")
        if not (0.0 < g["crack_theta"] <= 1.0):
            raise ConfigError("crack_theta must lie in (0, 1]")
        if self.discretization["h"] <= 0:
            raise ConfigError("h must be > 0")
        if p["lam"] < 0 or p["mu_lame"] <= 0:
            raise ConfigError("need lam >= 0 and mu_lame > 0")

    def config_hash(self) -> str:
        items = []
        for sec in sorted(_SCHEMA):
            d = getattr(self, sec)
            for k in sorted(d):
                items.append(f"{sec}.{k}={d[k]!r}")
        return hashlib.sha256("\n".join(items).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def make_domain(cfg: RunConfig):
    from .geometry import Box
    g = cfg.geometry
    return Box(lengths=tuple(g["lengths"]), origin=tuple(g["origin"]))


def make_crack(cfg: RunConfig):
    from .geometry import CrackSpec
    g = cfg.geometry
    if g["crack_kind"] == "circle":
        return CrackSpec(kind="circle", center=tuple(g["crack_center"]),
                         radius=g["crack_radius"], theta=g["crack_theta"])
    if g["crack_kind"] == "line":
        return CrackSpec(kind="line", y0=g["crack_y0"],
                         x0=g["crack_x0"], x1=g["crack_x1"])
    if g["crack_kind"] == "sphere":
        return CrackSpec(kind="sphere", center=tuple(g["crack_center"]),
                         radius=g["crack_radius"], theta=g["crack_theta"])
    raise ConfigError(f"unknown crack kind {g['crack_kind']!r}")


def make_tensor(cfg: RunConfig):
    from .assembly import TENSOR_PRESETS
    p = cfg.physics
    if p["tensor"] not in TENSOR_PRESETS:
        raise ConfigError(f"unknown tensor preset {p['tensor']!r}")
    return TENSOR_PRESETS[p["tensor"]](p["lam"], p["mu_lame"])


def make_load(cfg: RunConfig):
    from .contact import load_preset
    p = cfg.physics
    try:
        return load_preset(p["load"], p["load_magnitude"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def make_cell(cfg: RunConfig):
    from .geometry import build_reference_cell
    return build_reference_cell(make_crack(cfg), h=cfg.discretization["h"],
                                dim=cfg.geometry["dim"]).duplicated_cell()


def build_setup_for(cfg: RunConfig, epsilon: float):
    from .geometry import tile_domain
    from .unfolding import build_setup
    mesh = tile_domain(make_domain(cfg), tuple(cfg.geometry["gamma"]),
                       make_cell(cfg), epsilon)
    return build_setup(mesh)


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def write_csv(path: Path, header: list, rows: list, cfg_hash: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(["config_hash"] + header)]
    for row in rows:
        cells = [cfg_hash]
        for h in header:
            v = row[h]
            cells.append(f"{v:.12e}" if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _write_tri_vtk(path: Path, points, tris, point_data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# vtk DataFile Version 3.0", "crackhom field", "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(points)} double"]
    for p in points:
        lines.append(f"{p[0]:.12e} {p[1]:.12e} 0.0")
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    for t in tris:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    lines.append(f"CELL_TYPES {len(tris)}")
    lines.extend(["5"] * len(tris))
    if point_data:
        lines.append(f"POINT_DATA {len(points)}")
        for name, arr in point_data.items():
            arr = np.asarray(arr)
            if arr.ndim == 2:
                lines.append(f"VECTORS {name} double")
                for v in arr:
                    lines.append(f"{v[0]:.12e} {v[1]:.12e} 0.0")
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                for v in arr:
                    lines.append(f"{v:.12e}")
    path.write_text("\n".join(lines) + "\n")


def _vertex_values(space, coeffs, vector=True):
    """P2 coefficients restricted to mesh vertices."""
    nv = len(space.points)
    if vector:
        return np.asarray(coeffs).reshape(-1, 2)[:nv]
    return np.asarray(coeffs)[:nv]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_verify_unfolding(cfg: RunConfig, out: Path, rng) -> int:
    from . import unfolding as uf
    from .assembly import scalar_mass
    from .spaces import CrackNorms, scaled_crack_dual_norm, scaled_crack_norm
    rows = []
    cell = make_cell(cfg)
    dom = make_domain(cfg)
    gamma = tuple(cfg.geometry["gamma"])
    nrand = cfg.solver["n_random"]

    from .geometry import tile_domain
    for eps in cfg.solver["epsilon_list"]:
        mesh = tile_domain(dom, gamma, cell, eps)
        setup = uf.build_setup(mesh)
        rs = setup.ref_space
        Mref = scalar_mass(rs).toarray()
        from .assembly import vector_mass as _vm
        Mv = _vm(setup.gspace)
        for k in range(nrand):
            v = rng.standard_normal(setup.gspace.n_vector_dofs)
            v[setup.gamma_dofs] = 0.0
            ufd = uf.unfold_domain(v, setup.gspace, mesh, rs,
                                   setup.node_maps, vector=True)
            lhs = uf.unfolded_l2_norm(ufd, Mref)
            rhs = float(np.sqrt(v @ (Mv @ v)))
            rows.append({"check": "l2_preservation", "epsilon": eps,
                         "alpha": 0.0, "sample": k,
                         "value": abs(lhs - rhs) / max(rhs, 1e-30),
                         "tol": 1e-12})
            tv = setup.g_layout  # trace values on the crack
            g = rng.standard_normal(tv.n_trace_dofs)
            buf = uf.unfold_boundary(g, tv, setup.ref_layout, mesh,
                                     setup.tmaps)
            lhs = uf.boundary_lp_norm(buf, 2.0)
            rhs = eps ** 0.5 * uf.crack_lp_norm(g, tv, 2.0)
            rows.append({"check": "boundary_l2_scaling", "epsilon": eps,
                         "alpha": 0.0, "sample": k,
                         "value": abs(lhs - rhs) / max(rhs, 1e-30),
                         "tol": 1e-12})
            back = uf.average_boundary(buf, setup.tmaps, tv.n_trace_dofs)
            rows.append({"check": "average_left_inverse", "epsilon": eps,
                         "alpha": 0.0, "sample": k,
                         "value": float(np.abs(back - g).max())
                         / max(float(np.abs(g).max()), 1e-30),
                         "tol": 1e-12})
        ref_layout = setup.ref_layout
        for alpha in cfg.solver["alpha_list"]:
            norms = CrackNorms.build(ref_layout, alpha)
            g = rng.standard_normal(ref_layout.n_trace_dofs)
            percell = np.tile(g, (mesh.n_cells, 1))
            lhs = scaled_crack_norm(percell, alpha, eps, norms)
            # exact per-cell factor of the scaled fractional norm
            rhs = float(np.sqrt(mesh.n_cells * eps)) * norms.norm(g)
            rows.append({"check": "fractional_scaling", "epsilon": eps,
                         "alpha": alpha, "sample": 0,
                         "value": abs(lhs - rhs) / max(rhs, 1e-30),
                         "tol": 1e-8})
            lhs = scaled_crack_dual_norm(percell, alpha, eps, norms)
            rhs = float(np.sqrt(mesh.n_cells / eps)) * norms.dual_norm(g)
            rows.append({"check": "dual_scaling", "epsilon": eps,
                         "alpha": alpha, "sample": 0,
                         "value": abs(lhs - rhs) / max(rhs, 1e-30),
                         "tol": 1e-8})
    ok = all(r["value"] <= r["tol"] for r in rows)
    for r in rows:
        r["pass"] = int(r["value"] <= r["tol"])
    write_csv(out / "unfolding_checks.csv",
              ["check", "epsilon", "alpha", "sample", "value", "tol", "pass"],
              rows, cfg.hash)
    return EXIT_OK if ok else EXIT_IDENTITY


def cmd_korn_report(cfg: RunConfig, out: Path, rng) -> int:
    from .fem import P2Space
    from .spaces import korn_constant
    cell = make_cell(cfg)
    space = P2Space(cell.points, cell.tris, cell.crack_minus,
                    cell.crack_plus, cell.tri_plus,
                    duplicated=cell.duplicated)
    rows = []
    rep = korn_constant(space, variant="wirtinger", tag="reference-cell")
    rows.append({"tag": rep.tag, "variant": rep.variant,
                 "constant": rep.constant})
    for eps in cfg.solver["epsilon_list"]:
        setup = build_setup_for(cfg, eps)
        mask = setup.gamma_dofs
        rep = korn_constant(setup.gspace, variant="dirichlet",
                            dirichlet_mask=mask, tag=f"eps={eps}")
        rows.append({"tag": rep.tag, "variant": rep.variant,
                     "constant": rep.constant})
    from .twoscale import two_scale_korn_constant
    rows.append({"tag": "two-scale-limit", "variant": "coupled",
                 "constant": two_scale_korn_constant(cell)})
    write_csv(out / "korn_report.csv",
              ["tag", "variant", "constant"], rows, cfg.hash)
    return EXIT_OK


def _contact_problem(cfg: RunConfig, epsilon: float):
    from .contact import build_problem
    setup = build_setup_for(cfg, epsilon)
    pb = build_problem(setup, make_tensor(cfg), make_load(cfg),
                       kappa=cfg.physics["kappa"], eta=cfg.solver["eta"])
    pb.max_iter = cfg.solver["max_iter"]
    return setup, pb


def _export_solution(cfg, out, setup, sol, name):
    if not cfg.outputs["write_vtk"]:
        return
    from .geometry import export_vtk
    lay = setup.g_layout
    nn = setup.gspace.n_nodes
    nv = len(setup.mesh.points)
    u = np.asarray(sol.u).reshape(-1, 2)
    fields = {"u": u[:nv]}
    from .assembly import assemble_jump_operators
    jop = assemble_jump_operators(lay)
    jn = jop.normal @ sol.u
    jt = jop.tangential @ sol.u
    for fname, vals in (("lam_nu", sol.lam_nu), ("lam_tau", sol.lam_tau),
                        ("sigma_nu", sol.sigma_nu),
                        ("jump_nu", jn), ("jump_tau", jt)):
        arr = np.zeros(nn)
        arr[lay.td_minus] = vals
        fields[fname] = arr[:nv]
    export_vtk(setup.mesh, out / f"{name}.vtk", point_data=fields)


def cmd_solve_contact(cfg: RunConfig, out: Path, rng) -> int:
    from .contact import solve_given_friction, verify_kkt
    setup, pb = _contact_problem(cfg, cfg.solver["epsilon"])
    G = cfg.solver["g0"] * np.ones(setup.g_layout.n_trace_dofs)
    sol = solve_given_friction(pb, G)
    rep = verify_kkt(pb, sol)
    rows = [{"residual": k, "value": float(v)} for k, v in rep.items()]
    write_csv(out / "kkt_report.csv", ["residual", "value"], rows, cfg.hash)
    _export_solution(cfg, out, setup, sol, "contact_solution")
    if cfg.outputs["write_matrix"]:
        from .assembly import export_matrix_market
        export_matrix_market(pb.K, out / "contact_K.mtx")
    return EXIT_OK


def cmd_coulomb(cfg: RunConfig, out: Path, rng) -> int:
    from .contact import FrictionCoefficient, coulomb_iterate, verify_kkt
    setup, pb = _contact_problem(cfg, cfg.solver["epsilon"])
    mu = FrictionCoefficient(value=cfg.physics["mu"],
                             support_scale=cfg.physics["mu_support"])
    res = coulomb_iterate(pb, mu, tol=cfg.solver["tol_fixed_point"])
    rows = [{"iter": i, "change": float(c)}
            for i, c in enumerate(res.changes)]
    write_csv(out / "coulomb_history.csv", ["iter", "change"], rows, cfg.hash)
    rep = verify_kkt(pb, res.solution)
    rows = [{"residual": k, "value": float(v)} for k, v in rep.items()]
    rows.append({"residual": "rho_hat", "value": float(res.rho_hat)})
    write_csv(out / "coulomb_kkt.csv", ["residual", "value"], rows, cfg.hash)
    _export_solution(cfg, out, setup, res.solution, "coulomb_solution")
    return EXIT_OK


def cmd_two_scale(cfg: RunConfig, out: Path, rng) -> int:
    from . import twoscale as ts
    from .contact import FrictionCoefficient
    cell = make_cell(cfg)
    micro = ts.build_micro(cell, make_tensor(cfg), eta=cfg.solver["eta"])
    macro = ts.build_macro(make_domain(cfg), tuple(cfg.geometry["gamma"]),
                           n=cfg.discretization["macro_n"])
    kappa = cfg.physics["kappa"]
    k = 2 if kappa > 0 else 1
    pb = ts.assemble_twoscale(macro, micro, make_tensor(cfg), kappa=kappa,
                              f=make_load(cfg), k=k)
    if cfg.physics["mu"] > 0 and k == 2:
        mu = FrictionCoefficient(value=cfg.physics["mu"],
                                 support_scale=cfg.physics["mu_support"])
        sol = ts.solve_limit_coulomb(pb, mu,
                                     tol=cfg.solver["tol_fixed_point"])
    else:
        sol = ts.solve_limit_given_friction(pb, cfg.solver["g0"])
    rows = [{"quantity": "energy", "value": sol.energy},
            {"quantity": "n_norm",
             "value": ts.n_norm(pb, sol.u, sol.uhat)},
            {"quantity": "max_uhat_nu_jump",
             "value": float(max((micro.Jn_red @ sol.uhat[i]).max(initial=0.0)
                                for i in range(pb.n_carriers)))},
            {"quantity": "max_sigma_nu",
             "value": float(sol.Sigma_nu.max())}]
    write_csv(out / "two_scale_report.csv", ["quantity", "value"], rows,
              cfg.hash)
    if cfg.outputs["write_vtk"]:
        ms = macro.space
        _write_tri_vtk(out / "two_scale_macro.vtk", ms.points, ms.tris,
                       {"u": _vertex_values(ms, sol.u)})
        lim = int(cfg.outputs["micro_vtk_limit"])
        for i in range(min(lim, pb.n_carriers)):
            mc = micro.space
            _write_tri_vtk(out / f"two_scale_micro_{i:03d}.vtk",
                           mc.points, mc.tris,
                           {"uhat": _vertex_values(mc, sol.uhat_full(i))})
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, out: Path, rng) -> int:
    from . import twoscale as ts
    eps_list = cfg.solver["epsilon_list"]
    if len(eps_list) < 2:
        raise ConfigError("epsilon_list needs at least two levels")
    cell = make_cell(cfg)
    rep = ts.convergence_study(make_domain(cfg),
                               tuple(cfg.geometry["gamma"]), cell,
                               make_tensor(cfg), make_load(cfg), eps_list,
                               G0=cfg.solver["g0"],
                               kappa=cfg.physics["kappa"],
                               macro_n=cfg.discretization["macro_n"],
                               eta=cfg.solver["eta"], signorini_sigma=True)
    rows = rep["rows"]
    for i, r in enumerate(rows):
        if i == 0:
            r["order"] = 0.0
        else:
            r0, r1 = rows[i - 1], r
            r["order"] = float(np.log(r0["strain_error"]
                                      / r1["strain_error"])
                               / np.log(r0["epsilon"] / r1["epsilon"]))
    write_csv(out / "convergence.csv",
              ["epsilon", "strain_error", "sigma_error", "order"],
              rows, cfg.hash)
    return EXIT_OK


def cmd_kappa_study(cfg: RunConfig, out: Path, rng) -> int:
    from .contact import kappa_limit_study
    setup = build_setup_for(cfg, cfg.solver["epsilon"])
    G = cfg.solver["g0"] * np.ones(setup.g_layout.n_trace_dofs)
    rep = kappa_limit_study(setup, make_tensor(cfg), make_load(cfg), G,
                            cfg.solver["kappa_list"],
                            eta=cfg.solver["eta"])
    rows = [{"kappa": k, "diff_h1": d, "u0_h1": rep["u0_h1"]}
            for k, d in zip(rep["kappa"], rep["diff_h1"])]
    write_csv(out / "kappa_study.csv", ["kappa", "diff_h1", "u0_h1"],
              rows, cfg.hash)
    return EXIT_OK


_COMMANDS = {
    "verify-unfolding": cmd_verify_unfolding,
    "korn-report": cmd_korn_report,
    "solve-contact": cmd_solve_contact,
    "coulomb": cmd_coulomb,
    "two-scale": cmd_two_scale,
    "convergence": cmd_convergence,
    "kappa-study": cmd_kappa_study,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="crackhom",
        description="Two-scale contact/friction homogenization toolkit")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", type=Path, default=None,
                        help="TOML run configuration")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: "
                             f"${OUT_ROOT_ENV}/<command> or ./out/<command>)")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    if args.out is not None:
        out = args.out
    else:
        root = Path(os.environ.get(OUT_ROOT_ENV, "out"))
        out = root / args.command

    try:
        if args.config is not None:
            cfg = RunConfig.from_toml(args.config)
        else:
            cfg = RunConfig.from_dict({})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    rng = np.random.default_rng(args.seed)
    from .contact import SolverError
    from .geometry import GeometryError
    from .unfolding import UnfoldingError
    try:
        return _COMMANDS[args.command](cfg, out, rng)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, UnfoldingError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
