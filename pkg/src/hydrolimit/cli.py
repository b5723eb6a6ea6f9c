"""Command-line entry point.

Exit codes: 0 when every verdict passes, 1 on a numerical failure or a
failed verdict, 2 when the configuration is rejected.
"""
from __future__ import annotations

import os
import sys

_threads = os.environ.get("HYDROLIMIT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import logging  # noqa: E402

import numpy as np  # noqa: E402

from . import collision, fluid, hypocoercivity, kinetic, limit, semigroup, spectral  # noqa: E402
from .bundle import ResultBundle  # noqa: E402
from .config import ConfigError, RunConfig, load_config  # noqa: E402
from .fields import Grid, sobolev_norm  # noqa: E402
from .velocity import build_basis  # noqa: E402

log = logging.getLogger("hydrolimit")

COMMANDS = ("check", "spectrum", "nsf", "kinetic", "limit", "hypo")


def make_backend(cfg: RunConfig) -> collision.CollisionBackend:
    basis = build_basis(cfg.max_degree)
    chosen = cfg.backend
    if chosen.kind == "bgk":
        return collision.bgk_backend(basis, chosen.nu)
    if chosen.kind == "maxwell":
        return collision.maxwell_cutoff_backend(basis, chosen.angular_quad_order)
    base = collision.bgk_backend(basis, chosen.nu)
    return base.with_gamma(collision.synthetic_gamma(basis, chosen.seed, chosen.scale), "synthetic")


def cmd_check(cfg: RunConfig, bundle: ResultBundle) -> None:
    tol = cfg.tolerances
    backend = make_backend(cfg)
    basis = backend.basis
    with bundle.timed("conservation"):
        cons = collision.check_conservation(backend, 1000, cfg.seed, tol["conservation"])
    bundle.verdict("conservation", cons.passed)
    kdim = collision.kernel_dimension(backend, tol["kernel"])
    bundle.verdict("kernel_dimension", kdim == 5)
    P0 = basis.P0
    p0_err = max(np.abs(P0 @ P0 - P0).max(), np.abs(P0 - P0.T).max())
    bundle.verdict("P0_projector", p0_err <= 1e-12)
    lam2 = collision.coercivity_constant(backend, cfg.s, cfg.gamma)
    bundle.verdict("coercivity", lam2 > 0)
    scaling = 0.0
    rng = np.random.default_rng(cfg.seed)
    for eps in (1.0, 0.5, 0.1):
        for _ in range(3):
            k = rng.integers(-2, 3, size=3).astype(float)
            t = float(rng.uniform(0.01, 0.5))
            a = semigroup.propagator(backend, eps, k, t)
            b = semigroup.propagator(backend, 1.0, eps * k, t / eps**2)
            scaling = max(scaling, float(np.abs(a - b).max()))
    bundle.verdict("scaling_identity", scaling <= tol["scaling"])
    sum_err = 0.0
    for w in spectral.lattice_directions()[:6]:
        P = spectral.explicit_projectors(backend, w)
        sum_err = max(sum_err, float(np.abs(sum(P.values()) - P0).max()))
    bundle.verdict("projector_sum", sum_err <= tol["projector"])
    bundle.summary.update({"backend": backend.describe(), "max_conservation_residual": cons.max_residual,
                           "kernel_dimension": kdim, "P0_error": p0_err, "lambda2": lam2,
                           "scaling_error": scaling, "projector_sum_error": sum_err})


def cmd_spectrum(cfg: RunConfig, bundle: ResultBundle) -> None:
    tol = cfg.tolerances
    backend = make_backend(cfg)
    radii = np.linspace(0.0, 0.1, 11)
    with bundle.timed("branches"):
        scan = spectral.eigen_branches(backend, radii)
    fit = spectral.fit_transport_coefficients(scan)
    nu = collision.viscosities(backend)
    with bundle.timed("kappa"):
        kap = spectral.determine_kappa(backend)
    bundle.tables["branches"] = [{"k": r, "direction": d, "branch": n, "re": re, "im": im}
                                 for r, d, n, re, im in scan.rows()]
    bundle.tables["kappa_scan"] = [{"r": r, "gap": g, "residual": res} for r, g, res in kap.scanned]
    c0 = spectral.acoustic_speed(backend)
    bundle.verdict("nu_NS", abs(fit.nu_NS - nu[0]) <= tol["transport"] * nu[0])
    bundle.verdict("nu_heat", abs(fit.nu_heat - nu[1]) <= tol["transport"] * nu[1])
    bundle.verdict("sound_speed", abs(fit.c - c0) <= tol["speed"] * c0)
    bundle.verdict("zero_row", all(abs(scan.eigenvalues[n][0]) <= 1e-12 for n in spectral.BRANCHES))
    bundle.summary.update({"fit": fit.__dict__, "viscosities": nu, "kappa": kap.kappa,
                           "lambda2": kap.lambda2, "acoustic_speed": c0})


def _hydro_init(cfg: RunConfig, grid: Grid) -> fluid.HydroField:
    return fluid.random_well_prepared(grid, cfg.amplitude, cfg.kmax, cfg.seed)


def cmd_nsf(cfg: RunConfig, bundle: ResultBundle) -> None:
    backend = make_backend(cfg)
    nu = collision.viscosities(backend)
    grid = Grid(cfg.K, cfg.d_x)
    init = _hydro_init(cfg, grid)
    dt = min(cfg.dt, fluid.max_stable_dt(grid, nu))
    with bundle.timed("solve"):
        traj = fluid.solve_nsf(init, nu, cfg.T, dt)
    res = fluid.nsf_duhamel_residual(backend, traj)
    bundle.verdict("energy_inequality", traj.energy_residual <= 1e-8)
    bundle.verdict("duhamel_residual", res <= cfg.tolerances["duhamel"])
    bundle.tables["dissipation"] = [{"t": t, "dissipation": d} for t, d in zip(traj.times, traj.dissipation)]
    bundle.summary.update({"dt": dt, "energy_residual": traj.energy_residual, "duhamel_residual": res})


def cmd_kinetic(cfg: RunConfig, bundle: ResultBundle) -> None:
    backend = make_backend(cfg)
    grid = Grid(cfg.K, cfg.d_x)
    init = _hydro_init(cfg, grid)
    f_in = fluid.lift_kinetic(backend.basis, init)
    if cfg.micro_amplitude > 0:
        f_in = f_in + limit.microscopic_perturbation(backend, grid, cfg.micro_amplitude, cfg.kmax, cfg.seed)
    run = kinetic.KineticRun(cfg.eps, cfg.T, cfg.dt)
    with bundle.timed("solve"):
        ops = semigroup.step_operators(backend, cfg.eps, grid.wavevectors, cfg.dt)
        traj = kinetic.solve_kinetic(backend, grid, f_in, run, ops=ops)
    res = kinetic.residual_check(backend, grid, traj, ops=ops)
    bundle.verdict("invariants", traj.invariant_drift <= cfg.tolerances["invariants"])
    bundle.verdict("duhamel_residual", res <= cfg.tolerances["duhamel"])
    bundle.tables["norms"] = [{"t": t, "h_half": sobolev_norm(grid, f, 0.5)} for t, f in zip(traj.times, traj.states)]
    bundle.summary.update({"invariant_drift": traj.invariant_drift, "duhamel_residual": res})


def cmd_limit(cfg: RunConfig, bundle: ResultBundle) -> None:
    tol = cfg.tolerances
    backend = make_backend(cfg)
    eps_list = cfg.eps_list or [cfg.eps]
    grid = Grid(cfg.sweep_K, cfg.d_x)
    init = _hydro_init(cfg, grid)
    micro = None
    if cfg.micro_amplitude > 0:
        micro = limit.microscopic_perturbation(backend, grid, cfg.micro_amplitude, cfg.kmax, cfg.seed)
    with bundle.timed("sweep"):
        sweep = limit.convergence_sweep(backend, grid, eps_list, init, cfg.T, cfg.alpha, cfg.psi_radius,
                                        micro=micro)
    bundle.tables["sweep"] = sweep.rows()
    errors = sweep.errors
    if micro is None:
        if len(errors) > 1:
            bundle.verdict("strictly_decreasing", bool(np.all(np.diff(errors) < 0)))
            bundle.verdict("rate", sweep.slope >= tol["slope"])
    else:
        bundle.verdict("plateau", float(errors.min()) >= tol["plateau"])
    small = Grid(cfg.K, cfg.d_x)
    with bundle.timed("cross_check"):
        cc = limit.cross_check(backend, small, cfg.eps, _hydro_init(cfg, small), cfg.T, cfg.dt,
                               beta=cfg.beta, ell=cfg.ell, factor=tol["cross_check_factor"])
    bundle.verdict("cross_check", cc.passed)
    bundle.summary.update({"slope": sweep.slope, "theoretical_exponent": sweep.theoretical,
                           "cross_check": {"difference": cc.difference, "tolerance": cc.tolerance,
                                           "partition": cc.solution.partition, "L_norms": cc.solution.L_norms,
                                           "C0": cc.solution.C0}})


def cmd_hypo(cfg: RunConfig, bundle: ResultBundle) -> None:
    backend = make_backend(cfg)
    with bundle.timed("tune"):
        scan = hypocoercivity.tune_deltas(backend, cfg.hypo_eps, cfg.hypo_kmax, 3, s=cfg.s, gamma=cfg.gamma)
    k_set = hypocoercivity.lattice_representatives(cfg.hypo_kmax, 3)
    with bundle.timed("verify"):
        rep = hypocoercivity.verify_coercivity(backend, scan.deltas, cfg.hypo_eps, k_set, 500, cfg.s,
                                               cfg.gamma, cfg.seed)
    bundle.verdict("lambda3_positive", rep.lambda3 > 0)
    bundle.verdict("norm_equivalence", rep.equivalence <= 0.5)
    bundle.tables["delta_scan"] = [{"d1": r["deltas"][0], "d2": r["deltas"][1], "d3": r["deltas"][2],
                                    "lambda3": r["lambda3"], "equivalence": r["equivalence"]} for r in scan.table]
    bundle.tables["coercivity"] = [{"eps": r["eps"], "k1": r["k"][0], "k2": r["k"][1], "k3": r["k"][2],
                                    "lambda3": r["lambda3"], "sampled_min": r["sampled_min"]}
                                   for r in rep.per_mode]
    bundle.summary.update({"deltas": scan.deltas, "lambda3": rep.lambda3, "lambda3_sampled": rep.lambda3_sampled,
                           "equivalence": rep.equivalence, "samples_per_mode": 500})


HANDLERS = {"check": cmd_check, "spectrum": cmd_spectrum, "nsf": cmd_nsf, "kinetic": cmd_kinetic,
            "limit": cmd_limit, "hypo": cmd_hypo}

NUMERICAL_ERRORS = (ArithmeticError, RuntimeError, np.linalg.LinAlgError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hydrolimit", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--eps", type=float, nargs="+", help="override eps (one value) or the eps sweep")
    parser.add_argument("--seed", type=int, help="override the seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.eps:
        if len(args.eps) == 1:
            cfg.eps = args.eps[0]
        else:
            cfg.eps_list = list(args.eps)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    bundle = ResultBundle(args.command, cfg.to_dict())
    try:
        HANDLERS[args.command](cfg, bundle)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        bundle.verdict("completed", False)
        bundle.summary["error"] = f"{type(exc).__name__}: {exc}"
        bundle.write(args.out)
        return 1
    out = bundle.write(args.out)
    for name, ok in bundle.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    log.info("results in %s", out)
    return 0 if bundle.passed else 1


if __name__ == "__main__":
    sys.exit(main())
