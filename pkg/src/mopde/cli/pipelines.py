"""One function per subcommand.  Each returns a report dictionary with the
keys ``invariants``, ``curves`` and ``energy``; the caller adds
``config_echo`` and ``timing`` and decides the exit status."""
from __future__ import annotations

import os
from dataclasses import replace

import numpy as np

from .. import nfunction as nf
from .. import operators as ops
from .. import solver as sv
from .. import verify as vf
from ..parallel import parallel_map
from . import expressions as ex
from .config import (
    ConfigError,
    RunConfig,
    build_grid,
    build_nfunction,
    build_operator,
    build_problem,
    build_solver_config,
)
from .io import write_field_csv


def _inv(passed, worst, tol):
    return {"pass": bool(passed), "worst": float(worst), "tol": float(tol)}


def _report():
    return {"invariants": {}, "curves": {}, "energy": []}


def _from_property_report(rep, prefix=""):
    return {prefix + k: _inv(e.passed, e.worst, e.tol) for k, e in rep.entries.items()}


def _domain(cfg):
    ext = cfg["problem"]["extents"]
    return tuple((ext[2 * i], ext[2 * i + 1]) for i in range(cfg.dim))


# --------------------------------------------------------------------------


def check_nfunction(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    M = build_nfunction(cfg)
    rep = _report()
    n = min(cfg["verify"]["samples"], 20_000)
    spec = nf.SampleSpec(n_points=n, seed=seed, t_range=(0.0, cfg["problem"]["T"]), domain=_domain(cfg))
    rep["invariants"].update(_from_property_report(nf.check_nfunction_properties(M, spec)))
    for label, m in (("lower", M.lower), ("upper", M.upper)):
        rep["invariants"].update(_from_property_report(nf.check_young_properties(m, nf.SampleSpec(seed=seed)),
                                                      f"{label}."))
    s = np.geomspace(1e-3, 1e2, 200)
    c_up = nf.conjugate_young(M.upper, s)
    c_lo = nf.conjugate_young(M.lower, s)
    order = float(np.max((c_up - c_lo) / (1.0 + np.abs(c_lo))))
    rep["invariants"]["conjugate_order"] = _inv(order <= 1e-10, max(order, 0.0), 1e-10)

    if M.isotropic:
        grid = build_grid(cfg)
        times = list(grid.times[:: max(1, grid.times.size // 8)]) + [grid.times[-1]]
        for b in cfg.breakpoints:
            times += [b, float(np.nextafter(b, np.inf))]
        deltas = sorted(cfg["verify"]["deltas"], reverse=True)
        th = nf.check_theta_condition(M, deltas, C=cfg["verify"]["theta_C"], times=sorted(set(times)),
                                      domain=_domain(cfg), points_per_edge=cfg["verify"]["points_per_edge"])
        rep["curves"]["theta_ratio"] = th.curve()
        seq = [th.max_ratio[d] for d in deltas]
        rep["invariants"]["theta_bounded"] = _inv(th.bounded, seq[-1], 1.5 * max(seq[0], 1.0))
    return rep


def check_operator(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    A = build_operator(cfg)
    rep = _report()
    n = cfg["verify"]["samples"]
    spec = ops.OperatorSampleSpec(n_points=n, n_pairs=n, seed=seed, t_range=(0.0, cfg["problem"]["T"]),
                                  domain=_domain(cfg))
    ar = ops.check_assumptions(A, spec)
    rep["invariants"].update(_from_property_report(ar))
    rep["curves"]["ball_bound"] = [{"param": K, "value": v} for K, v in ar.info["ball_bounds"].items()]
    rep["curves"]["A3_min_pairing"] = [{"param": 0, "value": ar.info["A3_min_pairing"]}]
    if cfg["operator"]["family"] != "anti":
        Ath = ops.regularize(A, cfg["solver"]["theta0"] or 1e-2)
        rr = ops.check_assumptions(Ath, replace(spec, n_points=min(n, 20_000), n_pairs=min(n, 20_000)))
        rep["invariants"]["regularized.A3"] = _inv(rr.entries["A3"].passed, rr.entries["A3"].worst,
                                                  rr.entries["A3"].tol)
        dom = ops.check_domination(Ath.m, A.governing, nf.SampleSpec(seed=seed, domain=_domain(cfg),
                                                                     t_range=(0.0, cfg["problem"]["T"])))
        rep["invariants"]["regularized.domination"] = _inv(dom <= 1e-12, max(dom, 0.0), 1e-12)
    return rep


def _solve(cfg, **kw):
    spec = build_problem(cfg, cells=kw.pop("cells", None), dt=kw.pop("dt", None))
    scfg = build_solver_config(cfg)
    if kw:
        scfg = replace(scfg, **kw)
    return spec, scfg, sv.solve(spec, scfg)


def _solution_invariants(rep, sol, scfg):
    ratio = max((s.energy_defect / s.energy_bound for s in sol.steps), default=0.0)
    rep["invariants"]["step_energy_identity"] = _inv(ratio <= 1.0, ratio, 1.0)
    res = max((s.residual for s in sol.steps), default=0.0)
    rep["invariants"]["newton_residual"] = _inv(res <= scfg.newton_tol, res, scfg.newton_tol)
    bd = sol.grid.boundary_mask()
    bval = float(np.max(np.abs(sol.u.values[:, bd])))
    rep["invariants"]["boundary_zero"] = _inv(bval == 0.0, bval, 0.0)


def _theta_curves(rep, sol):
    for key in ("theta_term", "C1", "C2", "C3", "C4"):
        rep["curves"][key] = [{"param": e["theta"], "value": e[key]} for e in sol.theta_trace]


def solve_run(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    spec, scfg, sol = _solve(cfg)
    rep = _report()
    _solution_invariants(rep, sol, scfg)
    _theta_curves(rep, sol)
    rep["curves"]["newton_iterations"] = [{"param": s.t, "value": s.newton_iterations} for s in sol.steps]
    rep["energy"] = vf.global_energy_residual(sol).rows()
    if "csv" in cfg["output"]["formats"]:
        write_field_csv(os.path.join(out_dir, "u.csv"), sol.u)
        write_field_csv(os.path.join(out_dir, "flux.csv"), sol.flux)
    return rep


def _global_energy(rep, sol, label=""):
    er = vf.global_energy_residual(sol)
    scale = max(vf.energy_data_scale(sol), 1e-300)
    worst = max(er.residual) / scale
    rep["invariants"][f"energy_direction{label}"] = _inv(worst <= 1e-8, worst, 1e-8)
    return er


def energy_report(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    spec, scfg, sol = _solve(cfg)
    rep = _report()
    _solution_invariants(rep, sol, scfg)
    er = _global_energy(rep, sol)
    rep["energy"] = er.rows()
    if spec.operator.governing.isotropic:
        _, _, half = _solve(cfg, dt=cfg["problem"]["dt"] / 2)
        er2 = _global_energy(rep, half, "_half_dt")
        a = max(abs(r) for r in er.residual)
        b = max(abs(r) for r in er2.residual)
        factor = a / b if b > 0 else np.inf
        rep["invariants"]["dt_halving_factor"] = _inv(factor >= 1.7, factor, 1.7)
    psi = vf.CutoffFamily(cfg["verify"]["psi_j"], _domain(cfg))
    for k in cfg["verify"]["k_list"]:
        le = vf.local_energy_residual(sol, psi, k)
        rep["curves"][f"local_residual_k={k:g}"] = [{"param": t, "value": r} for t, r in zip(le.times, le.residual)]
    return rep


def theta_study(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    spec, scfg, sol = _solve(cfg)
    rep = _report()
    _solution_invariants(rep, sol, scfg)
    _theta_curves(rep, sol)
    tr = sol.theta_trace
    terms = [e["theta_term"] for e in tr]
    ratios = [b / a for a, b in zip(terms, terms[1:]) if a > 0]
    worst = max(ratios, default=0.0)
    rep["invariants"]["theta_term_decreasing"] = _inv(all(b < a for a, b in zip(terms, terms[1:])), worst, 1.0)
    for key in ("C1", "C2", "C3", "C4"):
        first = tr[0][key]
        top = max(e[key] for e in tr)
        rel = top / first if first > 0 else (0.0 if top == 0 else np.inf)
        rep["invariants"][f"{key}_within_2x"] = _inv(rel <= 2.0, rel, 2.0)
    half = scfg.theta_min / 2
    ext = sv.solve(spec, replace(scfg, theta0=half, theta_min=half), traces=False)
    d = sv.l2l2_difference(sol.u, ext.u)
    rep["invariants"]["theta_extension_difference"] = _inv(d <= 1e-6, d, 1e-6)
    return rep


def convergence_errors(cfg: RunConfig):
    """Sup-norm errors at ``T`` for the spatial and temporal refinement studies.

    The spatial study compares against ``exact(0, x) (1 + dt * rate)**-N`` when
    ``decay_rate`` is set (the time-discrete form of a single decaying mode),
    otherwise against ``exact(T, x)``; the temporal study uses ``exact(T, x)``.
    """
    co = cfg["convergence"]
    if co["exact"] is None:
        raise ConfigError("convergence-study needs [convergence] exact", section="convergence", key="exact")
    exact = ex.compile_expr(co["exact"])
    T = cfg["problem"]["T"]

    def err_space(cells):
        spec, _, sol = _solve(cfg, cells=(cells,) * cfg.dim, dt=co["dt_fixed"])
        x = sol.u.x
        if co["decay_rate"] is not None:
            n_steps = sol.u.t.size - 1
            ref = exact(0.0, x) * (1.0 + co["dt_fixed"] * co["decay_rate"]) ** (-n_steps)
        else:
            ref = exact(T, x)
        return float(np.max(np.abs(sol.u.values[-1] - ref)))

    def err_time(dt):
        spec, _, sol = _solve(cfg, cells=co["cells_fixed"] * (cfg.dim if len(co["cells_fixed"]) == 1 else 1), dt=dt)
        return float(np.max(np.abs(sol.u.values[-1] - exact(T, sol.u.x))))

    hs = [1.0 / n for n in co["cells_list"]]
    es = parallel_map(err_space, co["cells_list"])
    et = parallel_map(err_time, co["dt_list"])
    return hs, es, list(co["dt_list"]), et


def _orders(steps, errors):
    return [float(np.log(e1 / e2) / np.log(s1 / s2)) for s1, s2, e1, e2 in zip(steps, steps[1:], errors, errors[1:])]


def convergence_study(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    rep = _report()
    hs, es, dts, et = convergence_errors(cfg)
    so, to = _orders(hs, es), _orders(dts, et)
    co = cfg["convergence"]
    rep["curves"]["space_error"] = [{"param": h, "value": e} for h, e in zip(hs, es)]
    rep["curves"]["time_error"] = [{"param": d, "value": e} for d, e in zip(dts, et)]
    rep["curves"]["space_order"] = [{"param": h, "value": o} for h, o in zip(hs[1:], so)]
    rep["curves"]["time_order"] = [{"param": d, "value": o} for d, o in zip(dts[1:], to)]
    rep["invariants"]["space_order"] = _inv(min(so) >= co["min_space_order"], min(so), co["min_space_order"])
    rep["invariants"]["time_order"] = _inv(min(to) >= co["min_time_order"], min(to), co["min_time_order"])
    return rep


def uniqueness_run(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    spec = build_problem(cfg)
    scfg = build_solver_config(cfg)
    if not spec.operator.governing.isotropic:
        raise ConfigError("uniqueness-probe needs an isotropic family", section="operator", key="family")
    ur = vf.uniqueness_probe(spec, scfg, repeat=True)
    rep = _report()
    tol = 10 * scfg.newton_tol
    rep["invariants"]["l2l2_difference"] = _inv(ur.l2l2 <= tol, ur.l2l2, tol)
    rep["invariants"]["monotone_pairing"] = _inv(ur.pairing >= -1e-10, -ur.pairing, 1e-10)
    rep["invariants"]["repeat_determinism"] = _inv(ur.repeat_linf <= 1e-14, ur.repeat_linf, 1e-14)
    rep["curves"]["linf_difference"] = [{"param": 0, "value": ur.linf}]
    return rep


def boundary_decay(cfg: RunConfig, seed: int, out_dir: str) -> dict:
    spec, scfg, sol = _solve(cfg)
    rep = _report()
    curve = vf.boundary_modular_decay(sol, spec.operator.governing, cfg["verify"]["j_list"],
                                      C=cfg["verify"]["decay_C"])
    rep["curves"]["boundary_modular"] = curve
    vals = [c["value"] for c in curve]
    steps = [b / a for a, b in zip(vals, vals[1:]) if a > 0]
    rep["invariants"]["decay_decreasing"] = _inv(all(b < a for a, b in zip(vals, vals[1:])) or not any(vals),
                                                 max(steps, default=0.0), 1.0)
    ratio = vals[-1] / vals[0] if vals[0] > 0 else 0.0
    rep["invariants"]["decay_last_le_first"] = _inv(ratio <= 1.0, ratio, 1.0)
    psi = vf.CutoffFamily(cfg["verify"]["approx_j"], _domain(cfg))
    ad = vf.approximation_diagnostic(sol, cfg["verify"]["approx_k"], psi, cfg["verify"]["eps_list"],
                                     spec.operator.governing)
    for lam, c in ad.items():
        rep["curves"][f"approximation_lambda={lam:g}"] = c
    first, last = ad[1.0][0]["value"], ad[1.0][-1]["value"]
    rep["invariants"]["approximation_last_le_first"] = _inv(last <= first, last / first if first else 0.0, 1.0)
    return rep


PIPELINES = {
    "check-nfunction": check_nfunction,
    "check-operator": check_operator,
    "solve": solve_run,
    "energy-report": energy_report,
    "theta-study": theta_study,
    "convergence-study": convergence_study,
    "uniqueness-probe": uniqueness_run,
    "boundary-decay": boundary_decay,
}
