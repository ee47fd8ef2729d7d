"""Run orchestration: RunConfig in, solver objects, report dicts and files out."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .background import (BackgroundFlow1D, ForceKind, ForceModel, GasConfig, SonicCase, calibrate_force,
                         check_sign_pattern, extend_background, linear_force, solve_background,
                         verify_multiplier)
from .basis import RadialBasis, build_basis
from .config import RunConfig
from .fields import Field2D
from .fixed_point import (FixedPointParams, InletData, TransonicSolution, coefficients_from_state, build_psi0,
                          fixed_point_solve, nonlinear_residual, perturbation_scaling_study, sonic_front)
from .linear import extend_problem, l2r_sq, manufactured_problem, solve_extended, solve_linear
from .norms import weighted_norms
from .output import emit_plot_data, write_csv, write_json
from .verification import run_all


def thread_cap() -> int:
    """Worker count: the CPU count, capped by TOOL_THREADS when set."""
    n = os.cpu_count() or 1
    raw = os.environ.get("TOOL_THREADS", "").strip()
    if raw:
        try:
            n = min(n, max(1, int(raw)))
        except ValueError:
            pass
    return n


# -- building blocks ---------------------------------------------------------------

def gas_from_config(cfg: RunConfig) -> GasConfig:
    g = cfg.gas
    return GasConfig(g.gamma, g.rho0, g.u0, g.L0, g.L1)


def force_from_config(cfg: RunConfig, gas: GasConfig) -> ForceModel:
    f = cfg.force
    if f.kind == "linear":
        shape = linear_force(f.slope)
    elif f.kind == "polynomial":
        shape = ForceModel(ForceKind.POLYNOMIAL, tuple(f.coefficients), 1.0,
                           tuple(f.coefficients_right) or None)
    else:
        shape = ForceModel(ForceKind.TABLE, (tuple(f.table_x), tuple(f.table_f)))
    if f.calibrate:
        return calibrate_force(shape, gas)
    check_sign_pattern(shape, gas.L0, gas.L1)
    return shape


def background_from_config(cfg: RunConfig, M: int | None = None) -> BackgroundFlow1D:
    gas = gas_from_config(cfg)
    return solve_background(gas, force_from_config(cfg, gas), M or cfg.discretization.M_x1)


def basis_from_config(cfg: RunConfig) -> RadialBasis:
    return build_basis(cfg.discretization.N_modes, cfg.discretization.Q_nodes)


def params_from_config(cfg: RunConfig) -> FixedPointParams:
    p = cfg.fixed_point
    s = cfg.sigma
    return FixedPointParams(delta0=p.delta0_override, tol_fp=p.tol_fp, max_iter=p.max_iter, damping=p.damping,
                            sigma0=s.sigma0, levels=s.levels, tol_sigma=s.tol_sigma, eps_max=p.eps_max)


def inlet_from_config(cfg: RunConfig, eps: float | None = None) -> InletData:
    i = cfg.inlet
    return InletData(cfg.fixed_point.eps if eps is None else eps, i.amplitude, i.beta0, i.power)


def _outdir(cfg: RunConfig, out: str | None) -> Path:
    path = Path(out if out is not None else cfg.outputs.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _wants(cfg: RunConfig, fmt: str) -> bool:
    return fmt in cfg.outputs.formats


# -- derived physical fields -----------------------------------------------------------

def physical_fields(psi1: Field2D, flow: BackgroundFlow1D) -> dict[str, np.ndarray]:
    """Velocity, density and Mach number of phi = phi_bar + psi1 on the (x1, r) grid."""
    g = flow.gas.gamma
    r = psi1.basis.r
    Px = psi1.deriv(1, 0)
    ur = r[None, :] * psi1.mixed(0, 1)
    u = flow.u[:, None]
    u1 = u + Px
    c2 = flow.c2[:, None] - 0.5 * (g - 1.0) * (2.0 * u * Px + Px**2 + ur**2)
    rho = (c2 / g) ** (1.0 / (g - 1.0))
    mach = np.sqrt(u1**2 + ur**2) / np.sqrt(c2)
    X, R = np.meshgrid(flow.x, r, indexing="ij")
    return {"x1": X, "r": R, "u1": u1, "ur": ur, "rho": rho, "mach": mach}


# -- subcommands -------------------------------------------------------------------------

def run_background(cfg: RunConfig, out: str | None = None) -> dict:
    flow = background_from_config(cfg)
    outdir = _outdir(cfg, out)
    report = {
        "M": flow.M,
        "J": flow.J,
        "c_star": flow.c_star,
        "B0": flow.B0,
        "force_amplitude": flow.force.amplitude,
        "classification": flow.classification.to_dict(),
        "max_mass_residual": float(np.max(np.abs(flow.mass_residual()))),
        "max_bernoulli_residual": float(np.max(np.abs(flow.bernoulli_residual()))),
    }
    if flow.classification.case is SonicCase.POSITIVE_ACCEL:
        report["multiplier_certificate"] = verify_multiplier(flow).to_dict()
    if _wants(cfg, "csv"):
        write_csv(outdir / "background.csv", ["x1", "u", "rho", "c2", "mach", "k11", "k1", "du", "f"],
                  [flow.x, flow.u, flow.rho, flow.c2, flow.mach, flow.k11, flow.k1, flow.du, flow.f])
    if _wants(cfg, "json"):
        write_json(outdir / "background.json", report)
    emit_plot_data(outdir, {
        "velocity": (flow.x, flow.u, "background velocity", "x1", "u"),
        "mach": (flow.x, flow.mach, "background Mach number", "x1", "Mach"),
    }, [f for f in cfg.outputs.formats if f in ("dat", "svg")])
    return report


def run_basis(cfg: RunConfig, out: str | None = None) -> dict:
    basis = basis_from_config(cfg)
    outdir = _outdir(cfg, out)
    report = {
        "N": basis.N,
        "Q": basis.quadrature.order,
        "eigenvalues": basis.eigenvalues,
        "gram_deviation": float(np.max(np.abs(basis.gram() - np.eye(basis.N)))),
    }
    if _wants(cfg, "csv"):
        write_csv(outdir / "basis.csv", ["j", "lambda", "normalization"],
                  [np.arange(1, basis.N + 1), basis.eigenvalues, basis.normalization])
    if _wants(cfg, "json"):
        write_json(outdir / "basis.json", report)
    return report


def run_linear(cfg: RunConfig, out: str | None = None) -> dict:
    """Manufactured solve, extended-domain coincidence and the first Picard linear solve."""
    flow = background_from_config(cfg)
    basis = basis_from_config(cfg)
    s = cfg.sigma
    cert = verify_multiplier(flow)
    coeffs, _, amps = manufactured_problem(flow, basis, "cosine")
    direct = solve_linear(coeffs, basis, s.sigma0, s.levels, s.tol_sigma, d0=cert.d0)
    error = float(np.sqrt(l2r_sq((direct.A - amps) @ basis.values, flow.x, basis)))
    problem = extend_problem(coeffs, extend_background(flow), basis)
    extended = solve_extended(problem, basis, s.sigma0, s.levels, s.tol_sigma)
    gap = float(np.sqrt(l2r_sq((extended.A[: flow.M] - direct.A) @ basis.values, flow.x, basis)))

    inlet = inlet_from_config(cfg)
    psi0 = build_psi0(inlet, flow.x, basis, flow.gas.L0)
    zero = Field2D.from_modes(np.zeros((flow.M, basis.N)), flow.x, basis)
    first = solve_linear(coefficients_from_state(zero, psi0, inlet.eps, flow, basis), basis,
                         s.sigma0, s.levels, s.tol_sigma, d0=cert.d0, relative=True)
    report = {
        "manufactured": {"l2r_error": error, "certificate": direct.certificate.to_dict()},
        "extended": {"l2r_gap_on_D": gap, "k0": problem.k0, "L2": problem.L2,
                     "certificate": extended.certificate.to_dict()},
        "first_picard_step": {"eps": inlet.eps, "certificate": first.certificate.to_dict()},
    }
    outdir = _outdir(cfg, out)
    if _wants(cfg, "json"):
        write_json(outdir / "linear_solve.json", report)
    return report


def _norm_dict(field: Field2D) -> dict:
    rep = weighted_norms(field, 4)
    return {f"h{m}r": rep.norm(m) for m in range(5)}


def solve_report(sol: TransonicSolution, front=None) -> dict:
    flow = sol.flow
    front = sonic_front(sol.psi1, flow) if front is None else front
    resid = nonlinear_residual(sol.psi1, flow)
    return {
        "fixed_point": sol.report.to_dict(),
        "norms_psi1": _norm_dict(sol.psi1),
        "norms_psi": _norm_dict(sol.psi),
        "residual": {"l2r": resid.l2r, "max_abs": resid.max_abs},
        "sonic_front": front.to_dict(),
    }


def run_solve(cfg: RunConfig, out: str | None = None, eps: float | None = None) -> tuple[dict, TransonicSolution]:
    flow = background_from_config(cfg)
    basis = basis_from_config(cfg)
    cert = verify_multiplier(flow)
    sol = fixed_point_solve(inlet_from_config(cfg, eps), flow, basis, params_from_config(cfg), d0=cert.d0)
    front = sonic_front(sol.psi1, flow)
    report = solve_report(sol, front)
    report["multiplier_certificate"] = cert.to_dict()
    outdir = _outdir(cfg, out)
    if _wants(cfg, "csv"):
        fields = physical_fields(sol.psi1, flow)
        names = ["x1", "r", "u1", "ur", "rho", "mach"]
        write_csv(outdir / "solution.csv", names, [fields[n] for n in names])
        write_csv(outdir / "front.csv", ["r", "xi", "dxi"], [front.r, front.xi, front.dxi])
        psi1 = report["norms_psi1"]
        write_csv(outdir / "norms.csv", ["m", "norm"], [np.arange(5), [psi1[f"h{m}r"] for m in range(5)]])
    if _wants(cfg, "json"):
        write_json(outdir / "report.json", report)
    emit_plot_data(outdir, {"front": (front.xi, front.r, "sonic front", "x1", "r")},
                   [f for f in cfg.outputs.formats if f in ("dat", "svg")])
    return report, sol


def run_sweep(cfg: RunConfig, out: str | None = None) -> dict:
    flow = background_from_config(cfg)
    basis = basis_from_config(cfg)
    cert = verify_multiplier(flow)
    params = params_from_config(cfg)
    inlet = inlet_from_config(cfg)
    eps_list = cfg.fixed_point.sweep_eps
    with ThreadPoolExecutor(max_workers=min(thread_cap(), len(eps_list))) as pool:
        study = perturbation_scaling_study(inlet, eps_list, flow, basis, params, cert.d0, mapper=pool.map)
    outdir = _outdir(cfg, out)
    rows = study["rows"]
    if _wants(cfg, "csv"):
        cols = ["eps", "h2", "h4", "c1_norm", "iterations", "max_ratio"]
        write_csv(outdir / "sweep.csv", cols, [[row[c] for row in rows] for c in cols])
    if _wants(cfg, "json"):
        write_json(outdir / "sweep.json", study)
    return study


def run_verify(cfg: RunConfig, out: str | None = None, seed: int = 0) -> list:
    flow = background_from_config(cfg)
    results = run_all(flow, seed)
    outdir = _outdir(cfg, out)
    if _wants(cfg, "json"):
        write_json(outdir / "verify.json", {r.name: {"passed": r.passed, **r.detail} for r in results})
    return results
