"""Command-line entry point: ``smpskit <command> --model FILE [options]``.

Each command prints a JSON summary ``{command, params, pass, metrics}`` on
stdout and, with ``--out``, writes a CSV (or JSON) artifact.  Exit codes:
0 success, 1 validation failure, 2 numerical-acceptance failure, 3 I/O or
parse error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import itertools
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import jsonio, market, master, metropolis, projection, qsde, rand, smps
from .channelcore import expm_apply, min_eig, vec
from .errors import DimensionError, NumericalValidityError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_ACCEPTANCE, EXIT_IO = 0, 1, 2, 3
Z_TOL = 3.0


@dataclass
class Result:
    passed: bool | None
    metrics: dict
    header: list[str] | None = None
    rows: list | None = None
    artifact: dict | None = None  # JSON artifact instead of CSV
    params: dict = field(default_factory=dict)


class UsageError(ValidationError):
    pass


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _fmt(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str, header: list[str], rows: list, with_header: bool) -> None:
    with open(path, "w", newline="") as f:
        if with_header:
            f.write(f"# generated {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _model(args, kinds: tuple[str, ...]):
    if not args.model:
        raise UsageError("--model is required for this command")
    kind, model, raw = jsonio.load_model(args.model)
    if kind not in kinds:
        raise UsageError(f"command {args.command!r} expects a model of kind {'/'.join(kinds)}, got {kind!r}")
    return kind, model, raw


def _t(args, default: float = 1.0) -> float:
    return default if args.t is None else args.t


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


SMPS_KINDS = ("smps", "markov", "finite_memory", "elementwise")


# --- sMPS commands -------------------------------------------------------------------------


def cmd_validate(args) -> Result:
    if not args.model:
        raise UsageError("--model is required for this command")
    kind, model, raw = jsonio.load_model(args.model)
    tol = args.tol
    if kind in SMPS_KINDS:
        rep = smps.validate(model, tol)
        return Result(rep.passed, {"kind": kind, "max_site_residual": max(rep.site_residuals),
                                   "total_probability": rep.total_probability, "messages": rep.messages})
    if kind == "projection":
        rep = projection.validate_family(model.superops(), tol)
        return Result(rep.passed, {"kind": kind, "choi_min_eig": rep.choi_min_eig,
                                   "trace_residual": rep.trace_residual, "messages": rep.messages})
    if kind == "rates":
        master.check_rate_matrix(jsonio.decode_real(raw["G"], "G"))
        return Result(True, {"kind": kind})
    if kind == "birth_death":
        model_bd = _birth_death(raw, tol)
        res = master.unitality_residual(model_bd.L, "schrodinger")
        return Result(res <= 1e-12, {"kind": kind, "consistency_residual": model_bd.consistency_residual,
                                     "trace_preservation_residual": res})
    if kind in ("market1", "market2"):
        metrics = {"kind": kind, "has_X": model.X is not None}
        ok = True
        if model.X is not None:
            metrics["closure_residual"] = market.closure_residual(model)
            ok = metrics["closure_residual"] <= tol
        return Result(ok, metrics)
    g = model if kind == "generator" else (model.g if kind == "diffusive" else None)
    if g is not None:
        res = master.unitality_residual(master.build_L0(g))
        return Result(res <= 1e-12, {"kind": kind, "unitality_residual": res})
    return Result(True, {"kind": kind})


def cmd_joint(args) -> Result:
    _, s, _ = _model(args, SMPS_KINDS)
    idx, p = smps.enumerate_joint(s)
    alpha = np.asarray(s.alphabet, dtype=object)
    rows = [[*alpha[i], pr] for i, pr in zip(idx, p)]
    total = float(p.sum())
    return Result(abs(total - 1) <= args.tol, {"total_probability": total, "n_trajectories": len(p)},
                  [f"x{n}" for n in range(1, s.N + 1)] + ["probability"], rows)


def cmd_marginal(args) -> Result:
    _, s, _ = _model(args, SMPS_KINDS)
    marg = np.array([smps.marginal_at(s, n) for n in range(1, s.N + 1)])
    worst = 0.0
    disc = [marg[0]] + [master.discrete_marginal_evolution(s, n) for n in range(2, s.N + 1)]
    worst = max(worst, float(np.max(np.abs(np.array(disc) - marg))))
    metrics = {"discrete_evolution_gap": worst}
    if s.d**s.N <= 2**16:
        idx, p = smps.enumerate_joint(s)
        brute = np.array([[p[idx[:, n] == x].sum() for x in range(s.d)] for n in range(s.N)])
        metrics["enumeration_gap"] = float(np.max(np.abs(brute - marg)))
        worst = max(worst, metrics["enumeration_gap"])
    rows = [[n + 1, *marg[n]] for n in range(s.N)]
    return Result(worst <= args.tol, metrics, ["site"] + [f"p_{x}" for x in s.alphabet], rows)


def cmd_sample(args) -> Result:
    _, s, _ = _model(args, SMPS_KINDS)
    traj = smps.sample_trajectories(s, args.paths, args.seed)
    return Result(None, {"n_paths": args.paths}, [f"x{n}" for n in range(1, s.N + 1)], traj.tolist())


def _direct_joint(kind: str, raw: dict, traj: tuple) -> float:
    """Chain-rule probability of a trajectory of symbol indices."""
    if kind == "markov":
        T, pi = jsonio.decode_real(raw["T"]), jsonio.decode_real(raw["pi"])
        p = pi[traj[0]]
        for a, b in zip(traj, traj[1:]):
            p *= T[b, a]
        return float(p)
    if kind == "finite_memory":
        T, p0 = jsonio.decode_real(raw["T"]), jsonio.decode_real(raw["p0"])
        # the emitted symbols follow a hidden initial k-block drawn from p0
        k, d = T.ndim - 1, T.shape[0]
        total = 0.0
        for block in itertools.product(range(d), repeat=k):
            full = block + tuple(traj)
            p = p0.reshape((d,) * k)[block]
            for n in range(k, len(full)):
                p *= T[full[n - k:n + 1]]
            total += p
        return float(total)
    B, L = jsonio.decode_real(raw["B"]), jsonio.decode_real(raw["L"])
    R = np.ones(B.shape[1]) if raw.get("R") is None else jsonio.decode_real(raw["R"])
    v = L / L.sum()
    for x in traj:
        v = B[x] @ v
    return float(R @ v)


def cmd_embed(args) -> Result:
    kind, s, raw = _model(args, ("markov", "finite_memory", "elementwise"))
    rep = smps.validate(s, args.tol)
    metrics = {"bond_dimension": s.D, "validation_passed": rep.passed}
    ok = rep.passed
    if s.d**s.N <= 4096:
        idx, p = smps.enumerate_joint(s)
        gap = max(abs(p[i] - _direct_joint(kind, raw, tuple(row))) for i, row in enumerate(idx))
        metrics["chain_rule_gap"] = float(gap)
        ok = ok and gap <= 1e-12
    return Result(ok, metrics, artifact=jsonio.encode_smps(s))


def cmd_block(args) -> Result:
    _, s, _ = _model(args, SMPS_KINDS)
    rep = smps.markovize_by_blocking(s, args.block, args.tol)
    metrics = {k: getattr(rep, k) for k in ("kraus_rank", "rank_ok", "structure_residual", "markov_residual",
                                            "ck_residual", "transition_residual", "coarse_grain_residual")}
    metrics["messages"] = rep.messages
    T = rep.transition
    rows = [[i, *T[i]] for i in range(T.shape[0])]
    return Result(rep.passed, metrics, ["from_state"] + [f"to_{j}" for j in range(T.shape[1])], rows)


def cmd_decay(args) -> Result:
    _, s, _ = _model(args, SMPS_KINDS)
    gaps = [int(g) for g in _floats(args.gaps)]
    scan = smps.correlation_decay_scan(s, args.k, args.l, gaps)
    env = [scan.second_eigenvalue**g for g in gaps]
    rows = [[g, d, e] for g, d, e in zip(scan.gaps, scan.distances, env)]
    if np.all(scan.distances <= 1e-12):
        ok = True
    elif scan.fitted_rate is not None and np.isfinite(scan.spectral_rate):
        ok = 0.5 <= scan.fitted_rate / scan.spectral_rate <= 2.0
    else:
        ok = None
    return Result(ok, {"second_eigenvalue": scan.second_eigenvalue, "spectral_rate": scan.spectral_rate,
                         "fitted_rate": scan.fitted_rate}, ["gap", "l1_distance", "lambda2_power"], rows)


# --- master equations ----------------------------------------------------------------------


def cmd_master(args) -> Result:
    kind, model, raw = _model(args, ("rates", "generator"))
    if kind == "generator":
        res = master.unitality_residual(master.build_L0(model))
        return Result(res <= 1e-12, {"unitality_residual": res})
    G = master.check_rate_matrix(jsonio.decode_real(raw["G"], "G"))
    p0 = jsonio.decode_real(raw["p0"], "p0")
    fam = master.classical_rate_family(G)
    L = fam.total()
    rho = np.diag(p0).astype(complex)
    times = np.linspace(0, _t(args, 2.0), args.steps + 1)
    rows, gap, rate_sum, unit = [], 0.0, 0.0, master.unitality_residual(L, "schrodinger")
    for t in times:
        p = master.continuous_marginal(L, fam, rho, t)
        rates = master.continuous_marginal_rate(L, fam, rho, t)
        ref = master.classical_master_reference(G, p0, t)
        gap = max(gap, float(np.max(np.abs(p - ref))))
        rate_sum = max(rate_sum, abs(float(rates.sum())))
        rows.append([t, *p, *rates])
    d = len(p0)
    ok = gap <= 1e-8 and rate_sum <= 1e-10 and unit <= 1e-12
    return Result(ok, {"rk4_gap": gap, "max_rate_sum": rate_sum, "trace_preservation_residual": unit},
                  ["t"] + [f"p_{k}" for k in range(d)] + [f"rate_{k}" for k in range(d)], rows)


def _birth_death(raw: dict, tol: float) -> master.BirthDeathModel:
    dec = lambda key: [jsonio.decode_complex(g, key) for g in raw[key]]  # noqa: E731
    try:
        return master.birth_death_generator(dec("G_diag"), dec("G_up"), dec("G_down"), max(tol, 1e-10))
    except KeyError as e:
        raise jsonio.ModelFormatError(f"birth_death model is missing {e}") from None


def cmd_birthdeath(args) -> Result:
    _, _, raw = _model(args, ("birth_death",))
    model = _birth_death(raw, args.tol)
    w = jsonio.decode_real(raw.get("level_weights", [1.0] + [0.0] * model.n_max), "level_weights")
    internal = None if raw.get("internal") is None else jsonio.decode_complex(raw["internal"], "internal")
    rho0 = model.initial_state(w, internal)
    times = np.linspace(0, _t(args, 2.0), args.steps + 1)
    run = master.birth_death_marginals(model, rho0, times)
    rk = master.birth_death_marginals(model, rho0, times, method="rk4")
    gap = float(np.max(np.abs(run.marginals - rk.marginals)))
    norm = float(np.max(np.abs(run.marginals.sum(axis=1) - 1)))
    ok = run.truncation_ok and gap <= 1e-8 and norm <= 1e-10
    rows = [[t, *m] for t, m in zip(times, run.marginals)]
    return Result(ok, {"rk4_gap": gap, "normalization_error": norm, "tail_mass": run.tail_mass,
                       "messages": run.messages}, ["t"] + [f"p_{n}" for n in range(model.n_max + 1)], rows)


# --- continuum limits ----------------------------------------------------------------------


CHAR_HEADER = ["t", "lam", "mc_re", "mc_im", "exact_re", "exact_im", "se_re", "se_im", "z"]


def _char_rows(results) -> tuple[list, float]:
    rows = [[r.t, r.lam, r.mc.real, r.mc.imag, r.exact.real, r.exact.imag, r.se_re, r.se_im, r.max_abs_z]
            for r in results]
    return rows, max(r.max_abs_z for r in results)


def cmd_qsde(args) -> Result:
    _, model, _ = _model(args, ("diffusive",))
    T = _t(args)
    times = np.linspace(T / args.steps, T, args.steps)
    sim = qsde.simulate_diffusive(model, T, args.dt, args.paths, args.seed, times)
    rows = []
    for j, t in enumerate(times):
        rows.append(qsde._mc_compare(sim.Z[j], qsde.char_exact(model, 0.0, t), 0.0, t))
    out, zmax = _char_rows(rows)
    return Result(zmax <= Z_TOL, {"max_abs_z": zmax}, CHAR_HEADER, out)


def cmd_charfn(args) -> Result:
    _, model, _ = _model(args, ("diffusive",))
    lams, times = _floats(args.lambdas), _floats(args.times)
    check = qsde.char_fn_check_2d if args.example == 1 else qsde.char_fn_check
    res = check(model, lams, times, args.paths, args.seed, args.dt)
    rows, zmax = _char_rows(res)
    return Result(zmax <= Z_TOL, {"max_abs_z": zmax, "example": args.example}, CHAR_HEADER, rows)


def cmd_counting(args) -> Result:
    _, model, _ = _model(args, ("counting",))
    res = qsde.counting_char_check(model, _floats(args.lambdas), _t(args), args.paths, args.seed)
    rows, zmax = _char_rows(res)
    return Result(zmax <= Z_TOL, {"max_abs_z": zmax}, CHAR_HEADER, rows)


def cmd_girsanov(args) -> Result:
    T, theta = _t(args), args.theta
    rep = qsde.girsanov_reference(lambda s: theta, T, args.dt, args.paths, args.seed)
    gap = qsde.girsanov_smps_residual(theta, T, args.dt, min(args.paths, 10_000), args.seed)
    rows = [list(r) for r in zip(rep.times, rep.weighted_mean, rep.se_mean, rep.weighted_var, rep.se_var,
                                 rep.z_mean, rep.z_var)]
    return Result(rep.passed and gap <= 1e-10, {"smps_pathwise_gap": gap, "mean_Z": rep.mean_Z, "z_Z": rep.z_Z},
                  ["t", "weighted_mean", "se_mean", "weighted_var", "se_var", "z_mean", "z_var"], rows)


# --- projections ---------------------------------------------------------------------------


def _projection_inputs(raw: dict, fam: projection.ProjectionFamily):
    sigma = (np.eye(fam.n_in) / fam.n_in if raw.get("sigma") is None
             else jsonio.decode_complex(raw["sigma"], "sigma"))
    g = None
    if raw.get("H") is not None:
        g = master.LindbladGenerator(jsonio.decode_complex(raw["H"], "H"),
                                     tuple(jsonio.decode_complex(r, "Rs") for r in raw.get("Rs", [])))
    return sigma, g


def cmd_project(args) -> Result:
    _, fam, raw = _model(args, ("projection",))
    sigma, g = _projection_inputs(raw, fam)
    rep = projection.validate_family(fam.superops(), args.tol)
    if g is None:
        times = np.array([0.0])
        states = projection.project_state(fam, sigma)[None]
    else:
        times = np.linspace(0, _t(args), args.steps + 1)
        states = projection.evolve_projected(fam, g, sigma, times)
    worst_eig = min(min_eig(s) for s in states)
    trace_err = max(abs(np.trace(s) - 1) for s in states)
    ok = rep.passed and worst_eig >= -args.tol and trace_err <= args.tol
    n = fam.n_out
    header = ["t"] + [f"{part}_{i}{j}" for i, j in itertools.product(range(n), repeat=2) for part in ("re", "im")]
    rows = [[t, *np.stack([s.real, s.imag], axis=-1).ravel()] for t, s in zip(times, states)]
    return Result(ok, {"choi_min_eig": rep.choi_min_eig, "state_min_eig": worst_eig, "trace_error": trace_err,
                       "messages": rep.messages}, header, rows)


def cmd_multitime(args) -> Result:
    _, fam, raw = _model(args, ("projection",))
    sigma, g = _projection_inputs(raw, fam)
    if g is None:
        raise UsageError("multitime needs a generator (H, Rs) in the projection model")
    gamma = expm_apply(master.build_L0(g), _t(args))
    N = args.N
    joint = projection.multitime_joint(fam, gamma, sigma, N)
    dens = projection.multitime_density(joint)
    psd = min_eig(dens)
    trace_err = abs(np.trace(dens) - 1)
    proj = 0.0
    if N > 1:
        lower = projection.multitime_joint(fam, gamma, sigma, N - 1)
        proj = float(np.max(np.abs(projection.trace_last_slot(joint) - lower)))
    ok = psd >= -args.tol and trace_err <= args.tol and proj <= args.tol
    rows = [[*idx, joint[idx].real, joint[idx].imag] for idx in itertools.product(range(fam.n_out), repeat=2 * N)]
    header = [f"{c}{k}" for k in range(1, N + 1) for c in ("i", "j")] + ["re", "im"]
    return Result(ok, {"min_eig": psd, "trace_error": float(trace_err), "projective_residual": proj},
                  header, rows)


# --- Ising ---------------------------------------------------------------------------------


def cmd_ising(args) -> Result:
    chain = metropolis.IsingChain(args.N, args.beta)
    run = metropolis.metropolis_run(chain, args.steps, args.burn_in, args.seed, args.kernel)
    metrics: dict = {"acceptance_rate": run.acceptance_rate, "mean_magnetization": run.mean_magnetization,
                     "se_magnetization": run.se_magnetization, "mean_energy": run.mean_energy}
    ok = None
    if args.N <= metropolis.MAX_KERNEL_N:
        K = metropolis.sweep_kernel(chain, args.kernel)
        tv = metropolis.total_variation(run.empirical(), metropolis.gibbs_exact(chain))
        form = metropolis.gibbs_smps_form(chain)
        metrics.update(tv_distance=tv,
                       detailed_balance=metropolis.detailed_balance_residual(
                           chain, metropolis.random_scan_kernel(chain, args.kernel)),
                       stationarity=metropolis.stationarity_check(chain, K),
                       smps_form_deviation=form.max_deviation, diagonal_form_tv=form.diagonal_form_tv)
        ok = (tv <= 0.05 and metrics["detailed_balance"] <= 1e-12 and metrics["stationarity"] <= 1e-12
              and form.max_deviation <= 1e-12)
    thin = max(1, args.thin)
    rows = [[t + 1, run.magnetization[t], run.energy[t]] for t in range(thin - 1, args.steps, thin)]
    return Result(ok, metrics, ["step", "magnetization", "energy"], rows)


# --- market --------------------------------------------------------------------------------


def _market_with_X(model, condition: str = "derived"):
    if model.X is not None:
        return model
    sol = market.solve_closure(model, condition)
    if not sol.solved:
        raise ValidationError(f"market model has no closure solution: {sol.message}")
    return model.with_X(sol.X)


def cmd_market_solve(args) -> Result:
    _, model, _ = _model(args, ("market1", "market2"))
    sol = market.solve_closure(model.with_X(None), args.condition)
    metrics = {"message": sol.message, "kernel_dim": sol.kernel_dim, "smallest_singular": sol.smallest_singular,
               "residual": sol.residual, "psd": sol.psd, "min_eig": sol.min_eig}
    if sol.solved and model.X is not None:
        ref = model.X / np.trace(model.X).real
        metrics["recovery_gap"] = float(np.max(np.abs(sol.X - ref)))
    ok = sol.solved and sol.residual <= args.tol
    artifact = jsonio.encode_market(model.with_X(sol.X)) if sol.solved else None
    return Result(ok, metrics, artifact=artifact)


def cmd_market_check(args) -> Result:
    _, model, _ = _model(args, ("market1", "market2"))
    model = _market_with_X(model)
    if args.violate:
        model = market.shift_drift(model, args.violate)
    rep = market.martingale_check(model, market.default_times(_t(args)), args.paths, args.seed, args.dt)
    metrics = {"max_abs_z": rep.max_abs_z, "target": rep.target, "n_nonpositive": rep.n_nonpositive,
               "negative_control": bool(args.violate)}
    if rep.moment is not None:
        metrics.update(moment=rep.moment, moment_se=rep.moment_se)
    ok = rep.max_abs_z > 4 if args.violate else rep.passed
    rows = [list(r) for r in zip(rep.times, rep.mean, rep.se, rep.z)]
    return Result(ok, metrics, ["t", "E[DSZ]", "se", "z"], rows)


def cmd_thermo_limit(args) -> Result:
    _, model, _ = _model(args, ("market2",))
    rep = market.thermodynamic_limit_check(model.with_X(None), _t(args), args.dt, args.paths, args.seed)
    metrics = {k: getattr(rep, k) for k in ("feasible", "message", "kappa", "kappa_expected",
                                            "proportionality_residual", "closure_residual", "strong_error",
                                            "strong_bound", "autocorr", "autocorr_se", "autocorr_z",
                                            "smallest_singular")}
    rows = [] if rep.autocorr_table is None else [[int(r[0]), *r[1:]] for r in rep.autocorr_table]
    return Result(rep.passed, metrics, ["lag", "autocorr", "se", "z"], rows)


# --- parser --------------------------------------------------------------------------------


COMMANDS: dict[str, tuple[Callable, str]] = {
    "validate": (cmd_validate, "validate any model file"),
    "joint": (cmd_joint, "enumerate the joint law of an sMPS"),
    "marginal": (cmd_marginal, "single-site marginals with oracle comparison"),
    "sample": (cmd_sample, "draw trajectories"),
    "embed": (cmd_embed, "embed a classical chain as an sMPS (JSON artifact)"),
    "block": (cmd_block, "Markovize an element-wise positive chain by blocking"),
    "decay": (cmd_decay, "correlation decay scan"),
    "master": (cmd_master, "continuous-time marginals of a rate matrix"),
    "birthdeath": (cmd_birthdeath, "non-Markovian birth-death marginals"),
    "qsde": (cmd_qsde, "diffusive QSDE martingale check"),
    "charfn": (cmd_charfn, "characteristic-function identity"),
    "counting": (cmd_counting, "counting-process characteristic function"),
    "girsanov": (cmd_girsanov, "classical Girsanov reference"),
    "project": (cmd_project, "project a large-system state"),
    "multitime": (cmd_multitime, "multi-time projected joint"),
    "ising": (cmd_ising, "single-flip Ising chain sampler"),
    "market-solve": (cmd_market_solve, "solve the market closure condition (JSON artifact)"),
    "market-check": (cmd_market_check, "martingale check of a market model"),
    "thermo-limit": (cmd_thermo_limit, "thermodynamic-limit corollary check"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model JSON file")
    common.add_argument("--out", help="artifact path (CSV, or JSON for embed/market-solve)")
    common.add_argument("--seed", type=int, default=rand.DEFAULT_SEED)
    common.add_argument("--paths", type=int, default=100_000)
    common.add_argument("--dt", type=float, default=1e-3)
    common.add_argument("--t", type=float, default=None, help="final time")
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--no-header", action="store_true", help="omit the timestamp line in CSV output")

    parser = argparse.ArgumentParser(prog="smpskit", description="stochastic matrix product state toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "block":
            p.add_argument("--block", type=int, default=1)
        if name == "decay":
            p.add_argument("--k", type=int, default=1)
            p.add_argument("--l", type=int, default=1)
            p.add_argument("--gaps", default="1,2,3,4")
        if name in ("master", "birthdeath", "qsde", "project"):
            p.add_argument("--steps", type=int, default=20, help="number of time-grid intervals")
        if name in ("charfn", "counting"):
            p.add_argument("--lambdas", default="0.5,1,2")
        if name == "charfn":
            p.add_argument("--times", default="0.5,1")
            p.add_argument("--example", type=int, choices=(1, 2), default=2,
                           help="1: two-driver model, 2: single driver")
        if name == "girsanov":
            p.add_argument("--theta", type=float, default=0.5)
        if name == "multitime":
            p.add_argument("--N", type=int, default=2)
        if name == "ising":
            p.add_argument("--N", type=int, default=6)
            p.add_argument("--beta", type=float, default=0.7)
            p.add_argument("--steps", type=int, default=1_000_000)
            p.add_argument("--burn-in", type=int, default=10_000)
            p.add_argument("--kernel", choices=("glauber", "metropolis"), default="glauber")
            p.add_argument("--thin", type=int, default=1000, help="write every thin-th step")
        if name == "market-solve":
            p.add_argument("--condition", choices=("derived", "naive"), default="derived")
        if name == "market-check":
            p.add_argument("--violate", type=float, default=0.0,
                           help="shift alpha by this amount; the check then expects detected drift")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    rand.set_max_workers(args.threads)
    params = {k: v for k, v in vars(args).items() if k != "command"}
    handler = COMMANDS[args.command][0]
    try:
        res = handler(args)
        if args.out:
            if res.artifact is not None:
                jsonio.write_json(res.artifact, args.out)
            elif res.header is not None:
                write_csv(args.out, res.header, res.rows, not args.no_header)
    except (jsonio.ModelFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, DimensionError, NumericalValidityError, IndexError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        print(json.dumps(_jsonable({"command": args.command, "params": params, "pass": False,
                                    "metrics": {"error": str(e)}})))
        return EXIT_VALIDATION
    summary = {"command": args.command, "params": params, "pass": res.passed, "metrics": res.metrics}
    print(json.dumps(_jsonable(summary)))
    return EXIT_OK if res.passed in (None, True) else EXIT_ACCEPTANCE


if __name__ == "__main__":
    sys.exit(main())
