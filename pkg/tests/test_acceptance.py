"""Acceptance criteria at their full budgets; each test prints one PASS/FAIL line."""

import itertools
import time

import numpy as np
import pytest

from conftest import random_smps
from smpskit.channelcore import expm_apply
from smpskit.market import (
    closure_residual,
    martingale_check,
    random_case2,
    reverse_engineer_case1,
    reverse_engineer_case2,
    shift_drift,
    solve_closure,
    thermo_limit_instance,
    thermodynamic_limit_check,
)
from smpskit.master import (
    LindbladGenerator,
    birth_death_generator,
    birth_death_marginals,
    build_L0,
    classical_rate_family,
    continuous_marginal_rate,
    discrete_marginal_evolution,
    random_birth_death_blocks,
    rk4,
    scalar_birth_death_blocks,
    unitality_residual,
)
from smpskit.metropolis import (
    IsingChain,
    detailed_balance_residual,
    gibbs_exact,
    gibbs_smps_form,
    metropolis_run,
    random_scan_kernel,
    stationarity_check,
    total_variation,
)
from smpskit.projection import (
    canonicalize,
    multitime_density,
    multitime_joint,
    project_state,
    random_projection_family,
    trace_last_slot,
    validate_family,
)
from smpskit.qsde import (
    CountingModel,
    DiffusiveModel,
    char_fn_check,
    char_fn_check_2d,
    counting_char_check,
    counting_exact,
    diffusive_weak_errors,
    girsanov_reference,
    girsanov_smps_residual,
    strong_error_scan,
)
from smpskit.rand import random_complex, random_density, random_hermitian
from smpskit.smps import (
    enumerate_joint,
    finite_memory_embedding,
    from_elementwise_positive,
    marginal_at,
    markovize_by_blocking,
)

PATHS = 100_000
DT = 1e-3


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {k}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def suite_instances():
    rng = np.random.default_rng(2024)
    out = []
    for i in range(50):
        D = (1, 2, 3)[i % 3]
        out.append(random_smps(rng, D=D, d=2, N=8, rank=1 + i % 2, site_dependent=i % 4 == 0))
    return out


def test_criterion_1_normalization(capsys):
    start = time.perf_counter()
    worst = max(abs(enumerate_joint(s)[1].sum() - 1) for s in suite_instances())
    elapsed = time.perf_counter() - start
    report(capsys, 1, worst <= 1e-9 and elapsed < 10,
           f"max |sum p - 1| = {worst:.2e} over 50 instances in {elapsed:.2f} s")


def test_criterion_2_oracle_equivalence(capsys):
    worst = 0.0
    for s in suite_instances():
        idx, p = enumerate_joint(s)
        for n in range(1, s.N + 1):
            brute = np.array([p[idx[:, n - 1] == x].sum() for x in range(s.d)])
            worst = max(worst, np.max(np.abs(marginal_at(s, n) - brute)))
            if n >= 2:
                worst = max(worst, np.max(np.abs(discrete_marginal_evolution(s, n) - brute)))
    rng = np.random.default_rng(7)
    T = rng.random((2, 2, 2))
    T /= T.sum(axis=-1, keepdims=True)
    p0 = rng.random(4)
    p0 /= p0.sum()
    N = 8
    fm_gap = 0.0
    s = finite_memory_embedding(T, p0, N - 2)
    idx, p = enumerate_joint(s)
    probs = dict(zip(map(tuple, idx), p))
    for traj in itertools.product((0, 1), repeat=N):
        chain = p0[traj[0] * 2 + traj[1]]
        for n in range(2, N):
            chain *= T[traj[n - 2], traj[n - 1], traj[n]]
        # the embedding emits the symbols after the initial block
        cond = finite_memory_embedding(T, np.eye(4)[traj[0] * 2 + traj[1]], N - 2)
        got = p0[traj[0] * 2 + traj[1]] * dict(zip(map(tuple, enumerate_joint(cond)[0]),
                                                    enumerate_joint(cond)[1]))[traj[2:]]
        fm_gap = max(fm_gap, abs(got - chain))
    # marginalizing the initial block gives the law of the emitted symbols
    emitted = np.zeros(2 ** (N - 2))
    for traj in itertools.product((0, 1), repeat=N):
        chain = p0[traj[0] * 2 + traj[1]]
        for n in range(2, N):
            chain *= T[traj[n - 2], traj[n - 1], traj[n]]
        emitted[int("".join(map(str, traj[2:])), 2)] += chain
    fm_gap = max(fm_gap, float(np.max(np.abs(emitted - np.array([probs[tuple(r)] for r in idx])))))
    ok = worst <= 1e-10 and fm_gap <= 1e-12
    report(capsys, 2, ok, f"marginal gap {worst:.2e}; finite-memory chain-rule gap {fm_gap:.2e}")


def test_criterion_3_form_mapping(capsys):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        b = rng.random((2, 2, 2)) * (rng.random((2, 2, 2)) > 0.2)
        b /= b.sum(axis=0).sum(axis=0)
        L, R = rng.random(2), rng.random(2) + 0.1
        s = from_elementwise_positive(b, L, R, n=6)
        direct = []
        for traj in itertools.product((0, 1), repeat=6):
            v = L.copy()
            for x in traj:
                v = b[x] @ v
            direct.append(R @ v)
        direct = np.array(direct) / np.sum(direct)
        _, p = enumerate_joint(s)
        worst = max(worst, float(np.max(np.abs(p / p.sum() - direct))))
    ck = 0.0
    passed = True
    for block in (1, 2, 3):
        b = rng.random((2, 2, 2)) * (rng.random((2, 2, 2)) > 0.2)
        b /= b.sum(axis=0).sum(axis=0)
        rep = markovize_by_blocking(from_elementwise_positive(b, rng.random(2), n=block), block)
        ck = max(ck, rep.ck_residual)
        passed = passed and rep.passed
    ok = worst <= 1e-12 and ck <= 1e-10 and passed
    report(capsys, 3, ok, f"elementwise joint gap {worst:.2e}; blocked Chapman-Kolmogorov residual {ck:.2e}")


def test_criterion_4_generators(capsys):
    rng = np.random.default_rng(4)
    unit = 0.0
    for d in (1, 2, 3, 4):
        for _ in range(5):
            g = LindbladGenerator(random_hermitian(d, rng), tuple(random_complex((d, d), rng) for _ in range(2)))
            unit = max(unit, unitality_residual(build_L0(g)))
    rate_sum = 0.0
    for _ in range(5):
        G = rng.random((4, 4))
        np.fill_diagonal(G, 0)
        G -= np.diag(G.sum(axis=0))
        fam = classical_rate_family(G)
        L = fam.total()
        unit = max(unit, unitality_residual(L, "schrodinger"))
        for t in (0.0, 0.5, 1.0):
            rate_sum = max(rate_sum, abs(continuous_marginal_rate(L, fam, np.diag(rng.dirichlet(np.ones(4))), t).sum()))
    bd = birth_death_generator(*random_birth_death_blocks(2, 6, rng))
    unit = max(unit, unitality_residual(bd.L, "schrodinger"))
    rho = bd.initial_state(np.eye(7)[1])
    for t in (0.0, 0.5, 1.0):
        rate_sum = max(rate_sum, abs(continuous_marginal_rate(bd.L, bd.family, rho, t).sum()))

    n_max = 20
    lam = np.full(n_max, 1.0)
    mu = 1.5 * np.arange(1, n_max + 1)
    model = birth_death_generator(*scalar_birth_death_blocks(lam, mu))
    w = np.eye(n_max + 1)[5]
    times = np.linspace(0, 2, 21)
    run = birth_death_marginals(model, model.initial_state(w), times)

    def f(_t, p):
        out = np.zeros_like(p)
        out[:-1] -= lam * p[:-1]
        out[1:] += lam * p[:-1]
        out[1:] -= mu * p[1:]
        out[:-1] += mu * p[1:]
        return out

    p, t_prev, bd_gap = w.copy(), 0.0, 0.0
    for t, marg in zip(times, run.marginals):
        if t > t_prev:
            p = rk4(f, p, t, 1e-4, t0=t_prev)
            t_prev = t
        bd_gap = max(bd_gap, float(np.max(np.abs(marg - p))))
    ok = unit <= 1e-12 and rate_sum <= 1e-10 and bd_gap <= 1e-8 and run.truncation_ok
    report(capsys, 4, ok, f"unitality {unit:.2e}; rate sums {rate_sum:.2e}; birth-death vs RK4 {bd_gap:.2e}")


def _diffusive_d2():
    rng = np.random.default_rng(5)
    H = random_hermitian(2, rng, 0.5)
    g = LindbladGenerator(H, (0.5 * random_complex((2, 2), rng),))
    X = np.array([[1.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]])
    return DiffusiveModel(g, 0.5 * random_complex((2, 2), rng), 0.2, 0.8, random_density(2, rng), X)


def test_criterion_5_characteristic_functions(capsys):
    lams, times = [0.5, 1.0, 2.0], [0.5, 1.0]
    model = _diffusive_d2()
    start = time.perf_counter()
    z2 = max(r.max_abs_z for r in char_fn_check(model, lams, times, PATHS, seed=51, dt=DT))
    t2 = time.perf_counter() - start
    start = time.perf_counter()
    z1 = max(r.max_abs_z for r in char_fn_check_2d(model, lams, times, PATHS, seed=52, dt=DT))
    t1 = time.perf_counter() - start
    X = np.array([[1.5, 0.3], [0.3, 0.5]])
    counting = CountingModel(random_hermitian(2, np.random.default_rng(6), 0.5), [[0, 1], [1, 0]], 1.5,
                             random_density(2, np.random.default_rng(7)), X)
    zc = max(r.max_abs_z for t in times for r in counting_char_check(counting, lams, t, PATHS, seed=53))
    poisson = CountingModel([[0.0]], [[1.0]], 2.0)
    law_gap = max(abs(counting_exact(poisson, lam, t) - np.exp(2.0 * t * (np.exp(1j * lam) - 1)))
                  for lam in lams for t in times)
    zp = max(r.max_abs_z for t in times for r in counting_char_check(poisson, lams, t, PATHS, seed=54))
    zmax = max(z1, z2, zc, zp)
    ok = zmax <= 3 and law_gap <= 1e-12 and max(t1, t2) < 60 * len(lams) * len(times)
    report(capsys, 5, ok, f"max |z|: single driver {z2:.2f}, two drivers {z1:.2f}, counting {zc:.2f}, "
                          f"Poisson {zp:.2f}; Poisson law gap {law_gap:.1e}; runtimes {t2:.1f}/{t1:.1f} s")


def test_criterion_6_girsanov(capsys):
    rep = girsanov_reference(lambda t: 0.5, 1.0, DT, PATHS, seed=61)
    rep_t = girsanov_reference(lambda t: 0.3 + 0.4 * np.sin(3 * t), 1.0, DT, PATHS, seed=62)
    gap = girsanov_smps_residual(0.5, 1.0, DT, 10_000, seed=63)
    zmax = max(np.max(np.abs(r.z_mean)).item() for r in (rep, rep_t))
    zvar = max(np.max(np.abs(r.z_var)).item() for r in (rep, rep_t))
    ok = rep.passed and rep_t.passed and gap <= 1e-10
    report(capsys, 6, ok, f"max |z| mean {zmax:.2f}, variance {zvar:.2f}; sMPS pathwise gap {gap:.2e}")


def test_criterion_7_projection(capsys):
    rng = np.random.default_rng(7)
    choi, state_eig, state_tr, proj, reasm = np.inf, np.inf, 0.0, 0.0, 0.0
    for i in range(50):
        fam = random_projection_family(4, 2, rng, rank=1 + i % 3)
        rep = validate_family(fam.superops())
        choi = min(choi, rep.choi_min_eig)
        rho = project_state(fam, random_density(4, rng))
        state_eig = min(state_eig, np.linalg.eigvalsh(rho).min())
        state_tr = max(state_tr, abs(np.trace(rho) - 1))
        g = LindbladGenerator(random_hermitian(4, rng), (0.3 * random_complex((4, 4), rng),))
        gamma = expm_apply(build_L0(g), 0.5)
        sigma = random_density(4, rng)
        j3 = multitime_joint(fam, gamma, sigma, 3)
        j2 = multitime_joint(fam, gamma, sigma, 2)
        proj = max(proj, float(np.max(np.abs(trace_last_slot(j3) - j2))))
        state_eig = min(state_eig, np.linalg.eigvalsh(multitime_density(j3)).min())
        can = canonicalize(fam.superops())
        reasm = max(reasm, float(np.max(np.abs(can.superops() - fam.superops()))))
    ok = choi >= -1e-10 and state_eig >= -1e-10 and state_tr <= 1e-10 and proj <= 1e-10 and reasm <= 1e-10
    report(capsys, 7, ok, f"Choi min eig {choi:.2e}; state min eig {state_eig:.2e}; trace error {state_tr:.2e}; "
                          f"projective residual {proj:.2e}; reassembly {reasm:.2e}")


@pytest.mark.parametrize("beta", [0.3, 0.7])
def test_criterion_8_ising(capsys, beta):
    chain = IsingChain(6, beta)
    db = max(detailed_balance_residual(chain, random_scan_kernel(chain, rule)) for rule in ("glauber", "metropolis"))
    st = max(stationarity_check(chain, rule=rule) for rule in ("glauber", "metropolis"))
    run = metropolis_run(chain, 1_000_000, 10_000, seed=81)
    tv = total_variation(run.empirical(), gibbs_exact(chain))
    form = gibbs_smps_form(chain).max_deviation
    ok = db <= 1e-12 and st <= 1e-12 and tv <= 0.05 and form <= 1e-12
    report(capsys, 8, ok, f"beta={beta}: detailed balance {db:.1e}, stationarity {st:.1e}, TV {tv:.4f}, "
                          f"sMPS form {form:.1e}")


def test_criterion_9_market(capsys):
    c1 = reverse_engineer_case1(np.random.default_rng(91))
    c2 = reverse_engineer_case2(np.random.default_rng(92))
    residual = 0.0
    for case in (c1, c2):
        sol = solve_closure(case.with_X(None))
        residual = max(residual, sol.residual, closure_residual(case))
    m1 = martingale_check(c1, n_paths=PATHS, seed=93, dt=DT)
    m2 = martingale_check(c2, n_paths=PATHS, seed=94, dt=DT)
    n1 = martingale_check(shift_drift(c1, 0.5), n_paths=PATHS, seed=95, dt=DT)
    n2 = martingale_check(shift_drift(c2, 0.5), n_paths=PATHS, seed=96, dt=DT)
    naive = martingale_check(reverse_engineer_case1(np.random.default_rng(97), condition="naive"),
                               n_paths=PATHS, seed=98, dt=DT)
    th = thermodynamic_limit_check(thermo_limit_instance(np.random.default_rng(99)), dt=DT, n_paths=PATHS, seed=100)
    infeasible = not thermodynamic_limit_check(random_case2(np.random.default_rng(101))).feasible
    ok = (residual <= 1e-10 and m1.passed and m2.passed and n1.max_abs_z > 4 and n2.max_abs_z > 4
          and th.passed and infeasible)
    report(capsys, 9, ok, f"closure residual {residual:.1e}; martingale max |z| {m1.max_abs_z:.2f}/{m2.max_abs_z:.2f}; "
                          f"negative controls |z| {n1.max_abs_z:.1f}/{n2.max_abs_z:.1f} "
                          f"(naive Case 1 condition {naive.max_abs_z:.1f}); thermodynamic limit: strong error "
                          f"{th.strong_error:.4f} <= {th.strong_bound:.4f}, lag-1 z {th.autocorr_z:.2f}")


def test_criterion_10_convergence_orders(capsys):
    scalar = DiffusiveModel(LindbladGenerator([[0.4]], ([[0.5j]],)), [[0.3 + 0.1j]], 0.2, 1.0)
    errs = strong_error_scan(scalar, 1.0, [1 / 512, 1 / 256, 1 / 128, 1 / 64], 20_000, seed=101)
    strong = errs[1:] / errs[:-1]
    rng = np.random.default_rng(102)
    H = random_hermitian(2, rng, 0.5)
    C = 0.5 * random_complex((2, 2), rng)
    X = np.array([[1.3, 0.2], [0.2, 0.7]])
    weak_errs = diffusive_weak_errors(H, C, random_density(2, rng), X, 1.0, 1.0, [1 / 50, 1 / 100, 1 / 200])
    weak = weak_errs[:-1] / weak_errs[1:]
    ok = np.all(np.abs(strong - np.sqrt(2)) <= 0.15) and np.all(np.abs(weak - 2) <= 0.3)
    report(capsys, 10, bool(ok), f"strong ratios {np.round(strong, 3).tolist()}; weak ratios {np.round(weak, 3).tolist()}")
