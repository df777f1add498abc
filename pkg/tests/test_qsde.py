import numpy as np
import pytest

from smpskit.channelcore import expm_apply, pairing_row, vec
from smpskit.errors import ValidationError
from smpskit.master import LindbladGenerator
from smpskit.qsde import (
    CountingModel,
    DiffusiveModel,
    char_exact,
    char_fn_check,
    char_fn_check_2d,
    char_generator,
    char_generator_2d,
    closed_form_diffusive,
    closed_form_value,
    commutator_norm,
    counting_char_check,
    counting_exact,
    counting_kraus_scheme,
    diffusive_weak_errors,
    discrete_char_function,
    girsanov_paths,
    girsanov_reference,
    girsanov_smps_model,
    simulate_counting,
    simulate_diffusive,
    simulate_diffusive_2d,
    strong_error_scan,
)
from smpskit.rand import random_complex, random_density, random_hermitian

PAULI_X = np.array([[0, 1], [1, 0]])


def random_model(rng, d=2, scale=0.5, m=0.2, sigma=0.8, X=None):
    H = random_hermitian(d, rng, scale)
    Rs = (scale * random_complex((d, d), rng),)
    R = scale * random_complex((d, d), rng)
    return DiffusiveModel(LindbladGenerator(H, Rs), R, m, sigma, random_density(d, rng), X)


def scalar_model(r=0.3 + 0.1j, m=0.2, sigma=1.0):
    return DiffusiveModel(LindbladGenerator([[0.4]], ([[0.5j]],)), [[r]], m, sigma)


def test_generator_at_zero_is_L0(rng):
    model = random_model(rng, m=0.0)
    np.testing.assert_array_equal(char_generator(model, 0.0), model.L0())


def test_scalar_generator_no_coupling():
    model = DiffusiveModel(LindbladGenerator([[0.0]]), [[0.0]], m=0.7, sigma=1.3)
    lam = 0.9
    assert abs(char_generator(model, lam)[0, 0] - (1j * 0.7 * lam - 0.5 * lam**2)) < 1e-15


def test_scalar_generator_matches_ito_exponent():
    # Z = exp(-K^2 t/2 + K B) with K = 2 sigma Re r + m; E[Z e^{i lam B}] = exp((i lam K - lam^2/2) t)
    model = scalar_model()
    K = 2 * 1.0 * 0.3 + 0.2
    lam = 1.3
    assert abs(char_generator(model, lam)[0, 0] - (1j * lam * K - 0.5 * lam**2)) < 1e-14


def test_generator_quadratic_in_lambda(rng):
    model = random_model(rng)
    g = [char_generator(model, lam) for lam in (0.0, 0.5, 1.0, 1.5)]
    d1 = g[2] - 2 * g[1] + g[0]
    d2 = g[3] - 2 * g[2] + g[1]
    assert np.max(np.abs(d1 - d2)) < 1e-10


def test_trivial_model_constant():
    model = DiffusiveModel(LindbladGenerator(np.zeros((2, 2))), np.zeros((2, 2)), 0.0, 1.0)
    sim = simulate_diffusive(model, 1.0, 0.01, 100, seed=1)
    np.testing.assert_allclose(sim.Z, 1.0)


def test_scalar_simulation_against_closed_form():
    model = scalar_model()
    sim = simulate_diffusive(model, 1.0, 1e-3, 2000, seed=3)
    exact = closed_form_value(model, 1.0, sim.B[0])
    err = np.mean(np.abs(sim.Z[0] - exact))
    assert err < 0.05
    sim_exp = simulate_diffusive(model, 1.0, 1e-3, 2000, seed=3, scheme="exponential")
    np.testing.assert_allclose(sim_exp.Z[0], exact, rtol=1e-10)
    np.testing.assert_array_equal(sim_exp.B, sim.B)


def test_strong_order_half():
    errs = strong_error_scan(scalar_model(), 1.0, [1 / 512, 1 / 256, 1 / 128, 1 / 64], 4000, seed=5)
    ratios = errs[1:] / errs[:-1]
    assert np.all(np.abs(ratios - np.sqrt(2)) < 0.15)


def test_martingale_property(rng):
    model = random_model(rng)
    sim = simulate_diffusive(model, 1.0, 1e-2, 20_000, seed=9, times=[0.5, 1.0])
    for row in sim.Z:
        se = row.real.std(ddof=1) / np.sqrt(len(row))
        assert abs(row.mean().real - 1) < 3 * se
        assert abs(row.mean().imag) < 1e-10


def test_determinism(rng):
    model = random_model(rng)
    a = simulate_diffusive(model, 0.5, 0.05, 300, seed=4)
    b = simulate_diffusive(model, 0.5, 0.05, 300, seed=4)
    np.testing.assert_array_equal(a.Z, b.Z)


def test_dt_guard(rng):
    with pytest.raises(ValidationError):
        simulate_diffusive(random_model(rng), 1.0, 0.2, 10)


def test_closed_form_time_zero(rng):
    model = random_model(rng)
    np.testing.assert_allclose(closed_form_diffusive(model, 0.0, 0.0), np.eye(4), atol=1e-15)


def commuting_model(rng):
    # normal R (diagonalizable by a unitary), H = 0, single jump operator R
    u, _ = np.linalg.qr(random_complex((2, 2), rng))
    R = u @ np.diag([0.6 + 0.2j, -0.3 + 0.5j]) @ u.conj().T
    return DiffusiveModel(LindbladGenerator(np.zeros((2, 2)), (R,)), R, 0.1, 0.7, random_density(2, rng))


def test_commuting_pathwise_agreement(rng):
    model = commuting_model(rng)
    assert commutator_norm(model) < 1e-12
    sim = simulate_diffusive(model, 1.0, 1e-4, 200, seed=2, scheme="exponential")
    exact = closed_form_value(model, 1.0, sim.B[0])
    assert np.max(np.abs(sim.Z[0] - exact)) < 1e-6


def test_char_fn_lambda_zero(rng):
    model = random_model(rng, X=np.eye(2))
    assert abs(char_exact(model, 0.0, 1.0) - 1) < 1e-12


def test_char_fn_scalar():
    res = char_fn_check(scalar_model(), [0.5, 1.0, 2.0], [1.0], 20_000, seed=8, dt=1e-2)
    for r in res:
        assert r.max_abs_z <= 3


def test_char_fn_random_d2(rng):
    res = char_fn_check(random_model(rng), [0.5, 1.0], [0.5, 1.0], 20_000, seed=10, dt=1e-2)
    assert max(r.max_abs_z for r in res) <= 3


def test_2d_sigma_zero_deterministic(rng):
    model = random_model(rng, sigma=0.0)
    sim = simulate_diffusive_2d(model, 1.0, 1e-3, 50, seed=1)
    expected = pairing_row(model.rho) @ expm_apply(model.L0(), 1.0) @ vec(model.X)
    assert np.max(np.abs(sim.Z[0] - expected)) < 1e-3
    assert np.all(np.abs(sim.Z[0] - sim.Z[0][0]) < 1e-14)


def test_2d_generator_scalar():
    model = scalar_model(r=0.3 + 0.4j, m=0.5, sigma=0.9)
    lam = 0.7
    assert abs(char_generator_2d(model, lam)[0, 0] - 1j * lam * 0.9 * (0.3 + 0.4j)) < 1e-14


def test_2d_char_and_martingale(rng):
    model = random_model(rng)
    res = char_fn_check_2d(model, [0.0, 0.5, 1.0], [1.0], 20_000, seed=12, dt=1e-2)
    assert max(r.max_abs_z for r in res) <= 3
    assert abs(res[0].exact - 1) < 1e-12


def test_counting_scalar_is_poisson():
    model = CountingModel([[0.0]], [[1.0]], 2.0)
    for lam in (0.5, 1.0, 2.0):
        assert abs(counting_exact(model, lam, 1.0) - np.exp(2.0 * (np.exp(1j * lam) - 1))) < 1e-12
    res = counting_char_check(model, [0.5, 1.0, 2.0], 1.0, 20_000, seed=1)
    assert max(r.max_abs_z for r in res) <= 3
    sim = simulate_counting(model, 1.0, 20_000, seed=1)
    assert abs(sim.N.mean() - 2.0) < 3 * np.sqrt(2.0 / 20_000)
    np.testing.assert_allclose(sim.Z, 1.0)


def test_counting_small_rate_no_jumps():
    sim = simulate_counting(CountingModel([[0.0]], [[1.0]], 1e-12), 1.0, 1000, seed=1)
    assert sim.N.sum() == 0


def test_counting_d2_swap(rng):
    X = np.array([[1.5, 0.3], [0.3, 0.5]])
    model = CountingModel(np.zeros((2, 2)), PAULI_X, 1.5, random_density(2, rng), X)
    res = counting_char_check(model, [0.5, 1.0, 2.0], 1.0, 20_000, seed=2)
    assert max(r.max_abs_z for r in res) <= 3


def test_counting_with_hamiltonian(rng):
    X = np.array([[1.2, 0.4j], [-0.4j, 0.8]])
    model = CountingModel(random_hermitian(2, rng), PAULI_X, 1.0, random_density(2, rng), X)
    res = counting_char_check(model, [0.7, 1.4], 1.0, 20_000, seed=3)
    assert max(r.max_abs_z for r in res) <= 3


def test_counting_eps_scheme_converges(rng):
    X = np.array([[1.2, 0.1], [0.1, 0.8]])
    model = CountingModel(random_hermitian(2, rng), PAULI_X, 1.0, random_density(2, rng), X)
    lam, t = 0.8, 1.0
    exact = counting_exact(model, lam, t)
    errs = []
    for n in (100, 200, 400):
        fam = counting_kraus_scheme(model, t / n)
        errs.append(abs(discrete_char_function(fam, model.rho, model.X, [1, np.exp(1j * lam)], n) - exact))
    assert 1.7 < errs[0] / errs[1] < 2.3
    assert 1.7 < errs[1] / errs[2] < 2.3


def test_discrete_diffusive_weak_order(rng):
    H = random_hermitian(2, rng, 0.5)
    C = 0.5 * random_complex((2, 2), rng)
    X = np.array([[1.3, 0.2], [0.2, 0.7]])
    errs = diffusive_weak_errors(H, C, random_density(2, rng), X, 1.0, 1.0, [1 / 50, 1 / 100, 1 / 200])
    ratios = errs[:-1] / errs[1:]
    assert np.all(np.abs(ratios - 2) < 0.3)


def test_girsanov_zero_theta():
    p = girsanov_paths(lambda t: 0.0, 1.0, 0.01, 100, seed=1)
    np.testing.assert_allclose(p.Z, 1.0)
    np.testing.assert_array_equal(p.B, p.B_tilde)


def test_girsanov_constant_theta():
    rep = girsanov_reference(lambda t: 0.5, 1.0, 0.01, 50_000, seed=2)
    assert rep.passed
    assert abs(rep.z_mean[-1]) <= 3


def test_girsanov_time_dependent():
    rep = girsanov_reference(lambda t: 0.3 + 0.4 * np.sin(3 * t), 1.0, 0.01, 50_000, seed=3)
    assert rep.passed


def test_girsanov_smps_identification():
    theta = 0.5
    p = girsanov_paths(lambda t: theta, 1.0, 0.01, 5000, seed=4)
    model = girsanov_smps_model(theta)
    z = closed_form_value(model, 1.0, p.B[-1])
    assert np.max(np.abs(z - p.Z[-1])) < 1e-10
    sim = simulate_diffusive(model, 1.0, 0.01, 5000, seed=4, scheme="exponential")
    assert np.max(np.abs(sim.Z[0] - np.exp(-theta * sim.B[0] - 0.5 * theta**2))) < 1e-10
