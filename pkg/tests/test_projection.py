import numpy as np
import pytest

from smpskit.channelcore import adjoint, apply, expm_apply, kraus_to_transfer
from smpskit.errors import NumericalValidityError, ValidationError
from smpskit.master import LindbladGenerator, build_L0
from smpskit.projection import (
    ProjectionFamily,
    assemble_choi,
    canonicalize,
    evolve_projected,
    measurement_family,
    multitime_density,
    multitime_joint,
    project_state,
    random_projection_family,
    trace_last_slot,
    validate_family,
)
from smpskit.rand import random_complex, random_density, random_hermitian, random_kraus_family


def unit(n, a, b):
    e = np.zeros((n, n), dtype=complex)
    e[a, b] = 1
    return e


def choi_by_loops(fam):
    """Choi matrix summed term by term from the block definition."""
    n_out, n = fam.n_out, fam.n_in
    M = fam.superops()
    c = np.zeros((n_out * n * n, n_out * n * n), dtype=complex)
    for i in range(n_out):
        for j in range(n_out):
            for al in range(n):
                for be in range(n):
                    img = apply(M[i, j], unit(n, al, be))
                    c += np.kron(np.kron(unit(n_out, i, j), img), unit(n, al, be))
    return c


def test_measurement_family_passes():
    fam = measurement_family(3)
    assert validate_family(fam.superops()).passed


def test_choi_layout(rng):
    fam = random_projection_family(3, 2, rng)
    c = assemble_choi(fam.superops())
    np.testing.assert_allclose(c, choi_by_loops(fam), atol=1e-13)
    np.testing.assert_allclose(c, fam.choi(), atol=1e-13)


def test_perturbed_family_fails():
    blocks = np.array(measurement_family(2).blocks)
    blocks[0] *= np.sqrt(1.1)
    rep = validate_family(ProjectionFamily(blocks).superops())
    assert not rep.passed
    assert abs(rep.trace_residual - 0.1) < 1e-12


def test_random_family_passes(rng):
    fam = random_projection_family(4, 2, rng, rank=3)
    rep = validate_family(fam.superops())
    assert rep.passed and rep.choi_min_eig > -1e-10
    assert fam.normalization_residual() < 1e-12


def test_non_cp_family_rejected():
    # M_ij[Y] = <i|Y^T|j>-style transpose family is not CP
    n = 2
    M = np.zeros((1, 1, 4, 4), dtype=complex)
    for a in range(n):
        for b in range(n):
            col = np.zeros(4)
            col[a * n + b] = 1
            M[0, 0][:, b * n + a] = col
    assert not validate_family(M).passed
    with pytest.raises(NumericalValidityError):
        canonicalize(M)


def test_canonical_rank_one():
    fam = canonicalize(measurement_family(1).superops())
    assert fam.rank == 1


def test_canonical_measurement_reassembly():
    orig = measurement_family(3)
    fam = canonicalize(orig.superops())
    np.testing.assert_allclose(fam.superops(), orig.superops(), atol=1e-12)


def test_canonical_reassembly_random(rng):
    orig = random_projection_family(4, 2, rng, rank=2)
    fam = canonicalize(orig.superops())
    assert fam.rank == 2
    assert np.max(np.abs(fam.superops() - orig.superops())) < 1e-10


def test_canonical_truncation(rng):
    orig = random_projection_family(2, 2, rng, rank=2)
    blocks = np.array(orig.blocks)
    blocks[:, 1] *= 1e-7  # eigenvalue of order 1e-14, below tolerance
    M = ProjectionFamily(blocks).superops()
    fam = canonicalize(M)
    assert fam.rank == 1
    assert np.max(np.abs(fam.superops() - M)) <= 1e-10 * 16


def test_project_scalar(rng):
    fam = random_projection_family(3, 1, rng)
    rho = project_state(fam, random_density(3, rng))
    assert rho.shape == (1, 1) and abs(rho[0, 0] - 1) < 1e-12


def test_project_measurement_diagonal(rng):
    p = rng.random(3)
    p /= p.sum()
    np.testing.assert_allclose(project_state(measurement_family(3), np.diag(p)), np.diag(p), atol=1e-15)


def test_project_random_is_density(rng):
    fam = random_projection_family(4, 2, rng)
    rho = project_state(fam, random_density(4, rng))
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
    assert np.linalg.eigvalsh(rho)[0] > -1e-10
    assert abs(np.trace(rho) - 1) < 1e-10


def test_project_rejects_bad_sigma(rng):
    fam = random_projection_family(2, 2, rng)
    with pytest.raises(ValidationError):
        project_state(fam, np.diag([1.5, -0.5]))


def random_generator(rng, n):
    return LindbladGenerator(random_hermitian(n, rng), (0.5 * random_complex((n, n), rng),))


def test_evolve_at_zero_and_trivial(rng):
    fam = random_projection_family(4, 2, rng)
    sigma = random_density(4, rng)
    traj = evolve_projected(fam, random_generator(rng, 4), sigma, [0.0, 0.5])
    np.testing.assert_allclose(traj[0], project_state(fam, sigma), atol=1e-12)
    flat = evolve_projected(fam, LindbladGenerator(np.zeros((4, 4))), sigma, [0.0, 1.0, 2.0])
    np.testing.assert_allclose(flat, np.broadcast_to(flat[0], flat.shape), atol=1e-12)


def test_evolve_random_is_density(rng):
    fam = random_projection_family(4, 2, rng)
    g = random_generator(rng, 4)
    traj = evolve_projected(fam, g, random_density(4, rng), np.linspace(0, 3, 7))
    for rho in traj:
        assert abs(np.trace(rho) - 1) < 1e-10
        assert np.linalg.eigvalsh(rho)[0] > -1e-10


def test_evolve_matches_heisenberg_pairing(rng):
    fam = random_projection_family(3, 2, rng)
    g = random_generator(rng, 3)
    sigma = random_density(3, rng)
    t = 0.8
    ones = fam.heisenberg_ones()
    # Tr(exp(tL)[sigma] M_ij[1]) = Tr(sigma exp(t L0)[M_ij[1]])
    e = expm_apply(build_L0(g), t)
    direct = np.array([[np.trace(sigma @ apply(e, ones[i, j])) for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(evolve_projected(fam, g, sigma, [t])[0], direct, atol=1e-12)


def test_evolve_grid_guard(rng):
    fam = random_projection_family(2, 2, rng)
    with pytest.raises(ValidationError):
        evolve_projected(fam, random_generator(rng, 2), np.eye(2) / 2, [1.0, 0.5])


def test_multitime_n1_is_projection(rng):
    fam = random_projection_family(4, 2, rng)
    gamma = kraus_to_transfer(random_kraus_family(4, (0, 1), rng))
    sigma = random_density(4, rng)
    np.testing.assert_allclose(multitime_joint(fam, gamma, sigma, 1), project_state(fam, sigma), atol=1e-12)


def test_multitime_consistency_and_normalization(rng):
    fam = random_projection_family(4, 2, rng)
    gamma = kraus_to_transfer(random_kraus_family(4, (0, 1), rng))
    sigma = random_density(4, rng)
    tensors = [multitime_joint(fam, gamma, sigma, n) for n in (1, 2, 3)]
    for lo, hi in zip(tensors[:-1], tensors[1:]):
        assert np.max(np.abs(trace_last_slot(hi) - lo)) < 1e-10
    t3 = tensors[2]
    assert abs(np.einsum("aabbcc->", t3) - 1) < 1e-12
    rho3 = multitime_density(t3)
    assert np.linalg.eigvalsh((rho3 + rho3.conj().T) / 2)[0] > -1e-10


def test_multitime_slot_three_marginal(rng):
    fam = random_projection_family(4, 2, rng)
    gamma = kraus_to_transfer(random_kraus_family(4, (0, 1), rng))
    sigma = random_density(4, rng)
    t3 = multitime_joint(fam, gamma, sigma, 3)
    marg = np.einsum("aabbij->ij", t3)
    Mbar = sum(fam.superops()[i, i] for i in range(2))
    state = sigma
    for _ in range(2):
        state = apply(adjoint(gamma), apply(adjoint(Mbar), state))
    assert np.max(np.abs(marg - project_state(fam, state))) < 1e-10


def test_multitime_infeasible(rng):
    fam = random_projection_family(2, 2, rng)
    with pytest.raises(ValidationError):
        multitime_joint(fam, np.eye(4), np.eye(2) / 2, 7)
