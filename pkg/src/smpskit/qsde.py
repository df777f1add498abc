"""Continuum limits: diffusive and counting quantum stochastic differential equations.

The superoperator-valued process ``Z`` is tracked through the row vector
``w_t = pairing_row(rho) @ Z_t`` so that the scalar density is
``Tr(rho Z_t[X]) = w_t @ vec(X)``.  A right-multiplicative SDE
``dZ = Z (L0 dt + K dB)`` becomes ``w_{n+1} = w_n (1 + L0 dt + K dB_n)``.

For the diffusive model ``K = sigma J + m`` with ``J[.] = R[.] + [.]R^dag``.
Ito's formula gives ``E[Tr(rho Z_t[X]) exp(i lam B_t)] = Tr(rho exp(t L(lam))[X])``
with ``L(lam) = L0 + i lam K - lam^2 / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from . import rand
from .channelcore import KrausFamily, expm_apply, is_hermitian, left, pairing_row, right, sandwich, vec
from .errors import ValidationError
from .master import LindbladGenerator, build_L0
from .rand import normalize_kraus


def _z_scores(diff: complex, se_re: float, se_im: float) -> tuple[float, float]:
    def one(d, se):
        # differences at roundoff level carry no statistical signal
        if abs(d) < 1e-12:
            return 0.0
        return d / se if se > 0 else float(np.sign(d) * np.inf)
    return one(diff.real, se_re), one(diff.imag, se_im)


@dataclass(frozen=True)
class CharFnResult:
    lam: float
    t: float
    mc: complex
    exact: complex
    se_re: float
    se_im: float
    z_re: float
    z_im: float

    @property
    def max_abs_z(self) -> float:
        return max(abs(self.z_re), abs(self.z_im))


def _mc_compare(values: NDArray, exact: complex, lam: float, t: float) -> CharFnResult:
    n = len(values)
    mc = complex(values.mean())
    se_re = float(values.real.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    se_im = float(values.imag.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    z_re, z_im = _z_scores(mc - exact, se_re, se_im)
    return CharFnResult(lam, t, mc, complex(exact), se_re, se_im, z_re, z_im)


def _record_steps(t: float, dt: float, times: Sequence[float] | None) -> tuple[int, NDArray, NDArray]:
    if dt > t / 10 + 1e-15:
        raise ValidationError("time step must satisfy dt <= t/10")
    n_steps = int(round(t / dt))
    if abs(n_steps * dt - t) > 1e-9 * max(1.0, t):
        raise ValidationError("t must be an integer multiple of dt")
    times = np.array([t] if times is None else times, dtype=float)
    steps = np.rint(times / dt).astype(int)
    if np.any(np.abs(steps * dt - times) > 1e-9) or np.any(steps < 0) or np.any(steps > n_steps):
        raise ValidationError("record times must be grid points within [0, t]")
    return n_steps, times, steps


# --- diffusive model ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiffusiveModel:
    """``dZ = Z (L0 dt + (sigma J + m) dB)`` with ``J[.] = R[.] + [.]R^dag``."""

    g: LindbladGenerator
    R: NDArray
    m: float = 0.0
    sigma: float = 1.0
    rho: NDArray | None = None
    X: NDArray | None = None

    def __post_init__(self):
        d = self.g.dim
        object.__setattr__(self, "R", np.atleast_2d(np.array(self.R, dtype=complex)))
        rho = np.eye(d) / d if self.rho is None else self.rho
        X = np.eye(d) if self.X is None else self.X
        object.__setattr__(self, "rho", np.atleast_2d(np.array(rho, dtype=complex)))
        object.__setattr__(self, "X", np.atleast_2d(np.array(X, dtype=complex)))
        if self.sigma < 0:
            raise ValidationError("sigma must be non-negative")
        if self.R.shape != (d, d):
            raise ValidationError("R must match the generator dimension")

    @property
    def dim(self) -> int:
        return self.g.dim

    def L0(self) -> NDArray:
        return build_L0(self.g)

    def J(self) -> NDArray:
        return left(self.R) + right(self.R.conj().T)

    def K(self) -> NDArray:
        return self.sigma * self.J() + self.m * np.eye(self.dim**2)

    def start(self) -> NDArray:
        return pairing_row(self.rho)


def char_generator(model: DiffusiveModel, lam: float) -> NDArray:
    """``L0 + L1(lam)`` with ``L1(lam) = i lam (sigma J + m) - lam^2 / 2``.

    The form follows from Ito's formula applied to ``Z_t exp(i lam B_t)``.
    """
    n = model.dim**2
    return model.L0() + 1j * lam * model.K() - 0.5 * lam**2 * np.eye(n)


def char_exact(model: DiffusiveModel, lam: float, t: float, generator: NDArray | None = None) -> complex:
    """``Tr(rho exp(t L(lam))[X])``."""
    gen = char_generator(model, lam) if generator is None else generator
    return complex(model.start() @ expm_apply(gen, t) @ vec(model.X))


@dataclass
class DiffusiveSamples:
    times: NDArray
    Z: NDArray  # (n_times, n_paths) complex
    B: NDArray  # (n_times, n_paths) real (complex W for the 2d model)


def _lie_trotter_factors(drift: NDArray, K: NDArray, dt: float):
    e_drift = expm_apply(drift, dt)
    kappa, V = np.linalg.eig(K)
    if np.linalg.cond(V) > 1e8:
        raise ValidationError("noise superoperator is not safely diagonalizable")
    return e_drift, kappa, V, np.linalg.inv(V)


def simulate_diffusive(model: DiffusiveModel, t: float, dt: float, n_paths: int,
                       seed: int = rand.DEFAULT_SEED, times: Sequence[float] | None = None,
                       scheme: str = "euler") -> DiffusiveSamples:
    """Paths of ``Z_t = Tr(rho Z_t[X])`` and ``B_t`` on shared Brownian increments.

    ``scheme="euler"`` is Euler-Maruyama.  ``scheme="exponential"`` applies
    ``exp((L0 - K^2/2) dt) exp(K dB)`` per step, which is exact when ``L0`` and
    ``K`` commute.
    """
    n_steps, times, steps = _record_steps(t, dt, times)
    L0, K = model.L0(), model.K()
    w0, xv = model.start(), vec(model.X)
    n = model.dim**2
    step_mat = np.eye(n) + L0 * dt
    if scheme == "exponential":
        e_drift, kappa, V, Vinv = _lie_trotter_factors(L0 - 0.5 * K @ K, K, dt)
    elif scheme != "euler":
        raise ValueError(f"unknown scheme {scheme!r}")
    sqdt = np.sqrt(dt)

    def run(_b, size, rng):
        w = np.broadcast_to(w0, (size, n)).astype(complex)
        B = np.zeros(size)
        Zs = np.empty((len(times), size), dtype=complex)
        Bs = np.empty((len(times), size))
        for j in np.nonzero(steps == 0)[0]:
            Zs[j], Bs[j] = w @ xv, B
        for k in range(1, n_steps + 1):
            dB = rng.standard_normal(size) * sqdt
            if scheme == "euler":
                w = w @ step_mat + (w @ K) * dB[:, None]
            else:
                w = (((w @ e_drift) @ V) * np.exp(np.outer(dB, kappa))) @ Vinv
            B += dB
            for j in np.nonzero(steps == k)[0]:
                Zs[j], Bs[j] = w @ xv, B
        return Zs, Bs

    parts = rand.map_batches(run, n_paths, seed)
    return DiffusiveSamples(times, np.concatenate([p[0] for p in parts], axis=1),
                            np.concatenate([p[1] for p in parts], axis=1))


def closed_form_diffusive(model: DiffusiveModel, t: float, B_t: float | NDArray) -> NDArray:
    """Superoperator ``exp(t L0 - t K^2 / 2 + K B_t)`` (one per value of ``B_t``).

    This solves the SDE whenever ``L0`` and ``K`` commute.
    """
    L0, K = model.L0(), model.K()
    base = t * (L0 - 0.5 * K @ K)
    B = np.asarray(B_t, dtype=float)
    return scipy.linalg.expm(base + B[..., None, None] * K)


def closed_form_value(model: DiffusiveModel, t: float, B_t: float | NDArray) -> NDArray:
    """``Tr(rho Z_t[X])`` evaluated with :func:`closed_form_diffusive`."""
    return model.start() @ closed_form_diffusive(model, t, B_t) @ vec(model.X)


def commutator_norm(model: DiffusiveModel) -> float:
    L0, K = model.L0(), model.K()
    return float(np.max(np.abs(L0 @ K - K @ L0)))


def char_fn_check(model: DiffusiveModel, lambdas: Sequence[float], times: Sequence[float], n_paths: int,
                  seed: int = rand.DEFAULT_SEED, dt: float = 1e-3) -> list[CharFnResult]:
    """Monte Carlo ``E[Z_t exp(i lam B_t)]`` against ``Tr(rho exp(t L(lam))[X])``.

    One simulation up to ``max(times)`` serves every ``(lam, t)`` cell.
    """
    times = sorted(float(x) for x in times)
    sim = simulate_diffusive(model, times[-1], dt, n_paths, seed, times)
    out = []
    for j, t in enumerate(times):
        for lam in lambdas:
            vals = sim.Z[j] * np.exp(1j * lam * sim.B[j])
            out.append(_mc_compare(vals, char_exact(model, lam, t), lam, t))
    return out


# --- two-dimensional driver ---------------------------------------------------------------


def _noise_2d(model: DiffusiveModel) -> tuple[NDArray, NDArray]:
    R, s, m = model.R, model.sigma, model.m
    J = left(R) + right(R.conj().T)
    Jm = left(R) - right(R.conj().T)
    n = model.dim**2
    Kx = s * J / 2 + 0.5 * s * m * np.eye(n)
    Ky = -1j * s * Jm / 2 + 0.5j * s * m * np.eye(n)
    return Kx, Ky


def char_generator_2d(model: DiffusiveModel, lam: float) -> NDArray:
    """Generator of ``E[Z_t exp(i lam (B^x_t + i B^y_t))]``: ``L0 + i lam (Kx + i Ky)``.

    Since ``(B^x + i B^y)`` has zero quadratic variation the ``lam^2`` term
    vanishes, the ``m`` contributions cancel and ``Kx + i Ky = sigma R[.]``.
    """
    Kx, Ky = _noise_2d(model)
    return model.L0() + 1j * lam * (Kx + 1j * Ky)


def simulate_diffusive_2d(model: DiffusiveModel, t: float, dt: float, n_paths: int,
                          seed: int = rand.DEFAULT_SEED, times: Sequence[float] | None = None) -> DiffusiveSamples:
    """Euler-Maruyama for the two-driver model; ``B`` holds ``W = B^x + i B^y``."""
    n_steps, times, steps = _record_steps(t, dt, times)
    L0 = model.L0()
    Kx, Ky = _noise_2d(model)
    w0, xv = model.start(), vec(model.X)
    n = model.dim**2
    step_mat = np.eye(n) + L0 * dt
    sqdt = np.sqrt(dt)

    def run(_b, size, rng):
        w = np.broadcast_to(w0, (size, n)).astype(complex)
        W = np.zeros(size, dtype=complex)
        Zs = np.empty((len(times), size), dtype=complex)
        Ws = np.empty((len(times), size), dtype=complex)
        for j in np.nonzero(steps == 0)[0]:
            Zs[j], Ws[j] = w @ xv, W
        for k in range(1, n_steps + 1):
            d = rng.standard_normal((2, size)) * sqdt
            w = w @ step_mat + (w @ Kx) * d[0][:, None] + (w @ Ky) * d[1][:, None]
            W += d[0] + 1j * d[1]
            for j in np.nonzero(steps == k)[0]:
                Zs[j], Ws[j] = w @ xv, W
        return Zs, Ws

    parts = rand.map_batches(run, n_paths, seed)
    return DiffusiveSamples(times, np.concatenate([p[0] for p in parts], axis=1),
                            np.concatenate([p[1] for p in parts], axis=1))


def char_fn_check_2d(model: DiffusiveModel, lambdas: Sequence[float], times: Sequence[float], n_paths: int,
                     seed: int = rand.DEFAULT_SEED, dt: float = 1e-3) -> list[CharFnResult]:
    times = sorted(float(x) for x in times)
    sim = simulate_diffusive_2d(model, times[-1], dt, n_paths, seed, times)
    out = []
    for j, t in enumerate(times):
        for lam in lambdas:
            vals = sim.Z[j] * np.exp(1j * lam * sim.B[j])
            exact = char_exact(model, lam, t, char_generator_2d(model, lam))
            out.append(_mc_compare(vals, exact, lam, t))
    return out


# --- counting model -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CountingModel:
    """Generator ``L(lam) = i[H, .] + mu (exp(i lam) U[.]U^dag - [.])``."""

    H: NDArray
    U: NDArray
    mu: float
    rho: NDArray | None = None
    X: NDArray | None = None

    def __post_init__(self):
        H = np.atleast_2d(np.array(self.H, dtype=complex))
        U = np.atleast_2d(np.array(self.U, dtype=complex))
        d = H.shape[0]
        if not is_hermitian(H):
            raise ValidationError("H must be Hermitian")
        if U.shape != (d, d) or np.max(np.abs(U.conj().T @ U - np.eye(d))) > 1e-12:
            raise ValidationError("U must be unitary of matching dimension")
        if not self.mu > 0:
            raise ValidationError("mu must be positive")
        rho = np.eye(d) / d if self.rho is None else self.rho
        X = np.eye(d) if self.X is None else self.X
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "rho", np.atleast_2d(np.array(rho, dtype=complex)))
        object.__setattr__(self, "X", np.atleast_2d(np.array(X, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def counting_generator(model: CountingModel, lam: float) -> NDArray:
    n = model.dim**2
    comm = 1j * (left(model.H) - right(model.H))
    return comm + model.mu * (np.exp(1j * lam) * sandwich(model.U) - np.eye(n))


def counting_exact(model: CountingModel, lam: float, t: float) -> complex:
    return complex(pairing_row(model.rho) @ expm_apply(counting_generator(model, lam), t) @ vec(model.X))


@dataclass
class CountingSamples:
    t: float
    N: NDArray
    Z: NDArray


def simulate_counting(model: CountingModel, t: float, n_paths: int,
                      seed: int = rand.DEFAULT_SEED) -> CountingSamples:
    """Exact jump-time simulation under Poisson(mu) reference clocks.

    Between jumps the state evolves by ``exp(-iHs) . exp(iHs)``, each jump
    applies ``U^dag . U``; the weight is ``Z = Tr(sigma_t X)``.  Then
    ``E[Z exp(i lam N_t)] = Tr(rho exp(t L(lam))[X])`` with no time
    discretization.
    """
    h, P = np.linalg.eigh(model.H)
    U, Ud = model.U, model.U.conj().T
    d = model.dim

    def propagate(sigma, s):
        # exp(-iHs) sigma exp(iHs) per path
        v = np.einsum("ab,mb,cb->mac", P, np.exp(-1j * np.outer(s, h)), P.conj())
        return v @ sigma @ np.conj(np.swapaxes(v, 1, 2))

    def run(_b, size, rng):
        N = rng.poisson(model.mu * t, size)
        width = N.max(initial=0)
        jt = rng.uniform(0.0, t, (size, width))
        jt[np.arange(width)[None] >= N[:, None]] = t  # unused slots become empty intervals
        jt.sort(axis=1)
        gaps = np.diff(np.hstack([np.zeros((size, 1)), jt, np.full((size, 1), t)]), axis=1)
        sigma = np.broadcast_to(model.rho, (size, d, d)).copy()
        for k in range(width + 1):
            sigma = propagate(sigma, gaps[:, k])
            jump = N > k
            sigma[jump] = Ud @ sigma[jump] @ U
        Z = np.einsum("mab,ba->m", sigma, model.X)
        return N, Z

    parts = rand.map_batches(run, n_paths, seed)
    return CountingSamples(t, np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def counting_char_check(model: CountingModel, lambdas: Sequence[float], t: float, n_paths: int,
                        seed: int = rand.DEFAULT_SEED) -> list[CharFnResult]:
    sim = simulate_counting(model, t, n_paths, seed)
    return [_mc_compare(sim.Z * np.exp(1j * lam * sim.N), counting_exact(model, lam, t), lam, t)
            for lam in lambdas]


def counting_kraus_scheme(model: CountingModel, eps: float) -> KrausFamily:
    """Discrete counting family ``A0 = 1 + eps (iH - mu/2)``, ``A1 = sqrt(eps mu) U`` (renormalized)."""
    d = model.dim
    a0 = np.eye(d) + eps * (1j * model.H - 0.5 * model.mu * np.eye(d))
    a1 = np.sqrt(eps * model.mu) * model.U
    ops = normalize_kraus(np.stack([a0, a1]))
    return KrausFamily((0, 1), tuple(ops))


def discrete_char_function(fam: KrausFamily, rho: NDArray, X: NDArray, weights: Sequence[complex],
                           n: int) -> complex:
    """``Tr(rho phi^n[X])`` with ``phi = sum_x weights[x] Phi_x``."""
    phi = sum(w * s for w, s in zip(weights, fam.symbol_superops()))
    return complex(pairing_row(rho) @ np.linalg.matrix_power(phi, n) @ vec(X))


# --- discrete diffusive scheme ------------------------------------------------------------


def diffusive_kraus_scheme(H: NDArray, C: NDArray, delta: float) -> KrausFamily:
    """Two-outcome family ``A_x = (1 + delta Q + x sqrt(delta) C) / sqrt(2)``, ``x = +1, -1``.

    ``Q = iH - C C^dag / 2``; the family is renormalized exactly.  Its
    continuum limit is the diffusive model with ``Rs = [C]``, ``R = C``,
    ``sigma = 1``, ``m = 0`` when the increment is ``x sqrt(delta)``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    d = H.shape[0]
    Q = 1j * H - 0.5 * C @ C.conj().T
    ops = [(np.eye(d) + delta * Q + x * np.sqrt(delta) * C) / np.sqrt(2) for x in (1, -1)]
    return KrausFamily((1, -1), tuple(normalize_kraus(np.stack(ops))))


def diffusive_weak_errors(H: NDArray, C: NDArray, rho: NDArray, X: NDArray, lam: float, t: float,
                          deltas: Sequence[float]) -> NDArray:
    """``|E_delta[Tr(.) e^{i lam B}] - Tr(rho exp(t L(lam))[X])|`` for each step size."""
    model = DiffusiveModel(LindbladGenerator(H, (C,)), C, 0.0, 1.0, rho, X)
    exact = char_exact(model, lam, t)
    errs = []
    for delta in deltas:
        n = int(round(t / delta))
        fam = diffusive_kraus_scheme(H, C, t / n)
        sq = np.sqrt(t / n)
        val = discrete_char_function(fam, model.rho, model.X, [np.exp(1j * lam * sq), np.exp(-1j * lam * sq)], n)
        errs.append(abs(val - exact))
    return np.array(errs)


def strong_error_scan(model: DiffusiveModel, t: float, dts: Sequence[float], n_paths: int,
                      seed: int = rand.DEFAULT_SEED) -> NDArray:
    """Mean ``|Z_EM(t) - Z_exact(t)|`` per step size on shared Brownian paths (``D = 1``)."""
    if model.dim != 1:
        raise ValidationError("strong error scan uses the scalar closed form")
    dts = sorted(dts)
    fine = dts[0]
    n_fine = int(round(t / fine))
    factors = [int(round(dt / fine)) for dt in dts]
    if any(abs(f * fine - dt) > 1e-12 for f, dt in zip(factors, dts)) or any(n_fine % f for f in factors):
        raise ValidationError("step sizes must be nested multiples of the finest one")
    a = complex(model.L0()[0, 0])
    k = complex(model.K()[0, 0])
    z0 = complex(model.start()[0] * model.X[0, 0])

    def run(_b, size, rng):
        dB = rng.standard_normal((n_fine, size)) * np.sqrt(fine)
        B = dB.sum(axis=0)
        exact = z0 * np.exp((a - 0.5 * k * k) * t + k * B)
        errs = []
        for f in factors:
            coarse = dB.reshape(n_fine // f, f, size).sum(axis=1)
            z = z0 * np.prod(1 + a * f * fine + k * coarse, axis=0)
            errs.append(np.abs(z - exact).sum())
        return np.array(errs)

    total = sum(rand.map_batches(run, n_paths, seed))
    out = np.empty(len(dts))
    out[:] = total / n_paths
    return out


# --- classical Girsanov reference ---------------------------------------------------------


@dataclass
class GirsanovReport:
    times: NDArray
    weighted_mean: NDArray
    se_mean: NDArray
    weighted_var: NDArray
    se_var: NDArray
    z_mean: NDArray
    z_var: NDArray
    mean_Z: float
    se_Z: float
    z_Z: float
    passed: bool


@dataclass
class GirsanovPaths:
    times: NDArray
    B: NDArray
    B_tilde: NDArray
    Z: NDArray  # (n_times, n_paths)


def girsanov_paths(theta_fn: Callable[[NDArray], NDArray], T: float, dt: float, n_paths: int,
                   seed: int = rand.DEFAULT_SEED, times: Sequence[float] | None = None) -> GirsanovPaths:
    """``Z = exp(-int theta dB - 1/2 int theta^2)`` and ``B~ = B + int theta`` (left-point sums)."""
    n_steps, times, steps = _record_steps(T, dt, times)
    grid = np.arange(n_steps) * dt
    theta = np.broadcast_to(np.asarray(theta_fn(grid), dtype=float), (n_steps,))

    def run(_b, size, rng):
        dB = rng.standard_normal((n_steps, size)) * np.sqrt(dt)
        B = np.vstack([np.zeros(size), np.cumsum(dB, axis=0)])
        stoch = np.vstack([np.zeros(size), np.cumsum(theta[:, None] * dB, axis=0)])
        drift = np.concatenate([[0.0], np.cumsum(theta) * dt])
        quad = np.concatenate([[0.0], np.cumsum(theta**2) * dt])
        logZ = -stoch - 0.5 * quad[:, None]
        return B[steps], B[steps] + drift[steps, None], np.exp(logZ[steps])

    parts = rand.map_batches(run, n_paths, seed)
    cat = [np.concatenate([p[i] for p in parts], axis=1) for i in range(3)]
    return GirsanovPaths(times, *cat)


def girsanov_reference(theta_fn: Callable[[NDArray], NDArray], T: float, dt: float, n_paths: int,
                       seed: int = rand.DEFAULT_SEED, times: Sequence[float] | None = None,
                       z_tol: float = 3.0) -> GirsanovReport:
    """Check that ``B~`` has mean 0 and variance t under the ``Z_T``-weighted measure."""
    times = np.linspace(T / 4, T, 4) if times is None else np.asarray(times, float)
    p = girsanov_paths(theta_fn, T, dt, n_paths, seed, times)
    ZT = p.Z[-1]
    n = len(ZT)
    m1 = ZT[None] * p.B_tilde
    m2 = ZT[None] * p.B_tilde**2
    mean = m1.mean(axis=1)
    se_mean = m1.std(axis=1, ddof=1) / np.sqrt(n)
    second = m2.mean(axis=1)
    var = second - mean**2
    se_var = m2.std(axis=1, ddof=1) / np.sqrt(n)
    z_mean = mean / se_mean
    z_var = (var - p.times) / se_var
    mZ, seZ = float(ZT.mean()), float(ZT.std(ddof=1) / np.sqrt(n))
    zZ = (mZ - 1) / seZ if seZ > 0 else 0.0
    ok = bool(np.all(np.abs(z_mean) <= z_tol) and np.all(np.abs(z_var) <= z_tol) and abs(zZ) <= z_tol)
    return GirsanovReport(p.times, mean, se_mean, var, se_var, z_mean, z_var, mZ, seZ, float(zZ), ok)


def girsanov_smps_model(theta: float) -> DiffusiveModel:
    """Scalar diffusive model whose density equals the constant-``theta`` Girsanov factor."""
    return DiffusiveModel(LindbladGenerator([[0.0]]), [[0.0]], m=-theta, sigma=1.0)


def girsanov_smps_residual(theta: float, T: float, dt: float, n_paths: int,
                           seed: int = rand.DEFAULT_SEED) -> float:
    """Largest pathwise gap between the scalar sMPS density and ``exp(-theta B_T - theta^2 T / 2)``."""
    sim = simulate_diffusive(girsanov_smps_model(theta), T, dt, n_paths, seed, scheme="exponential")
    classical = np.exp(-theta * sim.B[-1] - 0.5 * theta**2 * T)
    return float(np.max(np.abs(sim.Z[-1] - classical)))
