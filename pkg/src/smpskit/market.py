"""Correlated-increment market models driven by a diffusive sMPS.

``J[.] = R[.] + [.]R^dag``, ``L0`` is the Heisenberg Lindblad generator and
``theta = (alpha - r) / sigma``.

Case 1: the stock ``S = Tr(rho S^_t[X])`` with ``dS^ = S^ (L0 dt + alpha dt + sigma J dB)``
and the classical Girsanov factor ``Z = exp(-theta B - theta^2 t / 2)``.  Under
``dB~ = dB + theta dt`` the drift of ``D S`` is ``L0 + (alpha - r)(1 - J)``, so the
martingale condition is ``L0[X] + (alpha - r)(X - J[X]) = 0``.

Case 2: ``Z = Tr(rho Z^_t[X])`` with ``dZ^ = Z^ (L0 dt + (J + m) dB)`` and the
geometric stock ``dS = S (alpha dt + sigma dB)``.  The drift of ``D S Z`` vanishes iff
``L0[X] + (alpha - r + sigma m) X + sigma J[X] = 0``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from . import rand
from .channelcore import is_hermitian, left, min_eig, pairing_row, right, unvec, vec
from .errors import ValidationError
from .master import LindbladGenerator, build_L0
from .qsde import _record_steps
from .rand import random_complex, random_density, random_hermitian, random_unitary

KERNEL_TOL = 1e-9
GRID_POINTS = 180
Z_TOL = 3.0


@dataclass(frozen=True, eq=False)
class _MarketBase:
    alpha: float
    r: float
    sigma: float
    g: LindbladGenerator
    R: NDArray
    rho: NDArray | None = None
    X: NDArray | None = None

    def __post_init__(self):
        d = self.g.dim
        object.__setattr__(self, "R", np.atleast_2d(np.array(self.R, dtype=complex)))
        rho = np.eye(d) / d if self.rho is None else self.rho
        object.__setattr__(self, "rho", np.atleast_2d(np.array(rho, dtype=complex)))
        if self.X is not None:
            X = np.atleast_2d(np.array(self.X, dtype=complex))
            if X.shape != (d, d) or not is_hermitian(X, 1e-10):
                raise ValidationError("X must be a Hermitian matrix matching the generator dimension")
            object.__setattr__(self, "X", X)
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")
        if self.R.shape != (d, d) or self.rho.shape != (d, d):
            raise ValidationError("R and rho must match the generator dimension")

    @property
    def dim(self) -> int:
        return self.g.dim

    @property
    def theta(self) -> float:
        return (self.alpha - self.r) / self.sigma

    def L0(self) -> NDArray:
        return build_L0(self.g)

    def J(self) -> NDArray:
        return left(self.R) + right(self.R.conj().T)

    def with_X(self, X: NDArray | None):
        return dataclasses.replace(self, X=X)

    def require_X(self) -> NDArray:
        if self.X is None:
            raise ValidationError("the closure matrix X has not been solved or supplied")
        return self.X


@dataclass(frozen=True, eq=False)
class MarketCase1(_MarketBase):
    """Stock evolved by the sMPS superoperator, measure changed classically."""

    def condition_map(self, condition: str = "derived") -> NDArray:
        """Superoperator ``C`` with the closure condition reading ``C[X] = 0``.

        ``condition="derived"`` is ``L0 + (alpha - r)(1 - J)``; ``"naive"`` is
        ``L0 + (alpha - r) J``, kept as a negative control.
        """
        n = self.dim**2
        if condition == "derived":
            return self.L0() + (self.alpha - self.r) * (np.eye(n) - self.J())
        if condition == "naive":
            return self.L0() + (self.alpha - self.r) * self.J()
        raise ValueError(f"unknown condition {condition!r}")


@dataclass(frozen=True, eq=False)
class MarketCase2(_MarketBase):
    """Measure changed by the sMPS density, geometric stock."""

    m: float = 0.0
    S0: float = 1.0

    def condition_map(self, condition: str = "derived") -> NDArray:
        if condition not in ("derived", "naive"):
            raise ValueError(f"unknown condition {condition!r}")
        n = self.dim**2
        c = self.alpha - self.r + self.sigma * self.m
        return self.L0() + c * np.eye(n) + self.sigma * self.J()

    def noise(self) -> NDArray:
        return self.J() + self.m * np.eye(self.dim**2)


Market = MarketCase1 | MarketCase2


def closure_residual(case: Market, X: NDArray | None = None, condition: str = "derived") -> float:
    X = case.require_X() if X is None else np.asarray(X, dtype=complex)
    return float(np.max(np.abs(case.condition_map(condition) @ vec(X))))


# --- kernel solver ------------------------------------------------------------------------


def hermitian_basis(d: int) -> NDArray:
    """Columns are ``vec`` of an orthonormal basis of ``d x d`` Hermitian matrices."""
    mats = []
    for a in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[a, a] = 1
        mats.append(e)
    for a in range(d):
        for b in range(a + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = e[b, a] = 1 / np.sqrt(2)
            mats.append(e)
            f = np.zeros((d, d), dtype=complex)
            f[a, b], f[b, a] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            mats.append(f)
    return np.stack([vec(m) for m in mats], axis=1)


@dataclass
class ClosureSolution:
    solved: bool
    X: NDArray | None
    residual: float
    kernel_dim: int
    smallest_singular: float
    psd: bool
    min_eig: float
    message: str
    singular_values: NDArray = field(repr=False, default_factory=lambda: np.zeros(0))


def _pick_psd(kernel: list[NDArray]) -> tuple[NDArray, float]:
    """Unit-trace kernel element with the largest minimum eigenvalue."""
    cands = list(kernel)
    angles = np.linspace(0, np.pi, GRID_POINTS, endpoint=False)
    for i in range(len(kernel)):
        for j in range(i + 1, len(kernel)):
            cands.extend(np.cos(a) * kernel[i] + np.sin(a) * kernel[j] for a in angles[1:])
    best, best_eig = None, -np.inf
    for c in cands:
        tr = np.trace(c).real
        if abs(tr) < 1e-8:
            continue
        c = c / tr
        lam = min_eig(c)
        if lam > best_eig:
            best, best_eig = c, lam
    if best is None:
        c = kernel[0]
        return c / np.linalg.norm(c), min_eig(c / np.linalg.norm(c))
    return best, best_eig


def hermitian_kernel(maps: Sequence[NDArray], d: int, tol: float = KERNEL_TOL) -> tuple[list[NDArray], NDArray]:
    """Hermitian ``X`` with ``M[X] = 0`` for every superoperator in ``maps``.

    Returns the kernel basis (as matrices) and the singular values of the
    stacked real-linear map.
    """
    basis = hermitian_basis(d)
    A = np.vstack([m @ basis for m in maps])
    A = np.vstack([A.real, A.imag])
    _, s, vt = np.linalg.svd(A)
    s_full = np.concatenate([s, np.zeros(vt.shape[0] - len(s))])
    null = s_full <= tol * max(1.0, s_full[0])
    kernel = []
    for v in vt[null]:
        X = unvec(basis @ v, d)
        kernel.append((X + X.conj().T) / 2)
    return kernel, s_full


def solve_closure(case: Market, condition: str = "derived", tol: float = KERNEL_TOL,
                  extra_maps: Sequence[NDArray] = ()) -> ClosureSolution:
    """Hermitian unit-trace solution of the closure condition, PSD when one exists.

    The null space of the condition (stacked with ``extra_maps``) is computed by
    SVD over the real coordinates of Hermitian matrices.  For kernels of
    dimension two or more, pairwise mixtures of basis elements are screened on
    a grid for the largest minimum eigenvalue.  An empty kernel yields an
    unsolved report carrying the smallest singular value.
    """
    maps = [case.condition_map(condition), *extra_maps]
    kernel, s = hermitian_kernel(maps, case.dim, tol)
    if not kernel:
        return ClosureSolution(False, None, float("nan"), 0, float(s[-1]), False, float("nan"),
                               f"no solution: kernel is trivial (smallest singular value {s[-1]:.3e})", s)
    X, lam = _pick_psd(kernel)
    res = max(float(np.max(np.abs(m @ vec(X)))) for m in maps)
    psd = lam >= -1e-10
    msg = "solved" + ("" if psd else "; no PSD element found in the kernel")
    return ClosureSolution(True, X, res, len(kernel), float(s[-1]), psd, float(lam), msg, s)


# --- constructed instances ----------------------------------------------------------------


def _dissipator(Rs: Sequence[NDArray], X: NDArray) -> NDArray:
    d = X.shape[0]
    return unvec(build_L0(LindbladGenerator(np.zeros((d, d)), tuple(Rs))) @ vec(X), d)


def _reverse_engineer(rng: np.random.Generator, d: int, re_diag, n_lindblad: int, scale: float):
    """Random instance with ``L0[X0] + diag-coupling terms = 0`` for a diagonal ``X0``.

    ``re_diag(Y_aa, x_a)`` returns ``Re R_aa`` solving the diagonal equations;
    ``H`` is chosen so that ``i[H, X0]`` cancels the off-diagonal dissipation.
    The whole instance is then rotated by a random unitary.
    """
    x = np.linspace(0.5, 1.5, d)
    x /= x.sum()
    X0 = np.diag(x).astype(complex)
    Rs = [scale * random_complex((d, d), rng) for _ in range(n_lindblad)]
    Y = _dissipator(Rs, X0)
    H = np.diag(rng.normal(size=d)).astype(complex)
    for a in range(d):
        for b in range(d):
            if a != b:
                H[a, b] = 1j * Y[a, b] / (x[b] - x[a])
    R = np.diag([re_diag(Y[a, a].real, x[a]) + 1j * rng.normal() for a in range(d)])
    U = random_unitary(d, rng)
    rot = lambda M: U @ M @ U.conj().T  # noqa: E731
    H = rot(H)
    g = LindbladGenerator((H + H.conj().T) / 2, tuple(rot(r) for r in Rs))
    X = rot(X0)
    return g, rot(R), (X + X.conj().T) / 2


def reverse_engineer_case1(rng: np.random.Generator, d: int = 2, alpha: float = 0.3, r: float = 0.05,
                           sigma: float = 0.5, condition: str = "derived", n_lindblad: int = 2,
                           scale: float = 0.3) -> MarketCase1:
    """Case 1 instance whose closure condition holds for the attached ``X``."""
    ar = alpha - r
    if abs(ar) < 1e-12:
        raise ValidationError("reverse engineering needs alpha != r")
    if condition == "derived":
        fn = lambda y, x: 0.5 + y / (2 * ar * x)  # noqa: E731
    elif condition == "naive":
        fn = lambda y, x: -y / (2 * ar * x)  # noqa: E731
    else:
        raise ValueError(f"unknown condition {condition!r}")
    g, R, X = _reverse_engineer(rng, d, fn, n_lindblad, scale)
    return MarketCase1(alpha, r, sigma, g, R, random_density(d, rng), X)


def reverse_engineer_case2(rng: np.random.Generator, d: int = 2, alpha: float = 0.3, r: float = 0.05,
                           sigma: float = 0.5, m: float = 0.2, n_lindblad: int = 2,
                           scale: float = 0.3) -> MarketCase2:
    """Case 2 instance whose closure condition holds for the attached PSD ``X``."""
    c = alpha - r + sigma * m
    g, R, X = _reverse_engineer(rng, d, lambda y, x: -(c + y / x) / (2 * sigma), n_lindblad, scale)
    return MarketCase2(alpha, r, sigma, g, R, random_density(d, rng), X, m=m)


def thermo_limit_instance(rng: np.random.Generator, d: int = 2, alpha: float = 0.3, r: float = 0.05,
                          sigma: float = 0.5, m: float = 0.2, scale: float = 0.3) -> MarketCase2:
    """Case 2 instance with ``X = 1/d`` satisfying both ``L0[X] = 0`` and the closure.

    ``R = kappa/2 + iK`` with ``K`` Hermitian gives ``J[1] = kappa``, and the
    closure fixes ``kappa = -(alpha - r + sigma m) / sigma``.
    """
    kappa = -(alpha - r + sigma * m) / sigma
    R = 0.5 * kappa * np.eye(d) + 1j * random_hermitian(d, rng, scale)
    g = LindbladGenerator(random_hermitian(d, rng), (scale * random_complex((d, d), rng),))
    return MarketCase2(alpha, r, sigma, g, R, random_density(d, rng), np.eye(d) / d, m=m)


def random_case2(rng: np.random.Generator, d: int = 2, alpha: float = 0.3, r: float = 0.05,
                 sigma: float = 0.5, m: float = 0.2, scale: float = 0.3) -> MarketCase2:
    """Generic Case 2 instance, for which the closure condition has no solution."""
    g = LindbladGenerator(random_hermitian(d, rng), (scale * random_complex((d, d), rng),))
    return MarketCase2(alpha, r, sigma, g, random_complex((d, d), rng), random_density(d, rng), None, m=m)


def shift_drift(case: Market, delta: float) -> Market:
    """Same instance with ``alpha`` moved by ``delta`` (breaks a satisfied condition)."""
    return dataclasses.replace(case, alpha=case.alpha + delta)


# --- simulation ---------------------------------------------------------------------------


@dataclass
class MarketPaths:
    times: NDArray
    S: NDArray  # (n_times, n_paths)
    Z: NDArray
    D: NDArray  # (n_times,)
    B: NDArray
    nonpositive: NDArray  # per path: Z touched <= 0 at some step
    calZ: NDArray | None = None  # Case 2 diffusion density of D S Z, divided by S

    @property
    def n_nonpositive(self) -> int:
        return int(self.nonpositive.sum())


def simulate_market(case: Market, T: float, dt: float, n_paths: int, seed: int = rand.DEFAULT_SEED,
                    times: Sequence[float] | None = None) -> MarketPaths:
    """Euler-Maruyama paths of ``(S, Z, D)`` on shared Brownian increments.

    Case 1 evolves ``Tr(rho S^_t[.])`` as a row vector and uses the exact
    Girsanov factor.  Case 2 evolves ``Tr(rho Z^_t[.])`` and the exact geometric
    stock.  Paths on which ``Z`` reaches a non-positive value are flagged.

    Raises:
        ValidationError: if ``X`` is missing or the time grid is invalid.
    """
    X = case.require_X()
    n_steps, times, steps = _record_steps(T, dt, times)
    d2 = case.dim**2
    L0 = case.L0()
    w0, xv = pairing_row(case.rho), vec(X)
    is1 = isinstance(case, MarketCase1)
    if is1:
        step_mat = np.eye(d2) + (L0 + case.alpha * np.eye(d2)) * dt
        noise = case.sigma * case.J()
    else:
        step_mat = np.eye(d2) + L0 * dt
        noise = case.noise()
        cal_v = vec(unvec(case.J() @ xv, case.dim) + (case.m + case.sigma) * X)
    sqdt = np.sqrt(dt)
    theta = case.theta

    def run(_b, size, rng):
        w = np.broadcast_to(w0, (size, d2)).astype(complex)
        B = np.zeros(size)
        bad = np.zeros(size, dtype=bool)
        rec = {k: np.empty((len(times), size)) for k in ("S", "Z", "B", "C")}

        def record(k):
            for j in np.nonzero(steps == k)[0]:
                t = times[j]
                v = (w @ xv).real
                if is1:
                    rec["S"][j], rec["Z"][j] = v, np.exp(-theta * B - 0.5 * theta**2 * t)
                else:
                    rec["S"][j] = case.S0 * np.exp((case.alpha - 0.5 * case.sigma**2) * t + case.sigma * B)
                    rec["Z"][j], rec["C"][j] = v, (w @ cal_v).real
                rec["B"][j] = B

        record(0)
        for k in range(1, n_steps + 1):
            dB = rng.standard_normal(size) * sqdt
            w = w @ step_mat + (w @ noise) * dB[:, None]
            B += dB
            if not is1:
                bad |= (w @ xv).real <= 0
            record(k)
        return rec, bad

    parts = rand.map_batches(run, n_paths, seed)
    cat = {k: np.concatenate([p[0][k] for p in parts], axis=1) for k in ("S", "Z", "B", "C")}
    bad = np.concatenate([p[1] for p in parts])
    return MarketPaths(times, cat["S"], cat["Z"], np.exp(-case.r * times), cat["B"], bad,
                       None if is1 else cat["C"])


# --- martingale check ---------------------------------------------------------------------


@dataclass
class MartingaleReport:
    times: NDArray
    mean: NDArray
    se: NDArray
    z: NDArray
    target: float
    n_nonpositive: int
    moment: float | None  # Case 2: E[calZ^2 S^2] at the final time
    moment_se: float | None
    passed: bool

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))


def default_times(T: float = 1.0, n: int = 5) -> NDArray:
    return np.linspace(T / n, T, n)


def martingale_check(case: Market, times: Sequence[float] | None = None, n_paths: int = 100_000,
                     seed: int = rand.DEFAULT_SEED, dt: float = 1e-3, z_tol: float = Z_TOL) -> MartingaleReport:
    """z-scores of ``E[Z_t D_t S_t]`` against its starting value ``S_0 Tr(rho X)``.

    A run in which any Case 2 path has ``Z <= 0`` is excluded from acceptance.
    """
    times = default_times() if times is None else np.asarray(times, dtype=float)
    p = simulate_market(case, float(times[-1]), dt, n_paths, seed, times)
    prod = p.Z * p.S * p.D[:, None]
    mean = prod.mean(axis=1)
    se = prod.std(axis=1, ddof=1) / np.sqrt(prod.shape[1])
    s0 = 1.0 if isinstance(case, MarketCase1) else case.S0
    target = float(s0 * np.trace(case.rho @ case.X).real)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (mean - target) / se, np.where(np.abs(mean - target) < 1e-12, 0.0, np.inf))
    moment = moment_se = None
    if p.calZ is not None:
        q = (p.calZ[-1] * p.S[-1]) ** 2
        moment, moment_se = float(q.mean()), float(q.std(ddof=1) / np.sqrt(len(q)))
    ok = bool(np.all(np.abs(z) <= z_tol)) and p.n_nonpositive == 0
    return MartingaleReport(times, mean, se, z, target, p.n_nonpositive, moment, moment_se, ok)


# --- thermodynamic limit ------------------------------------------------------------------


@dataclass
class ThermoLimitReport:
    feasible: bool
    message: str
    X: NDArray | None = None
    kappa: float = float("nan")
    kappa_expected: float = float("nan")
    proportionality_residual: float = float("nan")
    closure_residual: float = float("nan")
    strong_error: float = float("nan")
    strong_bound: float = float("nan")
    autocorr: float = float("nan")
    autocorr_se: float = float("nan")
    autocorr_z: float = float("nan")
    smallest_singular: float = float("nan")
    autocorr_table: NDArray | None = None  # rows (lag, corr, se, z)
    passed: bool = False


def weighted_autocorr(increments: NDArray, weights: NDArray, lag: int = 1) -> tuple[float, float, float]:
    """Autocorrelation at ``lag`` of increments under the ``weights``-tilted measure.

    ``increments`` has shape ``(n_intervals, n_paths)``.  Returns the
    correlation, its standard error and the z-score of the weighted lagged covariance.
    """
    if not 1 <= lag < increments.shape[0]:
        raise ValidationError("lag must lie between 1 and the number of intervals minus one")
    w = weights / weights.mean()
    mu = (w[None] * increments).mean(axis=1)
    c = increments - mu[:, None]
    prod = (c[:-lag] * c[lag:]).mean(axis=0) * w
    var = ((c**2).mean(axis=0) * w).mean()
    cov, se = prod.mean(), prod.std(ddof=1) / np.sqrt(len(prod))
    return float(cov / var), float(se / var), float(cov / se) if se > 0 else 0.0


def thermodynamic_limit_check(case: MarketCase2, T: float = 1.0, dt: float = 1e-3, n_paths: int = 100_000,
                              seed: int = rand.DEFAULT_SEED, n_intervals: int = 10,
                              tol: float = 1e-10, z_tol: float = Z_TOL) -> ThermoLimitReport:
    """Impose ``L0[X] = 0`` with the Case 2 closure and test the classical reduction.

    On the joint solution space ``J[X] = kappa X`` with
    ``kappa = -(alpha - r + sigma m)/sigma``, so ``Z`` should reduce to
    ``Tr(rho X) exp(-theta B - theta^2 t / 2)``.  The EM density is compared
    with that factor in relative RMS against ``theta^2 sqrt(T dt)``, and the
    lag-1 autocorrelation of log-stock increments under ``Z`` weighting is
    tested against zero (lags 2 and 3 are reported as well).
    """
    if not isinstance(case, MarketCase2):
        raise ValidationError("the thermodynamic-limit check applies to Case 2")
    sol = solve_closure(case, extra_maps=[case.L0()])
    if not sol.solved:
        return ThermoLimitReport(False, "L0[X] = 0 and the closure condition are jointly infeasible "
                                 f"(smallest singular value {sol.smallest_singular:.3e})",
                                 smallest_singular=sol.smallest_singular)
    X = sol.X
    JX = unvec(case.J() @ vec(X), case.dim)
    kappa = float((np.vdot(X, JX) / np.vdot(X, X)).real)
    prop = float(np.max(np.abs(JX - kappa * X)))
    expected = -(case.alpha - case.r + case.sigma * case.m) / case.sigma
    solved = case.with_X(X)
    times = np.linspace(0, T, n_intervals + 1)
    p = simulate_market(solved, T, dt, n_paths, seed, times)
    theta = case.theta
    exact = np.trace(case.rho @ X).real * np.exp(-theta * p.B[-1] - 0.5 * theta**2 * T)
    err = float(np.sqrt(np.mean((p.Z[-1] - exact) ** 2) / np.mean(exact**2)))
    bound = max(theta**2 * np.sqrt(T * dt), 1e-12)
    increments = np.diff(np.log(p.S), axis=0)
    table = np.array([weighted_autocorr(increments, p.Z[-1], lag) for lag in range(1, min(4, n_intervals))])
    rho1, se, z = table[0]
    ok = prop <= tol and sol.residual <= tol and err <= bound and abs(z) <= z_tol and p.n_nonpositive == 0
    return ThermoLimitReport(True, "solved", X, kappa, expected, prop, sol.residual, err, bound,
                             float(rho1), float(se), float(z), sol.smallest_singular,
                             np.column_stack([np.arange(1, len(table) + 1), table]), bool(ok))
