"""Generators and master equations for memory processes.

Conventions: ``build_L0`` returns the Heisenberg (observable) generator
``L0[M] = Q M + M Q^dag + sum_j R_j M R_j^dag`` with ``Q = iH - 1/2 sum_j R_j R_j^dag``,
so ``L0[1] = 0``.  Marginal-rate families and birth-death generators act on
states (Schroedinger picture); their totals are trace preserving, i.e. the
adjoint annihilates the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .channelcore import adjoint, apply, expm_apply, is_hermitian, left, right, sandwich, unvec, vec
from .errors import DimensionError, ValidationError
from .smps import StochasticMPS, _clamp, _tails_from, _transfer_schrodinger

RK4_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class LindbladGenerator:
    H: NDArray
    Rs: tuple = ()

    def __post_init__(self):
        H = np.atleast_2d(np.array(self.H, dtype=complex))
        Rs = tuple(np.atleast_2d(np.array(r, dtype=complex)) for r in self.Rs)
        if H.shape[0] != H.shape[1] or any(r.shape != H.shape for r in Rs):
            raise DimensionError("H and all R_j must be square with a common dimension")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Rs", Rs)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def Q(self) -> NDArray:
        return 1j * self.H - 0.5 * sum((r @ r.conj().T for r in self.Rs), np.zeros_like(self.H))


def build_L0(g: LindbladGenerator, tol: float = 1e-12) -> NDArray:
    """Heisenberg-picture generator ``Q[.] + [.]Q^dag + sum_j R_j[.]R_j^dag``.

    Raises:
        ValidationError: if ``H`` is not Hermitian within ``tol``.
    """
    if not is_hermitian(g.H, tol):
        raise ValidationError("H must be Hermitian")
    q = g.Q()
    L0 = left(q) + right(q.conj().T)
    for r in g.Rs:
        L0 = L0 + sandwich(r)
    return L0


def build_L0_schrodinger(g: LindbladGenerator) -> NDArray:
    """State-picture generator, the Hilbert-Schmidt adjoint of :func:`build_L0`."""
    return adjoint(build_L0(g))


def unitality_residual(L: NDArray, picture: str = "heisenberg") -> float:
    """``max |L[1]|`` (Heisenberg) or ``max |L^dag[1]|`` (Schroedinger)."""
    d = int(round(np.sqrt(L.shape[0])))
    op = L if picture == "heisenberg" else adjoint(L)
    return float(np.max(np.abs(op @ vec(np.eye(d)))))


def rk4(f: Callable[[float, NDArray], NDArray], y0: NDArray, t: float, dt: float = RK4_STEP,
        t0: float = 0.0) -> NDArray:
    """Classical fixed-step Runge-Kutta from ``t0`` to ``t``.

    The step is shrunk so that an integer number of steps lands on ``t``.
    """
    n = max(1, int(np.ceil((t - t0) / dt - 1e-9)))
    h = (t - t0) / n
    y = np.array(y0, dtype=np.result_type(y0, float))
    s = t0
    for _ in range(n):
        k1 = f(s, y)
        k2 = f(s + h / 2, y + h / 2 * k1)
        k3 = f(s + h / 2, y + h / 2 * k2)
        k4 = f(s + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s += h
    return y


def check_rate_matrix(G: NDArray, tol: float = 1e-12) -> NDArray:
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionError("rate matrix must be square")
    off = G - np.diag(np.diag(G))
    if np.any(off < -tol):
        raise ValidationError("rate matrix has negative off-diagonal entries")
    if np.max(np.abs(G.sum(axis=0)), initial=0.0) > tol * max(1.0, np.abs(G).max()):
        raise ValidationError("rate matrix columns must sum to zero")
    return G


def classical_master_reference(G: NDArray, p0: NDArray, t: float) -> NDArray:
    """Solution ``exp(tG) p0`` of ``dp/dt = G p`` (``G[k, l]`` is the rate l -> k)."""
    G = check_rate_matrix(G)
    p = np.real(expm_apply(G, t) @ np.asarray(p0, dtype=float))
    return np.clip(p, 0.0, None)


def discretize_rate_matrix(G: NDArray, delta: float) -> NDArray:
    """Column-stochastic one-step matrix ``1 + delta G``."""
    G = check_rate_matrix(G)
    T = np.eye(G.shape[0]) + delta * G
    if np.any(T < 0):
        raise ValidationError("step too large: 1 + delta*G has negative entries")
    return T


def discrete_marginal_evolution(s: StochasticMPS, n: int, return_pairs: bool = False):
    """Marginal of ``X_n`` through the two-site dressing of the transfer power.

    The state is propagated through sites ``1..n-2`` with the transfer map,
    dressed by symbol ``l`` at site ``n-1`` and ``k`` at site ``n``, then paired
    with the pulled-back closure.  ``pairs[k, l]`` is the joint law of
    ``(X_n, X_{n-1})`` and the marginal is its row sum.
    """
    if not 2 <= n <= s.N:
        raise IndexError(f"site {n} outside 2..{s.N}")
    sigma = s.rho
    for fam in s.sites[: n - 2]:
        sigma = _transfer_schrodinger(fam, sigma)
    prev, cur = s.sites[n - 2], s.sites[n - 1]
    tail = _tails_from(s, n)
    pairs = np.empty((cur.size, prev.size))
    for l in range(prev.size):
        dressed = prev.schrodinger(l, sigma)
        for k in range(cur.size):
            pairs[k, l] = float(np.trace(cur.schrodinger(k, dressed) @ tail).real)
    marg = np.array([_clamp(p) for p in pairs.sum(axis=1)])
    return (marg, pairs) if return_pairs else marg


@dataclass(frozen=True, eq=False)
class MarginalRateFamily:
    """State-picture pieces ``S^{(l)}`` of a generator and the symbol projectors ``P_k``.

    ``S^{(l)}`` collects every term of the generator attached to symbol ``l``;
    the flow into symbol ``k`` from ``l`` is ``Tr(P_k S^{(l)}[rho_t])``.
    """

    superops: tuple
    projectors: tuple

    def __post_init__(self):
        sops = tuple(np.array(s, dtype=complex) for s in self.superops)
        projs = tuple(np.array(p, dtype=complex) for p in self.projectors)
        dims = {s.shape for s in sops}
        if len(dims) != 1:
            raise DimensionError("superoperators must share a shape")
        d = int(round(np.sqrt(sops[0].shape[0])))
        if any(p.shape != (d, d) for p in projs):
            raise DimensionError("projectors must match the superoperator dimension")
        if np.max(np.abs(sum(projs) - np.eye(d))) > 1e-12:
            raise ValidationError("symbol projectors must resolve the identity")
        object.__setattr__(self, "superops", sops)
        object.__setattr__(self, "projectors", projs)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def total(self) -> NDArray:
        return sum(self.superops)

    @staticmethod
    def term(Q: NDArray | None = None, Rs: Sequence[NDArray] = ()) -> NDArray:
        """``Q[.] + [.]Q^dag + sum_j R_j^dag [.] R_j`` as a superoperator."""
        parts = []
        if Q is not None:
            Q = np.asarray(Q, dtype=complex)
            parts.append(left(Q) + right(Q.conj().T))
        for r in Rs:
            r = np.asarray(r, dtype=complex)
            parts.append(sandwich(r.conj().T, r))
        if not parts:
            raise ValidationError("empty term")
        return sum(parts)


def classical_rate_family(G: NDArray) -> MarginalRateFamily:
    """Diagonal embedding of a rate matrix: ``S^{(l)}[rho] = sum_k G[k, l] rho_ll |k><k|``."""
    G = check_rate_matrix(G)
    d = G.shape[0]
    sops, projs = [], []
    for l in range(d):
        s = np.zeros((d * d, d * d), dtype=complex)
        e_ll = np.diag(np.eye(d)[l])
        s += MarginalRateFamily.term(0.5 * G[l, l] * e_ll)
        for k in range(d):
            if k != l and G[k, l] > 0:
                # R = sqrt(G_kl)|l><k| so that R^dag rho R = G_kl rho_ll |k><k|
                r = np.sqrt(G[k, l]) * np.outer(np.eye(d)[l], np.eye(d)[k])
                s += MarginalRateFamily.term(None, [r])
        sops.append(s)
        projs.append(np.diag(np.eye(d)[l]))
    return MarginalRateFamily(tuple(sops), tuple(projs))


def marginal_flows(L: NDArray, fam: MarginalRateFamily, rho: NDArray, t: float) -> NDArray:
    """Matrix ``F[k, l] = Tr(P_k S^{(l)}[exp(tL)[rho]])`` of probability flows."""
    rho_t = apply(expm_apply(L, t), rho)
    return _flows(fam, rho_t)


def _flows(fam: MarginalRateFamily, rho_t: NDArray) -> NDArray:
    d = fam.dim
    out = np.empty((len(fam.projectors), len(fam.superops)))
    for l, s in enumerate(fam.superops):
        img = unvec(s @ vec(rho_t), d)
        for k, p in enumerate(fam.projectors):
            out[k, l] = float(np.trace(p @ img).real)
    return out


def continuous_marginal_rate(L: NDArray, fam: MarginalRateFamily, rho: NDArray, t: float,
                             tol: float = 1e-12) -> NDArray:
    """Rates ``d/dt P(X_t = k) = sum_l Tr(P_k S^{(l)}[exp(tL)[rho]])``.

    ``L`` is the state-picture total generator; it must equal the sum of the
    family's superoperators within ``tol``.
    """
    L = np.asarray(L, dtype=complex)
    if np.max(np.abs(fam.total() - L)) > tol:
        raise ValidationError("rate family does not sum to the generator")
    return marginal_flows(L, fam, rho, t).sum(axis=1)


def continuous_marginal(L: NDArray, fam: MarginalRateFamily, rho: NDArray, t: float) -> NDArray:
    """``P(X_t = k) = Tr(P_k exp(tL)[rho])`` from the exact semigroup."""
    rho_t = apply(expm_apply(L, t), rho)
    return np.array([float(np.trace(p @ rho_t).real) for p in fam.projectors])


# --- non-Markovian birth-death ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BirthDeathModel:
    """Level-resolved generator on ``C^dim (x) span{|0>, ..., |n_max>}``.

    Basis index ``a * (n_max + 1) + n`` holds internal state ``a`` at level ``n``.
    """

    family: MarginalRateFamily
    L: NDArray
    dim: int
    n_max: int
    consistency_residual: float

    def initial_state(self, level_weights: NDArray, internal: NDArray | None = None) -> NDArray:
        w = np.asarray(level_weights, dtype=float)
        if w.shape != (self.n_max + 1,):
            raise DimensionError("one weight per level is required")
        internal = np.eye(self.dim) / self.dim if internal is None else np.asarray(internal)
        return np.kron(internal, np.diag(w / w.sum()))


def _level_unit(n_levels: int, a: int, b: int) -> NDArray:
    e = np.zeros((n_levels, n_levels))
    e[a, b] = 1.0
    return e


def birth_death_generator(G_diag: Sequence[NDArray], G_up: Sequence[NDArray], G_down: Sequence[NDArray],
                          tol: float = 1e-10) -> BirthDeathModel:
    """Non-Markovian birth-death generator from internal blocks.

    Args:
        G_diag: ``n_max + 1`` blocks ``G_{n,n}``.
        G_up: ``n_max`` blocks ``G_{n,n+1}`` (``n = 0..n_max-1``); level
            ``n_max`` has no birth (reflecting boundary).
        G_down: ``n_max`` blocks ``G_{n,n-1}`` (``n = 1..n_max``).

    Level ``n`` contributes ``Q = -1/2 G_{n,n} (x) |n><n|``,
    ``R_+ = G_{n,n+1} (x) |n><n+1|`` and ``R_- = G_{n,n-1} (x) |n><n-1|`` to
    ``S^{(n)} = Q[.] + [.]Q^dag + R_+^dag[.]R_+ + R_-^dag[.]R_-``.  Trace
    preservation requires ``G_{n,n} + G_{n,n}^dag = 2 (G_{n,n+1}G_{n,n+1}^dag + G_{n,n-1}G_{n,n-1}^dag)``.

    Raises:
        ValidationError: when that condition fails beyond ``tol``.
    """
    G_diag = [np.atleast_2d(np.asarray(g, dtype=complex)) for g in G_diag]
    n_levels = len(G_diag)
    n_max = n_levels - 1
    if len(G_up) != n_max or len(G_down) != n_max:
        raise DimensionError("need n_max birth blocks and n_max death blocks")
    G_up = [np.atleast_2d(np.asarray(g, dtype=complex)) for g in G_up] + [None]
    G_down = [None] + [np.atleast_2d(np.asarray(g, dtype=complex)) for g in G_down]
    dim = G_diag[0].shape[0]
    worst = 0.0
    sops, projs = [], []
    for n in range(n_levels):
        jumps = []
        lhs = G_diag[n] + G_diag[n].conj().T
        rhs = np.zeros((dim, dim), dtype=complex)
        if G_up[n] is not None:
            jumps.append(np.kron(G_up[n], _level_unit(n_levels, n, n + 1)))
            rhs += 2 * G_up[n] @ G_up[n].conj().T
        if G_down[n] is not None:
            jumps.append(np.kron(G_down[n], _level_unit(n_levels, n, n - 1)))
            rhs += 2 * G_down[n] @ G_down[n].conj().T
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        Q = -0.5 * np.kron(G_diag[n], _level_unit(n_levels, n, n))
        sops.append(MarginalRateFamily.term(Q, jumps))
        projs.append(np.kron(np.eye(dim), _level_unit(n_levels, n, n)))
    if worst > tol:
        raise ValidationError(f"birth-death blocks violate the consistency condition (residual {worst:.3e})")
    fam = MarginalRateFamily(tuple(sops), tuple(projs))
    return BirthDeathModel(fam, fam.total(), dim, n_max, worst)


def scalar_birth_death_blocks(birth: Sequence[float], death: Sequence[float]):
    """Blocks for a classical chain with birth rates ``birth[n]`` (n -> n+1) and death rates ``death[n]``.

    ``birth`` has length ``n_max`` (levels ``0..n_max-1``), ``death`` length
    ``n_max`` (levels ``1..n_max``).
    """
    birth, death = np.asarray(birth, float), np.asarray(death, float)
    n_max = len(birth)
    lam = np.append(birth, 0.0)
    mu = np.insert(death, 0, 0.0)
    G_diag = [np.array([[lam[n] + mu[n]]]) for n in range(n_max + 1)]
    G_up = [np.array([[np.sqrt(b)]]) for b in birth]
    G_down = [np.array([[np.sqrt(m)]]) for m in death]
    return G_diag, G_up, G_down


def random_birth_death_blocks(dim: int, n_max: int, rng: np.random.Generator, scale: float = 0.5):
    """Random blocks satisfying the consistency condition (Hermitian part fixed, anti-Hermitian free)."""
    def rnd():
        return scale * (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2 * dim)

    G_up = [rnd() for _ in range(n_max)]
    G_down = [rnd() for _ in range(n_max)]
    G_diag = []
    for n in range(n_max + 1):
        herm = np.zeros((dim, dim), dtype=complex)
        if n < n_max:
            herm += G_up[n] @ G_up[n].conj().T
        if n > 0:
            herm += G_down[n - 1] @ G_down[n - 1].conj().T
        k = rnd()
        G_diag.append(herm + 1j * (k + k.conj().T) / 2)
    return G_diag, G_up, G_down


@dataclass
class BirthDeathRun:
    times: NDArray
    marginals: NDArray
    tail_mass: float
    truncation_ok: bool
    messages: list[str] = field(default_factory=list)


def birth_death_marginals(model: BirthDeathModel, rho0: NDArray, times: Sequence[float],
                          method: str = "semigroup", dt: float = RK4_STEP,
                          tail_tol: float = 1e-8) -> BirthDeathRun:
    """Level marginals over a time grid, with the truncation guard.

    The guard records the largest mass found above ``n_max - 2``; the run is
    flagged when it exceeds ``tail_tol``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValidationError("time grid must be non-decreasing")
    L = model.L
    out = []
    v = vec(np.asarray(rho0, dtype=complex))
    t_prev = 0.0
    for t in times:
        if method == "semigroup":
            v_t = expm_apply(L, t) @ vec(np.asarray(rho0, dtype=complex))
        elif method == "rk4":
            v = rk4(lambda _s, y: L @ y, v, t, dt, t0=t_prev) if t > t_prev else v
            t_prev = t
            v_t = v
        else:
            raise ValueError(f"unknown method {method!r}")
        rho_t = unvec(v_t)
        out.append([float(np.trace(p @ rho_t).real) for p in model.family.projectors])
    marg = np.array(out)
    tail = float(marg[:, max(model.n_max - 1, 0):].sum(axis=1).max()) if model.n_max >= 2 else 0.0
    ok = tail <= tail_tol
    msgs = [] if ok else [f"mass {tail:.3e} above level n_max-2 exceeds {tail_tol:g}"]
    return BirthDeathRun(times, marg, tail, ok, msgs)
