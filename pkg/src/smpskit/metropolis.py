"""Single-flip sampling of the open Ising chain ``H = sum_j s_j s_{j+1}``.

Configurations are indexed by integers: bit ``N-1-j`` of the index is 1 when
spin ``j`` is -1 (so index 0 is all spins up and the order is lexicographic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import rand
from .errors import ValidationError

MAX_EXACT_N = 20
MAX_KERNEL_N = 12


@dataclass(frozen=True)
class IsingChain:
    N: int
    beta: float

    def __post_init__(self):
        if self.N < 2:
            raise ValidationError("the chain needs at least two spins")


def all_configs(N: int) -> NDArray:
    """Array ``(2**N, N)`` of spins in index order."""
    if N > MAX_EXACT_N:
        raise ValidationError(f"enumeration of 2**{N} configurations is infeasible")
    bits = (np.arange(2**N)[:, None] >> np.arange(N - 1, -1, -1)[None]) & 1
    return 1 - 2 * bits


def energy(spins: NDArray) -> NDArray:
    spins = np.asarray(spins)
    return (spins[..., :-1] * spins[..., 1:]).sum(axis=-1)


def gibbs_exact(chain: IsingChain) -> NDArray:
    """``exp(-beta H) / Z`` over all configurations."""
    e = energy(all_configs(chain.N))
    w = np.exp(-chain.beta * (e - e.min()))
    return w / w.sum()


def flip_probability(beta: float, dH: NDArray, rule: str = "glauber") -> NDArray:
    """Acceptance of a proposed single flip with energy change ``dH``."""
    dH = np.asarray(dH, dtype=float)
    if rule == "glauber":
        return 1.0 / (1.0 + np.exp(beta * dH))
    if rule == "metropolis":
        return np.minimum(1.0, np.exp(-beta * dH))
    raise ValueError(f"unknown rule {rule!r}")


def _delta_energy(spins: NDArray, j: int) -> NDArray:
    N = spins.shape[-1]
    nb = np.zeros(spins.shape[:-1], dtype=int)
    if j > 0:
        nb = nb + spins[..., j - 1]
    if j < N - 1:
        nb = nb + spins[..., j + 1]
    return -2 * spins[..., j] * nb


def site_kernel(chain: IsingChain, j: int, rule: str = "glauber") -> NDArray:
    """Column-stochastic ``K[s', s] = P(s -> s')`` for an update attempt at site ``j``."""
    if chain.N > MAX_KERNEL_N:
        raise ValidationError("explicit kernels are limited to small chains")
    spins = all_configs(chain.N)
    p = flip_probability(chain.beta, _delta_energy(spins, j), rule)
    idx = np.arange(2**chain.N)
    flipped = idx ^ (1 << (chain.N - 1 - j))
    K = np.zeros((2**chain.N, 2**chain.N))
    K[flipped, idx] = p
    K[idx, idx] += 1 - p
    return K


def random_scan_kernel(chain: IsingChain, rule: str = "glauber") -> NDArray:
    return sum(site_kernel(chain, j, rule) for j in range(chain.N)) / chain.N


def sweep_kernel(chain: IsingChain, rule: str = "glauber") -> NDArray:
    """One systematic sweep over sites ``0..N-1``."""
    K = np.eye(2**chain.N)
    for j in range(chain.N):
        K = site_kernel(chain, j, rule) @ K
    return K


def detailed_balance_residual(chain: IsingChain, kernel: NDArray, target: NDArray | None = None) -> float:
    """``max |p(s) K(s -> s') - p(s') K(s' -> s)|``."""
    p = gibbs_exact(chain) if target is None else target
    flow = kernel * p[None, :]
    return float(np.max(np.abs(flow - flow.T)))


def stationarity_check(chain: IsingChain, kernel: NDArray | None = None, target_beta: float | None = None,
                       rule: str = "glauber") -> float:
    """``|| K p - p ||_1`` for the sweep kernel and the Gibbs law at ``target_beta``."""
    K = sweep_kernel(chain, rule) if kernel is None else kernel
    beta = chain.beta if target_beta is None else target_beta
    p = gibbs_exact(IsingChain(chain.N, beta))
    return float(np.abs(K @ p - p).sum())


@dataclass
class MetropolisRun:
    counts: NDArray
    magnetization: NDArray
    energy: NDArray
    acceptance_rate: float
    mean_magnetization: float
    se_magnetization: float
    mean_energy: float
    se_energy: float

    def empirical(self) -> NDArray:
        return self.counts / self.counts.sum()


def batch_means_se(x: NDArray, n_batches: int = 50) -> float:
    usable = len(x) - len(x) % n_batches
    means = np.asarray(x[:usable], dtype=float).reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def metropolis_run(chain: IsingChain, n_steps: int, burn_in: int = 0, seed: int = rand.DEFAULT_SEED,
                   rule: str = "glauber", initial: NDArray | None = None) -> MetropolisRun:
    """Random-site single-flip chain; statistics use the steps after ``burn_in``.

    ``magnetization`` and ``energy`` are recorded after every step.
    """
    if n_steps <= burn_in:
        raise ValidationError("n_steps must exceed burn_in")
    N = chain.N
    rng = rand.substream(seed, 0)
    sites = rng.integers(0, N, n_steps)
    u = rng.random(n_steps)
    spins = [1] * N if initial is None else [int(s) for s in initial]
    accept = {dh: float(flip_probability(chain.beta, dh, rule)) for dh in (-4, -2, 0, 2, 4)}
    code = sum((1 << (N - 1 - j)) for j in range(N) if spins[j] < 0)
    mag = sum(spins)
    en = sum(spins[j] * spins[j + 1] for j in range(N - 1))
    counts = np.zeros(2**N, dtype=np.int64) if N <= MAX_EXACT_N else None
    mags = np.empty(n_steps, dtype=np.int64)
    ens = np.empty(n_steps, dtype=np.int64)
    n_acc = 0
    for t in range(n_steps):
        j = sites[t]
        s = spins[j]
        nb = (spins[j - 1] if j > 0 else 0) + (spins[j + 1] if j < N - 1 else 0)
        dh = -2 * s * nb
        if u[t] < accept[dh]:
            spins[j] = -s
            code ^= 1 << (N - 1 - j)
            mag -= 2 * s
            en += dh
            n_acc += 1
        mags[t] = mag
        ens[t] = en
        if counts is not None and t >= burn_in:
            counts[code] += 1
    m, e = mags[burn_in:] / N, ens[burn_in:]
    return MetropolisRun(counts, mags, ens, n_acc / n_steps, float(m.mean()), batch_means_se(m),
                         float(e.mean()), batch_means_se(e))


def total_variation(p: NDArray, q: NDArray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass
class GibbsMPSForm:
    """Bond-dimension-2 weights ``L^T B_first(s_1) B(s_2) ... B(s_N) R``.

    ``B[s]`` (``s`` index 0 for spin +1, 1 for -1) has entries
    ``B[s][a, b] = delta_{b, s} exp(-beta spin(a) spin(s))``: the bond carries the
    previous spin and each site contributes its bond energy.
    """

    L: NDArray
    R: NDArray
    B_first: NDArray
    B: NDArray
    weights: NDArray
    max_deviation: float
    diagonal_form_tv: float


def gibbs_smps_form(chain: IsingChain) -> GibbsMPSForm:
    """Matrix-product weights of the Gibbs law, compared against enumeration.

    Also reports the total-variation distance between the Gibbs law and the
    weights of the diagonal matrices ``diag(e^{2 beta s}, e^{-2 beta s})``, which
    depend on the configuration only through the total magnetization.
    """
    spin = np.array([1, -1])
    beta = chain.beta
    L = np.array([1.0, 0.0])
    R = np.ones(2)
    B_first = np.zeros((2, 2, 2))
    B = np.zeros((2, 2, 2))
    for s in range(2):
        B_first[s][:, s] = 1.0
        B[s][:, s] = np.exp(-beta * spin * spin[s])
    configs = all_configs(chain.N)
    idx = (1 - configs) // 2
    w = np.empty(len(configs))
    for c, row in enumerate(idx):
        v = L @ B_first[row[0]]
        for s in row[1:]:
            v = v @ B[s]
        w[c] = v @ R
    w /= w.sum()
    exact = gibbs_exact(chain)
    diag = np.exp(2 * beta * configs.sum(axis=1)) + np.exp(-2 * beta * configs.sum(axis=1))
    return GibbsMPSForm(L, R, B_first, B, w, float(np.max(np.abs(w - exact))),
                        total_variation(diag / diag.sum(), exact))
