"""Stochastic matrix product states.

A chain of Kraus families ``A[1], ..., A[N]`` with boundary density ``rho`` and
closure ``X`` assigns the trajectory ``x_1..x_N`` the probability

    Tr(rho Phi_{x_1} o ... o Phi_{x_N}[X]),   Phi_x[M] = sum_k A_{x,k} M A_{x,k}^dagger.

Element-wise positive chains ``B^{(x)}`` (non-negative matrices whose sum is
column stochastic) are embedded with rank-one operators
``sqrt(B^{(x)}_{y,z}) |z><y|``.  Under that embedding the chain weight reads
``R^T B^{(x_N)} ... B^{(x_1)} L`` with ``L`` the distribution of the hidden
state before the first site.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from . import rand
from .channelcore import (
    KrausFamily,
    choi_of,
    choi_to_kraus,
    is_hermitian,
    kraus_to_transfer,
    min_eig,
    psd_inv_sqrt,
    psd_sqrt,
)
from .errors import DimensionError, NumericalValidityError, ValidationError

NEG_CLAMP = 1e-12
MAX_ENUMERATION = 2**20


@dataclass(frozen=True, eq=False)
class StochasticMPS:
    sites: tuple
    rho: NDArray
    closure: NDArray

    def __post_init__(self):
        sites = tuple(self.sites)
        if not sites:
            raise ValidationError("an sMPS needs at least one site")
        dim, alphabet = sites[0].dim, sites[0].alphabet
        for fam in sites:
            if fam.dim != dim:
                raise DimensionError("all sites must share the bond dimension")
            if fam.alphabet != alphabet:
                raise ValidationError("all sites must share the alphabet")
        rho = np.array(self.rho, dtype=complex)
        closure = np.array(self.closure, dtype=complex)
        for name, m in (("rho", rho), ("closure", closure)):
            if m.shape != (dim, dim):
                raise DimensionError(f"{name} must be {dim}x{dim}, got {m.shape}")
            m.setflags(write=False)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "closure", closure)

    @classmethod
    def uniform(cls, family: KrausFamily, n: int, rho=None, closure=None) -> "StochasticMPS":
        """Translation-invariant chain of length ``n`` reusing one family."""
        d = family.dim
        rho = np.eye(d) / d if rho is None else rho
        closure = np.eye(d) if closure is None else closure
        return cls((family,) * n, rho, closure)

    @property
    def N(self) -> int:
        return len(self.sites)

    @property
    def D(self) -> int:
        return self.sites[0].dim

    @property
    def d(self) -> int:
        return self.sites[0].size

    @property
    def alphabet(self) -> tuple:
        return self.sites[0].alphabet

    def is_translation_invariant(self) -> bool:
        first = self.sites[0]
        return all(
            f is first or all(np.allclose(a, b) for a, b in zip(f.operators, first.operators))
            for f in self.sites
        )


@dataclass
class ValidationReport:
    passed: bool
    site_residuals: list[float]
    rho_min_eig: float
    rho_trace_error: float
    closure_min_eig: float
    total_probability: float | None = None
    messages: list[str] = field(default_factory=list)


def validate(s: StochasticMPS, tol: float = 1e-10) -> ValidationReport:
    """Check normalization of every site and positivity of the boundaries.

    When ``d**N <= 4096`` the exhaustive sum of joint probabilities is
    reported as well; it is informative only (a non-identity closure need not
    preserve normalization).
    """
    residuals = [f.normalization_residual() for f in s.sites]
    rho_eig = min_eig(s.rho)
    trace_err = abs(np.trace(s.rho) - 1)
    closure_eig = min_eig(s.closure)
    msgs = []
    for n, r in enumerate(residuals, 1):
        if r > tol:
            msgs.append(f"site {n}: normalization residual {r:.3e}")
    if not is_hermitian(s.rho, tol) or rho_eig < -tol:
        msgs.append(f"rho is not PSD (min eigenvalue {rho_eig:.3e})")
    if trace_err > tol:
        msgs.append(f"rho trace differs from 1 by {trace_err:.3e}")
    if not is_hermitian(s.closure, tol) or closure_eig < -tol:
        msgs.append(f"closure is not PSD (min eigenvalue {closure_eig:.3e})")
    total = None
    if s.d**s.N <= 4096:
        total = float(_enumerate_weights(s).sum())
    return ValidationReport(not msgs, residuals, rho_eig, float(trace_err), closure_eig, total, msgs)


def _clamp(p: float) -> float:
    if p < -NEG_CLAMP:
        raise NumericalValidityError(f"negative probability {p:.3e}")
    return min(max(p, 0.0), 1.0)


def _indices(s: StochasticMPS, traj: Sequence) -> list[int]:
    if len(traj) != s.N:
        raise ValidationError(f"trajectory has length {len(traj)}, chain has {s.N} sites")
    return [fam.index(x) for fam, x in zip(s.sites, traj)]


def joint_probability(s: StochasticMPS, traj: Sequence) -> float:
    """Probability of one full trajectory (clamped to [0, 1])."""
    m = s.closure
    for fam, i in zip(reversed(s.sites), reversed(_indices(s, traj))):
        m = fam.heisenberg(i, m)
    return _clamp(float(np.trace(s.rho @ m).real))


def pattern_probability(s: StochasticMPS, fixed: Mapping[int, object]) -> float:
    """Probability that the 1-based sites in ``fixed`` show the given symbols.

    Sites not listed are summed over.
    """
    for n in fixed:
        if not 1 <= n <= s.N:
            raise IndexError(f"site {n} outside 1..{s.N}")
    m = s.closure
    for n in range(s.N, 0, -1):
        fam = s.sites[n - 1]
        if n in fixed:
            m = fam.heisenberg(fam.index(fixed[n]), m)
        else:
            m = _transfer_heisenberg(fam, m)
    return _clamp(float(np.trace(s.rho @ m).real))


def _transfer_heisenberg(fam: KrausFamily, m: NDArray) -> NDArray:
    return sum(fam.heisenberg(i, m) for i in range(fam.size))


def _transfer_schrodinger(fam: KrausFamily, rho: NDArray) -> NDArray:
    return sum(fam.schrodinger(i, rho) for i in range(fam.size))


def _tails(s: StochasticMPS) -> list[NDArray]:
    """``tails[n]`` is the closure pulled back through sites ``n+1..N`` (0-based n)."""
    tails = [None] * (s.N + 1)
    tails[s.N] = s.closure
    for n in range(s.N - 1, -1, -1):
        tails[n] = _transfer_heisenberg(s.sites[n], tails[n + 1])
    return tails


def _enumerate_weights(s: StochasticMPS) -> NDArray:
    """Weights of all ``d**N`` trajectories, lexicographic in the symbol indices."""
    if s.d**s.N > MAX_ENUMERATION:
        raise ValidationError(f"enumeration of {s.d}**{s.N} trajectories is infeasible")
    states = s.rho[None]
    for fam in s.sites:
        states = np.stack(
            [np.einsum("kba,mbc,kcd->mad", a.conj(), states, a) for a in fam.operators], axis=1
        ).reshape(-1, s.D, s.D)
    return np.einsum("mab,ba->m", states, s.closure).real


def enumerate_joint(s: StochasticMPS) -> tuple[NDArray, NDArray]:
    """All trajectories (as symbol-index rows) and their probabilities."""
    w = _enumerate_weights(s)
    if w.min(initial=0.0) < -NEG_CLAMP:
        raise NumericalValidityError(f"negative probability {w.min():.3e}")
    idx = np.array(list(itertools.product(range(s.d), repeat=s.N)), dtype=int).reshape(-1, s.N)
    return idx, np.clip(w, 0.0, 1.0)


@dataclass(frozen=True)
class FilterState:
    """Conditional bond state after a sequence of observations."""

    rho_cond: NDArray
    loglik: float = 0.0
    absorbed: bool = False


def filter_start(s: StochasticMPS) -> FilterState:
    return FilterState(np.array(s.rho) / np.trace(s.rho).real)


def predictive_distribution(f: FilterState, site: KrausFamily) -> NDArray:
    """Outcome probabilities ``Tr(rho_cond E_x)`` for the next site."""
    p = np.einsum("ab,xba->x", f.rho_cond, site.effects()).real
    if p.min() < -NEG_CLAMP:
        raise NumericalValidityError(f"negative predictive probability {p.min():.3e}")
    return np.clip(p, 0.0, None)


def filter_step(f: FilterState, site: KrausFamily, x, floor: float = 1e-300) -> FilterState:
    """Condition on outcome ``x``: ``rho -> sum_k A^dag rho A / p``.

    An outcome with probability below ``floor`` yields an absorbed state with
    ``loglik = -inf`` instead of dividing by zero.
    """
    if f.absorbed:
        return f
    i = site.index(x)
    new = site.schrodinger(i, f.rho_cond)
    p = float(np.trace(new).real)
    if p < floor:
        return FilterState(f.rho_cond, -np.inf, True)
    new = new / p
    return FilterState((new + new.conj().T) / 2, f.loglik + np.log(p), False)


def sample_trajectories(s: StochasticMPS, n_paths: int, seed: int = rand.DEFAULT_SEED) -> NDArray:
    """Exact i.i.d. draws from the joint law by sequential conditioning.

    Returns an array ``(n_paths, N)`` of alphabet symbols.
    """
    tails = _tails(s)
    # looked[n, x] = Phi_x[tails[n+1]] so that Tr(sigma looked[n, x]) is the weight of x
    looked = [np.stack([fam.heisenberg(i, tails[n + 1]) for i in range(fam.size)])
              for n, fam in enumerate(s.sites)]
    norm = float(np.trace(s.rho @ tails[0]).real)
    if norm <= 0:
        raise NumericalValidityError("model assigns zero total weight")

    def run(_b, size, rng):
        sigma = np.broadcast_to(s.rho / norm, (size, s.D, s.D)).copy()
        out = np.empty((size, s.N), dtype=int)
        for n, fam in enumerate(s.sites):
            w = np.clip(np.einsum("mab,xba->mx", sigma, looked[n]).real, 0.0, None)
            cdf = np.cumsum(w, axis=1)
            u = rng.random(size) * cdf[:, -1]
            choice = np.minimum((cdf < u[:, None]).sum(axis=1), fam.size - 1)
            out[:, n] = choice
            for i in range(fam.size):
                mask = choice == i
                if mask.any():
                    a = fam.operators[i]
                    upd = np.einsum("kba,mbc,kcd->mad", a.conj(), sigma[mask], a)
                    sigma[mask] = upd / w[mask, i][:, None, None]
        return out

    idx = np.concatenate(rand.map_batches(run, n_paths, seed)) if n_paths else np.empty((0, s.N), int)
    return np.asarray(s.alphabet)[idx]


def marginal_at(s: StochasticMPS, n: int) -> NDArray:
    """Distribution of the symbol at 1-based site ``n``."""
    if not 1 <= n <= s.N:
        raise IndexError(f"site {n} outside 1..{s.N}")
    sigma = s.rho
    for fam in s.sites[: n - 1]:
        sigma = _transfer_schrodinger(fam, sigma)
    fam = s.sites[n - 1]
    tail = _tails_from(s, n)
    return np.array([_clamp(float(np.trace(sigma @ fam.heisenberg(i, tail)).real)) for i in range(fam.size)])


def _tails_from(s: StochasticMPS, n: int) -> NDArray:
    """Closure pulled back through sites ``n+1..N`` (1-based)."""
    m = s.closure
    for fam in reversed(s.sites[n:]):
        m = _transfer_heisenberg(fam, m)
    return m


def gauge_transform(s: StochasticMPS, g: NDArray) -> StochasticMPS:
    """Apply ``A -> g^{-1/2} A g^{1/2}``, ``rho -> g^{1/2} rho g^{1/2}``.

    The closure becomes ``g^{-1/2} X g^{-1/2}`` so joint probabilities are
    unchanged; choosing ``g = X`` yields an identity closure.
    """
    half = psd_sqrt(g)
    inv_half = psd_inv_sqrt(g)
    sites = []
    cache = {}
    for fam in s.sites:
        if id(fam) not in cache:
            ops = tuple(np.einsum("ab,kbc,cd->kad", inv_half, a, half) for a in fam.operators)
            cache[id(fam)] = KrausFamily(fam.alphabet, ops)
        sites.append(cache[id(fam)])
    return StochasticMPS(tuple(sites), half @ s.rho @ half, inv_half @ s.closure @ inv_half)


# --- element-wise positive chains ---------------------------------------------------------


def _elementwise_family(b: NDArray, alphabet: Sequence) -> KrausFamily:
    d, dim, _ = b.shape
    ops = []
    for i in range(d):
        stack = []
        for y, z in zip(*np.nonzero(b[i] > 0)):
            a = np.zeros((dim, dim), dtype=complex)
            a[z, y] = np.sqrt(b[i, y, z])
            stack.append(a)
        ops.append(np.array(stack) if stack else np.zeros((1, dim, dim)))
    return KrausFamily(tuple(alphabet), tuple(ops))


def from_elementwise_positive(
    b_families: NDArray | Sequence[NDArray],
    L: NDArray,
    R: NDArray | None = None,
    n: int | None = None,
    alphabet: Sequence | None = None,
    tol: float = 1e-12,
) -> StochasticMPS:
    """Embed an element-wise positive chain as completely positive maps.

    Args:
        b_families: array ``(d, D, D)`` shared by all sites (then ``n`` is
            required) or a sequence of such arrays, one per site.
        L: non-negative weights of the hidden state entering the first site.
        R: non-negative closure weights (default all ones).
        n: chain length for the shared form.
        alphabet: symbol labels, default ``0..d-1``.

    Raises:
        ValidationError: negative entries or a non column-stochastic sum.
    """
    arr = np.asarray(b_families, dtype=float)
    if arr.ndim == 3:
        if n is None:
            raise ValidationError("chain length n is required for a shared family")
        per_site = [arr] * n
    elif arr.ndim == 4:
        per_site = list(arr)
    else:
        raise DimensionError(f"expected (d, D, D) or (N, d, D, D), got {arr.shape}")
    L = np.asarray(L, dtype=float)
    dim = per_site[0].shape[1]
    R = np.ones(dim) if R is None else np.asarray(R, dtype=float)
    if np.any(L < 0) or np.any(R < 0):
        raise ValidationError("boundary vectors must be entrywise non-negative")
    if L.sum() <= 0:
        raise ValidationError("left boundary has zero mass")
    alphabet = tuple(range(per_site[0].shape[0])) if alphabet is None else tuple(alphabet)
    cache = {}
    sites = []
    for b in per_site:
        if np.any(b < 0):
            raise ValidationError("element-wise form requires non-negative entries")
        colsum = b.sum(axis=0).sum(axis=0)
        if np.max(np.abs(colsum - 1)) > tol:
            raise ValidationError(f"transfer matrix is not column stochastic (column sums {colsum})")
        key = b.tobytes()
        if key not in cache:
            cache[key] = _elementwise_family(b, alphabet)
        sites.append(cache[key])
    return StochasticMPS(tuple(sites), np.diag(L / L.sum()), np.diag(R))


def markov_embedding(T: NDArray, pi: NDArray, n: int, alphabet: Sequence | None = None) -> StochasticMPS:
    """Markov chain with column-stochastic ``T`` (``T[y, x] = P(y | x)``) and ``X_1 ~ pi``."""
    T = np.asarray(T, dtype=float)
    d = T.shape[0]
    b = np.zeros((d, d, d))
    for x in range(d):
        b[x][:, x] = T[:, x]
    return from_elementwise_positive(b, pi, None, n, alphabet)


def finite_memory_embedding(T: NDArray, p0: NDArray, n: int, tol: float = 1e-12) -> StochasticMPS:
    """Order-k chain as an sMPS of bond dimension ``d**k``.

    ``T[y_1, ..., y_k, z]`` is the probability of the next symbol ``z`` given
    the last ``k`` symbols (``y_1`` the oldest).  ``p0`` is the distribution of
    the initial k-block, shape ``(d,)*k`` or flat with C ordering.  The bond
    state is the current k-block; emitting ``z`` shifts it to
    ``(y_2, ..., y_k, z)``.
    """
    T = np.asarray(T, dtype=float)
    k = T.ndim - 1
    d = T.shape[0]
    if k < 1 or any(s != d for s in T.shape):
        raise DimensionError(f"transition tensor must have shape (d,)*(k+1), got {T.shape}")
    if np.any(T < 0):
        raise ValidationError("transition tensor has negative entries")
    if np.max(np.abs(T.sum(axis=-1) - 1)) > tol:
        raise ValidationError("transition tensor is not normalized over the next symbol")
    dim = d**k
    p0 = np.asarray(p0, dtype=float).reshape(dim)
    flat = T.reshape(dim, d)
    b = np.zeros((d, dim, dim))
    for c in range(dim):
        for z in range(d):
            b[z, (c * d) % dim + z, c] = flat[c, z]
    return from_elementwise_positive(b, p0, None, n)


def classical_shadow(family: KrausFamily) -> NDArray:
    """Diagonal-to-diagonal action ``B^{(x)}[y, z]`` of each outcome map (column convention)."""
    return np.stack([np.einsum("kzy->yz", np.abs(a) ** 2) for a in family.operators])


def _classical_superop(b: NDArray) -> NDArray:
    dim = b.shape[0]
    out = np.zeros((dim * dim, dim * dim))
    for y, z in itertools.product(range(dim), repeat=2):
        e = np.zeros((dim, dim))
        e[z, y] = 1.0
        out += b[y, z] * np.kron(e, e)
    return out


@dataclass
class BlockingReport:
    block_length: int
    words: list[tuple]
    classes: dict
    unresolved: list[tuple]
    transition: NDArray
    kraus_rank: int
    rank_ok: bool
    structure_residual: float
    markov_residual: float
    ck_residual: float
    transition_residual: float
    coarse_grain_residual: float
    passed: bool
    messages: list[str] = field(default_factory=list)


def markovize_by_blocking(s: StochasticMPS, block: int, tol: float = 1e-10) -> BlockingReport:
    """Block an element-wise positive chain into a Markov process over rescaled time.

    The hidden state at block boundaries is Markov with transition ``T**block``.
    Each block word is assigned to the class of its start state when that
    state is uniquely determined by the word.  The report verifies:

    * the blocked transfer map equals ``sum_{y,z} (T^L)[y, z] |z><y| . |y><z|``;
    * ``d**block`` reaches the Kraus rank of the blocked transfer map (reported
      in ``rank_ok``; the rank-one embedding has one Kraus operator per
      non-zero entry of ``T**block``, so this flag is a diagnostic and does
      not enter ``passed``);
    * by enumerating hidden paths over three blocks, the Markov property and
      the Chapman-Kolmogorov relation of the hidden chain, and that summing
      the hidden states out reproduces the sMPS joint law of the words.
    """
    if not s.is_translation_invariant():
        raise ValidationError("blocking requires a translation-invariant chain")
    fam = s.sites[0]
    b = classical_shadow(fam)
    msgs = []
    for i in range(fam.size):
        if np.max(np.abs(_classical_superop(b[i]) - fam.symbol_superop(i))) > tol:
            raise ValidationError("chain is not built from an element-wise positive form")
    d, dim = fam.size, fam.dim
    T = b.sum(axis=0)
    TL = np.linalg.matrix_power(T, block)
    words = list(itertools.product(range(d), repeat=block))
    bw = np.empty((len(words), dim, dim))
    for j, w in enumerate(words):
        m = np.eye(dim)
        for i in w:
            m = b[i] @ m
        bw[j] = m

    gamma_L = np.linalg.matrix_power(kraus_to_transfer(fam), block)
    structure = float(np.max(np.abs(gamma_L - _classical_superop(TL))))
    rank = len(choi_to_kraus(choi_of(gamma_L), tol))
    rank_ok = d**block >= rank
    if not rank_ok:
        msgs.append(f"{d}**{block} block words are fewer than the Kraus rank {rank}")

    classes: dict = {x: [] for x in range(dim)}
    unresolved = []
    for j, w in enumerate(words):
        support = np.nonzero(bw[j].sum(axis=0) > tol)[0]
        sym = tuple(fam.alphabet[i] for i in w)
        if len(support) == 1:
            classes[int(support[0])].append(sym)
        else:
            unresolved.append(sym)

    # hidden-path enumeration over three blocks
    L0 = np.real(np.diag(s.rho))
    Rv = np.real(np.diag(s.closure))
    p3 = np.zeros((dim, dim, dim))
    word_joint = np.zeros((len(words),) * 3)
    for (j1, j2, j3) in itertools.product(range(len(words)), repeat=3):
        for h0, h1, h2, h3 in itertools.product(range(dim), repeat=4):
            p = bw[j3][h3, h2] * bw[j2][h2, h1] * bw[j1][h1, h0] * L0[h0]
            if p:
                p3[h1, h2, h3] += p
                word_joint[j1, j2, j3] += p * Rv[h3]
    p12 = p3.sum(axis=2)
    p23 = p3.sum(axis=0)
    p2 = p12.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond_3_given_12 = np.where(p12[..., None] > 0, p3 / p12[..., None], 0.0)
        cond_3_given_2 = np.where(p2[:, None] > 0, p23 / p2[:, None], 0.0)
        p13 = p3.sum(axis=1)
        p1 = p13.sum(axis=1)
        cond_3_given_1 = np.where(p1[:, None] > 0, p13 / p1[:, None], 0.0)
        cond_2_given_1 = np.where(p1[:, None] > 0, p12 / p1[:, None], 0.0)
    live = p12 > 0
    markov = float(np.max(np.abs(cond_3_given_12 - cond_3_given_2[None])[live], initial=0.0))
    ck = float(np.max(np.abs(cond_3_given_1 - cond_2_given_1 @ cond_3_given_2)[p1 > 0], initial=0.0))
    trans = float(np.max(np.abs(cond_2_given_1.T - TL)[:, p1 > 0], initial=0.0))

    long = StochasticMPS.uniform(fam, 3 * block, s.rho, s.closure)
    direct = np.array([
        joint_probability(long, [fam.alphabet[i] for i in words[j1] + words[j2] + words[j3]])
        for j1, j2, j3 in itertools.product(range(len(words)), repeat=3)
    ]).reshape(word_joint.shape)
    coarse = float(np.max(np.abs(direct - word_joint)))

    passed = max(structure, markov, ck, trans, coarse) <= tol
    return BlockingReport(block, [tuple(fam.alphabet[i] for i in w) for w in words], classes, unresolved,
                          TL, rank, rank_ok, structure, markov, ck, trans, coarse, passed, msgs)


# --- correlations -------------------------------------------------------------------------


@dataclass
class DecayScan:
    gaps: list[int]
    distances: NDArray
    second_eigenvalue: float
    spectral_rate: float
    fitted_rate: float | None


def correlation_decay_scan(s: StochasticMPS, k: int, l: int, gaps: Sequence[int]) -> DecayScan:
    """L1 distance between a two-window joint law and the product of its marginals.

    The first window is sites ``1..k``; for gap ``g`` the second window is
    sites ``k+g .. k+g+l-1`` (``g = 1`` makes them adjacent).  The spectral
    rate ``-log|lambda_2|`` of the first site's transfer map is the expected
    exponential decay rate.
    """
    if s.d ** (k + l) > MAX_ENUMERATION:
        raise ValidationError("window enumeration is infeasible")
    gaps = list(gaps)
    if min(gaps) < 1 or k + max(gaps) + l - 1 > s.N:
        raise ValidationError("windows do not fit in the chain")
    dists = []
    patterns = list(itertools.product(s.alphabet, repeat=k + l))
    for g in gaps:
        sites = list(range(1, k + 1)) + list(range(k + g, k + g + l))
        joint = np.array([pattern_probability(s, dict(zip(sites, p))) for p in patterns])
        joint = joint.reshape(s.d**k, s.d**l)
        prod = np.outer(joint.sum(axis=1), joint.sum(axis=0))
        dists.append(float(np.abs(joint - prod).sum()))
    ev = np.sort(np.abs(np.linalg.eigvals(kraus_to_transfer(s.sites[0]))))[::-1]
    lam2 = float(ev[1]) if len(ev) > 1 else 0.0
    rate = -np.log(lam2) if lam2 > 0 else np.inf
    dists = np.array(dists)
    ok = dists > 1e-14
    fitted = None
    if ok.sum() >= 2:
        slope = np.polyfit(np.array(gaps)[ok], np.log(dists[ok]), 1)[0]
        fitted = float(-slope)
    return DecayScan(gaps, dists, lam2, float(rate), fitted)
