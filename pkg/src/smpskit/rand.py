"""Random instance generators and the seeded substream scheme.

Every Monte Carlo routine splits its paths into fixed-size batches; batch ``b``
draws from ``substream(seed, b)``.  Results therefore do not depend on how
batches are scheduled across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

from .channelcore import KrausFamily, psd_inv_sqrt

BATCH_SIZE = 8192
DEFAULT_SEED = 20240611

T = TypeVar("T")

_max_workers = 1


def set_max_workers(n: int) -> None:
    """Cap the number of threads used for batched Monte Carlo."""
    global _max_workers
    _max_workers = max(1, int(n))


def substream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for batch ``index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & (2**64 - 1), index])))


def batch_sizes(n_paths: int, batch_size: int = BATCH_SIZE) -> list[int]:
    full, rest = divmod(n_paths, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def map_batches(fn: Callable[[int, int, np.random.Generator], T], n_paths: int, seed: int) -> list[T]:
    """Run ``fn(batch_index, size, rng)`` over all batches, results in batch order."""
    sizes = batch_sizes(n_paths)
    jobs = [(b, n, substream(seed, b)) for b, n in enumerate(sizes)]
    if _max_workers == 1 or len(jobs) == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(_max_workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (z + z.conj().T) / 2


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_complex(shape, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def normalize_kraus(ops: np.ndarray) -> np.ndarray:
    """Rescale a stack ``(n, D, D)`` so that ``sum_k A_k A_k^dagger = 1``."""
    ops = np.asarray(ops, dtype=complex)
    s = np.einsum("kab,kcb->ac", ops, ops.conj())
    return np.einsum("ab,kbc->kac", psd_inv_sqrt(s), ops)


def random_kraus_family(
    dim: int,
    alphabet: Sequence = (0, 1),
    rng: np.random.Generator | None = None,
    rank: int = 1,
) -> KrausFamily:
    """Random normalized family with ``rank`` operators per symbol."""
    rng = rng or np.random.default_rng()
    raw = random_complex((len(alphabet) * rank, dim, dim), rng)
    ops = normalize_kraus(raw).reshape(len(alphabet), rank, dim, dim)
    return KrausFamily(tuple(alphabet), tuple(ops))
