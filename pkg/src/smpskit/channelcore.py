"""Dense superoperator and quantum-channel primitives.

All superoperators are D^2 x D^2 matrices acting on column-stacked matrices:
``vec(A @ M @ B) == kron(B.T, A) @ vec(M)``.

Kraus families follow the ``sum_x A_x A_x^dagger = 1`` normalization, so the
transfer map ``M -> sum_x A_x M A_x^dagger`` is unital (it fixes the identity)
and acts on observables.  Its Hilbert-Schmidt adjoint acts on states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .errors import DimensionError, NumericalValidityError, ValidationError

PSD_TOL = 1e-10

ComplexArray = NDArray[np.complex128]


def vec(matrix: NDArray) -> NDArray:
    """Column-stack a matrix into a vector."""
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: NDArray, dim: int | None = None) -> NDArray:
    """Inverse of :func:`vec` for square matrices."""
    vector = np.asarray(vector)
    if dim is None:
        dim = _sqrt_dim(vector.shape[0])
    return vector.reshape((dim, dim), order="F")


def _sqrt_dim(n: int) -> int:
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise DimensionError(f"length {n} is not a perfect square")
    return d


def superop_dim(s: NDArray) -> int:
    """Matrix dimension D of a D^2 x D^2 superoperator."""
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"superoperator must be square, got shape {s.shape}")
    return _sqrt_dim(s.shape[0])


def left(a: NDArray) -> ComplexArray:
    """Superoperator of ``M -> a @ M``."""
    a = np.asarray(a, dtype=complex)
    return np.kron(np.eye(a.shape[0]), a)


def right(b: NDArray) -> ComplexArray:
    """Superoperator of ``M -> M @ b``."""
    b = np.asarray(b, dtype=complex)
    return np.kron(b.T, np.eye(b.shape[0]))


def sandwich(a: NDArray, b: NDArray | None = None) -> ComplexArray:
    """Superoperator of ``M -> a @ M @ b`` (``b`` defaults to ``a^dagger``)."""
    a = np.asarray(a, dtype=complex)
    b = a.conj().T if b is None else np.asarray(b, dtype=complex)
    return np.kron(b.T, a)


def apply(s: NDArray, m: NDArray) -> ComplexArray:
    """Apply superoperator ``s`` to matrix ``m``."""
    m = np.asarray(m)
    return unvec(np.asarray(s) @ vec(m), m.shape[0])


def adjoint(s: NDArray) -> ComplexArray:
    """Hilbert-Schmidt adjoint: ``Tr(A^dag s[B]) == Tr(adjoint(s)[A]^dag B)``."""
    return np.asarray(s).conj().T


def pairing_row(rho: NDArray) -> ComplexArray:
    """Row vector ``w`` with ``w @ vec(M) == Tr(rho @ M)``."""
    return vec(np.asarray(rho, dtype=complex).T)


def dagger(m: NDArray) -> NDArray:
    return np.asarray(m).conj().T


def is_hermitian(m: NDArray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def min_eig(m: NDArray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    m = np.asarray(m)
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def psd_sqrt(m: NDArray) -> ComplexArray:
    """Principal square root of a PSD matrix (negative rounding clipped)."""
    w, v = np.linalg.eigh((np.asarray(m) + np.asarray(m).conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def psd_inv_sqrt(m: NDArray) -> ComplexArray:
    w, v = np.linalg.eigh((np.asarray(m) + np.asarray(m).conj().T) / 2)
    if w[0] <= 0:
        raise ValidationError("matrix is not positive definite")
    return (v / np.sqrt(w)) @ v.conj().T


@dataclass(frozen=True, eq=False)
class KrausFamily:
    """Outcome-indexed Kraus operators.

    Each symbol carries a stack of shape ``(r, D, D)``: a single operator is the
    common case (``r == 1``), several operators describe a non-pure outcome map
    ``M -> sum_k A_k M A_k^dagger``.
    """

    alphabet: tuple
    operators: tuple

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        ops = []
        for op in self.operators:
            arr = np.array(op, dtype=complex)
            if arr.ndim == 2:
                arr = arr[None]
            if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
                raise DimensionError(f"Kraus operators must be square, got shape {arr.shape}")
            arr.setflags(write=False)
            ops.append(arr)
        if len(ops) != len(alphabet):
            raise DimensionError("one operator stack per alphabet symbol is required")
        if len(set(alphabet)) != len(alphabet):
            raise ValidationError("alphabet symbols must be distinct")
        dims = {op.shape[1] for op in ops}
        if len(dims) != 1:
            raise DimensionError(f"operators have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "operators", tuple(ops))

    @classmethod
    def from_mapping(cls, ops: Mapping[Hashable, NDArray | Sequence[NDArray]]) -> "KrausFamily":
        return cls(tuple(ops.keys()), tuple(ops.values()))

    @property
    def dim(self) -> int:
        return self.operators[0].shape[1]

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def index(self, symbol) -> int:
        try:
            return self.alphabet.index(symbol)
        except ValueError:
            raise ValidationError(f"symbol {symbol!r} is not in alphabet {self.alphabet}") from None

    def effects(self) -> ComplexArray:
        """Stack of ``E_x = sum_k A_k A_k^dagger``; outcome x has probability Tr(rho E_x)."""
        return np.stack([np.einsum("kab,kcb->ac", a, a.conj()) for a in self.operators])

    def normalization_residual(self) -> float:
        total = self.effects().sum(axis=0)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def symbol_superop(self, i: int) -> ComplexArray:
        """Superoperator of ``M -> sum_k A_k M A_k^dagger`` for symbol index ``i``."""
        return sum(np.kron(a.conj(), a) for a in self.operators[i])

    def symbol_superops(self) -> ComplexArray:
        return np.stack([self.symbol_superop(i) for i in range(self.size)])

    def heisenberg(self, i: int, m: NDArray) -> ComplexArray:
        a = self.operators[i]
        return np.einsum("kab,bc,kdc->ad", a, m, a.conj())

    def schrodinger(self, i: int, rho: NDArray) -> ComplexArray:
        a = self.operators[i]
        return np.einsum("kba,bc,kcd->ad", a.conj(), rho, a)


def kraus_superop(ops: Iterable[NDArray]) -> ComplexArray:
    """Superoperator of ``M -> sum_k K_k M K_k^dagger`` for a plain operator list."""
    ops = [np.asarray(k, dtype=complex) for k in ops]
    if not ops:
        raise DimensionError("empty Kraus list")
    if len({k.shape for k in ops}) != 1 or ops[0].shape[0] != ops[0].shape[1]:
        raise DimensionError("Kraus operators must be square with a common shape")
    return sum(np.kron(k.conj(), k) for k in ops)


def kraus_to_transfer(family: KrausFamily) -> ComplexArray:
    """Transfer superoperator ``M -> sum_x sum_k A M A^dagger``."""
    return kraus_superop(op for stack in family.operators for op in stack)


def choi_of(s: NDArray) -> ComplexArray:
    """Choi matrix ``sum_ab |a><b| (x) s[|a><b|]`` (input factor first).

    Block ``(a, b)`` is the image of the matrix unit ``|a><b|``.
    """
    d = superop_dim(s)
    # s[(j, i), (b, a)] holds s[|a><b|][i, j] in column-stacking order
    s4 = np.asarray(s).reshape(d, d, d, d)
    return s4.transpose(3, 1, 2, 0).reshape(d * d, d * d)


def choi_to_superop(c: NDArray) -> ComplexArray:
    """Inverse of :func:`choi_of`."""
    d = _sqrt_dim(np.asarray(c).shape[0])
    c4 = np.asarray(c).reshape(d, d, d, d)
    return c4.transpose(3, 1, 2, 0).reshape(d * d, d * d)


def is_cp(s: NDArray, tol: float = PSD_TOL) -> bool:
    c = choi_of(s)
    return is_hermitian(c, max(tol, 1e-12)) and min_eig(c) >= -tol


def choi_to_kraus(c: NDArray, tol: float = PSD_TOL) -> list[ComplexArray]:
    """Kraus operators from the eigen-decomposition of a PSD Choi matrix.

    Eigenvalues at or below ``tol`` are dropped.

    Raises:
        NumericalValidityError: if ``c`` has an eigenvalue below ``-tol``.
    """
    c = np.asarray(c, dtype=complex)
    d = _sqrt_dim(c.shape[0])
    w, v = np.linalg.eigh((c + c.conj().T) / 2)
    if w[0] < -tol:
        raise NumericalValidityError(f"Choi matrix is not PSD (min eigenvalue {w[0]:.3e})")
    ops = []
    for lam, vk in zip(w[::-1], v.T[::-1]):
        if lam <= tol:
            break
        # component (a, i) of the eigenvector is K[i, a]
        ops.append(np.sqrt(lam) * vk.reshape(d, d).T)
    return ops


def expm_apply(s: NDArray, t: float) -> ComplexArray:
    """``exp(t s)`` by scaling and squaring with Pade approximation.

    Raises:
        OverflowError: when the result is not finite.
    """
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(t * np.asarray(s, dtype=complex))
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"matrix exponential overflowed for t={t}")
    return out
