"""Projection families ``M_ij`` mapping a large system onto an ``n_out``-level density.

Canonical form: ``M_ij[Y] = sum_k A^{i,k} Y A^{j,k dag}`` with
``sum_{j,k} A^{j,k} A^{j,k dag} = 1``.  The Choi matrix is assembled in the
order (system-out, map-out, map-in)::

    C[(i, a, alpha), (j, b, beta)] = M_ij[|alpha><beta|][a, b]

so that ``C = sum_k |x_k><x_k|`` with ``x_k[(i, a, alpha)] = A^{i,k}[a, alpha]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .channelcore import PSD_TOL, adjoint, apply, expm_apply, is_hermitian, min_eig, sandwich, vec
from .errors import DimensionError, NumericalValidityError, ValidationError
from .master import LindbladGenerator, build_L0
from .rand import normalize_kraus, random_complex


@dataclass(frozen=True, eq=False)
class ProjectionFamily:
    """Blocks ``A^{i,k}`` stored as an array ``(n_out, rank, n_in, n_in)``."""

    blocks: NDArray

    def __post_init__(self):
        b = np.array(self.blocks, dtype=complex)
        if b.ndim != 4 or b.shape[2] != b.shape[3]:
            raise DimensionError(f"blocks must have shape (n_out, rank, n_in, n_in), got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @property
    def n_out(self) -> int:
        return self.blocks.shape[0]

    @property
    def rank(self) -> int:
        return self.blocks.shape[1]

    @property
    def n_in(self) -> int:
        return self.blocks.shape[2]

    def normalization_residual(self) -> float:
        s = np.einsum("jkab,jkcb->ac", self.blocks, self.blocks.conj())
        return float(np.max(np.abs(s - np.eye(self.n_in))))

    def superops(self) -> NDArray:
        """Array ``(n_out, n_out, n_in^2, n_in^2)`` of the Heisenberg maps ``M_ij``."""
        n, r = self.n_out, self.rank
        out = np.zeros((n, n, self.n_in**2, self.n_in**2), dtype=complex)
        for i in range(n):
            for j in range(n):
                for k in range(r):
                    out[i, j] += sandwich(self.blocks[i, k], self.blocks[j, k].conj().T)
        return out

    def heisenberg_ones(self) -> NDArray:
        """``M_ij[1] = sum_k A^{i,k} A^{j,k dag}`` as an array ``(n_out, n_out, n_in, n_in)``."""
        return np.einsum("ikab,jkcb->ijac", self.blocks, self.blocks.conj())

    def choi(self) -> NDArray:
        x = self.blocks.transpose(1, 0, 2, 3).reshape(self.rank, -1)
        return x.T @ x.conj()


def assemble_choi(M: NDArray) -> NDArray:
    """Choi matrix of a raw family ``M[i, j]`` of ``n_in^2 x n_in^2`` superoperators."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 4 or M.shape[0] != M.shape[1] or M.shape[2] != M.shape[3]:
        raise DimensionError("raw family must have shape (n_out, n_out, n_in^2, n_in^2)")
    n_out = M.shape[0]
    n = int(round(np.sqrt(M.shape[2])))
    if n * n != M.shape[2]:
        raise DimensionError("superoperator size is not a perfect square")
    # s[vec(a, b), vec(alpha, beta)] with vec(a, b) = b*n + a
    m6 = M.reshape(n_out, n_out, n, n, n, n)  # [i, j, b, a, beta, alpha]
    return m6.transpose(0, 3, 5, 1, 2, 4).reshape(n_out * n * n, n_out * n * n)


@dataclass
class FamilyReport:
    passed: bool
    choi_min_eig: float
    hermitian_residual: float
    trace_residual: float
    messages: list[str] = field(default_factory=list)


def validate_family(M: NDArray, tol: float = PSD_TOL) -> FamilyReport:
    """Check positivity of the assembled Choi matrix and ``sum_j M_jj[1] = 1``."""
    M = np.asarray(M, dtype=complex)
    c = assemble_choi(M)
    herm = float(np.max(np.abs(c - c.conj().T)))
    lam = min_eig(c)
    n = int(round(np.sqrt(M.shape[2])))
    total = sum(apply(M[j, j], np.eye(n)) for j in range(M.shape[0]))
    trace_res = float(np.max(np.abs(total - np.eye(n))))
    msgs = []
    if herm > tol:
        msgs.append(f"Choi matrix is not Hermitian (residual {herm:.3e})")
    if lam < -tol:
        msgs.append(f"Choi matrix is not PSD (min eigenvalue {lam:.3e})")
    if trace_res > tol:
        msgs.append(f"sum_j M_jj[1] differs from identity by {trace_res:.3e}")
    return FamilyReport(not msgs, lam, herm, trace_res, msgs)


def canonicalize(M: NDArray, tol: float = PSD_TOL) -> ProjectionFamily:
    """Canonical blocks from the eigen-decomposition of the Choi matrix.

    Eigenvalues at or below ``tol`` are dropped.

    Raises:
        NumericalValidityError: if the Choi matrix has an eigenvalue below ``-tol``.
    """
    M = np.asarray(M, dtype=complex)
    n_out = M.shape[0]
    n = int(round(np.sqrt(M.shape[2])))
    c = assemble_choi(M)
    w, v = np.linalg.eigh((c + c.conj().T) / 2)
    if w[0] < -tol:
        raise NumericalValidityError(f"Choi matrix is not PSD (min eigenvalue {w[0]:.3e})")
    keep = w > tol
    x = (v[:, keep] * np.sqrt(w[keep])).T[::-1]
    if len(x) == 0:
        raise ValidationError("family is identically zero")
    blocks = x.reshape(-1, n_out, n, n).transpose(1, 0, 2, 3)
    return ProjectionFamily(blocks)


def random_projection_family(n_in: int, n_out: int, rng: np.random.Generator, rank: int = 2) -> ProjectionFamily:
    """Random family from a random PSD Choi matrix, normalized by ``S^{-1/2}``."""
    raw = random_complex((n_out * rank, n_in, n_in), rng)
    blocks = normalize_kraus(raw).reshape(n_out, rank, n_in, n_in)
    return ProjectionFamily(blocks)


def measurement_family(n: int) -> ProjectionFamily:
    """``A^{i} = |i><i|``: projects onto the diagonal in the computational basis."""
    blocks = np.zeros((n, 1, n, n))
    for i in range(n):
        blocks[i, 0, i, i] = 1.0
    return ProjectionFamily(blocks)


def _check_density(sigma: NDArray, tol: float) -> NDArray:
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DimensionError("density must be square")
    if not is_hermitian(sigma, tol) or min_eig(sigma) < -tol or abs(np.trace(sigma) - 1) > tol:
        raise ValidationError("sigma must be a PSD trace-one matrix")
    return sigma


def project_state(fam: ProjectionFamily, sigma: NDArray, tol: float = PSD_TOL) -> NDArray:
    """``rho_ij = sum_k Tr(sigma A^{i,k} A^{j,k dag})``, a Gram matrix (hence PSD)."""
    sigma = _check_density(sigma, tol)
    if sigma.shape[0] != fam.n_in:
        raise DimensionError("sigma does not match the family input dimension")
    return np.einsum("ba,ijab->ij", sigma, fam.heisenberg_ones())


def evolve_projected(fam: ProjectionFamily, g: LindbladGenerator, rho_T: NDArray,
                     t_grid: Sequence[float]) -> NDArray:
    """``rho(t) = project_state(fam, exp(t L)[rho_T])`` with ``L`` the state-picture generator.

    ``L`` is the adjoint of the Heisenberg generator of ``g``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValidationError("time grid must be strictly increasing")
    L = adjoint(build_L0(g))
    rho_T = _check_density(rho_T, PSD_TOL)
    out = []
    for t in t_grid:
        sigma = apply(expm_apply(L, t), rho_T)
        sigma = (sigma + sigma.conj().T) / 2
        out.append(project_state(fam, sigma / np.trace(sigma).real, tol=1e-8))
    return np.array(out)


MAX_TENSOR = 4**6


def multitime_joint(fam: ProjectionFamily, gamma: NDArray, rho: NDArray, N: int) -> NDArray:
    """Multi-time tensor ``Tr(rho M_{i1 j1} o G o M_{i2 j2} o ... o G o M_{iN jN}[1])``.

    ``gamma`` is a unital (Heisenberg) superoperator between consecutive
    times.  The result has axes ``(i1, j1, i2, j2, ..., iN, jN)``.
    """
    n = fam.n_out
    if N < 1 or (n * n) ** N > MAX_TENSOR:
        raise ValidationError(f"multi-time tensor of size ({n}^2)^{N} is infeasible")
    ms = fam.superops()
    gamma = np.asarray(gamma, dtype=complex)
    # heads[..] holds M_{iN jN}[1] pulled back through the later slots, as vectorized matrices
    ones = vec(np.eye(fam.n_in))
    cur = np.einsum("ijab,b->ija", ms, ones)  # axes (iN, jN, vec)
    for _ in range(N - 1):
        pulled = cur @ gamma.T  # gamma applied to every vectorized entry
        cur = np.einsum("ijab,...b->ij...a", ms, pulled)
    w = vec(np.asarray(rho, dtype=complex).T)
    return cur @ w


def multitime_density(tensor: NDArray) -> NDArray:
    """Reshape a multi-time tensor into a matrix over ``(i1..iN), (j1..jN)``."""
    N = tensor.ndim // 2
    n = tensor.shape[0]
    order = list(range(0, 2 * N, 2)) + list(range(1, 2 * N, 2))
    return tensor.transpose(order).reshape(n**N, n**N)


def trace_last_slot(tensor: NDArray) -> NDArray:
    return np.trace(tensor, axis1=tensor.ndim - 2, axis2=tensor.ndim - 1)
