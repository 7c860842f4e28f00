"""Dense complex matrix kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Composite spaces
use one index convention everywhere: basis vector ``(i, j)`` of ``H1 (x) H2``
sits at position ``i * dim2 + j``, which is what :func:`numpy.kron` produces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .errors import DimMismatch, NotHermitian, NotPSD, SingularNormalizer


@dataclass(frozen=True)
class Tolerances:
    """Absolute tolerances, all measured in the max-entry norm."""

    hermitian_tol: float = 1e-9
    psd_tol: float = 1e-9
    trace_tol: float = 1e-9
    eq_tol: float = 1e-9

    def __post_init__(self):
        for name in ("hermitian_tol", "psd_tol", "trace_tol", "eq_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def uniform(cls, tol: float) -> Tolerances:
        return cls(tol, tol, tol, tol)


DEFAULT_TOL = Tolerances()


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimMismatch(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def max_abs(a) -> float:
    """Max-entry norm; 0 for empty input."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermitian_residual(m: np.ndarray) -> float:
    return max_abs(m - dagger(m))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def ket(dim: int, k: int) -> np.ndarray:
    v = np.zeros((dim, 1), dtype=np.complex128)
    v[k, 0] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=np.complex128).reshape(-1, 1)
    return v @ dagger(v)


def matrix_unit(dim: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((dim, dim), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def matrix_units(dim: int):
    """Yield ``(i, j, E_ij)`` over the matrix-unit basis of ``L(C^dim)``."""
    for i in range(dim):
        for j in range(dim):
            yield i, j, matrix_unit(dim, i, j)


def kron(a, b) -> np.ndarray:
    """Kronecker product; row ``(i, k)`` of the result is ``i * rows(b) + k``."""
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, as_matrix(m))
    return out


def partial_trace(m, dim1: int, dim2: int, keep: int) -> np.ndarray:
    """Trace out one factor of ``H1 (x) H2``.

    ``keep=1`` returns ``tr_{H2}(m)`` on ``H1``; ``keep=2`` returns
    ``tr_{H1}(m)`` on ``H2``.
    """
    m = as_matrix(m)
    n = dim1 * dim2
    if m.shape != (n, n):
        raise DimMismatch(f"matrix of shape {m.shape} is not {n}x{n} for dims ({dim1}, {dim2})")
    t = m.reshape(dim1, dim2, dim1, dim2)
    if keep == 1:
        return np.einsum("ikjk->ij", t)
    if keep == 2:
        return np.einsum("kikj->ij", t)
    raise ValueError(f"keep must be 1 or 2, got {keep!r}")


def hermitian_eig(m, tol=DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimMismatch(f"square matrix required, got {m.shape}")
    res = hermitian_residual(m)
    if res > tol.hermitian_tol:
        raise NotHermitian(f"hermiticity residual {res:.3e} exceeds {tol.hermitian_tol:.1e}")
    # eigh reads one triangle only, so symmetrise first
    return np.linalg.eigh((m + dagger(m)) / 2)


def psd_sqrt(m, tol=DEFAULT_TOL) -> np.ndarray:
    """Positive square root of a PSD matrix.

    Eigenvalues in ``[-psd_tol, 0)`` are clamped to zero; anything lower
    raises :class:`NotPSD`.
    """
    w, v = hermitian_eig(m, tol)
    if w.size and w[0] < -tol.psd_tol:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} below -{tol.psd_tol:.1e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ dagger(v)


def inv_sqrt(m, tol=DEFAULT_TOL) -> np.ndarray:
    w, v = hermitian_eig(m, tol)
    if w.size and w[0] < tol.psd_tol:
        raise SingularNormalizer(f"normalizer eigenvalue {w[0]:.3e} below {tol.psd_tol:.1e}")
    return (v / np.sqrt(w)) @ dagger(v)


def psd_decompose(m, tol=DEFAULT_TOL) -> list[tuple[float, np.ndarray]]:
    """Return ``[(p, |v>)]`` with ``m = sum p |v><v|``, keeping ``p > psd_tol``."""
    w, v = hermitian_eig(m, tol)
    if w.size and w[0] < -tol.psd_tol:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} below -{tol.psd_tol:.1e}")
    return [(float(w[k]), v[:, k : k + 1]) for k in range(len(w)) if w[k] > tol.psd_tol]


def _gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_counts(**counts):
    for name, value in counts.items():
        if int(value) < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")


def random_state(dim: int, seed) -> np.ndarray:
    """Density matrix ``G G^dag / tr(G G^dag)`` for complex Gaussian ``G``."""
    _check_counts(dim=dim)
    g = _gaussian(_rng(seed), (dim, dim))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_pure_state(dim: int, seed) -> np.ndarray:
    _check_counts(dim=dim)
    v = _gaussian(_rng(seed), (dim, 1))
    return projector(v / np.linalg.norm(v))


def random_hermitian(dim: int, seed) -> np.ndarray:
    g = _gaussian(_rng(seed), (dim, dim))
    return (g + dagger(g)) / 2


def random_matrix(rows: int, cols: int, seed) -> np.ndarray:
    return _gaussian(_rng(seed), (rows, cols))


def random_unitary(dim: int, seed) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=_rng(seed)) if dim > 1 else np.ones((1, 1), complex)


def random_povm(dim: int, n_outcomes: int, seed, tol=DEFAULT_TOL) -> list[np.ndarray]:
    """Effects ``S^{-1/2} P_x S^{-1/2}`` with ``S = sum P_x`` for random PSD ``P_x``."""
    _check_counts(dim=dim, n_outcomes=n_outcomes)
    rng = _rng(seed)
    raw = []
    for _ in range(n_outcomes):
        g = _gaussian(rng, (dim, dim))
        raw.append(g @ dagger(g))
    s = inv_sqrt(sum(raw), tol)
    return [s @ p @ s for p in raw]


def random_instrument(
    dim_in: int, dim_out: int, n_outcomes: int, kraus_per_outcome: int, seed, tol=DEFAULT_TOL
) -> list[list[np.ndarray]]:
    """Kraus grid ``K[x][i] = G[x][i] S^{-1/2}`` with ``S = sum G^dag G``."""
    _check_counts(dim_in=dim_in, dim_out=dim_out, n_outcomes=n_outcomes, kraus_per_outcome=kraus_per_outcome)
    rng = _rng(seed)
    grid = [[_gaussian(rng, (dim_out, dim_in)) for _ in range(kraus_per_outcome)] for _ in range(n_outcomes)]
    s = inv_sqrt(sum(dagger(g) @ g for row in grid for g in row), tol)
    return [[g @ s for g in row] for row in grid]
