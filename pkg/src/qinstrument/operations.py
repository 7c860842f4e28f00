"""Completely positive, trace non-increasing maps in Kraus form.

Kraus lists are not unique, so two operations are compared as maps: by
their action on the matrix-unit basis of the input space, which is the same
as comparing Choi matrices entrywise (:func:`op_distance`).

Choi convention: ``choi(J) = sum_ij E_ij (x) J(E_ij)``, input factor first.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimMismatch, InvariantViolation, NotPSD
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    dagger,
    hermitian_eig,
    ket,
    kron,
    matrix_units,
    max_abs,
    psd_decompose,
)


class Operation:
    """CP trace non-increasing map ``L(C^dim_in) -> L(C^dim_out)``."""

    __slots__ = ("dim_in", "dim_out", "kraus", "stack")

    def __init__(self, kraus: Iterable, tol: Tolerances = DEFAULT_TOL, *, check: bool = True):
        ks = tuple(as_matrix(k) for k in kraus)
        if not ks:
            raise ValueError("an operation needs at least one Kraus operator")
        self.dim_out, self.dim_in = ks[0].shape
        for k in ks:
            if k.shape != (self.dim_out, self.dim_in):
                raise DimMismatch(f"Kraus operator of shape {k.shape}, expected {(self.dim_out, self.dim_in)}")
        self.kraus = ks
        self.stack = np.stack(ks)  # (n_kraus, dim_out, dim_in)
        if check:
            self.validate(tol)

    @classmethod
    def unchecked(cls, kraus) -> Operation:
        return cls(kraus, check=False)

    @classmethod
    def _from_stack(cls, stack: np.ndarray) -> Operation:
        """Wrap a ``(n_kraus, dim_out, dim_in)`` array without copying or checking."""
        op = cls.__new__(cls)
        op.stack = stack
        op.kraus = tuple(stack)
        _, op.dim_out, op.dim_in = stack.shape
        return op

    @classmethod
    def zero(cls, dim_in: int, dim_out: int) -> Operation:
        return cls([np.zeros((dim_out, dim_in))], check=False)

    @classmethod
    def identity(cls, dim: int) -> Operation:
        return cls([np.eye(dim)], check=False)

    def validate(self, tol: Tolerances = DEFAULT_TOL) -> Operation:
        s = self.normalizer()
        top = np.linalg.eigvalsh((s + dagger(s)) / 2)[-1]
        if top > 1 + tol.psd_tol:
            raise InvariantViolation("operation.trace_non_increasing", top - 1)
        return self

    def normalizer(self) -> np.ndarray:
        """``sum_i K_i^dag K_i``."""
        return np.einsum("kij,kil->jl", self.stack.conj(), self.stack)

    def apply(self, m) -> np.ndarray:
        return apply(self, m)

    def dual_apply(self, b) -> np.ndarray:
        return dual_apply(self, b)

    def __call__(self, m) -> np.ndarray:
        return apply(self, m)

    def scaled(self, c: float) -> Operation:
        """The map ``c * J`` for ``c >= 0``."""
        if c < 0:
            raise ValueError("operations can only be scaled by nonnegative numbers")
        r = np.sqrt(c)
        return Operation.unchecked([r * k for k in self.kraus])

    def __repr__(self) -> str:
        return f"Operation({self.dim_in}->{self.dim_out}, {len(self.kraus)} Kraus)"


def apply(op: Operation, m) -> np.ndarray:
    m = as_matrix(m)
    if m.shape != (op.dim_in, op.dim_in):
        raise DimMismatch(f"input of shape {m.shape} for operation on C^{op.dim_in}")
    st = op.stack
    return np.einsum("kij,jl,kml->im", st, m, st.conj())


def dual_apply(op: Operation, b) -> np.ndarray:
    """Heisenberg picture ``J^*(b) = sum_i K_i^dag b K_i``."""
    b = as_matrix(b)
    if b.shape != (op.dim_out, op.dim_out):
        raise DimMismatch(f"input of shape {b.shape} for dual of operation into C^{op.dim_out}")
    st = op.stack
    return np.einsum("kji,jl,klm->im", st.conj(), b, st)


def compose(j1: Operation, j2: Operation, tol: Tolerances = DEFAULT_TOL) -> Operation:
    """``j1`` first, then ``j2``: the map ``m -> j2(j1(m))``.

    Kraus operators ``K2_b K1_a`` ordered with ``a`` outer. The result of
    two valid operations is valid, so it is not re-checked.
    """
    if j1.dim_out != j2.dim_in:
        raise DimMismatch(f"cannot feed C^{j1.dim_out} output into C^{j2.dim_in} input")
    st = np.einsum("bij,ajk->abik", j2.stack, j1.stack)
    return Operation._from_stack(st.reshape(-1, j2.dim_out, j1.dim_in))


def tensor(j1: Operation, j2: Operation, tol: Tolerances = DEFAULT_TOL) -> Operation:
    """Kraus operators ``kron(K1_a, K2_b)``; valid inputs give a valid result, so no re-check."""
    st = np.einsum("aij,bkl->abikjl", j1.stack, j2.stack)
    return Operation._from_stack(st.reshape(-1, j1.dim_out * j2.dim_out, j1.dim_in * j2.dim_in))


def sum_operations(ops: Sequence[Operation], tol: Tolerances = DEFAULT_TOL) -> Operation:
    """Pointwise sum of maps, realised by concatenating Kraus lists."""
    if not ops:
        raise ValueError("empty sum of operations")
    d = (ops[0].dim_in, ops[0].dim_out)
    for op in ops:
        if (op.dim_in, op.dim_out) != d:
            raise DimMismatch("summands act between different spaces")
    return Operation([k for op in ops for k in op.kraus], tol)


def channel_residual(op: Operation) -> float:
    return max_abs(op.normalizer() - np.eye(op.dim_in))


def is_channel(op: Operation, tol: Tolerances = DEFAULT_TOL) -> bool:
    return channel_residual(op) <= tol.eq_tol


def choi(op: Operation) -> np.ndarray:
    """``sum_ij E_ij (x) op(E_ij)``, built from vectorised Kraus operators."""
    # row k of v is vec(K_k^T), i.e. K_k read column-major
    v = op.stack.transpose(0, 2, 1).reshape(len(op.kraus), -1)
    return v.T @ v.conj()


def choi_from_map(fn: Callable[[np.ndarray], np.ndarray], dim_in: int) -> np.ndarray:
    """Choi matrix of an arbitrary linear map given as a callable."""
    blocks = [[None] * dim_in for _ in range(dim_in)]
    for i, j, e in matrix_units(dim_in):
        blocks[i][j] = as_matrix(fn(e))
    return np.block(blocks)


def kraus_from_choi(c, dim_in: int, dim_out: int, tol: Tolerances = DEFAULT_TOL) -> Operation:
    """Operation whose Choi matrix is ``c``.

    Eigenvalues at or below ``psd_tol`` are dropped; an eigenvalue below
    ``-psd_tol`` raises :class:`NotPSD`, meaning the map is not completely
    positive.
    """
    c = as_matrix(c)
    n = dim_in * dim_out
    if c.shape != (n, n):
        raise DimMismatch(f"Choi matrix of shape {c.shape}, expected ({n}, {n})")
    w, v = hermitian_eig(c, tol)
    if w[0] < -tol.psd_tol:
        raise NotPSD(f"Choi matrix has eigenvalue {w[0]:.3e}; map is not completely positive")
    ks = [np.sqrt(w[k]) * v[:, k].reshape(dim_in, dim_out).T for k in range(n) if w[k] > tol.psd_tol]
    if not ks:
        return Operation.zero(dim_in, dim_out)
    return Operation(ks, tol)


def canonical(op: Operation, tol: Tolerances = DEFAULT_TOL) -> Operation:
    """Minimal Kraus list via a Choi round trip."""
    return kraus_from_choi(choi(op), op.dim_in, op.dim_out, tol)


def op_distance(a: Operation, b: Operation) -> float:
    """Max over matrix units ``E_ij`` of ``max|a(E_ij) - b(E_ij)|``."""
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise DimMismatch(f"comparing {a.dim_in}->{a.dim_out} with {b.dim_in}->{b.dim_out}")
    return max_abs(choi(a) - choi(b))


# -- named maps -------------------------------------------------------------


def partial_trace_operation(n1: int, n2: int, keep: int) -> Operation:
    """Channel ``L(H1 (x) H2) -> L(H_keep)`` with Kraus family ``{I (x) <k|}`` or ``{<k| (x) I}``."""
    if keep == 1:
        ks = [kron(np.eye(n1), dagger(ket(n2, k))) for k in range(n2)]
    elif keep == 2:
        ks = [kron(dagger(ket(n1, k)), np.eye(n2)) for k in range(n1)]
    else:
        raise ValueError(f"keep must be 1 or 2, got {keep!r}")
    return Operation.unchecked(ks)


def append_state_operation(dim: int, sigma, tol: Tolerances = DEFAULT_TOL, first: bool = True) -> Operation:
    """``m -> m (x) sigma`` (or ``sigma (x) m`` with ``first=False``) for PSD ``sigma``."""
    terms = psd_decompose(sigma, tol)
    eye = np.eye(dim)
    if first:
        ks = [np.sqrt(p) * kron(eye, v) for p, v in terms]
    else:
        ks = [np.sqrt(p) * kron(v, eye) for p, v in terms]
    if not ks:
        n = dim * as_matrix(sigma).shape[0]
        return Operation.zero(dim, n)
    return Operation(ks, tol)


def measure_prepare_operation(effect, sigma, tol: Tolerances = DEFAULT_TOL) -> Operation:
    """``m -> tr(m a) sigma`` for effect ``a`` and PSD ``sigma``.

    Kraus operators ``sqrt(a_k p_m) |v_m><u_k|`` from the spectral
    decompositions ``a = sum a_k |u_k><u_k|`` and ``sigma = sum p_m |v_m><v_m|``.
    """
    a = as_matrix(effect)
    s = as_matrix(sigma)
    ks = [np.sqrt(ak * pm) * (vm @ dagger(uk)) for ak, uk in psd_decompose(a, tol) for pm, vm in psd_decompose(s, tol)]
    if not ks:
        return Operation.zero(a.shape[0], s.shape[0])
    return Operation(ks, tol)


def transpose_choi(dim: int) -> np.ndarray:
    """Choi matrix of the (not completely positive) transpose map."""
    return choi_from_map(lambda e: e.T, dim)
