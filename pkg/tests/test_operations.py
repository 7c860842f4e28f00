from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qinstrument.errors import DimMismatch, InvariantViolation, NotPSD
from qinstrument.linalg import kron, partial_trace, random_matrix, random_state, random_unitary
from qinstrument.operations import (
    Operation,
    append_state_operation,
    apply,
    canonical,
    channel_residual,
    choi,
    choi_from_map,
    compose,
    dual_apply,
    is_channel,
    kraus_from_choi,
    measure_prepare_operation,
    op_distance,
    partial_trace_operation,
    sum_operations,
    tensor,
    transpose_choi,
)
from qinstrument.sampling import rand_operation

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_choi_matches_blockwise_definition(seed, din, dout):
    op = rand_operation(np.random.default_rng(seed), din, dout, 3)
    # oracle: build sum_ij E_ij (x) J(E_ij) block by block from the map
    assert np.abs(choi(op) - choi_from_map(op.apply, din)).max() < 1e-12


@given(seeds, st.integers(2, 4))
def test_trace_duality(seed, d):
    rng = np.random.default_rng(seed)
    op = rand_operation(rng, d, d + 1, 2)
    m = random_matrix(d, d, rng)
    b = random_matrix(d + 1, d + 1, rng)
    assert abs(np.trace(b @ apply(op, m)) - np.trace(dual_apply(op, b) @ m)) < 1e-12


def test_compose_order():
    # with unitaries the order is visible: compose(u, v)(rho) = v u rho u^dag v^dag
    u, v = random_unitary(3, 1), random_unitary(3, 2)
    rho = random_state(3, 3)
    c = compose(Operation([u]), Operation([v]))
    expected = v @ u @ rho @ u.conj().T @ v.conj().T
    assert np.abs(c.apply(rho) - expected).max() < 1e-12


def test_compose_dim_mismatch():
    with pytest.raises(DimMismatch):
        compose(Operation([np.eye(2)]), Operation([np.eye(3)]))


def test_tensor_on_product_inputs():
    rng = np.random.default_rng(4)
    a, b = rand_operation(rng, 2, 3, 2), rand_operation(rng, 2, 2, 2)
    m1, m2 = random_matrix(2, 2, rng), random_matrix(2, 2, rng)
    got = tensor(a, b).apply(kron(m1, m2))
    assert np.abs(got - kron(a.apply(m1), b.apply(m2))).max() < 1e-12


def test_operation_rejects_trace_increase():
    with pytest.raises(InvariantViolation) as e:
        Operation([np.eye(2) * 1.1])
    assert e.value.invariant == "operation.trace_non_increasing"
    assert abs(e.value.residual - 0.21) < 1e-12


def test_operation_kraus_shapes_must_agree():
    with pytest.raises(DimMismatch):
        Operation([np.eye(2), np.eye(3)])


def test_channel_checks():
    assert is_channel(Operation([random_unitary(2, 0)]))
    half = Operation([np.eye(2) / np.sqrt(2)])
    assert not is_channel(half)
    assert abs(channel_residual(half) - 0.5) < 1e-15


@given(seeds)
def test_kraus_from_choi_round_trip(seed):
    op = rand_operation(np.random.default_rng(seed), 2, 3, 4)
    back = kraus_from_choi(choi(op), 2, 3)
    assert op_distance(op, back) < 1e-12
    assert len(back.kraus) <= 6


def test_transpose_is_not_completely_positive():
    with pytest.raises(NotPSD):
        kraus_from_choi(transpose_choi(2), 2, 2)


def test_canonical_drops_redundant_kraus():
    k = np.diag([1.0, 0.5])
    op = Operation([k / np.sqrt(2), k / np.sqrt(2)])
    assert len(canonical(op).kraus) == 1
    assert op_distance(op, canonical(op)) < 1e-12


def test_op_distance_sees_differences():
    a = Operation([np.diag([1.0, 0.0])])
    b = Operation([np.diag([0.0, 1.0])])
    assert op_distance(a, b) == 1.0
    assert op_distance(a, a) == 0.0


def test_partial_trace_operation_matches_partial_trace():
    m = random_matrix(6, 6, 9)
    for keep in (1, 2):
        op = partial_trace_operation(2, 3, keep)
        assert is_channel(op)
        assert np.abs(op.apply(m) - partial_trace(m, 2, 3, keep)).max() < 1e-12


def test_append_state_operation():
    sigma = random_state(3, 1)
    rho = random_state(2, 2)
    assert np.abs(append_state_operation(2, sigma).apply(rho) - kron(rho, sigma)).max() < 1e-12
    assert np.abs(append_state_operation(2, sigma, first=False).apply(rho) - kron(sigma, rho)).max() < 1e-12


def test_measure_prepare_operation():
    a = np.array([[0.6, 0.2j], [-0.2j, 0.3]])
    sigma = random_state(3, 4)
    m = random_matrix(2, 2, 5)
    op = measure_prepare_operation(a, sigma)
    assert np.abs(op.apply(m) - np.trace(m @ a) * sigma).max() < 1e-12
    b = random_matrix(3, 3, 6)
    assert np.abs(op.dual_apply(b) - np.trace(sigma @ b) * a).max() < 1e-12


def test_sum_operations_adds_maps():
    a = Operation([np.diag([1.0, 0.0])])
    b = Operation([np.diag([0.0, 1.0])])
    s = sum_operations([a, b])
    assert is_channel(s)
    m = random_matrix(2, 2, 1)
    assert np.abs(s.apply(m) - a.apply(m) - b.apply(m)).max() < 1e-15


def test_scaled():
    op = Operation([random_unitary(2, 3)])
    assert abs(np.trace(op.scaled(0.25).normalizer()) - 0.5) < 1e-12
    with pytest.raises(ValueError):
        op.scaled(-1)
