from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qinstrument.errors import (
    BadFactorization,
    BadStochasticMatrix,
    BadWeights,
    DimMismatch,
    InstrumentDoesNotMeasureA,
    InvariantViolation,
    LabelMismatch,
    ZeroProbability,
)
from qinstrument.families import lueders, trivial
from qinstrument.instruments import (
    BiInstrument,
    Instrument,
    bi_marginal_instrument,
    born_distribution,
    channel,
    conditioned,
    conditioned_observable,
    convex_combination,
    instrument_distance,
    measured_observable,
    mixed_marginals,
    obs_sequential_product,
    post_process,
    reduced_instrument,
    sequential_product,
    stochastic_rows,
    tensor_instrument,
    then_instrument,
    update_state,
)
from qinstrument.linalg import kron, partial_trace, random_matrix, random_state
from qinstrument.objects import Observable, State, observable_distance
from qinstrument.operations import Operation, op_distance
from qinstrument.sampling import rand_instrument, rand_observable, stochastic_matrix

seeds = st.integers(0, 2**32 - 1)
Z = Observable({"0": np.diag([1.0, 0.0]), "1": np.diag([0.0, 1.0])})


def test_instrument_must_be_trace_preserving():
    with pytest.raises(InvariantViolation) as e:
        Instrument({"a": Operation([np.diag([1.0, 0.0])])})
    assert e.value.invariant == "instrument.channel"


def test_lueders_z_on_plus():
    dist = born_distribution(lueders(Z), State(np.full((2, 2), 0.5)))
    assert abs(dist["0"] - 0.5) < 1e-12 and abs(dist["1"] - 0.5) < 1e-12


def test_update_state_collapses():
    post = update_state(lueders(Z), "1", State(np.full((2, 2), 0.5)))
    assert np.abs(post.mat - np.diag([0.0, 1.0])).max() < 1e-12
    with pytest.raises(ZeroProbability):
        update_state(lueders(Z), "1", State(np.diag([1.0, 0.0])))


@given(seeds)
def test_sequential_product_entries(seed):
    rng = np.random.default_rng(seed)
    i = rand_instrument(rng, 2, 3, 2, 2, "x")
    j = rand_instrument(rng, 3, 2, 2, 2, "y")
    k = sequential_product(i, j)
    rho = random_state(2, rng)
    for x in i.labels:
        for y in j.labels:
            assert np.abs(k[x, y].apply(rho) - j[y].apply(i[x].apply(rho))).max() < 1e-12


@given(seeds)
def test_conditioned_and_then_are_marginals(seed):
    rng = np.random.default_rng(seed)
    i = rand_instrument(rng, 2, 2, 2, 2, "x")
    j = rand_instrument(rng, 2, 3, 3, 1, "y")
    k = sequential_product(i, j)
    assert instrument_distance(conditioned(j, i), bi_marginal_instrument(k, 2)) < 1e-12
    assert instrument_distance(then_instrument(i, j), bi_marginal_instrument(k, 1)) < 1e-12
    assert op_distance(channel(bi_marginal_instrument(k, 1)), channel(bi_marginal_instrument(k, 2))) < 1e-12


def test_chain_dim_mismatch():
    rng = np.random.default_rng(0)
    with pytest.raises(DimMismatch):
        sequential_product(rand_instrument(rng, 2, 2, 2), rand_instrument(rng, 3, 3, 2))


def test_measured_observable_of_conditioned():
    # the measured observable of (J | I) is J's measured observable pulled back through I's channel
    rng = np.random.default_rng(1)
    i = rand_instrument(rng, 2, 3, 2, 2, "x")
    j = rand_instrument(rng, 3, 2, 2, 2, "y")
    lhs = measured_observable(conditioned(j, i))
    rhs = conditioned_observable(measured_observable(j), i)
    assert observable_distance(lhs, rhs) < 1e-12


def test_convex_combination_channel_and_observable():
    rng = np.random.default_rng(2)
    a, b = rand_instrument(rng, 2, 2, 2, 2), rand_instrument(rng, 2, 2, 2, 2)
    mix = convex_combination([a, b], [0.3, 0.7])
    rho = random_state(2, rng)
    direct = 0.3 * channel(a).apply(rho) + 0.7 * channel(b).apply(rho)
    assert np.abs(channel(mix).apply(rho) - direct).max() < 1e-12
    ma, mb = measured_observable(a), measured_observable(b)
    for x in mix.labels:
        assert np.abs(measured_observable(mix)[x] - 0.3 * ma[x] - 0.7 * mb[x]).max() < 1e-12


def test_convex_combination_errors():
    rng = np.random.default_rng(3)
    a = rand_instrument(rng, 2, 2, 2)
    with pytest.raises(BadWeights):
        convex_combination([a, a], [0.5, 0.6])
    with pytest.raises(BadWeights):
        convex_combination([a, a], [1.5, -0.5])
    with pytest.raises(LabelMismatch):
        convex_combination([a, rand_instrument(rng, 2, 2, 2, prefix="z")], [0.5, 0.5])


def test_post_process_forms_agree():
    rng = np.random.default_rng(4)
    i = rand_instrument(rng, 2, 2, 3, 2)
    lam = stochastic_matrix(rng, 3, 2)
    p1 = post_process(i, lam, ["a", "b"])
    p2 = post_process(i, {x: {"a": lam[r, 0], "b": lam[r, 1]} for r, x in enumerate(i.labels)})
    assert instrument_distance(p1, p2) < 1e-12
    m = random_matrix(2, 2, rng)
    direct = sum(lam[r, 1] * i[x].apply(m) for r, x in enumerate(i.labels))
    assert np.abs(p1["b"].apply(m) - direct).max() < 1e-12


def test_post_process_identity_matrix_is_identity():
    i = rand_instrument(np.random.default_rng(5), 2, 2, 3, 2)
    assert instrument_distance(post_process(i, np.eye(3), i.labels), i) < 1e-12


def test_stochastic_rows_rejects_bad_rows():
    with pytest.raises(BadStochasticMatrix):
        stochastic_rows(["a", "b"], [[0.5, 0.4], [1.0, 0.0]])
    with pytest.raises(BadStochasticMatrix):
        stochastic_rows(["a", "b"], [[1.2, -0.2], [1.0, 0.0]])
    with pytest.raises(BadStochasticMatrix):
        stochastic_rows(["a"], [[1.0], [1.0]])


def test_tensor_instrument_measured_observable():
    rng = np.random.default_rng(6)
    i, j = rand_instrument(rng, 2, 2, 2, 2, "x"), rand_instrument(rng, 2, 3, 2, 2, "y")
    c = tensor_instrument(i, j).measured_biobservable()
    mi, mj = measured_observable(i), measured_observable(j)
    for x in i.labels:
        for y in j.labels:
            assert np.abs(c[x, y] - kron(mi[x], mj[y])).max() < 1e-12


def test_reduced_instrument_traces_out():
    rng = np.random.default_rng(7)
    k = rand_instrument(rng, 2, 6, 2, 2)
    rho = random_state(2, rng)
    for which in (1, 2):
        red = reduced_instrument(k, 2, 3, which)
        for x in k.labels:
            assert np.abs(red[x].apply(rho) - partial_trace(k[x].apply(rho), 2, 3, which)).max() < 1e-12
    with pytest.raises(BadFactorization):
        reduced_instrument(k, 2, 2, 1)


def test_mixed_marginals_of_product_joint():
    # K_xy = I_x (x) beta_y: marginal 2 onto factor 1 gives tr(beta_y) I-bar,
    # marginal 1 onto factor 2 gives tr(I_x(rho)) beta
    rng = np.random.default_rng(8)
    i = rand_instrument(rng, 2, 2, 2, 2, "x")
    betas = {"a": np.diag([0.1, 0.2]), "b": np.diag([0.3, 0.4])}
    from qinstrument.coexistence import trivial_joint

    k = trivial_joint(i, betas)
    k11, k22, k21, k12 = mixed_marginals(k, 2, 2)
    rho = random_state(2, rng)
    beta = sum(betas.values())
    for y, b in betas.items():
        assert np.abs(k21[y].apply(rho) - np.trace(b) * channel(i).apply(rho)).max() < 1e-12
        assert np.abs(k22[y].apply(rho) - b).max() < 1e-12
    for x in i.labels:
        assert np.abs(k12[x].apply(rho) - np.trace(i[x].apply(rho)) * beta).max() < 1e-12
        assert np.abs(k11[x].apply(rho) - i[x].apply(rho)).max() < 1e-12


def test_trivial_is_unchanged_by_conditioning():
    rng = np.random.default_rng(9)
    j = trivial({"a": np.diag([0.25, 0.0]), "b": np.diag([0.25, 0.5])}, 2)
    i = rand_instrument(rng, 3, 2, 2, 2)
    assert instrument_distance(conditioned(j, i), trivial({"a": np.diag([0.25, 0.0]), "b": np.diag([0.25, 0.5])}, 3)) < 1e-12


def test_obs_sequential_product_requires_measuring_instrument():
    rng = np.random.default_rng(10)
    a = rand_observable(rng, 2, 2)
    b = rand_observable(rng, 2, 3, "b")
    out = obs_sequential_product(a, lueders(a), b)
    assert observable_distance(out, conditioned_observable(b, lueders(a))) < 1e-12
    with pytest.raises(InstrumentDoesNotMeasureA):
        obs_sequential_product(rand_observable(rng, 2, 2), lueders(a), b)


def test_bi_instrument_label_grid_checked():
    op = Operation([np.eye(2)])
    with pytest.raises(LabelMismatch):
        BiInstrument(["a"], ["b", "c"], {("a", "b"): op})
