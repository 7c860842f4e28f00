from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qinstrument.errors import DimMismatch, InvariantViolation, LabelMismatch, NonCommuting
from qinstrument.linalg import projector
from qinstrument.objects import (
    BiObservable,
    Effect,
    Observable,
    State,
    bi_marginal,
    commuting_joint,
    identity_observable,
    is_sharp,
    pair_label,
    rho_distribution,
    split_label,
    tensor_biobservable,
    verify_joint_biobservable,
)
from qinstrument.sampling import basis_observable, rand_observable, rand_state

Z = Observable({"0": np.diag([1.0, 0.0]), "1": np.diag([0.0, 1.0])})
PLUS = np.full((2, 2), 0.5)


def test_state_validation():
    State(PLUS)
    with pytest.raises(InvariantViolation) as e:
        State(np.diag([0.5, 0.6]))
    assert e.value.invariant == "state.unit_trace"
    assert abs(e.value.residual - 0.1) < 1e-12
    with pytest.raises(InvariantViolation):
        State(np.diag([1.5, -0.5]))
    with pytest.raises(InvariantViolation):
        State(np.array([[0.5, 1.0], [0.0, 0.5]]))


def test_effect_complement():
    e = Effect(np.diag([0.25, 1.0]))
    assert np.abs(e.complement().mat - np.diag([0.75, 0.0])).max() == 0
    with pytest.raises(InvariantViolation):
        Effect(np.diag([1.5, 0.0]))


def test_observable_must_sum_to_identity():
    with pytest.raises(InvariantViolation) as e:
        Observable({"a": np.eye(2) * 0.5, "b": np.eye(2) * 0.4})
    assert e.value.invariant == "observable.sum_to_identity"


def test_observable_rejects_duplicate_labels():
    with pytest.raises(LabelMismatch):
        Observable.from_list([np.eye(2) / 2, np.eye(2) / 2], labels=["a", "a"])


def test_observable_dim_mismatch():
    with pytest.raises(DimMismatch):
        Observable({"a": np.eye(2), "b": np.zeros((3, 3))})


def test_born_rule_z_on_plus():
    # hand arithmetic: tr(|+><+| |0><0|) = 1/2
    assert rho_distribution(Z, State(PLUS)) == {"0": 0.5, "1": 0.5}


def test_distribution_rejects_dim_mismatch():
    with pytest.raises(DimMismatch):
        rho_distribution(Z, State(np.eye(3) / 3))


@given(st.integers(0, 10_000), st.integers(2, 4))
def test_distribution_sums_to_one(seed, d):
    rng = np.random.default_rng(seed)
    a = rand_observable(rng, d, 3)
    p = rho_distribution(a, rand_state(rng, d))
    assert abs(sum(p.values()) - 1) < 1e-12
    assert min(p.values()) >= 0


@given(st.text(max_size=5), st.text(max_size=5))
def test_pair_labels_round_trip(x, y):
    assert split_label(pair_label(x, y)) == (x, y)


def test_pair_label_escapes_separator():
    lab = pair_label("a⊗b", "c")
    assert split_label(lab) == ("a⊗b", "c")
    with pytest.raises(ValueError):
        split_label("plain")


def test_tensor_biobservable_marginals():
    rng = np.random.default_rng(3)
    a, b = rand_observable(rng, 2, 2), rand_observable(rng, 3, 3)
    c = tensor_biobservable(a, b)
    m1 = bi_marginal(c, 1)
    for x in a.labels:
        assert np.abs(m1[x] - np.kron(a[x], np.eye(3))).max() < 1e-12


def test_bi_observable_grid_must_be_full():
    with pytest.raises(LabelMismatch):
        BiObservable(["a"], ["b", "c"], {("a", "b"): np.eye(2)})


def test_commuting_joint_of_diagonals():
    a = Observable({"0": np.diag([0.2, 0.9]), "1": np.diag([0.8, 0.1])})
    c = commuting_joint(Z, a)
    cert = verify_joint_biobservable(c, Z, a)
    assert cert.passed and cert.residual < 1e-12
    assert np.abs(c["0", "0"] - np.diag([0.2, 0.0])).max() < 1e-15


def test_noncommuting_sharp_observables_have_no_product_joint():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    x = Observable({"+": projector(h[:, 0]), "-": projector(h[:, 1])})
    with pytest.raises(NonCommuting):
        commuting_joint(Z, x)


def test_verify_joint_biobservable_catches_wrong_marginal():
    c = tensor_biobservable(Z, identity_observable(1, {"u": 1.0}))
    # grid is on C^2 (x) C^1 = C^2, marginals Z and the trivial observable
    triv = identity_observable(2, {"u": 1.0})
    assert verify_joint_biobservable(c, Z, triv).passed
    other = Observable({"0": np.diag([0.9, 0.0]), "1": np.diag([0.1, 1.0])})
    cert = verify_joint_biobservable(c, other, triv)
    assert not cert.passed
    assert abs(cert.residual_1 - 0.1) < 1e-12


def test_sharpness():
    assert is_sharp(basis_observable(3))
    assert not is_sharp(identity_observable(2, {"a": 0.5, "b": 0.5}))
