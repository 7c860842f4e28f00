"""Seeded property suite run by ``qinstrument selftest``.

Each property maps ``(rng, dim, tol)`` to a nonnegative residual; a trial
passes when the residual is at most ``factor * tol.eq_tol``. Boolean checks
report 0 for success and 1 for failure. Per-property generators are seeded
from ``(seed, crc32(name), dim)``, so adding a property never changes the
inputs of another, and the report holds no timings, making it
byte-identical across runs.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import sampling as smp
from .coexistence import (
    condition_joint,
    measured_conditioned_joint,
    measured_joint_observable,
    observable_joint_transfer,
    postprocess_joint,
    trivial_joint,
    verify_joint_instrument,
)
from .families import (
    arbitrary_then_holevo,
    convex_holevo,
    convex_tensor_product,
    detect_holevo,
    detect_kraus,
    holevo,
    holevo_bi,
    holevo_compose_closed_form,
    holevo_spec,
    holevo_then_arbitrary,
    kraus_compose_closed_form,
    kraus_instrument,
    lueders,
    trivial,
)
from .instruments import (
    BiInstrument,
    Instrument,
    bi_instrument_distance,
    bi_marginal_instrument,
    born_distribution,
    channel,
    conditioned,
    conditioned_observable,
    convex_combination,
    instrument_distance,
    measured_observable,
    post_process,
    sequential_product,
    tensor_instrument,
    then_instrument,
)
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    kron,
    matrix_units,
    max_abs,
    partial_trace,
    psd_sqrt,
    random_instrument,
    random_matrix,
    random_povm,
    random_state,
    random_unitary,
)
from .models import MeasurementModel, measured_instrument, measured_observable_of_model, measurement_instrument, sequential_model_product
from .objects import (
    Observable,
    bi_marginal,
    commuting_joint,
    is_sharp,
    observable_distance,
    pair_label,
    rho_distribution,
    tensor_biobservable,
    verify_joint_biobservable,
)
from .operations import (
    Operation,
    append_state_operation,
    apply,
    choi,
    compose,
    dual_apply,
    kraus_from_choi,
    op_distance,
    partial_trace_operation,
    tensor,
)

Property = Callable[[np.random.Generator, int, Tolerances], float]


@dataclass(frozen=True)
class PropertySpec:
    name: str
    module: str
    check: Property
    factor: float = 10.0


def _bool(ok: bool) -> float:
    return 0.0 if ok else 1.0


# -- linalg ------------------------------------------------------------------------------


def _psd_sqrt_squares(rng, d, tol):
    rho = random_state(d, rng)
    r = psd_sqrt(rho, tol)
    return max_abs(r @ r - rho)


def _partial_trace_channel(rng, d, tol):
    m = random_matrix(d * 2, d * 2, rng)
    r1 = max_abs(partial_trace_operation(d, 2, 1).apply(m) - partial_trace(m, d, 2, 1))
    r2 = max_abs(partial_trace_operation(d, 2, 2).apply(m) - partial_trace(m, d, 2, 2))
    return max(r1, r2)


def _kron_associative(rng, d, tol):
    a, b, c = random_matrix(d, d, rng), random_matrix(2, 2, rng), random_matrix(d, 2, rng)
    return max_abs(kron(kron(a, b), c) - kron(a, kron(b, c)))


def _partial_trace_linear(rng, d, tol):
    m, n = random_matrix(2 * d, 2 * d, rng), random_matrix(2 * d, 2 * d, rng)
    s, t = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    worst = 0.0
    for keep in (1, 2):
        lhs = partial_trace(s * m + t * n, 2, d, keep)
        worst = max(worst, max_abs(lhs - s * partial_trace(m, 2, d, keep) - t * partial_trace(n, 2, d, keep)))
    return worst


def _kron_trace(rng, d, tol):
    a, b = random_matrix(d, d, rng), random_matrix(3, 3, rng)
    return abs(np.trace(kron(a, b)) - np.trace(a) * np.trace(b))


def _generators_reproducible(rng, d, tol):
    seed = int(rng.integers(2**32))
    same = (
        np.array_equal(random_state(d, seed), random_state(d, seed))
        and all(np.array_equal(p, q) for p, q in zip(random_povm(d, 3, seed), random_povm(d, 3, seed)))
        and all(
            np.array_equal(k, l)
            for row1, row2 in zip(random_instrument(d, 2, 2, 2, seed), random_instrument(d, 2, 2, 2, seed))
            for k, l in zip(row1, row2)
        )
    )
    return _bool(same)


# -- objects -----------------------------------------------------------------------------


def _distribution_sums(rng, d, tol):
    p = rho_distribution(smp.rand_observable(rng, d, 4, tol=tol), smp.rand_state(rng, d, tol), tol)
    return abs(sum(p.values()) - 1)


def _tensor_biobservable_marginal(rng, d, tol):
    a, b = smp.rand_observable(rng, d, 2, "a", tol), smp.rand_observable(rng, 2, 3, "b", tol)
    m1 = bi_marginal(tensor_biobservable(a, b, tol), 1, tol)
    return max(max_abs(m1[x] - kron(a[x], np.eye(2))) for x in a.labels)


def _sharp_spectrum(rng, d, tol):
    u = random_unitary(d, rng)
    a = Observable({x: u @ e @ u.conj().T for x, e in smp.basis_observable(d).effects.items()}, tol)
    worst = _bool(is_sharp(a, tol))
    for e in a.effects.values():
        w = np.linalg.eigvalsh(e)
        worst = max(worst, float(np.minimum(np.abs(w), np.abs(w - 1)).max()))
    return worst


def _povm_sums(rng, d, tol):
    a = smp.rand_observable(rng, d, 3, tol=tol)
    return max_abs(sum(a.effects.values()) - np.eye(d))


def _commuting_joint_marginals(rng, d, tol):
    u = random_unitary(d, rng)
    w1 = smp.stochastic_matrix(rng, d, 2)
    w2 = smp.stochastic_matrix(rng, d, 3)
    a = Observable({str(k): u @ np.diag(w1[:, k]) @ u.conj().T for k in range(2)}, tol)
    b = Observable({str(k): u @ np.diag(w2[:, k]) @ u.conj().T for k in range(3)}, tol)
    return verify_joint_biobservable(commuting_joint(a, b, tol), a, b, tol).residual


# -- operations --------------------------------------------------------------------------


def _duality(rng, d, tol):
    op = smp.rand_operation(rng, d, d, 2, tol)
    b, m = random_matrix(d, d, rng), random_matrix(d, d, rng)
    return abs(np.trace(b @ apply(op, m)) - np.trace(dual_apply(op, b) @ m))


def _compose_dual(rng, d, tol):
    i = smp.rand_operation(rng, d, d, 2, tol)
    j = smp.rand_operation(rng, d, d, 2, tol)
    ij = compose(i, j, tol)
    return max(max_abs(dual_apply(ij, e) - dual_apply(i, dual_apply(j, e))) for _, _, e in matrix_units(d))


def _choi_round_trip(rng, d, tol):
    op = smp.rand_operation(rng, d, d + 1, 3, tol)
    return op_distance(op, kraus_from_choi(choi(op), d, d + 1, tol))


def _tensor_on_products(rng, d, tol):
    a = smp.rand_operation(rng, d, 2, 2, tol)
    b = smp.rand_operation(rng, 2, d, 2, tol)
    m1, m2 = random_matrix(d, d, rng), random_matrix(2, 2, rng)
    return max_abs(tensor(a, b, tol).apply(kron(m1, m2)) - kron(a.apply(m1), b.apply(m2)))


def _trace_non_increasing(rng, d, tol):
    op = smp.rand_operation(rng, d, 2, 2, tol).scaled(float(rng.uniform(0.2, 1.0)))
    t = np.trace(apply(op, random_state(d, rng))).real
    return max(0.0, t - 1, -t)


def _choi_psd(rng, d, tol):
    c = choi(smp.rand_operation(rng, d, d + 1, 3, tol))
    return max(0.0, -float(np.linalg.eigvalsh((c + c.conj().T) / 2)[0]))


# -- instruments -------------------------------------------------------------------------


def _pair(rng, d, tol):
    return smp.rand_instrument(rng, d, d, 2, 2, "x", tol), smp.rand_instrument(rng, d, d, 3, 2, "y", tol)


def _conditioned_is_marginal(rng, d, tol):
    i, j = _pair(rng, d, tol)
    return instrument_distance(conditioned(j, i, tol), bi_marginal_instrument(sequential_product(i, j, tol), 2, tol))


def _then_is_marginal(rng, d, tol):
    i, j = _pair(rng, d, tol)
    return instrument_distance(then_instrument(i, j, tol), bi_marginal_instrument(sequential_product(i, j, tol), 1, tol))


def _marginals_share_channel(rng, d, tol):
    i, j = _pair(rng, d, tol)
    k = sequential_product(i, j, tol)
    return op_distance(channel(bi_marginal_instrument(k, 1, tol)), channel(bi_marginal_instrument(k, 2, tol)))


def _born_matches_observable(rng, d, tol):
    i = smp.rand_instrument(rng, d, 2, 3, 2, tol=tol)
    rho = smp.rand_state(rng, d, tol)
    p, q = born_distribution(i, rho, tol), rho_distribution(measured_observable(i, tol), rho, tol)
    return max(abs(p[x] - q[x]) for x in i.labels)


def _commuting_lueders(rng, d, tol):
    """Lueders instruments of observables diagonal in one basis."""
    u = random_unitary(d, rng)
    w1, w2 = smp.stochastic_matrix(rng, d, 2), smp.stochastic_matrix(rng, d, 3)
    a = Observable({f"a{k}": u @ np.diag(w1[:, k]) @ u.conj().T for k in range(2)}, tol)
    b = Observable({f"b{k}": u @ np.diag(w2[:, k]) @ u.conj().T for k in range(3)}, tol)
    return lueders(a, tol), lueders(b, tol)


def _commuting_cross_duals(rng, d, tol):
    """Instruments whose two orders agree satisfy ``I_x^*(J^_y) = J_y^*(I^_x)``."""
    i, j = _commuting_lueders(rng, d, tol)
    order = bi_instrument_distance(sequential_product(i, j, tol), sequential_product(j, i, tol).transposed())
    ih, jh = measured_observable(i, tol), measured_observable(j, tol)
    cross = max(max_abs(dual_apply(i[x], jh[y]) - dual_apply(j[y], ih[x])) for x in i.labels for y in j.labels)
    return max(order, cross)


def _mixture_linear(rng, d, tol):
    i1 = smp.rand_instrument(rng, d, d, 2, 2, "x", tol)
    i2 = smp.rand_instrument(rng, d, d, 2, 2, "x", tol)
    w = smp.probability_vector(rng, 2)
    mix = convex_combination([i1, i2], w, tol)
    a1, a2 = measured_observable(i1, tol), measured_observable(i2, tol)
    r_obs = max(max_abs(measured_observable(mix, tol)[x] - w[0] * a1[x] - w[1] * a2[x]) for x in mix.labels)
    rho = random_state(d, rng)
    r_ch = max_abs(channel(mix).apply(rho) - w[0] * channel(i1).apply(rho) - w[1] * channel(i2).apply(rho))
    return max(r_obs, r_ch)


def _post_process_observable(rng, d, tol):
    i = smp.rand_instrument(rng, d, d, 3, 2, "x", tol)
    lam = smp.stochastic_matrix(rng, 3, 2)
    p = post_process(i, lam, ["a", "b"], tol)
    a = measured_observable(i, tol)
    direct = {z: sum(lam[r, c] * a[x] for r, x in enumerate(i.labels)) for c, z in enumerate(["a", "b"])}
    return max(max_abs(measured_observable(p, tol)[z] - direct[z]) for z in direct)


def _tensor_measured(rng, d, tol):
    i = smp.rand_instrument(rng, 2, d, 2, 2, "x", tol)
    j = smp.rand_instrument(rng, 2, 2, 2, 2, "y", tol)
    k = tensor_instrument(i, j, tol)
    ai, aj = measured_observable(i, tol), measured_observable(j, tol)
    c = k.measured_biobservable(tol)
    return max(max_abs(c[x, y] - kron(ai[x], aj[y])) for x in i.labels for y in j.labels)


# -- families ----------------------------------------------------------------------------


def _holevo_holevo(rng, d, tol):
    h1 = smp.rand_holevo_spec(rng, d, d, 2, "x", tol)
    h2 = smp.rand_holevo_spec(rng, d, d, 3, "y", tol)
    closed = holevo_bi(holevo_compose_closed_form(h1, h2, tol), tol)
    return bi_instrument_distance(closed, sequential_product(holevo(h1, tol), holevo(h2, tol), tol))


def _kraus_kraus(rng, d, tol):
    k1 = smp.rand_kraus_spec(rng, d, d, 2, "x", tol)
    k2 = smp.rand_kraus_spec(rng, d, d, 2, "y", tol)
    closed = kraus_instrument(kraus_compose_closed_form(k1, k2), tol)
    generic = sequential_product(kraus_instrument(k1, tol), kraus_instrument(k2, tol), tol).flatten(tol)
    return instrument_distance(closed, generic)


def _arbitrary_holevo(rng, d, tol):
    k = smp.rand_instrument(rng, d, d, 2, 2, "x", tol)
    h = smp.rand_holevo_spec(rng, d, d, 2, "y", tol)
    closed = holevo_bi(arbitrary_then_holevo(k, h, tol), tol)
    return bi_instrument_distance(closed, sequential_product(k, holevo(h, tol), tol))


def _holevo_arbitrary(rng, d, tol):
    h = smp.rand_holevo_spec(rng, d, d, 2, "x", tol)
    k = smp.rand_instrument(rng, d, d, 2, 2, "y", tol)
    closed = holevo_bi(holevo_then_arbitrary(h, k, tol), tol)
    return bi_instrument_distance(closed, sequential_product(holevo(h, tol), k, tol))


def _convex_holevo(rng, d, tol):
    h1 = smp.rand_holevo_spec(rng, d, d, 2, "x", tol)
    a2 = smp.rand_observable(rng, d, 2, "x", tol)
    h2 = holevo_spec(a2, h1.states, tol)
    w = smp.probability_vector(rng, 2)
    closed = holevo(convex_holevo([h1, h2], w, tol), tol)
    return instrument_distance(closed, convex_combination([holevo(h1, tol), holevo(h2, tol)], w, tol))


def _detect_round_trip(rng, d, tol):
    h = smp.rand_holevo_spec(rng, d, d, 2, "x", tol)
    found = detect_holevo(holevo(h, tol), tol)
    if found is None:
        return 1.0
    r_h = max(max_abs(found.states[x].mat - h.states[x].mat) for x in h.labels)
    k = smp.rand_kraus_spec(rng, d, d, 2, "x", tol)
    kf = detect_kraus(kraus_instrument(k, tol), tol)
    if kf is None:
        return 1.0
    return max(r_h, instrument_distance(kraus_instrument(kf, tol), kraus_instrument(k, tol)))


def _lueders_measures(rng, d, tol):
    a = smp.rand_observable(rng, d, 3, tol=tol)
    return observable_distance(measured_observable(lueders(a, tol), tol), a)


def _postprocessed_holevo(rng, d, tol):
    """Holds for a shared output state; with distinct states the result is generally not Holevo."""
    a = smp.rand_observable(rng, d, 3, "x", tol)
    alpha = random_state(d, rng)
    h = holevo_spec(a, {x: alpha for x in a.labels}, tol)
    lam = smp.stochastic_matrix(rng, 3, 2)
    found = detect_holevo(post_process(holevo(h, tol), lam, ["a", "b"], tol), tol)
    if found is None:
        return 1.0
    return max(max_abs(found.observable[z] - sum(lam[r, c] * a[x] for r, x in enumerate(a.labels))) for c, z in enumerate(["a", "b"]))


def _trivial_observable(rng, d, tol):
    w = smp.probability_vector(rng, 3)
    betas = {str(k): w[k] * random_state(2, rng) for k in range(3)}
    a = measured_observable(trivial(betas, d, tol), tol)
    return max(max_abs(a[y] - w[int(y)] * np.eye(d)) for y in betas)


def _convex_tensor(rng, d, tol):
    i = smp.rand_instrument(rng, d, 2, 2, 2, "x", tol)
    j = smp.rand_instrument(rng, d, 2, 2, 2, "y", tol)
    w = smp.probability_vector(rng, 4)
    lam, mu = dict(zip(j.labels, w[:2])), dict(zip(i.labels, w[2:]))
    alphas = {x: random_state(2, rng) for x in i.labels}
    betas = {y: random_state(2, rng) for y in j.labels}
    k = convex_tensor_product(i, j, alphas, betas, lam, mu, tol)
    ai, aj = measured_observable(i, tol), measured_observable(j, tol)
    c = k.measured_biobservable(tol)
    return max(max_abs(c[x, y] - lam[y] * ai[x] - mu[x] * aj[y]) for x in i.labels for y in j.labels)


def _commuting_holevo_pairs(rng, d, tol):
    """A projective Holevo instrument preparing its own eigenvectors commutes with itself."""
    u = random_unitary(d, rng)
    proj = {str(k): np.outer(u[:, k], u[:, k].conj()) for k in range(d)}
    spec = holevo_spec(Observable(proj, tol), proj, tol)
    h = holevo(spec, tol)
    order = bi_instrument_distance(sequential_product(h, h, tol), sequential_product(h, h, tol).transposed())
    a = spec.observable
    comm = max(max_abs(a[x] @ a[y] - a[y] @ a[x]) for x in a.labels for y in a.labels)
    return max(order, comm)


# -- coexistence -------------------------------------------------------------------------


def _trivial_joint_setup(rng, d, tol):
    i = smp.rand_instrument(rng, d, d, 2, 2, "x", tol)
    w = smp.probability_vector(rng, 2)
    betas = {f"y{k}": w[k] * random_state(2, rng) for k in range(2)}
    return i, trivial(betas, d, tol), trivial_joint(i, betas, tol)


def _trivial_joint(rng, d, tol):
    i, j, k = _trivial_joint_setup(rng, d, tol)
    return verify_joint_instrument(k, i, j, tol=tol).residual


def _postprocess_joint(rng, d, tol):
    i, j, k = _trivial_joint_setup(rng, d, tol)
    lam = smp.stochastic_matrix(rng, 2, 3)
    labs = ["a", "b", "c"]
    return verify_joint_instrument(postprocess_joint(k, lam, labs, tol), post_process(i, lam, labs, tol), j, tol=tol).residual


def _condition_joint(rng, d, tol):
    i, j, l = _trivial_joint_setup(rng, d, tol)
    k = smp.rand_instrument(rng, d, d, 2, 2, "k", tol)
    m = condition_joint(l, k, tol)
    return verify_joint_instrument(m, conditioned(i, k, tol), conditioned(j, k, tol), tol=tol).residual


def _observable_transfer(rng, d, tol):
    u = random_unitary(d, rng)
    w1, w2 = smp.stochastic_matrix(rng, d, 2), smp.stochastic_matrix(rng, d, 2)
    a = Observable({str(k): u @ np.diag(w1[:, k]) @ u.conj().T for k in range(2)}, tol)
    b = Observable({str(k): u @ np.diag(w2[:, k]) @ u.conj().T for k in range(2)}, tol)
    i = smp.rand_instrument(rng, d, d, 2, 2, "k", tol)
    dj = observable_joint_transfer(commuting_joint(a, b, tol), i, tol)
    return verify_joint_biobservable(dj, conditioned_observable(a, i, tol), conditioned_observable(b, i, tol), tol).residual


def _measured_conditioned_joint(rng, d, tol):
    i = smp.rand_instrument(rng, d, d, 2, 2, "x", tol)
    a = smp.rand_observable(rng, d, 3, "y", tol)
    b = measured_conditioned_joint(i, a, tol)
    return verify_joint_biobservable(b, measured_observable(i, tol), conditioned_observable(a, i, tol), tol).residual


def _measured_joint_observable(rng, d, tol):
    i, j, k = _trivial_joint_setup(rng, d, tol)
    c = measured_joint_observable(verify_joint_instrument(k, i, j, tol=tol), tol)
    return verify_joint_biobservable(c, measured_observable(i, tol), measured_observable(j, tol), tol).residual


def _planted_violation(rng, d, tol):
    """Adds ``sqrt(eps)|0><k|`` to one grid entry; the verifier must reject it."""
    i, j, k = _trivial_joint_setup(rng, d, tol)
    keys = list(k.grid)
    key = keys[int(rng.integers(len(keys)))]
    eps = 100 * tol.eq_tol
    extra = np.zeros((k.dim_out, k.dim_in), dtype=np.complex128)
    extra[0, int(rng.integers(k.dim_in))] = np.sqrt(eps)
    grid = dict(k.grid)
    grid[key] = Operation.unchecked([*grid[key].kraus, extra])
    bad = BiInstrument.unchecked(k.labels1, k.labels2, grid)
    return _bool(not verify_joint_instrument(bad, i, j, tol=tol).passed)


def _sharp_commutator(rng, d, tol):
    i = smp.rand_sharp_instrument(rng, d, tol)
    a = smp.rand_observable(rng, d, 3, "y", tol)
    ih, ai = measured_observable(i, tol), conditioned_observable(a, i, tol)
    return max(max_abs(ih[x] @ ai[y] - ai[y] @ ih[x]) for x in ih.labels for y in ai.labels)


# -- measurement models ------------------------------------------------------------------


def _model_observable(rng, d, tol):
    m = smp.rand_model(rng, 2, d, tol=tol)
    return observable_distance(measured_observable_of_model(m, tol), measured_observable(measured_instrument(m, tol), tol))


def _model_duality(rng, d, tol):
    m = smp.rand_model(rng, 2, d, tol=tol)
    rho = random_state(2, rng)
    obs = measured_observable_of_model(m, tol)
    mi = measurement_instrument(m, tol)
    return max(
        abs(np.trace(rho @ obs[x]) - sum(np.trace(mi[x, y].apply(rho)) for y in mi.labels2)) for x in obs.labels
    )


def _model_channel(rng, d, tol):
    m = smp.rand_model(rng, 2, d, tol=tol)
    mi = measured_instrument(m, tol)
    return max_abs(sum(op.normalizer() for op in mi.ops.values()) - np.eye(2))


def _lueders_bridge(rng, d, tol):
    xi = random_state(d, rng)
    inter = Instrument({"0": append_state_operation(2, xi, tol)}, tol)
    probe = smp.rand_observable(rng, d, 3, "p", tol)
    obs = measured_observable_of_model(MeasurementModel(2, d, inter, probe), tol)
    return max(max_abs(obs[x] - np.trace(xi @ probe[x]) * np.eye(2)) for x in probe.labels)


def _sequential_model(rng, d, tol):
    m = smp.rand_model(rng, 2, d, tol=tol)
    m1 = smp.rand_model(rng, 2 * d, 2, tol=tol)
    prod = sequential_model_product(m, m1, tol)
    got = measured_observable_of_model(prod, tol)
    ibar, ibar1 = channel(m.interaction), channel(m1.interaction)
    worst = 0.0
    for x in m.probe.labels:
        for y in m1.probe.labels:
            e = kron(kron(np.eye(2), m.probe[x]), m1.probe[y])
            nested = dual_apply(ibar, dual_apply(ibar1, e))
            worst = max(worst, max_abs(got[pair_label(x, y)] - nested))
    return worst


def _sequential_model_traces(rng, d, tol):
    """Tracing out ``K (x) K1`` at once matches tracing ``K1`` then ``K``."""
    m = smp.rand_model(rng, 2, d, tol=tol)
    m1 = smp.rand_model(rng, 2 * d, 2, tol=tol)
    prod = sequential_model_product(m, m1, tol)
    rho = random_state(2, rng)
    out = channel(prod.interaction).apply(rho)
    once = partial_trace(out, 2, d * 2, 1)
    twice = partial_trace(partial_trace(out, 2 * d, 2, 1), 2, d, 1)
    return max_abs(once - twice)


PROPERTIES: list[PropertySpec] = [
    PropertySpec("psd_sqrt_squares_back", "linalg", _psd_sqrt_squares),
    PropertySpec("partial_trace_channel_matches_partial_trace", "linalg", _partial_trace_channel),
    PropertySpec("kron_associative", "linalg", _kron_associative),
    PropertySpec("partial_trace_linear", "linalg", _partial_trace_linear),
    PropertySpec("kron_trace_multiplies", "linalg", _kron_trace),
    PropertySpec("generators_reproducible", "linalg", _generators_reproducible, 0.5),
    PropertySpec("random_povm_sums_to_identity", "objects", _povm_sums),
    PropertySpec("distribution_sums_to_one", "objects", _distribution_sums),
    PropertySpec("tensor_biobservable_marginal", "objects", _tensor_biobservable_marginal),
    PropertySpec("sharp_effects_are_projections", "objects", _sharp_spectrum),
    PropertySpec("commuting_joint_has_marginals", "objects", _commuting_joint_marginals),
    PropertySpec("trace_duality", "operations", _duality),
    PropertySpec("dual_of_composition", "operations", _compose_dual),
    PropertySpec("choi_round_trip", "operations", _choi_round_trip),
    PropertySpec("tensor_on_products", "operations", _tensor_on_products),
    PropertySpec("trace_non_increasing", "operations", _trace_non_increasing),
    PropertySpec("choi_is_psd", "operations", _choi_psd),
    PropertySpec("conditioned_is_second_marginal", "instruments", _conditioned_is_marginal),
    PropertySpec("then_is_first_marginal", "instruments", _then_is_marginal),
    PropertySpec("marginals_share_channel", "instruments", _marginals_share_channel),
    PropertySpec("born_matches_measured_observable", "instruments", _born_matches_observable),
    PropertySpec("commuting_instruments_cross_duals", "instruments", _commuting_cross_duals),
    PropertySpec("mixture_is_linear", "instruments", _mixture_linear),
    PropertySpec("post_processed_observable", "instruments", _post_process_observable),
    PropertySpec("tensor_measured_observable", "instruments", _tensor_measured),
    PropertySpec("holevo_then_holevo_closed_form", "families", _holevo_holevo),
    PropertySpec("kraus_then_kraus_closed_form", "families", _kraus_kraus),
    PropertySpec("arbitrary_then_holevo_closed_form", "families", _arbitrary_holevo),
    PropertySpec("holevo_then_arbitrary_closed_form", "families", _holevo_arbitrary),
    PropertySpec("convex_holevo_closed_form", "families", _convex_holevo),
    PropertySpec("detectors_round_trip", "families", _detect_round_trip),
    PropertySpec("lueders_measures_its_observable", "families", _lueders_measures),
    PropertySpec("post_processed_shared_state_holevo", "families", _postprocessed_holevo),
    PropertySpec("trivial_measures_identity_observable", "families", _trivial_observable),
    PropertySpec("convex_tensor_measured_observable", "families", _convex_tensor),
    PropertySpec("commuting_holevo_observables_commute", "families", _commuting_holevo_pairs),
    PropertySpec("trivial_joint_verifies", "coexistence", _trivial_joint),
    PropertySpec("postprocess_joint_verifies", "coexistence", _postprocess_joint),
    PropertySpec("condition_joint_verifies", "coexistence", _condition_joint),
    PropertySpec("observable_transfer_verifies", "coexistence", _observable_transfer),
    PropertySpec("measured_conditioned_joint_verifies", "coexistence", _measured_conditioned_joint),
    PropertySpec("measured_joint_observable_verifies", "coexistence", _measured_joint_observable),
    PropertySpec("planted_violation_rejected", "coexistence", _planted_violation, 0.5),
    PropertySpec("sharp_instrument_commutes", "coexistence", _sharp_commutator),
    PropertySpec("model_observable_two_routes", "models", _model_observable),
    PropertySpec("model_duality", "models", _model_duality),
    PropertySpec("measured_instrument_is_instrument", "models", _model_channel),
    PropertySpec("lueders_bridge_identity_observable", "models", _lueders_bridge),
    PropertySpec("sequential_model_nested_dual", "models", _sequential_model, 100.0),
    PropertySpec("sequential_model_partial_traces", "models", _sequential_model_traces),
]


def _rng(seed: int, name: str, dim: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode()), dim])


def selftest(seed: int = 42, trials: int = 100, dims: Sequence[int] = (2, 3), tol: Tolerances = DEFAULT_TOL) -> dict:
    """Run every property ``trials`` times per dimension and collect the worst residuals.

    An exception inside a trial counts as a failure of that property.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    for spec in PROPERTIES:
        worst, failures, errors = 0.0, 0, []
        threshold = spec.factor * tol.eq_tol
        for d in dims:
            rng = _rng(seed, spec.name, d)
            for _ in range(trials):
                try:
                    r = float(spec.check(rng, d, tol))
                except Exception as e:  # noqa: BLE001 - any crash is a failed trial
                    failures += 1
                    if len(errors) < 3:
                        errors.append(f"dim {d}: {type(e).__name__}: {e}")
                    continue
                worst = max(worst, r)
                failures += r > threshold
        row = {
            "name": spec.name,
            "module": spec.module,
            "max_residual": worst,
            "threshold": threshold,
            "failures": failures,
            "status": "pass" if failures == 0 else "fail",
        }
        if errors:
            row["errors"] = errors
        rows.append(row)
    return {
        "seed": seed,
        "trials": trials,
        "dims": list(dims),
        "eq_tol": tol.eq_tol,
        "properties": rows,
        "passed": all(r["status"] == "pass" for r in rows),
    }


def selftest_json(report: dict) -> str:
    return json.dumps(report, indent=1) + "\n"


def selftest_text(report: dict) -> str:
    lines = [f"selftest seed={report['seed']} trials={report['trials']} dims={report['dims']} eq_tol={report['eq_tol']:g}"]
    for r in report["properties"]:
        lines.append(f"{r['status'].upper():4s} {r['module']:12s} {r['name']:45s} max_residual={r['max_residual']:.3e}")
        for e in r.get("errors", []):
            lines.append(f"     {e}")
    lines.append("all properties passed" if report["passed"] else "some properties failed")
    return "\n".join(lines) + "\n"
