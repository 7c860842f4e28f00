"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line with its worst residual; the lines are
printed in the terminal summary by conftest.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from conftest import ACCEPTANCE_LINES, TRIALS
from qinstrument import sampling as smp
from qinstrument.cli import main
from qinstrument.coexistence import (
    condition_joint,
    measured_conditioned_joint,
    observable_joint_transfer,
    postprocess_joint,
    trivial_joint,
    verify_joint_instrument,
)
from qinstrument.families import (
    arbitrary_then_holevo,
    convex_holevo,
    detect_holevo,
    holevo,
    holevo_bi,
    holevo_compose_closed_form,
    holevo_spec,
    holevo_then_arbitrary,
    kraus_compose_closed_form,
    kraus_instrument,
    mixed_holevo_states,
    trivial,
)
from qinstrument.instruments import (
    BiInstrument,
    bi_instrument_distance,
    bi_marginal_instrument,
    channel,
    conditioned,
    conditioned_observable,
    convex_combination,
    instrument_distance,
    measured_observable,
    post_process,
    reduced_marginal,
    sequential_product,
    tensor_instrument,
    then_instrument,
)
from qinstrument.linalg import kron, matrix_unit, partial_trace, random_matrix, random_state, random_unitary
from qinstrument.models import (
    holevo_model_weights,
    measured_instrument,
    measured_observable_of_model,
    sequential_model_product,
)
from qinstrument.objects import (
    BiObservable,
    Observable,
    commuting_joint,
    identity_observable,
    observable_distance,
    pair_label,
    verify_joint_biobservable,
)
from qinstrument.operations import Operation, compose, op_distance
from qinstrument.scenario import load_scenario, object_distance, parse_scenario, run_scenario, serialize_scenario

ROOT = Path(__file__).resolve().parents[1]


def _rng(criterion: int) -> np.random.Generator:
    return np.random.default_rng([2024, criterion])


def _record(label: str, checks: dict[str, tuple[float, float]]):
    """``checks`` maps a name to (worst residual, bound); all must be below their bound."""
    ok = all(r < b for r, b in checks.values())
    detail = "; ".join(f"{k} {r:.2e} < {b:.0e}" if r < b else f"{k} {r:.2e} >= {b:.0e}" for k, (r, b) in checks.items())
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE_LINES.append((label, ok, detail))
    print(line)
    assert ok, line


def _dual_of_composition(i: Operation, j: Operation) -> float:
    """Worst gap between the dual of ``i then j`` and ``i* after j*`` on output matrix units."""
    c = compose(i, j)
    d = j.dim_out
    return max(
        float(np.abs(c.dual_apply(matrix_unit(d, a, b)) - i.dual_apply(j.dual_apply(matrix_unit(d, a, b)))).max())
        for a in range(d)
        for b in range(d)
    )


def test_01_duality():
    rng = _rng(1)
    worst_trace = worst_compose = 0.0
    for d in (2, 3, 4):
        for _ in range(TRIALS):
            op = smp.rand_operation(rng, d, d, 2)
            m, b = random_matrix(d, d, rng), random_matrix(d, d, rng)
            gap = abs(np.trace(b @ op.apply(m)) - np.trace(op.dual_apply(b) @ m))
            worst_trace = max(worst_trace, gap)
            worst_compose = max(worst_compose, _dual_of_composition(op, smp.rand_operation(rng, d, d, 2)))
    _record("trace duality and dual of a composition", {
        "trace pairing": (worst_trace, 1e-9),
        "composition dual": (worst_compose, 1e-8),
    })


def test_02_instrument_algebra():
    rng = _rng(2)
    worst_marg = worst_channel = 0.0
    for _ in range(TRIALS):
        d = int(rng.choice([2, 3, 4]))
        i = smp.rand_instrument(rng, d, d, 2, 2, "x")
        j = smp.rand_instrument(rng, d, d, 3, 1, "y")
        k = sequential_product(i, j)
        m1, m2 = bi_marginal_instrument(k, 1), bi_marginal_instrument(k, 2)
        worst_marg = max(worst_marg, instrument_distance(conditioned(j, i), m2), instrument_distance(then_instrument(i, j), m1))
        worst_channel = max(worst_channel, op_distance(channel(m1), channel(m2)))
    _record("conditioned and then are marginals of the sequential product", {
        "marginal maps": (worst_marg, 1e-8),
        "shared channel": (worst_channel, 1e-9),
    })


def _identity_observable_specs(rng, n_specs):
    specs = []
    for _ in range(n_specs):
        p = rng.dirichlet(np.ones(2))
        specs.append(holevo_spec(identity_observable(2, {"a": p[0], "b": p[1]}), {x: random_state(2, rng) for x in "ab"}))
    return specs


def _shared_observable_specs(rng, n_specs):
    a = smp.rand_observable(rng, 2, 2)
    return [holevo_spec(a, {x: random_state(2, rng) for x in a.labels}) for _ in range(n_specs)]


def test_03_convexity():
    rng = _rng(3)
    worst_channel = worst_obs = worst_closed = worst_states = 0.0
    for trial in range(TRIALS):
        w = rng.dirichlet(np.ones(3))
        insts = [smp.rand_instrument(rng, 2, 2, 2, 2) for _ in range(3)]
        mix = convex_combination(insts, w)
        worst_channel = max(worst_channel, op_distance(
            channel(mix), Operation([np.sqrt(wi) * k for inst, wi in zip(insts, w) for k in channel(inst).kraus])
        ))
        mobs = [measured_observable(inst) for inst in insts]
        worst_obs = max(worst_obs, max(
            float(np.abs(measured_observable(mix)[x] - sum(wi * o[x] for o, wi in zip(mobs, w))).max()) for x in mix.labels
        ))
        obs = [smp.rand_observable(rng, 2, 3) for _ in range(3)]
        states = {x: random_state(2, rng) for x in obs[0].labels}
        specs = [holevo_spec(a, states) for a in obs]
        worst_closed = max(worst_closed, instrument_distance(holevo(convex_holevo(specs, w)), convex_combination([holevo(s) for s in specs], w)))
        # mixed output states on families whose mixture is Holevo
        fam = _identity_observable_specs(rng, 3) if trial % 2 else _shared_observable_specs(rng, 3)
        found = detect_holevo(convex_combination([holevo(s) for s in fam], w))
        if found is None:
            worst_states = np.inf
            continue
        formula = mixed_holevo_states(fam, w)
        worst_states = max(worst_states, max(float(np.abs(found.states[x].mat - formula[x]).max()) for x in formula))
    _record("convex mixtures: channel, measured observable, Holevo closed form, mixed states", {
        "channel": (worst_channel, 1e-8),
        "observable": (worst_obs, 1e-8),
        "Holevo closed form": (worst_closed, 1e-8),
        "mixed states": (worst_states, 1e-8),
    })


def test_04_tensor():
    rng = _rng(4)
    worst_obs = worst_marg = worst_scaled = 0.0
    for _ in range(TRIALS):
        i = smp.rand_instrument(rng, 2, 2, 2, 2, "x")
        j = smp.rand_instrument(rng, 2, 3, 2, 2, "y")
        k = tensor_instrument(i, j)
        c = k.measured_biobservable()
        mi, mj = measured_observable(i), measured_observable(j)
        worst_obs = max(worst_obs, max(float(np.abs(c[x, y] - kron(mi[x], mj[y])).max()) for x in i.labels for y in j.labels))
        k11 = reduced_marginal(k, 2, 3, 1, 1)
        rho = random_state(4, rng)
        rho1 = random_state(2, rng)
        for x in i.labels:
            worst_marg = max(worst_marg, float(np.abs(k11[x].apply(rho) - i[x].apply(partial_trace(rho, 2, 2, 1))).max()))
            scaled = k11[x].apply(kron(rho1, np.eye(2))) / 2
            worst_scaled = max(worst_scaled, float(np.abs(scaled - i[x].apply(rho1)).max()))
    _record("tensor instruments: measured observable and scaled marginals", {
        "measured observable": (worst_obs, 1e-8),
        "marginal action": (worst_marg, 1e-8),
        "identity-scaled input": (worst_scaled, 1e-8),
    })


def test_05_family_closed_forms():
    rng = _rng(5)
    hh = kk = ah = ha = 0.0
    for _ in range(TRIALS):
        d = int(rng.choice([2, 3, 4]))
        h1, h2 = smp.rand_holevo_spec(rng, d, d, 2, "x"), smp.rand_holevo_spec(rng, d, d, 2, "y")
        hh = max(hh, bi_instrument_distance(holevo_bi(holevo_compose_closed_form(h1, h2)), sequential_product(holevo(h1), holevo(h2))))
        k1, k2 = smp.rand_kraus_spec(rng, d, d, 2, "x"), smp.rand_kraus_spec(rng, d, d, 2, "y")
        generic = sequential_product(kraus_instrument(k1), kraus_instrument(k2)).flatten()
        kk = max(kk, instrument_distance(kraus_instrument(kraus_compose_closed_form(k1, k2)), generic))
        k = smp.rand_instrument(rng, d, d, 2, 2, "x")
        ah = max(ah, bi_instrument_distance(holevo_bi(arbitrary_then_holevo(k, h2)), sequential_product(k, holevo(h2))))
        ha = max(ha, bi_instrument_distance(holevo_bi(holevo_then_arbitrary(h1, k)), sequential_product(holevo(h1), k)))
    _record("family closed forms agree with the generic sequential product", {
        "Holevo then Holevo": (hh, 1e-8),
        "Kraus then Kraus": (kk, 1e-8),
        "any then Holevo": (ah, 1e-8),
        "Holevo then any": (ha, 1e-8),
    })


def test_06_negative_detections():
    h_path = ROOT / "scenarios" / "mixed_holevo_rejected.json"
    k_path = ROOT / "scenarios" / "mixed_kraus_rejected.json"
    h_rep, k_rep = run_scenario(load_scenario(h_path)), run_scenario(load_scenario(k_path))
    h_rejected = [t for t in h_rep["tasks"] if t["kind"] == "detect_holevo" and not t["outputs"]["present"]]
    k_rejected = [t for t in k_rep["tasks"] if t["kind"] == "detect_kraus" and not t["outputs"]["present"]]
    second = max((t["residual"] for t in k_rejected), default=0.0)
    _record("mixtures rejected by the Holevo and Kraus detectors", {
        "Holevo scenario failures": (float(not (h_rep["passed"] and h_rejected)), 0.5),
        "Kraus scenario failures": (float(not (k_rep["passed"] and k_rejected)), 0.5),
        "second Choi eigenvalue margin": (0.1 / second if second else np.inf, 1.0),
    })


def _plant(k: BiInstrument) -> BiInstrument:
    """Add a 1e-2 measure-and-prepare term |0><0| -> |0><0| to one grid entry."""
    grid = dict(k.grid)
    key = (k.labels1[0], k.labels2[0])
    extra = np.zeros((k.dim_out, k.dim_in))
    extra[0, 0] = np.sqrt(1e-2)
    grid[key] = Operation.unchecked([*grid[key].kraus, extra])
    return BiInstrument.unchecked(k.labels1, k.labels2, grid)


def _plant_observable(c: BiObservable) -> BiObservable:
    grid = dict(c.grid)
    key = (c.labels1[0], c.labels2[0])
    grid[key] = grid[key] + 1e-2 * np.diag([1.0] + [0.0] * (c.dim - 1))
    return BiObservable.unchecked(c.labels1, c.labels2, grid)


def test_07_coexistence_constructions():
    rng = _rng(7)
    worst = {"trivial joint": 0.0, "post-processing": 0.0, "conditioning": 0.0, "observable transfer": 0.0, "measured-conditioned joint": 0.0}
    missed = 0
    for _ in range(TRIALS):
        d = int(rng.choice([2, 3, 4]))
        i = smp.rand_instrument(rng, d, d, 2, 2, "x")
        b = random_state(2, rng)
        betas = {"a": 0.4 * b, "b": 0.6 * b}
        j = trivial(betas, d)
        k = trivial_joint(i, betas)
        cert = verify_joint_instrument(k, i, j)
        worst["trivial joint"] = max(worst["trivial joint"], cert.residual)
        missed += verify_joint_instrument(_plant(k), i, j).passed

        lam = smp.stochastic_matrix(rng, 2, 3)
        pp = postprocess_joint(k, lam, ["u", "v", "w"])
        pi = post_process(i, lam, ["u", "v", "w"])
        worst["post-processing"] = max(worst["post-processing"], verify_joint_instrument(pp, pi, j).residual)
        missed += verify_joint_instrument(_plant(pp), pi, j).passed

        up = smp.rand_instrument(rng, 2, d, 2, 2, "z")
        cj = condition_joint(k, up)
        ci, cjj = conditioned(i, up), conditioned(j, up)
        worst["conditioning"] = max(worst["conditioning"], verify_joint_instrument(cj, ci, cjj).residual)
        missed += verify_joint_instrument(_plant(cj), ci, cjj).passed

        diag_a = smp.rand_observable(rng, d, 2, "a")
        u = random_unitary(d, rng)
        diag_a = Observable({x: u @ np.diag(np.diag(e).real) @ u.conj().T for x, e in diag_a.effects.items()})
        sharp = Observable({x: u @ e @ u.conj().T for x, e in smp.basis_observable(d, "b").effects.items()})
        dj = observable_joint_transfer(commuting_joint(diag_a, sharp), i)
        ca, cb = conditioned_observable(diag_a, i), conditioned_observable(sharp, i)
        worst["observable transfer"] = max(worst["observable transfer"], verify_joint_biobservable(dj, ca, cb).residual)
        missed += verify_joint_biobservable(_plant_observable(dj), ca, cb).passed

        target = smp.rand_observable(rng, d, 3, "t")
        mj = measured_conditioned_joint(i, target)
        mi, at = measured_observable(i), conditioned_observable(target, i)
        worst["measured-conditioned joint"] = max(worst["measured-conditioned joint"], verify_joint_biobservable(mj, mi, at).residual)
        missed += verify_joint_biobservable(_plant_observable(mj), mi, at).passed
    checks = {k: (v, 1e-8) for k, v in worst.items()}
    checks["planted violations missed"] = (float(missed), 0.5)
    _record("coexistence constructions certify and planted violations are caught", checks)


def test_08_sharp_instruments_commute():
    rng = _rng(8)
    worst = 0.0
    for _ in range(TRIALS):
        i = smp.rand_sharp_instrument(rng, 3)
        mi = measured_observable(i)
        ai = conditioned_observable(smp.rand_observable(rng, 3, 3, "a"), i)
        for x in mi.labels:
            for y in ai.labels:
                worst = max(worst, float(np.abs(mi[x] @ ai[y] - ai[y] @ mi[x]).max()))
    _record("sharp instruments commute with conditioned observables", {"commutator": (worst, 1e-8)})


def _commuting_holevo_pair(rng, d, design):
    """Two Holevo instruments whose two sequential orders agree."""
    if design == 0:
        gamma = random_state(d, rng)
        p, q = rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(3))
        a = holevo_spec(identity_observable(d, {"x0": p[0], "x1": p[1]}), {"x0": gamma, "x1": gamma})
        b = holevo_spec(identity_observable(d, {f"y{k}": q[k] for k in range(3)}), {f"y{k}": gamma for k in range(3)})
        return a, b
    # the same rank-one projective measurement, preparing its own eigenvectors
    u = random_unitary(d, rng)
    proj = {str(k): np.outer(u[:, k], u[:, k].conj()) for k in range(d)}
    spec = holevo_spec(Observable(proj), proj)
    return spec, spec


def test_09_commuting_holevo_pairs():
    rng = _rng(9)
    worst_order = worst_i = worst_j = worst_cross = worst_comm = 0.0
    for trial in range(TRIALS):
        d = int(rng.choice([2, 3, 4]))
        sa, sb = _commuting_holevo_pair(rng, d, trial % 2)
        i, j = holevo(sa), holevo(sb)
        ij = sequential_product(i, j)
        ji = sequential_product(j, i).transposed()
        worst_order = max(worst_order, bi_instrument_distance(ij, ji))
        mi, mj = measured_observable(i), measured_observable(j)
        worst_i = max(worst_i, observable_distance(conditioned_observable(mi, j), mi))
        worst_j = max(worst_j, observable_distance(conditioned_observable(mj, i), mj))
        for x in i.labels:
            for y in j.labels:
                worst_cross = max(worst_cross, float(np.abs(i[x].dual_apply(mj[y]) - j[y].dual_apply(mi[x])).max()))
                a, b = sa.observable[x], sb.observable[y]
                worst_comm = max(worst_comm, float(np.abs(a @ b - b @ a).max()))
    _record("commuting Holevo pairs", {
        "orders agree": (worst_order, 1e-8),
        "measured I unchanged by J": (worst_i, 1e-8),
        "measured J unchanged by I": (worst_j, 1e-8),
        "cross duals": (worst_cross, 1e-8),
        "observable commutator": (worst_comm, 1e-8),
    })


def test_10_measurement_models():
    rng = _rng(10)
    worst_obs = worst_weights = worst_seq = 0.0
    for trial in range(TRIALS):
        aux = 2 + trial % 2
        m = smp.rand_model(rng, 2, aux)
        worst_obs = max(worst_obs, observable_distance(measured_observable_of_model(m), measured_observable(measured_instrument(m))))

        a = smp.rand_observable(rng, 2, 3, "y")
        spec = holevo_spec(a, {y: random_state(2 * aux, rng) for y in a.labels})
        w = holevo_model_weights(spec, smp.rand_observable(rng, aux, 2, "p"), 2)
        worst_weights = max(worst_weights, max(abs(sum(row.values()) - 1) for row in w.values()))

        m0, m1 = smp.rand_model(rng, 2, 2), smp.rand_model(rng, 4, 2)
        prod = measured_observable(measured_instrument(sequential_model_product(m0, m1)))
        ibar, ibar1 = channel(m0.interaction), channel(m1.interaction)
        for x in m0.probe.labels:
            for x1 in m1.probe.labels:
                nested = ibar.dual_apply(ibar1.dual_apply(kron(kron(np.eye(2), m0.probe[x]), m1.probe[x1])))
                worst_seq = max(worst_seq, float(np.abs(prod[pair_label(x, x1)] - nested).max()))
    _record("measurement models", {
        "measured observable": (worst_obs, 1e-8),
        "Holevo weights sum": (worst_weights, 1e-9),
        "sequential product nested dual": (worst_seq, 1e-7),
    })


def _selftest_bytes() -> bytes:
    out = io.StringIO()
    code = main(["selftest", "--seed", "42"], out, io.StringIO())
    assert code == 0, out.getvalue()
    return out.getvalue().encode()


def test_11_determinism_and_round_trip():
    first, second = _selftest_bytes(), _selftest_bytes()
    worst_rt = 0.0
    for path in sorted((ROOT / "scenarios").glob("*.json")):
        s = load_scenario(path)
        back = parse_scenario(serialize_scenario(s))
        worst_rt = max(worst_rt, max(object_distance(o, back.objects[n]) for n, o in s.objects.items()))
    _record("selftest determinism and scenario round trip", {
        "report bytes differing": (float(first != second), 0.5),
        "round-trip distance": (worst_rt, 1e-12),
    })
