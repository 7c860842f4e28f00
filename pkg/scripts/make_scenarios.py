"""Regenerate the JSON files in ``scenarios/``.

Usage: python scripts/make_scenarios.py [outdir]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from qinstrument.scenario import encode_matrix

S = 1 / np.sqrt(2)
KET0 = np.array([[1.0], [0.0]])
KET1 = np.array([[0.0], [1.0]])
PLUS = np.array([[S], [S]])
MINUS = np.array([[S], [-S]])


def proj(v):
    return v @ v.conj().T


def mat(m):
    return encode_matrix(np.asarray(m, dtype=complex))


def observable(effects: dict) -> dict:
    return {"type": "observable", "effects": [{"label": x, "matrix": mat(m)} for x, m in effects.items()]}


def ref(name: str) -> dict:
    return {"ref": name}


def derived(fn: str, *args, **kwargs) -> dict:
    out = {"type": "derived", "fn": fn, "args": list(args)}
    if kwargs:
        out["kwargs"] = kwargs
    return out


def lueders_z_plus() -> dict:
    return {
        "objects": {
            "Z": observable({"0": proj(KET0), "1": proj(KET1)}),
            "plus": {"type": "state", "matrix": mat(proj(PLUS))},
            "L": derived("lueders", ref("Z")),
        },
        "tasks": [
            {"name": "lueders_z_on_plus", "kind": "distribution", "instrument": "L", "state": "plus", "expect": {"0": 0.5, "1": 0.5}},
            {"name": "lueders_of_rank_one_projectors_is_holevo", "kind": "detect_holevo", "instrument": "L", "expect": True},
            {"name": "lueders_is_kraus", "kind": "detect_kraus", "instrument": "L", "expect": True},
        ],
    }


def trivial_joint_identities() -> dict:
    e = np.array([[0.7, 0.2], [0.2, 0.3]])
    f = np.array([[0.5, 0.5j], [-0.5j, 0.5]])
    beta_a = np.array([[0.3, 0.1], [0.1, 0.1]])
    beta_b = np.array([[0.2, 0.0], [0.0, 0.4]])
    return {
        "objects": {
            "E": observable({"e": e, "not_e": np.eye(2) - e}),
            "F": observable({"f": f, "not_f": np.eye(2) - f}),
            "beta_a": {"type": "matrix", "matrix": mat(beta_a)},
            "beta_b": {"type": "matrix", "matrix": mat(beta_b)},
            "I": derived("lueders", ref("E")),
            "upstream": derived("lueders", ref("F")),
            "J": derived("trivial", {"map": {"a": ref("beta_a"), "b": ref("beta_b")}}, 2),
            "K": derived("trivial_joint", ref("I"), {"map": {"a": ref("beta_a"), "b": ref("beta_b")}}),
            "J_given_upstream": derived("conditioned", ref("J"), ref("upstream")),
            "J_observable": derived("measured_observable", ref("J")),
            "identity_observable": observable({"a": 0.4 * np.eye(2), "b": 0.6 * np.eye(2)}),
            "K_mixed_21": derived("reduced_marginal", ref("K"), 2, 2, 2, 1),
            "I_bar": derived("channel", ref("I")),
            "I_channel": derived("channel_instrument", ref("I_bar")),
            "scaled_channel": derived("post_process", ref("I_channel"), [[0.4, 0.6]], ["a", "b"]),
        },
        "tasks": [
            {"name": "trivial_joint_certifies_coexistence", "kind": "verify_joint_instrument", "joint": "K", "first": "I", "second": "J"},
            {"name": "trivial_unchanged_by_conditioning", "kind": "equal", "lhs": "J_given_upstream", "rhs": "J"},
            {"name": "trivial_measures_identity_observable", "kind": "equal", "lhs": "J_observable", "rhs": "identity_observable"},
            {"name": "mixed_marginal_is_scaled_channel", "kind": "equal", "lhs": "K_mixed_21", "rhs": "scaled_channel"},
        ],
    }


def mixed_holevo_rejected() -> dict:
    # both Holevo instruments measure the same projective observable but
    # prepare different states for outcome x
    phi, perp = proj(KET0), proj(KET1)
    return {
        "objects": {
            "A": observable({"x": phi, "y": perp}),
            "B": observable({"x": perp, "y": phi}),
            "alpha_x": {"type": "state", "matrix": mat(proj(KET0))},
            "alpha_y": {"type": "state", "matrix": mat(proj(KET1))},
            "beta_x": {"type": "state", "matrix": mat(proj(PLUS))},
            "beta_y": {"type": "state", "matrix": mat(proj(MINUS))},
            "HA": derived("holevo", ref("A"), {"map": {"x": ref("alpha_x"), "y": ref("alpha_y")}}),
            "HB": derived("holevo", ref("B"), {"map": {"x": ref("beta_x"), "y": ref("beta_y")}}),
            "mixture": derived("convex_combination", [ref("HA"), ref("HB")], [0.5, 0.5]),
        },
        "tasks": [
            {"name": "first_component_is_holevo", "kind": "detect_holevo", "instrument": "HA", "expect": True},
            {"name": "second_component_is_holevo", "kind": "detect_holevo", "instrument": "HB", "expect": True},
            {"name": "equal_mixture_is_not_holevo", "kind": "detect_holevo", "instrument": "mixture", "expect": False},
        ],
    }


def mixed_kraus_rejected() -> dict:
    p0, p1 = proj(KET0), proj(KET1)
    return {
        "objects": {
            "K": {"type": "instrument", "dim_in": 2, "dim_out": 2, "outcomes": [{"label": "x", "kraus": [mat(p0)]}, {"label": "y", "kraus": [mat(p1)]}]},
            "J": {"type": "instrument", "dim_in": 2, "dim_out": 2, "outcomes": [{"label": "x", "kraus": [mat(p1)]}, {"label": "y", "kraus": [mat(p0)]}]},
            "mixture": derived("convex_combination", [ref("K"), ref("J")], [0.5, 0.5]),
        },
        "tasks": [
            {"name": "first_component_is_kraus", "kind": "detect_kraus", "instrument": "K", "expect": True},
            {"name": "second_component_is_kraus", "kind": "detect_kraus", "instrument": "J", "expect": True},
            {"name": "equal_mixture_is_not_kraus", "kind": "detect_kraus", "instrument": "mixture", "expect": False},
        ],
    }


def ancilla_probe_model() -> dict:
    # interaction appends |0> on the auxiliary qubit; probing the auxiliary
    # with Z then always reports "0"
    append0 = np.kron(np.eye(2), KET0)
    return {
        "objects": {
            "append": {"type": "instrument", "dim_in": 2, "dim_out": 4, "outcomes": [{"label": "0", "kraus": [mat(append0)]}]},
            "Z": observable({"0": proj(KET0), "1": proj(KET1)}),
            "model": {"type": "model", "base_dim": 2, "aux_dim": 2, "interaction": "append", "probe": "Z"},
            "measured": derived("model_observable", ref("model")),
            "expected": observable({"0": np.eye(2), "1": np.zeros((2, 2))}),
            "measured_inst": derived("measured_instrument", ref("model")),
            "rho": {"type": "state", "matrix": mat([[0.75, 0.25], [0.25, 0.25]])},
        },
        "tasks": [
            {"name": "probe_of_fresh_ancilla_is_deterministic", "kind": "equal", "lhs": "measured", "rhs": "expected"},
            {"name": "measured_instrument_statistics", "kind": "distribution", "instrument": "measured_inst", "state": "rho", "expect": {"0": 1.0, "1": 0.0}},
        ],
    }


SCENARIOS = {
    "lueders_z_plus.json": lueders_z_plus,
    "trivial_joint_identities.json": trivial_joint_identities,
    "mixed_holevo_rejected.json": mixed_holevo_rejected,
    "mixed_kraus_rejected.json": mixed_kraus_rejected,
    "ancilla_probe_model.json": ancilla_probe_model,
}


def main(outdir: str = "scenarios"):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, build in SCENARIOS.items():
        doc = build()
        (out / name).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        print(f"wrote {out / name}")


if __name__ == "__main__":
    main(*sys.argv[1:])
