"""Named instrument families and their closed-form composition laws.

A Holevo instrument measures a POVM ``A`` and prepares a fixed state per
outcome, ``rho -> tr(rho A_x) alpha_x``. A Kraus instrument has one Kraus
operator per outcome; a Lüders instrument is the Kraus instrument with
operators ``A_x^{1/2}``; a trivial instrument ignores its input.

The closed forms in this module are kept independent of the generic
combinators in :mod:`qinstrument.instruments` so each can serve as an oracle
for the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import BadWeights, DimMismatch, InvariantViolation, LabelMismatch, StateMismatch
from .linalg import DEFAULT_TOL, Tolerances, as_matrix, dagger, kron, max_abs, psd_sqrt
from .objects import BiObservable, Observable, State, pair_label
from .instruments import BiInstrument, Instrument, measured_observable
from .operations import (
    Operation,
    append_state_operation,
    choi,
    dual_apply,
    measure_prepare_operation,
    sum_operations,
    tensor,
)


@dataclass(frozen=True)
class HolevoSpec:
    """Observable ``A`` on the input space and one output state per outcome."""

    observable: Observable
    states: Mapping[str, State]

    def __post_init__(self):
        if set(self.states) != set(self.observable.labels):
            raise LabelMismatch("Holevo states must be indexed by the observable's labels")
        dims = {s.dim for s in self.states.values()}
        if len(dims) != 1:
            raise DimMismatch(f"Holevo output states live in different dimensions {sorted(dims)}")

    @property
    def labels(self) -> list[str]:
        return self.observable.labels

    @property
    def dim_in(self) -> int:
        return self.observable.dim

    @property
    def dim_out(self) -> int:
        return next(iter(self.states.values())).dim


@dataclass(frozen=True)
class HolevoBiSpec:
    """Holevo bi-instrument ``(x, y) -> tr(rho A_xy) alpha_xy``.

    A state may be ``None`` where the effect vanishes; that grid entry is
    the zero operation.
    """

    observable: BiObservable
    states: Mapping[tuple[str, str], State | None]
    dim_out: int

    def __post_init__(self):
        if set(self.states) != set(self.observable.grid):
            raise LabelMismatch("Holevo bi-states must cover the bi-observable grid")

    def marginal_spec(self, which: int, tol: Tolerances = DEFAULT_TOL) -> HolevoSpec:
        """Marginal as a Holevo spec; the states must not depend on the summed index."""
        obs = self.observable.marginal(which, tol)
        keep, other = (self.observable.labels1, self.observable.labels2)
        if which == 2:
            keep, other = other, keep
        states = {}
        for k in keep:
            cands = [self.states[(k, o) if which == 1 else (o, k)] for o in other]
            cands = [s for s in cands if s is not None]
            if not cands:
                states[k] = State(np.eye(self.dim_out) / self.dim_out, tol)
                continue
            for s in cands[1:]:
                if max_abs(s.mat - cands[0].mat) > tol.eq_tol:
                    raise StateMismatch(f"states in line {k!r} differ; marginal is not Holevo in this form")
            states[k] = cands[0]
        return HolevoSpec(obs, states)


def _as_state(s, tol: Tolerances) -> State:
    return s if isinstance(s, State) else State(s, tol)


def holevo_spec(observable: Observable, states: Mapping[str, object], tol: Tolerances = DEFAULT_TOL) -> HolevoSpec:
    return HolevoSpec(observable, {x: _as_state(s, tol) for x, s in states.items()})


def holevo(spec: HolevoSpec, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    ops = {x: measure_prepare_operation(spec.observable[x], spec.states[x].mat, tol) for x in spec.labels}
    return Instrument(ops, tol)


def holevo_bi(spec: HolevoBiSpec, tol: Tolerances = DEFAULT_TOL) -> BiInstrument:
    c = spec.observable
    grid = {}
    for key in c.grid:
        s = spec.states[key]
        if s is None:
            grid[key] = Operation.zero(c.dim, spec.dim_out)
        else:
            grid[key] = measure_prepare_operation(c.grid[key], s.mat, tol)
    return BiInstrument(c.labels1, c.labels2, grid, tol)


@dataclass(frozen=True)
class KrausSpec:
    operators: Mapping[str, np.ndarray]

    def __post_init__(self):
        ks = list(self.operators.values())
        if not ks:
            raise InvariantViolation("kraus_spec.nonempty", 1.0)
        din = ks[0].shape[1]
        res = max_abs(sum(dagger(k) @ k for k in ks) - np.eye(din))
        if res > DEFAULT_TOL.eq_tol:
            raise InvariantViolation("kraus_spec.channel", res)


def kraus_instrument(spec: KrausSpec | Mapping[str, object], tol: Tolerances = DEFAULT_TOL) -> Instrument:
    ops = spec.operators if isinstance(spec, KrausSpec) else spec
    return Instrument({x: Operation([as_matrix(k)], tol) for x, k in ops.items()}, tol)


def lueders(a: Observable, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Kraus instrument with operators ``A_x^{1/2}``."""
    return Instrument({x: Operation([psd_sqrt(e, tol)], tol) for x, e in a.effects.items()}, tol)


def trivial(betas: Mapping[str, object], dim_in: int, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Constant-output instrument ``rho -> beta_y``.

    Realised as Holevo with ``A_y = tr(beta_y) I`` and
    ``alpha_y = beta_y / tr(beta_y)``; a zero ``beta_y`` gives the zero
    operation.
    """
    mats = {y: as_matrix(b) for y, b in betas.items()}
    total = sum(mats.values())
    State(total, tol)
    ops = {}
    for y, b in mats.items():
        t = np.trace(b).real
        if t <= tol.trace_tol:
            ops[y] = Operation.zero(dim_in, b.shape[0])
        else:
            ops[y] = measure_prepare_operation(t * np.eye(dim_in), b / t, tol)
    return Instrument(ops, tol)


# -- closed-form compositions ---------------------------------------------------------


def holevo_compose_closed_form(h1: HolevoSpec, h2: HolevoSpec, tol: Tolerances = DEFAULT_TOL) -> HolevoBiSpec:
    """Holevo ``(A, alpha)`` then Holevo ``(B, beta)`` is Holevo ``(C, beta)`` with ``C_xy = tr(alpha_x B_y) A_x``."""
    if h1.dim_out != h2.dim_in:
        raise DimMismatch(f"first Holevo outputs C^{h1.dim_out}, second expects C^{h2.dim_in}")
    A, B = h1.observable, h2.observable
    grid = {(x, y): np.trace(h1.states[x].mat @ B[y]).real * A[x] for x in A.labels for y in B.labels}
    c = BiObservable(A.labels, B.labels, grid, tol)
    states = {(x, y): h2.states[y] for x in A.labels for y in B.labels}
    return HolevoBiSpec(c, states, h2.dim_out)


def kraus_compose_closed_form(k1: KrausSpec, k2: KrausSpec) -> KrausSpec:
    """Kraus then Kraus is Kraus with ``L_xy = J_y K_x``, labelled ``pair_label(x, y)``."""
    ops = {}
    for x, kx in k1.operators.items():
        for y, jy in k2.operators.items():
            kx, jy = as_matrix(kx), as_matrix(jy)
            if jy.shape[1] != kx.shape[0]:
                raise DimMismatch(f"Kraus operator {x!r} outputs C^{kx.shape[0]}, {y!r} expects C^{jy.shape[1]}")
            ops[pair_label(x, y)] = jy @ kx
    return KrausSpec(ops)


def arbitrary_then_holevo(k: Instrument, h: HolevoSpec, tol: Tolerances = DEFAULT_TOL) -> HolevoBiSpec:
    """Any instrument then Holevo ``(A, alpha)`` is Holevo with ``B_xy = K_x^*(A_y)``."""
    if k.dim_out != h.dim_in:
        raise DimMismatch(f"instrument outputs C^{k.dim_out}, Holevo expects C^{h.dim_in}")
    A = h.observable
    grid = {(x, y): dual_apply(k[x], A[y]) for x in k.labels for y in A.labels}
    b = BiObservable(k.labels, A.labels, grid, tol)
    return HolevoBiSpec(b, {(x, y): h.states[y] for x in k.labels for y in A.labels}, h.dim_out)


def holevo_then_arbitrary(h: HolevoSpec, k: Instrument, tol: Tolerances = DEFAULT_TOL) -> HolevoBiSpec:
    """Holevo ``(A, alpha)`` then any instrument is Holevo ``(B, beta)``.

    ``B_xy = tr[K_y(alpha_x)] A_x`` and ``beta_xy = K_y(alpha_x) / tr[K_y(alpha_x)]``;
    ``beta_xy`` is ``None`` where ``K_y(alpha_x)`` vanishes.
    """
    if h.dim_out != k.dim_in:
        raise DimMismatch(f"Holevo outputs C^{h.dim_out}, instrument expects C^{k.dim_in}")
    A = h.observable
    grid, states = {}, {}
    for x in A.labels:
        for y in k.labels:
            out = k[y].apply(h.states[x].mat)
            t = np.trace(out).real
            if t <= tol.trace_tol:
                grid[x, y] = np.zeros_like(A[x])
                states[x, y] = None
            else:
                grid[x, y] = t * A[x]
                states[x, y] = State(out / t, tol)
    return HolevoBiSpec(BiObservable(A.labels, k.labels, grid, tol), states, k.dim_out)


def convex_holevo(specs: Sequence[HolevoSpec], weights: Sequence[float], tol: Tolerances = DEFAULT_TOL) -> HolevoSpec:
    """Mixture of Holevo instruments sharing their output states."""
    _check_weights(weights, len(specs), tol)
    first = specs[0]
    for s in specs[1:]:
        if set(s.labels) != set(first.labels):
            raise LabelMismatch("mixed Holevo specs must share labels")
        for x in first.labels:
            d = max_abs(s.states[x].mat - first.states[x].mat)
            if d > tol.eq_tol:
                raise StateMismatch(f"output states for {x!r} differ by {d:.3e}")
    obs = Observable({x: sum(w * s.observable[x] for s, w in zip(specs, weights)) for x in first.labels}, tol)
    return HolevoSpec(obs, dict(first.states))


def mixed_holevo_states(specs: Sequence[HolevoSpec], weights: Sequence[float], tol: Tolerances = DEFAULT_TOL) -> dict[str, np.ndarray | None]:
    """Trace-weighted average of output states.

    If a mixture of Holevo instruments with different states is itself
    Holevo, its state for outcome ``x`` must be
    ``sum_i w_i tr(A_ix) alpha_ix / sum_i w_i tr(A_ix)``. Outcomes where the
    denominator vanishes map to ``None``.
    """
    _check_weights(weights, len(specs), tol)
    out = {}
    for x in specs[0].labels:
        num = sum(w * np.trace(s.observable[x]).real * s.states[x].mat for s, w in zip(specs, weights))
        den = sum(w * np.trace(s.observable[x]).real for s, w in zip(specs, weights))
        out[x] = None if den <= tol.trace_tol else num / den
    return out


def _check_weights(weights, n: int, tol: Tolerances):
    w = np.asarray(weights, dtype=float)
    if len(w) != n or n == 0 or np.any(w < -tol.trace_tol) or abs(w.sum() - 1) > tol.trace_tol:
        raise BadWeights(f"weights {list(w)} are not a probability vector over {n} items")


# -- structure detection --------------------------------------------------------------


def detect_holevo(i: Instrument, tol: Tolerances = DEFAULT_TOL) -> HolevoSpec | None:
    """Return ``(A, alpha)`` if ``i`` acts as ``rho -> tr(rho A_x) alpha_x``, else ``None``.

    A Holevo operation has Choi matrix ``A_x^T (x) alpha_x``, so the test
    is a single entrywise comparison per outcome. Outcomes with vanishing
    ``A_x`` accept any state; the maximally mixed one is reported.
    """
    a = measured_observable(i, tol)
    n, m = i.dim_in, i.dim_out
    states = {}
    for x, op in i.ops.items():
        if max_abs(a[x]) <= tol.eq_tol:
            states[x] = State(np.eye(m) / m, tol)
            continue
        out = op.apply(np.eye(n) / n)
        alpha = out / np.trace(out).real
        if max_abs(choi(op) - kron(a[x].T, alpha)) > tol.eq_tol:
            return None
        states[x] = State((alpha + dagger(alpha)) / 2, tol)
    return HolevoSpec(a, states)


def choi_spectra(i: Instrument) -> dict[str, np.ndarray]:
    """Choi eigenvalues per outcome, descending."""
    return {x: np.linalg.eigvalsh(choi(op))[::-1] for x, op in i.ops.items()}


def detect_kraus(i: Instrument, tol: Tolerances = DEFAULT_TOL) -> KrausSpec | None:
    """Return one Kraus operator per outcome if every Choi matrix has rank <= 1."""
    ops = {}
    for x, op in i.ops.items():
        c = choi(op)
        w, v = np.linalg.eigh((c + dagger(c)) / 2)
        if len(w) > 1 and w[-2] > tol.psd_tol:
            return None
        top = max(w[-1], 0.0)
        ops[x] = np.sqrt(top) * v[:, -1].reshape(i.dim_in, i.dim_out).T
    return KrausSpec(ops)


# -- convex tensor product -------------------------------------------------------------


def convex_tensor_product(
    i: Instrument,
    j: Instrument,
    alphas: Mapping[str, object],
    betas: Mapping[str, object],
    lambdas: Mapping[str, float],
    mus: Mapping[str, float],
    tol: Tolerances = DEFAULT_TOL,
) -> BiInstrument:
    """Joint-style bi-instrument ``K_xy = lambda_y I_x (x) beta_y + mu_x alpha_x (x) J_y``.

    ``i`` and ``j`` share the input space; outputs land in ``H1 (x) H2``.
    ``lambdas`` is indexed by ``j``'s labels, ``mus`` and ``alphas`` by
    ``i``'s labels.
    """
    if i.dim_in != j.dim_in:
        raise DimMismatch("both instruments must share the input space")
    total = sum(lambdas.values()) + sum(mus.values())
    if any(v < 0 for v in [*lambdas.values(), *mus.values()]) or abs(total - 1) > tol.trace_tol:
        raise BadWeights(f"lambda and mu weights sum to {total}, expected 1")
    a = {x: _as_state(alphas[x], tol) for x in i.labels}
    b = {y: _as_state(betas[y], tol) for y in j.labels}
    grid = {}
    for x in i.labels:
        for y in j.labels:
            # C^n (x) C^1 is C^n, so tensoring with a preparation appends a state
            left = tensor(i[x], _preparation(b[y].mat, tol), tol)
            right = tensor(_preparation(a[x].mat, tol), j[y], tol)
            grid[x, y] = sum_operations([left.scaled(lambdas[y]), right.scaled(mus[x])], tol)
    return BiInstrument(i.labels, j.labels, grid, tol)


def _preparation(sigma: np.ndarray, tol: Tolerances) -> Operation:
    """Map ``C^1 -> C^d`` preparing ``sigma``."""
    return append_state_operation(1, sigma, tol)
