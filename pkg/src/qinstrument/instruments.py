"""Instruments, bi-instruments and their combinators.

An instrument is a labelled family of operations whose sum is a channel.
Composition order follows the convention used throughout the package:
``sequential_product(i, j)`` applies ``i`` first, so its ``(x, y)`` entry is
``rho -> J_y(I_x(rho))``.

Every combinator re-validates its result (channel condition within
``eq_tol``). Instrument equality is map-level: same label set and
operation-wise agreement on matrix units.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadFactorization,
    BadStochasticMatrix,
    BadWeights,
    DimMismatch,
    InstrumentDoesNotMeasureA,
    InvariantViolation,
    LabelMismatch,
    ZeroProbability,
)
from .linalg import DEFAULT_TOL, Tolerances, max_abs
from .objects import (
    BiObservable,
    Observable,
    State,
    _check_labels,
    _clamp_distribution,
    observable_distance,
    pair_label,
)
from .operations import (
    Operation,
    compose,
    dual_apply,
    op_distance,
    partial_trace_operation,
    sum_operations,
    tensor,
)


def _channel_check(ops: Iterable[Operation], dim_in: int, tol: Tolerances, what: str):
    total = np.zeros((dim_in, dim_in), dtype=np.complex128)
    for op in ops:
        total += op.normalizer()
    res = max_abs(total - np.eye(dim_in))
    if res > tol.eq_tol:
        raise InvariantViolation(f"{what}.channel", res)


class Instrument:
    """Finite family of operations ``C^dim_in -> C^dim_out`` summing to a channel."""

    __slots__ = ("dim_in", "dim_out", "ops")

    def __init__(self, ops: Mapping[str, Operation], tol: Tolerances = DEFAULT_TOL, *, check: bool = True):
        labels = _check_labels(ops.keys())
        values = list(ops.values())
        if not values:
            raise InvariantViolation("instrument.nonempty", 1.0)
        self.dim_in, self.dim_out = values[0].dim_in, values[0].dim_out
        for lab, op in zip(labels, values):
            if (op.dim_in, op.dim_out) != (self.dim_in, self.dim_out):
                raise DimMismatch(f"outcome {lab!r} maps {op.dim_in}->{op.dim_out}")
        self.ops: dict[str, Operation] = dict(zip(labels, values))
        if check:
            self.validate(tol)

    @classmethod
    def unchecked(cls, ops: Mapping[str, Operation]) -> Instrument:
        return cls(ops, check=False)

    @classmethod
    def from_kraus(cls, kraus: Mapping[str, Sequence], tol: Tolerances = DEFAULT_TOL) -> Instrument:
        return cls({x: Operation(ks, tol) for x, ks in kraus.items()}, tol)

    def validate(self, tol: Tolerances = DEFAULT_TOL) -> Instrument:
        for op in self.ops.values():
            op.validate(tol)
        _channel_check(self.ops.values(), self.dim_in, tol, "instrument")
        return self

    @property
    def labels(self) -> list[str]:
        return list(self.ops)

    def __getitem__(self, label: str) -> Operation:
        return self.ops[label]

    def __len__(self) -> int:
        return len(self.ops)

    def channel(self) -> Operation:
        return channel(self)

    def __repr__(self) -> str:
        return f"Instrument({self.dim_in}->{self.dim_out}, labels={self.labels})"


class BiInstrument:
    """Instrument whose outcome set is the grid ``labels1 x labels2``."""

    __slots__ = ("dim_in", "dim_out", "labels1", "labels2", "grid")

    def __init__(
        self,
        labels1: Iterable[str],
        labels2: Iterable[str],
        grid: Mapping[tuple[str, str], Operation],
        tol: Tolerances = DEFAULT_TOL,
        *,
        check: bool = True,
    ):
        self.labels1 = _check_labels(labels1)
        self.labels2 = _check_labels(labels2)
        if set(grid) != {(x, y) for x in self.labels1 for y in self.labels2}:
            raise LabelMismatch("bi-instrument grid must cover labels1 x labels2 exactly")
        self.grid = {(x, y): grid[x, y] for x in self.labels1 for y in self.labels2}
        first = next(iter(self.grid.values()))
        self.dim_in, self.dim_out = first.dim_in, first.dim_out
        for key, op in self.grid.items():
            if (op.dim_in, op.dim_out) != (self.dim_in, self.dim_out):
                raise DimMismatch(f"grid entry {key!r} maps {op.dim_in}->{op.dim_out}")
        if check:
            self.validate(tol)

    @classmethod
    def unchecked(cls, labels1, labels2, grid) -> BiInstrument:
        return cls(labels1, labels2, grid, check=False)

    def validate(self, tol: Tolerances = DEFAULT_TOL) -> BiInstrument:
        for op in self.grid.values():
            op.validate(tol)
        _channel_check(self.grid.values(), self.dim_in, tol, "bi_instrument")
        return self

    def __getitem__(self, key: tuple[str, str]) -> Operation:
        return self.grid[key]

    def flatten(self, tol: Tolerances = DEFAULT_TOL) -> Instrument:
        """Single-index instrument with labels ``pair_label(x, y)``."""
        return Instrument({pair_label(x, y): op for (x, y), op in self.grid.items()}, tol)

    def transposed(self) -> BiInstrument:
        return BiInstrument.unchecked(self.labels2, self.labels1, {(y, x): op for (x, y), op in self.grid.items()})

    def marginal(self, which: int, tol: Tolerances = DEFAULT_TOL) -> Instrument:
        return bi_marginal_instrument(self, which, tol)

    def channel(self) -> Operation:
        return sum_operations(list(self.grid.values()))

    def measured_biobservable(self, tol: Tolerances = DEFAULT_TOL) -> BiObservable:
        eye = np.eye(self.dim_out)
        return BiObservable(
            self.labels1, self.labels2, {key: dual_apply(op, eye) for key, op in self.grid.items()}, tol
        )

    def __repr__(self) -> str:
        return f"BiInstrument({self.dim_in}->{self.dim_out}, {len(self.labels1)}x{len(self.labels2)})"


# -- basic readouts ------------------------------------------------------------


def channel(i: Instrument) -> Operation:
    """The summed channel ``I-bar = sum_x I_x``."""
    return sum_operations(list(i.ops.values()))


def channel_instrument(op: Operation, label: str = "0", tol: Tolerances = DEFAULT_TOL) -> Instrument:
    return Instrument({label: op}, tol)


def born_distribution(i: Instrument, rho: State, tol: Tolerances = DEFAULT_TOL) -> dict[str, float]:
    if rho.dim != i.dim_in:
        raise DimMismatch(f"state on C^{rho.dim} for instrument on C^{i.dim_in}")
    raw = {x: float(np.trace(op.apply(rho.mat)).real) for x, op in i.ops.items()}
    return _clamp_distribution(raw, tol)


def update_state(i: Instrument, x: str, rho: State, tol: Tolerances = DEFAULT_TOL) -> State:
    """Post-measurement state ``I_x(rho) / tr I_x(rho)``."""
    if rho.dim != i.dim_in:
        raise DimMismatch(f"state on C^{rho.dim} for instrument on C^{i.dim_in}")
    out = i[x].apply(rho.mat)
    p = np.trace(out).real
    if p <= tol.trace_tol:
        raise ZeroProbability(f"outcome {x!r} has probability {p:.3e}")
    return State(out / p, tol)


def measured_observable(i: Instrument, tol: Tolerances = DEFAULT_TOL) -> Observable:
    eye = np.eye(i.dim_out)
    return Observable({x: dual_apply(op, eye) for x, op in i.ops.items()}, tol)


def instrument_distance(a: Instrument, b: Instrument) -> float:
    """Max map-level distance over outcomes; label sets must agree."""
    if set(a.labels) != set(b.labels):
        raise LabelMismatch(f"label sets differ: {a.labels} vs {b.labels}")
    return max(op_distance(a[x], b[x]) for x in a.labels)


def bi_instrument_distance(a: BiInstrument, b: BiInstrument) -> float:
    if set(a.grid) != set(b.grid):
        raise LabelMismatch("bi-instrument grids have different label sets")
    return max(op_distance(a.grid[k], b.grid[k]) for k in a.grid)


# -- composition -------------------------------------------------------------------


def _chain_check(i: Instrument, j: Instrument):
    if i.dim_out != j.dim_in:
        raise DimMismatch(f"first instrument outputs C^{i.dim_out}, second expects C^{j.dim_in}")


def sequential_product(i: Instrument, j: Instrument, tol: Tolerances = DEFAULT_TOL) -> BiInstrument:
    """``(x, y) -> compose(I_x, J_y)``: measure ``i`` then ``j``."""
    _chain_check(i, j)
    grid = {(x, y): compose(i[x], j[y], tol) for x in i.labels for y in j.labels}
    return BiInstrument(i.labels, j.labels, grid, tol)


def conditioned(j: Instrument, i: Instrument, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """``j`` given ``i``: ``y -> J_y o I-bar``."""
    _chain_check(i, j)
    ibar = channel(i)
    return Instrument({y: compose(ibar, j[y], tol) for y in j.labels}, tol)


def then_instrument(i: Instrument, j: Instrument, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """``i`` then ``j``: ``x -> J-bar o I_x``."""
    _chain_check(i, j)
    jbar = channel(j)
    return Instrument({x: compose(i[x], jbar, tol) for x in i.labels}, tol)


def bi_marginal_instrument(k: BiInstrument, which: int, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    if which == 1:
        ops = {x: sum_operations([k.grid[x, y] for y in k.labels2], tol) for x in k.labels1}
    elif which == 2:
        ops = {y: sum_operations([k.grid[x, y] for x in k.labels1], tol) for y in k.labels2}
    else:
        raise ValueError(f"which must be 1 or 2, got {which!r}")
    return Instrument(ops, tol)


def _factor_check(dim_out: int, n1: int, n2: int):
    if n1 < 1 or n2 < 1 or n1 * n2 != dim_out:
        raise BadFactorization(f"output dimension {dim_out} is not {n1} x {n2}")


def _compose_raw(a: Operation, b: Operation) -> Operation:
    return Operation.unchecked([kb @ ka for ka in a.kraus for kb in b.kraus])


def reduced_instrument(k: Instrument, n1: int, n2: int, which: int, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Compose every outcome with the partial trace keeping factor ``which`` of ``H1 (x) H2``."""
    _factor_check(k.dim_out, n1, n2)
    tr = partial_trace_operation(n1, n2, which)
    return Instrument({x: compose(op, tr, tol) for x, op in k.ops.items()}, tol)


def reduced_marginal_ops(k: BiInstrument, n1: int, n2: int, marginal: int, factor: int) -> dict[str, Operation]:
    """Unvalidated reduced marginal; used by verifiers that must accept broken input."""
    _factor_check(k.dim_out, n1, n2)
    tr = partial_trace_operation(n1, n2, factor)
    if marginal == 1:
        lines = {x: [k.grid[x, y] for y in k.labels2] for x in k.labels1}
    elif marginal == 2:
        lines = {y: [k.grid[x, y] for x in k.labels1] for y in k.labels2}
    else:
        raise ValueError(f"marginal must be 1 or 2, got {marginal!r}")
    return {
        lab: Operation.unchecked([kk for op in ops for kk in _compose_raw(op, tr).kraus]) for lab, ops in lines.items()
    }


def reduced_marginal(k: BiInstrument, n1: int, n2: int, marginal: int, factor: int, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Marginal over one outcome index followed by the partial trace keeping ``factor``.

    ``marginal=1`` keeps the first label (sums over the second), ``marginal=2``
    the reverse. ``(1, 1)`` and ``(2, 2)`` are the coexistence marginals;
    ``(2, 1)`` and ``(1, 2)`` are the mixed ones.
    """
    return Instrument(reduced_marginal_ops(k, n1, n2, marginal, factor), tol)


def mixed_marginals(k: BiInstrument, n1: int, n2: int, tol: Tolerances = DEFAULT_TOL):
    """Return ``(K11, K22, K21, K12)``; ``Kab`` is marginal ``a`` reduced onto factor ``b``."""
    return tuple(reduced_marginal(k, n1, n2, a, b, tol) for a, b in ((1, 1), (2, 2), (2, 1), (1, 2)))


# -- mixing and relabelling ---------------------------------------------------------


def convex_combination(
    instruments: Sequence[Instrument], weights: Sequence[float], tol: Tolerances = DEFAULT_TOL
) -> Instrument:
    """Outcome-wise mixture; Kraus operators of summand ``i`` are scaled by ``sqrt(w_i)``."""
    if len(instruments) != len(weights) or not instruments:
        raise BadWeights("need one weight per instrument")
    w = np.asarray(weights, dtype=float)
    if np.any(w < -tol.trace_tol) or abs(w.sum() - 1) > tol.trace_tol:
        raise BadWeights(f"weights {list(w)} are not a probability vector")
    first = instruments[0]
    for inst in instruments[1:]:
        if set(inst.labels) != set(first.labels):
            raise LabelMismatch("mixed instruments must share one label set")
        if (inst.dim_in, inst.dim_out) != (first.dim_in, first.dim_out):
            raise DimMismatch("mixed instruments must act between the same spaces")
    ops = {x: _mix([inst[x] for inst in instruments], w, first.dim_in, first.dim_out, tol) for x in first.labels}
    return Instrument(ops, tol)


def stochastic_rows(labels: Sequence[str], lam, out_labels=None, tol: Tolerances = DEFAULT_TOL):
    """Normalise ``lam`` to ``(out_labels, {x: {z: weight}})`` and check it is row-stochastic.

    ``lam`` is either an array whose rows follow ``labels`` or a nested
    mapping ``{x: {z: weight}}``.
    """
    labels = list(labels)
    if isinstance(lam, Mapping):
        rows = {str(x): {str(z): float(v) for z, v in row.items()} for x, row in lam.items()}
        if out_labels is None:
            out_labels = []
            for row in rows.values():
                out_labels += [z for z in row if z not in out_labels]
        if set(rows) != set(labels):
            raise BadStochasticMatrix("stochastic matrix rows must be indexed by the instrument's labels")
    else:
        arr = np.asarray(lam, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != len(labels):
            raise BadStochasticMatrix(f"matrix of shape {arr.shape} for {len(labels)} outcomes")
        if out_labels is None:
            out_labels = [str(z) for z in range(arr.shape[1])]
        if len(out_labels) != arr.shape[1]:
            raise BadStochasticMatrix("one output label per column required")
        rows = {x: dict(zip(out_labels, map(float, arr[r]))) for r, x in enumerate(labels)}
    out_labels = _check_labels(out_labels)
    for x, row in rows.items():
        vals = [row.get(z, 0.0) for z in out_labels]
        if any(v < -tol.trace_tol or v > 1 + tol.trace_tol for v in vals) or abs(sum(vals) - 1) > tol.trace_tol:
            raise BadStochasticMatrix(f"row {x!r} is not a probability vector: {vals}")
    return out_labels, rows


def _mix(ops: Sequence[Operation], weights: Sequence[float], dim_in: int, dim_out: int, tol: Tolerances) -> Operation:
    parts = [op.scaled(w) for op, w in zip(ops, weights) if w > 0]
    return sum_operations(parts, tol) if parts else Operation.zero(dim_in, dim_out)


def post_process(i: Instrument, lam, out_labels=None, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Classical relabelling ``P_z = sum_x lam[x, z] I_x``; ``lam`` as in :func:`stochastic_rows`."""
    out_labels, rows = stochastic_rows(i.labels, lam, out_labels, tol)
    ops = {
        z: _mix([i[x] for x in i.labels], [rows[x].get(z, 0.0) for x in i.labels], i.dim_in, i.dim_out, tol)
        for z in out_labels
    }
    return Instrument(ops, tol)


def tensor_instrument(i: Instrument, j: Instrument, tol: Tolerances = DEFAULT_TOL) -> BiInstrument:
    grid = {(x, y): tensor(i[x], j[y], tol) for x in i.labels for y in j.labels}
    return BiInstrument(i.labels, j.labels, grid, tol)


# -- observables conditioned on instruments --------------------------------------------


def conditioned_observable(a: Observable, i: Instrument, tol: Tolerances = DEFAULT_TOL) -> Observable:
    """``(A | I)_x = I-bar^*(A_x)``."""
    if a.dim != i.dim_out:
        raise DimMismatch(f"observable on C^{a.dim}, instrument outputs C^{i.dim_out}")
    ibar = channel(i)
    return Observable({x: dual_apply(ibar, e) for x, e in a.effects.items()}, tol)


def conditioned_biobservable(b: Observable, i: Instrument, tol: Tolerances = DEFAULT_TOL) -> BiObservable:
    """``(B | I)_{xy} = I_x^*(B_y)``."""
    if b.dim != i.dim_out:
        raise DimMismatch(f"observable on C^{b.dim}, instrument outputs C^{i.dim_out}")
    grid = {(x, y): dual_apply(i[x], b[y]) for x in i.labels for y in b.labels}
    return BiObservable(i.labels, b.labels, grid, tol)


def obs_sequential_product(a: Observable, i: Instrument, b: Observable, tol: Tolerances = DEFAULT_TOL) -> Observable:
    """``A`` then ``B`` through an instrument ``i`` that measures ``A``."""
    if b.dim != i.dim_out:
        raise DimMismatch(f"observable on C^{b.dim}, instrument outputs C^{i.dim_out}")
    measured = measured_observable(i, tol)
    if set(measured.labels) != set(a.labels) or observable_distance(measured, a) > tol.eq_tol:
        raise InstrumentDoesNotMeasureA("instrument's measured observable differs from the first observable")
    return Observable({y: sum(dual_apply(i[x], b[y]) for x in i.labels) for y in b.labels}, tol)
