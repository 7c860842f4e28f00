"""States, effects, observables and bi-observables.

Observables are finite POVMs with string outcome labels kept in insertion
order. Bi-observables carry a dense grid over ``labels1 x labels2``.
Constructors validate against a :class:`~qinstrument.linalg.Tolerances`;
``unchecked`` skips validation for intermediate results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DimMismatch, InvariantViolation, LabelMismatch, NonCommuting
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    commutator,
    dagger,
    hermitian_residual,
    kron,
    max_abs,
    partial_trace,
)

PAIR_SEP = "⊗"


def _escape(label: str) -> str:
    return label.replace("\\", "\\\\").replace(PAIR_SEP, "\\" + PAIR_SEP)


def pair_label(x: str, y: str) -> str:
    """Flatten a label pair into ``"x⊗y"``; reversible via :func:`split_label`."""
    return _escape(x) + PAIR_SEP + _escape(y)


def split_label(label: str) -> tuple[str, str]:
    parts, cur, i = [], [], 0
    while i < len(label):
        c = label[i]
        if c == "\\" and i + 1 < len(label):
            cur.append(label[i + 1])
            i += 2
            continue
        if c == PAIR_SEP:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(c)
        i += 1
    parts.append("".join(cur))
    if len(parts) != 2:
        raise ValueError(f"{label!r} is not a flattened label pair")
    return parts[0], parts[1]


def _check_labels(labels: Iterable[str]) -> list[str]:
    labels = [str(x) for x in labels]
    if len(set(labels)) != len(labels):
        raise LabelMismatch(f"duplicate outcome labels in {labels}")
    return labels


def _check_square(m: np.ndarray, dim: int, what: str):
    if m.shape != (dim, dim):
        raise DimMismatch(f"{what} has shape {m.shape}, expected ({dim}, {dim})")


class State:
    """Density operator: Hermitian, PSD and unit trace."""

    __slots__ = ("mat",)

    def __init__(self, mat, tol: Tolerances = DEFAULT_TOL, *, check: bool = True):
        mat = as_matrix(mat)
        if mat.shape[0] != mat.shape[1]:
            raise DimMismatch(f"state matrix must be square, got {mat.shape}")
        self.mat = mat
        if check:
            self.validate(tol)

    @classmethod
    def unchecked(cls, mat) -> State:
        return cls(mat, check=False)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def validate(self, tol: Tolerances = DEFAULT_TOL) -> State:
        res = hermitian_residual(self.mat)
        if res > tol.hermitian_tol:
            raise InvariantViolation("state.hermitian", res)
        w = np.linalg.eigvalsh((self.mat + dagger(self.mat)) / 2)
        if w[0] < -tol.psd_tol:
            raise InvariantViolation("state.psd", -w[0])
        tr_err = abs(np.trace(self.mat) - 1)
        if tr_err > tol.trace_tol:
            raise InvariantViolation("state.unit_trace", tr_err)
        return self

    def __repr__(self) -> str:
        return f"State(dim={self.dim})"


class Effect:
    """Operator ``0 <= a <= I``."""

    __slots__ = ("mat",)

    def __init__(self, mat, tol: Tolerances = DEFAULT_TOL, *, check: bool = True):
        mat = as_matrix(mat)
        if mat.shape[0] != mat.shape[1]:
            raise DimMismatch(f"effect matrix must be square, got {mat.shape}")
        self.mat = mat
        if check:
            _validate_effect(mat, tol, "effect")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def complement(self) -> Effect:
        return Effect(np.eye(self.dim) - self.mat, check=False)

    def __repr__(self) -> str:
        return f"Effect(dim={self.dim})"


def complement(a: Effect) -> Effect:
    return a.complement()


def _validate_effect(m: np.ndarray, tol: Tolerances, where: str):
    res = hermitian_residual(m)
    if res > tol.hermitian_tol:
        raise InvariantViolation(f"{where}.hermitian", res)
    w = np.linalg.eigvalsh((m + dagger(m)) / 2)
    if w[0] < -tol.psd_tol:
        raise InvariantViolation(f"{where}.positive", -w[0])
    if w[-1] > 1 + tol.psd_tol:
        raise InvariantViolation(f"{where}.below_identity", w[-1] - 1)


def _effects_sum_residual(effects: Iterable[np.ndarray], dim: int) -> float:
    total = np.zeros((dim, dim), dtype=np.complex128)
    for e in effects:
        total += e
    return max_abs(total - np.eye(dim))


class Observable:
    """Finite POVM with ordered string labels."""

    __slots__ = ("dim", "effects")

    def __init__(self, effects: Mapping[str, object], tol: Tolerances = DEFAULT_TOL, *, check: bool = True):
        labels = _check_labels(effects.keys())
        mats = [as_matrix(getattr(e, "mat", e)) for e in effects.values()]
        if not mats:
            raise InvariantViolation("observable.nonempty", 1.0)
        self.dim = mats[0].shape[0]
        for lab, m in zip(labels, mats):
            _check_square(m, self.dim, f"effect {lab!r}")
        self.effects: dict[str, np.ndarray] = dict(zip(labels, mats))
        if check:
            self.validate(tol)

    @classmethod
    def unchecked(cls, effects: Mapping[str, object]) -> Observable:
        return cls(effects, check=False)

    @classmethod
    def from_list(cls, mats, labels=None, tol: Tolerances = DEFAULT_TOL) -> Observable:
        labels = [str(k) for k in range(len(mats))] if labels is None else _check_labels(labels)
        if len(labels) != len(mats):
            raise LabelMismatch(f"{len(labels)} labels for {len(mats)} effects")
        return cls(dict(zip(labels, mats)), tol)

    def validate(self, tol: Tolerances = DEFAULT_TOL) -> Observable:
        for lab, m in self.effects.items():
            _validate_effect(m, tol, f"observable[{lab!r}]")
        res = _effects_sum_residual(self.effects.values(), self.dim)
        if res > tol.eq_tol:
            raise InvariantViolation("observable.sum_to_identity", res)
        return self

    @property
    def labels(self) -> list[str]:
        return list(self.effects)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.effects[label]

    def __len__(self) -> int:
        return len(self.effects)

    def effect(self, label: str) -> Effect:
        return Effect(self.effects[label], check=False)

    def __repr__(self) -> str:
        return f"Observable(dim={self.dim}, labels={self.labels})"


class BiObservable:
    """Observable indexed by the full grid ``labels1 x labels2``."""

    __slots__ = ("dim", "labels1", "labels2", "grid")

    def __init__(
        self,
        labels1: Iterable[str],
        labels2: Iterable[str],
        grid: Mapping[tuple[str, str], object],
        tol: Tolerances = DEFAULT_TOL,
        *,
        check: bool = True,
    ):
        self.labels1 = _check_labels(labels1)
        self.labels2 = _check_labels(labels2)
        keys = {(x, y) for x in self.labels1 for y in self.labels2}
        if set(grid) != keys:
            raise LabelMismatch("bi-observable grid must cover labels1 x labels2 exactly")
        self.grid = {(x, y): as_matrix(getattr(grid[x, y], "mat", grid[x, y])) for x in self.labels1 for y in self.labels2}
        self.dim = next(iter(self.grid.values())).shape[0]
        for key, m in self.grid.items():
            _check_square(m, self.dim, f"grid entry {key!r}")
        if check:
            self.validate(tol)

    @classmethod
    def unchecked(cls, labels1, labels2, grid) -> BiObservable:
        return cls(labels1, labels2, grid, check=False)

    def validate(self, tol: Tolerances = DEFAULT_TOL) -> BiObservable:
        for key, m in self.grid.items():
            _validate_effect(m, tol, f"bi_observable[{key!r}]")
        res = _effects_sum_residual(self.grid.values(), self.dim)
        if res > tol.eq_tol:
            raise InvariantViolation("bi_observable.sum_to_identity", res)
        return self

    def __getitem__(self, key: tuple[str, str]) -> np.ndarray:
        return self.grid[key]

    def marginal(self, which: int, tol: Tolerances = DEFAULT_TOL) -> Observable:
        return bi_marginal(self, which, tol)

    def flatten(self, tol: Tolerances = DEFAULT_TOL) -> Observable:
        """Single-index observable with labels ``pair_label(x, y)``."""
        return Observable({pair_label(x, y): m for (x, y), m in self.grid.items()}, tol)

    def __repr__(self) -> str:
        return f"BiObservable(dim={self.dim}, labels1={self.labels1}, labels2={self.labels2})"


def rho_distribution(a: Observable, rho: State, tol: Tolerances = DEFAULT_TOL) -> dict[str, float]:
    """Born probabilities ``tr(rho A_x)``, clamped to ``[0, 1]`` after the tolerance check."""
    if a.dim != rho.dim:
        raise DimMismatch(f"observable on C^{a.dim} but state on C^{rho.dim}")
    raw = {x: float(np.trace(rho.mat @ e).real) for x, e in a.effects.items()}
    return _clamp_distribution(raw, tol)


def _clamp_distribution(raw: dict[str, float], tol: Tolerances) -> dict[str, float]:
    for x, p in raw.items():
        if p < -tol.psd_tol or p > 1 + tol.psd_tol:
            raise InvariantViolation("distribution.range", max(-p, p - 1), f"outcome {x!r}")
    total = sum(raw.values())
    if abs(total - 1) > tol.trace_tol:
        raise InvariantViolation("distribution.normalised", abs(total - 1))
    return {x: min(max(p, 0.0), 1.0) for x, p in raw.items()}


def bi_marginal(c: BiObservable, which: int, tol: Tolerances = DEFAULT_TOL) -> Observable:
    if which == 1:
        return Observable({x: sum(c.grid[x, y] for y in c.labels2) for x in c.labels1}, tol)
    if which == 2:
        return Observable({y: sum(c.grid[x, y] for x in c.labels1) for y in c.labels2}, tol)
    raise ValueError(f"which must be 1 or 2, got {which!r}")


def tensor_biobservable(a: Observable, b: Observable, tol: Tolerances = DEFAULT_TOL) -> BiObservable:
    """``(A (x) B)_{xy} = A_x (x) B_y`` on ``H1 (x) H2``."""
    grid = {(x, y): kron(a[x], b[y]) for x in a.labels for y in b.labels}
    return BiObservable(a.labels, b.labels, grid, tol)


def reduced_effect(m: np.ndarray, dim1: int, dim2: int, keep: int) -> np.ndarray:
    """Partial trace of an effect on a product space, normalised by the traced dimension."""
    return partial_trace(m, dim1, dim2, keep) / (dim2 if keep == 1 else dim1)


def marginal_residuals(c: BiObservable, a: Observable, b: Observable) -> tuple[float, float]:
    if set(c.labels1) != set(a.labels):
        raise LabelMismatch(f"grid rows {c.labels1} do not match {a.labels}")
    if set(c.labels2) != set(b.labels):
        raise LabelMismatch(f"grid columns {c.labels2} do not match {b.labels}")
    if c.dim != a.dim or c.dim != b.dim:
        raise DimMismatch("joint and marginals act on different spaces")
    r1 = max(max_abs(sum(c.grid[x, y] for y in c.labels2) - a[x]) for x in c.labels1)
    r2 = max(max_abs(sum(c.grid[x, y] for x in c.labels1) - b[y]) for y in c.labels2)
    return r1, r2


@dataclass(frozen=True)
class ObservableCertificate:
    passed: bool
    residual: float
    residual_1: float
    residual_2: float


def verify_joint_biobservable(
    c: BiObservable, a: Observable, b: Observable, tol: Tolerances = DEFAULT_TOL
) -> ObservableCertificate:
    """Check that ``c`` has marginals ``a`` and ``b``."""
    r1, r2 = marginal_residuals(c, a, b)
    res = max(r1, r2)
    return ObservableCertificate(res < tol.eq_tol, res, r1, r2)


def sharpness_residual(a: Observable) -> float:
    return max(max_abs(e @ e - e) for e in a.effects.values())


def is_sharp(a: Observable, tol: Tolerances = DEFAULT_TOL) -> bool:
    return sharpness_residual(a) <= tol.eq_tol


def commuting_joint(a: Observable, b: Observable, tol: Tolerances = DEFAULT_TOL) -> BiObservable:
    """Joint ``C_xy = A_x B_y`` for pairwise commuting effects."""
    if a.dim != b.dim:
        raise DimMismatch(f"observables on C^{a.dim} and C^{b.dim}")
    worst = max(max_abs(commutator(a[x], b[y])) for x in a.labels for y in b.labels)
    if worst > tol.eq_tol:
        raise NonCommuting(f"max commutator entry {worst:.3e}")
    grid = {}
    for x in a.labels:
        for y in b.labels:
            p = a[x] @ b[y]
            grid[x, y] = (p + dagger(p)) / 2
    return BiObservable(a.labels, b.labels, grid, tol)


def observable_distance(a: Observable, b: Observable) -> float:
    if set(a.labels) != set(b.labels):
        raise LabelMismatch(f"label sets differ: {a.labels} vs {b.labels}")
    return max(max_abs(a[x] - b[x]) for x in a.labels)


def identity_observable(dim: int, weights: Mapping[str, float], tol: Tolerances = DEFAULT_TOL) -> Observable:
    return Observable({x: w * np.eye(dim) for x, w in weights.items()}, tol)
