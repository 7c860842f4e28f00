"""Measurement models: an interaction instrument into ``H (x) K`` followed by a probe measurement on ``K``.

A model ``(H, K, I, P)`` couples the system to an auxiliary space with the
instrument ``I: H -> H (x) K`` and then reads the auxiliary factor with the
probe observable ``P``, using its Lüders operation ``I_H (x) P_x^{1/2}``.
Discarding ``K`` gives the instrument on ``H`` that the model measures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DimMismatch
from .families import HolevoSpec, holevo_spec
from .instruments import (
    BiInstrument,
    Instrument,
    channel,
    reduced_marginal,
    sequential_product,
)
from .linalg import DEFAULT_TOL, Tolerances, as_matrix, kron, partial_trace, psd_sqrt
from .objects import Observable, tensor_biobservable
from .operations import Operation, compose, dual_apply, measure_prepare_operation, sum_operations


@dataclass(frozen=True)
class MeasurementModel:
    base_dim: int
    aux_dim: int
    interaction: Instrument
    probe: Observable

    def __post_init__(self):
        if self.interaction.dim_in != self.base_dim:
            raise DimMismatch(f"interaction acts on C^{self.interaction.dim_in}, base space is C^{self.base_dim}")
        if self.interaction.dim_out != self.base_dim * self.aux_dim:
            raise DimMismatch(
                f"interaction outputs C^{self.interaction.dim_out}, expected C^{self.base_dim} (x) C^{self.aux_dim}"
            )
        if self.probe.dim != self.aux_dim:
            raise DimMismatch(f"probe acts on C^{self.probe.dim}, auxiliary space is C^{self.aux_dim}")

    @property
    def out_dim(self) -> int:
        return self.base_dim * self.aux_dim


def probe_lueders(m: MeasurementModel, x: str, tol: Tolerances = DEFAULT_TOL) -> Operation:
    """Lüders operation of ``I_H (x) P_x`` on ``H (x) K``."""
    return Operation([kron(np.eye(m.base_dim), psd_sqrt(m.probe[x], tol))], tol)


def measurement_instrument(m: MeasurementModel, tol: Tolerances = DEFAULT_TOL) -> BiInstrument:
    """``M_xy``: interaction outcome ``y`` first, then probe outcome ``x``.

    Grid rows follow the probe labels and columns the interaction labels.
    """
    probes = {x: probe_lueders(m, x, tol) for x in m.probe.labels}
    grid = {(x, y): compose(m.interaction[y], probes[x], tol) for x in m.probe.labels for y in m.interaction.labels}
    return BiInstrument(m.probe.labels, m.interaction.labels, grid, tol)


def measured_instrument(m: MeasurementModel, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Instrument on ``H`` measured by the model: probe marginal with ``K`` traced out."""
    return reduced_marginal(measurement_instrument(m, tol), m.base_dim, m.aux_dim, 1, 1, tol)


def measured_observable_of_model(m: MeasurementModel, tol: Tolerances = DEFAULT_TOL) -> Observable:
    """``x -> I-bar^*(I_H (x) P_x)``, computed without building the measurement instrument."""
    ibar = channel(m.interaction)
    eye = np.eye(m.base_dim)
    return Observable({x: dual_apply(ibar, kron(eye, p)) for x, p in m.probe.effects.items()}, tol)


def sequential_model_product(m: MeasurementModel, m1: MeasurementModel, tol: Tolerances = DEFAULT_TOL) -> MeasurementModel:
    """Model on ``H`` with auxiliary ``K (x) K1``: run ``m``'s interaction, then ``m1``'s on ``H (x) K``.

    Interaction and probe outcome pairs are flattened with ``pair_label``.
    Since ``(H (x) K) (x) K1`` and ``H (x) (K (x) K1)`` share one index
    layout under :func:`numpy.kron`, no reordering is needed.
    """
    if m1.base_dim != m.out_dim:
        raise DimMismatch(f"second model acts on C^{m1.base_dim}, first outputs C^{m.out_dim}")
    interaction = sequential_product(m.interaction, m1.interaction, tol).flatten(tol)
    probe = tensor_biobservable(m.probe, m1.probe, tol).flatten(tol)
    return MeasurementModel(m.base_dim, m.aux_dim * m1.aux_dim, interaction, probe)


# -- Holevo interactions -----------------------------------------------------------------


def _check_holevo_model(spec: HolevoSpec, probe: Observable, base_dim: int):
    if spec.dim_out != base_dim * probe.dim:
        raise DimMismatch(f"Holevo states on C^{spec.dim_out}, expected C^{base_dim} (x) C^{probe.dim}")


def holevo_model_weights(spec: HolevoSpec, probe: Observable, base_dim: int) -> dict[str, dict[str, float]]:
    """Row-stochastic ``w[y][x] = tr[alpha_y (I (x) P_x)]`` for a Holevo interaction ``(A, alpha)``.

    The model then measures ``x -> sum_y w[y][x] A_y``, a post-processing of ``A``.
    """
    _check_holevo_model(spec, probe, base_dim)
    eye = np.eye(base_dim)
    return {
        y: {x: float(np.trace(spec.states[y].mat @ kron(eye, p)).real) for x, p in probe.effects.items()}
        for y in spec.labels
    }


def holevo_model_observable(spec: HolevoSpec, probe: Observable, base_dim: int, tol: Tolerances = DEFAULT_TOL) -> Observable:
    w = holevo_model_weights(spec, probe, base_dim)
    a = spec.observable
    return Observable({x: sum(w[y][x] * a[y] for y in a.labels) for x in probe.labels}, tol)


def holevo_model_instrument(spec: HolevoSpec, probe: Observable, base_dim: int, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """``x -> sum_y tr(rho A_y) tr_K[(I (x) P_x)^{1/2} alpha_y (I (x) P_x)^{1/2}]`` built from the formula."""
    _check_holevo_model(spec, probe, base_dim)
    eye = np.eye(base_dim)
    ops = {}
    for x, p in probe.effects.items():
        root = kron(eye, psd_sqrt(p, tol))
        parts = []
        for y in spec.labels:
            sigma = partial_trace(root @ spec.states[y].mat @ root, base_dim, probe.dim, 1)
            t = np.trace(sigma).real
            if t > tol.trace_tol:
                parts.append(measure_prepare_operation(spec.observable[y], sigma / t, tol).scaled(t))
        ops[x] = sum_operations(parts, tol) if parts else Operation.zero(base_dim, base_dim)
    return Instrument(ops, tol)


def product_holevo_spec(
    a: Observable, betas: Mapping[str, object], gammas: Mapping[str, object], tol: Tolerances = DEFAULT_TOL
) -> HolevoSpec:
    """Holevo interaction preparing product states ``beta_y (x) gamma_y``."""
    return holevo_spec(a, {y: kron(as_matrix(betas[y]), as_matrix(gammas[y])) for y in a.labels}, tol)


def product_holevo_observable(
    a: Observable, gammas: Mapping[str, object], probe: Observable, tol: Tolerances = DEFAULT_TOL
) -> Observable:
    """Measured observable ``x -> sum_y tr(gamma_y P_x) A_y`` of a product-Holevo model."""
    w = {y: {x: float(np.trace(as_matrix(gammas[y]) @ p).real) for x, p in probe.effects.items()} for y in a.labels}
    return Observable({x: sum(w[y][x] * a[y] for y in a.labels) for x in probe.labels}, tol)


def product_holevo_instrument(
    a: Observable,
    betas: Mapping[str, object],
    gammas: Mapping[str, object],
    probe: Observable,
    tol: Tolerances = DEFAULT_TOL,
) -> Instrument:
    """Measured instrument ``x -> sum_y tr(rho A_y) tr(P_x gamma_y) beta_y`` of a product-Holevo model with sharp probe."""
    ops = {}
    for x, p in probe.effects.items():
        parts = []
        for y in a.labels:
            w = float(np.trace(p @ as_matrix(gammas[y])).real)
            if w > tol.trace_tol:
                parts.append(measure_prepare_operation(a[y], as_matrix(betas[y]), tol).scaled(w))
        ops[x] = sum_operations(parts, tol) if parts else Operation.zero(a.dim, as_matrix(next(iter(betas.values()))).shape[0])
    return Instrument(ops, tol)
