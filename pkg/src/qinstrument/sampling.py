"""Seeded random domain objects for property checks.

Every sampler takes a ``numpy.random.Generator`` and returns validated
objects, so the same generator state always gives the same object.
"""

from __future__ import annotations

import numpy as np

from .families import HolevoSpec, KrausSpec, holevo_spec
from .instruments import Instrument
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    ket,
    projector,
    random_instrument,
    random_povm,
    random_state,
    random_unitary,
)
from .models import MeasurementModel
from .objects import Observable, State
from .operations import Operation


def labels(n: int, prefix: str = "") -> list[str]:
    return [f"{prefix}{k}" for k in range(n)]


def rand_state(rng, dim: int, tol: Tolerances = DEFAULT_TOL) -> State:
    return State(random_state(dim, rng), tol)


def rand_observable(rng, dim: int, n: int, prefix: str = "", tol: Tolerances = DEFAULT_TOL) -> Observable:
    return Observable(dict(zip(labels(n, prefix), random_povm(dim, n, rng, tol))), tol)


def rand_instrument(
    rng, dim_in: int, dim_out: int, n: int, kraus: int = 2, prefix: str = "", tol: Tolerances = DEFAULT_TOL
) -> Instrument:
    grid = random_instrument(dim_in, dim_out, n, kraus, rng, tol)
    return Instrument({lab: Operation(ks, tol) for lab, ks in zip(labels(n, prefix), grid)}, tol)


def rand_operation(rng, dim_in: int, dim_out: int, kraus: int = 2, tol: Tolerances = DEFAULT_TOL) -> Operation:
    """A random trace non-increasing operation: one outcome of a two-outcome instrument."""
    return Operation(random_instrument(dim_in, dim_out, 2, kraus, rng, tol)[0], tol)


def rand_holevo_spec(rng, dim_in: int, dim_out: int, n: int, prefix: str = "", tol: Tolerances = DEFAULT_TOL) -> HolevoSpec:
    a = rand_observable(rng, dim_in, n, prefix, tol)
    return holevo_spec(a, {x: random_state(dim_out, rng) for x in a.labels}, tol)


def rand_kraus_spec(rng, dim_in: int, dim_out: int, n: int, prefix: str = "", tol: Tolerances = DEFAULT_TOL) -> KrausSpec:
    ks = random_instrument(dim_in, dim_out, n, 1, rng, tol)
    return KrausSpec({lab: row[0] for lab, row in zip(labels(n, prefix), ks)})


def rand_sharp_instrument(rng, dim: int, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Kraus ``U P_x`` for rank-1 projectors ``P_x`` of a random basis and a random unitary ``U``.

    Its measured observable ``{P_x}`` is sharp.
    """
    basis = random_unitary(dim, rng)
    u = random_unitary(dim, rng)
    return Instrument({str(k): Operation([u @ projector(basis[:, k])], tol) for k in range(dim)}, tol)


def basis_observable(dim: int, prefix: str = "") -> Observable:
    """Sharp observable of computational-basis projectors."""
    return Observable({f"{prefix}{k}": projector(ket(dim, k)) for k in range(dim)})


def rand_model(rng, base: int, aux: int, n_inter: int = 2, n_probe: int = 2, tol: Tolerances = DEFAULT_TOL) -> MeasurementModel:
    inter = rand_instrument(rng, base, base * aux, n_inter, 2, "y", tol)
    probe = rand_observable(rng, aux, n_probe, "p", tol)
    return MeasurementModel(base, aux, inter, probe)


def stochastic_matrix(rng, rows: int, cols: int) -> np.ndarray:
    m = rng.random((rows, cols))
    return m / m.sum(axis=1, keepdims=True)


def probability_vector(rng, n: int) -> np.ndarray:
    w = rng.random(n)
    return w / w.sum()
