"""Finite-dimensional quantum instruments.

Operations in Kraus form, instruments and bi-instruments with their
sequential, conditioned and convex combinations, the Holevo/Kraus/Lüders/
trivial families with closed-form composition laws, coexistence
certificates, measurement models, and a JSON scenario runner.
"""

from .errors import (
    BadFactorization,
    BadStochasticMatrix,
    BadWeights,
    DimMismatch,
    InstrumentDoesNotMeasureA,
    InstrumentError,
    InvariantViolation,
    LabelMismatch,
    NonCommuting,
    NotHermitian,
    NotPSD,
    ParseError,
    ScenarioReferenceError,
    SingularNormalizer,
    StateMismatch,
    UncertifiedJoint,
    ZeroProbability,
)
from .linalg import DEFAULT_TOL, Tolerances
from .objects import BiObservable, Effect, Observable, State, pair_label, split_label
from .operations import Operation, choi, compose, dual_apply, op_distance, tensor
from .instruments import (
    BiInstrument,
    Instrument,
    born_distribution,
    channel,
    conditioned,
    conditioned_observable,
    convex_combination,
    measured_observable,
    post_process,
    sequential_product,
    tensor_instrument,
    then_instrument,
)
from .families import HolevoSpec, KrausSpec, detect_holevo, detect_kraus, holevo, kraus_instrument, lueders, trivial
from .coexistence import JointCertificate, verify_joint_instrument
from .models import MeasurementModel, measured_instrument, measured_observable_of_model, measurement_instrument
from .scenario import load_scenario, run_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
