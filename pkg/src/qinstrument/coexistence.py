"""Joint bi-instruments as coexistence witnesses, and constructions that produce them.

There is no search for joints here. Two instruments ``I: H -> H1`` and
``J: H -> H2`` coexist when some bi-instrument ``K: H -> H1 (x) H2`` has
reduced marginals ``I`` and ``J``; callers supply ``K`` and
:func:`verify_joint_instrument` returns a certificate. The remaining functions
build joints from joints (or from nothing, for trivial partners).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import BadFactorization, DimMismatch, LabelMismatch, UncertifiedJoint
from .instruments import (
    BiInstrument,
    Instrument,
    _factor_check,
    _mix,
    channel,
    conditioned_biobservable,
    reduced_marginal_ops,
    stochastic_rows,
)
from .linalg import DEFAULT_TOL, Tolerances
from .objects import BiObservable, Observable
from .operations import (
    append_state_operation,
    compose,
    dual_apply,
    op_distance,
)


@dataclass(frozen=True)
class JointCertificate:
    joint: BiInstrument
    n1: int
    n2: int
    residual_1: float
    residual_2: float
    eq_tol: float = DEFAULT_TOL.eq_tol

    @property
    def residual(self) -> float:
        return max(self.residual_1, self.residual_2)

    @property
    def passed(self) -> bool:
        return self.residual_1 < self.eq_tol and self.residual_2 < self.eq_tol


def verify_joint_instrument(
    k: BiInstrument,
    i: Instrument,
    j: Instrument,
    n1: int | None = None,
    n2: int | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> JointCertificate:
    """Compare the reduced marginals of ``k`` against ``i`` and ``j`` map by map.

    ``k`` is not validated first, so a broken candidate yields a failing
    certificate with a meaningful residual rather than an exception.
    """
    n1 = i.dim_out if n1 is None else n1
    n2 = j.dim_out if n2 is None else n2
    if set(k.labels1) != set(i.labels) or set(k.labels2) != set(j.labels):
        raise LabelMismatch("joint grid labels must be the product of the two instruments' labels")
    if (n1, n2) != (i.dim_out, j.dim_out):
        raise BadFactorization(f"factors ({n1}, {n2}) differ from instrument outputs ({i.dim_out}, {j.dim_out})")
    _factor_check(k.dim_out, n1, n2)
    if k.dim_in != i.dim_in or k.dim_in != j.dim_in:
        raise DimMismatch(f"joint acts on C^{k.dim_in}, instruments on C^{i.dim_in} and C^{j.dim_in}")
    m1 = reduced_marginal_ops(k, n1, n2, 1, 1)
    m2 = reduced_marginal_ops(k, n1, n2, 2, 2)
    r1 = max(op_distance(m1[x], i[x]) for x in i.labels)
    r2 = max(op_distance(m2[y], j[y]) for y in j.labels)
    return JointCertificate(k, n1, n2, r1, r2, tol.eq_tol)


def trivial_joint(i: Instrument, betas: Mapping[str, object], tol: Tolerances = DEFAULT_TOL) -> BiInstrument:
    """``K_xy(rho) = I_x(rho) (x) beta_y``; a joint for ``i`` and ``trivial(betas)``."""
    mats = {str(y): np.asarray(getattr(b, "mat", b), dtype=np.complex128) for y, b in betas.items()}
    prep = {y: append_state_operation(i.dim_out, b, tol) for y, b in mats.items()}
    grid = {(x, y): compose(i[x], prep[y], tol) for x in i.labels for y in mats}
    return BiInstrument(i.labels, list(mats), grid, tol)


def postprocess_joint(k: BiInstrument, lam, out_labels=None, tol: Tolerances = DEFAULT_TOL) -> BiInstrument:
    """``L_zy = sum_x lam[x, z] K_xy``; a joint for ``(post_process(I, lam), J)``."""
    out_labels, rows = stochastic_rows(k.labels1, lam, out_labels, tol)
    grid = {
        (z, y): _mix([k.grid[x, y] for x in k.labels1], [rows[x].get(z, 0.0) for x in k.labels1], k.dim_in, k.dim_out, tol)
        for z in out_labels
        for y in k.labels2
    }
    return BiInstrument(out_labels, k.labels2, grid, tol)


def condition_joint(l: BiInstrument, k: Instrument, tol: Tolerances = DEFAULT_TOL) -> BiInstrument:
    """``M_xy = L_xy o K-bar``; a joint for the pair conditioned on ``k``."""
    if k.dim_out != l.dim_in:
        raise DimMismatch(f"conditioning instrument outputs C^{k.dim_out}, joint expects C^{l.dim_in}")
    kbar = channel(k)
    grid = {key: compose(kbar, op, tol) for key, op in l.grid.items()}
    return BiInstrument(l.labels1, l.labels2, grid, tol)


def observable_joint_transfer(c: BiObservable, i: Instrument, tol: Tolerances = DEFAULT_TOL) -> BiObservable:
    """``D_xy = I-bar^*(C_xy)``; a joint for the two observables conditioned on ``i``."""
    if c.dim != i.dim_out:
        raise DimMismatch(f"bi-observable on C^{c.dim}, instrument outputs C^{i.dim_out}")
    ibar = channel(i)
    return BiObservable(c.labels1, c.labels2, {key: dual_apply(ibar, m) for key, m in c.grid.items()}, tol)


def measured_conditioned_joint(i: Instrument, a: Observable, tol: Tolerances = DEFAULT_TOL) -> BiObservable:
    """``B_xy = I_x^*(A_y)``: joint for the measured observable of ``i`` and ``(A | I)``."""
    return conditioned_biobservable(a, i, tol)


def measured_joint_observable(cert: JointCertificate, tol: Tolerances = DEFAULT_TOL) -> BiObservable:
    """Measured bi-observable of a certified joint; a joint for the two measured observables."""
    if not cert.passed:
        raise UncertifiedJoint(f"joint failed verification with residual {cert.residual:.3e}")
    return cert.joint.measured_biobservable(tol)
