"""JSON scenario files: a table of named objects plus a list of tasks.

Layout::

    {
      "tolerances": {"eq_tol": 1e-9},            # optional, any Tolerances field
      "objects": {"rho": {"type": "state", "matrix": ...}, ...},
      "tasks": [{"name": "...", "kind": "distribution", ...}, ...]
    }

Complex scalars are ``[re, im]`` pairs (a bare real number is accepted too),
matrices are row-major nested lists of scalars.

Concrete object types: ``matrix``, ``state``, ``observable``,
``bi_observable``, ``operation``, ``instrument``, ``bi_instrument`` and
``model``. A ``derived`` object applies a registered function to arguments;
inside ``args``/``kwargs`` a ``{"ref": name}`` names another object, a
``{"matrix": m}`` is an inline matrix, ``{"map": {...}}`` decodes its values
and anything else is passed through as plain JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import coexistence, families, instruments, models
from .errors import InstrumentError, ParseError, ScenarioReferenceError
from .instruments import BiInstrument, Instrument
from .linalg import DEFAULT_TOL, Tolerances, max_abs
from .models import MeasurementModel
from .objects import BiObservable, Observable, State, rho_distribution, verify_joint_biobservable
from .operations import Operation, op_distance

# -- value decoding --------------------------------------------------------------------


def _scalar(v, where: str) -> complex:
    if isinstance(v, bool):
        raise ParseError("boolean is not a number", where)
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
        return complex(v[0], v[1])
    raise ParseError(f"expected a complex scalar [re, im], got {v!r}", where)


def parse_matrix(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
        raise ParseError("matrix must be a non-empty list of rows", where)
    width = len(raw[0])
    rows = []
    for i, r in enumerate(raw):
        if len(r) != width or width == 0:
            raise ParseError(f"row {i} has {len(r)} entries, expected {width}", f"{where}[{i}]")
        rows.append([_scalar(v, f"{where}[{i}][{j}]") for j, v in enumerate(r)])
    return np.array(rows, dtype=np.complex128)


def encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ParseError("expected a JSON object", where)
    if key not in d:
        raise ParseError(f"missing field {key!r}", where)
    return d[key]


def _int(v, where: str) -> int:
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ParseError(f"expected a positive integer, got {v!r}", where)
    return v


def _list(v, where: str) -> list:
    if not isinstance(v, list):
        raise ParseError("expected a list", where)
    return v


# -- registry of derivable objects ---------------------------------------------------------

REGISTRY: dict[str, Callable[..., Any]] = {
    "lueders": families.lueders,
    "holevo": lambda a, states, tol: families.holevo(families.holevo_spec(a, states, tol), tol),
    "kraus": lambda ops, tol: families.kraus_instrument(ops, tol),
    "trivial": families.trivial,
    "channel": lambda i, tol: instruments.channel(i),
    "channel_instrument": instruments.channel_instrument,
    "sequential_product": instruments.sequential_product,
    "conditioned": instruments.conditioned,
    "then": instruments.then_instrument,
    "marginal": instruments.bi_marginal_instrument,
    "flatten": lambda k, tol: k.flatten(tol),
    "reduced": instruments.reduced_instrument,
    "reduced_marginal": instruments.reduced_marginal,
    "convex_combination": instruments.convex_combination,
    "post_process": instruments.post_process,
    "tensor_instrument": instruments.tensor_instrument,
    "measured_observable": instruments.measured_observable,
    "measured_biobservable": lambda k, tol: k.measured_biobservable(tol),
    "conditioned_observable": instruments.conditioned_observable,
    "conditioned_biobservable": instruments.conditioned_biobservable,
    "trivial_joint": coexistence.trivial_joint,
    "postprocess_joint": coexistence.postprocess_joint,
    "condition_joint": coexistence.condition_joint,
    "observable_joint_transfer": coexistence.observable_joint_transfer,
    "measured_conditioned_joint": coexistence.measured_conditioned_joint,
    "measurement_instrument": models.measurement_instrument,
    "measured_instrument": models.measured_instrument,
    "model_observable": models.measured_observable_of_model,
    "sequential_model_product": models.sequential_model_product,
}


@dataclass
class Scenario:
    objects: dict[str, Any]
    tasks: list[dict]
    tol: Tolerances = DEFAULT_TOL
    source: dict = field(default_factory=dict, repr=False)


# -- loading ------------------------------------------------------------------------------


def load_scenario(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text)


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"line {e.lineno} column {e.colno}") from None
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object", "$")
    tol = _parse_tolerances(doc.get("tolerances", {}))
    raw_objects = doc.get("objects", {})
    if not isinstance(raw_objects, dict):
        raise ParseError("objects must be a JSON object", "$.objects")
    tasks = _list(doc.get("tasks", []), "$.tasks")
    for k, t in enumerate(tasks):
        _need(t, "kind", f"$.tasks[{k}]")
    builder = _Builder(raw_objects, tol)
    objects = {name: builder.get(name) for name in raw_objects}
    for k, t in enumerate(tasks):
        for key in _TASK_REFS.get(t["kind"], ()):
            if key in t and t[key] not in objects:
                raise ScenarioReferenceError(f"task {k} refers to unknown object {t[key]!r}")
    return Scenario(objects, tasks, tol, doc)


def _parse_tolerances(raw) -> Tolerances:
    if not isinstance(raw, dict):
        raise ParseError("tolerances must be a JSON object", "$.tolerances")
    known = {f.name for f in fields(Tolerances)}
    extra = set(raw) - known
    if extra:
        raise ParseError(f"unknown tolerance fields {sorted(extra)}", "$.tolerances")
    try:
        return Tolerances(**{k: float(v) for k, v in raw.items()})
    except (TypeError, ValueError) as e:
        raise ParseError(str(e), "$.tolerances") from None


class _Builder:
    """Resolves the object table in dependency order, detecting cycles."""

    def __init__(self, raw: dict, tol: Tolerances):
        self.raw, self.tol = raw, tol
        self.done: dict[str, Any] = {}
        self.active: set[str] = set()

    def get(self, name: str):
        if name in self.done:
            return self.done[name]
        if name not in self.raw:
            raise ScenarioReferenceError(f"unknown object {name!r}")
        if name in self.active:
            raise ScenarioReferenceError(f"reference cycle through {name!r}")
        self.active.add(name)
        obj = self.build(self.raw[name], f"$.objects.{name}")
        self.active.discard(name)
        self.done[name] = obj
        return obj

    def build(self, spec, where: str):
        kind = _need(spec, "type", where)
        tol = self.tol
        if kind == "matrix":
            return parse_matrix(_need(spec, "matrix", where), f"{where}.matrix")
        if kind == "state":
            return State(parse_matrix(_need(spec, "matrix", where), f"{where}.matrix"), tol)
        if kind == "observable":
            effects = {}
            for k, e in enumerate(_list(_need(spec, "effects", where), f"{where}.effects")):
                w = f"{where}.effects[{k}]"
                effects[str(_need(e, "label", w))] = parse_matrix(_need(e, "matrix", w), f"{w}.matrix")
            return Observable(effects, tol)
        if kind == "bi_observable":
            grid = {}
            for k, e in enumerate(_list(_need(spec, "grid", where), f"{where}.grid")):
                w = f"{where}.grid[{k}]"
                grid[self._pair(e, w)] = parse_matrix(_need(e, "matrix", w), f"{w}.matrix")
            return BiObservable(self._labels(spec, "labels1", where), self._labels(spec, "labels2", where), grid, tol)
        if kind == "operation":
            return self._operation(spec, where)
        if kind == "instrument":
            ops = {}
            for k, o in enumerate(_list(_need(spec, "outcomes", where), f"{where}.outcomes")):
                w = f"{where}.outcomes[{k}]"
                ops[str(_need(o, "label", w))] = self._operation(o, w, spec)
            return Instrument(ops, tol)
        if kind == "bi_instrument":
            grid = {}
            for k, o in enumerate(_list(_need(spec, "outcomes", where), f"{where}.outcomes")):
                w = f"{where}.outcomes[{k}]"
                grid[self._pair(o, w)] = self._operation(o, w, spec)
            return BiInstrument(self._labels(spec, "labels1", where), self._labels(spec, "labels2", where), grid, tol)
        if kind == "model":
            inter = self._ref(_need(spec, "interaction", where), Instrument, f"{where}.interaction")
            probe = self._ref(_need(spec, "probe", where), Observable, f"{where}.probe")
            return MeasurementModel(
                _int(_need(spec, "base_dim", where), f"{where}.base_dim"),
                _int(_need(spec, "aux_dim", where), f"{where}.aux_dim"),
                inter,
                probe,
            )
        if kind == "derived":
            fn_name = _need(spec, "fn", where)
            if fn_name not in REGISTRY:
                raise ParseError(f"unknown function {fn_name!r}", f"{where}.fn")
            args = [self.value(a, f"{where}.args[{k}]") for k, a in enumerate(_list(spec.get("args", []), f"{where}.args"))]
            kwargs = spec.get("kwargs", {})
            if not isinstance(kwargs, dict):
                raise ParseError("kwargs must be a JSON object", f"{where}.kwargs")
            kwargs = {k: self.value(v, f"{where}.kwargs.{k}") for k, v in kwargs.items()}
            try:
                return REGISTRY[fn_name](*args, tol=tol, **kwargs)
            except TypeError as e:
                raise ParseError(f"bad arguments for {fn_name!r}: {e}", where) from None
        raise ParseError(f"unknown object type {kind!r}", f"{where}.type")

    def value(self, v, where: str):
        if isinstance(v, dict):
            if set(v) == {"ref"}:
                return self.get(v["ref"])
            if set(v) == {"matrix"}:
                return parse_matrix(v["matrix"], f"{where}.matrix")
            if set(v) == {"map"} and isinstance(v["map"], dict):
                return {str(k): self.value(x, f"{where}.map.{k}") for k, x in v["map"].items()}
            return v
        if isinstance(v, list):
            return [self.value(x, f"{where}[{k}]") for k, x in enumerate(v)]
        return v

    def _ref(self, name, cls, where: str):
        if not isinstance(name, str):
            raise ParseError("expected an object name", where)
        obj = self.get(name)
        if not isinstance(obj, cls):
            raise ParseError(f"{name!r} is a {type(obj).__name__}, expected {cls.__name__}", where)
        return obj

    def _operation(self, spec, where: str, dims_from=None):
        dims_from = spec if dims_from is None else dims_from
        din = _int(_need(dims_from, "dim_in", where), f"{where}.dim_in")
        dout = _int(_need(dims_from, "dim_out", where), f"{where}.dim_out")
        ks = _list(_need(spec, "kraus", where), f"{where}.kraus")
        if not ks:
            raise ParseError("at least one Kraus operator required", f"{where}.kraus")
        mats = [parse_matrix(k, f"{where}.kraus[{n}]") for n, k in enumerate(ks)]
        for n, m in enumerate(mats):
            if m.shape != (dout, din):
                raise ParseError(f"Kraus operator of shape {m.shape}, expected {(dout, din)}", f"{where}.kraus[{n}]")
        return Operation(mats, self.tol)

    @staticmethod
    def _labels(spec, key, where) -> list[str]:
        return [str(x) for x in _list(_need(spec, key, where), f"{where}.{key}")]

    @staticmethod
    def _pair(e, where) -> tuple[str, str]:
        lab = _list(_need(e, "labels", where), f"{where}.labels")
        if len(lab) != 2:
            raise ParseError("labels must be a pair [x, y]", f"{where}.labels")
        return str(lab[0]), str(lab[1])


# -- serialization ---------------------------------------------------------------------------


def encode_object(obj, name: str, out: dict):
    """Add the concrete JSON form of ``obj`` to ``out`` under ``name``."""
    if isinstance(obj, np.ndarray):
        out[name] = {"type": "matrix", "matrix": encode_matrix(obj)}
    elif isinstance(obj, State):
        out[name] = {"type": "state", "matrix": encode_matrix(obj.mat)}
    elif isinstance(obj, Observable):
        out[name] = {
            "type": "observable",
            "effects": [{"label": x, "matrix": encode_matrix(m)} for x, m in obj.effects.items()],
        }
    elif isinstance(obj, BiObservable):
        out[name] = {
            "type": "bi_observable",
            "labels1": obj.labels1,
            "labels2": obj.labels2,
            "grid": [{"labels": [x, y], "matrix": encode_matrix(m)} for (x, y), m in obj.grid.items()],
        }
    elif isinstance(obj, Operation):
        out[name] = {"type": "operation", "dim_in": obj.dim_in, "dim_out": obj.dim_out, "kraus": [encode_matrix(k) for k in obj.kraus]}
    elif isinstance(obj, Instrument):
        out[name] = {
            "type": "instrument",
            "dim_in": obj.dim_in,
            "dim_out": obj.dim_out,
            "outcomes": [{"label": x, "kraus": [encode_matrix(k) for k in op.kraus]} for x, op in obj.ops.items()],
        }
    elif isinstance(obj, BiInstrument):
        out[name] = {
            "type": "bi_instrument",
            "dim_in": obj.dim_in,
            "dim_out": obj.dim_out,
            "labels1": obj.labels1,
            "labels2": obj.labels2,
            "outcomes": [{"labels": [x, y], "kraus": [encode_matrix(k) for k in op.kraus]} for (x, y), op in obj.grid.items()],
        }
    elif isinstance(obj, MeasurementModel):
        encode_object(obj.interaction, f"{name}.interaction", out)
        encode_object(obj.probe, f"{name}.probe", out)
        out[name] = {
            "type": "model",
            "base_dim": obj.base_dim,
            "aux_dim": obj.aux_dim,
            "interaction": f"{name}.interaction",
            "probe": f"{name}.probe",
        }
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def serialize_scenario(s: Scenario) -> str:
    """Concrete JSON for ``s``: derived objects are written out evaluated."""
    objects: dict = {}
    for name, obj in s.objects.items():
        encode_object(obj, name, objects)
    doc = {
        "tolerances": {f.name: getattr(s.tol, f.name) for f in fields(Tolerances)},
        "objects": objects,
        "tasks": s.tasks,
    }
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def object_distance(a, b) -> float:
    """Map-level distance between two objects of the same kind."""
    if type(a) is not type(b):
        raise TypeError(f"cannot compare {type(a).__name__} with {type(b).__name__}")
    if isinstance(a, np.ndarray):
        return max_abs(a - b) if a.shape == b.shape else float("inf")
    if isinstance(a, State):
        return max_abs(a.mat - b.mat) if a.dim == b.dim else float("inf")
    if isinstance(a, Observable):
        if a.labels != b.labels or a.dim != b.dim:
            return float("inf")
        return max(max_abs(a[x] - b[x]) for x in a.labels)
    if isinstance(a, BiObservable):
        if set(a.grid) != set(b.grid) or a.dim != b.dim:
            return float("inf")
        return max(max_abs(a.grid[k] - b.grid[k]) for k in a.grid)
    if isinstance(a, Operation):
        return op_distance(a, b) if (a.dim_in, a.dim_out) == (b.dim_in, b.dim_out) else float("inf")
    if isinstance(a, Instrument):
        if a.labels != b.labels or (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
            return float("inf")
        return instruments.instrument_distance(a, b)
    if isinstance(a, BiInstrument):
        if set(a.grid) != set(b.grid) or (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
            return float("inf")
        return instruments.bi_instrument_distance(a, b)
    if isinstance(a, MeasurementModel):
        if (a.base_dim, a.aux_dim) != (b.base_dim, b.aux_dim):
            return float("inf")
        return max(object_distance(a.interaction, b.interaction), object_distance(a.probe, b.probe))
    raise TypeError(f"no distance for {type(a).__name__}")


# -- tasks -----------------------------------------------------------------------------------

_TASK_REFS = {
    "compute": ("object",),
    "validate": ("object",),
    "distribution": ("instrument", "observable", "state"),
    "equal": ("lhs", "rhs"),
    "verify_joint_instrument": ("joint", "first", "second"),
    "verify_joint_observable": ("joint", "first", "second"),
    "detect_holevo": ("instrument",),
    "detect_kraus": ("instrument",),
}


def _describe(obj) -> dict:
    out: dict = {}
    encode_object(obj, "value", out)
    return out["value"] if len(out) == 1 else out


def _task_distribution(t, objs, tol):
    rho = objs[t["state"]]
    if "instrument" in t:
        dist = instruments.born_distribution(objs[t["instrument"]], rho, tol)
    else:
        dist = rho_distribution(objs[t["observable"]], rho, tol)
    outputs = {"distribution": dist}
    if "expect" not in t:
        return True, None, outputs
    expect = {str(k): float(v) for k, v in t["expect"].items()}
    if set(expect) != set(dist):
        return False, None, outputs
    res = max(abs(dist[x] - expect[x]) for x in dist)
    return res < tol.eq_tol, res, outputs


def _task_equal(t, objs, tol):
    res = object_distance(objs[t["lhs"]], objs[t["rhs"]])
    return res < tol.eq_tol, res, {}


def _task_verify_instrument(t, objs, tol):
    cert = coexistence.verify_joint_instrument(objs[t["joint"]], objs[t["first"]], objs[t["second"]], tol=tol)
    outputs = {"residual_1": cert.residual_1, "residual_2": cert.residual_2, "factor_dims": [cert.n1, cert.n2]}
    return cert.passed, cert.residual, outputs


def _task_verify_observable(t, objs, tol):
    cert = verify_joint_biobservable(objs[t["joint"]], objs[t["first"]], objs[t["second"]], tol)
    return cert.passed, cert.residual, {"residual_1": cert.residual_1, "residual_2": cert.residual_2}


def _expect_bool(t) -> bool | None:
    e = t.get("expect")
    if e is not None and not isinstance(e, bool):
        raise ParseError("expect must be true or false", f"task {t.get('name')!r}")
    return e


def _task_detect_holevo(t, objs, tol):
    inst = objs[t["instrument"]]
    found = families.detect_holevo(inst, tol)
    outputs = {"present": found is not None}
    if found is not None:
        outputs["states"] = {x: encode_matrix(s.mat) for x, s in found.states.items()}
    e = _expect_bool(t)
    return (e is None or outputs["present"] == e), None, outputs


def _task_detect_kraus(t, objs, tol):
    inst = objs[t["instrument"]]
    spectra = families.choi_spectra(inst)
    second = max((float(w[1]) if len(w) > 1 else 0.0) for w in spectra.values())
    found = families.detect_kraus(inst, tol)
    outputs = {
        "present": found is not None,
        "second_choi_eigenvalue": second,
        "choi_spectra": {x: [float(v) for v in w] for x, w in spectra.items()},
    }
    e = _expect_bool(t)
    return (e is None or outputs["present"] == e), second, outputs


TASKS = {
    "compute": lambda t, objs, tol: (True, None, {"value": _describe(objs[t["object"]])}),
    "validate": lambda t, objs, tol: (True, None, {"type": type(objs[t["object"]]).__name__}),
    "distribution": _task_distribution,
    "equal": _task_equal,
    "verify_joint_instrument": _task_verify_instrument,
    "verify_joint_observable": _task_verify_observable,
    "detect_holevo": _task_detect_holevo,
    "detect_kraus": _task_detect_kraus,
}


def run_scenario(s: Scenario) -> dict:
    """Run every task in order; a task that raises is reported as an error, not propagated."""
    report = []
    for k, t in enumerate(s.tasks):
        name = str(t.get("name", f"task{k}"))
        kind = t["kind"]
        if kind not in TASKS:
            raise ParseError(f"unknown task kind {kind!r}", f"$.tasks[{k}].kind")
        try:
            ok, res, outputs = TASKS[kind](t, s.objects, s.tol)
            status = "pass" if ok else "fail"
        except InstrumentError as e:
            if isinstance(e, ParseError):
                raise
            ok, res, outputs, status = False, getattr(e, "residual", None), {"error": f"{type(e).__name__}: {e}"}, "error"
        report.append({"name": name, "kind": kind, "status": status, "residual": res, "outputs": outputs})
    return {"tasks": report, "passed": all(r["status"] == "pass" for r in report)}


def report_text(report: dict) -> str:
    lines = []
    for r in report["tasks"]:
        res = "-" if r["residual"] is None else f"{r['residual']:.3e}"
        lines.append(f"{r['status'].upper():5s} {r['name']}  residual={res}")
    lines.append("all tasks passed" if report["passed"] else "some tasks failed")
    return "\n".join(lines) + "\n"


def report_json(report: dict) -> str:
    return json.dumps(report, indent=1, ensure_ascii=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
