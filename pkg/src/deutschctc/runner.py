"""Scenario files, experiment sweeps and CSV output.

A scenario is a JSON document naming a protocol, the states it uses, an
epsilon grid and the Monte Carlo settings. ``parse_scenario`` validates and
materialises it, ``run_scenario`` dispatches to :mod:`deutschctc.protocols`
and ``emit_csv`` renders the sweep table.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import qmath
from .errors import CTCError, InvalidStateError
from .protocols import (
    ProtocolReport,
    TeleportSetup,
    Verdict,
    average_fidelity,
    clone,
    create_cr_ctc_state,
    delete,
    elimination,
    no_entanglement_check,
    popping_up,
    teleport_to_ctc,
)

CLASSICAL_FIDELITY = 2.0 / 3.0
DEFAULT_TOL = 1e-9
DEFAULT_TRIALS = 10_000
CSV_HEADER = ("epsilon", "mean_fidelity", "stderr", "beats_classical")

# name -> (required state names, optional state names)
PROTOCOLS = {
    "popping_up": (("psi",), ()),
    "elimination": (("psi",), ()),
    "clone": (("psi",), ("blank",)),
    "delete": (("psi",), ()),
    "create_state": (("rho12",), ()),
    "no_entanglement": (("rho12",), ("ctc",)),
    "teleport": (("psi",), ("shared",)),
    "avg_fidelity_sweep": ((), ("shared",)),
}

PROTOCOL_HELP = {
    "popping_up": "swap a pure CR state with a free CTC; the CTC takes on the CR state",
    "elimination": "same swap, reported as the product state it leaves behind",
    "clone": "two swaps through one CTC copy psi onto a blank CR system",
    "delete": "one swap with a CTC prepared in |0> resets the second copy of psi",
    "create_state": "transfer a two-party CR state onto CR(1) and the CTC",
    "no_entanglement": "check whether correlated CR states are compatible with a pure CTC",
    "teleport": "teleport psi to the CTC: unconstrained, Deutsch and per-epsilon modes",
    "avg_fidelity_sweep": "Haar-averaged epsilon-CTC teleportation fidelity over epsilon_grid",
}

_NUMBER_OR_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": _NUMBER_OR_COMPLEX},
}


def _one_key(name, schema):
    return {
        "type": "object",
        "properties": {name: schema},
        "required": [name],
        "additionalProperties": False,
    }


STATE_SPEC_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "ket": {"type": ["string", "integer"]},
                "dim": {"type": "integer", "minimum": 2},
            },
            "required": ["ket"],
            "additionalProperties": False,
        },
        _one_key(
            "bloch",
            {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        ),
        _one_key(
            "bloch_vector",
            {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        ),
        _one_key("bell", {"enum": sorted(qmath.BELL_STATES)}),
        _one_key("vector", {"type": "array", "minItems": 1, "items": _NUMBER_OR_COMPLEX}),
        _one_key("matrix", _MATRIX),
        _one_key("maximally_mixed", {"type": "integer", "minimum": 1}),
        _one_key("werner", {"type": "number", "minimum": 0, "maximum": 1}),
        _one_key("product", {"type": "array", "minItems": 2, "items": {"$ref": "#/$defs/state"}}),
        _one_key("haar", {"type": "integer", "minimum": 2}),
    ]
}

SCENARIO_SCHEMA = {
    "$defs": {"state": STATE_SPEC_SCHEMA},
    "type": "object",
    "properties": {
        "protocol": {"enum": sorted(PROTOCOLS)},
        "state_specs": {"type": "object", "additionalProperties": {"$ref": "#/$defs/state"}},
        "unitary_spec": {"oneOf": [{"enum": ["SWAP", "CNOT", "I"]}, _MATRIX, {"type": "null"}]},
        "epsilon_grid": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["protocol"],
    "additionalProperties": False,
}


class ScenarioError(CTCError):
    """Parse or validation failure of a scenario document."""


class ScenarioParseError(ScenarioError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class ScenarioValidationError(ScenarioError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


class StateValidationError(ScenarioError):
    def __init__(self, spec_name: str, msg: str):
        super().__init__(f"state spec {spec_name!r}: {msg}")
        self.spec_name = spec_name


class ScenarioRuntimeError(CTCError):
    """A protocol failed while running a scenario."""


@dataclass
class Scenario:
    protocol: str
    state_specs: dict = field(default_factory=dict)
    unitary_spec: str | list | None = None
    epsilon_grid: list = field(default_factory=list)
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    tol: float = DEFAULT_TOL
    states: dict = field(default_factory=dict, compare=False, repr=False)
    unitary: np.ndarray | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "state_specs": self.state_specs,
            "unitary_spec": self.unitary_spec,
            "epsilon_grid": list(self.epsilon_grid),
            "trials": self.trials,
            "seed": self.seed,
            "tol": self.tol,
        }

    def is_random(self) -> bool:
        return any(self.states[k] is None for k in self.states)


@dataclass
class SweepRow:
    epsilon: float
    mean_fidelity: float
    stderr: float
    beats_classical: bool


@dataclass
class RunReport:
    scenario: Scenario
    reports: list[tuple[str, ProtocolReport]]
    rows: list[SweepRow]
    duration: float
    summary: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# state specs


def _complex(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _ket_from_label(label, dim) -> np.ndarray:
    if isinstance(label, int):
        if dim is None:
            raise InvalidStateError("integer ket needs a 'dim'")
        if not 0 <= label < dim:
            raise InvalidStateError(f"index {label} out of range for dim {dim}")
        return qmath.basis_ket(label, dim)
    singles = {
        "0": np.array([1, 0], dtype=complex),
        "1": np.array([0, 1], dtype=complex),
        "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
        "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    }
    if not label or any(ch not in singles for ch in label):
        raise InvalidStateError(f"ket label {label!r} must use the characters 0, 1, + and -")
    out = singles[label[0]]
    for ch in label[1:]:
        out = np.kron(out, singles[ch])
    return out


def materialize_state(spec: dict, tol: float = DEFAULT_TOL):
    """Turn one state spec into a pure vector, a density matrix or ``None``.

    ``None`` marks a Haar-random state that is sampled per trial.
    """
    (kind,) = [k for k in spec if k != "dim"] or ["ket"]
    val = spec[kind]
    if kind == "ket":
        return _ket_from_label(val, spec.get("dim"))
    if kind == "bloch":
        return qmath.bloch_ket(*val)
    if kind == "bloch_vector":
        return qmath.bloch_to_density(val, tol)
    if kind == "bell":
        return qmath.BELL_STATES[val].copy()
    if kind == "vector":
        return qmath.as_pure([_complex(x) for x in val], tol)
    if kind == "matrix":
        rows = [[_complex(x) for x in row] for row in val]
        if len({len(r) for r in rows}) != 1:
            raise InvalidStateError("matrix rows differ in length")
        return qmath.as_density(np.array(rows), tol)
    if kind == "maximally_mixed":
        return qmath.maximally_mixed(val)
    if kind == "werner":
        singlet = qmath.projector(qmath.BELL_STATES["psi-"])
        return val * singlet + (1 - val) * np.eye(4) / 4
    if kind == "product":
        parts = [materialize_state(p, tol) for p in val]
        if any(p is None for p in parts):
            raise InvalidStateError("Haar-random factors are not allowed inside a product")
        return qmath.tensor(*(as_density(p) for p in parts))
    if kind == "haar":
        return None
    raise InvalidStateError(f"unknown state kind {kind!r}")


def as_density(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return qmath.projector(state) if state.ndim == 1 else state


def _as_pure_or_fail(name: str, state) -> np.ndarray:
    if state is None:
        return None
    state = np.asarray(state)
    if state.ndim == 1:
        return state
    # accept rank-one density matrices as pure states
    w, v = qmath.eigh(state)
    if w[-1] < 1 - 1e-9:
        raise StateValidationError(name, "a pure state is required")
    return v[:, -1]


_UNITARIES = {"SWAP": lambda d: qmath.swap(d), "I": lambda d: np.eye(d * d, dtype=complex)}


def _resolve_unitary(spec, d: int, tol: float):
    if spec is None:
        return None
    if spec == "CNOT":
        if d != 2:
            raise ScenarioValidationError("unitary_spec", "CNOT needs qubit systems")
        return qmath.CNOT.copy()
    if isinstance(spec, str):
        return _UNITARIES[spec](d)
    u = np.array([[_complex(x) for x in row] for row in spec])
    if u.ndim != 2 or u.shape != (d * d, d * d):
        raise ScenarioValidationError("unitary_spec", f"matrix must be {d * d}x{d * d}")
    if not qmath.is_unitary(u, max(tol, 1e-9)):
        raise ScenarioValidationError("unitary_spec", "matrix is not unitary")
    return u


# ---------------------------------------------------------------------------
# parsing


def _validate_document(doc) -> None:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<document>"
        if err.validator == "additionalProperties" and not err.absolute_path:
            extra = sorted(set(doc) - set(SCENARIO_SCHEMA["properties"]))
            raise ScenarioValidationError(extra[0], "unknown field")
        if err.validator == "oneOf" and "state_specs" in path:
            raise StateValidationError(path.split(".")[1], "not a recognised state description")
        raise ScenarioValidationError(path, err.message)


def scenario_from_dict(doc: dict) -> Scenario:
    _validate_document(doc)
    s = Scenario(
        protocol=doc["protocol"],
        state_specs=dict(doc.get("state_specs", {})),
        unitary_spec=doc.get("unitary_spec"),
        epsilon_grid=[float(e) for e in doc.get("epsilon_grid", [])],
        trials=int(doc.get("trials", DEFAULT_TRIALS)),
        seed=int(doc.get("seed", 0)),
        tol=float(doc.get("tol", DEFAULT_TOL)),
    )
    _materialize(s)
    return s


def _materialize(s: Scenario) -> None:
    required, optional = PROTOCOLS[s.protocol]
    for name in s.state_specs:
        if name not in required + optional:
            raise ScenarioValidationError(
                f"state_specs.{name}", f"not used by protocol {s.protocol!r}"
            )
    for name in required:
        if name not in s.state_specs:
            raise ScenarioValidationError(f"state_specs.{name}", "required by protocol")
    states = {}
    for name, spec in s.state_specs.items():
        try:
            states[name] = materialize_state(spec, s.tol)
        except InvalidStateError as exc:
            raise StateValidationError(name, str(exc)) from None
    for name in ("psi", "blank", "ctc"):
        if name in states:
            states[name] = _as_pure_or_fail(name, states[name])
    for name in ("rho12", "shared"):
        if name in states:
            if states[name] is None:
                raise StateValidationError(name, "Haar sampling is for pure single-system inputs")
            states[name] = as_density(states[name])
            if states[name].shape[0] != 4 and (s.protocol == "teleport" or name == "shared"):
                raise StateValidationError(name, "teleportation needs a two-qubit shared state")
    if s.protocol in ("teleport",) and states["psi"] is not None and states["psi"].size != 2:
        raise StateValidationError("psi", "teleportation input must be a qubit")
    if s.protocol == "avg_fidelity_sweep" and s.epsilon_grid and s.trials < 100:
        raise ScenarioValidationError("trials", "sweeps need at least 100 trials")
    s.states = states
    d = _system_dim(s)
    if s.unitary_spec is not None:
        if s.protocol not in ("popping_up", "elimination"):
            raise ScenarioValidationError(
                "unitary_spec", f"protocol {s.protocol!r} uses a fixed swap interaction"
            )
        s.unitary = _resolve_unitary(s.unitary_spec, d, s.tol)


def _system_dim(s: Scenario) -> int:
    psi = s.states.get("psi")
    if psi is not None:
        return psi.size
    spec = s.state_specs.get("psi")
    if spec and "haar" in spec:
        return spec["haar"]
    return 2


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, exc.lineno, exc.colno) from None
    return scenario_from_dict(doc)


def dump_scenario(s: Scenario) -> str:
    return json.dumps(s.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# running


def _sample(s: Scenario, rng: np.random.Generator) -> dict:
    out = {}
    for name, state in s.states.items():
        if state is None:
            out[name] = qmath.haar_pure_state(s.state_specs[name]["haar"], rng)
        else:
            out[name] = state
    return out


def _default_shared() -> np.ndarray:
    return qmath.projector(qmath.BELL_STATES["phi+"])


def _run_once(s: Scenario, st: dict, rng: np.random.Generator) -> list[tuple[str, ProtocolReport]]:
    tol = max(s.tol, 1e-8)
    p = s.protocol
    if p == "popping_up":
        return [(p, popping_up(st["psi"], s.unitary, tol))]
    if p == "elimination":
        return [(p, elimination(st["psi"], s.unitary, tol))]
    if p == "clone":
        return [(p, clone(st["psi"], st.get("blank"), tol))]
    if p == "delete":
        return [(p, delete(st["psi"], tol))]
    if p == "create_state":
        return [(p, create_cr_ctc_state(st["rho12"], tol=tol))]
    if p == "no_entanglement":
        return [(p, no_entanglement_check(st["rho12"], st.get("ctc"), s.tol))]
    if p == "teleport":
        shared = st.get("shared", _default_shared())
        out = [
            (f"teleport[{mode}]", teleport_to_ctc(TeleportSetup(shared, st["psi"], mode), tol=s.tol))
            for mode in ("unconstrained", "deutsch")
        ]
        for eps in s.epsilon_grid:
            setup = TeleportSetup(shared, st["psi"], "epsilon", eps)
            out.append((f"teleport[epsilon={eps:g}]", teleport_to_ctc(setup, tol=s.tol)))
        return out
    raise ScenarioValidationError("protocol", f"{p!r} is not a single-run protocol")


def beats_classical(mean: float, stderr: float, tol: float = DEFAULT_TOL) -> bool:
    return mean - 3.0 * stderr - CLASSICAL_FIDELITY > tol


def run_scenario(s: Scenario) -> RunReport:
    """Run every trial of ``s``; equal scenarios give identical reports."""
    start = time.perf_counter()
    reports: list[tuple[str, ProtocolReport]] = []
    rows: list[SweepRow] = []
    try:
        if s.protocol == "avg_fidelity_sweep":
            shared = s.states.get("shared", _default_shared())
            seeds = np.random.SeedSequence(s.seed).spawn(len(s.epsilon_grid))
            for eps, seq in zip(s.epsilon_grid, seeds):
                rng = np.random.default_rng(seq)
                mean, se = average_fidelity(TeleportSetup(shared, None, "epsilon", eps), s.trials, rng)
                rows.append(SweepRow(eps, mean, se, beats_classical(mean, se, s.tol)))
        else:
            rng = np.random.default_rng(s.seed)
            n = s.trials if s.is_random() else 1
            for _ in range(n):
                reports.extend(_run_once(s, _sample(s, rng), rng))
    except ScenarioError:
        raise
    except CTCError as exc:
        raise ScenarioRuntimeError(f"protocol {s.protocol!r} (seed {s.seed}): {exc}") from exc
    summary = {
        "runs": len(reports),
        "passes": sum(r.verdict is Verdict.PASS for _, r in reports),
        "max_residual": max((r.max_residual for _, r in reports), default=0.0),
    }
    return RunReport(s, reports, rows, time.perf_counter() - start, summary)


# ---------------------------------------------------------------------------
# output


def emit_csv(r: RunReport) -> str:
    """Sweep table, one row per epsilon, LF line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in r.rows:
        w.writerow(
            [
                f"{row.epsilon:.12f}",
                f"{row.mean_fidelity:.11f}",
                f"{row.stderr:.11f}",
                "true" if row.beats_classical else "false",
            ]
        )
    return buf.getvalue()


def format_summary(r: RunReport) -> str:
    s = r.scenario
    lines = [f"protocol: {s.protocol}  seed: {s.seed}  trials: {s.trials}  tol: {s.tol:g}"]
    if s.protocol == "avg_fidelity_sweep":
        lines.append("epsilon   mean_fidelity   stderr      beats 2/3")
        for row in r.rows:
            lines.append(
                f"{row.epsilon:<9.4f} {row.mean_fidelity:<15.10f} {row.stderr:<11.3e} "
                f"{'yes' if row.beats_classical else 'no'}"
            )
    else:
        shown = r.reports if len(r.reports) <= 12 else r.reports[:6]
        for label, rep in shown:
            fids = ", ".join(f"{k}={v:.10f}" for k, v in rep.fidelities.items())
            extra = ""
            if "status" in rep.details:
                extra = f" status={rep.details['status']} obstruction={rep.details['obstruction']:.3e}"
            lines.append(
                f"{label}: verdict={rep.verdict.value} max_residual={rep.max_residual:.2e}"
                f"{' ' + fids if fids else ''}{extra}"
            )
        if len(r.reports) > len(shown):
            lines.append(f"... {len(r.reports) - len(shown)} more runs")
        lines.append(f"passes: {r.summary['passes']}/{r.summary['runs']}")
    lines.append(f"elapsed: {r.duration:.3f} s")
    return "\n".join(lines)
