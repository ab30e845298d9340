"""Swap-based CR/CTC protocols run as interaction circuits.

Circuits act on a register of CR subsystems plus one CTC. The CTC starts
either *free* (its state is whatever the Deutsch condition selects) or
*prepared* in a given state. Once a CTC-touching step has fixed its state,
the CTC carries that state into every later step.

At a step where the CTC state is already fixed, the consistency condition
cannot be met by choosing the CTC state. For a swap between a CR subsystem
and the CTC it is met instead by forcing that CR subsystem's input to equal
the CTC state; the violation removed this way is recorded as the step's
``obstruction``. Any other interaction with a fixed, inconsistent CTC state
raises :class:`ConsistencyError`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import qmath
from .deutsch import (
    DeutschMap,
    EpsilonModel,
    approx_teleport_condition,
    epsilon_close,
    epsilon_final_state,
    max_entropy_fixed_point,
)
from .errors import ConfigurationError, ConsistencyError, ContractError, DimensionError

RESIDUAL_TOL = 1e-8


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class Consistency:
    """Either exact Deutsch consistency (``epsilon=None``) or an epsilon-CTC."""

    epsilon: float | None = None

    @classmethod
    def deutsch(cls) -> "Consistency":
        return cls(None)

    @property
    def is_deutsch(self) -> bool:
        return self.epsilon is None


@dataclass(frozen=True)
class InteractionStep:
    unitary: np.ndarray
    cr_subsystems: tuple[int, ...]
    acts_on_ctc: bool = True


@dataclass(frozen=True)
class InteractionCircuit:
    cr_dims: tuple[int, ...]
    ctc_dim: int
    steps: tuple[InteractionStep, ...] = ()
    consistency: Consistency = Consistency()
    ctc_initial: np.ndarray | None = None

    def validate(self) -> None:
        n = len(self.cr_dims)
        for k, step in enumerate(self.steps):
            subs = list(step.cr_subsystems)
            if len(set(subs)) != len(subs) or any(s < 0 or s >= n for s in subs):
                raise ConfigurationError(f"step {k}: CR subsystem indices {subs} out of range")
            d = int(np.prod([self.cr_dims[s] for s in subs]))
            if step.acts_on_ctc:
                d *= self.ctc_dim
            if np.shape(step.unitary) != (d, d):
                raise ConfigurationError(
                    f"step {k}: unitary of shape {np.shape(step.unitary)} does not act on dimension {d}"
                )
        if self.ctc_initial is not None and np.shape(self.ctc_initial) != (self.ctc_dim,) * 2:
            raise ConfigurationError("ctc_initial does not match ctc_dim")


@dataclass
class StepRecord:
    pre_cr: np.ndarray
    post_cr: np.ndarray
    ctc_state: np.ndarray | None
    residual: float
    obstruction: float = 0.0
    forced: bool = False
    epsilon_close: bool | None = None


@dataclass
class ProtocolReport:
    name: str
    steps: list[StepRecord]
    final_cr: np.ndarray
    final_ctc: np.ndarray | None
    fidelities: dict[str, float] = field(default_factory=dict)
    verdict: Verdict = Verdict.NOT_APPLICABLE
    details: dict = field(default_factory=dict)
    cr_dims: tuple[int, ...] = ()
    joint: np.ndarray | None = None

    @property
    def max_residual(self) -> float:
        return max((s.residual for s in self.steps), default=0.0)

    def cr_marginal(self, k: int) -> np.ndarray:
        return qmath.partial_trace(self.final_cr, self.cr_dims, keep=[k])


# ---------------------------------------------------------------------------
# circuit execution


def _is_swap_step(step: InteractionStep, cr_dims, ctc_dim) -> bool:
    if not step.acts_on_ctc or len(step.cr_subsystems) != 1:
        return False
    if cr_dims[step.cr_subsystems[0]] != ctc_dim:
        return False
    return bool(np.allclose(step.unitary, qmath.swap(ctc_dim), atol=1e-12))


def _replace_marginal(rho: np.ndarray, dims, k: int, tau: np.ndarray) -> np.ndarray:
    """Product of the other subsystems' joint state with ``tau`` at slot ``k``."""
    n = len(dims)
    if n == 1:
        return tau.copy()
    rest = [j for j in range(n) if j != k]
    rho_rest = qmath.partial_trace(rho, dims, keep=rest)
    joint = qmath.tensor(rho_rest, tau)
    order = rest + [k]
    inv = [order.index(j) for j in range(n)]
    return qmath.permute_subsystems(joint, [dims[j] for j in order], inv)


def run_circuit(
    c: InteractionCircuit, initial_cr: np.ndarray, tol: float = RESIDUAL_TOL, name: str = "circuit"
) -> ProtocolReport:
    """Execute ``c`` step by step, enforcing consistency at each CTC step."""
    c.validate()
    cr_dims = list(c.cr_dims)
    d_cr = int(np.prod(cr_dims))
    rho = qmath.as_density(initial_cr, name="initial_cr")
    if rho.shape[0] != d_cr:
        raise DimensionError(f"initial CR state has dim {rho.shape[0]}, expected {d_cr}")
    ctc = None if c.ctc_initial is None else qmath.as_density(c.ctc_initial, name="ctc_initial")
    n = len(cr_dims)
    joint = None
    records: list[StepRecord] = []

    for k, step in enumerate(c.steps):
        pre = rho
        if not step.acts_on_ctc:
            u = qmath.embed(step.unitary, step.cr_subsystems, cr_dims)
            rho = u @ rho @ qmath.dagger(u)
            records.append(StepRecord(pre, rho, ctc, 0.0))
            continue

        targets = list(step.cr_subsystems) + [n]
        u = qmath.embed(step.unitary, targets, cr_dims + [c.ctc_dim])
        dims2 = (d_cr, c.ctc_dim)
        rec_kwargs = {}
        if ctc is None:
            m = DeutschMap(u, rho, dims2)
            ctc = max_entropy_fixed_point(m, tol)
        elif not c.consistency.is_deutsch:
            pass
        else:
            j = u @ qmath.tensor(rho, ctc) @ qmath.dagger(u)
            obstruction = qmath.trace_distance(qmath.partial_trace(j, dims2, keep=[1]), ctc)
            if obstruction > tol:
                if not _is_swap_step(step, cr_dims, c.ctc_dim):
                    raise ConsistencyError(
                        f"step {k}: fixed CTC state is inconsistent (obstruction {obstruction:.3e}) "
                        "and only swap interactions can force the CR input"
                    )
                rho = _replace_marginal(rho, cr_dims, step.cr_subsystems[0], ctc)
                rec_kwargs = {"obstruction": obstruction, "forced": True}
            else:
                rec_kwargs = {"obstruction": obstruction}

        joint = u @ qmath.tensor(rho, ctc) @ qmath.dagger(u)
        ctc_out = qmath.partial_trace(joint, dims2, keep=[1])
        new_rho = qmath.partial_trace(joint, dims2, keep=[0])
        if c.consistency.is_deutsch:
            residual = qmath.trace_distance(ctc_out, ctc)
            if residual > tol:
                raise ConsistencyError(f"step {k}: residual {residual:.3e} exceeds tol")
            records.append(StepRecord(pre, new_rho, ctc, residual, **rec_kwargs))
        else:
            eps = c.consistency.epsilon
            ctc_f = epsilon_final_state(EpsilonModel(eps, ctc), ctc_out)
            records.append(
                StepRecord(
                    pre,
                    new_rho,
                    ctc,
                    qmath.trace_distance(ctc_f, ctc),
                    epsilon_close=epsilon_close(ctc, ctc_f, eps),
                )
            )
            ctc_out = ctc_f
        rho = new_rho
        ctc = ctc_out

    if ctc is None:
        # no interaction: every CTC state is consistent, pick the max-entropy one
        ctc = qmath.maximally_mixed(c.ctc_dim)
    return ProtocolReport(name, records, rho, ctc, cr_dims=tuple(cr_dims), joint=joint)


# ---------------------------------------------------------------------------
# named protocols


def _swap_step(cr_index: int, d: int) -> InteractionStep:
    return InteractionStep(qmath.swap(d), (cr_index,), True)


def _pure(psi, name="psi") -> np.ndarray:
    return qmath.as_pure(psi, name=name)


def _close(a, b, tol) -> bool:
    return qmath.trace_distance(a, b) <= tol


def popping_up(psi, unitary: np.ndarray | None = None, tol: float = RESIDUAL_TOL) -> ProtocolReport:
    """One interaction (SWAP by default) between a pure CR state and a free CTC."""
    psi = _pure(psi)
    d = psi.size
    u = qmath.swap(d) if unitary is None else np.asarray(unitary, dtype=complex)
    circ = InteractionCircuit((d,), d, (InteractionStep(u, (0,), True),))
    rep = run_circuit(circ, qmath.projector(psi), tol, name="popping_up")
    target = qmath.projector(psi)
    rep.fidelities = {
        "ctc": qmath.fidelity_to_pure(psi, rep.final_ctc),
        "cr": qmath.fidelity_to_pure(psi, rep.final_cr),
    }
    ok = _close(rep.final_ctc, target, tol) and _close(rep.final_cr, target, tol)
    rep.verdict = Verdict.PASS if ok else Verdict.FAIL
    return rep


def elimination(psi, unitary: np.ndarray | None = None, tol: float = RESIDUAL_TOL) -> ProtocolReport:
    """Same circuit as popping up, reported as the product state it leaves.

    ``details["forced_fixed_point"]`` is the CTC state selected by
    consistency and ``details["ctc_input_dependent"]`` says whether that
    state carries information about the input (distance from I/d).
    """
    psi = _pure(psi)
    d = psi.size
    u = qmath.swap(d) if unitary is None else np.asarray(unitary, dtype=complex)
    circ = InteractionCircuit((d,), d, (InteractionStep(u, (0,), True),))
    rep = run_circuit(circ, qmath.projector(psi), tol, name="elimination")
    rep.name = "elimination"
    product = qmath.tensor(rep.final_cr, rep.final_ctc)
    forced = rep.steps[0].ctc_state
    rep.details.update(
        final_joint=product,
        forced_fixed_point=forced,
        ctc_input_dependent=qmath.trace_distance(forced, qmath.maximally_mixed(d)) > tol,
        product_deviation=qmath.trace_distance(rep.joint, product),
    )
    rep.fidelities = {"forced_ctc": qmath.fidelity_to_pure(psi, forced)}
    ok = rep.max_residual <= tol and rep.details["product_deviation"] <= tol
    rep.verdict = Verdict.PASS if ok else Verdict.FAIL
    return rep


def cloning_circuit(d: int) -> InteractionCircuit:
    """SWAP(CR1, CTC) then SWAP(CR2, CTC) with a free CTC."""
    return InteractionCircuit((d, d), d, (_swap_step(0, d), _swap_step(1, d)))


def clone(psi, blank=None, tol: float = RESIDUAL_TOL) -> ProtocolReport:
    psi = _pure(psi)
    d = psi.size
    blank = qmath.basis_ket(0, d) if blank is None else _pure(blank, "blank")
    if blank.size != d:
        raise DimensionError("psi and blank differ in dimension")
    rho0 = qmath.tensor(qmath.projector(psi), qmath.projector(blank))
    rep = run_circuit(cloning_circuit(d), rho0, tol, name="clone")
    rep.fidelities = {
        "cr1": qmath.fidelity_to_pure(psi, rep.cr_marginal(0)),
        "cr2": qmath.fidelity_to_pure(psi, rep.cr_marginal(1)),
    }
    ok = all(abs(f - 1) <= tol for f in rep.fidelities.values())
    rep.verdict = Verdict.PASS if ok else Verdict.FAIL
    return rep


def deleting_circuit(d: int) -> InteractionCircuit:
    """SWAP(CR2, CTC) with the CTC prepared in |0>."""
    return InteractionCircuit(
        (d, d), d, (_swap_step(1, d),), ctc_initial=qmath.projector(qmath.basis_ket(0, d))
    )


def delete(psi, tol: float = RESIDUAL_TOL) -> ProtocolReport:
    psi = _pure(psi)
    d = psi.size
    rho0 = qmath.tensor(qmath.projector(psi), qmath.projector(psi))
    rep = run_circuit(deleting_circuit(d), rho0, tol, name="delete")
    zero = qmath.basis_ket(0, d)
    rep.fidelities = {
        "cr1": qmath.fidelity_to_pure(psi, rep.cr_marginal(0)),
        "cr2_zero": qmath.fidelity_to_pure(zero, rep.cr_marginal(1)),
        "ctc_zero": qmath.fidelity_to_pure(zero, rep.final_ctc),
    }
    rep.details["ctc_leak"] = qmath.trace_distance(rep.final_ctc, qmath.projector(zero))
    ok = all(abs(f - 1) <= tol for f in rep.fidelities.values())
    rep.verdict = Verdict.PASS if ok else Verdict.FAIL
    return rep


def create_cr_ctc_state(rho12, ctc_initial=None, tol: float = RESIDUAL_TOL) -> ProtocolReport:
    """Transfer a two-party CR state onto CR(1) (x) CTC with one swap.

    The CTC must start in the CR(2) marginal of ``rho12``; by default it is
    prepared there.
    """
    rho12 = qmath.as_density(rho12, name="rho12")
    d = int(round(np.sqrt(rho12.shape[0])))
    if d * d != rho12.shape[0]:
        raise DimensionError("rho12 must be a state of two equal-dimension subsystems")
    marginal = qmath.partial_trace(rho12, (d, d), keep=[1])
    if ctc_initial is None:
        ctc_initial = marginal
    ctc_initial = qmath.as_density(ctc_initial, name="ctc_initial")
    if qmath.trace_distance(ctc_initial, marginal) > tol:
        raise ContractError("CTC initial state differs from the CR(2) marginal of rho12")
    circ = InteractionCircuit((d, d), d, (_swap_step(1, d),), ctc_initial=ctc_initial)
    rep = run_circuit(circ, rho12, tol, name="create_state")
    # joint order is CR1, CR2, CTC
    cr1_ctc = qmath.partial_trace(rep.joint, (d, d, d), keep=[0, 2])
    err = float(np.max(np.abs(cr1_ctc - rho12)))
    rep.details.update(cr1_ctc=cr1_ctc, transfer_error=err)
    ok = err <= tol and rep.max_residual <= tol and not rep.steps[0].forced
    rep.verdict = Verdict.PASS if ok else Verdict.FAIL
    return rep


def no_entanglement_check(rho12, ctc_pure=None, tol: float = 1e-9) -> ProtocolReport:
    """Check whether a correlated CR state is compatible with a pure CTC.

    A swap between CR(2) and a CTC fixed in a pure state is consistent only
    if the CR(2) marginal equals that pure state, which rules out any
    correlation with CR(1). ``details["status"]`` is ``"consistent"`` or
    ``"inconsistent-premises"``; ``details["obstruction"]`` is the trace
    distance between the CR(2) marginal and the CTC state.
    """
    rho12 = qmath.as_density(rho12, name="rho12")
    d = int(round(np.sqrt(rho12.shape[0])))
    if d * d != rho12.shape[0]:
        raise DimensionError("rho12 must be a state of two equal-dimension subsystems")
    c = qmath.basis_ket(0, d) if ctc_pure is None else _pure(ctc_pure, "ctc_pure")
    tau = qmath.projector(c)
    u = qmath.embed(qmath.swap(d), [1, 2], [d, d, d])
    joint = u @ qmath.tensor(rho12, tau) @ qmath.dagger(u)
    ctc_out = qmath.partial_trace(joint, (d * d, d), keep=[1])
    obstruction = qmath.trace_distance(ctc_out, tau)
    rho1 = qmath.partial_trace(rho12, (d, d), keep=[0])
    rho2 = qmath.partial_trace(rho12, (d, d), keep=[1])
    correlation = qmath.trace_distance(rho12, qmath.tensor(rho1, rho2))
    consistent = obstruction <= tol
    record = StepRecord(rho12, qmath.partial_trace(joint, (d * d, d), keep=[0]), tau, obstruction, obstruction)
    rep = ProtocolReport(
        "no_entanglement",
        [record],
        record.post_cr,
        tau,
        cr_dims=(d, d),
        joint=joint,
        details={
            "status": "consistent" if consistent else "inconsistent-premises",
            "obstruction": obstruction,
            "correlation": correlation,
        },
    )
    # consistent premises must leave CR(1) and CR(2) uncorrelated
    ok = (not consistent) or correlation <= 2 * np.sqrt(max(obstruction, tol))
    rep.verdict = Verdict.PASS if ok else Verdict.FAIL
    return rep


# ---------------------------------------------------------------------------
# teleportation to a CTC


@dataclass(frozen=True)
class TeleportSetup:
    """Shared state on CR(1) (x) CTC, qubit input on CR(2) and a mode.

    ``mode`` is ``"unconstrained"``, ``"deutsch"`` or ``"epsilon"``; the
    last uses ``epsilon``.
    """

    shared_state: np.ndarray
    input: np.ndarray | None = None
    mode: str = "unconstrained"
    epsilon: float | None = None

    def __post_init__(self):
        if self.mode not in ("unconstrained", "deutsch", "epsilon"):
            raise ConfigurationError(f"unknown teleportation mode {self.mode!r}")
        if self.mode == "epsilon" and self.epsilon is None:
            raise ConfigurationError("epsilon mode needs an epsilon value")
        shared = qmath.as_density(self.shared_state, name="shared_state")
        if shared.shape != (4, 4):
            raise ConfigurationError("teleportation supports qubits only: shared state must be 4x4")
        object.__setattr__(self, "shared_state", shared)
        if self.input is not None:
            psi = _pure(self.input, "input")
            if psi.size != 2:
                raise ConfigurationError("teleportation supports qubit inputs only")
            object.__setattr__(self, "input", psi)

    @property
    def fixed_ctc(self) -> np.ndarray:
        return qmath.partial_trace(self.shared_state, (2, 2), keep=[1])


# Bell outcome on (CR2, CR1) -> Pauli correction on the CTC
_CORRECTIONS = {
    "phi+": qmath.I2,
    "phi-": qmath.Z,
    "psi+": qmath.X,
    "psi-": qmath.Z @ qmath.X,
}


def _bell_outcomes(rho_in: np.ndarray, shared: np.ndarray):
    """Yield ``(probability, corrected CTC state)`` for each Bell outcome.

    Register order is CR(1), CR(2), CTC.
    """
    # shared (CR1, CTC) (x) input (CR2) -> reorder to CR1, CR2, CTC
    full = qmath.permute_subsystems(qmath.tensor(shared, rho_in), [2, 2, 2], [0, 2, 1])
    for label, corr in _CORRECTIONS.items():
        proj = qmath.embed(qmath.projector(qmath.BELL_STATES[label]), [1, 0], [2, 2, 2])
        post = proj @ full @ proj
        ctc = qmath.partial_trace(post, [2, 2, 2], keep=[2])
        p = float(np.trace(ctc).real)
        yield p, corr @ ctc @ qmath.dagger(corr)


def teleport_output(rho_in: np.ndarray, shared: np.ndarray) -> np.ndarray:
    """CTC state after Bell measurement and correction, averaged over outcomes."""
    return sum(out for _, out in _bell_outcomes(rho_in, shared))


def teleport_superoperator(shared: np.ndarray) -> np.ndarray:
    """Column-stacking Liouville matrix of :func:`teleport_output`."""
    L = np.zeros((4, 4), dtype=complex)
    for col in range(4):
        e = np.zeros(4, dtype=complex)
        e[col] = 1.0
        L[:, col] = teleport_output(e.reshape(2, 2, order="F"), shared).reshape(-1, order="F")
    return L


def _ctc_output(setup: TeleportSetup, psi: np.ndarray, raw: np.ndarray) -> np.ndarray:
    if setup.mode == "unconstrained":
        return raw
    if setup.mode == "deutsch":
        return setup.fixed_ctc
    return epsilon_final_state(EpsilonModel(setup.epsilon, setup.fixed_ctc), qmath.projector(psi))


def teleport_to_ctc(
    setup: TeleportSetup, rng: np.random.Generator | None = None, tol: float = qmath.TOL
) -> ProtocolReport:
    """Teleport the qubit input of ``setup`` from CR(2) to the CTC.

    With ``rng`` a single Bell outcome is sampled (Born rule) instead of
    averaging over outcomes; after correction both agree for a Bell-state
    resource.
    """
    if setup.input is None:
        raise ContractError("teleport_to_ctc needs an input state")
    psi = setup.input
    rho_in = qmath.projector(psi)
    if rng is None:
        raw = teleport_output(rho_in, setup.shared_state)
    else:
        outcomes = list(_bell_outcomes(rho_in, setup.shared_state))
        probs = np.array([p for p, _ in outcomes])
        k = rng.choice(len(outcomes), p=probs / probs.sum())
        raw = outcomes[k][1] / outcomes[k][0]
    out = _ctc_output(setup, psi, raw)
    fixed = setup.fixed_ctc
    details = {
        "mode": setup.mode,
        "raw_output": raw,
        "raw_fidelity": qmath.fidelity_to_pure(psi, raw),
        # violation of the end-to-end Deutsch condition by the raw protocol
        "deutsch_obstruction": qmath.trace_distance(raw, fixed),
    }
    residual = 0.0
    if setup.mode == "deutsch":
        residual = qmath.trace_distance(out, fixed)
    if setup.mode == "epsilon":
        details["epsilon"] = setup.epsilon
        details["epsilon_close"] = epsilon_close(fixed, out, setup.epsilon, tol)
        details["approx_teleport_condition"] = approx_teleport_condition(fixed, rho_in, tol)
    fid = qmath.fidelity_to_pure(psi, out)
    rep = ProtocolReport(
        "teleport",
        [StepRecord(rho_in, out, fixed, residual)],
        rho_in,
        out,
        fidelities={"teleport": fid},
        details=details,
        cr_dims=(2,),
    )
    rep.verdict = Verdict.PASS if abs(fid - 1) <= tol else Verdict.FAIL
    return rep


def teleport_fidelities(setup: TeleportSetup, psis: np.ndarray) -> np.ndarray:
    """Fidelity <psi|out|psi> for each row of ``psis`` under ``setup``'s mode."""
    psis = np.asarray(psis, dtype=complex)
    if setup.mode == "unconstrained":
        L = teleport_superoperator(setup.shared_state)
        rhos = np.einsum("ni,nj->nij", psis, psis.conj())
        vecs = np.transpose(rhos, (0, 2, 1)).reshape(len(psis), 4)
        outs = np.transpose((vecs @ L.T).reshape(len(psis), 2, 2), (0, 2, 1))
    elif setup.mode == "deutsch":
        outs = np.broadcast_to(setup.fixed_ctc, (len(psis), 2, 2))
    else:
        eps = setup.epsilon
        rhos = np.einsum("ni,nj->nij", psis, psis.conj())
        outs = (1 - eps) * setup.fixed_ctc + eps * rhos
    return np.einsum("ni,nij,nj->n", psis.conj(), outs, psis).real


def average_fidelity(
    template: TeleportSetup, trials: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte Carlo Haar average of the teleportation fidelity.

    Returns ``(mean, standard error)``.
    """
    if trials < 100:
        raise ContractError("average_fidelity needs at least 100 trials")
    psis = np.array([qmath.haar_pure_state(2, rng) for _ in range(trials)])
    f = teleport_fidelities(template, psis)
    return float(np.mean(f)), float(np.std(f, ddof=1) / np.sqrt(trials))


__all__ = [
    "Consistency",
    "InteractionCircuit",
    "InteractionStep",
    "ProtocolReport",
    "StepRecord",
    "TeleportSetup",
    "Verdict",
    "average_fidelity",
    "clone",
    "cloning_circuit",
    "create_cr_ctc_state",
    "delete",
    "deleting_circuit",
    "elimination",
    "no_entanglement_check",
    "popping_up",
    "run_circuit",
    "teleport_fidelities",
    "teleport_output",
    "teleport_superoperator",
    "teleport_to_ctc",
]
