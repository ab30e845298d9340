import numpy as np
import pytest
from scipy.linalg import null_space

from deutschctc import qmath

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record one acceptance criterion result; printed in the terminal summary."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        _CRITERIA[label] = (bool(ok), detail)
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
        ok, detail = _CRITERIA[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")


def dilate(kraus, d_env):
    """Unitary U on env (x) sys with U(|0>|s>) = sum_k |k> K_k |s>."""
    d = kraus[0].shape[0]
    n = d_env * d
    V = np.zeros((n, d), dtype=complex)
    for k, K in enumerate(kraus):
        V[k * d : (k + 1) * d, :] = K
    U = np.zeros((n, n), dtype=complex)
    U[:, :d] = V
    U[:, d:] = null_space(V.conj().T)
    return U


def classical_channel_unitary(transitions: dict, d: int):
    """Dilation of the stochastic map |i> -> |j> with probability transitions[(j, i)].

    Returns ``(U, d_env)``; the CR input for the dilation is |0><0|.
    """
    kraus = []
    for (j, i), p in transitions.items():
        K = np.zeros((d, d), dtype=complex)
        K[j, i] = np.sqrt(p)
        kraus.append(K)
    d_env = len(kraus)
    return dilate(kraus, d_env), d_env


def degenerate_qubit_unitary(rng):
    """Random CR(qubit) (x) CTC(qubit) unitary whose CTC channel has a line of fixed points.

    Controlled unitaries that share one eigenbasis fix every state diagonal
    in that basis.
    """
    W = qmath.random_unitary(2, rng)
    blocks = []
    for _ in range(2):
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
        blocks.append(W @ np.diag(phases) @ W.conj().T)
    ctrl = np.zeros((4, 4), dtype=complex)
    ctrl[:2, :2] = blocks[0]
    ctrl[2:, 2:] = blocks[1]
    A = qmath.random_unitary(2, rng)
    B = qmath.random_unitary(2, rng)
    return qmath.tensor(B, np.eye(2)) @ ctrl @ qmath.tensor(A, np.eye(2))
