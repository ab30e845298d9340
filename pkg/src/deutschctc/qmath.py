"""Finite-dimensional linear algebra for density-matrix simulation.

Matrices are plain ``numpy`` complex arrays. Density operators and pure
states are validated on the way in by :func:`as_density` and
:func:`as_pure`; everything else is a pure function of its inputs.

Subsystem ordering convention: causality-respecting (CR) factors always
precede the CTC factor, so ``tensor(rho_cr, rho_ctc)`` is the joint state.
"""

from __future__ import annotations

import string
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import ContractError, DimensionError, InvalidStateError

TOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (X, Y, Z)

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

BELL_STATES = {
    "phi+": np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2),
    "phi-": np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2),
    "psi+": np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2),
    "psi-": np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2),
}


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))


# ---------------------------------------------------------------------------
# construction helpers


def swap(d: int) -> np.ndarray:
    """SWAP on two ``d``-level systems: |i>|j> -> |j>|i>."""
    u = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            u[j * d + i, i * d + j] = 1.0
    return u


def basis_ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def is_unitary(u: np.ndarray, tol: float = TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u @ dagger(u) - np.eye(u.shape[0]))) <= tol)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return np.asarray(unitary_group.rvs(dim, random_state=rng), dtype=complex)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre matrix of the given rank."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# validation


def _check_square(m: np.ndarray, what: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{what} must be square, got shape {m.shape}")


def is_hermitian(m: np.ndarray, tol: float = TOL) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def as_density(m, tol: float = TOL, name: str = "state") -> np.ndarray:
    """Validate ``m`` as a density operator and return it as a complex array.

    Raises
    ------
    InvalidStateError
        If ``m`` is not Hermitian, not unit trace or has an eigenvalue
        below ``-tol``.
    """
    m = np.array(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidStateError(f"{name}: density matrix must be square, got shape {m.shape}")
    if not is_hermitian(m, tol):
        raise InvalidStateError(f"{name}: matrix is not Hermitian")
    tr = np.trace(m).real
    if abs(tr - 1.0) > tol:
        raise InvalidStateError(f"{name}: trace is {tr!r}, expected 1")
    if eigvalsh(m)[0] < -tol:
        raise InvalidStateError(f"{name}: matrix is not positive semidefinite")
    return m


def as_pure(psi, tol: float = TOL, name: str = "state") -> np.ndarray:
    psi = np.array(psi, dtype=complex)
    if psi.ndim != 1 or psi.size < 1:
        raise InvalidStateError(f"{name}: state vector must be one-dimensional")
    norm2 = float(np.vdot(psi, psi).real)
    if abs(norm2 - 1.0) > tol:
        raise InvalidStateError(f"{name}: squared norm is {norm2!r}, expected 1")
    return psi


# ---------------------------------------------------------------------------
# spectral primitive


def eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of the Hermitian part of ``m`` (ascending)."""
    m = np.asarray(m, dtype=complex)
    return np.linalg.eigh(0.5 * (m + dagger(m)))


def eigvalsh(m: np.ndarray) -> np.ndarray:
    return eigh(m)[0]


def clamp_psd(m: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Zero eigenvalues in ``(-tol, 0)`` and renormalise to unit trace."""
    w, v = eigh(m)
    if w[0] < -tol:
        raise InvalidStateError(f"eigenvalue {w[0]:.3e} is below -tol")
    w = np.clip(w, 0.0, None)
    out = (v * w) @ dagger(v)
    return out / np.trace(out).real


def mat_log2(m: np.ndarray) -> np.ndarray:
    """Base-2 logarithm of a positive definite matrix."""
    w, v = eigh(m)
    return (v * np.log2(w)) @ dagger(v)


# ---------------------------------------------------------------------------
# tensor structure


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product, first argument is the leftmost factor."""
    if not ops:
        raise ValueError("tensor() needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> None:
    _check_square(m)
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"subsystem dims {list(dims)} do not match matrix size {m.shape[0]}")


def partial_trace(m: np.ndarray, dims: Sequence[int], keep) -> np.ndarray:
    """Reduce ``m`` to the subsystems in ``keep``.

    The kept subsystems appear in their original order regardless of the
    order in which they are listed.
    """
    m = np.asarray(m, dtype=complex)
    dims = [int(d) for d in dims]
    _check_dims(m, dims)
    keep = sorted(set(int(k) for k in np.atleast_1d(keep)))
    if not keep:
        raise DimensionError("keep must name at least one subsystem")
    n = len(dims)
    if keep[0] < 0 or keep[-1] >= n:
        raise DimensionError(f"subsystem index out of range for {n} subsystems")
    if 2 * n > len(string.ascii_letters):
        raise DimensionError("too many subsystems")
    row = list(string.ascii_letters[:n])
    col = list(string.ascii_letters[n : 2 * n])
    for k in range(n):
        if k not in keep:
            col[k] = row[k]
    out_idx = [row[k] for k in keep] + [col[k] for k in keep]
    t = m.reshape(dims + dims)
    r = np.einsum("".join(row) + "".join(col) + "->" + "".join(out_idx), t)
    dk = int(np.prod([dims[k] for k in keep]))
    return r.reshape(dk, dk)


def permute_subsystems(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: output factor ``i`` is input factor ``perm[i]``."""
    m = np.asarray(m, dtype=complex)
    dims = [int(d) for d in dims]
    _check_dims(m, dims)
    n = len(dims)
    if sorted(perm) != list(range(n)):
        raise DimensionError(f"{perm} is not a permutation of {n} subsystems")
    t = m.reshape(dims + dims)
    t = np.transpose(t, list(perm) + [n + p for p in perm])
    return t.reshape(m.shape)


def embed(u: np.ndarray, targets: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Lift an operator on ``targets`` (in the given order) to the full space."""
    dims = [int(d) for d in dims]
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets) or any(t < 0 or t >= len(dims) for t in targets):
        raise DimensionError(f"bad target subsystems {targets} for dims {dims}")
    dt = int(np.prod([dims[t] for t in targets]))
    u = np.asarray(u, dtype=complex)
    if u.shape != (dt, dt):
        raise DimensionError(f"operator of shape {u.shape} does not act on targets of size {dt}")
    rest = [k for k in range(len(dims)) if k not in targets]
    order = targets + rest
    full = tensor(u, np.eye(int(np.prod([dims[k] for k in rest])), dtype=complex))
    # full acts on factors ordered as `order`; move them back to natural order
    inv = [order.index(k) for k in range(len(dims))]
    return permute_subsystems(full, [dims[k] for k in order], inv)


# ---------------------------------------------------------------------------
# scalar functionals


def is_psd(m: np.ndarray, tol: float = TOL) -> bool:
    """True iff the smallest eigenvalue of Hermitian ``m`` is at least ``-tol``."""
    m = np.asarray(m, dtype=complex)
    _check_square(m)
    if not is_hermitian(m, tol):
        raise ContractError("is_psd requires a Hermitian matrix")
    return bool(eigvalsh(m)[0] >= -tol)


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits, with 0 log 0 = 0."""
    w = eigvalsh(rho)
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w))) + 0.0


def fidelity_to_pure(psi: np.ndarray, rho: np.ndarray) -> float:
    """<psi|rho|psi> for a pure target state."""
    psi = np.asarray(psi, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (psi.size, psi.size):
        raise DimensionError(f"state of dim {psi.size} vs operator of shape {rho.shape}")
    return float(np.vdot(psi, rho @ psi).real)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return 0.5 * float(np.sum(np.abs(eigvalsh(a - b))))


# ---------------------------------------------------------------------------
# sampling and qubit parametrisation


def haar_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state: a normalised vector of complex Gaussians."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def bloch_ket(theta: float, phi: float) -> np.ndarray:
    """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex)


def bloch_to_density(v, tol: float = TOL) -> np.ndarray:
    v = BlochVector(*map(float, v))
    if v.norm() > 1 + tol:
        raise InvalidStateError(f"Bloch vector of length {v.norm():.6g} lies outside the ball")
    return 0.5 * (I2 + v.x * X + v.y * Y + v.z * Z)


def density_to_bloch(rho: np.ndarray) -> BlochVector:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DimensionError("Bloch vectors exist only for qubits")
    return BlochVector(*(float(np.trace(rho @ p).real) for p in PAULIS))


def hermitian_basis(d: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal basis of d x d Hermitian matrices.

    Returned as an array of shape ``(d*d, d, d)``: the diagonal units first,
    then symmetric and antisymmetric off-diagonal pairs.
    """
    out = []
    for k in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[k, k] = 1.0
        out.append(e)
    s = 1.0 / np.sqrt(2.0)
    for j in range(d):
        for k in range(j + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = e[k, j] = s
            out.append(e)
            f = np.zeros((d, d), dtype=complex)
            f[j, k] = -1j * s
            f[k, j] = 1j * s
            out.append(f)
    return np.array(out)
