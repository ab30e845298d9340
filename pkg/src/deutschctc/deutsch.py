"""Deutsch-model dynamics of a CR system interacting with a CTC.

A :class:`DeutschMap` bundles the interaction unitary with the CR input
state. Its CTC channel ``sigma -> Tr_CR(U (rho_cr (x) sigma) U^dag)`` must
have the CTC state as a fixed point; when the fixed point is not unique the
maximum-entropy one is chosen. The CR output then follows by tracing out
the CTC instead.

The module also carries the epsilon-relaxed model, in which the CTC is
allowed to leave its initial state by a bounded amount.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import qmath
from .errors import ConsistencyError, ContractError, DimensionError, SolverError

log = logging.getLogger(__name__)

KERNEL_TOL = 1e-8
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class DeutschMap:
    """Interaction ``unitary`` on CR (x) CTC with CR input ``cr_input``."""

    unitary: np.ndarray
    cr_input: np.ndarray
    dims: tuple[int, int]
    tol: float = field(default=qmath.TOL, compare=False)

    def __post_init__(self):
        d_cr, d_ctc = (int(d) for d in self.dims)
        object.__setattr__(self, "dims", (d_cr, d_ctc))
        u = np.asarray(self.unitary, dtype=complex)
        if u.shape != (d_cr * d_ctc, d_cr * d_ctc):
            raise DimensionError(f"unitary of shape {u.shape} does not match dims {self.dims}")
        if not qmath.is_unitary(u, max(self.tol, 1e-9)):
            raise ContractError("interaction is not unitary")
        rho = qmath.as_density(self.cr_input, self.tol, name="cr_input")
        if rho.shape[0] != d_cr:
            raise DimensionError(f"cr_input has dim {rho.shape[0]}, expected {d_cr}")
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "cr_input", rho)

    @classmethod
    def from_unitary(cls, unitary, cr_input, tol: float = qmath.TOL) -> "DeutschMap":
        """Infer the CTC dimension from the unitary and the CR input."""
        d_cr = np.asarray(cr_input).shape[0]
        n = np.asarray(unitary).shape[0]
        if n % d_cr:
            raise DimensionError(f"unitary size {n} is not a multiple of d_CR={d_cr}")
        return cls(unitary, cr_input, (d_cr, n // d_cr), tol)

    @property
    def d_ctc(self) -> int:
        return self.dims[1]

    def kraus(self) -> list[np.ndarray]:
        """Kraus operators of the induced CTC channel."""
        d_cr, d_ctc = self.dims
        w, v = qmath.eigh(self.cr_input)
        blocks = self.unitary.reshape(d_cr, d_ctc, d_cr, d_ctc)
        ops = []
        for p, a in zip(w, v.T):
            if p <= 1e-15:
                continue
            # (<b| (x) I) U (|a> (x) I)
            k_a = np.einsum("bjai,a->bji", blocks, a)
            ops.extend(np.sqrt(p) * k_a[b] for b in range(d_cr))
        return ops


@dataclass(frozen=True)
class FixedPointSet:
    """All fixed points: ``particular + sum_i t_i basis[i]`` that are PSD."""

    particular: np.ndarray
    basis: tuple[np.ndarray, ...]

    @property
    def dim_kernel(self) -> int:
        return len(self.basis)

    def point(self, t) -> np.ndarray:
        out = self.particular.copy()
        for ti, b in zip(np.atleast_1d(t), self.basis):
            out = out + ti * b
        return out


@dataclass(frozen=True)
class EpsilonModel:
    epsilon: float
    rho_i: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ContractError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        object.__setattr__(self, "rho_i", qmath.as_density(self.rho_i, name="rho_i"))


# ---------------------------------------------------------------------------
# the consistency map


def _joint(m: DeutschMap, sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.shape != (m.d_ctc, m.d_ctc):
        raise DimensionError(f"CTC state has shape {sigma.shape}, expected dim {m.d_ctc}")
    return m.unitary @ qmath.tensor(m.cr_input, sigma) @ qmath.dagger(m.unitary)


def apply_deutsch_map(m: DeutschMap, sigma: np.ndarray) -> np.ndarray:
    """Tr_CR(U (rho_cr (x) sigma) U^dag)."""
    return qmath.partial_trace(_joint(m, sigma), m.dims, keep=[1])


def consistency_residual(m: DeutschMap, sigma: np.ndarray) -> float:
    return qmath.trace_distance(apply_deutsch_map(m, sigma), sigma)


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape((d, d), order="F")


def liouville_matrix(m: DeutschMap) -> np.ndarray:
    """Matrix L with vec(apply_deutsch_map(m, s)) == L @ vec(s)."""
    d = m.d_ctc
    L = np.zeros((d * d, d * d), dtype=complex)
    for k in m.kraus():
        L += np.kron(k.conj(), k)
    return L


def _real_representation(m: DeutschMap) -> tuple[np.ndarray, np.ndarray]:
    """The map as a real matrix on Hermitian-basis coordinates."""
    d = m.d_ctc
    herm = qmath.hermitian_basis(d)
    B = np.stack([vec(h) for h in herm], axis=1)
    R = (B.conj().T @ liouville_matrix(m) @ B).real
    return R, herm


def _from_coords(c: np.ndarray, herm: np.ndarray) -> np.ndarray:
    return np.tensordot(c, herm, axes=1)


def fixed_point_set(m: DeutschMap, tol: float = RESIDUAL_TOL) -> FixedPointSet:
    """Affine description of every fixed point of the CTC channel.

    The particular solution is the Cesaro limit of the channel applied to
    the maximally mixed state, obtained exactly as the projection of I/d
    onto ker(R - 1) along range(R - 1). It is PSD and has maximal support
    among all fixed points.
    """
    d = m.d_ctc
    R, herm = _real_representation(m)
    n = d * d
    A = R - np.eye(n)
    W, s, Vt = np.linalg.svd(A)
    null = s < KERNEL_TOL
    K = Vt[null].T
    rng_cols = W[:, ~null]
    if K.shape[1] == 0:
        raise SolverError("channel has no fixed point; numerical breakdown")

    x0 = np.array([np.trace(h).real for h in herm]) / d
    coeffs, *_ = np.linalg.lstsq(np.hstack([K, rng_cols]), x0, rcond=None)
    particular = _from_coords(K @ coeffs[: K.shape[1]], herm)
    tr = np.trace(particular).real
    if tr <= 0.5:
        raise SolverError(f"fixed-point projection lost trace (tr={tr:.3g})")
    particular = qmath.clamp_psd(particular / tr, tol)

    # traceless directions inside the kernel
    tvec = np.array([np.trace(h).real for h in herm])
    c = K.T @ tvec
    _, _, vt = np.linalg.svd(c[None, :])
    traceless = K @ vt[1:].T
    basis = tuple(_from_coords(traceless[:, i], herm) for i in range(traceless.shape[1]))

    res = consistency_residual(m, particular)
    if res > tol:
        raise SolverError(f"particular fixed point has residual {res:.3e}")
    return FixedPointSet(particular, basis)


def cesaro_fixed_point(m: DeutschMap, steps: int = 10_000) -> np.ndarray:
    """Average of the first ``steps`` iterates of the channel on I/d."""
    L = liouville_matrix(m)
    d = m.d_ctc
    x = vec(qmath.maximally_mixed(d))
    acc = np.zeros_like(x)
    for _ in range(steps):
        acc += x
        x = L @ x
    return unvec(acc / steps, d)


# ---------------------------------------------------------------------------
# maximum-entropy selection


def _bloch_least_norm(fps: FixedPointSet) -> np.ndarray:
    v0 = np.array(qmath.density_to_bloch(fps.particular))
    A = np.array([[np.trace(b @ p).real for p in qmath.PAULIS] for b in fps.basis]).T
    t = -np.linalg.pinv(A) @ v0
    return qmath.bloch_to_density(v0 + A @ t, tol=1e-7)


def entropy_ascent(
    fps: FixedPointSet,
    start: np.ndarray | None = None,
    gtol: float = 1e-9,
    max_iter: int = 20_000,
) -> np.ndarray:
    """Maximise von Neumann entropy over the fixed-point family.

    Gradient ascent in the kernel coordinates with Barzilai-Borwein step
    lengths, halving the step whenever it would leave the PSD cone or lose
    entropy. ``start`` is an optional coordinate vector for the initial
    point (default: the particular solution).
    """
    k = fps.dim_kernel
    if k == 0:
        return fps.particular
    # every fixed point lives on the support of the particular solution
    w, v = qmath.eigh(fps.particular)
    Q = v[:, w > 1e-10]
    P = Q.conj().T @ fps.particular @ Q
    Bs = np.array([Q.conj().T @ b @ Q for b in fps.basis])

    def reduced(t):
        return P + np.tensordot(t, Bs, axes=1)

    def value_grad(t):
        ev, U = qmath.eigh(reduced(t))
        if ev[0] <= 0:
            return -np.inf, None
        logm = (U * np.log2(ev)) @ U.conj().T
        g = -np.einsum("kij,ji->k", Bs, logm).real
        return float(-np.sum(ev * np.log2(ev))), g

    t = np.zeros(k) if start is None else np.asarray(start, dtype=float).copy()
    f, g = value_grad(t)
    if g is None:
        raise SolverError("entropy ascent started outside the interior of the fixed set")
    step = 1.0
    t_prev = g_prev = None
    for it in range(max_iter):
        if np.linalg.norm(g) <= gtol:
            break
        if t_prev is not None:
            s, y = t - t_prev, g - g_prev
            sy = float(s @ y)
            if sy < 0:
                step = float(s @ s) / -sy
        for _ in range(80):
            t_new = t + step * g
            f_new, g_new = value_grad(t_new)
            if g_new is not None and f_new >= f - 1e-13:
                break
            step *= 0.5
        else:
            log.warning("entropy ascent stalled at |grad|=%.3e", np.linalg.norm(g))
            break
        t_prev, g_prev = t, g
        t, f, g = t_new, f_new, g_new
    else:
        log.warning("entropy ascent hit max_iter with |grad|=%.3e", np.linalg.norm(g))
    sigma = qmath.clamp_psd(fps.point(t))
    return sigma


def max_entropy_fixed_point(
    m: DeutschMap, tol: float = RESIDUAL_TOL, method: str = "auto"
) -> np.ndarray:
    """The unique maximum-entropy fixed point of the CTC channel.

    ``method`` is ``"auto"`` (closed form on qubits, ascent otherwise),
    ``"bloch"`` or ``"ascent"``.
    """
    fps = fixed_point_set(m, tol)
    if fps.dim_kernel == 0:
        return fps.particular
    if method == "auto":
        method = "bloch" if m.d_ctc == 2 else "ascent"
    if method == "bloch":
        if m.d_ctc != 2:
            raise ContractError("the Bloch closed form applies to qubit CTCs only")
        return _bloch_least_norm(fps)
    if method == "ascent":
        return entropy_ascent(fps)
    raise ValueError(f"unknown method {method!r}")


def cr_output(m: DeutschMap, sigma_star: np.ndarray, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """Tr_CTC(U (rho_cr (x) sigma*) U^dag) for a consistent CTC state."""
    res = consistency_residual(m, sigma_star)
    if res > tol:
        raise ConsistencyError(f"CTC state violates the consistency condition (residual {res:.3e})")
    return qmath.partial_trace(_joint(m, sigma_star), m.dims, keep=[0])


def evolve(m: DeutschMap, tol: float = RESIDUAL_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(ctc_state, cr_output)`` for the canonical evolution."""
    sigma = max_entropy_fixed_point(m, tol)
    return sigma, cr_output(m, sigma, tol)


def nonlinearity_witness(u, rho1, rho2, p: float, tol: float = RESIDUAL_TOL) -> float:
    """Trace distance between the CR output of a mixture and the mixture of outputs.

    Zero for any map that is linear on the pair; a strictly positive value
    certifies that the CR evolution is nonlinear in its input.
    """
    if not 0.0 < p < 1.0:
        raise ContractError("p must lie strictly between 0 and 1")
    rho1 = np.asarray(rho1, dtype=complex)
    rho2 = np.asarray(rho2, dtype=complex)
    if rho1.shape != rho2.shape:
        raise DimensionError("rho1 and rho2 differ in dimension")

    def out(rho):
        return evolve(DeutschMap.from_unitary(u, rho), tol)[1]

    mixed = out(p * rho1 + (1 - p) * rho2)
    return qmath.trace_distance(mixed, p * out(rho1) + (1 - p) * out(rho2))


# ---------------------------------------------------------------------------
# epsilon-close relaxation


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise DimensionError(f"dimension mismatch {np.shape(a)} vs {np.shape(b)}")


def epsilon_close(rho_i, rho_f, epsilon: float, tol: float = qmath.TOL) -> bool:
    """Both rho_f - (1-eps) rho_i and (1+eps) rho_i - rho_f are PSD."""
    _same_dim(rho_i, rho_f)
    if not 0.0 <= epsilon <= 1.0:
        raise ContractError(f"epsilon must lie in [0, 1], got {epsilon}")
    rho_i = np.asarray(rho_i, dtype=complex)
    rho_f = np.asarray(rho_f, dtype=complex)
    return qmath.is_psd(rho_f - (1 - epsilon) * rho_i, tol) and qmath.is_psd(
        (1 + epsilon) * rho_i - rho_f, tol
    )


def approx_teleport_condition(rho_i, rho, tol: float = qmath.TOL) -> bool:
    """2 rho_i >= rho."""
    _same_dim(rho_i, rho)
    return qmath.is_psd(2 * np.asarray(rho_i, dtype=complex) - np.asarray(rho, dtype=complex), tol)


def epsilon_final_state(model: EpsilonModel, rho) -> np.ndarray:
    """(1 - eps) rho_i + eps rho."""
    rho = np.asarray(rho, dtype=complex)
    _same_dim(model.rho_i, rho)
    return (1 - model.epsilon) * model.rho_i + model.epsilon * rho
