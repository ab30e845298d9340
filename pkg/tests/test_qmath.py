import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deutschctc import qmath as q
from deutschctc.errors import ContractError, DimensionError, InvalidStateError

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
PHI_PLUS = q.BELL_STATES["phi+"]


def ptrace_loops(m, dims, keep):
    """Brute-force partial trace by explicit index sums (bipartite only)."""
    da, db = dims
    out = np.zeros((da, da) if keep == 0 else (db, db), dtype=complex)
    for i in range(da):
        for j in range(db):
            for k in range(da):
                for l in range(db):
                    if keep == 0 and j == l:
                        out[i, k] += m[i * db + j, k * db + l]
                    if keep == 1 and i == k:
                        out[j, l] += m[i * db + j, k * db + l]
    return out


class TestTensor:
    def test_identity(self):
        np.testing.assert_array_equal(q.tensor(q.I2, q.I2), np.eye(4))

    def test_basis_product(self):
        m = q.tensor(q.projector(KET0), q.projector(KET1))
        expected = np.zeros((4, 4))
        expected[1, 1] = 1
        np.testing.assert_array_equal(m, expected)

    def test_plus_zero(self):
        m = q.tensor(q.projector(PLUS), q.projector(KET0))
        expected = np.zeros((4, 4))
        for r, c in [(0, 0), (0, 2), (2, 0), (2, 2)]:
            expected[r, c] = 0.5
        np.testing.assert_allclose(m, expected, atol=1e-15)


class TestPartialTrace:
    def test_product(self):
        m = q.tensor(q.projector(KET0), q.projector(KET1))
        np.testing.assert_allclose(q.partial_trace(m, [2, 2], keep=[0]), q.projector(KET0))

    def test_bell_marginal(self):
        m = q.projector(PHI_PLUS)
        np.testing.assert_allclose(q.partial_trace(m, [2, 2], keep=[1]), q.I2 / 2, atol=1e-15)

    def test_swap_then_trace(self):
        s = q.swap(2)
        m = s @ q.tensor(q.projector(PLUS), q.projector(KET0)) @ s
        np.testing.assert_allclose(q.partial_trace(m, [2, 2], keep=[0]), q.projector(KET0), atol=1e-15)

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            q.partial_trace(np.eye(4), [2, 3], keep=[0])

    def test_matches_loop_oracle(self, rng):
        for da, db in [(2, 2), (2, 3), (3, 2), (4, 2)]:
            m = rng.standard_normal((da * db,) * 2) + 1j * rng.standard_normal((da * db,) * 2)
            for keep in (0, 1):
                np.testing.assert_allclose(
                    q.partial_trace(m, [da, db], keep=[keep]), ptrace_loops(m, (da, db), keep), atol=1e-12
                )

    def test_keeps_original_order(self, rng):
        a, b, c = (q.random_density(2, rng) for _ in range(3))
        m = q.tensor(a, b, c)
        np.testing.assert_allclose(q.partial_trace(m, [2, 2, 2], keep=[2, 0]), q.tensor(a, c), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(2, 4), min_size=1, max_size=2), st.integers(0, 2**32 - 1))
    def test_trace_preserved(self, dims, seed):
        r = np.random.default_rng(seed)
        dims = dims + [2]
        n = int(np.prod(dims))
        if n > 16:
            dims = [2, 2]
            n = 4
        g = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
        h = g + g.conj().T
        for k in range(len(dims)):
            assert abs(np.trace(q.partial_trace(h, dims, keep=[k])) - np.trace(h)) <= 1e-10

    def test_tensor_duality(self, rng):
        for _ in range(10):
            a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            np.testing.assert_allclose(
                q.partial_trace(q.tensor(a, b), [3, 2], keep=[0]), a * np.trace(b), atol=1e-12
            )


def test_embed_matches_kron_and_swap_conjugation(rng):
    u = q.random_unitary(2, rng)
    np.testing.assert_allclose(q.embed(u, [0], [2, 3]), np.kron(u, np.eye(3)))
    np.testing.assert_allclose(q.embed(u, [1], [3, 2]), np.kron(np.eye(3), u))
    v = q.random_unitary(4, rng)
    s = q.swap(2)
    np.testing.assert_allclose(q.embed(v, [1, 0], [2, 2]), s @ v @ s, atol=1e-12)


class TestIsPsd:
    def test_maximally_mixed(self):
        assert q.is_psd(q.I2 / 2)

    def test_negative(self):
        assert not q.is_psd(np.diag([1, -0.1]), 1e-9)

    def test_complement_projector(self, rng):
        for _ in range(20):
            psi = q.haar_pure_state(2, rng)
            m = 2 * (q.I2 / 2) - q.projector(psi)
            assert q.is_psd(m)
            np.testing.assert_allclose(q.eigvalsh(m), [0, 1], atol=1e-12)

    def test_non_hermitian(self):
        with pytest.raises(ContractError):
            q.is_psd(np.array([[1, 1], [0, 1]]))


class TestEntropy:
    def test_pure(self):
        assert q.von_neumann_entropy(q.projector(PLUS)) == pytest.approx(0, abs=1e-12)

    def test_mixed(self):
        assert q.von_neumann_entropy(q.I2 / 2) == pytest.approx(1.0, abs=1e-12)

    def test_three_quarters(self):
        expected = -(0.75 * np.log2(0.75) + 0.25 * np.log2(0.25))
        assert expected == pytest.approx(0.811278124459, abs=1e-12)
        assert q.von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(expected, abs=1e-12)

    def test_unitary_invariance(self, rng):
        for d in (2, 3, 5):
            rho = q.random_density(d, rng)
            u = q.random_unitary(d, rng)
            assert q.von_neumann_entropy(u @ rho @ u.conj().T) == pytest.approx(
                q.von_neumann_entropy(rho), abs=1e-9
            )


class TestFidelityAndDistance:
    def test_fidelity(self, rng):
        psi = q.haar_pure_state(2, rng)
        assert q.fidelity_to_pure(psi, q.projector(psi)) == pytest.approx(1, abs=1e-12)
        assert q.fidelity_to_pure(psi, q.I2 / 2) == pytest.approx(0.5, abs=1e-12)

    def test_fidelity_epsilon_final_state(self):
        rho_f = 0.5 * q.I2 / 2 + 0.5 * q.projector(KET0)
        assert q.fidelity_to_pure(KET0, rho_f) == pytest.approx(0.75, abs=1e-12)

    def test_fidelity_dimension(self):
        with pytest.raises(DimensionError):
            q.fidelity_to_pure(KET0, np.eye(3) / 3)

    def test_trace_distance(self, rng):
        rho = q.random_density(3, rng)
        assert q.trace_distance(rho, rho) == pytest.approx(0, abs=1e-12)
        assert q.trace_distance(q.projector(KET0), q.projector(KET1)) == pytest.approx(1)
        assert q.trace_distance(q.I2 / 2, q.projector(KET0)) == pytest.approx(0.5)
        with pytest.raises(DimensionError):
            q.trace_distance(q.I2, np.eye(3))


class TestHaar:
    def test_first_moment(self):
        r = np.random.default_rng(2)
        n, d = 20_000, 3
        acc = np.zeros((d, d), dtype=complex)
        for _ in range(n):
            acc += q.projector(q.haar_pure_state(d, r))
        assert np.linalg.norm(acc / n - np.eye(d) / d) <= 5 / np.sqrt(n)

    def test_expectation_of_fixed_operator(self):
        r = np.random.default_rng(3)
        sigma = q.random_density(2, r)
        vals = [q.fidelity_to_pure(q.haar_pure_state(2, r), sigma) for _ in range(10_000)]
        se = np.std(vals, ddof=1) / np.sqrt(len(vals))
        assert abs(np.mean(vals) - 0.5) <= 4 * se

    def test_deterministic(self):
        a = [q.haar_pure_state(2, np.random.default_rng(9)) for _ in range(1)]
        r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
        s1 = np.array([q.haar_pure_state(4, r1) for _ in range(50)])
        s2 = np.array([q.haar_pure_state(4, r2) for _ in range(50)])
        np.testing.assert_array_equal(s1, s2)
        assert np.isclose(np.linalg.norm(a[0]), 1)


class TestBloch:
    def test_examples(self):
        np.testing.assert_allclose(q.bloch_to_density((0, 0, 0)), q.I2 / 2)
        np.testing.assert_allclose(q.bloch_to_density((0, 0, 1)), q.projector(KET0))
        np.testing.assert_allclose(q.bloch_to_density((1, 0, 0)), q.projector(PLUS), atol=1e-15)

    def test_outside_ball(self):
        with pytest.raises(InvalidStateError):
            q.bloch_to_density((1, 1, 0))

    @given(st.floats(0, np.pi), st.floats(0, 2 * np.pi), st.floats(0, 1))
    def test_roundtrip(self, theta, phi, r):
        v = r * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
        back = q.density_to_bloch(q.bloch_to_density(v))
        np.testing.assert_allclose(back, v, atol=1e-12)

    def test_bloch_ket_convention(self):
        np.testing.assert_allclose(q.bloch_ket(0, 0), KET0)
        np.testing.assert_allclose(q.bloch_ket(np.pi / 2, 0), PLUS, atol=1e-15)


def test_as_density_rejects_invalid():
    with pytest.raises(InvalidStateError):
        q.as_density(np.diag([0.5, 0.6]))
    with pytest.raises(InvalidStateError):
        q.as_density(np.diag([1.2, -0.2]))
    with pytest.raises(InvalidStateError):
        q.as_pure([1, 1])


def test_hermitian_basis_orthonormal():
    for d in (2, 3, 4):
        b = q.hermitian_basis(d)
        gram = np.einsum("aij,bji->ab", b, b)
        np.testing.assert_allclose(gram, np.eye(d * d), atol=1e-14)
        for m in b:
            assert q.is_hermitian(m)


def test_every_density_helper_returns_valid_states(rng):
    for d in (2, 3, 4):
        q.as_density(q.random_density(d, rng))
        q.as_density(q.random_density(d, rng, rank=1))
        q.as_density(q.maximally_mixed(d))
