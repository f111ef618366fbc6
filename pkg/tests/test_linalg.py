import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_hermitian, random_matrix
from klmlab.errors import DimensionError, DomainError
from klmlab.linalg import (
    eig_hermitian,
    expm,
    matrix_sqrt,
    null_space,
    partial_transpose,
    tensor,
    trace_norm,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def brute_partial_transpose_a(rho, d_a, d_b):
    out = np.zeros_like(rho)
    for i in range(d_a):
        for j in range(d_b):
            for k in range(d_a):
                for l in range(d_b):
                    out[k * d_b + j, i * d_b + l] = rho[i * d_b + j, k * d_b + l]
    return out


class TestTensor:
    def test_identity(self):
        np.testing.assert_array_equal(tensor(np.eye(3), np.eye(3)), np.eye(9))

    def test_index_convention(self):
        raise_r = np.zeros((3, 3))
        raise_r[2, 0] = 1
        ket = np.zeros(9)
        ket[1] = 1  # |0>|1>
        out = tensor(raise_r, np.eye(3)) @ ket
        assert np.flatnonzero(out).tolist() == [7]  # |r>|1>

    def test_shape(self):
        assert tensor(np.ones((2, 2)), np.ones((3, 3))).shape == (6, 6)

    @given(seeds)
    def test_associative_integer(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (rng.integers(-5, 6, size=(2, 2)) for _ in range(3))
        np.testing.assert_array_equal(tensor(tensor(a, b), c), tensor(a, tensor(b, c)))


class TestPartialTranspose:
    def test_product_state(self, rng):
        rho_a = np.array([[0.7, 0.2], [0.2, 0.3]])
        rho_b = random_density(rng, 3)
        out = partial_transpose(tensor(rho_a, rho_b), (2, 3), "A")
        np.testing.assert_allclose(out, tensor(rho_a, rho_b), atol=1e-15)

    def test_bell_state_min_eigenvalue(self):
        psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        rho = np.outer(psi, psi)
        oracle = np.linalg.eigvalsh(brute_partial_transpose_a(rho, 2, 2)).min()
        assert oracle == pytest.approx(-0.5, abs=1e-15)
        assert np.linalg.eigvalsh(partial_transpose(rho, (2, 2))).min() == pytest.approx(-0.5, abs=1e-12)

    def test_matches_brute_force(self, rng):
        rho = random_matrix(rng, 6)
        np.testing.assert_array_equal(partial_transpose(rho, (2, 3), "A"), brute_partial_transpose_a(rho, 2, 3))

    def test_b_is_a_composed_with_full_transpose(self, rng):
        rho = random_matrix(rng, 9)
        np.testing.assert_array_equal(partial_transpose(rho, (3, 3), "B"), partial_transpose(rho, (3, 3), "A").T)

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            partial_transpose(np.eye(9), (2, 3))

    @given(seeds)
    def test_involution_trace_hermiticity(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_hermitian(rng, 9)
        pt = partial_transpose(rho, (3, 3))
        np.testing.assert_array_equal(partial_transpose(pt, (3, 3)), rho)
        assert np.trace(pt) == pytest.approx(np.trace(rho), abs=1e-12)
        np.testing.assert_allclose(pt, pt.conj().T, atol=1e-14)


class TestTraceNorm:
    def test_psd_equals_trace(self, rng):
        rho = random_density(rng, 5) * 3.0
        assert trace_norm(rho) == pytest.approx(3.0, abs=1e-12)

    def test_diag(self):
        assert trace_norm(np.diag([1.0, -1.0])) == pytest.approx(2.0)

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_against_svd_oracle(self, rng, n):
        a = random_matrix(rng, n)
        oracle = scipy.linalg.svd(a, compute_uv=False, lapack_driver="gesvd").sum()
        assert trace_norm(a) == pytest.approx(oracle, abs=1e-10)

    @given(seeds)
    @settings(max_examples=30)
    def test_density_matrix_unit(self, seed):
        rng = np.random.default_rng(seed)
        assert trace_norm(random_density(rng, 9)) == pytest.approx(1.0, abs=1e-12)


class TestMatrixSqrt:
    def test_identity(self):
        np.testing.assert_allclose(matrix_sqrt(np.eye(4)), np.eye(4), atol=1e-15)

    def test_diag(self):
        np.testing.assert_allclose(matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_round_trip(self, rng):
        a = random_density(rng, 9, rank=4) * 7.0
        s = matrix_sqrt(a)
        np.testing.assert_allclose(s @ s, a, atol=1e-9)
        np.testing.assert_allclose(s, s.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(s).min() > -1e-12

    def test_clamps_round_off(self):
        np.testing.assert_allclose(matrix_sqrt(np.diag([1.0, -5e-11])), np.diag([1.0, 0.0]))

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            matrix_sqrt(np.diag([1.0, -1e-3]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(DomainError):
            matrix_sqrt(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestExpm:
    def test_zero(self):
        np.testing.assert_array_equal(expm(np.zeros((3, 3))), np.eye(3))

    def test_diag(self):
        np.testing.assert_allclose(expm(np.diag([0.5, -2.0])), np.diag(np.exp([0.5, -2.0])), rtol=1e-14)

    def test_nilpotent(self):
        n = np.array([[0.0, 3.0], [0.0, 0.0]])
        # exact up to one ulp of the Pade rational evaluation
        np.testing.assert_allclose(expm(n), np.eye(2) + n, rtol=0, atol=4 * np.finfo(float).eps)

    @pytest.mark.parametrize("scale", [1.0, 1e2, 1e3])
    def test_unitary_against_eigen_oracle(self, rng, scale):
        h = random_hermitian(rng, 9)
        h *= scale / np.linalg.norm(h, 2)
        w, v = np.linalg.eigh(h)
        oracle = (v * np.exp(-1j * w)) @ v.conj().T
        got = expm(-1j * h)
        assert np.linalg.norm(got - oracle) / np.linalg.norm(oracle) < 1e-10

    def test_against_mpmath(self, rng):
        mpmath = pytest.importorskip("mpmath")
        a = random_matrix(rng, 4) * 2.0
        mpmath.mp.dps = 40
        ref = np.array(mpmath.expm(mpmath.matrix(a.tolist())).tolist(), dtype=complex)
        assert np.linalg.norm(expm(a) - ref) / np.linalg.norm(ref) < 1e-12

    @given(seeds, st.floats(min_value=0.1, max_value=10.0))
    @settings(max_examples=30)
    def test_inverse(self, seed, norm):
        rng = np.random.default_rng(seed)
        a = random_matrix(rng, 5)
        a *= norm / np.linalg.norm(a, 2)
        np.testing.assert_allclose(expm(a) @ expm(-a), np.eye(5), atol=1e-9)


class TestNullSpace:
    def test_singular_diag(self):
        (v,) = null_space(np.diag([1.0, 0.0]))
        assert abs(v[1]) == pytest.approx(1.0)
        assert abs(v[0]) < 1e-15

    def test_full_rank(self, rng):
        assert null_space(random_matrix(rng, 6)) == []

    @given(seeds, st.integers(min_value=1, max_value=7))
    @settings(max_examples=30)
    def test_rank_deficient_residual_and_orthonormality(self, seed, rank):
        rng = np.random.default_rng(seed)
        a = random_matrix(rng, 8, rank) @ random_matrix(rng, rank, 8)
        basis = null_space(a)
        assert len(basis) == 8 - rank
        for v in basis:
            assert np.linalg.norm(a @ v) < 1e-8
        gram = np.array([[np.vdot(u, v) for v in basis] for u in basis])
        np.testing.assert_allclose(gram, np.eye(len(basis)), atol=1e-10)


class TestEigHermitian:
    def test_identity(self):
        w, _ = eig_hermitian(np.eye(3))
        np.testing.assert_allclose(w, [1, 1, 1])

    def test_sorted(self):
        w, _ = eig_hermitian(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(w, [1, 2, 3])

    def test_reconstruction(self, rng):
        a = random_hermitian(rng, 9)
        w, v = eig_hermitian(a)
        assert np.linalg.norm(a - (v * w) @ v.conj().T) < 1e-9

    def test_rejects_non_hermitian(self):
        with pytest.raises(DomainError):
            eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
