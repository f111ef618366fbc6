import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_unitary
from klmlab.errors import DimensionError, DomainError
from klmlab.linalg import ket_to_dm, tensor
from klmlab.measures import fidelity, measure_all, negativity, population, purity
from klmlab.model import (
    BASIS_LABELS,
    RYDBERG_LABELS,
    basis_ket,
    complement_states,
    initial_mixed_state,
    klm_state,
    target_states,
)

seeds = st.integers(0, 2**32 - 1)
RHO0 = initial_mixed_state(0.3, 0.15, 0.45, 0.1)


def brute_negativity(rho):
    pt = np.zeros_like(rho)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    pt[k * 3 + j, i * 3 + l] = rho[i * 3 + j, k * 3 + l]
    w = np.linalg.eigvalsh(pt)
    return -w[w < 0].sum()


class TestNegativity:
    def test_product_states(self, rng):
        for a in BASIS_LABELS:
            assert negativity(ket_to_dm(basis_ket(a))) == 0.0
        rho = tensor(random_density(rng, 3), random_density(rng, 3))
        assert negativity(rho) == pytest.approx(0.0, abs=1e-12)

    def test_klm(self):
        assert negativity(ket_to_dm(klm_state(1.0))) == pytest.approx(1 / 3, abs=1e-12)

    @pytest.mark.parametrize("m", [0.0, 0.5, 1.0, 2.0, 3.0])
    def test_general_klm(self, m):
        rho = ket_to_dm(klm_state(m))
        # product of Schmidt coefficients = |det| of the 2x2 amplitude matrix
        coeffs = np.array([[1.0, 0.0], [m, 1.0]]) / math.sqrt(2 + m * m)
        schmidt = np.linalg.svd(coeffs, compute_uv=False)
        assert schmidt.prod() == pytest.approx(1 / (2 + m * m), abs=1e-14)
        assert brute_negativity(rho) == pytest.approx(1 / (2 + m * m), abs=1e-12)
        assert negativity(rho) == pytest.approx(1 / (2 + m * m), abs=1e-12)

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            negativity(np.eye(9) / 9, (2, 3))

    @given(seeds)
    @settings(max_examples=25)
    def test_local_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(rng, 9, rank=2)
        u = tensor(random_unitary(rng, 3), random_unitary(rng, 3))
        rotated = u @ rho @ u.conj().T
        assert negativity(rotated) == pytest.approx(negativity(rho), abs=1e-9)
        assert 0.0 <= negativity(rho) <= 1.0
        assert negativity(rho) == pytest.approx(brute_negativity(rho), abs=1e-10)


class TestPurity:
    def test_pure(self, rng):
        psi = rng.normal(size=9) + 1j * rng.normal(size=9)
        assert purity(ket_to_dm(psi / np.linalg.norm(psi))) == pytest.approx(1.0)

    def test_ground_mixture(self):
        assert purity(initial_mixed_state(0.25, 0.25, 0.25, 0.25)) == pytest.approx(0.25)

    def test_bounds(self):
        assert purity(np.eye(9) / 9) == pytest.approx(1 / 9)

    @given(seeds, st.floats(0.0, 1.0))
    @settings(max_examples=30)
    def test_convex(self, seed, lam):
        rng = np.random.default_rng(seed)
        r1, r2 = random_density(rng, 9), random_density(rng, 9)
        mix = lam * r1 + (1 - lam) * r2
        assert purity(mix) <= lam * purity(r1) + (1 - lam) * purity(r2) + 1e-12


class TestPopulation:
    def test_basis(self):
        assert population(RHO0, basis_ket("00")) == pytest.approx(0.3)

    def test_klm_on_itself(self):
        assert population(ket_to_dm(klm_state()), klm_state()) == pytest.approx(1.0)

    def test_klm_on_mixture(self):
        assert population(RHO0, klm_state()) == pytest.approx((0.3 + 0.15 + 0.45) / 3, abs=1e-15)

    @given(seeds)
    @settings(max_examples=25)
    def test_orthonormal_basis_sums_to_one(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(rng, 9)
        u = random_unitary(rng, 9)
        assert sum(population(rho, u[:, k]) for k in range(9)) == pytest.approx(1.0, abs=1e-9)

    def test_klm_basis_completeness(self, rng):
        rho = random_density(rng, 9)
        total = sum(population(rho, e) for e in target_states(1.0).values())
        total += sum(population(rho, basis_ket(lbl)) for lbl in RYDBERG_LABELS)
        assert total == pytest.approx(1.0, abs=1e-9)


class TestFidelity:
    def test_self(self):
        rho = ket_to_dm(klm_state())
        assert fidelity(rho, rho) == pytest.approx(1.0)
        assert fidelity(rho, rho, general=True) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal(self):
        a, b = ket_to_dm(basis_ket("00")), ket_to_dm(basis_ket("11"))
        assert fidelity(a, b) == 0.0
        assert fidelity(a, b, general=True) == pytest.approx(0.0, abs=1e-9)

    def test_mixture_to_klm(self):
        target = ket_to_dm(klm_state())
        assert fidelity(RHO0, target) == pytest.approx(math.sqrt(0.3), abs=1e-14)
        assert fidelity(RHO0, target, general=True) == pytest.approx(math.sqrt(0.3), abs=1e-9)
        assert fidelity(RHO0, klm_state()) == pytest.approx(math.sqrt(0.3), abs=1e-14)

    @given(seeds)
    @settings(max_examples=25)
    def test_paths_agree_for_pure_target(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(rng, 9)
        psi = random_unitary(rng, 9)[:, 0]
        target = ket_to_dm(psi)
        assert fidelity(rho, target) == pytest.approx(fidelity(rho, target, general=True), abs=1e-9)

    @given(seeds)
    @settings(max_examples=25)
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        r1, r2 = random_density(rng, 9, rank=3), random_density(rng, 9)
        f = fidelity(r1, r2)
        assert f == pytest.approx(fidelity(r2, r1), abs=1e-9)
        assert 0.0 <= f <= 1.0

    def test_rejects_non_psd(self):
        with pytest.raises(DomainError):
            fidelity(np.diag([1.2, -0.2]), np.diag([1.0, 0.0]))


def test_measure_all():
    rec = measure_all(RHO0, 0.0, target_states(), klm_state())
    assert rec.purity == pytest.approx(0.325)
    assert rec.negativity == 0.0
    assert rec.populations["E1"] == pytest.approx(0.3)
    assert rec.fidelity == pytest.approx(math.sqrt(0.3))
    e2, _, _ = complement_states()
    assert rec.populations["E2"] == pytest.approx(population(RHO0, e2))
