import math

import numpy as np
import pytest

from _gen import random_rotation, random_spd, random_unimodular_F, random_unimodular_spd, rel
from viscostep import tensor as t
from viscostep.errors import NonPositiveDeterminant, NotSPD
from viscostep.maxwell import (
    Kinematics,
    MaxwellParams,
    MaxwellState,
    elastic_left_cauchy_green,
    flow_rhs,
    flow_rhs_C,
    free_energy,
    free_energy_C,
    kirchhoff_from_be,
    overstress_2pk,
    overstress_2pk_C,
)

R2 = 1.0 / math.sqrt(2.0)
F2 = np.diag([2.0, R2, R2])
C2 = np.diag([4.0, 0.5, 0.5])
P = MaxwellParams(40.0, 400.0)


class TestParams:
    def test_tau(self):
        assert P.tau == 10.0

    @pytest.mark.parametrize("mu, eta", [(-1.0, 1.0), (1.0, 0.0), (1.0, -2.0), (math.nan, 1.0)])
    def test_rejects(self, mu, eta):
        with pytest.raises(ValueError):
            MaxwellParams(mu, eta)

    def test_infinite_viscosity_allowed(self):
        assert MaxwellParams(40.0, math.inf).tau == math.inf


class TestKinematics:
    def test_from_F(self):
        kin = Kinematics.from_F(F2)
        np.testing.assert_allclose(kin.C, C2, rtol=1e-15)
        assert kin.J == pytest.approx(1.0, abs=1e-15)

    def test_negative_det(self):
        with pytest.raises(NonPositiveDeterminant):
            Kinematics.from_F(np.diag([-1.0, 1.0, 1.0]))

    def test_from_C_roundtrip(self, rng):
        C = random_spd(rng)
        kin = Kinematics.from_C(C)
        assert rel(kin.F.T @ kin.F, C) <= 1e-13
        assert kin.J == pytest.approx(math.sqrt(np.linalg.det(C)), rel=1e-13)

    def test_fresh_state(self):
        s = MaxwellState.fresh()
        np.testing.assert_array_equal(s.C_i, np.eye(3))
        assert s.det_drift == 0.0


class TestOverstress:
    def test_undeformed(self):
        res = overstress_2pk(Kinematics.from_F(np.eye(3)), MaxwellState.fresh(), P)
        np.testing.assert_array_equal(res.T2pk, np.zeros((3, 3)))

    def test_elastic_strain_identity(self, rng):
        C_i = random_unimodular_spd(rng)
        np.testing.assert_allclose(overstress_2pk_C(C_i * 1.7, C_i, 40.0), 0.0, atol=1e-12)

    def test_tension_example(self):
        res = overstress_2pk(Kinematics.from_F(F2), MaxwellState.fresh(), P)
        np.testing.assert_allclose(res.T2pk, np.diag([70.0 / 3.0, -280.0 / 3.0, -280.0 / 3.0]),
                                   rtol=1e-14)

    def test_stress_measures(self, rng):
        for _ in range(50):
            kin = Kinematics.from_F(random_unimodular_F(rng) * rng.uniform(0.8, 1.2))
            res = overstress_2pk(kin, MaxwellState(random_unimodular_spd(rng)), P)
            assert rel(res.S, kin.F @ res.T2pk @ kin.F.T) <= 1e-12
            assert rel(res.T, res.S / kin.J) <= 1e-12
            for A in (res.T2pk, res.S, res.T):
                assert rel(A, A.T) <= 1e-12
            assert abs(np.trace(res.S)) <= 1e-12 * np.linalg.norm(res.S)

    def test_isotropy(self, rng):
        for _ in range(50):
            C, C_i, Q = random_spd(rng), random_unimodular_spd(rng), random_rotation(rng)
            lhs = overstress_2pk_C(Q.T @ C @ Q, Q.T @ C_i @ Q, 40.0)
            assert rel(lhs, Q.T @ overstress_2pk_C(C, C_i, 40.0) @ Q) <= 1e-12


class TestFreeEnergy:
    def test_examples(self):
        assert free_energy_C(np.eye(3), np.eye(3), 40.0) == 0.0
        assert free_energy(Kinematics.from_F(F2), MaxwellState.fresh(), P) == pytest.approx(40.0, rel=1e-14)

    def test_zero_at_relaxed_state(self, rng):
        C_i = random_unimodular_spd(rng)
        assert free_energy_C(C_i, C_i, 40.0) == pytest.approx(0.0, abs=1e-12)

    def test_non_negative(self, rng):
        for _ in range(200):
            assert free_energy_C(random_spd(rng), random_unimodular_spd(rng), 40.0) >= -1e-12

    def test_stress_is_energy_derivative(self, rng):
        C, C_i = random_spd(rng), random_unimodular_spd(rng)
        h = 1e-6
        D = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                E = np.zeros((3, 3))
                E[i, j] += 0.5 * h
                E[j, i] += 0.5 * h
                D[i, j] = (free_energy_C(C + E, C_i, 40.0) - free_energy_C(C - E, C_i, 40.0)) / (2 * h)
        assert rel(2.0 * D, overstress_2pk_C(C, C_i, 40.0)) <= 1e-8


class TestFlow:
    def test_equilibrium(self, rng):
        C_i = random_unimodular_spd(rng)
        np.testing.assert_allclose(flow_rhs_C(C_i, C_i, 40.0, 400.0), 0.0, atol=1e-14)
        np.testing.assert_array_equal(flow_rhs_C(np.eye(3), np.eye(3), 40.0, 400.0), 0.0)

    def test_example(self):
        rhs = flow_rhs(Kinematics.from_F(F2), MaxwellState.fresh(), P)
        np.testing.assert_allclose(rhs, 0.1 * np.diag([7.0 / 3.0, -7.0 / 6.0, -7.0 / 6.0]), rtol=1e-14)

    def test_tangent_to_unimodular_manifold(self, rng):
        for _ in range(100):
            C_i = random_unimodular_spd(rng)
            rhs = flow_rhs_C(random_spd(rng), C_i, 40.0, 400.0)
            assert abs(np.trace(np.linalg.solve(C_i, rhs))) <= 1e-12 * max(np.linalg.norm(rhs), 1.0)

    def test_dissipation(self, rng):
        # d/ds psi(C, C_i + s rhs) at s = 0 must be non-positive
        for _ in range(1000):
            C, C_i = random_spd(rng), random_unimodular_spd(rng)
            rhs = flow_rhs_C(C, C_i, 40.0, 400.0)
            Ci_inv = t.inv(C_i)
            rate = -0.5 * 40.0 * np.trace(t.unimodular(C) @ Ci_inv @ rhs @ Ci_inv)
            assert rate <= 1e-12


class TestEulerian:
    def test_examples(self):
        np.testing.assert_array_equal(kirchhoff_from_be(np.eye(3), 40.0), np.zeros((3, 3)))
        np.testing.assert_allclose(kirchhoff_from_be(3.7 * np.eye(3), 40.0), 0.0, atol=1e-13)
        np.testing.assert_allclose(kirchhoff_from_be(C2, 40.0),
                                   np.diag([280.0 / 3.0, -140.0 / 3.0, -140.0 / 3.0]), rtol=1e-14)

    def test_rejects_non_spd(self):
        with pytest.raises(NotSPD):
            kirchhoff_from_be(np.diag([1.0, -1.0, 1.0]), 40.0)

    def test_matches_lagrangian(self, rng):
        for _ in range(100):
            kin = Kinematics.from_F(random_unimodular_F(rng) * rng.uniform(0.8, 1.2))
            C_i = random_unimodular_spd(rng)
            S = kirchhoff_from_be(elastic_left_cauchy_green(kin.F, C_i), 40.0)
            ref = overstress_2pk(kin, MaxwellState(C_i), P).S
            assert rel(S, ref) <= 1e-12
