import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _gen import random_spd, rel
from viscostep import tensor as t
from viscostep.errors import NonPositiveDeterminant, NotSPD, SingularTensor

finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)
mat3 = arrays(np.float64, (3, 3), elements=finite)


def mp_expm(A, dps=32):
    with mpmath.workdps(dps):
        E = mpmath.expm(mpmath.matrix(A.tolist()))
        return np.array([[float(E[i, j]) for j in range(3)] for i in range(3)])


class TestDev:
    def test_diagonal(self):
        np.testing.assert_array_equal(t.dev(np.diag([1.0, 2.0, 3.0])), np.diag([-1.0, 0.0, 1.0]))

    def test_identity(self):
        np.testing.assert_allclose(t.dev(np.eye(3)), 0.0, atol=1e-16)

    def test_does_not_mutate(self):
        A = np.diag([1.0, 2.0, 3.0])
        t.dev(A)
        np.testing.assert_array_equal(A, np.diag([1.0, 2.0, 3.0]))

    @given(mat3)
    def test_traceless(self, A):
        assert abs(t.trace(t.dev(A))) <= 1e-13 * max(np.linalg.norm(A), 1e-14)

    @given(mat3)
    def test_fixed_point_on_deviators(self, A):
        D = t.dev(A)
        np.testing.assert_allclose(t.dev(D), D, atol=1e-13 * max(np.linalg.norm(A), 1.0))


class TestUnimodular:
    def test_example(self):
        np.testing.assert_allclose(t.unimodular(np.diag([8.0, 1.0, 1.0])), np.diag([4.0, 0.5, 0.5]),
                                   rtol=1e-15)

    def test_scaled_identity(self):
        np.testing.assert_allclose(t.unimodular(2.0 * np.eye(3)), np.eye(3), rtol=1e-15)

    @pytest.mark.parametrize("A", [np.zeros((3, 3)), np.diag([-1.0, 1.0, 1.0]),
                                   np.diag([1.0, 2.0, 0.0])])
    def test_rejects_non_positive_det(self, A):
        with pytest.raises(NonPositiveDeterminant):
            t.unimodular(A)

    def test_det_and_idempotence(self, rng):
        for _ in range(100):
            A = random_spd(rng, 0.01, 50.0)
            U = t.unimodular(A)
            assert abs(t.det(U) - 1.0) <= 1e-12
            assert rel(t.unimodular(U), U) <= 1e-14


class TestScalarAlgebra:
    def test_det_inv_examples(self):
        assert t.det(np.diag([2.0, 3.0, 4.0])) == 24.0
        np.testing.assert_array_equal(t.inv(np.eye(3)), np.eye(3))

    def test_singular(self):
        with pytest.raises(SingularTensor):
            t.inv(np.ones((3, 3)))

    def test_inverse_against_lapack(self, rng):
        for _ in range(200):
            A = rng.standard_normal((3, 3))
            cond = np.linalg.cond(A)
            np.testing.assert_allclose(t.inv(A) @ A, np.eye(3), atol=1e-13 * cond)
            assert t.det(A) == pytest.approx(np.linalg.det(A), rel=1e-12 * cond)

    def test_frobenius(self):
        assert t.frobenius_norm(np.full((3, 3), 2.0)) == pytest.approx(6.0)

    @given(mat3, mat3)
    def test_trace_identities(self, A, B):
        scale = 1e-13 * max(np.linalg.norm(A) * np.linalg.norm(B), 1e-14)
        assert abs(t.trace(A @ B) - t.trace(B @ A)) <= scale
        assert abs(t.trace(A @ t.dev(B)) - t.trace(t.dev(A) @ B)) <= scale

    def test_leading_minors_and_spd(self):
        assert t.is_spd(np.diag([1.0, 2.0, 3.0]))
        assert not t.is_spd(np.diag([1.0, -2.0, 3.0]))
        assert not t.is_spd(np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))

    def test_sym6_roundtrip(self, rng):
        A = t.sym(random_spd(rng))
        v = t.to_sym6(A)
        np.testing.assert_array_equal(v, [A[0, 0], A[1, 1], A[2, 2], A[1, 2], A[0, 2], A[0, 1]])
        np.testing.assert_array_equal(t.from_sym6(v), A)


class TestExpm:
    def test_zero(self):
        np.testing.assert_array_equal(t.expm(np.zeros((3, 3))), np.eye(3))

    @pytest.mark.parametrize("d", [(0.1, -0.2, 0.3), (1.0, 2.0, -3.0), (-8.0, 0.5, 12.0)])
    def test_diagonal(self, d):
        np.testing.assert_allclose(t.expm(np.diag(d)), np.diag(np.exp(d)), rtol=1e-14)

    @pytest.mark.parametrize("scale", [1e-3, 0.1, 0.5, 1.5, 4.0, 20.0])
    def test_against_extended_precision(self, rng, scale):
        for _ in range(10):
            A = scale * rng.standard_normal((3, 3))
            ref = mp_expm(A)
            assert rel(t.expm(A), ref) <= 1e-13 * max(1.0, np.linalg.norm(A, 1))

    def test_traceless_det_one(self, rng):
        # integrator arguments are a dev(Cbar C_i^-1) with modest norm
        for _ in range(100):
            A = t.dev(rng.standard_normal((3, 3)))
            A *= rng.uniform(0.01, 1.0) / np.linalg.norm(A)
            assert abs(t.det(t.expm(A)) - 1.0) <= 1e-12

    def test_traceless_det_large_arguments(self, rng):
        # det of a correctly rounded exp(A) is itself only accurate to about
        # eps ||exp(A)||^3, so the bound scales with that
        eps = np.finfo(float).eps
        for _ in range(20):
            A = t.dev(rng.standard_normal((3, 3))) * 2.0
            E = t.expm(A)
            assert rel(E, mp_expm(A)) <= 1e-13 * np.linalg.norm(A, 1)
            assert abs(t.det(E) - 1.0) <= max(1e-12, 10.0 * eps * np.linalg.norm(E) ** 3)

    def test_inverse(self, rng):
        A = rng.standard_normal((3, 3))
        np.testing.assert_allclose(t.expm(A) @ t.expm(-A), np.eye(3), atol=1e-12)


class TestSqrt:
    def test_examples(self):
        np.testing.assert_array_equal(t.sqrt_spd(np.eye(3)), np.eye(3))
        np.testing.assert_allclose(t.sqrt_spd(np.diag([4.0, 9.0, 16.0])), np.diag([2.0, 3.0, 4.0]),
                                   rtol=1e-15)

    def test_against_eigh(self, rng):
        for _ in range(100):
            A = random_spd(rng, 0.01, 100.0)
            w, V = np.linalg.eigh(A)
            ref = (V * np.sqrt(w)) @ V.T
            B = t.sqrt_spd(A)
            assert rel(B @ B, A) <= 1e-12
            assert rel(B, ref) <= 1e-12
            np.testing.assert_array_equal(B, B.T)

    def test_repeated_eigenvalues(self, rng):
        Q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        A = Q @ np.diag([2.0, 2.0, 5.0]) @ Q.T
        B = t.sqrt_spd(A)
        assert rel(B @ B, A) <= 1e-12

    @pytest.mark.parametrize("A", [np.diag([1.0, 0.0, 1.0]), np.diag([1.0, 1.0, -1.0]),
                                   np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])])
    def test_rejects(self, A):
        with pytest.raises(NotSPD):
            t.sqrt_spd(A)


def brute_dyad(A, B):
    T = np.zeros((3, 3, 3, 3))
    for i, j, k, l in itertools.product(range(3), repeat=4):
        T[i, j, k, l] = A[i, j] * B[l, k]
    return T


def brute_contract(T, X):
    out = np.zeros((3, 3))
    for i, j, k, l in itertools.product(range(3), repeat=4):
        out[i, j] += T[i, j, k, l] * X[k, l]
    return out


class TestFourthOrder:
    def test_dyad_semantics(self, rng):
        for _ in range(100):
            A, B, X = rng.standard_normal((3, 3, 3))
            np.testing.assert_allclose(t.dyad(A, B), brute_dyad(A, B), rtol=0, atol=1e-15)
            np.testing.assert_allclose(brute_contract(t.dyad(A, B), X), A * np.trace(B @ X),
                                       atol=1e-12)

    def test_square_semantics(self, rng):
        for _ in range(100):
            A, B, X = rng.standard_normal((3, 3, 3))
            np.testing.assert_allclose(brute_contract(t.square(A, B), X), A @ X @ B, atol=1e-12)
            np.testing.assert_allclose(t.contract4(t.square(A, B), X), A @ X @ B, atol=1e-12)

    def test_compose_and_dot(self, rng):
        for _ in range(20):
            A, B, C, D, X = rng.standard_normal((5, 3, 3))
            T, U = t.square(A, B), t.dyad(C, D)
            lhs = t.contract4(t.compose4(T, U), X)
            np.testing.assert_allclose(lhs, brute_contract(T, brute_contract(U, X)), atol=1e-11)
            np.testing.assert_allclose(t.contract4(t.dot24(C, T), X), C @ brute_contract(T, X),
                                       atol=1e-11)

    def test_identity_and_projector(self, rng):
        for _ in range(20):
            X = rng.standard_normal((3, 3))
            np.testing.assert_array_equal(t.contract4(t.I4, X), X)
            assert abs(np.trace(t.contract4(t.P4, X))) <= 1e-13 * np.linalg.norm(X)

    def test_inverse_derivative_convention(self, rng):
        C = random_spd(rng)
        Y = rng.standard_normal((3, 3))
        Y = Y + Y.T
        h = 1e-6
        fd = (np.linalg.inv(C + h * Y) - np.linalg.inv(C - h * Y)) / (2 * h)
        Ci = t.inv(C)
        np.testing.assert_allclose(-t.contract4(t.square(Ci, Ci), Y), fd, rtol=1e-7, atol=1e-8)

    def test_constants_read_only(self):
        with pytest.raises(ValueError):
            t.I2[0, 0] = 2.0
