"""Small fixed-size tensor algebra on 3x3 arrays.

Second-order tensors are plain ``(3, 3)`` ndarrays, fourth-order tensors are
``(3, 3, 3, 3)`` ndarrays acting on second-order tensors by double
contraction over the trailing index pair::

    (T : X)_ij = T_ijkl X_kl

Product conventions used throughout the package::

    (A (x) B) : X = A tr(B X)        ->  dyad(A, B)_ijkl   = A_ij B_lk
    (A [.] B) : X = A X B            ->  square(A, B)_ijkl = A_ik B_lj

With these, the derivative of the inverse reads
``d(C^-1)/dC : Y = -(C^-1 [.] C^-1) : Y = -C^-1 Y C^-1``.

The scalar kernels (`det`, `inv`) work on ``tolist()`` copies: for 3x3
operands this is several times faster than the LAPACK-backed routines and
the driver calls them a few hundred thousand times per reference run.
"""
import math

import numpy as np

from .errors import NonPositiveDeterminant, NotSPD, SingularTensor

__all__ = [
    "I2", "I4", "P4",
    "trace", "det", "inv", "dev", "sym", "unimodular", "frobenius_norm",
    "expm", "sqrt_spd", "is_spd", "leading_minors",
    "dyad", "square", "contract4", "compose4", "dot24", "identity4",
    "dev_projector", "to_sym6", "from_sym6",
]

I2 = np.eye(3)
I2.flags.writeable = False

_EPS_FLOOR = 1e-14


def trace(A):
    return A[0, 0] + A[1, 1] + A[2, 2]


def det(A):
    (a, b, c), (d, e, f), (g, h, i) = A.tolist()
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def inv(A):
    """Inverse via the adjugate.

    Raises
    ------
    SingularTensor
        If ``det(A)`` is zero (or so small the adjugate overflows).
    """
    a, b, c, d, e, f, g, h, i = A.ravel().tolist()
    c00 = e * i - f * h
    c01 = f * g - d * i
    c02 = d * h - e * g
    dt = a * c00 + b * c01 + c * c02
    if dt == 0.0 or not math.isfinite(dt):
        raise SingularTensor(f"cannot invert tensor with det = {dt!r}")
    r = 1.0 / dt
    return np.array([
        c00 * r, (c * h - b * i) * r, (b * f - c * e) * r,
        c01 * r, (a * i - c * g) * r, (c * d - a * f) * r,
        c02 * r, (b * g - a * h) * r, (a * e - b * d) * r,
    ]).reshape(3, 3)


def dev(A):
    """Deviatoric part ``A - tr(A)/3 * 1``."""
    D = A.astype(float)
    D.flat[::4] -= (A[0, 0] + A[1, 1] + A[2, 2]) / 3.0
    return D


def sym(A):
    return 0.5 * (A + A.T)


def frobenius_norm(A):
    return math.sqrt(float(np.vdot(A, A)))


def unimodular(A):
    """Unimodular part ``det(A)^(-1/3) A``.

    Raises
    ------
    NonPositiveDeterminant
        If ``det(A) <= 0``.
    """
    d = det(A)
    if not d > 0.0:
        raise NonPositiveDeterminant(f"unimodular part needs det > 0, got {d!r}")
    return A * d ** (-1.0 / 3.0)


def leading_minors(A):
    (a, b, c), (d, e, f), (g, h, i) = A.tolist()
    return a, a * e - b * d, det(A)


def is_spd(A, rtol=1e-12):
    """Symmetric (to ``rtol`` of the norm) with all leading minors positive."""
    scale = max(frobenius_norm(A), _EPS_FLOOR)
    if frobenius_norm(A - A.T) > rtol * scale:
        return False
    return all(m > 0.0 for m in leading_minors(A))


def _pade_coefficients(m):
    return [
        math.factorial(2 * m - k) * math.factorial(m)
        / (math.factorial(2 * m) * math.factorial(k) * math.factorial(m - k))
        for k in range(m + 1)
    ]


# Degree m is accurate to double precision round-off for ||A||_1 <= theta_m
# (Higham 2005, backward-error bounds).
_PADE_THETA = (
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
)
_THETA_13 = 5.371920351148152e0
_PADE = {m: _pade_coefficients(m) for m in (3, 5, 7, 9, 13)}


def _pade(X, m):
    c = _PADE[m]
    X2 = np.dot(X, X)
    P = I2
    even = c[0] * I2
    odd = c[1] * I2
    for k in range(1, m // 2 + 1):
        P = np.dot(P, X2)
        even = even + c[2 * k] * P
        odd = odd + c[2 * k + 1] * P
    odd = np.dot(X, odd)
    return np.dot(inv(even - odd), even + odd)


def expm(A):
    """Matrix exponential by scaling and squaring with Pade approximants.

    The approximant degree is picked from the 1-norm of `A`; arguments with
    norm above the degree-13 threshold are scaled by a power of two first.
    """
    cols = np.abs(A).sum(axis=0).tolist()
    norm1 = max(cols)
    for m, theta in _PADE_THETA:
        if norm1 <= theta:
            return _pade(A, m)
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA_13))))
    R = _pade(A / 2.0 ** s, 13)
    for _ in range(s):
        R = np.dot(R, R)
    return R


def _jacobi_eigh(A, tol=1e-15, max_sweeps=50):
    """Cyclic Jacobi eigendecomposition of a symmetric 3x3 tensor.

    Returns eigenvalues ``w`` and orthogonal ``V`` with ``A = V diag(w) V^T``.
    """
    a = [list(row) for row in A.tolist()]
    v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    scale = sum(x * x for row in a for x in row)
    for _ in range(max_sweeps):
        off = a[0][1] ** 2 + a[0][2] ** 2 + a[1][2] ** 2
        if off <= tol * tol * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p][q]
            if apq == 0.0:
                continue
            theta = (a[q][q] - a[p][p]) / (2.0 * apq)
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            cs = 1.0 / math.sqrt(t * t + 1.0)
            sn = t * cs
            for k in range(3):
                akp, akq = a[k][p], a[k][q]
                a[k][p] = cs * akp - sn * akq
                a[k][q] = sn * akp + cs * akq
            for k in range(3):
                apk, aqk = a[p][k], a[q][k]
                a[p][k] = cs * apk - sn * aqk
                a[q][k] = sn * apk + cs * aqk
            for k in range(3):
                vkp, vkq = v[k][p], v[k][q]
                v[k][p] = cs * vkp - sn * vkq
                v[k][q] = sn * vkp + cs * vkq
    return np.array([a[0][0], a[1][1], a[2][2]]), np.array(v)


def sqrt_spd(A):
    """Symmetric positive definite square root.

    Raises
    ------
    NotSPD
        If `A` is not symmetric or a leading principal minor is not positive.
    """
    if not is_spd(A):
        raise NotSPD("square root requires a symmetric positive definite tensor")
    w, V = _jacobi_eigh(sym(A))
    if np.any(w <= 0.0):
        raise NotSPD(f"non-positive eigenvalue in {w}")
    return sym((V * np.sqrt(w)) @ V.T)


# -- fourth-order tensors ---------------------------------------------------

def dyad(A, B):
    """``A (x) B`` with ``(A (x) B) : X = A tr(B X)``."""
    return np.einsum("ij,lk->ijkl", A, B)


def square(A, B):
    """``A [.] B`` with ``(A [.] B) : X = A X B``."""
    return np.einsum("ik,lj->ijkl", A, B)


def contract4(T, X):
    """Double contraction ``T : X``."""
    return np.einsum("ijkl,kl->ij", T, X)


def compose4(T, U):
    """Composition ``(T : U) : X = T : (U : X)``."""
    return np.einsum("ijmn,mnkl->ijkl", T, U)


def dot24(A, T):
    """Left single contraction ``(A . T)_ijkl = A_im T_mjkl``."""
    return np.einsum("im,mjkl->ijkl", A, T)


def identity4():
    """``I`` with ``I : X = X``."""
    return square(I2, I2)


def dev_projector():
    """``P`` with ``P : X = dev(X)``."""
    return identity4() - dyad(I2, I2) / 3.0


I4 = identity4()
I4.flags.writeable = False
P4 = dev_projector()
P4.flags.writeable = False

_SYM6 = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))


def to_sym6(A):
    """Symmetric storage ``[A11, A22, A33, A23, A13, A12]``."""
    return np.array([A[i, j] for i, j in _SYM6])


def from_sym6(v):
    a11, a22, a33, a23, a13, a12 = v
    return np.array([[a11, a12, a13], [a12, a22, a23], [a13, a23, a33]], dtype=float)
