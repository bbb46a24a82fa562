"""Consistent tangent of the closed-form Maxwell update.

The algorithmic stress as a function of the current right Cauchy-Green
tensor, for fixed ``C_i_n`` and ``dt``, is::

    T1(C) = mu C^-1 dev(Cbar C_i(C)^-1),   C_i(C) = unimodular(C_i_n + a Cbar)

Its derivative is assembled by the chain
``dPhi/dC -> dC_i/dC -> d(C_i^-1)/dC -> dT1/dC`` using the product
conventions of `viscostep.tensor`. The result is symmetrized in the last
index pair, which is the representation of the derivative on symmetric
increments.
"""
from dataclasses import dataclass

import numpy as np

from . import tensor as t
from .integrators import step_ebmsc
from .maxwell import overstress_2pk_C


@dataclass(frozen=True)
class TangentResult:
    dT_dC: np.ndarray
    symmetric_defect: float


def minor_symmetrize(T):
    """Symmetrize both index pairs of a fourth-order tensor."""
    T = 0.5 * (T + T.transpose(0, 1, 3, 2))
    return 0.5 * (T + T.transpose(1, 0, 2, 3))


def major_symmetry_defect(T):
    """``max |X:T:Y - Y:T:X| / ||T||`` over unit symmetric basis probes."""
    Ts = minor_symmetrize(T)
    scale = max(float(np.sqrt(np.sum(Ts * Ts))), 1e-300)
    return float(np.max(np.abs(Ts - Ts.transpose(2, 3, 0, 1)))) / scale


def _frozen_terms(C, Cinv, Ci_inv, mu):
    # derivative of mu C^-1 dev(Cbar Ci^-1) with Ci held fixed, except for
    # the dCi^-1/dC contribution, which is added by the caller
    J23 = t.det(C) ** (-1.0 / 3.0)
    Cbar = J23 * C
    M = t.dev(Cbar @ Ci_inv)
    first = -mu * t.square(Cinv, Cinv @ M)
    brace = -t.dyad(t.dev(C @ Ci_inv), Cinv) / 3.0 + t.compose4(t.P4, t.square(t.I2, Ci_inv))
    return first + mu * J23 * t.dot24(Cinv, brace), J23


def hyperelastic_tangent(C, C_i, mu):
    """Tangent of ``mu C^-1 dev(Cbar C_i^-1)`` with ``C_i`` frozen."""
    Cinv = t.inv(C)
    T, _ = _frozen_terms(C, Cinv, t.inv(C_i), mu)
    return 0.5 * (T + T.transpose(0, 1, 3, 2))


def consistent_tangent(C, C_i_n, p, dt):
    """Derivative of the algorithmic 2nd Piola-Kirchhoff stress w.r.t. ``C``.

    Parameters
    ----------
    C : ndarray
        Right Cauchy-Green tensor at the end of the step (SPD).
    C_i_n : ndarray
        Inelastic state at the start of the step.
    p : viscostep.maxwell.MaxwellParams
    dt : float

    Returns
    -------
    TangentResult
    """
    a = dt * p.mu / p.eta
    Cinv = t.inv(C)
    detC = t.det(C)
    J23 = detC ** (-1.0 / 3.0)
    Cbar = J23 * C
    Phi = C_i_n + a * Cbar
    Phi_inv = t.inv(Phi)
    C_i = t.unimodular(Phi)
    Ci_inv = t.inv(C_i)

    dPhi = a * J23 * (t.I4 - t.dyad(C, Cinv) / 3.0)
    dCi = t.det(Phi) ** (-1.0 / 3.0) * t.compose4(t.I4 - t.dyad(Phi, Phi_inv) / 3.0, dPhi)
    dCi_inv = -t.compose4(t.square(Ci_inv, Ci_inv), dCi)

    frozen, _ = _frozen_terms(C, Cinv, Ci_inv, p.mu)
    viscous = p.mu * J23 * t.dot24(Cinv, t.compose4(t.P4, t.dot24(C, dCi_inv)))
    T = frozen + viscous
    T = 0.5 * (T + T.transpose(0, 1, 3, 2))
    return TangentResult(dT_dC=T, symmetric_defect=major_symmetry_defect(T))


def algorithmic_stress(C, C_i_n, p, dt):
    """The stress map differentiated by `consistent_tangent`."""
    return overstress_2pk_C(C, step_ebmsc(C_i_n, C, dt, p), p.mu)


def fd_tangent(stress_map, C, h):
    """Central-difference derivative of ``stress_map`` on symmetric ``C``.

    Off-diagonal components are perturbed in mirrored pairs so that every
    probe stays symmetric; the result is symmetric in its last index pair.
    """
    D = np.zeros((3, 3, 3, 3))
    for k in range(3):
        for l in range(k, 3):
            E = np.zeros((3, 3))
            E[k, l] = E[l, k] = h
            dT = (stress_map(C + E) - stress_map(C - E)) / (2.0 * h)
            if k == l:
                D[:, :, k, k] = dT
            else:
                D[:, :, k, l] = D[:, :, l, k] = 0.5 * dT
    return D


def relative_deviation(A, B):
    """``||A - B|| / ||B||`` for arrays of any shape."""
    return float(np.linalg.norm(A - B) / max(np.linalg.norm(B), 1e-300))

