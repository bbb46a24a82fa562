"""Finite strain Maxwell element with Neo-Hookean elastic potential.

Lagrangian form: the internal variable is the inelastic right Cauchy-Green
tensor ``C_i`` (symmetric, unimodular, positive definite). With
``Cbar = unimodular(C)``::

    psi      = mu/2 (tr(Cbar C_i^-1) - 3)
    T2pk     = mu C^-1 dev(Cbar C_i^-1)
    dC_i/dt  = mu/eta dev(Cbar C_i^-1) C_i

The mass density in the reference configuration is fixed to one, so the free
energy is reported per unit reference volume.
"""
from dataclasses import dataclass

import numpy as np

from . import tensor as t
from .errors import NonPositiveDeterminant, NotSPD


@dataclass(frozen=True)
class MaxwellParams:
    """Shear modulus ``mu`` [MPa] and viscosity ``eta`` [MPa s]."""

    mu: float
    eta: float

    def __post_init__(self):
        if not self.mu >= 0.0:
            raise ValueError(f"mu must be >= 0, got {self.mu!r}")
        if not self.eta > 0.0:
            raise ValueError(f"eta must be > 0, got {self.eta!r}")

    @property
    def tau(self):
        """Relaxation time ``eta / mu`` [s]."""
        return self.eta / self.mu if self.mu > 0 else float("inf")


@dataclass(frozen=True)
class Kinematics:
    """Deformation gradient with its derived right Cauchy-Green tensor and J."""

    F: np.ndarray
    C: np.ndarray
    J: float

    @classmethod
    def from_F(cls, F):
        F = np.asarray(F, dtype=float)
        J = t.det(F)
        if not J > 0.0:
            raise NonPositiveDeterminant(f"det F = {J!r}")
        return cls(F=F, C=F.T @ F, J=J)

    @classmethod
    def from_C(cls, C):
        """Kinematics for a given ``C``, using ``F = sqrt(C)`` (stretch only)."""
        C = np.asarray(C, dtype=float)
        F = t.sqrt_spd(C)
        return cls(F=F, C=C, J=t.det(F))


@dataclass(frozen=True)
class MaxwellState:
    """Inelastic right Cauchy-Green tensor."""

    C_i: np.ndarray

    @classmethod
    def fresh(cls):
        return cls(np.eye(3))

    @property
    def det_drift(self):
        return abs(t.det(self.C_i) - 1.0)


@dataclass(frozen=True)
class StressResult:
    T2pk: np.ndarray
    S: np.ndarray
    T: np.ndarray


def push_forward(kin, T2pk):
    """Kirchhoff and Cauchy stress from the 2nd Piola-Kirchhoff stress."""
    S = kin.F @ T2pk @ kin.F.T
    return S, S / kin.J


def overstress_2pk_C(C, C_i, mu):
    """``mu C^-1 dev(Cbar C_i^-1)`` for plain arrays."""
    Cbar = t.unimodular(C)
    return mu * (t.inv(C) @ t.dev(Cbar @ t.inv(C_i)))


def overstress_2pk(kin, state, p):
    T2pk = overstress_2pk_C(kin.C, state.C_i, p.mu)
    S, T = push_forward(kin, T2pk)
    return StressResult(T2pk=T2pk, S=S, T=T)


def free_energy_C(C, C_i, mu):
    return 0.5 * mu * (t.trace(t.unimodular(C) @ t.inv(C_i)) - 3.0)


def free_energy(kin, state, p):
    """Stored energy per unit reference volume [MPa]."""
    return free_energy_C(kin.C, state.C_i, p.mu)


def flow_rhs_C(C, C_i, mu, eta):
    Cbar = t.unimodular(C)
    return (mu / eta) * (t.dev(Cbar @ t.inv(C_i)) @ C_i)


def flow_rhs(kin, state, p):
    """Rate of the inelastic right Cauchy-Green tensor."""
    return flow_rhs_C(kin.C, state.C_i, p.mu, p.eta)


def kirchhoff_from_be(B_e, mu):
    """Eulerian Neo-Hookean Kirchhoff stress ``mu dev(unimodular(B_e))``."""
    if not t.is_spd(B_e):
        raise NotSPD("elastic left Cauchy-Green tensor must be SPD")
    return mu * t.dev(t.unimodular(B_e))


def elastic_left_cauchy_green(F, C_i):
    """``B_e = F C_i^-1 F^T``."""
    return F @ t.inv(C_i) @ F.T
