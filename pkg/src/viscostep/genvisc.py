"""Generalized viscoelastic solid: Yeoh equilibrium spring plus Maxwell branches.

Free energy per unit reference volume::

    psi = sum_n c_n0 (tr Cbar - 3)^n + 9k/2 (J^(1/3) - 1)^2
          + sum_m mu_m/2 (tr(Cbar C_i,m^-1) - 3)

Each branch evolves by its own Maxwell flow rule and is updated
independently of the others.
"""
from dataclasses import dataclass, field

import numpy as np

from . import tensor as t
from .integrators import advance
from .maxwell import MaxwellParams, MaxwellState, free_energy_C, overstress_2pk_C


@dataclass(frozen=True)
class GenViscParams:
    c10: float
    c20: float
    c30: float
    k: float
    branches: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.k > 0.0:
            raise ValueError(f"bulk modulus must be positive, got {self.k!r}")
        object.__setattr__(self, "branches", tuple(self.branches))

    @classmethod
    def defaults(cls):
        """Rubber-like parameter set with four branches, tau_m = 10^(m-2) s."""
        return cls(c10=0.45, c20=-0.048, c30=0.011, k=1000.0,
                   branches=tuple(MaxwellParams(0.2, 2.0 * 10.0 ** (m - 3)) for m in range(1, 5)))

    def without_branches(self):
        return GenViscParams(self.c10, self.c20, self.c30, self.k, ())


@dataclass(frozen=True)
class GenViscState:
    C_i_m: tuple

    @classmethod
    def fresh(cls, p):
        return cls(tuple(np.eye(3) for _ in p.branches))

    def branch(self, m):
        return MaxwellState(self.C_i_m[m])


def _yeoh_slope(p, I1bar):
    x = I1bar - 3.0
    return 2.0 * p.c10 + 4.0 * p.c20 * x + 6.0 * p.c30 * x * x


def equilibrium_stress(kin, p):
    """2nd Piola-Kirchhoff stress of the equilibrium spring."""
    C = kin.C
    Cinv = t.inv(C)
    Cbar = t.unimodular(C)
    j3 = kin.J ** (1.0 / 3.0)
    return (_yeoh_slope(p, t.trace(Cbar)) * (t.dev(Cbar) @ Cinv)
            + 3.0 * p.k * j3 * (j3 - 1.0) * Cinv)


def total_stress(kin, state, p):
    """Equilibrium plus all branch overstresses (2nd Piola-Kirchhoff)."""
    T = equilibrium_stress(kin, p)
    for C_i, branch in zip(state.C_i_m, p.branches):
        T = T + overstress_2pk_C(kin.C, C_i, branch.mu)
    return T


def equilibrium_free_energy(kin, p):
    x = t.trace(t.unimodular(kin.C)) - 3.0
    j3 = kin.J ** (1.0 / 3.0)
    return p.c10 * x + p.c20 * x ** 2 + p.c30 * x ** 3 + 4.5 * p.k * (j3 - 1.0) ** 2


def total_free_energy(kin, state, p):
    psi = equilibrium_free_energy(kin, p)
    for C_i, branch in zip(state.C_i_m, p.branches):
        psi += free_energy_C(kin.C, C_i, branch.mu)
    return psi


def step(state, C_np1, dt, p, integrator="ebmsc", em_solver="fixed-point"):
    """Advance every branch independently to the end of the step."""
    return GenViscState(tuple(
        advance(integrator, C_i, C_np1, dt, branch, em_solver=em_solver)[0]
        for C_i, branch in zip(state.C_i_m, p.branches)
    ))
