"""One-step updates of the inelastic right Cauchy-Green tensor.

Every integrator maps ``(C_i_n, C_np1, dt)`` to ``C_i_np1`` for a Maxwell
element with parameters ``p``. ``dt == 0`` is an identity step for all of
them. Abbreviation used below: ``a = dt * mu / eta``.

ebmsc
    Euler-backward with subsequent unimodular correction. Closed form,
    ``C_i_np1 = unimodular(C_i_n + a * unimodular(C_np1))``.
ebm
    Classical Euler-backward. Closed form (`step_ebm_closed`) plus a Newton
    solve of the discrete equation (`step_ebm_iterative`) kept as an oracle.
    Does not preserve ``det C_i = 1``.
em
    Exponential mapping, ``C_i_np1 = expm(a dev(Cbar C_i_np1^-1)) C_i_n``.
    Solved by damped fixed point (default) or by a Newton iteration on the
    principal logarithmic strains after reducing to ``C_i_n = 1``.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import tensor as t
from .errors import DegenerateStep, NoConvergence, NonPositiveDeterminant, SingularTensor
from .maxwell import MaxwellParams

METHODS = ("ebmsc", "ebm", "em")

EM_TOL = 1e-12
EM_MAX_SWEEPS = 200
EM_DAMPING = 0.5
EM_DAMPED_SWEEPS = 3


@dataclass(frozen=True)
class StepInput:
    C_i_n: np.ndarray
    C_np1: np.ndarray
    dt: float
    params: MaxwellParams

    def __post_init__(self):
        if not self.dt >= 0.0:
            raise ValueError(f"dt must be >= 0, got {self.dt!r}")
        if not t.det(self.C_np1) > 0.0:
            raise ValueError("det C_np1 must be positive")


@dataclass(frozen=True)
class StepDiagnostics:
    det_drift: float
    iterations: int = 0
    residual: float = 0.0


def _a(dt, p):
    return dt * p.mu / p.eta


def step_ebmsc(C_i_n, C_np1, dt, p):
    """Closed-form Euler-backward step with unimodular correction.

    No local iteration; well defined and positive definite for every
    ``dt >= 0``.
    """
    a = _a(dt, p)
    if a == 0.0:
        return C_i_n.copy()
    return t.unimodular(C_i_n + a * t.unimodular(C_np1))


def step_ebm_closed(C_i_n, C_np1, dt, p):
    """Closed-form classical Euler-backward step.

    Returns
    -------
    C_i : ndarray
        ``(1 - a/3 tr(Cbar Phi^-1)) Phi`` with ``Phi = C_i_n + a Cbar``.
    diag : StepDiagnostics

    Raises
    ------
    DegenerateStep
        If the scalar prefactor is not positive.
    """
    a = _a(dt, p)
    if a == 0.0:
        return C_i_n.copy(), StepDiagnostics(abs(t.det(C_i_n) - 1.0))
    Cbar = t.unimodular(C_np1)
    Phi = C_i_n + a * Cbar
    factor = 1.0 - (a / 3.0) * t.trace(Cbar @ t.inv(Phi))
    if not factor > 0.0:
        raise DegenerateStep(f"Euler-backward prefactor {factor:.6g} <= 0 (a = {a:.6g})")
    C_i = factor * Phi
    return C_i, StepDiagnostics(abs(t.det(C_i) - 1.0))


def _ebm_residual(X, C_i_n, Cbar, a):
    return X - C_i_n - a * (t.dev(Cbar @ t.inv(X)) @ X)


def step_ebm_iterative(C_i_n, C_np1, dt, p, tol=1e-12, max_iter=200):
    """Newton solve of the classical Euler-backward equation.

    Solves ``X = C_i_n + a dev(Cbar X^-1) X`` on all nine components. Used as
    an independent check of `step_ebm_closed`. Converges from ``X = C_i_n``
    for ``a`` up to at least 10 on random admissible inputs.

    Returns
    -------
    X : ndarray
    diag : StepDiagnostics
    """
    a = _a(dt, p)
    Cbar = t.unimodular(C_np1)
    X = C_i_n.copy()
    scale = max(t.frobenius_norm(C_i_n), 1e-14)
    for it in range(1, max_iter + 1):
        R = _ebm_residual(X, C_i_n, Cbar, a)
        res = t.frobenius_norm(R) / scale
        if res <= tol:
            return X, StepDiagnostics(abs(t.det(X) - 1.0), it, res)
        Xi = t.inv(X)
        tr = t.trace(Cbar @ Xi)
        g = (Xi @ Cbar @ Xi).T.ravel()
        J = (1.0 + a * tr / 3.0) * np.eye(9) - (a / 3.0) * np.outer(X.ravel(), g)
        X = X - np.linalg.solve(J, R.ravel()).reshape(3, 3)
    raise NoConvergence(f"Euler-backward Newton: no convergence in {max_iter} iterations",
                        max_iter, res)


def _em_fixed_point(C_i_n, Cbar, a, tol, max_sweeps):
    X = C_i_n
    res = float("inf")
    for sweep in range(1, max_sweeps + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                G = t.expm(a * t.dev(Cbar @ t.inv(X))) @ C_i_n
                res = t.frobenius_norm(G - X) / t.frobenius_norm(X)
        except (SingularTensor, FloatingPointError):
            res = float("nan")
            break
        if res <= tol:
            return t.sym(G), sweep, res
        if not math.isfinite(res):
            break
        w = EM_DAMPING if sweep <= EM_DAMPED_SWEEPS else 1.0
        X = t.sym(X + w * (G - X))
    raise NoConvergence(
        f"exponential map fixed point: no convergence after {sweep} sweeps "
        f"(a = {a:.6g}, residual {res:.3e})", sweep, res)


def _em_spectral(C_i_n, Cbar, a, tol, max_iter):
    # Reduce to C_i_n = 1 by the reference change F0 = sqrt(C_i_n); the
    # solution is then coaxial with the transformed Cbar and the problem is
    # three scalar equations in the principal log strains y (sum y = 0):
    #     y = a dev(c exp(-y))
    # i.e. the stationarity condition of the convex 0.5|y|^2 + a sum c exp(-y).
    F0 = t.sqrt_spd(C_i_n)
    F0i = t.inv(F0)
    Cp = t.sym(F0i @ Cbar @ F0i)
    c, Q = t._jacobi_eigh(Cp)
    y = np.zeros(3)

    def potential(y):
        with np.errstate(over="ignore"):
            return 0.5 * y @ y + a * np.sum(c * np.exp(-y))

    res = float("inf")
    for it in range(1, max_iter + 1):
        d = c * np.exp(-y)
        r = y - a * (d - d.sum() / 3.0)
        # relative to the size of the terms that cancel in r
        res = float(np.max(np.abs(r))) / max(1.0, float(np.max(np.abs(y))), a * float(np.max(d)))
        if res <= tol:
            X = (Q * np.exp(y)) @ Q.T
            return t.sym(F0 @ X @ F0), it, res
        J = np.eye(3) + a * (np.diag(d) - np.outer(np.ones(3), d) / 3.0)
        step = np.linalg.solve(J, -r)
        step -= step.mean()
        phi0 = potential(y)
        # near the root the decrease drops below round-off of the potential
        slack = 1e-13 * max(abs(phi0), 1.0)
        lam = 1.0
        while lam > 1e-12:
            trial = y + lam * step
            if potential(trial) <= phi0 + slack:
                break
            lam *= 0.5
        y = trial
    raise NoConvergence(f"exponential map Newton: no convergence in {max_iter} iterations",
                        max_iter, res)


def step_em(C_i_n, C_np1, dt, p, solver="fixed-point", tol=EM_TOL, max_iter=EM_MAX_SWEEPS):
    """Exponential-map step.

    Parameters
    ----------
    solver : {'fixed-point', 'spectral'}
        ``'fixed-point'`` iterates ``X <- expm(a dev(Cbar X^-1)) C_i_n`` with
        damping 0.5 on the first three sweeps and symmetrization after each
        sweep. Contracts for ``a`` up to roughly 0.5 (see README). Beyond that
        it raises `NoConvergence`. ``'spectral'`` is a line-searched Newton
        method valid for any ``a``.

    Returns
    -------
    C_i : ndarray
    diag : StepDiagnostics
    """
    a = _a(dt, p)
    if a == 0.0:
        return C_i_n.copy(), StepDiagnostics(abs(t.det(C_i_n) - 1.0), 1, 0.0)
    Cbar = t.unimodular(C_np1)
    if solver == "fixed-point":
        C_i, it, res = _em_fixed_point(C_i_n, Cbar, a, tol, max_iter)
    elif solver == "spectral":
        C_i, it, res = _em_spectral(C_i_n, Cbar, a, tol, max_iter)
    else:
        raise ValueError(f"unknown exponential-map solver {solver!r}")
    return C_i, StepDiagnostics(abs(t.det(C_i) - 1.0), it, res)


def step_ebmsc_eulerian(F_np1, C_i_n, p, dt):
    """Eulerian form of the closed-form step.

    Returns the elastic left Cauchy-Green tensor at the end of the step::

        B_e^-1 = J^(-2/3) unimodular(unimodular(B_trial)^-1 + a 1)

    with ``B_trial = F C_i_n^-1 F^T``.
    """
    J = t.det(F_np1)
    if not J > 0.0:
        raise NonPositiveDeterminant(f"det F = {J!r}")
    B_trial = F_np1 @ t.inv(C_i_n) @ F_np1.T
    a = _a(dt, p)
    if a == 0.0:
        return B_trial
    M = t.inv(t.unimodular(B_trial)) + a * t.I2
    B_e_inv = J ** (-2.0 / 3.0) * t.unimodular(M)
    return t.sym(t.inv(B_e_inv))


def advance(method, C_i_n, C_np1, dt, p, em_solver="fixed-point"):
    """Dispatch one step by integrator name; returns ``(C_i, StepDiagnostics)``."""
    if method == "ebmsc":
        C_i = step_ebmsc(C_i_n, C_np1, dt, p)
        return C_i, StepDiagnostics(abs(t.det(C_i) - 1.0))
    if method == "ebm":
        return step_ebm_closed(C_i_n, C_np1, dt, p)
    if method == "em":
        return step_em(C_i_n, C_np1, dt, p, solver=em_solver)
    raise ValueError(f"unknown integrator {method!r}; expected one of {METHODS}")


# -- exact relaxation trajectory --------------------------------------------

def _rk4(f, u, h):
    k1 = f(u)
    k2 = f(u + 0.5 * h * k1)
    k3 = f(u + 0.5 * h * k2)
    k4 = f(u + h * k3)
    return u + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _relax_log_phi(C_i0, Cbar, duration, rate, tol=1e-12):
    """``u = ln(1 + phi)`` at ``duration`` for the relaxation ODE.

    With ``w = exp(-u)`` the ODE ``phi' = rate det(C_i0 + phi Cbar)^(1/3)``
    becomes ``u' = rate det(w C_i0 + (1 - w) Cbar)^(1/3)``, whose solution
    grows linearly instead of exponentially. Classical RK4 with step
    doubling and local extrapolation.
    """
    def f(u):
        w = math.exp(-u)
        return rate * t.det(w * C_i0 + (1.0 - w) * Cbar) ** (1.0 / 3.0)

    u, s = 0.0, 0.0
    h = min(duration, 1e-4 / rate) if rate > 0 else duration
    while duration - s > 1e-15 * max(duration, 1.0):
        h = min(h, duration - s)
        full = _rk4(f, u, h)
        half = _rk4(f, _rk4(f, u, 0.5 * h), 0.5 * h)
        err = abs(half - full) / 15.0
        if err <= tol or h <= 1e-12 * max(duration, 1.0):
            s += h
            u = half + (half - full) / 15.0
        factor = 2.0 if err == 0.0 else min(2.0, max(0.2, 0.9 * (tol / err) ** 0.2))
        h *= factor
    return u


def relaxation_phi(C_i0, C_fixed, duration, p):
    """Scalar ``phi(duration)`` of the exact relaxation trajectory."""
    if duration == 0.0:
        return 0.0
    u = _relax_log_phi(C_i0, t.unimodular(C_fixed), duration, p.mu / p.eta)
    return math.expm1(u)


def relax_exact(C_i0, C_fixed, duration, p):
    """Exact inelastic state after holding ``C`` fixed for ``duration``.

    The solution of the flow rule at fixed ``C`` stays on the curve
    ``unimodular(C_i0 + phi Cbar)`` with the scalar ``phi`` governed by
    ``phi' = mu/eta det(C_i0 + phi Cbar)^(1/3)``, ``phi(0) = 0``.
    """
    if duration == 0.0 or p.mu == 0.0:
        return C_i0.copy()
    Cbar = t.unimodular(C_fixed)
    u = _relax_log_phi(C_i0, Cbar, duration, p.mu / p.eta)
    w = math.exp(-u)
    return t.unimodular(w * C_i0 + (1.0 - w) * Cbar)
