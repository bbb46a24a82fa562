"""Material-point driver: loading programs, time marching and studies.

A run marches ``t_n = n * dt`` from zero to the end of the program with a
fixed step, sampling the deformation gradient at step ends only. Internal
states are stored for every row so that error studies can compare runs on
a common grid.
"""
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import genvisc
from . import tensor as t
from .errors import GridMismatch, IntegratorFailure, LateralSolveFailure, NonPositiveDeterminant
from .genvisc import GenViscParams, GenViscState
from .integrators import METHODS, advance
from .maxwell import Kinematics, MaxwellParams

_COMPONENTS = [f"{i}{j}" for i in range(1, 4) for j in range(1, 4)]


# -- loading programs -------------------------------------------------------

@dataclass(frozen=True)
class LoadingProgram:
    """Piecewise-linear deformation history.

    Parameters
    ----------
    times : sequence of float
        Strictly increasing keyframe times [s].
    F_frames : sequence of (3, 3) arrays
        Deformation gradient at each keyframe.
    isochoric : bool
        If set, the interpolated gradient is replaced by its unimodular part.
    """

    times: tuple
    F_frames: tuple
    isochoric: bool = True
    samples_per_segment: int = field(default=64, repr=False)

    def __post_init__(self):
        times = tuple(float(x) for x in self.times)
        frames = tuple(np.asarray(F, dtype=float).reshape(3, 3) for F in self.F_frames)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "F_frames", frames)
        if len(times) != len(frames) or not times:
            raise ValueError("need one deformation gradient per keyframe time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("keyframe times must be strictly increasing")
        probe = np.concatenate([np.linspace(a, b, self.samples_per_segment)
                                for a, b in zip(times, times[1:])] or [np.array(times)])
        if np.any(np.linalg.det(self._interp(probe)) <= 0.0):
            raise NonPositiveDeterminant("det F <= 0 along the loading path")

    @property
    def t_end(self):
        return self.times[-1]

    def _interp(self, tt):
        frames = np.stack(self.F_frames).reshape(-1, 9)
        out = np.empty((len(tt), 9))
        for c in range(9):
            out[:, c] = np.interp(tt, self.times, frames[:, c])
        return out.reshape(-1, 3, 3)

    def F_batch(self, tt):
        F = self._interp(np.asarray(tt, dtype=float))
        if self.isochoric:
            F = F * np.cbrt(np.linalg.det(F))[:, None, None] ** -1.0
        return F

    def F(self, time):
        return self.F_batch([time])[0]


def benchmark_program():
    """Four-keyframe isochoric program on [0, 300] s: tension along e1, simple
    shear, tension along e2."""
    r = 1.0 / math.sqrt(2.0)
    F1 = np.eye(3)
    F2 = np.diag([2.0, r, r])
    F3 = np.eye(3)
    F3[0, 1] = 1.0
    F4 = np.diag([r, 2.0, r])
    return LoadingProgram((0.0, 100.0, 200.0, 300.0), (F1, F2, F3, F4), isochoric=True)


def relaxation_program(F_target=None, ramp=10.0, hold=None, tau=10.0):
    """Ramp from the identity to ``F_target`` and hold for ``hold`` seconds
    (default ``5 * tau``)."""
    if F_target is None:
        r = 1.0 / math.sqrt(2.0)
        F_target = np.diag([2.0, r, r])
    hold = 5.0 * tau if hold is None else hold
    return LoadingProgram((0.0, ramp, ramp + hold), (np.eye(3), F_target, F_target),
                          isochoric=True)


@dataclass(frozen=True)
class StretchProgram:
    """Piecewise-linear axial stretch history ``F_xx(t)`` for uniaxial tests."""

    times: tuple
    stretches: tuple

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(x) for x in self.times))
        object.__setattr__(self, "stretches", tuple(float(x) for x in self.stretches))
        if len(self.times) != len(self.stretches) or not self.times:
            raise ValueError("need one stretch per keyframe time")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("keyframe times must be strictly increasing")
        if min(self.stretches) <= 0.0:
            raise NonPositiveDeterminant("axial stretch must stay positive")

    @property
    def t_end(self):
        return self.times[-1]

    def stretch(self, tt):
        return np.interp(tt, self.times, self.stretches)


def cyclic_stretch(rate, low=1.0, high=2.0, cycles=5):
    """Triangle wave between ``low`` and ``high`` at constant ``|dF_xx/dt|``."""
    half = (high - low) / rate
    times = [i * half for i in range(2 * cycles + 1)]
    stretches = [low if i % 2 == 0 else high for i in range(2 * cycles + 1)]
    return StretchProgram(tuple(times), tuple(stretches))


def uniaxial_relaxation_stretch(rate=1.5, peak=2.0, unload_to=1.5, hold=500.0):
    """Fast ramp to ``peak``, hold, fast partial unloading, hold.

    The first hold relaxes from above the equilibrium curve, the second from
    below it.
    """
    t1 = (peak - 1.0) / rate
    t2 = t1 + hold
    t3 = t2 + (peak - unload_to) / rate
    t4 = t3 + hold
    return StretchProgram((0.0, t1, t2, t3, t4), (1.0, peak, peak, unload_to, unload_to))


# -- results ----------------------------------------------------------------

@dataclass(frozen=True)
class TimeSeries:
    """Immutable result of a run.

    Arrays have one leading row per output time. ``C_i`` has shape
    ``(rows, branches, 3, 3)`` and is not serialized to CSV.
    """

    t: np.ndarray
    F: np.ndarray
    T: np.ndarray
    det_Ci: np.ndarray
    psi: np.ndarray
    C_i: np.ndarray = None
    err: np.ndarray = None

    def __len__(self):
        return len(self.t)

    @property
    def n_branches(self):
        return self.det_Ci.shape[1]

    def header(self):
        cols = ["t"] + [f"F{c}" for c in _COMPONENTS] + [f"T{c}" for c in _COMPONENTS]
        cols += [f"detCi_{m + 1}" for m in range(self.n_branches)] + ["psi"]
        if self.err is not None:
            cols.append("err")
        return cols

    def rows(self):
        n = len(self.t)
        parts = [self.t[:, None], self.F.reshape(n, 9), self.T.reshape(n, 9),
                 self.det_Ci, self.psi[:, None]]
        if self.err is not None:
            parts.append(self.err[:, None])
        return np.hstack(parts)

    def to_csv(self, path_or_buf=None):
        """Write CSV with 17 significant digits; returns the text if no target."""
        lines = [",".join(self.header())]
        lines.extend(",".join(format(x, ".17g") for x in row) for row in self.rows().tolist())
        text = "\n".join(lines) + "\n"
        if path_or_buf is None:
            return text
        if isinstance(path_or_buf, io.IOBase):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="\n", encoding="ascii") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text_or_path):
        if "\n" not in str(text_or_path):
            with open(text_or_path, encoding="ascii") as fh:
                text = fh.read()
        else:
            text = text_or_path
        lines = text.strip("\n").split("\n")
        header = lines[0].split(",")
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(header))
        n_br = sum(1 for h in header if h.startswith("detCi_"))
        has_err = header[-1] == "err"
        n = len(data)
        return cls(
            t=data[:, 0], F=data[:, 1:10].reshape(n, 3, 3), T=data[:, 10:19].reshape(n, 3, 3),
            det_Ci=data[:, 19:19 + n_br], psi=data[:, 19 + n_br],
            err=data[:, -1] if has_err else None,
        )


# -- material adapters ------------------------------------------------------

def branches_of(material):
    if isinstance(material, MaxwellParams):
        return (material,)
    if isinstance(material, GenViscParams):
        return material.branches
    raise TypeError(f"unsupported material {type(material).__name__}")


def _batch_inv(A):
    return np.linalg.inv(A)


def _batch_dev(A):
    tr = np.trace(A, axis1=-2, axis2=-1)
    return A - tr[:, None, None] / 3.0 * np.eye(3)


def response_batch(material, F, C_i):
    """Cauchy stress and free energy for stacked ``F`` (n,3,3) and ``C_i`` (n,N,3,3)."""
    C = np.einsum("nki,nkj->nij", F, F)
    J = np.linalg.det(F)
    Cinv = _batch_inv(C)
    Cbar = C * (J ** (-2.0 / 3.0))[:, None, None]
    T2 = np.zeros_like(C)
    psi = np.zeros(len(C))
    for m, branch in enumerate(branches_of(material)):
        Ci_inv = _batch_inv(C_i[:, m])
        M = Cbar @ Ci_inv
        T2 += branch.mu * (Cinv @ _batch_dev(M))
        psi += 0.5 * branch.mu * (np.trace(M, axis1=1, axis2=2) - 3.0)
    if isinstance(material, GenViscParams):
        x = np.trace(Cbar, axis1=1, axis2=2) - 3.0
        slope = 2.0 * material.c10 + 4.0 * material.c20 * x + 6.0 * material.c30 * x * x
        j3 = np.cbrt(J)
        T2 += slope[:, None, None] * (_batch_dev(Cbar) @ Cinv)
        T2 += (3.0 * material.k * j3 * (j3 - 1.0))[:, None, None] * Cinv
        psi += material.c10 * x + material.c20 * x ** 2 + material.c30 * x ** 3
        psi += 4.5 * material.k * (j3 - 1.0) ** 2
    T = F @ T2 @ np.swapaxes(F, 1, 2) / J[:, None, None]
    return 0.5 * (T + np.swapaxes(T, 1, 2)), psi


def _finish(material, times, F, C_i):
    T, psi = response_batch(material, F, C_i)
    return TimeSeries(t=times, F=F, T=T, det_Ci=np.linalg.det(C_i), psi=psi, C_i=C_i)


def n_steps(t_end, dt):
    """Number of whole steps of size ``dt`` in ``[0, t_end]``."""
    return int(math.floor(t_end / dt + 1e-9))


# -- runs -------------------------------------------------------------------

def run(program, material, integrator="ebmsc", dt=1.0, t_end=None, em_solver="fixed-point"):
    """March a loading program with a fixed step.

    Parameters
    ----------
    program : LoadingProgram
    material : MaxwellParams or GenViscParams
    integrator : {'ebmsc', 'ebm', 'em'}
    dt : float
        Step size, > 0.
    t_end : float, optional
        Defaults to the last keyframe time.

    Raises
    ------
    IntegratorFailure
        Wraps any integrator error together with the failing step index.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if integrator not in METHODS:
        raise ValueError(f"unknown integrator {integrator!r}")
    t_end = program.t_end if t_end is None else t_end
    n = n_steps(t_end, dt)
    times = np.arange(n + 1) * dt
    F = program.F_batch(times)
    C = np.einsum("nki,nkj->nij", F, F)
    branches = branches_of(material)
    C_i = np.empty((n + 1, len(branches), 3, 3))
    C_i[0] = np.eye(3)
    current = [np.eye(3) for _ in branches]
    for k in range(1, n + 1):
        Ck = C[k]
        try:
            for m, branch in enumerate(branches):
                current[m] = advance(integrator, current[m], Ck, dt, branch, em_solver)[0]
        except Exception as exc:
            raise IntegratorFailure(k, exc) from exc
        C_i[k] = current
    return _finish(material, times, F, C_i)


def frozen_flow(program, mu, dt, t_end=None):
    """Hyperelastic response with the inelastic flow frozen at ``C_i = 1``."""
    return run(program, MaxwellParams(mu, math.inf), "ebmsc", dt, t_end)


def viscosity_sweep(program, etas, dt, mu=40.0, integrator="ebmsc"):
    """One run per viscosity; returns ``{eta: TimeSeries}``."""
    out = {}
    for eta in etas:
        if not eta > 0.0:
            raise ValueError(f"viscosity must be positive, got {eta!r}")
        out[eta] = run(program, MaxwellParams(mu, eta), integrator, dt)
    return out


# -- convergence studies ----------------------------------------------------

@dataclass(frozen=True)
class ConvergenceStudy:
    """Max-over-time Frobenius error of ``C_i`` per step size and integrator.

    ``curves[(method, dt)]`` holds ``(times, errors)`` along the run.
    """

    dts: tuple
    methods: tuple
    errors: dict
    curves: dict
    reference_dt: float

    def table(self):
        return np.array([[dt] + [self.errors[m][i] for m in self.methods]
                         for i, dt in enumerate(self.dts)])

    def to_csv(self, path=None):
        lines = [",".join(["dt"] + [f"err_{m}" for m in self.methods])]
        lines.extend(",".join(format(x, ".17g") for x in row) for row in self.table().tolist())
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="\n", encoding="ascii") as fh:
                fh.write(text)
        return text


def _stride(dt, reference_dt):
    ratio = dt / reference_dt
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9 * max(ratio, 1.0):
        raise GridMismatch(f"dt = {dt!r} is not an integer multiple of {reference_dt!r}")
    return stride


def error_curve(series, reference, stride):
    """Frobenius error of ``C_i`` against a reference sampled every ``stride`` rows."""
    ref = reference.C_i[::stride][:len(series)]
    if len(ref) != len(series):
        raise GridMismatch("reference run is shorter than the compared run")
    diff = series.C_i - ref
    return np.sqrt(np.einsum("nmij,nmij->n", diff, diff))


def _run_job(args):
    return run(*args)


def convergence_study(program, material, dts, reference_dt=0.001, methods=METHODS,
                      reference=None, reference_method="ebmsc", workers=1):
    """Errors of each integrator against a fine-step reference run.

    The reference is a `reference_method` run at `reference_dt` unless a
    precomputed `reference` series is supplied. With ``workers > 1`` the
    coarse runs are spread over a process pool; results do not depend on it.
    """
    strides = [_stride(dt, reference_dt) for dt in dts]
    if reference is None:
        reference = run(program, material, reference_method, reference_dt)
    jobs = [(program, material, m, dt) for dt in dts for m in methods]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    errors = {m: [] for m in methods}
    curves = {}
    for (_, _, m, dt), series in zip(jobs, results):
        err = error_curve(series, reference, strides[dts.index(dt)])
        curves[(m, dt)] = (series.t, err)
        errors[m].append(float(err.max()))
    return ConvergenceStudy(tuple(dts), tuple(methods),
                            {m: np.array(v) for m, v in errors.items()}, curves, reference_dt)


# -- uniaxial stress-controlled driver ---------------------------------------

LATERAL_TOL = 1e-10
LATERAL_MAX_ITER = 50


def _lateral_stress(material, state, stretch, lam, dt, integrator):
    F = np.diag([stretch, lam, lam])
    kin = Kinematics(F=F, C=F.T @ F, J=stretch * lam * lam)
    new = genvisc.step(state, kin.C, dt, material, integrator)
    T2 = genvisc.total_stress(kin, new, material)
    return lam * lam * T2[1, 1] / kin.J, new


def solve_lateral(g, lam0, tol=LATERAL_TOL, max_iter=LATERAL_MAX_ITER):
    """Root of the increasing scalar function ``g`` by safeguarded Newton.

    A bracket is kept from the signs of previous evaluations; Newton steps
    that leave it are replaced by bisection (or by doubling/halving while
    the bracket is still open).
    """
    lo, hi = 0.0, math.inf
    lam = lam0
    val = g(lam)
    for it in range(1, max_iter + 1):
        if abs(val) <= tol:
            return lam, it
        if val < 0.0:
            lo = max(lo, lam)
        else:
            hi = min(hi, lam)
        h = 1e-7 * lam
        slope = (g(lam + h) - val) / h
        new = lam - val / slope if slope > 0.0 else math.nan
        if not lo < new < hi:
            if math.isfinite(hi) and lo > 0.0:
                new = 0.5 * (lo + hi)
            else:
                new = 2.0 * lam if val < 0.0 else 0.5 * lam
        lam = new
        val = g(lam)
    if abs(val) <= tol:
        return lam, max_iter
    raise LateralSolveFailure(
        f"lateral stress {val:.3e} MPa after {max_iter} Newton iterations", max_iter, abs(val))


def uniaxial_drive(program, material, dt, t_end=None, integrator="ebmsc"):
    """Stretch-controlled uniaxial test with traction-free lateral faces.

    At each step the lateral stretch ``lam`` of ``F = diag(F_xx, lam, lam)``
    is solved so that the lateral Cauchy stress vanishes; branch states are
    committed once per converged step.
    """
    if not isinstance(material, GenViscParams):
        raise TypeError("uniaxial driver needs a material with a volumetric response")
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    t_end = program.t_end if t_end is None else t_end
    n = n_steps(t_end, dt)
    times = np.arange(n + 1) * dt
    stretch = program.stretch(times)
    state = GenViscState.fresh(material)
    F = np.empty((n + 1, 3, 3))
    C_i = np.empty((n + 1, len(material.branches), 3, 3))
    lam = 1.0
    for k in range(n + 1):
        h = dt if k else 0.0

        def g(x):
            return _lateral_stress(material, state, stretch[k], x, h, integrator)[0]

        try:
            lam, _ = solve_lateral(g, lam)
            state = _lateral_stress(material, state, stretch[k], lam, h, integrator)[1]
        except Exception as exc:
            raise IntegratorFailure(k, exc) from exc
        F[k] = np.diag([stretch[k], lam, lam])
        if material.branches:
            C_i[k] = state.C_i_m
    return _finish(material, times, F, C_i)


def equilibrium_curve(stretches, material):
    """Uniaxial equilibrium (branch-free) Cauchy stress ``T_xx`` at given stretches."""
    eq = material.without_branches()
    prog = StretchProgram(tuple(range(len(stretches))), tuple(stretches))
    return uniaxial_drive(prog, eq, 1.0).T[:, 0, 0]
