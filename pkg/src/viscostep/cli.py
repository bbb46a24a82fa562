"""Command-line front end.

Subcommands
-----------
simulate   run one program and write a CSV time series
converge   integrator error table against a fine-step reference
audit      invariant checks on a run; exit code 4 if any check fails

Exit codes: 0 ok, 2 configuration error, 3 solver failure, 4 audit failure.
"""
import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import driver as d
from .errors import IntegratorFailure, ViscostepError
from .genvisc import GenViscParams
from .integrators import METHODS, advance
from .maxwell import MaxwellParams, free_energy_C
from .tangent import algorithmic_stress, consistent_tangent, fd_tangent, relative_deviation

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_AUDIT = 0, 2, 3, 4
PRESETS = ("paper-4.1", "uniaxial-cyclic", "relaxation")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_MATRIX = {"type": "array", "minItems": 3, "maxItems": 3,
           "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": _NUM}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "material": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["model"],
                 "properties": {"model": {"const": "maxwell"}, "mu": {"type": "number", "minimum": 0},
                                "eta": _POS}},
                {"type": "object", "additionalProperties": False, "required": ["model"],
                 "properties": {
                     "model": {"const": "genvisc"}, "c10": _NUM, "c20": _NUM, "c30": _NUM, "k": _POS,
                     "branches": {"type": "array", "items": {
                         "type": "object", "additionalProperties": False, "required": ["mu", "eta"],
                         "properties": {"mu": {"type": "number", "minimum": 0}, "eta": _POS}}}}},
            ]
        },
        "program": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["preset"],
                 "properties": {"preset": {"enum": list(PRESETS)}, "rate": _POS,
                                "cycles": {"type": "integer", "minimum": 1}, "hold": _POS}},
                {"type": "object", "additionalProperties": False, "required": ["keyframes"],
                 "properties": {
                     "keyframes": {"type": "array", "minItems": 1, "items": {
                         "type": "object", "additionalProperties": False, "required": ["t", "F"],
                         "properties": {"t": _NUM, "F": _MATRIX}}},
                     "isochoric": {"type": "boolean"}}},
                {"type": "object", "additionalProperties": False, "required": ["stretch"],
                 "properties": {"stretch": {"type": "array", "minItems": 1, "items": {
                     "type": "array", "minItems": 2, "maxItems": 2, "items": _NUM}}}},
            ]
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "integrator": {"enum": list(METHODS)},
                "em_solver": {"enum": ["fixed-point", "spectral"]},
                "dt": {"type": "number", "minimum": 0},
                "dts": {"type": "array", "minItems": 1, "items": _POS},
                "T": {"type": "number", "minimum": 0},
                "reference_dt": _POS,
                "out": {"type": "string"},
                "seed": {"type": "integer"},
            },
        },
    },
}


class ConfigError(Exception):
    pass


@dataclass
class Experiment:
    """Resolved configuration: material, program and run settings."""

    material: object
    program: object
    integrator: str = "ebmsc"
    em_solver: str = "fixed-point"
    dt: float = 1.0
    dts: list = field(default_factory=lambda: [1.0, 0.5])
    t_end: float = None
    reference_dt: float = 0.001
    out: str = None
    seed: int = 0

    @property
    def uniaxial(self):
        return isinstance(self.program, d.StretchProgram)


def _material(block, program):
    if block is None:
        if "stretch" in program or program.get("preset") in ("uniaxial-cyclic", "relaxation"):
            return GenViscParams.defaults()
        return MaxwellParams(40.0, 400.0)
    if block["model"] == "maxwell":
        return MaxwellParams(block.get("mu", 40.0), block.get("eta", 400.0))
    base = GenViscParams.defaults()
    branches = base.branches
    if "branches" in block:
        branches = tuple(MaxwellParams(b["mu"], b["eta"]) for b in block["branches"])
    return GenViscParams(block.get("c10", base.c10), block.get("c20", base.c20),
                         block.get("c30", base.c30), block.get("k", base.k), branches)


def _program(block, material):
    name = block.get("preset")
    if name == "paper-4.1":
        return d.benchmark_program(), 1.0
    if name == "uniaxial-cyclic":
        rate = block.get("rate", 1.5)
        return d.cyclic_stretch(rate, cycles=block.get("cycles", 5)), 0.01 / rate
    if name == "relaxation":
        if isinstance(material, MaxwellParams):
            tau = material.tau if math.isfinite(material.tau) else 10.0
            prog = d.relaxation_program(tau=tau, hold=block.get("hold"))
            return prog, 0.01 * tau
        prog = d.uniaxial_relaxation_stretch(rate=block.get("rate", 1.5), hold=block.get("hold", 500.0))
        return prog, 1.0 / 6.0
    if "keyframes" in block:
        frames = block["keyframes"]
        return d.LoadingProgram(tuple(f["t"] for f in frames), tuple(f["F"] for f in frames),
                                isochoric=block.get("isochoric", True)), 1.0
    pairs = block["stretch"]
    return d.StretchProgram(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)), 0.01


def load_config(path=None, preset=None, integrator=None, dt=None, out=None):
    """Build an `Experiment` from an optional JSON file and CLI overrides.

    Raises
    ------
    ConfigError
        On unreadable files, schema violations or inconsistent settings.
    """
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if preset is not None:
        raw = dict(raw, program={"preset": preset})
    raw.setdefault("program", {"preset": "paper-4.1"})
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    run = raw.get("run", {})
    try:
        material = _material(raw.get("material"), raw["program"])
        program, default_dt = _program(raw["program"], material)
    except (ValueError, ViscostepError) as exc:
        raise ConfigError(str(exc)) from exc
    exp = Experiment(material=material, program=program,
                     integrator=run.get("integrator", "ebmsc"),
                     em_solver=run.get("em_solver", "fixed-point"),
                     dt=run.get("dt", default_dt),
                     dts=list(run.get("dts", [1.0, 0.5])),
                     t_end=run.get("T"),
                     reference_dt=run.get("reference_dt", 0.001),
                     out=run.get("out"), seed=run.get("seed", 0))
    if integrator is not None:
        exp.integrator = integrator
    if dt:
        if len(dt) == 1:
            exp.dt = dt[0]
        exp.dts = list(dt)
    if out is not None:
        exp.out = out
    if exp.uniaxial and not isinstance(material, GenViscParams):
        raise ConfigError("stretch-controlled programs need the genvisc material")
    return exp


def simulate(exp):
    """Run the experiment and return its `TimeSeries`."""
    if not exp.dt > 0.0:
        raise ConfigError("simulate needs dt > 0")
    if exp.uniaxial:
        return d.uniaxial_drive(exp.program, exp.material, exp.dt, exp.t_end, exp.integrator)
    return d.run(exp.program, exp.material, exp.integrator, exp.dt, exp.t_end, exp.em_solver)


def _threads():
    try:
        return max(1, int(os.environ.get("VISCOSTEP_THREADS", "1")))
    except ValueError:
        return 1


def converge(exp):
    if exp.uniaxial:
        raise ConfigError("convergence studies need a deformation-controlled program")
    try:
        return d.convergence_study(exp.program, exp.material, exp.dts, exp.reference_dt,
                                   workers=_threads())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- audit ------------------------------------------------------------------

DET_TOL = 1e-12
INVARIANCE_TOL = 1e-10
SYMMETRY_TOL = 1e-10
FD_TOL = 1e-5
AUDIT_SAMPLES = 20


@dataclass
class AuditCheck:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class AuditReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def text(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name:<28} max = {c.value:.3e}"
                 f"  (threshold {c.threshold:.1e})" for c in self.checks]
        lines.append("audit " + ("passed" if self.passed else "FAILED"))
        return "\n".join(lines) + "\n"

    def csv(self):
        rows = ["check,value,threshold,passed"]
        rows += [f"{c.name},{c.value:.17g},{c.threshold:.17g},{int(c.passed)}" for c in self.checks]
        return "\n".join(rows) + "\n"


def _random_unimodular(rng):
    while True:
        F0 = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
        det = np.linalg.det(F0)
        if det > 0.1:
            return F0 / np.cbrt(det)


def audit(exp, series=None):
    """Invariant checks on a run.

    Per-run maxima of ``|det C_i - 1|`` and the SPD defect of ``C_i``; at up
    to `AUDIT_SAMPLES` steps: reference-change invariance of the integrator
    under a random unimodular ``F0``, symmetry and finite-difference error of
    the consistent tangent, and non-increase of the branch free energy with
    the step size at fixed ``C``. A ``dt = 0`` experiment audits only the
    initial state.
    """
    if series is None:
        if exp.dt == 0.0:
            # zero steps: only the initial state is audited
            series = (d.uniaxial_drive(exp.program, exp.material, 1.0, 0.0, exp.integrator)
                      if exp.uniaxial else d.run(exp.program, exp.material, exp.integrator, 1.0, 0.0))
        else:
            series = simulate(exp)
    dt = exp.dt
    branches = d.branches_of(exp.material)
    n = len(series)
    rows = sorted(set(np.linspace(0, n - 2, AUDIT_SAMPLES).astype(int).tolist())) if n > 1 else []
    C = np.einsum("nki,nkj->nij", series.F, series.F)
    rng = np.random.default_rng(exp.seed)

    det_err = float(np.max(np.abs(series.det_Ci - 1.0))) if series.det_Ci.size else 0.0
    Ci = series.C_i.reshape(-1, 3, 3)
    spd = bool(np.all(np.linalg.eigvalsh(0.5 * (Ci + np.swapaxes(Ci, 1, 2))) > 0.0)) if len(Ci) else True
    asym = float(np.max(np.abs(Ci - np.swapaxes(Ci, 1, 2)))) if len(Ci) else 0.0

    inv_err = sym_err = fd_err = 0.0
    energy_ok = True
    energy_rise = 0.0
    for k in rows:
        Cn1 = C[k + 1]
        for m, p in enumerate(branches):
            Cin = series.C_i[k, m]
            F0 = _random_unimodular(rng)
            direct = advance(exp.integrator, Cin, Cn1, dt, p, exp.em_solver)[0]
            moved = advance(exp.integrator, F0.T @ Cin @ F0, F0.T @ Cn1 @ F0, dt, p, exp.em_solver)[0]
            inv_err = max(inv_err, relative_deviation(moved, F0.T @ direct @ F0))

            tan = consistent_tangent(Cn1, Cin, p, dt)
            sym_err = max(sym_err, tan.symmetric_defect)
            fd = fd_tangent(lambda X: algorithmic_stress(X, Cin, p, dt), Cn1, 1e-6)
            fd_err = max(fd_err, relative_deviation(tan.dT_dC, fd))

            psi = [free_energy_C(Cn1, advance(exp.integrator, Cin, Cn1, s * dt, p, exp.em_solver)[0], p.mu)
                   for s in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)]
            rise = max(b - a for a, b in zip(psi, psi[1:]))
            energy_rise = max(energy_rise, rise)
            energy_ok &= rise <= 1e-12 * max(abs(psi[0]), 1.0)

    return AuditReport([
        AuditCheck("det_Ci", det_err, DET_TOL, det_err <= DET_TOL),
        AuditCheck("spd_Ci", asym, DET_TOL, spd and asym <= DET_TOL),
        AuditCheck("reference_invariance", inv_err, INVARIANCE_TOL, inv_err <= INVARIANCE_TOL),
        AuditCheck("tangent_symmetry", sym_err, SYMMETRY_TOL, sym_err <= SYMMETRY_TOL),
        AuditCheck("tangent_fd", fd_err, FD_TOL, fd_err <= FD_TOL),
        AuditCheck("energy_monotone", energy_rise, 0.0, energy_ok),
    ])


# -- entry point ------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="viscostep", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "write a CSV time series"),
                        ("converge", "write an integrator error table"),
                        ("audit", "run the invariant audit")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--preset", choices=PRESETS, help="named loading program")
        sp.add_argument("--integrator", choices=METHODS)
        sp.add_argument("--dt", type=float, action="append",
                        help="step size; repeat for a convergence table")
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        if name == "simulate":
            sp.add_argument("--audit", action="store_true", help="also audit the run")
    return ap


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            fh.write(text)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        exp = load_config(args.config, args.preset, args.integrator, args.dt, args.out)
        if args.command == "simulate":
            if args.dt and len(args.dt) > 1:
                raise ConfigError("simulate takes a single --dt")
            series = simulate(exp)
            _emit(series.to_csv(), exp.out)
            if args.audit:
                report = audit(exp, series)
                sys.stderr.write(report.text())
                if exp.out is not None:
                    _emit(report.csv(), os.path.splitext(exp.out)[0] + ".audit.csv")
                return EXIT_OK if report.passed else EXIT_AUDIT
        elif args.command == "converge":
            _emit(converge(exp).to_csv(), exp.out)
        else:
            report = audit(exp)
            sys.stdout.write(report.text())
            if exp.out is not None:
                _emit(report.csv(), exp.out)
            return EXIT_OK if report.passed else EXIT_AUDIT
    except ConfigError as exc:
        sys.stderr.write(f"viscostep: config error: {exc}\n")
        return EXIT_CONFIG
    except (IntegratorFailure, ViscostepError, ArithmeticError) as exc:
        sys.stderr.write(f"viscostep: solver failure: {exc}\n")
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
