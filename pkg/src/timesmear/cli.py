"""Scenario runner: INI config in, CSV tables and a report out.

Config sections (all values plain ``key = value``)::

    [scenario]   name, mode
    [model]      name, then the builder parameters (omega, m, n_max, n_points, L, p_max)
    [observable] name                    (general_observable; position_average uses x)
    [smearing]   kind, T                 (or samples = path to a two-column file)
    [grid]       k_max, n_k, n_slices, scheme, taper
    [pointer]    delta
    [partition]  edges = e0, e1, ...     or lo, hi, n_bins
    [state]      vector = c0, c1, ...    or x0, p0, sigma for a Gaussian packet
    [sweep]      T = t0, t1, ...         (velocity: compare with momentum over T)
    [phase_space] fock_dim, n, ks, omega, T, convention, n_radial, n_angle

Every CSV starts with ``#`` lines holding the provenance hash and the
resolved config, so reruns with one config give byte-identical files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import histories, oracles, phase_space, povm
from .class_operators import (KGrid, class_family, momentum_family, spread_bound,
                              velocity_family)
from .errors import ConfigError, TimesmearError
from .linalg_core import State
from .models import build, gaussian_state
from .propagator import TimeSlicing, evolve_batch
from .smearing import load_samples, make_standard

MODES = ("position_average", "general_observable", "velocity", "momentum",
         "decoherence_scan", "phase_space_liouville", "apparatus_crosscheck")
AXES = ("n_slices", "n_k", "k_max", "z_grid")

BUILTIN = {
    "two_level_bessel": """
[scenario]
name = two_level_bessel
mode = general_observable
[model]
name = two_level
omega = 1.0
[observable]
name = sx
[smearing]
kind = uniform
T = 1.0
[grid]
k_max = 40
n_k = 2049
n_slices = 4096
scheme = strang
""",
    "commuting_collapse": """
[scenario]
name = commuting_collapse
mode = general_observable
[model]
name = two_level
omega = 1.0
[observable]
name = sz
[smearing]
kind = uniform
T = 1.0
[grid]
k_max = 200
n_k = 401
n_slices = 16
taper = 33.333333333333336
[partition]
edges = -3.14159265358979, -2.5, -1.5, -0.5, 0, 0.5, 1.5, 2.5, 3.14159265358979
[state]
vector = 0.8, 0.6j
""",
    "velocity_vs_momentum": """
[scenario]
name = velocity_vs_momentum
mode = velocity
[model]
name = free_particle_momentum
m = 1.0
n_points = 128
p_max = 4.0
[smearing]
kind = sine_bump_paper
T = 5.0
[grid]
k_max = 15
n_k = 151
n_slices = 1024
[partition]
edges = 0.515625, 1.515625
[sweep]
T = 5, 20, 80
""",
    "two_level_decoherence": """
[scenario]
name = two_level_decoherence
mode = decoherence_scan
[model]
name = two_level
omega = 1.0
[observable]
name = sx
[smearing]
kind = uniform
T = 1.0
[grid]
k_max = 40
n_k = 801
n_slices = 2048
[partition]
n_bins = 16
[state]
vector = 0.8, 0.6j
""",
    "two_level_apparatus": """
[scenario]
name = two_level_apparatus
mode = apparatus_crosscheck
[model]
name = two_level
omega = 1.0
[observable]
name = sx
[smearing]
kind = uniform
T = 1.0
[grid]
k_max = 30
n_k = 241
n_slices = 1024
[pointer]
delta = 0.3
[state]
vector = 0.8, 0.6j
""",
    "liouville": """
[scenario]
name = liouville
mode = phase_space_liouville
[phase_space]
fock_dim = 6
n = 3
omega = 1.0
T = 0.12
ks = 0, 0.5, 1.0
""",
}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def _complexes(text: str) -> list[complex]:
    return [complex(v) for v in text.replace(" ", "").split(",") if v]


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


@dataclass
class Scenario:
    name: str
    mode: str
    config: dict
    outputs: list = field(default_factory=list)

    @classmethod
    def from_text(cls, text: str) -> Scenario:
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keys such as T are case sensitive
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("config", f"unreadable: {exc}") from None
        cfg = {s: dict(cp[s]) for s in cp.sections()}
        if "scenario" not in cfg or "mode" not in cfg["scenario"]:
            raise ConfigError("scenario.mode", "missing")
        mode = cfg["scenario"]["mode"]
        if mode not in MODES:
            raise ConfigError("mode", f"unknown value {mode!r}; expected one of {MODES}")
        return cls(cfg["scenario"].get("name", mode), mode, cfg)

    @classmethod
    def from_file(cls, path) -> Scenario:
        path = Path(path)
        if not path.exists():
            raise ConfigError("config", f"file {path} not found")
        return cls.from_text(path.read_text())

    @classmethod
    def builtin(cls, name: str) -> Scenario:
        if name not in BUILTIN:
            raise ConfigError("scenario", f"unknown built-in {name!r}")
        return cls.from_text(BUILTIN[name])

    def section(self, name: str) -> dict:
        if name not in self.config:
            raise ConfigError(name, f"missing section for mode {self.mode!r}")
        return self.config[name]

    def get(self, section: str, key: str, default=None, cast=float):
        sec = self.config.get(section, {})
        if key not in sec:
            if default is None:
                raise ConfigError(f"{section}.{key}", "missing")
            return default
        try:
            return cast(sec[key])
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"cannot parse {sec[key]!r}") from None

    # -- builders --------------------------------------------------------

    def model(self):
        sec = dict(self.section("model"))
        name = sec.pop("name", None)
        if name is None:
            raise ConfigError("model.name", "missing")
        try:
            return build(name, **{k: _number(v) for k, v in sec.items()})
        except TimesmearError as exc:
            raise ConfigError("model", str(exc)) from None

    def smearing(self, T: float | None = None):
        sec = self.section("smearing")
        if "samples" in sec:
            return load_samples(sec["samples"])
        kind = sec.get("kind", "uniform")
        T = self.get("smearing", "T") if T is None else T
        try:
            return make_standard(kind, T)
        except TimesmearError as exc:
            raise ConfigError("smearing.kind", str(exc)) from None

    def observable(self, model):
        name = "x" if self.mode == "position_average" else self.get("observable", "name", cast=str)
        if name not in model.observables:
            raise ConfigError("observable.name", f"{name!r} not in {sorted(model.observables)}")
        return model.observables[name]

    def kgrid(self) -> KGrid:
        return KGrid(self.get("grid", "k_max"), self.get("grid", "n_k", cast=int))

    def slicing(self) -> TimeSlicing:
        return TimeSlicing(self.get("grid", "n_slices", 2048, int),
                           self.get("grid", "scheme", "strang", str))

    def taper(self):
        sec = self.config.get("grid", {})
        return float(sec["taper"]) if "taper" in sec else None

    def state(self, model) -> State:
        sec = self.section("state")
        if "vector" in sec:
            return State.pure(model.space, _complexes(sec["vector"]))
        return gaussian_state(model, self.get("state", "x0"), self.get("state", "p0"),
                              self.get("state", "sigma"))

    def edges(self, window) -> list[float]:
        sec = self.section("partition")
        if "edges" in sec:
            return _floats(sec["edges"])
        lo = self.get("partition", "lo", window[0])
        hi = self.get("partition", "hi", window[1])
        return list(np.linspace(lo, hi, self.get("partition", "n_bins", cast=int) + 1))


# -- output ------------------------------------------------------------------

def _write_table(path: Path, header: list[str], rows, meta: dict, as_json: bool) -> list[Path]:
    with path.open("w", newline="") as fh:
        fh.write(f"# provenance {povm.provenance_hash(meta)}\n")
        fh.write(f"# config {json.dumps(meta, sort_keys=True, default=str)}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r])
    out = [path]
    if as_json:
        jpath = path.with_suffix(".json")
        jpath.write_text(json.dumps({"config": meta, "columns": header,
                                     "rows": [list(r) for r in rows]}, default=float, indent=1))
        out.append(jpath)
    return out


def _meta(sc: Scenario, extra: dict | None = None) -> dict:
    meta = {"scenario": sc.config}
    if extra:
        meta.update(extra)
    return meta


# -- modes -------------------------------------------------------------------

def _general(sc, out, as_json, threads, report):
    model = sc.model()
    A = sc.observable(model)
    f = sc.smearing()
    kg = sc.kgrid()
    fam = class_family(model, A, f, kg, sc.slicing(), sc.taper(), threads)
    report["checks"]["completeness_residual"] = fam.completeness_residual()
    a = fam.a_grid
    norms = np.linalg.norm(fam.C, axis=(1, 2))
    header, cols = ["a", "norm_C"], [a, norms]
    obs_name = sc.config.get("observable", {}).get("name")
    if model.name == "two_level" and obs_name == "sx" and f.kind == "uniform" and sc.taper() is None:
        ref = oracles.two_level_band_limited(model.params["omega"], f.T, kg.ks, a)
        err = np.linalg.norm(fam.C - ref, axis=(1, 2))
        header.append("err_vs_oracle")
        cols.append(err)
        report["checks"]["max_err_vs_oracle"] = float(err.max())
    rows = list(zip(*[c.tolist() for c in cols]))
    report["files"] += _write_table(out / f"{sc.name}_class.csv", header, rows,
                                    _meta(sc, fam.provenance), as_json)
    if "partition" in sc.config and "state" in sc.config:
        edges = sc.edges(fam.window)
        rho = sc.state(model)
        if "pointer" in sc.config:
            pv = povm.build_povm(fam, povm.PointerState.gaussian(sc.get("pointer", "delta")))
            probs = [povm.probability(pv, rho, model.H, f.T, (edges[i], edges[i + 1]))
                     for i in range(len(edges) - 1)]
            _povm_checks(pv, rho, model, f, report)
        else:
            probs = povm.binned_class_probabilities(fam, rho, edges).tolist()
        rows = [(edges[i], edges[i + 1], float(p)) for i, p in enumerate(probs)]
        report["files"] += _write_table(out / f"{sc.name}_probabilities.csv",
                                        ["x_lo", "x_hi", "probability"], rows,
                                        _meta(sc, fam.provenance), as_json)


def _povm_checks(pv, rho, model, f, report):
    report["checks"]["povm_hermiticity"] = pv.hermiticity_error()
    report["checks"]["povm_min_eigenvalue"] = pv.min_eigenvalue()
    report["checks"]["povm_completeness"] = pv.completeness_residual()
    report["clipped_mass"] = povm.clipped_mass(pv, rho, model.H, f.T)


def _velocity(sc, out, as_json, threads, report):
    model = sc.model()
    kg = sc.kgrid()
    if "sweep" in sc.config:
        ts = _floats(sc.get("sweep", "T", cast=str))
        lo, hi = _floats(sc.get("partition", "edges", cast=str))[:2]
        m = model.params["m"]
        rows = []
        for T in ts:
            f = sc.smearing(T)
            dv = velocity_family(model, f, kg, sc.slicing()).integrate_set((lo / m, hi / m)).matrix
            dp = momentum_family(model, f, kg, sc.slicing()).integrate_set((lo, hi)).matrix
            rows.append((T, float(np.linalg.norm(dp - m * dv))))
        diffs = [r[1] for r in rows]
        report["checks"]["strictly_decreasing"] = bool(np.all(np.diff(diffs) < 0))
        report["files"] += _write_table(out / f"{sc.name}_sweep.csv", ["T", "norm_Dp_minus_mDv"],
                                        rows, _meta(sc), as_json)
        return
    _binned(sc, out, as_json, report, velocity_family(model, sc.smearing(), kg, sc.slicing(),
                                                      sc.taper()))


def _momentum(sc, out, as_json, threads, report):
    model = sc.model()
    _binned(sc, out, as_json, report,
            momentum_family(model, sc.smearing(), sc.kgrid(), sc.slicing(), sc.taper()))


def _binned(sc, out, as_json, report, fam):
    model = fam.propagators.model
    f = fam.propagators.f
    report["checks"]["completeness_residual"] = fam.completeness_residual()
    rho = sc.state(model)
    edges = sc.edges(fam.window)
    if "pointer" in sc.config:
        pv = povm.build_povm(fam, povm.PointerState.gaussian(sc.get("pointer", "delta")))
        probs = [povm.probability(pv, rho, model.H, f.T, (edges[i], edges[i + 1]))
                 for i in range(len(edges) - 1)]
        _povm_checks(pv, rho, model, f, report)
    else:
        probs = povm.binned_class_probabilities(fam, rho, edges).tolist()
    rows = [(edges[i], edges[i + 1], float(p)) for i, p in enumerate(probs)]
    report["files"] += _write_table(out / f"{sc.name}_probabilities.csv",
                                    ["x_lo", "x_hi", "probability"], rows,
                                    _meta(sc, fam.provenance), as_json)


def _decoherence(sc, out, as_json, threads, report):
    model = sc.model()
    fam = class_family(model, sc.observable(model), sc.smearing(), sc.kgrid(), sc.slicing(),
                       sc.taper(), threads)
    part = histories.Partition(tuple(sc.edges(fam.window)))
    dm = histories.decoherence_matrix(fam, sc.state(model), part)
    report["checks"]["epsilon"] = dm.epsilon
    report["checks"]["hermiticity"] = dm.hermiticity_error()
    report["checks"]["min_eigenvalue"] = dm.min_eigenvalue()
    report["checks"]["total"] = dm.total().real
    meta = _meta(sc, fam.provenance)
    path = histories.export_csv(out / f"{sc.name}_decoherence.csv", dm, meta)
    report["files"].append(path)
    rows = [(len(dm.partition), dm.epsilon)]
    cur = dm
    while len(cur.partition) > 1:
        cur = cur.merged(len(cur.partition) // 2 - 1 if len(cur.partition) > 2 else 0)
        rows.append((len(cur.partition), cur.epsilon))
    report["files"] += _write_table(out / f"{sc.name}_merge.csv", ["n_bins", "epsilon"], rows,
                                    meta, as_json)


def _liouville(sc, out, as_json, threads, report):
    fd = sc.get("phase_space", "fock_dim", 6, int)
    n = sc.get("phase_space", "n", 3, int)
    omega = sc.get("phase_space", "omega", 1.0)
    T = sc.get("phase_space", "T")
    ks = _floats(sc.get("phase_space", "ks", "0, 0.5, 1.0", str))
    conv = sc.get("phase_space", "convention", "overlap", str)
    frame = phase_space.CoherentFrame.polar(fd, sc.get("phase_space", "n_radial", 9, int),
                                            sc.get("phase_space", "n_angle", 28, int))
    report["checks"]["frame_completeness"] = frame.completeness_error()
    rows = []
    for k in ks:
        c = phase_space.functional_class_operator_fixed_k(
            frame, phase_space.harmonic_symbol(omega), phase_space.PathFunctional.liouville(),
            k, n, T, conv).matrix
        ref = oracles.liouville_class_unitary(omega, T, k, fd).matrix
        rows.append((k, phase_space.relative_error(c, ref)))
    report["checks"]["max_relative_error"] = max(r[1] for r in rows)
    report["files"] += _write_table(out / f"{sc.name}_liouville.csv", ["k", "relative_error"],
                                    rows, _meta(sc, {"grid_points": len(frame)}), as_json)


def _apparatus(sc, out, as_json, threads, report):
    model = sc.model()
    A = sc.observable(model)
    f = sc.smearing()
    kg = sc.kgrid()
    fam = class_family(model, A, f, kg, sc.slicing(), None, threads)
    pointer = povm.PointerState.gaussian(sc.get("pointer", "delta"))
    pv = povm.build_povm(fam, pointer)
    rho = sc.state(model)
    p_povm = povm.pointer_distribution(pv, rho, model.H, f.T) * pv.dx
    p_app = povm.apparatus_pointer_distribution(model, A, f, rho, pointer, pv.x_grid, kg,
                                                sc.slicing(), fam.propagators) * pv.dx
    _povm_checks(pv, rho, model, f, report)
    report["checks"]["max_abs_difference"] = float(np.max(np.abs(p_povm - p_app)))
    rows = list(zip(pv.x_grid.tolist(), p_povm.tolist(), p_app.tolist()))
    report["files"] += _write_table(out / f"{sc.name}_apparatus.csv",
                                    ["x", "povm_mass", "apparatus_mass"], rows,
                                    _meta(sc, fam.provenance), as_json)


_RUNNERS = {
    "position_average": _general, "general_observable": _general, "velocity": _velocity,
    "momentum": _momentum, "decoherence_scan": _decoherence,
    "phase_space_liouville": _liouville, "apparatus_crosscheck": _apparatus,
}


def run(sc: Scenario, out_dir=".", as_json: bool = False, threads: int = 1) -> dict:
    """Execute a scenario; returns the report (files, clipped mass, runtime, checks)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"scenario": sc.name, "mode": sc.mode, "files": [], "clipped_mass": None,
              "checks": {}}
    t0 = time.perf_counter()
    try:
        _RUNNERS[sc.mode](sc, out, as_json, threads, report)
    except ConfigError:
        raise
    except TimesmearError as exc:
        exc.args = (f"scenario {sc.name!r}: {exc}",)
        raise
    report["runtime_s"] = time.perf_counter() - t0
    report["files"] = [str(p) for p in report["files"]]
    return report


# -- convergence -------------------------------------------------------------

def _fit_order(xs, errs) -> float:
    return float(-np.polyfit(np.log(xs), np.log(errs), 1)[0])


def convergence_study(sc: Scenario, axis: str, out_dir=None) -> dict:
    """Error against the finest setting along one axis, with a fitted order.

    n_slices: propagators at five k nodes for n = 32 ... 512 against a
    reference four times finer than the finest.  n_k: completeness residual
    over the reporting window.  k_max: bin-integrated class operators against
    the oracle when available, else the window residual.  z_grid: Liouville
    error as the angle grid is refined.
    """
    if axis not in AXES:
        raise ConfigError("axis", f"unknown value {axis!r}; expected one of {AXES}")
    rows = []
    order = None
    if axis == "z_grid":
        if sc.mode != "phase_space_liouville":
            raise ConfigError("axis", "z_grid applies to phase_space_liouville only")
        fd = sc.get("phase_space", "fock_dim", 6, int)
        n = sc.get("phase_space", "n", 3, int)
        omega = sc.get("phase_space", "omega", 1.0)
        T = sc.get("phase_space", "T")
        ks = _floats(sc.get("phase_space", "ks", "0, 0.5, 1.0", str))
        for n_angle in (12, 16, 20, 24, 28):
            frame = phase_space.CoherentFrame.polar(fd, 9, n_angle)
            err = max(phase_space.relative_error(
                phase_space.functional_class_operator_fixed_k(
                    frame, phase_space.harmonic_symbol(omega),
                    phase_space.PathFunctional.liouville(), k, n, T).matrix,
                oracles.liouville_class_unitary(omega, T, k, fd).matrix) for k in ks)
            rows.append((len(frame), err))
    else:
        if sc.mode not in ("general_observable", "position_average"):
            raise ConfigError("axis", f"{axis} needs a general_observable scenario")
        model = sc.model()
        A = sc.observable(model)
        f = sc.smearing()
        kg = sc.kgrid()
        if axis == "n_slices":
            ks = np.linspace(-kg.k_max / 4, kg.k_max / 4, 5)
            scheme = sc.get("grid", "scheme", "strang", str)
            ns = [32, 64, 128, 256, 512]
            ref = evolve_batch(model.H.matrix, A.matrix, f, ks, TimeSlicing(4 * ns[-1], scheme))
            for n in ns:
                u = evolve_batch(model.H.matrix, A.matrix, f, ks, TimeSlicing(n, scheme))
                rows.append((n, float(np.max(np.linalg.norm(u - ref, axis=(1, 2))))))
            order = _fit_order(*zip(*rows))
        elif axis == "n_k":
            kg.check_alias(spread_bound(A, f))
            n_top = kg.n_k
            for nk in sorted({max(33, (n_top // 2**j) | 1) for j in range(5)}):
                fam = class_family(model, A, f, KGrid(kg.k_max, nk), sc.slicing())
                rows.append((nk, fam.completeness_residual("safe")))
        else:
            for scale in (0.25, 0.5, 1.0):
                sub = KGrid(kg.k_max * scale, ((kg.n_k - 1) // 2 // int(1 / scale)) * 2 + 1)
                fam = class_family(model, A, f, sub, sc.slicing())
                if model.name == "two_level" and A is model.observables.get("sx"):
                    # bins inside the support: pointwise C(a) rings at the edge
                    # point masses for any k_max, bin integrals converge
                    err = 0.0
                    for lo, hi in ((-0.75, -0.25), (-0.25, 0.25), (0.25, 0.75)):
                        c_u = fam.back_evolution.conj().T @ fam.integrate_set((lo, hi)).matrix
                        ref = oracles.two_level_bin(model.params["omega"], f.T, lo, hi)
                        err = max(err, float(np.linalg.norm(c_u - ref)))
                else:
                    err = fam.completeness_residual("safe")
                rows.append((sub.k_max, err))
    result = {"axis": axis, "rows": rows, "order": order,
              "monotone_decreasing": bool(np.all(np.diff([r[1] for r in rows]) < 0))}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta = _meta(sc, {"axis": axis, "fitted_order": order})
        result["file"] = str(_write_table(out / f"{sc.name}_convergence_{axis}.csv",
                                          [axis, "error"], rows, meta, False)[0])
    return result


# -- entry point -------------------------------------------------------------

def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="timesmear", description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="INI scenario file")
    src.add_argument("--scenario", help="name of a built-in scenario")
    src.add_argument("--list-scenarios", action="store_true", help="list built-in scenarios")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--json", action="store_true", help="also write JSON mirrors of the tables")
    ap.add_argument("--threads", type=int, default=1, help="cap on data-parallel width")
    ap.add_argument("--convergence", choices=AXES, help="run a convergence study on this axis")
    args = ap.parse_args(argv)
    if args.list_scenarios:
        for name in BUILTIN:
            print(name)
        return 0
    try:
        sc = Scenario.from_file(args.config) if args.config else Scenario.builtin(args.scenario)
        if args.convergence:
            res = convergence_study(sc, args.convergence, args.out)
        else:
            res = run(sc, args.out, args.json, args.threads)
    except TimesmearError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(res, indent=1, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
