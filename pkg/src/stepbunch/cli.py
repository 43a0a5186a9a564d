"""Command-line interface.

Every subcommand reads a JSON configuration (``--config``), writes its
outputs atomically into ``--out`` and prints a one-line JSON summary.
Exit codes: 0 success, 2 invalid input, 3 numerical failure, 64 unknown
subcommand.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import csv
import json
import math
import os
import sys
from dataclasses import asdict, fields

import numpy as np

from .asymptotics import TestSurface, consistency_experiment, convergence_table, dipole_ratio_for_gamma, \
    exponential_integrand
from .discrete import DynamicsOptions, StepConfiguration, step_dynamics, uniform_train
from .energy import total_energy
from .errors import ConfigurationError, NumericalFailure, StepBunchError
from .experiments import bunching_evidence, scaling_sweep
from .kernel import build_kernel_table, kernel_derivative, kernel_value
from .minimize import (
    MinimizeOptions,
    ansatz_profile,
    evolve_continuum,
    minimize_energy,
    perturbed_uniform,
    random_feasible,
)
from .profile import GridProfile, atomic_write_text, format_float, read_profile_csv, write_profile_csv
from .special import ModelParams, PhysicalParams, derive_model_params, equilibrium_spacing

__all__ = ["main", "run", "COMMANDS"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64

COMMANDS = ("kernel", "energy", "minimize", "evolve", "evolve-steps", "consistency", "quadrature",
            "scaling", "evidence")

USAGE = (
    "usage: stepbunch <command> --config CONFIG [--out DIR] [--threads N]\n"
    "commands: " + ", ".join(COMMANDS) + "\n"
)


# --------------------------------------------------------------------------- config


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return cfg


def _section(cfg, key, required=False):
    v = cfg.get(key)
    if v is None:
        if required:
            raise ConfigurationError(f"missing section '{key}'")
        return {}
    if not isinstance(v, dict):
        raise ConfigurationError(f"section '{key}' must be an object")
    return v


def _check_keys(d, allowed, where):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown keys in {where}: {', '.join(extra)}")


def _num(d, key, where, default=None, integer=False):
    if key not in d:
        if default is None:
            raise ConfigurationError(f"missing '{key}' in {where}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"'{key}' in {where} must be a number")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigurationError(f"'{key}' in {where} must be an integer")
        return int(v)
    return float(v)


def _check_flux(d):
    """Deposition flux is accepted for completeness but only zero is modelled."""
    if "F_ad" in d and _num(d, "F_ad", "physical") != 0.0:
        raise ConfigurationError("only F_ad = 0 is supported")


def resolve_params(cfg):
    """``(ModelParams, resolved dict)`` from a ``model`` or ``physical`` section."""
    has_model, has_phys = "model" in cfg, "physical" in cfg
    if has_model == has_phys:
        raise ConfigurationError("exactly one of 'model' and 'physical' must be given")
    if has_model:
        d = _section(cfg, "model")
        _check_keys(d, ("m", "n", "gamma", "epsilon", "A"), "model")
        p = ModelParams(m=_num(d, "m", "model"), n=_num(d, "n", "model"), epsilon=_num(d, "epsilon", "model"),
                        gamma=_num(d, "gamma", "model"), A=_num(d, "A", "model"))
        return p, {"model": asdict(p)}
    d = _section(cfg, "physical")
    _check_keys(d, ("alpha1", "alpha2", "a", "m", "n", "A", "F_ad"), "physical")
    _check_flux(d)
    pp = PhysicalParams(alpha1=_num(d, "alpha1", "physical"), alpha2=_num(d, "alpha2", "physical"),
                        lattice_a=_num(d, "a", "physical"), m=_num(d, "m", "physical"), n=_num(d, "n", "physical"))
    p = derive_model_params(pp, _num(d, "A", "physical", 1.0))
    return p, {"physical": dict(d, A=p.A), "model": asdict(p)}


def resolve_physical(cfg):
    d = _section(cfg, "physical", required=True)
    _check_keys(d, ("alpha1", "alpha2", "a", "m", "n", "A", "F_ad"), "physical")
    _check_flux(d)
    pp = PhysicalParams(alpha1=_num(d, "alpha1", "physical"), alpha2=_num(d, "alpha2", "physical"),
                        lattice_a=_num(d, "a", "physical"), m=_num(d, "m", "physical"), n=_num(d, "n", "physical"))
    return pp, {"physical": {"alpha1": pp.alpha1, "alpha2": pp.alpha2, "a": pp.lattice_a, "m": pp.m, "n": pp.n}}


def resolve_grid(cfg):
    d = _section(cfg, "grid", required=True)
    _check_keys(d, ("N",), "grid")
    N = _num(d, "N", "grid", integer=True)
    if N < 16 or N & (N - 1):
        raise ConfigurationError(f"grid N must be a power of two >= 16, got {N}")
    return N


def resolve_solver(cfg):
    d = _section(cfg, "solver")
    names = [f.name for f in fields(MinimizeOptions)]
    _check_keys(d, names, "solver")
    kw = {}
    for f in fields(MinimizeOptions):
        if f.name in d:
            kw[f.name] = _num(d, f.name, "solver", integer=isinstance(f.default, int))
    if "seed" in cfg and "seed" not in kw:
        kw["seed"] = _num(cfg, "seed", "config", integer=True)
    opts = MinimizeOptions(**kw)
    return opts, asdict(opts)


def resolve_init(cfg, params, N, seed):
    init_cfg = cfg.get("init", "perturbed")
    if isinstance(init_cfg, str):
        init_cfg = {"type": init_cfg}
    if not isinstance(init_cfg, dict):
        raise ConfigurationError("'init' must be a string or an object")
    _check_keys(init_cfg, ("type", "amplitude", "k", "modes", "path", "seed"), "init")
    kind = init_cfg.get("type", "perturbed")
    if kind == "uniform":
        return GridProfile.uniform(N, params.A), {"type": "uniform"}
    if kind == "perturbed":
        amp = _num(init_cfg, "amplitude", "init", 0.01)
        k = _num(init_cfg, "k", "init", 1, integer=True)
        return perturbed_uniform(N, params.A, amp, k), {"type": "perturbed", "amplitude": amp, "k": k}
    if kind == "random":
        s = _num(init_cfg, "seed", "init", seed, integer=True)
        modes = _num(init_cfg, "modes", "init", 8, integer=True)
        amp = _num(init_cfg, "amplitude", "init", 0.9)
        return random_feasible(N, params.A, s, modes, amp), {"type": "random", "seed": s, "modes": modes,
                                                             "amplitude": amp}
    if kind == "ansatz":
        return ansatz_profile(params, N), {"type": "ansatz"}
    if kind == "file":
        path = init_cfg.get("path")
        if not isinstance(path, str):
            raise ConfigurationError("init of type 'file' needs a 'path'")
        prof = read_profile_csv(path, params.A)
        if prof.N != N:
            raise ConfigurationError(f"profile has {prof.N} points, grid N is {N}")
        return prof, {"type": "file", "path": path}
    raise ConfigurationError(f"unknown init type '{kind}'")


def config_hash(resolved):
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------- output


def _clean(v):
    """JSON-safe copy: non-finite floats become null, arrays become lists."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path, obj):
    atomic_write_text(path, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    atomic_write_text(path, buf.getvalue())


class Run:
    """Collects outputs and the provenance block of one invocation."""

    def __init__(self, command, out_dir, threads):
        self.command = command
        self.out = out_dir
        self.threads = threads
        self.resolved = {}
        self.outputs = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.out, name)
        self.outputs.append(p)
        return p

    def report(self, body):
        rep = {"command": self.command, "config": self.resolved, "config_hash": config_hash(self.resolved)}
        rep.update(body)
        return rep


# --------------------------------------------------------------------------- commands


def cmd_kernel(cfg, run: Run):
    _check_keys(cfg, ("kernel", "model", "physical", "grid", "action"), "config")
    if "kernel" in cfg:
        d = _section(cfg, "kernel")
        _check_keys(d, ("m", "N"), "kernel")
        m = _num(d, "m", "kernel")
        N = _num(d, "N", "kernel", integer=True)
    else:
        params, _ = resolve_params(cfg)
        m, N = params.m, resolve_grid(cfg)
    K = build_kernel_table(m, N)
    run.resolved = {"kernel": {"m": m, "N": N}}
    # cell midpoints avoid the singular point z = 0
    z = -0.5 + (np.arange(N) + 0.5) / N
    Kz = kernel_value(m, z)
    dK = kernel_derivative(m, z)
    write_csv(run.path("kernel.csv"), ["z", "K", "Kprime"], zip(z, Kz, dK))
    mult = [(k, float(K.multipliers[k])) for k in range(N // 2 + 1)]
    write_csv(run.path("multipliers.csv"), ["k", "K_hat"], mult)
    rep = run.report({"l1_norm": K.l1_norm, "K_hat_1": float(K.multipliers[1])})
    write_json(run.path("kernel.json"), rep)
    return {"l1_norm": K.l1_norm}


def cmd_energy(cfg, run: Run):
    _check_keys(cfg, ("model", "physical", "profile"), "config")
    params, res = resolve_params(cfg)
    path = cfg.get("profile")
    if not isinstance(path, str):
        raise ConfigurationError("'profile' must name a profile CSV")
    prof = read_profile_csv(path, params.A)
    K = build_kernel_table(params.m, prof.N)
    e = total_energy(prof, K, params)
    run.resolved = dict(res, profile=path, N=prof.N)
    rep = run.report(e.as_dict())
    write_json(run.path("energy.json"), rep)
    return e.as_dict()


def cmd_minimize(cfg, run: Run):
    _check_keys(cfg, ("model", "physical", "grid", "solver", "init", "seed"), "config")
    params, res = resolve_params(cfg)
    N = resolve_grid(cfg)
    opts, ores = resolve_solver(cfg)
    init, ires = resolve_init(cfg, params, N, opts.seed)
    run.resolved = dict(res, grid={"N": N}, solver=ores, init=ires)
    K = build_kernel_table(params.m, N)
    r = minimize_energy(init, K, params, opts)
    write_profile_csv(run.path("profile.csv"), r.profile)
    body = {
        "energy": r.energy.as_dict(),
        "iterations": r.iterations,
        "converged": r.converged,
        "el_residual": r.el_residual,
        "R0": r.R0,
        "grad_norm": r.grad_norm,
    }
    write_json(run.path("result.json"), run.report(body))
    return {"total": r.energy.total, "iterations": r.iterations, "converged": r.converged, "R0": r.R0}


def cmd_evolve(cfg, run: Run):
    _check_keys(cfg, ("model", "physical", "grid", "init", "evolve", "seed"), "config")
    params, res = resolve_params(cfg)
    N = resolve_grid(cfg)
    d = _section(cfg, "evolve", required=True)
    _check_keys(d, ("T", "dt", "snapshot_interval", "max_halvings"), "evolve")
    T = _num(d, "T", "evolve")
    dt = _num(d, "dt", "evolve")
    snap = d.get("snapshot_interval")
    snap = None if snap is None else _num(d, "snapshot_interval", "evolve")
    halvings = _num(d, "max_halvings", "evolve", 20, integer=True)
    if halvings < 0:
        raise ConfigurationError("max_halvings must be nonnegative")
    seed = _num(cfg, "seed", "config", 0, integer=True)
    init, ires = resolve_init(cfg, params, N, seed)
    run.resolved = dict(res, grid={"N": N}, evolve={"T": T, "dt": dt, "snapshot_interval": snap, "max_halvings": halvings}, init=ires)
    K = build_kernel_table(params.m, N)
    snaps = []
    if snap is not None:
        os.makedirs(os.path.join(run.out, "snapshots"), exist_ok=True)

    def on_snapshot(t, prof):
        name = os.path.join("snapshots", f"snapshot_{len(snaps):05d}.csv")
        write_profile_csv(run.path(name), prof)
        snaps.append((len(snaps), t, name))

    final = evolve_continuum(init, K, params, T, dt, snapshot_interval=snap,
                             on_snapshot=on_snapshot if snap is not None else None, max_halvings=halvings)
    write_profile_csv(run.path("profile.csv"), final)
    if snaps:
        write_csv(run.path("snapshots.csv"), ["index", "t", "file"], [(i, float(t), f) for i, t, f in snaps])
    e = total_energy(final, K, params)
    body = {"energy": e.as_dict(), "T": T, "snapshots": len(snaps)}
    write_json(run.path("result.json"), run.report(body))
    return {"total": e.total, "snapshots": len(snaps)}


def cmd_evolve_steps(cfg, run: Run):
    _check_keys(cfg, ("physical", "steps", "dynamics"), "config")
    pp, res = resolve_physical(cfg)
    d = _section(cfg, "steps", required=True)
    _check_keys(d, ("Ns", "L", "positions", "perturb", "stride"), "steps")
    if "positions" in d:
        L = _num(d, "L", "steps")
        pos = d["positions"]
        if not isinstance(pos, list):
            raise ConfigurationError("'positions' must be a list")
        c = StepConfiguration(L, np.array(pos, dtype=float), pp.lattice_a)
    else:
        Ns = _num(d, "Ns", "steps", integer=True)
        L = _num(d, "L", "steps")
        c = uniform_train(Ns, L, pp.lattice_a)
    if "perturb" in d:
        pert = d["perturb"]
        if not (isinstance(pert, list) and all(isinstance(q, list) and len(q) == 2 for q in pert)):
            raise ConfigurationError("'perturb' must be a list of [index, shift] pairs")
        x = np.array(c.positions)
        for i, s in pert:
            x[int(i) % c.Ns] += float(s)
        c = StepConfiguration(c.L, x, c.lattice_a)
    stride = _num(d, "stride", "steps", 1, integer=True)
    if stride < 1:
        raise ConfigurationError("stride must be at least 1")
    dd = _section(cfg, "dynamics", required=True)
    _check_keys(dd, ("t_end", "dt_init", "rel_tol", "abs_tol", "min_spacing_stop", "snapshot_dt"), "dynamics")
    opts = DynamicsOptions(**{k: float(v) for k, v in dd.items() if v is not None})
    if opts.min_spacing_stop is None:
        opts = DynamicsOptions(**dict(asdict(opts), min_spacing_stop=1e-3 * equilibrium_spacing(pp)))
    run.resolved = dict(res, steps={"L": c.L, "positions": c.positions.tolist(), "stride": stride},
                        dynamics=asdict(opts))
    tr = step_dynamics(c, pp, opts)
    idx = list(range(0, tr.times.size, stride))
    if idx[-1] != tr.times.size - 1:
        idx.append(tr.times.size - 1)
    header = ["t"] + [f"x_{i}" for i in range(c.Ns)]
    write_csv(run.path("trajectory.csv"), header, ([tr.times[j]] + list(tr.positions[j]) for j in idx))
    body = {"t_final": float(tr.times[-1]), "stopped_early": tr.stopped_early, "reason": tr.reason,
            "min_spacing_final": float(tr.min_spacing[-1]), "snapshots": len(idx)}
    write_json(run.path("result.json"), run.report(body))
    return body


def cmd_consistency(cfg, run: Run):
    _check_keys(cfg, ("surface", "physical", "interaction", "a_list", "xi", "N"), "config")
    s = _section(cfg, "surface", required=True)
    _check_keys(s, ("A", "delta"), "surface")
    ts = TestSurface(_num(s, "A", "surface"), _num(s, "delta", "surface"))
    a_list = cfg.get("a_list")
    if not (isinstance(a_list, list) and a_list):
        raise ConfigurationError("'a_list' must be a nonempty list")
    a_list = [float(a) for a in a_list]
    if "interaction" in cfg:
        d = _section(cfg, "interaction")
        _check_keys(d, ("m", "n", "gamma"), "interaction")
        m, n, g = _num(d, "m", "interaction"), _num(d, "n", "interaction"), _num(d, "gamma", "interaction")
        a0 = a_list[0]
        pp = PhysicalParams(1.0, dipole_ratio_for_gamma(g, m, n, a0), a0, m, n)
        res = {"interaction": {"m": m, "n": n, "gamma": g}}
    else:
        pp, res = resolve_physical(cfg)
    xi = _num(cfg, "xi", "config", 0.25)
    N = _num(cfg, "N", "config", 256, integer=True)
    run.resolved = dict(res, surface={"A": ts.A, "delta": ts.delta}, a_list=a_list, xi=xi, N=N)
    rows = consistency_experiment(ts, pp, a_list, xi=xi, N=N)
    write_csv(run.path("consistency.csv"), ["a", "mu_atomistic", "mu_continuum", "ratio"],
              ((r.a, r.mu_atomistic, r.mu_continuum, r.ratio) for r in rows))
    ratios = [abs(r.ratio) for r in rows]
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    body = {"rows": [asdict(r) for r in rows], "strictly_decreasing": decreasing}
    write_json(run.path("consistency.json"), run.report(body))
    return {"strictly_decreasing": decreasing, "last_ratio": rows[-1].ratio}


def cmd_quadrature(cfg, run: Run):
    _check_keys(cfg, ("m", "p", "a_list", "omit", "floor"), "config")
    m = _num(cfg, "m", "config")
    p = _num(cfg, "p", "config", integer=True)
    a_list = cfg.get("a_list", [2.0 ** -k for k in range(4, 13)])
    if not (isinstance(a_list, list) and a_list):
        raise ConfigurationError("'a_list' must be a nonempty list")
    omit = cfg.get("omit", [])
    if not isinstance(omit, list):
        raise ConfigurationError("'omit' must be a list of orders")
    floor = _num(cfg, "floor", "config", 1e-14)
    run.resolved = {"m": m, "p": p, "a_list": [float(a) for a in a_list], "omit": [int(r) for r in omit],
                    "floor": floor}
    exact = math.gamma(1.0 - m)
    rows = convergence_table(exponential_integrand(), m, p, exact, [float(a) for a in a_list],
                             omit=tuple(int(r) for r in omit), floor=floor)
    write_csv(run.path("quadrature.csv"), ["a", "error", "observed_order"], rows)
    orders = [r[2] for r in rows if math.isfinite(r[2])]
    body = {"exact": exact, "rows": rows, "min_observed_order": min(orders) if orders else None}
    write_json(run.path("quadrature.json"), run.report(body))
    return {"min_observed_order": body["min_observed_order"]}


def cmd_scaling(cfg, run: Run):
    _check_keys(cfg, ("model", "physical", "grid", "solver", "eps_list", "restarts", "exploratory", "seed"),
                "config")
    params, res = resolve_params(cfg)
    N = resolve_grid(cfg)
    opts, ores = resolve_solver(cfg)
    eps = cfg.get("eps_list")
    if not (isinstance(eps, list) and eps):
        raise ConfigurationError("'eps_list' must be a nonempty list")
    restarts = _num(cfg, "restarts", "config", 1, integer=True)
    expl = bool(cfg.get("exploratory", False))
    run.resolved = dict(res, grid={"N": N}, solver=ores, eps_list=[float(e) for e in eps], restarts=restarts,
                        exploratory=expl)
    rep = scaling_sweep(params, eps, N, opts, threads=run.threads, restarts=restarts, exploratory=expl)
    write_csv(run.path("scaling.csv"), ["epsilon", "E_min", "R0", "iterations"],
              ((r.epsilon, r.E_min, r.R0, r.iterations) for r in rep.rows))
    body = rep.as_dict()
    body["band_reference"] = rep.band(-params.A ** 2 / params.n)
    body["band_half_rate"] = rep.band(-params.A ** 2 / (2.0 * params.n))
    write_json(run.path("scaling.json"), run.report(body))
    return {"fitted_slope": rep.fitted_slope, "fitted_intercept": rep.fitted_intercept}


def cmd_evidence(cfg, run: Run):
    _check_keys(cfg, ("model", "physical", "grid", "solver", "seeds", "restarts", "seed"), "config")
    params, res = resolve_params(cfg)
    N = resolve_grid(cfg)
    opts, ores = resolve_solver(cfg)
    seeds = cfg.get("seeds", 5)
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    if not (isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds)):
        raise ConfigurationError("'seeds' must be a positive count or a list of integers")
    restarts = _num(cfg, "restarts", "config", 1, integer=True)
    run.resolved = dict(res, grid={"N": N}, solver=ores, seeds=seeds, restarts=restarts)
    rep = bunching_evidence(params, N, opts, seeds, threads=run.threads, restarts=restarts)
    body = rep.as_dict()
    body.update(max_symmetry_defect=rep.max_symmetry_defect,
                max_rearrangement_defect=rep.max_rearrangement_defect,
                max_relative_el_residual=rep.max_relative_el_residual)
    write_json(run.path("evidence.json"), run.report(body))
    write_profile_csv(run.path("profile.csv"), rep.profile)
    return {"relative_spread": rep.relative_spread, "max_symmetry_defect": rep.max_symmetry_defect,
            "max_rearrangement_defect": rep.max_rearrangement_defect}


HANDLERS = {
    "kernel": cmd_kernel,
    "energy": cmd_energy,
    "minimize": cmd_minimize,
    "evolve": cmd_evolve,
    "evolve-steps": cmd_evolve_steps,
    "consistency": cmd_consistency,
    "quadrature": cmd_quadrature,
    "scaling": cmd_scaling,
    "evidence": cmd_evidence,
}


# --------------------------------------------------------------------------- entry


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("STEPBUNCH_THREADS")
    if env is None or env == "":
        return 1
    try:
        v = int(env)
    except ValueError:
        raise ConfigurationError(f"STEPBUNCH_THREADS must be an integer, got {env!r}") from None
    return v


def _parser(command):
    ap = argparse.ArgumentParser(prog=f"stepbunch {command}", add_help=True)
    if command == "kernel":
        ap.add_argument("action", nargs="?", default="dump", choices=["dump"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=".")
    ap.add_argument("--threads", type=int, default=None)
    return ap


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _dump_payload(out, exc):
    """Write the failing iterate next to the other outputs, if there is one."""
    pay = getattr(exc, "payload", None)
    if not isinstance(pay, np.ndarray) or pay.ndim != 1 or not np.issubdtype(pay.dtype, np.floating):
        return
    try:
        os.makedirs(out, exist_ok=True)
        write_csv(os.path.join(out, "failure_iterate.csv"), ["index", "value"],
                  ((i, float(v)) for i, v in enumerate(pay)))
    except OSError:
        pass


def _emit(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(_clean(obj), sort_keys=True, separators=(",", ":")) + "\n")
    stream.flush()


def run(argv) -> int:
    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        sys.stderr.write(USAGE)
        return EXIT_OK if argv else EXIT_USAGE
    command = argv[0]
    if command not in HANDLERS:
        sys.stderr.write(f"unknown command '{command}'\n" + USAGE)
        return EXIT_USAGE
    ap = _parser(command)
    ap.__class__ = _Parser
    try:
        args = ap.parse_args(argv[1:])
    except _ArgError as exc:
        sys.stderr.write(f"stepbunch {command}: {exc}\n")
        _emit({"command": command, "status": "error", "error": "usage", "message": str(exc)})
        return EXIT_INVALID
    try:
        threads = _threads(args.threads)
        if threads < 1:
            raise ConfigurationError("thread count must be at least 1")
        cfg = load_config(args.config)
        r = Run(command, args.out, threads)
        summary = HANDLERS[command](cfg, r)
    except NumericalFailure as exc:
        sys.stderr.write(f"stepbunch {command}: numerical failure: {exc}\n")
        _dump_payload(args.out, exc)
        _emit({"command": command, "status": "error", "error": type(exc).__name__, "message": str(exc),
               "time": getattr(exc, "time", None)})
        return EXIT_NUMERICAL
    except (StepBunchError, ValueError) as exc:
        sys.stderr.write(f"stepbunch {command}: {exc}\n")
        _emit({"command": command, "status": "error", "error": type(exc).__name__, "message": str(exc)})
        return EXIT_INVALID
    _emit(dict(command=command, status="ok", config_hash=config_hash(r.resolved), outputs=r.outputs,
               **summary))
    return EXIT_OK


def main(argv=None):
    sys.exit(run(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
