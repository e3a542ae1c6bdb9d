"""Command-line front end.

Every subcommand builds an effective configuration from built-in defaults,
an optional ``--config`` JSON file and explicit flags (in increasing
priority), runs the computation and writes results under ``--out``.  The
effective configuration and the package version are embedded in every
output file.

Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 invariant
violation (e.g. a coupling defect).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import equilibria as eq
from . import mfode, nsim, stability
from .core import DarParams, NlMm1Model, ProbVec, RistParams, RngStream, dar_space, enumerate_rist_space, trunc_space

EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_INVARIANT = 4

COMMON = {"seed": 0, "out": None, "plot": False, "jobs": 1}

DEFAULTS = {
    ("equilibria", "rist"): {"rho1": 1.0, "rho2": 2.0, "C": 3},
    ("equilibria", "rist1"): {"rho1": 1.0, "rho2": 2000.0, "C": 400},
    ("equilibria", "dar"): {"nu": 0.97, "a": 2.0, "C": 100},
    ("equilibria", "dar-limit"): {"nu": 0.97, "a": 2.0},
    ("equilibria", "nlmm1"): {"nu": 1.4, "a": 2.0},
    ("ode", "rist"): {"lam": 2.0, "mu1": 1.0, "mu2": 0.5, "C": 3, "init": "empty", "eta": 1e-3,
                      "horizon": 5.0, "dt": None},
    ("ode", "rist-p0"): {"lam": 2.0, "mu1": 1.0, "mu2": 0.5, "C": 3, "p0": 1, "init": "empty",
                         "eta": 1e-3, "horizon": 5.0, "dt": None},
    ("ode", "dar"): {"nu": 0.5, "a": 2.0, "C": 5, "init": "empty", "eta": 1e-3, "horizon": 5.0, "dt": None},
    ("ode", "nlmm1"): {"nu": 1.4, "a": 2.0, "K": 200, "init": "equilibrium", "eta": 1e-3,
                       "horizon": 40.0, "dt": None},
    ("simulate", "rist"): {"N": 1000, "lam": 2.0, "mu1": 1.0, "mu2": 0.5, "C": 3, "p0": None,
                           "init": "empty", "eta": 0.3, "horizon": 5.0, "dt": None},
    ("simulate", "dar"): {"N": 1000, "nu": 0.5, "a": 2.0, "C": 5, "horizon": 5.0, "dt": None},
    ("simulate", "u"): {"N": 100, "lam": 2.0, "mu1": 1.0, "mu2": 0.2, "C": 3, "u0": 30, "u1": 0,
                        "horizon": 10.0, "dt": None},
    ("couple-check", None): {"N": 100, "lam": 2.0, "mu1": 1.0, "mu2": 0.2, "C": 3, "eta": 0.3,
                             "horizon": 10.0, "seeds": 100},
    ("saturation", None): {"N": 500, "lam": 2.0, "mu1": 1.0, "mu2": 0.2, "C": 3, "eta": 0.3,
                           "t0": 1.0, "T": 10.0, "eps": 0.5, "runs": 50},
    ("stability", "rist"): {"lam": 1.0, "mu1": 1.0, "mu2": 0.5, "C": 3},
    ("stability", "nlmm1"): {"nu": 1.4, "a": 2.0},
    ("stability", "interval"): {"a": 2.0},
    ("stability", "probe"): {"system": "dar", "nu": 0.5, "a": 2.0, "C": 20, "lam": 1.0, "mu1": 1.0,
                             "mu2": 0.5, "K": None, "directions": 4, "probe_horizon": 40.0},
    ("sweep", None): {"var": "nu", "start": 0.9, "stop": 1.02, "num": 121, "a": 2.0, "C": 1000,
                      "rho1": 1.0, "rho2": 2.0, "stability": False},
}

MODELS = {
    "equilibria": ["rist", "rist1", "dar", "dar-limit", "nlmm1"],
    "ode": ["rist", "rist-p0", "dar", "nlmm1"],
    "simulate": ["rist", "dar", "u"],
    "stability": ["rist", "nlmm1", "interval", "probe"],
}

_TYPES = {"C": int, "N": int, "p0": int, "K": int, "u0": int, "u1": int, "seeds": int, "runs": int,
          "num": int, "directions": int}


class UsageError(ValueError):
    pass


# ----------------------------------------------------------------------------
# parser and configuration
# ----------------------------------------------------------------------------


def _option_names(command: str) -> set:
    names = set()
    for (cmd, _), d in DEFAULTS.items():
        if cmd == command:
            names.update(d)
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with parameter values")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--plot", action="store_true", help="also write an SVG plot")
    common.add_argument("--jobs", type=int, help="worker processes for batches and sweeps")

    parser = argparse.ArgumentParser(prog="reroute-mf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command in ["equilibria", "ode", "simulate", "couple-check", "saturation", "stability", "sweep"]:
        p = sub.add_parser(command, parents=[common], argument_default=argparse.SUPPRESS)
        if command in MODELS:
            p.add_argument("model", choices=MODELS[command])
        for name in sorted(_option_names(command)):
            flag = "--" + name.replace("_", "-")
            if name == "stability":
                p.add_argument(flag, action="store_true", help="compute stability verdicts per root")
            elif name in ("init", "system", "var"):
                p.add_argument(flag)
            else:
                p.add_argument(flag, type=_TYPES.get(name, float), dest=name)
    return parser


def effective_config(args: argparse.Namespace) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    given = vars(args).copy()
    command = given.pop("command")
    model = given.pop("model", None)
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[(command, model)])
    path = given.pop("config", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        allowed = set(cfg) | {"command", "model"}
        unknown = set(loaded) - allowed
        if unknown:
            raise UsageError(f"unknown config keys for {command} {model or ''}: {sorted(unknown)}")
        loaded.pop("command", None)
        if loaded.pop("model", model) != model:
            raise UsageError("config model does not match the command line")
        cfg.update(loaded)
    unknown = set(given) - set(cfg)
    if unknown:
        raise UsageError(f"options {sorted(unknown)} do not apply to {command} {model or ''}")
    cfg.update(given)
    for k, typ in _TYPES.items():
        if cfg.get(k) is not None and k in cfg:
            cfg[k] = typ(cfg[k])
    cfg["command"] = command
    if model is not None:
        cfg["model"] = model
    return cfg


def _outdir(cfg) -> Path | None:
    if cfg["out"] is None:
        return None
    d = Path(cfg["out"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _json_payload(cfg, body: dict) -> str:
    return json.dumps({"version": __version__, "config": cfg, **body}, indent=2, sort_keys=True, default=float)


def _emit_json(cfg, name: str, body: dict):
    text = _json_payload(cfg, body)
    print(text)
    d = _outdir(cfg)
    if d is not None:
        (d / name).write_text(text + "\n")


def _rist_params(cfg, p0=None) -> RistParams:
    return RistParams(cfg["lam"], cfg["mu1"], cfg["mu2"], cfg["C"], p0)


# ----------------------------------------------------------------------------
# equilibria
# ----------------------------------------------------------------------------


def equilibria_report(cfg) -> eq.EquilibriumReport:
    m = cfg["model"]
    if m == "rist":
        return eq.rist_equilibria(cfg["rho1"], cfg["rho2"], cfg["C"])
    if m == "rist1":
        return eq.rist1_equilibria(cfg["rho1"], cfg["rho2"], cfg["C"])
    if m == "dar":
        return eq.dar_fixed_points(cfg["nu"], cfg["a"], cfg["C"])
    if m == "dar-limit":
        return eq.dar_limit_fixed_points(cfg["nu"], cfg["a"])
    return eq.nlmm1_fixed_points(cfg["nu"], a=cfg["a"])


def cmd_equilibria(cfg) -> int:
    rep = equilibria_report(cfg)
    _emit_json(cfg, f"equilibria_{cfg['model']}.json", rep.to_dict())
    return 0


# ----------------------------------------------------------------------------
# ode
# ----------------------------------------------------------------------------


def _mix(space, n, hi: int, lo: int, eta: float) -> ProbVec:
    v = np.zeros(n)
    v[hi] = 1.0 - eta
    v[lo] += eta
    return ProbVec(v, space)


def ode_setup(cfg):
    """``(system, params, init, opts)`` for an ``ode`` configuration."""
    m, init, eta = cfg["model"], cfg["init"], cfg["eta"]
    opts = mfode.OdeOptions()
    if m in ("rist", "rist-p0"):
        params = _rist_params(cfg, cfg["p0"] if m == "rist-p0" else None)
        space = enumerate_rist_space(params.C)
        if init == "empty":
            x0 = ProbVec.point_mass(space, space.idx(0, 0))
        elif init == "saturated":
            x0 = _mix(space, len(space), space.idx(0, params.C), space.idx(0, 0), eta)
        elif init == "equilibrium":
            rep = eq.rist_equilibria(params.rho1, params.rho2, params.C)
            if not rep.roots:
                raise UsageError("no equilibrium to start from")
            x0 = eq.rist_pi(rep.roots[0].value, params)
        else:
            raise UsageError(f"unknown init {init!r}")
        return m, params, x0, opts
    if m == "dar":
        params = DarParams(cfg["nu"], cfg["a"], cfg["C"])
        C = params.C
        if init == "empty":
            x0 = ProbVec.point_mass(dar_space(C), 0)
        elif init == "saturated":
            x0 = _mix(dar_space(C), C + 1, C, 0, eta)
        else:
            raise UsageError(f"unknown init {init!r}")
        return m, params, x0, opts
    model = NlMm1Model(cfg["nu"], a=cfg["a"])
    opts = mfode.OdeOptions(K=cfg["K"])
    space = trunc_space(cfg["K"])
    if init == "equilibrium":
        rep = eq.nlmm1_fixed_points(cfg["nu"], a=cfg["a"])
        if not rep.roots:
            raise UsageError("no equilibrium to start from")
        pi = eq.nlmm1_pi(rep.roots[0].value, cfg["K"]).values.copy()
        shift = eta / math.sqrt(2.0)
        pi[0] -= shift
        pi[1] += shift
        x0 = ProbVec(pi, space)
    elif init == "saturated":
        x0 = _mix(space, cfg["K"] + 1, 0, 1, eta)
    else:
        raise UsageError(f"unknown init {init!r}")
    return m, model, x0, opts


def cmd_ode(cfg) -> int:
    system, params, x0, opts = ode_setup(cfg)
    res = mfode.integrate(system, x0, params, cfg["horizon"], opts, dt=cfg["dt"])
    d = _outdir(cfg) or Path(".")
    path = res.trajectory.to_csv(d / f"ode_{system}.csv", config=cfg)
    if cfg["plot"]:
        _plot_trajectory(res.trajectory, d / f"ode_{system}.svg", f"ode {system}")
    print(json.dumps({"status": res.status, "t_end": res.t_end, "file": str(path),
                      "n_accepted": res.n_accepted, "n_rejected": res.n_rejected}))
    return 0


# ----------------------------------------------------------------------------
# simulate, couple-check, saturation
# ----------------------------------------------------------------------------


def cmd_simulate(cfg) -> int:
    m = cfg["model"]
    rng = RngStream(cfg["seed"])
    d = _outdir(cfg) or Path(".")
    if m == "u":
        p = _rist_params(cfg)
        path = nsim.simulate_u(p, cfg["N"], nsim.UState(cfg["u0"], cfg["u1"]), cfg["horizon"], rng, cfg["dt"])
        out = d / "simulate_u.csv"
        lines = ["t,u0,u1,u2"]
        lines += [f"{t:.17g},{a},{b},{c}" for t, a, b, c in zip(path.times, path.u0, path.u1, path.u2)]
        lines.append(f"# version={__version__}")
        lines.append("# config=" + json.dumps(dict(config=cfg, hit_time=path.hit_time), sort_keys=True))
        lines.append("# status=ReachedHorizon")
        out.write_text("\n".join(lines) + "\n")
        print(json.dumps({"file": str(out), "hit_time": path.hit_time}))
        return 0
    if m == "rist":
        p = _rist_params(cfg, cfg["p0"])
        if cfg["init"] == "empty":
            init = nsim.empty_rist_state(cfg["N"])
        elif cfg["init"] == "saturated":
            init = nsim.saturated_rist_state(cfg["N"], p.C, cfg["eta"], rng)
        else:
            raise UsageError(f"unknown init {cfg['init']!r}")
        tr = nsim.simulate_rist(p, cfg["N"], init, cfg["horizon"], cfg["dt"], rng)
    else:
        p = DarParams(cfg["nu"], cfg["a"], cfg["C"])
        tr = nsim.simulate_dar(p, cfg["N"], nsim.empty_dar_state(cfg["N"]), cfg["horizon"], cfg["dt"], rng)
    out = tr.to_csv(d / f"simulate_{m}.csv", config=cfg)
    if cfg["plot"]:
        _plot_trajectory(tr, d / f"simulate_{m}.svg", f"simulate {m}")
    print(json.dumps({"file": str(out), "counters": tr.counters}))
    return 0


def _coupling_run(arg):
    p, N, eta, horizon, stream = arg
    init = nsim.saturated_rist_state(N, p.C, eta, stream)
    return nsim.simulate_coupled(p, N, init, horizon, stream)


def _pmap(fn, args, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(fn, args))
    return [fn(a) for a in args]


def cmd_couple_check(cfg) -> int:
    p = _rist_params(cfg)
    root = RngStream(cfg["seed"])
    args = [(p, cfg["N"], cfg["eta"], cfg["horizon"], root.child(k)) for k in range(cfg["seeds"])]
    reports = _pmap(_coupling_run, args, cfg["jobs"])
    bad = [k for k, r in enumerate(reports) if not r.ok]
    branches = {}
    for r in reports:
        for b, n in r.branch_counts.items():
            branches[b] = branches.get(b, 0) + n
    d = _outdir(cfg)
    if d is not None:
        for k in sorted(set(bad) | {0}):
            reports[k].to_csv(d / f"coupling_run{k}.csv", config=cfg)
    _emit_json(cfg, "couple_check.json", {
        "runs": len(reports),
        "violations": len(bad),
        "violating_runs": bad,
        "hit_times": [r.hit_time for r in reports],
        "branch_counts": branches,
    })
    return EXIT_INVARIANT if bad else 0


def cmd_saturation(cfg) -> int:
    p = _rist_params(cfg)
    res = nsim.saturation_experiment(p, cfg["N"], cfg["eta"], cfg["t0"], cfg["T"], cfg["eps"], cfg["runs"],
                                     RngStream(cfg["seed"]), jobs=cfg["jobs"])
    _emit_json(cfg, "saturation.json", {
        "successes": res.successes, "runs": res.runs, "probability": res.probability,
        "min_mean_y": res.min_mean_y,
    })
    return 0


# ----------------------------------------------------------------------------
# stability
# ----------------------------------------------------------------------------


def _probe_targets(cfg):
    system = cfg["system"]
    if system == "dar":
        params = DarParams(cfg["nu"], cfg["a"], cfg["C"])
        rep = eq.dar_fixed_points(params.nu, params.a, params.C)
        return system, params, mfode.OdeOptions(), rep, [eq.dar_fixed_point_vector(r.value, params) for r in rep.roots]
    if system == "rist":
        params = _rist_params(cfg)
        rep = eq.rist_equilibria(params.rho1, params.rho2, params.C)
        return system, params, mfode.OdeOptions(), rep, [eq.rist_pi(r.value, params) for r in rep.roots]
    if system == "nlmm1":
        rep = eq.nlmm1_fixed_points(cfg["nu"], a=cfg["a"])
        K = cfg["K"]
        if K is None:
            K = max((eq.nlmm1_required_K(r.value) for r in rep.roots), default=10)
        return (system, NlMm1Model(cfg["nu"], a=cfg["a"]), mfode.OdeOptions(K=K), rep,
                [eq.nlmm1_pi(r.value, K) for r in rep.roots])
    raise UsageError(f"probe system must be dar, rist or nlmm1, not {system!r}")


def cmd_stability(cfg) -> int:
    m = cfg["model"]
    if m == "interval":
        lo, hi = stability.nlmm1_stability_interval(cfg["a"])
        _emit_json(cfg, "stability_interval.json", {"interval": [lo, hi], "nu_low": lo, "nu_high": hi})
        return 0
    if m == "rist":
        p = _rist_params(cfg)
        rep = eq.rist_equilibria(p.rho1, p.rho2, p.C)
        results = [stability.check_rist_criterion(r.value, p).to_dict() for r in rep.roots]
    elif m == "nlmm1":
        rep = eq.nlmm1_fixed_points(cfg["nu"], a=cfg["a"])
        results = [stability.check_nlmm1_criterion(r.value, cfg["nu"], a=cfg["a"]).to_dict() for r in rep.roots]
    else:
        system, params, opts, rep, points = _probe_targets(cfg)
        results = []
        for r, pt in zip(rep.roots, points):
            pr = stability.linearized_probe(system, pt, params, cfg["directions"], cfg["probe_horizon"],
                                            seed=cfg["seed"], opts=opts)
            results.append(dict(root=r.value, **pr.to_dict()))
    _emit_json(cfg, f"stability_{m}.json", {"equilibria": rep.to_dict(), "results": results})
    return 0


# ----------------------------------------------------------------------------
# sweep
# ----------------------------------------------------------------------------


def _sweep_point(arg):
    cfg, value = arg
    var = cfg["var"]
    if var == "nu":
        rep = eq.dar_fixed_points(value, cfg["a"], cfg["C"])
        verdicts = []
        if cfg["stability"]:
            params = DarParams(value, cfg["a"], cfg["C"])
            for r in rep.roots:
                pr = stability.linearized_probe("dar", eq.dar_fixed_point_vector(r.value, params), params)
                verdicts.append(pr.label)
    else:
        rho1 = value if var == "rho1" else cfg["rho1"]
        rho2 = value if var == "rho2" else cfg["rho2"]
        rep = eq.rist_equilibria(rho1, rho2, cfg["C"])
        verdicts = []
        if cfg["stability"]:
            # unit class-1 service rate fixes the time scale
            p = RistParams(rho1, 1.0, rho1 / rho2, cfg["C"])
            for r in rep.roots:
                verdicts.append(stability.check_rist_criterion(r.value, p).verdict)
    return value, rep.regime, rep.values, verdicts


def sweep_rows(cfg) -> list:
    if cfg["var"] not in ("nu", "rho1", "rho2"):
        raise UsageError("sweep variable must be nu, rho1 or rho2")
    if not cfg["num"] >= 1 or not cfg["stop"] >= cfg["start"] or (cfg["num"] > 1 and cfg["stop"] == cfg["start"]):
        raise UsageError("empty sweep range")
    grid = np.linspace(cfg["start"], cfg["stop"], cfg["num"])
    return _pmap(_sweep_point, [(cfg, float(v)) for v in grid], cfg["jobs"])


def cmd_sweep(cfg) -> int:
    rows = sweep_rows(cfg)
    d = _outdir(cfg) or Path(".")
    lines = [f"{cfg['var']},n_roots,roots,regime,verdicts"]
    for value, regime, roots, verdicts in rows:
        lines.append(",".join([f"{value:.17g}", str(len(roots)), ";".join(f"{r:.17g}" for r in roots),
                               regime, ";".join(verdicts)]))
    lines.append(f"# version={__version__}")
    lines.append("# config=" + json.dumps(cfg, sort_keys=True))
    lines.append("# status=ok")
    out = d / f"sweep_{cfg['var']}.csv"
    out.write_text("\n".join(lines) + "\n")
    multi = [v for v, _, roots, _ in rows if len(roots) > 1]
    window = [min(multi), max(multi)] if multi else None
    if cfg["plot"]:
        _plot_sweep(rows, cfg["var"], d / f"sweep_{cfg['var']}.svg")
    print(json.dumps({"file": str(out), "points": len(rows), "multi_root_window": window}))
    return 0


# ----------------------------------------------------------------------------
# plots
# ----------------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "reroute-mf"
    return plt


def _plot_trajectory(tr, path: Path, title: str):
    plt = _pyplot()
    S = tr.summary_matrix()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(tr.times, S[:, 0], label="saturated fraction")
    if np.any(S[:, 1]):
        ax.plot(tr.times, S[:, 1], label="mean class-2 jobs")
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_sweep(rows, var: str, path: Path):
    plt = _pyplot()
    xs = [v for v, _, roots, _ in rows for _ in roots]
    ys = [r for _, _, roots, _ in rows for r in roots]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(xs, ys, s=6)
    ax.set_xlabel(var)
    ax.set_ylabel("equilibrium blocking")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------

COMMANDS = {
    "equilibria": cmd_equilibria,
    "ode": cmd_ode,
    "simulate": cmd_simulate,
    "couple-check": cmd_couple_check,
    "saturation": cmd_saturation,
    "stability": cmd_stability,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    try:
        cfg = effective_config(args)
        return COMMANDS[cfg["command"]](cfg)
    except (nsim.CouplingDefect, stability.NotReversibleError, AssertionError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
