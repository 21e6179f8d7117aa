"""Config-driven experiment runner.

Every analysis is a subcommand writing CSV files whose headers embed the
tool version, the hash of the resolved config, and the seed, so a run can
be reproduced byte for byte from its own output.
"""
from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .asymptotics import (
    homophily_mu_eta_circle,
    homophily_mu_eta_discrete,
    zeta_continuous_uniform_circle,
    zeta_discrete_homophily,
)
from .applications import TradeModel, trade_fixed_point, zeta_trade
from .config import ConfigError, ExperimentConfig, derive_seed
from .dynamics import (
    build_transition_operator,
    simulate_continuous,
    simulate_discrete,
    stationary_exact,
)
from .extensions import MpeProblem, mpe_solve, mpe_stationary
from .choice import ContinuousMeetings
from .graphs import StateSpaceOverflowError
from .potential import NotConservativeError, build_aggregating_function, check_conservative

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_MODEL = 2


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _header(cfg: ExperimentConfig, threads: int) -> str:
    return (
        f"# netgibbs {__version__} config_sha256={cfg.sha256()} "
        f"seed={cfg.run['seed']} threads={threads}\n"
    )


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _resolve_threads(cfg: ExperimentConfig) -> int:
    env = os.environ.get("NETGIBBS_THREADS")
    if env is not None:
        return max(1, int(env))
    return max(1, int(cfg.run.get("threads", 1)))


def _write_resolved_config(cfg: ExperimentConfig, out: Path):
    """Archive the configuration that determines the run, for reproduction."""
    import json

    blob = json.dumps(cfg.reproducible(), sort_keys=True, indent=2, default=str)
    _write(out / "resolved_config.json", blob + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_check(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    model = cfg.switching_model()
    cap = int(cfg.run["cap"])
    exhaustive = bool(cfg.analysis.get("exhaustive_witnesses", False))
    report = check_conservative(model, cfg.n_nodes(), cap_log2=cap,
                                exhaustive_witnesses=exhaustive)
    lines = [_header(cfg, threads).rstrip("\n")]
    lines.append(f"verdict: {'conservative' if report.conservative else 'not_conservative'}")
    lines.append(f"mode: {report.mode}")
    lines.append(f"checked: {report.checked}")
    for w in report.all_witnesses:
        lines.append(f"witness: {w}")
    _write(out / "check.txt", "\n".join(lines) + "\n")
    print(f"verdict: {'conservative' if report.conservative else 'not_conservative'}")
    if report.witness is not None:
        print(f"witness: {report.witness}")
    return EXIT_OK


def cmd_gibbs(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    model = cfg.switching_model()
    cap = int(cfg.run["cap"])
    gt = build_aggregating_function(model, cfg.n_nodes(), cap_log2=cap)
    _write(out / "gibbs.csv", _header(cfg, threads) + gt.to_csv())
    return EXIT_OK


def cmd_stationary(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    model = cfg.switching_model()
    cap = int(cfg.run["cap"])
    op = build_transition_operator(model, cfg.meetings(), cfg.n_nodes(), cap_log2=cap)
    pi = stationary_exact(op)
    rows = [_header(cfg, threads).rstrip("\n"), "network,pi"]
    for mask, value in enumerate(pi):
        rows.append(f"g:{mask:x},{_fmt(value)}")
    _write(out / "stationary.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    model = cfg.switching_model()
    cap = int(cfg.run["cap"])
    n = cfg.n_nodes()
    seed = int(cfg.run["seed"])
    kind = cfg.analysis.get("kind", "discrete")
    burn_in = float(cfg.analysis.get("burn_in", 0.1))
    n_chains = int(cfg.analysis.get("chains", 1))
    meetings = cfg.meetings()

    totals = None
    first = None
    for chain in range(n_chains):
        chain_seed = seed if n_chains == 1 else derive_seed(seed, chain)
        if kind == "discrete":
            traj = simulate_discrete(model, meetings, n, int(cfg.analysis.get("steps", 100000)),
                                     seed=chain_seed, burn_in_fraction=burn_in, cap_log2=cap)
        elif kind == "continuous":
            traj = simulate_continuous(model, meetings, n, float(cfg.analysis.get("horizon", 1000.0)),
                                       seed=chain_seed, burn_in_fraction=burn_in, cap_log2=cap)
        else:
            raise ConfigError(f"unknown simulation kind {kind!r}")
        totals = traj.occupation if totals is None else totals + traj.occupation
        if first is None:
            first = traj

    occ = totals / totals.sum()
    rows = [_header(cfg, threads).rstrip("\n"), "network,pi"]
    for mask, value in enumerate(occ):
        rows.append(f"g:{mask:x},{_fmt(value)}")
    _write(out / "occupation.csv", "\n".join(rows) + "\n")
    _write(out / "trajectory.csv", _header(cfg, threads) + first.to_csv())
    return EXIT_OK


def _homophily_cell(args):
    """(mu, eta, zeta) for one grid cell of one model family."""
    family, v0, gamma, dist, weights, length = args
    if family == "discrete":
        z = zeta_discrete_homophily(v0, gamma, dist, weights)
        mu, eta = homophily_mu_eta_discrete(v0, gamma, dist, weights)
    else:
        z = zeta_continuous_uniform_circle(v0, gamma, length)
        mu, eta = homophily_mu_eta_circle(v0, gamma, length)
    return mu, eta, z


def cmd_zeta(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    family = cfg.analysis.get("family", "discrete")
    if family not in ("discrete", "circle"):
        raise ConfigError(f"unknown zeta family {family!r}; expected discrete or circle")
    v0 = float(cfg.analysis.get("v0", 0.0))
    gamma = float(cfg.analysis.get("gamma", 0.0))
    length = float(cfg.analysis.get("circle_length", 2.0))
    if family == "discrete":
        dist = cfg.distances()
        weights = cfg.type_profile(finite=False).weight_array()
    else:
        dist, weights = None, None
    mu, eta, z = _homophily_cell((family, v0, gamma, dist, weights, length))
    rows = [
        _header(cfg, threads).rstrip("\n"),
        "model,v0,gamma,mu,eta,zeta",
        f"{family},{_fmt(v0)},{_fmt(gamma)},{_fmt(mu)},{_fmt(eta)},{_fmt(z)}",
    ]
    _write(out / "zeta.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    a = cfg.analysis
    v0s = np.linspace(float(a.get("v0_min", -2.0)), float(a.get("v0_max", 2.0)),
                      int(a.get("v0_steps", 5)))
    gammas = np.linspace(float(a.get("gamma_min", 0.0)), float(a.get("gamma_max", 4.0)),
                         int(a.get("gamma_steps", 5)))
    variant = a.get("variant", "homophilous")
    length = float(a.get("circle_length", 2.0))
    if variant == "homophilous":
        dist = np.array([[0.0, 1.0], [1.0, 0.0]])
    elif variant == "antihomophilous":
        dist = np.array([[1.0, 0.0], [0.0, 1.0]])
    else:
        raise ConfigError(f"unknown sweep variant {variant!r}")
    weights = np.array([0.5, 0.5])

    cells = []
    for family in ("discrete", "continuous_circle"):
        for v0 in v0s:
            for gamma in gammas:
                cells.append((
                    "discrete" if family == "discrete" else "circle",
                    float(v0), float(gamma), dist, weights, length,
                ))

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_homophily_cell, cells))
    else:
        results = [_homophily_cell(c) for c in cells]

    rows = [_header(cfg, threads).rstrip("\n"), "model,v0,gamma,mu,eta,zeta"]
    for cell, (mu, eta, z) in zip(cells, results):
        family, v0, gamma = cell[0], cell[1], cell[2]
        rows.append(f"{family},{_fmt(v0)},{_fmt(gamma)},{_fmt(mu)},{_fmt(eta)},{_fmt(z)}")
    _write(out / "sweep.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_trade(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    params = cfg.model.get("params", {})
    tm = TradeModel(
        v0=float(params.get("v0", 0.0)),
        gamma=float(params.get("gamma", 0.0)),
        c=float(params.get("c", 0.0)),
        dist=cfg.distances(),
        weights=cfg.type_profile(finite=False).weight_array(),
    )
    sol = trade_fixed_point(tm)
    z = zeta_trade(tm)
    rows = [_header(cfg, threads).rstrip("\n")]
    rows.append(f"# zeta_trade={_fmt(z)}")
    rows.append("# B=" + ";".join(_fmt(b) for b in sol.B))
    rows.append("r,s,D,T")
    for r in range(tm.n_types):
        for s in range(tm.n_types):
            rows.append(f"{r},{s},{_fmt(tm.dist[r, s])},{_fmt(sol.T[r, s])}")
    _write(out / "trade.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_mpe(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    n = cfg.n_nodes()
    cap = int(cfg.run["cap"])
    a = cfg.analysis
    meetings = cfg.meetings()
    if not isinstance(meetings, ContinuousMeetings):
        raise ConfigError("mpe needs a continuous meeting process")
    n_states = 1 << (n * (n - 1))
    rng = np.random.default_rng(int(a.get("flow_seed", cfg.run["seed"])))
    flow = rng.normal(0.0, float(a.get("flow_scale", 1.0)), size=(n, n_states))
    problem = MpeProblem(flow=flow, rho=float(a.get("rho", 1.0)), meetings=meetings)
    sol = mpe_solve(problem, n, damping=float(a.get("damping", 0.5)),
                    max_iters=int(a.get("max_iters", 500)), cap_log2=cap)

    rows = [_header(cfg, threads).rstrip("\n")]
    rows.append(f"# converged={sol.converged} iterations={sol.iterations} "
                f"residual={_fmt(sol.residual)}")
    rows.append("agent,network,flow,value")
    for i in range(n):
        for mask in range(n_states):
            rows.append(f"{i},g:{mask:x},{_fmt(flow[i, mask])},{_fmt(sol.values[i, mask])}")
    _write(out / "mpe_values.csv", "\n".join(rows) + "\n")

    pi, _, report = mpe_stationary(problem, sol.values, n, cap_log2=cap)
    rows = [_header(cfg, threads).rstrip("\n")]
    rows.append(f"# induced_conservative={report.conservative}")
    rows.append("network,pi")
    for mask, value in enumerate(pi):
        rows.append(f"g:{mask:x},{_fmt(value)}")
    _write(out / "mpe_stationary.csv", "\n".join(rows) + "\n")
    if not sol.converged:
        print(f"warning: fixed point not converged (residual {sol.residual:.2e})",
              file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "gibbs": cmd_gibbs,
    "stationary": cmd_stationary,
    "simulate": cmd_simulate,
    "zeta": cmd_zeta,
    "sweep": cmd_sweep,
    "trade": cmd_trade,
    "mpe": cmd_mpe,
}


def run(subcommand: str, config_path: str, overrides: Optional[Dict] = None,
        analysis_overrides: Optional[Dict] = None) -> int:
    """Execute one subcommand against a config file; returns the exit code."""
    try:
        cfg = ExperimentConfig.load(config_path, overrides)
        if analysis_overrides:
            cfg.analysis.update(analysis_overrides)
        threads = _resolve_threads(cfg)
        out = Path(cfg.run["out"])
        code = COMMANDS[subcommand](cfg, out, threads)
        if code == EXIT_OK:
            _write_resolved_config(cfg, out)
        return code
    except (ConfigError, NotConservativeError, StateSpaceOverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, NotConservativeError):
            print(f"witness: {exc.report.witness}", file=sys.stderr)
        return EXIT_MODEL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="netgibbs",
        description="Stochastic network formation: exact Gibbs analysis, "
                    "simulation, and asymptotics.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override run seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--threads", type=int, default=None, help="override worker count")
        p.add_argument("--cap", type=int, default=None,
                       help="override log2 of the exhaustive state-space cap")
        if name == "mpe":
            p.add_argument("--rho", type=float, default=None, help="discount rate")
            p.add_argument("--damping", type=float, default=None)
            p.add_argument("--max-iters", type=int, default=None)

    args = parser.parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "out", "threads", "cap")}
    analysis = None
    if args.subcommand == "mpe":
        analysis = {k: v for k, v in
                    (("rho", args.rho), ("damping", args.damping),
                     ("max_iters", args.max_iters)) if v is not None}
    return run(args.subcommand, args.config, overrides, analysis)


if __name__ == "__main__":
    sys.exit(main())
