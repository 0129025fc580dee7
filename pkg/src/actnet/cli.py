"""Command-line front end.

Subcommands: generate, activate, fixation, mutation-freq, theory,
coalescence. A JSON config file can supply any flag value (flags win);
every job run writes a manifest.json echoing the merged config so a rerun
from the manifest reproduces the outputs byte for byte.

Exit codes: 0 success, 2 validation error (bad flag/value/missing field),
1 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, graphs, theory
from .errors import ActnetError, InvalidParameterError
from .experiments import (
    DEFAULTS,
    SamplingSpec,
    activated_degree_stats,
    collect_size_distribution,
    kl_divergence,
    largest_component_sweep,
    mean_degree_sweep,
    mutation_stationary_frequency,
    run_fixation_replicates,
    summarize_fixation,
)
from .game import COOPERATE, DEFECT, GameParams
from .runio import RunWriter
from .sampling import ActivationRates

ENV_OUTDIR = "ACTNET_OUTDIR"


class CliValidationError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _require(cond: bool, key: str, message: str) -> None:
    if not cond:
        raise CliValidationError(key, message)


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None,
                   help="JSON file of flag values; explicit flags override")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--outdir", type=str, default=None,
                   help=f"output directory (or ${ENV_OUTDIR})")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes for replicate harnesses")


def _add_graph(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", type=str, default=None,
                   choices=["rrg", "wsn", "ban", "edge-list"])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--p-rewire", type=float, default=None, dest="p_rewire")
    p.add_argument("--edge-list", type=str, default=None, dest="edge_list")
    p.add_argument("--graph-seed", type=int, default=None, dest="graph_seed")


def _add_rates(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", type=float, default=None, dest="lam",
                   help="power-law exponent of quiescent sojourns")
    p.add_argument("--mu", type=float, default=None,
                   help="power-law exponent of activated sojourns")
    p.add_argument("--t0", type=float, default=None)
    p.add_argument("--cap", type=float, default=None)


def _add_game(p: argparse.ArgumentParser) -> None:
    p.add_argument("--b", type=float, default=None, help="benefit")
    p.add_argument("--c", type=float, default=None, help="cost")
    p.add_argument("--w", type=float, default=None, help="selection intensity")
    p.add_argument("--delta", type=float, default=None, help="update rate")
    p.add_argument("--v", type=float, default=None, help="mutation probability")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actnet",
        description="Networks with power-law activated/quiescent switching: "
                    "simulation harnesses and closed-form checks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("theory", help="print closed-form predictions as JSON")
    _add_rates(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--i", type=int, default=None,
                   help="also report log P_i at this activated count")
    p.add_argument("--json", action="store_true")
    p.add_argument("--config", type=str, default=None)

    p = sub.add_parser("coalescence", help="solve pairwise coalescence times")
    _add_common(p)
    _add_graph(p)
    _add_rates(p)
    _add_game(p)
    p.add_argument("--convention", type=str, default=None,
                   choices=list(theory.WALK_CONVENTIONS))
    p.add_argument("--solver-bound", type=int, default=None, dest="solver_bound")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("generate", help="emit a graph as an edge list")
    _add_common(p)
    _add_graph(p)

    p = sub.add_parser("activate", help="activation harnesses "
                                        "(size/degree/component/mean-degree)")
    _add_common(p)
    _add_graph(p)
    _add_rates(p)
    p.add_argument("--measure", type=str, default=None,
                   choices=["size", "degree", "component", "mean-degree"])
    p.add_argument("--burn-in", type=float, default=None, dest="burn_in")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--lambda-grid", type=str, default=None, dest="lam_grid",
                   help="comma-separated lambdas for sweep measures")
    p.add_argument("--mu-grid", type=str, default=None, dest="mu_grid")

    p = sub.add_parser("fixation", help="invasion fixation probabilities")
    _add_common(p)
    _add_graph(p)
    _add_rates(p)
    _add_game(p)
    p.add_argument("--invader", type=str, default=None,
                   choices=["C", "D", "both"])
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)

    p = sub.add_parser("mutation-freq",
                       help="stationary cooperation frequency with mutation")
    _add_common(p)
    _add_graph(p)
    _add_rates(p)
    _add_game(p)
    p.add_argument("--burn-in", type=float, default=None, dest="burn_in")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Config-file values fill flags the user did not pass."""
    merged = vars(args).copy()
    path = merged.pop("config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                file_vals = json.load(fh)
        except FileNotFoundError:
            raise CliValidationError("config", f"file not found: {path}")
        except json.JSONDecodeError as e:
            raise CliValidationError("config", f"invalid JSON: {e}")
        if not isinstance(file_vals, dict):
            raise CliValidationError("config", "must be a JSON object")
        for key, val in file_vals.items():
            k = key.replace("-", "_")
            if k == "lambda":
                k = "lam"
            if k not in merged:
                raise CliValidationError(key, "unknown config key")
            if merged[k] is None:
                merged[k] = val
    return merged


def _fill(cfg: dict, key: str, value) -> None:
    if cfg.get(key) is None:
        cfg[key] = value


def _rates_from(cfg: dict) -> ActivationRates:
    _require(cfg.get("lam") is not None, "lambda", "missing required field")
    _require(cfg.get("mu") is not None, "mu", "missing required field")
    _fill(cfg, "t0", DEFAULTS["rates"]["t0"])
    _fill(cfg, "cap", DEFAULTS["rates"]["cap"])
    for key in ("lam", "mu"):
        _require(cfg[key] > 2.0, "lambda" if key == "lam" else "mu",
                 f"must exceed 2, got {cfg[key]}")
    try:
        return ActivationRates(lam=cfg["lam"], mu=cfg["mu"], t0=cfg["t0"],
                               cap=cfg["cap"])
    except InvalidParameterError as e:
        raise CliValidationError("rates", str(e))


def _graph_from(cfg: dict) -> graphs.Graph:
    kind = cfg.get("graph")
    _require(kind is not None, "graph", "missing required field")
    _fill(cfg, "graph_seed", 0)
    if kind == "edge-list":
        _require(cfg.get("edge_list") is not None, "edge-list",
                 "missing required field")
        try:
            with open(cfg["edge_list"], encoding="utf-8") as fh:
                text = fh.read()
        except FileNotFoundError:
            raise CliValidationError("edge-list",
                                     f"file not found: {cfg['edge_list']}")
        # manifests identify user-supplied graphs by content, not path;
        # underscore keys are derived metadata, not round-trippable config
        cfg["_edge_list_sha256"] = hashlib.sha256(text.encode()).hexdigest()
        return graphs.load_edge_list(text)
    _require(cfg.get("n") is not None, "n", "missing required field")
    _fill(cfg, "p_rewire", 0.4)
    try:
        if kind == "ban":
            _require(cfg.get("m") is not None, "m", "missing required field")
            return graphs.generate_connected(
                "ban", cfg["n"], cfg["graph_seed"], m=cfg["m"])
        _require(cfg.get("k") is not None, "k", "missing required field")
        return graphs.generate_connected(
            kind, cfg["n"], cfg["graph_seed"], k=cfg["k"],
            p_rewire=cfg["p_rewire"])
    except InvalidParameterError as e:
        raise CliValidationError("graph", str(e))


def _game_from(cfg: dict, need_mutation: bool = False) -> GameParams:
    _require(cfg.get("b") is not None, "b", "missing required field")
    _fill(cfg, "c", DEFAULTS["game"]["c"])
    _fill(cfg, "w", DEFAULTS["game"]["w"])
    _fill(cfg, "delta", DEFAULTS["game"]["delta"])
    _fill(cfg, "v", 0.0)
    if need_mutation:
        _require(cfg["v"] > 0.0, "v", "mutation-freq requires v > 0")
    try:
        return GameParams.pdg(b=cfg["b"], c=cfg["c"], w=cfg["w"],
                              delta=cfg["delta"], v=cfg["v"])
    except InvalidParameterError as e:
        raise CliValidationError("game", str(e))


def _outdir_from(cfg: dict, default_name: str) -> Path:
    outdir = cfg.get("outdir") or os.environ.get(ENV_OUTDIR)
    if outdir is None:
        outdir = default_name
    cfg["outdir"] = str(outdir)
    return Path(outdir)


def _public_config(cfg: dict) -> dict:
    """The manifest's config view: drop None values and derived metadata."""
    return {k: v for k, v in sorted(cfg.items())
            if v is not None and not k.startswith("_")}


def _derived_meta(cfg: dict) -> dict:
    return {k[1:]: v for k, v in cfg.items() if k.startswith("_")}


def _grid_from(cfg: dict, key: str, fallback) -> list[float]:
    raw = cfg.get(key)
    if raw is None:
        _require(fallback is not None, key.replace("_", "-"),
                 "missing required field")
        return [fallback]
    if isinstance(raw, str):
        try:
            return [float(tok) for tok in raw.split(",") if tok.strip()]
        except ValueError:
            raise CliValidationError(key.replace("_", "-"),
                                     f"not a comma-separated float list: {raw!r}")
    return [float(x) for x in raw]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_theory(cfg: dict) -> int:
    rates = _rates_from(cfg)
    out = {
        "lambda": rates.lam,
        "mu": rates.mu,
        "activation_probability": theory.activation_probability(rates),
    }
    if cfg.get("n") is not None:
        mean, var = theory.activated_moments(cfg["n"], rates)
        out["n"] = cfg["n"]
        out["mean_activated"] = mean
        out["variance_activated"] = var
        if cfg.get("i") is not None:
            out["log_pmf_i"] = theory.stationary_log_pmf(cfg["n"], cfg["i"], rates)
    if cfg.get("k") is not None:
        out["one_step_walk_prob"] = theory.one_step_walk_prob(
            cfg["k"], out["activation_probability"])
        if cfg.get("n") is not None:
            out["critical_bc"] = theory.critical_bc(cfg["n"], cfg["k"], rates)
    print(json.dumps(out, indent=None if cfg.get("json") else 2, sort_keys=True))
    return 0


def _cmd_coalescence(cfg: dict) -> int:
    rates = _rates_from(cfg)
    g = _graph_from(cfg)
    _fill(cfg, "convention", "lazy")
    _fill(cfg, "solver_bound", theory.DEFAULT_SOLVER_BOUND)
    sol = theory.coalescence_solve(g, rates, convention=cfg["convention"],
                                   solver_bound=cfg["solver_bound"])
    out = {
        "n": g.n,
        "convention": sol.convention,
        "activation_probability": sol.p,
        "tau_n": list(sol.tau_n),
        "mean_tau_i": float(sol.tau_i.mean()),
        "residual": sol.residual(),
    }
    if cfg.get("b") is not None:
        params = _game_from(cfg)
        rho_c, rho_d = theory.fixation_first_order(sol, params.b, params.c,
                                                   params.w)
        out.update({"b": params.b, "c": params.c, "w": params.w,
                    "rho_c": rho_c, "rho_d": rho_d,
                    "rho_c_minus_rho_d": rho_c - rho_d})
    print(json.dumps(out, indent=None if cfg.get("json") else 2, sort_keys=True))
    return 0


def _cmd_generate(cfg: dict) -> int:
    g = _graph_from(cfg)
    _fill(cfg, "seed", 0)
    writer = RunWriter(_outdir_from(cfg, "actnet-generate"),
                       _public_config(cfg), cfg["seed"],
                       extra=_derived_meta(cfg))
    path = writer.text("edges.txt", graphs.write_edge_list(g))
    writer.finish()
    print(f"wrote {path} (n={g.n}, edges={g.edge_count})")
    return 0


def _cmd_activate(cfg: dict) -> int:
    _require(cfg.get("measure") is not None, "measure", "missing required field")
    measure = cfg["measure"]
    g = _graph_from(cfg)
    _fill(cfg, "seed", 0)
    proto = {"size": "size", "degree": "degree"}.get(measure, "sweep")
    _fill(cfg, "burn_in", DEFAULTS[proto]["burn_in"])
    _fill(cfg, "horizon", DEFAULTS[proto]["horizon"])
    _fill(cfg, "dt", DEFAULTS[proto]["dt"])
    seed = cfg["seed"]

    if measure in ("size", "degree"):
        rates = _rates_from(cfg)
        writer = RunWriter(_outdir_from(cfg, f"actnet-{measure}"),
                           _public_config(cfg), seed, extra=_derived_meta(cfg))
        if measure == "size":
            hist = collect_size_distribution(g, rates, cfg["burn_in"],
                                             cfg["horizon"], cfg["dt"], seed)
            kl = kl_divergence(hist, rates)
            writer.csv("size_distribution.csv", ["size", "count"],
                       ((i, int(c)) for i, c in enumerate(hist.counts) if c))
            writer.text("kl.json", json.dumps({"kl_divergence": kl}) + "\n")
            print(f"KL(empirical || theory) = {kl:.6f}")
        else:
            spec = SamplingSpec(cfg["burn_in"], cfg["horizon"], cfg["dt"])
            stats, hist = activated_degree_stats(g, rates, spec, seed)
            writer.csv("degree_stats.csv",
                       ["mean", "variance", "skewness", "excess_kurtosis"],
                       [(stats.mean, stats.variance, stats.skewness,
                         stats.excess_kurtosis)])
            writer.csv("degree_hist.csv", ["degree", "count"],
                       ((i, int(c)) for i, c in enumerate(hist.counts) if c))
            print(f"skewness={stats.skewness:.4f} "
                  f"excess_kurtosis={stats.excess_kurtosis:.4f}")
        writer.finish()
        return 0

    lams = _grid_from(cfg, "lam_grid", cfg.get("lam"))
    mus = _grid_from(cfg, "mu_grid", cfg.get("mu"))
    for val, key in ((v, kk) for kk, vs in (("lambda", lams), ("mu", mus))
                     for v in vs):
        _require(val > 2.0, key, f"must exceed 2, got {val}")
    spec = SamplingSpec(cfg["burn_in"], cfg["horizon"], cfg["dt"])
    fn = largest_component_sweep if measure == "component" else mean_degree_sweep
    rows = fn(g, lams, mus, spec, seed)
    writer = RunWriter(_outdir_from(cfg, f"actnet-{measure}"),
                       _public_config(cfg), seed, extra=_derived_meta(cfg))
    writer.csv("sweep.csv", ["lambda", "mu", "value"],
               ((r["lam"], r["mu"], r["value"]) for r in rows))
    writer.finish()
    print(f"wrote sweep.csv with {len(rows)} rows")
    return 0


def _cmd_fixation(cfg: dict) -> int:
    rates = _rates_from(cfg)
    g = _graph_from(cfg)
    params = _game_from(cfg)
    _require(params.v == 0.0, "v", "fixation requires v = 0")
    _fill(cfg, "seed", 0)
    _fill(cfg, "invader", "both")
    _fill(cfg, "replicates", 1000)
    _fill(cfg, "horizon", DEFAULTS["fixation"]["horizon"])
    _fill(cfg, "workers", 1)
    _require(cfg["replicates"] >= 1, "replicates", "must be >= 1")
    try:
        params.check_fitness_positive(g)
    except InvalidParameterError as e:
        raise CliValidationError("w", str(e))

    sides = {"C": [COOPERATE], "D": [DEFECT],
             "both": [COOPERATE, DEFECT]}[cfg["invader"]]
    writer = RunWriter(_outdir_from(cfg, "actnet-fixation"),
                       _public_config(cfg), cfg["seed"],
                       extra=_derived_meta(cfg))
    summary: dict = {}
    rows = []
    for side in sides:
        # disjoint stream blocks per invader side
        seed = cfg["seed"] + side
        records = run_fixation_replicates(
            g, rates, params, side, cfg["replicates"], seed, cfg["horizon"],
            workers=cfg["workers"])
        est = summarize_fixation(records)
        name = "rho_c" if side == COOPERATE else "rho_d"
        summary[name] = {
            "probability": est.probability,
            "ci_low": est.ci_low, "ci_high": est.ci_high,
            "fixations": est.fixations, "extinctions": est.extinctions,
            "timeouts": est.timeouts, "replicates": est.replicates,
        }
        rows.extend(
            ("C" if side == COOPERATE else "D", r.replicate, r.invader_vertex,
             r.outcome.value, r.time, r.final_p_c)
            for r in records
        )
    if "rho_c" in summary and "rho_d" in summary:
        summary["rho_c_minus_rho_d"] = (summary["rho_c"]["probability"]
                                        - summary["rho_d"]["probability"])
    writer.csv("outcomes.csv",
               ["invader", "replicate", "invader_vertex", "outcome", "time",
                "final_p_c"], rows)
    writer.text("summary.json", json.dumps(summary, indent=2, sort_keys=True)
                + "\n")
    writer.finish()
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_mutation_freq(cfg: dict) -> int:
    rates = _rates_from(cfg)
    g = _graph_from(cfg)
    params = _game_from(cfg, need_mutation=True)
    _fill(cfg, "seed", 0)
    _fill(cfg, "burn_in", DEFAULTS["mutation"]["burn_in"])
    _fill(cfg, "samples", DEFAULTS["mutation"]["samples"])
    _fill(cfg, "dt", DEFAULTS["mutation"]["dt"])
    try:
        params.check_fitness_positive(g)
    except InvalidParameterError as e:
        raise CliValidationError("w", str(e))
    res = mutation_stationary_frequency(g, rates, params, cfg["burn_in"],
                                        cfg["samples"], cfg["seed"],
                                        dt=cfg["dt"])
    writer = RunWriter(_outdir_from(cfg, "actnet-mutation"),
                       _public_config(cfg), cfg["seed"],
                       extra=_derived_meta(cfg))
    times = cfg["burn_in"] + cfg["dt"] * np.arange(len(res.samples))
    writer.csv("p_c_samples.csv", ["time", "p_c"],
               zip(times.tolist(), res.samples.tolist()))
    writer.text("summary.json",
                json.dumps({"mean_p_c": res.mean_p_c}) + "\n")
    writer.finish()
    print(f"mean p_C = {res.mean_p_c:.6f}")
    return 0


_COMMANDS = {
    "theory": _cmd_theory,
    "coalescence": _cmd_coalescence,
    "generate": _cmd_generate,
    "activate": _cmd_activate,
    "fixation": _cmd_fixation,
    "mutation-freq": _cmd_mutation_freq,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = _merge_config(args)
        return _COMMANDS[args.subcommand](cfg)
    except CliValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ActnetError, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
