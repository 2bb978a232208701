"""Command-line front end: parse a feeder, sample forecast-error scenarios,
assemble and solve the switch-selection program, validate the result and
write a reproducible report bundle.

Three subcommands: `solve` (one lambda, centralized), `sweep` (a lambda
ladder, emitting the per-line current matrix) and `distributed` (multi-area
run from a partition file).  Every run writes a manifest holding the fully
resolved configuration; rerunning with `--config manifest.json` reproduces
the bundle byte for byte.

Exit codes: 0 solved, 1 usage or input error, 2 infeasible, 3 hit the
iteration limit without converging.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import scipy

from . import __version__, distributed, reconfig, solver
from .feeder import FeederFormatError, FeederModelError, parse_feeder, validate_feeder
from .scenarios import (
    load_scenario_spec,
    min_sample_size_mr3,
    reduce_scenarios,
    sample_scenarios,
)

_CONFIG_KEYS = {
    "feeder",
    "scenario_spec",
    "cost",
    "lambda",
    "lambda_list",
    "rho",
    "beta",
    "samples",
    "seed",
    "partition",
    "kappa",
    "admm",
    "solver",
    "baseline",
    "check_central",
    "validate_samples",
    "out",
}


class ConfigError(ValueError):
    pass


def load_config(path):
    """Read a run configuration (or a manifest from a previous run)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if "config" in doc and "versions" in doc:
        doc = doc["config"]  # manifest from an earlier run
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = os.path.dirname(os.path.abspath(path))
    for key in ("feeder", "scenario_spec", "partition"):
        if key in doc and doc[key] is not None and not os.path.isabs(doc[key]):
            doc[key] = os.path.normpath(os.path.join(base, doc[key]))
    return doc


def _apply_flags(cfg, args):
    if args.lam is not None:
        cfg["lambda"] = args.lam
        cfg.pop("lambda_list", None)
    if args.lambda_list is not None:
        cfg["lambda_list"] = [float(v) for v in args.lambda_list.split(",")]
        cfg.pop("lambda", None)
    for key in ("rho", "beta", "seed", "partition", "kappa", "out", "baseline"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if args.samples is not None:
        cfg["samples"] = args.samples if args.samples == "auto" else int(args.samples)
    if args.check_central:
        cfg["check_central"] = True
    return cfg


def _validated(cfg, need_lambda=True, need_partition=False):
    if "feeder" not in cfg:
        raise ConfigError("config needs a 'feeder' path")
    if "scenario_spec" not in cfg:
        raise ConfigError("config needs a 'scenario_spec' path")
    rho = float(cfg.get("rho", 0.01))
    beta = float(cfg.get("beta", 0.05))
    if not (0.0 < rho < 1.0 and 0.0 < beta < 1.0):
        raise ConfigError("rho and beta must lie in (0, 1)")
    if need_lambda and "lambda" not in cfg and "lambda_list" not in cfg:
        raise ConfigError("config needs 'lambda' (or 'lambda_list' for sweep)")
    lam = cfg.get("lambda")
    if lam is not None and float(lam) < 0:
        raise ConfigError("lambda must be nonnegative")
    for v in cfg.get("lambda_list", []):
        if float(v) < 0:
            raise ConfigError("lambda values must be nonnegative")
    if need_partition and not cfg.get("partition"):
        raise ConfigError("distributed runs need a 'partition' path")
    return cfg


def _cost_spec(cfg):
    raw = dict(cfg.get("cost", {}))
    terms = raw.pop("line_terms", None)
    if terms:
        raw["line_terms"] = {
            tuple(int(v) for v in k.split("-")): float(a) for k, a in terms.items()
        }
    return reconfig.CostSpec(**raw).validate()


def _solver_settings(cfg):
    over = cfg.get("solver", {})
    return reconfig.default_settings(**over) if over else None


def _pipeline(cfg):
    """Shared front half: model, scenario statistics, sampled bounds."""
    model = parse_feeder(cfg["feeder"])
    validate_feeder(model)
    spec, corr = load_scenario_spec(cfg["scenario_spec"], model)
    rho = float(cfg.get("rho", 0.01))
    beta = float(cfg.get("beta", 0.05))
    requested = cfg.get("samples", "auto")
    if requested == "auto":
        n_dg = sum(1 for _ in _dg_phases(model))
        k = min_sample_size_mr3(rho, beta, n_dg, model.line_phase_count())
    else:
        k = int(requested)
        if k < 1:
            raise ConfigError("samples must be positive or 'auto'")
    seed = int(cfg.get("seed", 0))
    scen = sample_scenarios(model, spec, corr, k, seed)
    bounds = reduce_scenarios(scen)
    return model, spec, corr, bounds, k, seed


def _dg_phases(model):
    for n in model.nodes:
        if n.dg is not None:
            for ph in n.phases:
                yield (n.id, ph)


def _resolved_config(cfg, k):
    out = {key: cfg[key] for key in sorted(cfg) if key != "out"}
    out["samples"] = k
    out.setdefault("rho", 0.01)
    out.setdefault("beta", 0.05)
    out.setdefault("seed", 0)
    return out


def _manifest(cfg, k, command):
    return {
        "config": _resolved_config(cfg, k),
        "command": command,
        "versions": {
            "gridreconfig": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solution_doc(sol, lam):
    doc = {
        "status": sol.status,
        "lambda": lam,
        "objective": sol.objective,
        "open_lines": [list(k) for k in sol.open_lines],
        "topology": [list(k) for k in sol.topology],
        "dg_setpoints_w": {
            f"{nid}-{ph}": [s.real, s.imag] for (nid, ph), s in sorted(sol.dg_setpoints.items())
        },
        "per_line_current_a": {
            f"{k[0]}-{k[1]}": v for k, v in sorted(sol.per_line_current_mag.items())
        },
        "worst_balance_margin_w": min(
            (min(p, q) for p, q in sol.lol_margin.values()), default=None
        ),
    }
    if sol.solver_result is not None:
        doc["iterations"] = sol.solver_result.iterations
    return doc


def _write_currents(path, sol, model):
    import csv

    currents = sol.problem.indexing.complex_currents(sol.xi)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["line", "phase", "re_a", "im_a", "mag_a"])
        for li, ln in enumerate(model.lines):
            for ph in ln.phases:
                c = currents[(li, ph)]
                w.writerow(
                    [f"{ln.key[0]}-{ln.key[1]}", ph, repr(c.real), repr(c.imag), repr(abs(c))]
                )


def _maybe_validate(cfg, sol, model, spec, corr, seed):
    k_out = cfg.get("validate_samples")
    if not k_out or sol.status not in ("optimal", "converged"):
        return None
    v = reconfig.validate_lol(sol, model, spec, corr, int(k_out), seed + 1)
    return {
        "joint_rate": v.joint_rate,
        "k_out": v.k_out,
        "worst_marginal_rate": min(v.marginal_rates.values()),
        "violated_slots": [f"{n}-{p}" for n, p in sorted(v.violated_slots)],
    }


def _exit_for(status):
    if status in ("optimal", "converged"):
        return 0
    if status == "infeasible-certificate":
        return 2
    return 3


def _outdir(cfg):
    out = cfg.get("out", "runs/latest")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_solve(cfg, command="solve"):
    cfg = _validated(cfg)
    model, spec, corr, bounds, k, seed = _pipeline(cfg)
    lam = float(cfg.get("lambda", cfg.get("lambda_list", [0.0])[0]))
    prob = reconfig.assemble(model, bounds, _cost_spec(cfg), lam)
    sol = reconfig.solve_centralized(prob, _solver_settings(cfg))
    validation = _maybe_validate(cfg, sol, model, spec, corr, seed)

    out = _outdir(cfg)
    _write_json(os.path.join(out, "manifest.json"), _manifest(cfg, k, command))
    _write_json(os.path.join(out, "solution.json"), _solution_doc(sol, lam))
    _write_currents(os.path.join(out, "currents.csv"), sol, model)
    if validation is not None:
        _write_json(os.path.join(out, "validation.json"), validation)
    print(f"status: {sol.status}  lambda: {lam}  samples: {k}  out: {out}")
    print(f"open switches: {sorted(sol.open_lines)}")
    return _exit_for(sol.status)


def cmd_sweep(cfg, command="sweep"):
    cfg = _validated(cfg)
    lambdas = [float(v) for v in cfg.get("lambda_list", [cfg.get("lambda", 0.0)])]
    model, spec, corr, bounds, k, seed = _pipeline(cfg)
    sweep = reconfig.sweep_lambda(
        model, bounds, _cost_spec(cfg), lambdas, _solver_settings(cfg)
    )
    out = _outdir(cfg)
    _write_json(os.path.join(out, "manifest.json"), _manifest(cfg, k, command))
    sweep.export_csv(os.path.join(out, "currents.csv"))
    doc = {
        "lambdas": lambdas,
        "statuses": sweep.statuses,
        "open_counts": [sweep.open_count(j) for j in range(len(lambdas))],
        "open_lines": [
            None if s is None else [list(key) for key in s.open_lines]
            for s in sweep.solutions
        ],
    }
    _write_json(os.path.join(out, "solution.json"), doc)
    print(f"sweep over {len(lambdas)} lambdas  samples: {k}  out: {out}")
    for lam, st, cnt in zip(lambdas, sweep.statuses, doc["open_counts"]):
        print(f"  lambda={lam:g}: {st}, open={cnt}")
    worst = 0
    for st in sweep.statuses:
        worst = max(worst, _exit_for(st))
    return worst


def cmd_distributed(cfg, command="distributed"):
    cfg = _validated(cfg, need_partition=True)
    model, spec, corr, bounds, k, seed = _pipeline(cfg)
    part = distributed.load_partition(cfg["partition"], model)
    cost = _cost_spec(cfg)
    lam = float(cfg["lambda"])
    admm_over = dict(cfg.get("admm", {}))
    if cfg.get("kappa") is not None:
        admm_over["kappa"] = float(cfg["kappa"])
    settings = distributed.AdmmSettings(**admm_over)

    central = None
    if cfg.get("check_central"):
        central = reconfig.solve_centralized(
            reconfig.assemble(model, bounds, cost, lam), _solver_settings(cfg)
        )
    sol, trace, messages = distributed.run(
        model, bounds, cost, lam, part, settings, seed, central=central
    )

    out = _outdir(cfg)
    _write_json(os.path.join(out, "manifest.json"), _manifest(cfg, k, command))
    doc = _solution_doc(sol, lam)
    doc["admm"] = {
        "kappa": settings.kappa,
        "iterations": trace.iterations[-1] if trace.iterations else 0,
        "final_gap": trace.max_gap() if trace.iterations else 0.0,
        "trace_status": trace.status,
    }
    if central is not None:
        xc = central.solver_result.x
        xd = sol.solver_result.x
        doc["distance_to_central"] = float(np.linalg.norm(xd - xc)) / max(
            float(np.linalg.norm(xc)), 1e-30
        )
    _write_json(os.path.join(out, "solution.json"), doc)
    _write_currents(os.path.join(out, "currents.csv"), sol, model)
    trace.export_csv(os.path.join(out, "convergence.csv"))
    distributed.export_messages(messages, os.path.join(out, "messages.csv"))
    if cfg.get("baseline") == "subgradient":
        base = distributed.subgradient_baseline(
            model, bounds, cost, lam, part, settings, seed, central=central
        )
        base.export_csv(os.path.join(out, "baseline_convergence.csv"))
    print(
        f"status: {trace.status}  kappa: {settings.kappa}  "
        f"iterations: {doc['admm']['iterations']}  out: {out}"
    )
    return 3 if trace.status == "max-iters" else _exit_for(sol.status)


def build_parser():
    p = argparse.ArgumentParser(
        prog="gridreconfig",
        description="risk-aware switch selection for multi-phase feeders",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("solve", cmd_solve),
        ("sweep", cmd_sweep),
        ("distributed", cmd_distributed),
    ):
        sp = sub.add_parser(name)
        sp.set_defaults(fn=fn)
        sp.add_argument("--config", required=True)
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--lambda-list", dest="lambda_list")
        sp.add_argument("--rho", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--samples")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--partition")
        sp.add_argument("--kappa", type=float)
        sp.add_argument("--baseline", choices=["subgradient"])
        sp.add_argument("--check-central", action="store_true", dest="check_central")
        sp.add_argument("--out")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_flags(load_config(args.config), args)
        return args.fn(cfg, command=args.command)
    except (
        ConfigError,
        FeederFormatError,
        FeederModelError,
        distributed.PartitionError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
