"""Command-line front end.

Subcommands: ``exact``, ``mcmc``, ``predict``, ``sweep``, ``verify``. Every
flag can also be given in a JSON file passed with ``--config``; values from
the file win over flags.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys

from .exact import WellSpec, exact_table, well_mass
from .fixedpoint import m_star
from .harness import ExperimentConfig, report_dict, rows_csv, run_experiment
from .models import DilutedSpec, ThreeBlockSpec, TwoBlockSpec, spec_to_dict
from .predictions import ScheduleSpec, UncoveredRegime, classify, limit_law
from .sampler import ChainConfig, run_chain
from .verify import verify_suite


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=["two_block", "diluted", "three_block"], default="two_block")
    p.add_argument("--beta", type=float, default=4.0)


def _add_spec(p: argparse.ArgumentParser) -> None:
    _add_model(p)
    p.add_argument("--N", type=int, default=100, help="total number of spins")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--b", type=int, default=None, help="middle block size (three_block)")
    p.add_argument("--p", type=float, default=1.0, help="edge retention probability (diluted)")
    p.add_argument("--mask-seed", type=int, default=0)


def _add_schedule(p: argparse.ArgumentParser) -> None:
    _add_model(p)
    p.add_argument("--A", type=float, default=1.0, help="alpha_N = A N^-rho")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--B", type=float, default=1.0, help="b_N = B N^gamma")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--P", type=float, default=1.0, help="p(N) = P N^-pi")
    p.add_argument("--pi", type=float, default=None)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON file; its values override flags")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cwbottleneck",
                                 description="Curie-Weiss models with a bottleneck interaction")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact law of the block magnetizations")
    _add_spec(p)
    _add_common(p)
    p.add_argument("--wells-eps", type=float, default=None,
                   help="also report masses of sign wells of this half-width")

    p = sub.add_parser("mcmc", help="single-spin-flip chain")
    _add_spec(p)
    _add_common(p)
    p.add_argument("--sweeps", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dynamics", choices=["glauber", "metropolis"], default="glauber")

    p = sub.add_parser("predict", help="classify a schedule and print its limit law")
    _add_schedule(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="finite-N well masses against the limit law")
    _add_schedule(p)
    _add_common(p)
    p.add_argument("--N", type=int, nargs="+", default=[200, 400, 800])
    p.add_argument("--method", choices=["exact", "mcmc", "auto"], default="auto")
    p.add_argument("--wells-eps", type=float, default=0.1)
    p.add_argument("--seed", type=int, nargs="+", default=[0], help="mask / chain seeds")
    p.add_argument("--sweeps", type=int, default=100_000)

    p = sub.add_parser("verify", help="run the self-check suite")
    p.add_argument("--level", choices=["fast", "full"], default="fast")
    p.add_argument("--criteria", type=int, nargs="+", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    return ap


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not args.config:
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    cfg.update(cfg.pop("schedule", {}))
    if "N_list" in cfg:
        cfg["N"] = cfg.pop("N_list")
    if "seeds" in cfg:
        cfg["seed"] = cfg.pop("seeds")
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise SystemExit(f"unknown config key {key!r} for '{args.command}'")
        setattr(args, dest, value)
    return args


def effective_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config",)}


def spec_from_args(args):
    base = TwoBlockSpec(args.N, args.beta, args.alpha) if args.model != "three_block" else None
    if args.model == "two_block":
        return base
    if args.model == "diluted":
        return DilutedSpec.from_seed(base, args.p, args.mask_seed)
    if args.b is None:
        raise SystemExit("three_block needs --b")
    if (args.N - args.b) % 2:
        raise SystemExit("three_block needs N - b even")
    return ThreeBlockSpec((args.N - args.b) // 2, args.b, args.beta, args.alpha)


def schedule_from_args(args) -> ScheduleSpec:
    return ScheduleSpec(args.model, args.beta, A=args.A, rho=args.rho, B=args.B,
                        gamma=args.gamma, P=args.P, pi=args.pi)


def _emit(text: str, out) -> None:
    if out:
        d = os.path.dirname(out)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jdump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_exact(args) -> int:
    spec = spec_from_args(args)
    table = exact_table(spec)
    if args.format == "csv":
        _emit(table.to_csv(), args.out)
        return 0
    out = {"spec": spec_to_dict(spec), "log_partition": table.log_partition}
    if args.wells_eps:
        ms = m_star(args.beta) if args.model == "three_block" else m_star(args.beta / 2)
        d = len(spec.sizes)
        centers = [[s * ms for s in signs] for signs in itertools.product((1, -1), repeat=d)]
        rep = well_mass(table, WellSpec(centers, args.wells_eps))
        out["wells"] = {"centers": centers, "masses": rep.masses.tolist(), "residual": rep.residual}
    _emit(_jdump(out), args.out)
    return 0


def cmd_mcmc(args) -> int:
    spec = spec_from_args(args)
    chain = ChainConfig(args.seed, args.sweeps, args.burn_in, args.thin, args.dynamics)
    traj = run_chain(spec, chain)
    if args.format == "csv":
        _emit(traj.to_csv(burn_in=args.burn_in, thin=args.thin), args.out)
    else:
        _emit(_jdump({"spec": spec_to_dict(spec), "sizes": list(traj.sizes),
                      "plus_counts": traj.plus_counts.tolist(),
                      "acceptance_rate": traj.acceptance_rate}), args.out)
    return 0


def cmd_predict(args) -> int:
    sched = schedule_from_args(args)
    reg = classify(sched)
    out = {"schedule": sched.to_dict(), "case": reg.case.value, "covered": reg.covered,
           "limit_constants": {k: (str(v) if v == float("inf") else v)
                               for k, v in reg.limit_constants.items()},
           "reason": reg.reason}
    if reg.as_convergence_plausible is not None:
        out["as_convergence_plausible"] = reg.as_convergence_plausible
    try:
        law = limit_law(sched)
        out["limit_law"] = {"atoms": law.atoms.tolist(), "weights": law.weights.tolist(), **law.meta}
    except UncoveredRegime:
        out["limit_law"] = None
    _emit(_jdump(out), args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig(schedule_from_args(args), args.N, method=args.method,
                           wells_eps=args.wells_eps, output_dir=args.out,
                           seeds=args.seed, sweeps=args.sweeps)
    res = run_experiment(cfg)
    if not args.out:
        sys.stdout.write(rows_csv(res) if args.format == "csv" else _jdump(report_dict(res)))
    else:
        with open(os.path.join(args.out, "effective_config.json"), "w") as fh:
            fh.write(_jdump(effective_config(args)))
    return 0


def cmd_verify(args) -> int:
    results = verify_suite(args.level, args.criteria, echo=print)
    if args.out:
        _emit(_jdump([{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]),
              args.out)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {"exact": cmd_exact, "mcmc": cmd_mcmc, "predict": cmd_predict,
            "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = _apply_config(build_parser().parse_args(argv))
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
