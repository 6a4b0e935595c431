"""Command-line entry point.

Exit codes: 0 on success, 2 when an allocation fails its constraints (or the
optimizer finds nothing better than pooling), 1 on usage or input errors.
Every number is printed with 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .allocation import Allocation
from .constraints import verify
from .environment import Environment, load_config
from .feasibility import classify, condition_curve, threshold_theta
from .optimizer import lifecycle_csv, lifecycle_trace, optimize
from .reneging import PunishmentState, check_equilibrium_conditions, deviation_bounds, punishment_payoff
from .reward import split_rent
from .stationary import build_stationary, nr_waiting_check, stationary_design

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default; 2 is reserved for constraint failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(v) -> str:
    return f"{v:.12g}"


def _round(obj):
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def dump(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=False)


def _env(args) -> Environment:
    env = load_config(args.config) if args.config else Environment.linear()
    if getattr(args, "delta", None) is not None:
        env = env.with_delta(args.delta)
    return env


def _emit(text: str, path=None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------


def cmd_classify(args):
    _emit(dump(classify(_env(args)).to_dict()), args.out)
    return EXIT_OK


def cmd_condition_curve(args):
    rows = condition_curve(_env(args), args.n)
    _emit(_csv(["q_tilde", "rhs", "lhs"], rows), args.csv)
    return EXIT_OK


def cmd_threshold(args):
    res = threshold_theta(_env(args), (args.low, args.high), args.width)
    out = {"theta_bar": res.theta_bar, "bracket": list(res.bracket), "sign_changes": res.sign_changes}
    _emit(dump(out), args.out)
    return EXIT_OK


def cmd_reward_plan(args):
    env = _env(args)
    target = args.target if args.target is not None else env.first_best.delta_c_at_qstar_H
    plan = split_rent(env, target, args.qtilde, env.delta)
    if args.format == "csv":
        rows = [(k, q, x) for k, (q, x) in enumerate(zip(plan.quantities, plan.payments))]
        _emit(f"# m={plan.m} beta={fmt(plan.beta)}\n" + _csv(["k", "q", "x"], rows), args.out)
    else:
        _emit(dump(plan.to_dict()), args.out)
    return EXIT_OK


def cmd_build_stationary(args):
    env = _env(args)
    design = stationary_design(env, args.rho, args.qtilde)
    alloc = build_stationary(env, args.rho, args.qtilde)
    rep = verify(alloc, env)
    if args.alloc_out:
        Path(args.alloc_out).write_text(alloc.to_json(indent=2) + "\n")
    out = {
        "design": {"q_tilde": design.q_tilde, "rho": design.rho, "r0": design.r0, "T": design.T,
                   "beta": design.beta, "delta": design.delta},
        "waiting_slack": nr_waiting_check(design, env),
        "allocation": json.loads(alloc.to_json()),
        "report": _summary(rep),
    }
    _emit(dump(out), args.out)
    return EXIT_OK if rep.implementable else EXIT_INFEASIBLE


def _summary(rep):
    d = rep.to_dict()
    d.pop("slacks")
    return d


def cmd_verify(args):
    env = _env(args)
    alloc = Allocation.from_json(Path(args.alloc).read_text(), env)
    rep = verify(alloc, env, tol=args.tol)
    if args.format == "csv":
        _emit(rep.to_csv(args.constraint), args.out)
    else:
        _emit(dump(rep.to_dict() if args.full else _summary(rep)), args.out)
    return EXIT_OK if rep.implementable else EXIT_INFEASIBLE


def cmd_optimize(args):
    env = _env(args)
    res = optimize(env, N=args.N, S_max=args.S, budget=args.budget, monotone_pooling=not args.free_pooling)
    if args.out:
        Path(args.out).write_text(res.allocation.to_json(indent=2) + "\n")
    summary = {
        "profit": res.profit,
        "revealing": res.revealing,
        "evaluations": res.evaluations,
        "seed_profits": res.seed_profits,
        "structure": res.structure.as_dict(),
        "min_slack": res.report.min_slack(),
    }
    _emit(dump(summary))
    return EXIT_OK if res.revealing else EXIT_INFEASIBLE


def cmd_lifecycle(args):
    env = _env(args)
    alloc = Allocation.from_json(Path(args.alloc).read_text(), env)
    rows = lifecycle_trace(alloc, env, args.reveal, args.horizon)
    _emit(lifecycle_csv(rows), args.csv)
    return EXIT_OK


def cmd_punishment(args):
    env = _env(args)
    state = PunishmentState.at(env, args.R)
    cond = check_equilibrium_conditions(state, env)
    dev = deviation_bounds(env)
    out = {
        "R": state.R,
        "xi": state.xi,
        "payoff": punishment_payoff(state, env),
        "conditions": cond.to_dict(),
        "short_gain": dev.short_gain,
        "continuation_loss": dev.continuation_loss,
    }
    _emit(dump(out), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seqreveal", description="Sequential revelation mechanisms under limited commitment.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def add(name, help, fn):
        s = sub.add_parser(name, help=help, description=help)
        s.add_argument("--config", help="environment file (key=value lines); default is the benchmark")
        s.add_argument("--delta", type=float, help="override the discount factor")
        s.set_defaults(fn=fn)
        return s

    s = add("classify", "Revelation feasibility condition as delta -> 1: first-best gain vs. "
            "minimal separation cost, with the Revealing/NonRevealing verdict (JSON).", cmd_classify)
    s.add_argument("--out")

    s = add("condition-curve", "Separation cost curve rhs(q_tilde) against the first-best gain lhs; "
            "CSV columns q_tilde,rhs,lhs.", cmd_condition_curve)
    s.add_argument("--n", type=int, default=201)
    s.add_argument("--csv")

    s = add("threshold", "Cost level theta_bar of the efficient type where the feasibility condition "
            "flips, found by bisection.", cmd_threshold)
    s.add_argument("--low", type=float, default=1.2)
    s.add_argument("--high", type=float, default=2.9)
    s.add_argument("--width", type=float, default=1e-6)
    s.add_argument("--out")

    s = add("reward-plan", "Reward phase paying the pooling rent: number of full-rent periods m, "
            "fractional last period beta and the payment schedule.", cmd_reward_plan)
    s.add_argument("--qtilde", type=float, required=True)
    s.add_argument("--target", type=float, help="rent to deliver; default Delta C(q*_H)")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--out")

    s = add("build-stationary", "Stationary revealing allocation (geometric revelation, constant "
            "reward quantity) with its verification report.", cmd_build_stationary)
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--qtilde", type=float, required=True)
    s.add_argument("--alloc-out")
    s.add_argument("--out")

    s = add("verify", "Implementability report (non-reneging, IC-L, IC-H, IR) for an allocation "
            "JSON; exit 2 on violation.", cmd_verify)
    s.add_argument("--alloc", required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--constraint", choices=("NR", "ICL", "ICL_EQ", "ICH", "IRH", "IRL"))
    s.add_argument("--full", action="store_true", help="include every per-period slack in JSON")
    s.add_argument("--out")

    s = add("optimize", "Numerically optimal sequential revelation allocation by seeded coordinate "
            "search; exit 2 when nothing beats pooling.", cmd_optimize)
    s.add_argument("--N", type=int, default=30)
    s.add_argument("--S", type=int, default=1)
    s.add_argument("--budget", type=int, default=20000)
    s.add_argument("--free-pooling", action="store_true", help="search unrestricted pooling paths")
    s.add_argument("--out", help="write the allocation JSON here")

    s = add("lifecycle", "Contract lifecycle of a high type and of a low type revealing at a given "
            "period; CSV columns t,q_H,x_H,q_L,x_L.", cmd_lifecycle)
    s.add_argument("--alloc", required=True)
    s.add_argument("--reveal", type=int, required=True)
    s.add_argument("--horizon", type=int)
    s.add_argument("--csv")

    s = add("punishment", "Continuation payoff after reneging and the margins of the conditions "
            "that sustain the punishment equilibrium.", cmd_punishment)
    s.add_argument("--R", type=float, required=True)
    s.add_argument("--out")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"seqreveal {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
