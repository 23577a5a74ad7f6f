"""Command-line entry points.

Subcommands: divergence, run-experts, run-bandit, run-bwe, run-oco, sweep.
All runs are seeded and write deterministic CSV bytes.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bwe as bwe_mod
from . import oco as oco_mod
from .bandit import run_bandit
from .divergence import DiscreteDist, DivergenceQuery, max_divergence
from .gbpa import run_experts
from .harness import (
    audit_lemma2,
    audit_lemma7,
    build_potential,  # noqa: F401  (re-exported for config-driven scripts)
    load_config,
    parse_potential,
    run_experiment,
)
from .perturbation import ObjPertNoiseSpec


def _csv_floats(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split(",")])


def _fmt(x) -> str:
    return repr(float(x))


def _write_run_csv(path, record, probs: bool):
    with open(path, "w") as fh:
        header = "t,arm,loss,cum_loss,regret"
        n = record.probs.shape[1] if (probs and record.probs is not None) else 0
        if n:
            header += "," + ",".join(f"p_{i + 1}" for i in range(n))
        fh.write(header + "\n")
        for t in range(1, record.arms.size + 1):
            row = (
                f"{t},{int(record.arms[t - 1])},{_fmt(record.losses[t - 1])},"
                f"{_fmt(record.cum_loss[t - 1])},{_fmt(record.regret_at(t))}"
            )
            if n:
                row += "," + ",".join(_fmt(v) for v in record.probs[t - 1])
            fh.write(row + "\n")


def _cmd_divergence(args):
    p = DiscreteDist(_csv_floats(args.p))
    q = DiscreteDist(_csv_floats(args.q))
    query = DivergenceQuery(
        gamma=args.gamma, delta=args.delta, method=args.method,
        mc_samples=args.mc_samples, mc_seed=args.seed,
    )
    value = max_divergence(p, q, query)
    if args.method == "mc":
        print(f"mc_samples={query.mc_samples} smoothing={query.smoothing():g}", file=sys.stderr)
    print(f"{value:.12g}")


def _cmd_run_experts(args):
    losses = np.loadtxt(args.losses, delimiter=",", ndmin=2)
    potential = parse_potential(args.potential)
    record = run_experts(
        potential, losses, args.seed, replicate=args.replicate,
        fixed_noise=args.fixed_noise, record_probs=args.probs or None,
    )
    _write_run_csv(args.out, record, args.probs)
    print(f"realized_regret={_fmt(record.realized_regret)}")


def _cmd_run_bandit(args):
    losses = np.loadtxt(args.losses, delimiter=",", ndmin=2)
    potential = parse_potential(args.potential)
    audits = [a.strip() for a in (args.audit or "").split(",") if a.strip()]
    records = []
    with open(args.out, "w") as fh:
        fh.write("replicate,t,arm,loss,cum_loss,regret\n")
        for r in range(args.replicates):
            rec = run_bandit(
                potential, losses, args.mode, args.seed, replicate=r,
                gr_cap=args.gr_cap, gamma=args.gamma,
                record_probs=args.mode == "exact",
            )
            records.append(rec)
            for t in range(1, rec.arms.size + 1):
                fh.write(
                    f"{r},{t},{int(rec.arms[t - 1])},{_fmt(rec.losses[t - 1])},"
                    f"{_fmt(rec.cum_loss[t - 1])},{_fmt(rec.regret_at(t))}\n"
                )
    for name in audits:
        if name == "lemma7":
            print(audit_lemma7(records, potential).line())
        elif name == "lemma2":
            print(audit_lemma2(records, potential).line())
        else:
            print(f"{name}: unknown audit", file=sys.stderr)
    mean_regret = float(np.mean([rec.realized_regret for rec in records]))
    print(f"mean_realized_regret={_fmt(mean_regret)}")


def _cmd_run_bwe(args):
    losses = np.loadtxt(args.losses, delimiter=",", ndmin=2)
    advice = np.loadtxt(args.advice, delimiter=",", dtype=int, ndmin=2) - 1  # 1-based on disk
    potential = parse_potential(args.potential)
    cfg = bwe_mod.ClipConfig(args.rho)
    with open(args.out, "w") as fh:
        fh.write("replicate,t,arm,loss,cum_loss,regret\n")
        total = 0.0
        for r in range(args.replicates):
            rec = bwe_mod.run_bwe(
                potential, losses, advice, cfg, args.seed, replicate=r, record_probs=False
            )
            total += rec.realized_regret
            for t in range(1, rec.arms.size + 1):
                fh.write(
                    f"{r},{t},{int(rec.arms[t - 1])},{_fmt(rec.losses[t - 1])},"
                    f"{_fmt(rec.cum_loss[t - 1])},{_fmt(rec.regret_at(t))}\n"
                )
    print(f"mean_realized_regret={_fmt(total / args.replicates)}")


def _cmd_run_oco(args):
    domain = oco_mod.BallDomain(args.dim, args.radius)
    noise = ObjPertNoiseSpec(args.noise, args.dim, args.epsilon, args.beta, delta=args.delta)
    with open(args.out, "w") as fh:
        fh.write("replicate,t,loss,cum_loss,regret_final\n")
        total = 0.0
        for r in range(args.replicates):
            if args.link == "linear":
                losses = oco_mod.linear_shifted_losses(args.rounds, domain, args.beta, args.seed, r)
            else:
                raise SystemExit("only the linear loss generator is wired to the CLI")
            rec = oco_mod.run_oco(
                domain, losses, noise, args.seed, replicate=r,
                fixed_noise=args.fixed_noise, lookahead=False,
            )
            total += rec.realized_regret
            for t in range(1, rec.losses.size + 1):
                fh.write(
                    f"{r},{t},{_fmt(rec.losses[t - 1])},{_fmt(rec.cum_loss[t - 1])},"
                    f"{_fmt(rec.realized_regret)}\n"
                )
    print(f"mean_realized_regret={_fmt(total / args.replicates)}")


def _cmd_sweep(args):
    cfg = load_config(args.config)
    for path in run_experiment(cfg):
        print(path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stableol")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("divergence", help="max-divergence between two discrete distributions")
    d.add_argument("--p", required=True, help="comma-separated probabilities")
    d.add_argument("--q", required=True, help="comma-separated probabilities")
    d.add_argument("--gamma", type=float, default=1.0)
    d.add_argument("--delta", type=float, default=0.0)
    d.add_argument("--method", choices=("exact", "threshold", "mc"), default="exact")
    d.add_argument("--mc-samples", type=int, default=100_000)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=_cmd_divergence)

    e = sub.add_parser("run-experts", help="full-information experts run")
    e.add_argument("--potential", required=True)
    e.add_argument("--losses", required=True, help="CSV of T rows x N columns in [0,1]")
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--replicate", type=int, default=0)
    e.add_argument("--fixed-noise", action="store_true")
    e.add_argument("--probs", action="store_true", help="include p_1..p_N columns")
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_run_experts)

    b = sub.add_parser("run-bandit", help="multi-armed bandit run")
    b.add_argument("--potential", required=True)
    b.add_argument("--mode", choices=("exact", "gr"), required=True)
    b.add_argument("--gr-cap", type=int, default=None)
    b.add_argument("--losses", required=True)
    b.add_argument("--replicates", type=int, default=1)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--gamma", type=float, default=None)
    b.add_argument("--audit", default="", help="comma list: lemma7,lemma2")
    b.add_argument("--out", required=True)
    b.set_defaults(func=_cmd_run_bandit)

    w = sub.add_parser("run-bwe", help="bandits-with-experts run")
    w.add_argument("--potential", required=True)
    w.add_argument("--losses", required=True, help="CSV of T rows x K action columns")
    w.add_argument("--advice", required=True, help="CSV of T rows x N experts, 1-based actions")
    w.add_argument("--rho", type=float, default=0.0)
    w.add_argument("--replicates", type=int, default=1)
    w.add_argument("--seed", type=int, required=True)
    w.add_argument("--out", required=True)
    w.set_defaults(func=_cmd_run_bwe)

    o = sub.add_parser("run-oco", help="online convex optimization run")
    o.add_argument("--dim", type=int, required=True)
    o.add_argument("--radius", type=float, required=True)
    o.add_argument("--link", choices=("linear", "squared", "logistic"), default="linear")
    o.add_argument("--noise", choices=("gamma", "gaussian"), default="gamma")
    o.add_argument("--epsilon", type=float, required=True)
    o.add_argument("--delta", type=float, default=None)
    o.add_argument("--beta", type=float, default=1.0)
    o.add_argument("--rounds", type=int, required=True)
    o.add_argument("--replicates", type=int, default=1)
    o.add_argument("--seed", type=int, required=True)
    o.add_argument("--fixed-noise", action="store_true")
    o.add_argument("--out", required=True)
    o.set_defaults(func=_cmd_run_oco)

    s = sub.add_parser("sweep", help="run a config-driven experiment sweep")
    s.add_argument("--config", required=True)
    s.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
