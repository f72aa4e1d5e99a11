"""Command line entry point: ``dynprice {run,bounds,chernoff,validate}``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .bounds import bound_table, elrt_bound, lrt_bound, xlrt_bound
from .config import ConfigError, ExperimentConfig, load_config
from .demand import InvalidScenarioError, eval_model, validate_scenario
from .info import chernoff_bernoulli, chernoff_harmonic_approx, exploration_price
from .policies import KnowledgeError, PolicyKnowledge, ThresholdError, default_thresholds, exploration_prices
from .sim import run_monte_carlo

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2
BOUND_COLUMNS = ("policy", "true_model", "competitor", "a", "m", "M", "C", "total_pull_cap", "sum_pull_cap", "regret_cap")


def _err(msg: str) -> None:
    print(f"dynprice: error: {msg}", file=sys.stderr)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.run.base_seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.run.workers = args.workers
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    if not cfg.policies:
        raise ConfigError("policies: at least one policy is required for run")
    out = args.out or cfg.csv or f"{Path(args.config).stem}.csv"
    result = run_monte_carlo(
        cfg.scenario, cfg.policies, cfg.run.horizon, cfg.run.replications,
        base_seed=cfg.run.base_seed, workers=cfg.run.workers,
        checkpoints=cfg.run.checkpoints, true_models=cfg.true_models,
    )
    text = result.to_csv()
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        _err(f"cannot write {out}: {exc}")
        return EXIT_IO
    print(f"{'policy':<10} {'true_model':>10} {'T':>8} {'mean_regret':>12} {'ci95':>10} {'nonopt_pulls':>13}")
    for s in result.series:
        lo, hi = s.ci
        print(f"{s.policy:<10} {s.true_model:>10d} {result.horizon:>8d} {s.mean_regret[-1]:>12.4f} "
              f"{(hi[-1] - lo[-1]) / 2:>10.4f} {s.mean_pulls[-1]:>13.2f}")
    print(f"wrote {out}")
    return EXIT_OK


def bound_reports(cfg: ExperimentConfig) -> list:
    sc = cfg.scenario
    reports = []
    kinds = {p.kind for p in cfg.policies}
    xlrt_specs = [p for p in cfg.policies if p.kind == "xlrt"]
    for i in cfg.true_models:
        if sc.n_models == 2:
            reports.append(lrt_bound(sc, i))
            for spec in xlrt_specs:
                kn = PolicyKnowledge.full_curves(sc)
                px = exploration_prices(kn, spec.metric)
                th = default_thresholds(kn, spec.kappa, spec.metric, px=px)
                eta0 = th.eta0 if spec.eta0 is None else spec.eta0
                eta1 = th.eta1 if spec.eta1 is None else spec.eta1
                th = type(th)(eta0, eta1, th.eta_pair)
                reports.append(xlrt_bound(sc, i, th, spec.metric))
        if sc.n_models > 2 or "elrt" in kinds:
            reports.append(elrt_bound(sc, i))
    return reports


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def cmd_bounds(args) -> int:
    cfg = _load(args)
    rows = bound_table(bound_reports(cfg))
    print("  ".join(f"{c:>14}" for c in BOUND_COLUMNS))
    for row in rows:
        print("  ".join(f"{_fmt(row[c]):>14}" for c in BOUND_COLUMNS))
    out = args.out or cfg.bounds
    if out:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(BOUND_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in BOUND_COLUMNS])
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            _err(f"cannot write {out}: {exc}")
            return EXIT_IO
        print(f"wrote {out}")
    return EXIT_OK


def cmd_chernoff(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    i, h = args.pair
    for idx in (i, h):
        if not 0 <= idx < sc.n_models:
            raise ConfigError(f"--pair: model index {idx} out of range [0, {sc.n_models})")
    mi, mh = sc.models[i], sc.models[h]
    px = exploration_price(mi, mh, sc.interval, sc.grid, "chernoff")
    res = chernoff_bernoulli(eval_model(mi, px), eval_model(mh, px))
    ph = exploration_price(mi, mh, sc.interval, sc.grid, "harmonic")
    approx = chernoff_harmonic_approx(eval_model(mi, ph), eval_model(mh, ph))
    print(f"pair: ({i}, {h})")
    print(f"exploration_price: {px:.10g}")
    print(f"chernoff_distance: {res.distance:.10g}")
    print(f"t_star: {res.t_star:.10g}")
    print(f"harmonic_price: {ph:.10g}")
    print(f"harmonic_distance: {approx:.10g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    report = validate_scenario(cfg.scenario)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.valid else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynprice", description="Dynamic pricing under finite demand-model uncertainty.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, outputs=True):
        p.add_argument("--config", required=True, help="experiment config file (TOML); bundled names like case1.cfg also work")
        p.add_argument("--seed", type=int, default=None, help="override run.base_seed")
        p.add_argument("--workers", type=int, default=None, help="override run.workers")
        if outputs:
            p.add_argument("--out", default=None, help="output path (overrides the config's output block)")

    p = sub.add_parser("run", help="Monte Carlo regret experiment, CSV output")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("bounds", help="pull-count caps per true model and competitor")
    common(p)
    p.set_defaults(func=cmd_bounds)
    p = sub.add_parser("chernoff", help="exploration price and Chernoff distance for a model pair")
    common(p, outputs=False)
    p.add_argument("--pair", type=int, nargs=2, default=(0, 1), metavar=("I", "H"))
    p.set_defaults(func=cmd_chernoff)
    p = sub.add_parser("validate", help="check the scenario's informativeness")
    common(p, outputs=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        _err(f"--workers must be >= 1, got {args.workers}")
        return EXIT_CONFIG
    if getattr(args, "seed", None) is not None and args.seed < 0:
        _err(f"--seed must be >= 0, got {args.seed}")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, InvalidScenarioError, ThresholdError, KnowledgeError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
