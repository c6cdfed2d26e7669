"""Command-line entry point: ``responder-audit <subcommand> ...``.

Exit codes: 0 success, 2 invalid input or configuration, 1 computation error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import audit as _audit
from .data_model import DataError, threshold_assignment, write_csv
from .identification import group_cells
from .nuisance import ESTIMATORS
from .support_function import ContrastDirection, DEFAULT_GRID_N, support_cells
from .synth_oracle import SpecError, SyntheticSpec, TYPE_NAMES, generate, nonidentifiability_witness

logger = logging.getLogger("responder_audit")

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _schema(text):
    out = {}
    for item in _str_list(text):
        role, sep, col = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"schema entries look like role=column, got {item!r}")
        out[role.strip()] = col.strip()
    return out


def _add_data_args(p, splits_default=50):
    p.add_argument("input", help="delimited text file with a header row")
    p.add_argument("--schema", type=_schema, default={},
                   help="column overrides, e.g. group=sex,treatment=T")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--exclude", type=_str_list, default=[],
                   help="columns not to use as features")
    p.add_argument("--estimator", choices=ESTIMATORS + ("external",), default="binning")
    p.add_argument("--folds", type=int, default=2, dest="n_folds")
    p.add_argument("--splits", type=int, default=splits_default, dest="n_splits",
                   help="number of resampled sample splits to average over")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--groups", type=_str_list, default=None, help="groups to audit (default: all)")
    p.add_argument("--theta", type=float, default=None,
                   help="audited policy treats tau_hat >= theta (default: per-split median)")
    p.add_argument("--eps", type=float, default=1e-4, help="score clipping")
    p.add_argument("--no-group-feature", action="store_true",
                   help="do not use the group label as a nuisance covariate")


def _add_output_args(p, kinds=True):
    p.add_argument("--B", type=_float_list, default=list(_audit.DEFAULT_B_LIST), dest="B_list",
                   help="comma-separated budgets in [0, 1]")
    p.add_argument("--out", default=None,
                   help=f"output directory (default: ${_audit.OUTDIR_ENV} or ./audit_out)")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--max-thresholds", type=int, default=_audit.MAX_THRESHOLDS)
    p.add_argument("--thresholds", type=_float_list, default=None,
                   help="explicit band sweep (default: observed tau_hat values)")
    if kinds:
        p.add_argument("--kinds", type=_str_list, default=list(_audit.KINDS),
                       help="subset of " + ",".join(_audit.KINDS))


def _config(args, **extra):
    return _audit.AuditConfig(
        input=args.input, schema=args.schema, delimiter=args.delimiter, exclude=tuple(args.exclude),
        estimator=args.estimator, n_folds=args.n_folds, n_splits=args.n_splits, seed=args.seed,
        groups=args.groups, theta=args.theta, eps=args.eps, include_group=not args.no_group_feature,
        **extra)


def cmd_audit(args):
    cfg = _config(args, B_list=tuple(args.B_list), out_dir=args.out, plot=not args.no_plot,
                  kinds=tuple(args.kinds), max_thresholds=args.max_thresholds,
                  thresholds=args.thresholds)
    _audit.run_audit(cfg)
    print(f"wrote {cfg.resolved_out_dir() / 'report.json'}")
    return EXIT_OK


def cmd_curves(args):
    cfg = _config(args, B_list=tuple(args.B_list), out_dir=args.out, plot=not args.no_plot,
                  kinds=tuple(args.kinds), max_thresholds=args.max_thresholds,
                  thresholds=args.thresholds)
    report = _audit.run_audit(cfg, intervals=False)
    for e in report["curves"]:
        print(e["csv"])
    return EXIT_OK


def cmd_simulate(args):
    spec = SyntheticSpec.load(args.spec)
    ds, types = generate(spec, args.n, args.seed, oracle_scores=args.oracle_scores)
    write_csv(ds, args.out)
    if args.types_out:
        write_csv(ds.without_scores(), args.types_out,
                  extra_columns={"response_type": [TYPE_NAMES[t] for t in types]})
    print(f"wrote {len(ds)} units to {args.out}")
    return EXIT_OK


def _data_config(cfg):
    d = cfg.to_dict()
    for k in ("B_list", "kinds", "max_thresholds", "thresholds", "plot", "out_dir"):
        d.pop(k)
    return d


def cmd_support(args):
    try:
        mu = ContrastDirection.parse(args.mu)
    except ValueError as exc:
        raise _audit.ConfigError(f"bad --mu {args.mu!r}: {exc}")
    if not 0.0 <= args.B_value <= 1.0:
        raise _audit.ConfigError(f"budget B={args.B_value} outside [0, 1]")
    cfg = _config(args)
    ds = _audit.load_dataset(cfg)
    _audit.resolve_groups(ds, list(mu.coefs))
    results = []
    for s in _audit.score_splits(ds, cfg):
        Z = threshold_assignment(s.tau, _audit.split_theta(s, cfg.theta))
        cells = {g: group_cells(s, Z, g) for g in mu.coefs}
        results.append(support_cells(cells, mu, args.B_value, args.grid).to_dict())
    out = {"mu": {g: list(c) for g, c in mu.coefs.items()}, "B": args.B_value, "grid_n": args.grid,
           "seed": cfg.seed, "config": _data_config(cfg),
           "value": float(np.mean([r["value"] for r in results])), "splits": results}
    text = _audit.dumps(out)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _law_table(spec):
    law = spec.observable_law()
    rows = ["  cell      P(Y=1|T=0)  P(Y=1|T=1)  P(X, T=0, Y=1)  P(X, T=1, Y=1)"]
    for k, a in enumerate(spec.groups):
        for j, x in enumerate(spec.x_support):
            rows.append(f"  {a}:x={x.tolist()}  {spec.mu0[k, j]:.4f}      {spec.mu1[k, j]:.4f}"
                        f"      {law[k, j, 0, 1]:.4f}          {law[k, j, 1, 1]:.4f}")
    return "\n".join(rows)


def cmd_demo_nonid(args):
    w = nonidentifiability_witness()
    pol = w["policy"][0].tolist()
    print(f"policy Z = 1[X=1], decisions per x: {pol}")
    for name, spec, tpr in (("A", w["spec_a"], w["tpr_a"]), ("B", w["spec_b"], w["tpr_b"])):
        print(f"\nspec {name}: response-type probabilities (p00, p01, p10, p11)")
        for j, x in enumerate(spec.x_support):
            print(f"  x={x.tolist()}: " + ", ".join(f"{v:.2f}" for v in spec.p[0, j]))
        print(f"observable law of spec {name}:")
        print(_law_table(spec))
        print(f"TPR under spec {name}: {tpr:.4f}")
    print(f"\nmax observable-law discrepancy: {w['law_gap']:.3g}")
    print(f"TPR gap: {abs(w['tpr_a'] - w['tpr_b']):.4f}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="responder-audit",
                                description="Partial-identification audit of treatment policies.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", help="intervals, disparities and bands over resampled splits")
    _add_data_args(a)
    _add_output_args(a)
    a.set_defaults(func=cmd_audit)

    c = sub.add_parser("curves", help="robust ROC/xROC and disparity bands only")
    _add_data_args(c)
    _add_output_args(c)
    c.set_defaults(func=cmd_curves)

    s = sub.add_parser("simulate", help="draw a dataset from a synthetic spec file")
    s.add_argument("--spec", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--types-out", default=None, help="side file with hidden response types")
    s.add_argument("--oracle-scores", action="store_true", help="write true mu0/mu1/tau columns")
    s.set_defaults(func=cmd_simulate)

    u = sub.add_parser("support", help="support function of the identification region")
    _add_data_args(u, splits_default=1)
    u.add_argument("--mu", required=True, help="contrast, e.g. a:1:0,b:-1:0")
    u.add_argument("--B", type=float, required=True, dest="B_value")
    u.add_argument("--grid", type=int, default=DEFAULT_GRID_N)
    u.add_argument("--out", default=None, help="also write the JSON here")
    u.set_defaults(func=cmd_support)

    d = sub.add_parser("demo-nonid", help="print a non-identifiability witness pair")
    d.set_defaults(func=cmd_demo_nonid)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (_audit.ConfigError, DataError, SpecError, KeyError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
