"""Command-line entry point.

    lipspline train   --config cfg.json --out runs/ref [--seed N]
    lipspline certify --model runs/ref/model.json --p 2 --p inf --outer l1 --outer l2
    lipspline sweep   --config cfg.json --param lambda --values 1e-6,1e-4,1e-2 --out runs/lam
    lipspline compare --out runs/compare
    lipspline gen-data --n 1000 --seed 0 --out train.csv

Exit codes: 0 success, 1 certification failure (a sampled ratio exceeded a
certified bound), 2 usage or configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import experiment
from .data import export_csv, gen_circle
from .lipschitz import bound_euclidean, bound_general, empirical_lipschitz
from .network import ModelFormatError, load, save
from .optim import ConfigError, NumericalError, TrainConfig
from .rng import PROBE, make_rng

EXIT_OK, EXIT_CERT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("lipspline")


class UsageError(Exception):
    pass


def load_config(path, seed=None) -> TrainConfig:
    if path is None:
        doc = {}
    else:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if seed is not None:
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        doc = {**doc, "seed": seed}
    try:
        return TrainConfig.from_dict(doc)
    except ConfigError as exc:
        raise UsageError(f"invalid config: {exc}") from None


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = _out_dir(args.out)
    res = experiment.run(cfg)
    save(res.network, out / "model.json")
    (out / "history.csv").write_text(res.history.to_csv())
    report = res.report()
    report["created"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    _write_json(out / "report.json", report)
    print(
        f"test error {res.test_error:.2f}%  train error {res.train_error:.2f}%  "
        f"params {res.param_count}  nnz {res.nnz_coeffs}  "
        f"C_E {res.bound_euclidean:.4g}  empirical {res.empirical_lipschitz:.4g}"
    )
    return EXIT_OK


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def cmd_certify(args) -> int:
    try:
        net = load(args.model)
    except FileNotFoundError:
        raise UsageError(f"model file not found: {args.model}") from None
    except (ModelFormatError, UnicodeDecodeError) as exc:
        print(f"error: cannot parse {args.model}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ps = args.p or ["2"]
    outers = args.outer or ["l1"]
    reports = []
    for p in ps:
        rep = bound_general(net, p, args.include_sigmoid)
        rep.empirical = empirical_lipschitz(
            net, args.pairs, make_rng(args.seed, PROBE), p=rep.p, include_sigmoid=args.include_sigmoid
        )
        reports.append(rep)
    for outer in outers:
        rep = bound_euclidean(net, outer, args.include_sigmoid)
        rep.empirical = empirical_lipschitz(
            net, args.pairs, make_rng(args.seed, PROBE), p=2, include_sigmoid=args.include_sigmoid
        )
        reports.append(rep)
    docs = [r.to_dict() for r in reports]
    text = json.dumps(docs, indent=2)
    print(text)
    out = Path(args.out) if args.out else Path(args.model).with_name("bounds.json")
    out.write_text(text + "\n")
    bad = [r for r in reports if r.empirical > r.bound]
    for r in bad:
        print(f"error: sampled ratio {r.empirical:.6g} exceeds {r.kind} bound {r.bound:.6g}",
              file=sys.stderr)
    return EXIT_CERT if bad else EXIT_OK


def _parse_values(text: str) -> list:
    values = []
    for tok in text.replace(" ", ",").split(","):
        if not tok:
            continue
        try:
            values.append(float(tok))
        except ValueError:
            raise UsageError(f"not a number in --values: {tok!r}") from None
    return values


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.seed)
    values = _parse_values(args.values)
    if len(values) < 2:
        raise UsageError("--values needs at least two entries")
    if args.param == "K":
        if any(v != int(v) or v < 1 for v in values):
            raise UsageError("K values must be positive integers")
        values = [int(v) for v in values]
    out = _out_dir(args.out)
    rows = experiment.sweep(cfg, args.param, values, jobs=args.jobs)
    text = experiment.rows_to_csv(rows, experiment.SWEEP_FIELDS)
    (out / "sweep.csv").write_text(text)
    _write_json(out / "sweep_meta.json", {
        "param": args.param, "values": values, "config": cfg.to_dict(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    })
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = _out_dir(args.out)
    rows = experiment.compare(cfg, jobs=args.jobs)
    text = experiment.rows_to_csv(rows, experiment.COMPARE_FIELDS)
    (out / "compare.csv").write_text(text)
    _write_json(out / "compare_meta.json", {
        "config": cfg.to_dict(), "outer_norm_lambda": experiment.OUTER_NORM_LAM,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    })
    sys.stdout.write(text)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    ds = gen_circle(args.n, make_rng(args.seed))
    export_csv(ds, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lipspline", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train, sparsify and certify one network")
    p.add_argument("--config", help="JSON config (defaults apply when omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("certify", help="Lipschitz bounds for a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--p", action="append", help="topology exponent: 1, 2 or inf (repeatable)")
    p.add_argument("--outer", action="append", choices=["l1", "l2"],
                   help="outer norm of the Euclidean bound (repeatable)")
    p.add_argument("--include-sigmoid", type=_parse_bool, default=True)
    p.add_argument("--pairs", type=int, default=experiment.EMPIRICAL_PAIRS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="where to write the bound reports (default: next to the model)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="sweep lambda or the knot count K")
    p.add_argument("--config")
    p.add_argument("--param", required=True, choices=sorted(experiment.SWEEP_PARAMS))
    p.add_argument("--values", required=True, help="comma-separated list")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="deep splines vs ReLU-type baselines, l1 vs l2")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-data", help="write a circle dataset as CSV")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
