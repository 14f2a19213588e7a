"""Command-line runner: ``gnnkit <subcommand> [options]``.

Subcommands ``train-graph``, ``train-node`` and ``train-link`` read a flat
JSON config (keys are the :class:`~gnnkit.training.TrainConfig` fields),
apply ``--set key=value`` overrides and write ``report.json`` plus a row in
``metrics.csv`` (and ``embeddings.csv`` for link prediction) to ``--out``.

Exit codes: 0 success, 2 configuration error, 3 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import data as D
from .autoencoder import write_embeddings_csv
from .fixtures import worked_example
from .graph import GraphError
from .metrics import MetricError
from .spectral import SpectralError, gft, graph_eigensystem, igft
from .training import (ConfigError, EvalReport, TrainConfig, TrainingError, append_metrics_row,
                       run, summarize)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_TASK_OF = {"train-graph": "graph", "train-node": "node", "train-link": "link"}

log = logging.getLogger("gnnkit")


class UsageError(Exception):
    pass


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            out[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            out[key.strip()] = value
    return out


def build_config(task: str, config_path=None, overrides=None, seed=None, repeats=None) -> TrainConfig:
    raw = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a JSON object")
    raw.update(_parse_overrides(overrides))
    if raw.get("task", task) != task:
        raise ConfigError(f"task: config says {raw['task']!r} but subcommand runs {task!r}")
    raw["task"] = task
    if seed is not None:
        raw["seed"] = seed
    if repeats is not None:
        raw["repeats"] = repeats
    return TrainConfig.from_dict(raw)


def _run_one(config: TrainConfig) -> EvalReport:
    return run(config)


def _train(args) -> int:
    config = build_config(_TASK_OF[args.command], args.config, args.set, args.seed, args.repeats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    configs = [config.replace(seed=config.seed + i) for i in range(config.repeats)]
    if len(configs) > 1 and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_run_one, configs))
    else:
        reports = [_run_one(c) for c in configs]

    metrics_path = out / "metrics.csv"
    if metrics_path.exists() and not args.append:
        metrics_path.unlink()
    for r in reports:
        append_metrics_row(metrics_path, r)
    payload = reports[0].to_dict() if len(reports) == 1 else {
        "task": config.task, "config": config.to_dict(), "summary": summarize(reports),
        "runs": [r.to_dict() for r in reports]}
    for item in ([payload] if len(reports) == 1 else payload["runs"]):
        item.get("extras", {}).pop("embedding", None)
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if config.task == "link":
        write_embeddings_csv(out / "embeddings.csv", reports[0].extras["embedding"])
    for r in reports:
        line = " ".join(f"{k}={v:.4f}" for k, v in sorted(r.metrics.items()))
        print(f"seed={r.config['seed']} {line}")
    if len(reports) > 1:
        for k, s in summarize(reports).items():
            print(f"{k}: mean={s['mean']:.4f} std={s['std']:.4f} (n={s['n']})")
    return EXIT_OK


def _load_signal(path, column, n):
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: empty signal file")
    header = rows[0]
    try:
        float(header[0])
        body = rows
        col = int(column) if column is not None else 0
    except ValueError:
        body = rows[1:]
        if column is None:
            col = 0
        elif column in header:
            col = header.index(column)
        else:
            try:
                col = int(column)
            except ValueError:
                raise UsageError(f"{path}: no column named {column!r}") from None
    values = np.array([float(r[col]) for r in body])
    if len(values) != n:
        raise UsageError(f"{path}: {len(values)} signal values for {n} vertices")
    return values


def _spectral_demo(args) -> int:
    if args.graph == "worked-example":
        g = worked_example()
    else:
        g = D.read_edge_list(args.graph)
    if args.signal is None:
        if g.vertex_features is None:
            raise UsageError("--signal is required for graphs without vertex features")
        col = int(args.column) if args.column is not None else 0
        f = g.vertex_features[:, col]
    else:
        f = _load_signal(args.signal, args.column, g.n)
    es = graph_eigensystem(g, args.kind)
    fhat = gft(es, f)
    residual = float(np.max(np.abs(igft(es, fhat) - f)))
    lines = ["k,lambda,coefficient"] + [f"{k},{float(lam)!r},{float(c)!r}" for k, (lam, c) in
                                        enumerate(zip(es.eigenvalues, fhat))]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"round-trip residual: {residual:.3e}", file=sys.stderr)
    return EXIT_OK if residual < 1e-8 else EXIT_RUNTIME


def _gradcheck(args) -> int:
    from .gradcheck import run_suite

    results = run_suite(instances=args.instances, seed=args.seed or 0, tol=args.tol)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  worst rel. error {r.worst:.2e}")
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed")
    return EXIT_OK if not failed else EXIT_RUNTIME


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gnnkit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in _TASK_OF:
        s = sub.add_parser(name, help=f"train and evaluate ({_TASK_OF[name]} task)")
        s.add_argument("--config", help="flat JSON config file")
        s.add_argument("--set", action="append", metavar="K=V", help="override one config key")
        s.add_argument("--out", default=".", help="output directory (default: current)")
        s.add_argument("--seed", type=int)
        s.add_argument("--repeats", type=int, help="runs with seeds seed, seed+1, ...")
        s.add_argument("--jobs", type=int, default=1, help="parallel worker processes for repeats")
        s.add_argument("--append", action="store_true", help="append to an existing metrics.csv")
    s = sub.add_parser("spectral-demo", help="graph Fourier coefficients of one signal")
    s.add_argument("--graph", default="worked-example",
                   help="edge-list file ('# n=N' header) or 'worked-example'")
    s.add_argument("--signal", help="CSV file holding the signal")
    s.add_argument("--column", help="signal column (name or index)")
    s.add_argument("--kind", default="unnormalized", choices=["unnormalized", "symmetric", "random_walk"])
    s.add_argument("--out", help="write the spectrum CSV here instead of stdout")
    s = sub.add_parser("gradcheck", help="finite-difference check of every op and layer")
    s.add_argument("--instances", type=int, default=20)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in _TASK_OF:
            return _train(args)
        if args.command == "spectral-demo":
            return _spectral_demo(args)
        return _gradcheck(args)
    except (ConfigError, UsageError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (D.DataError, GraphError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        if "not found" in str(e) or isinstance(e, FileNotFoundError):
            print("hint: public datasets are not bundled; see scripts/fetch_datasets.py and "
                  "--set data_dir=... or GNNKIT_DATA", file=sys.stderr)
        return EXIT_RUNTIME
    except (TrainingError, SpectralError, MetricError, FloatingPointError, ValueError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
