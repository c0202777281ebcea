"""Batch pipeline driver.

Exit codes: 0 success, 2 usage/configuration, 3 I/O or dataset format,
4 numerical failure, 5 non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation, optimization, oracle, sensitivity, surrogate
from ._io import atomic_write_text, write_csv
from .config import PipelineConfig, load_config
from .design_space import dump_space, sobol_sample_with_stats
from .exceptions import (
    ConfigError,
    DatasetParseError,
    DomainError,
    ModelFormatError,
    MultistartError,
    OopstiffError,
    OracleExhaustedError,
)

log = logging.getLogger("oopstiff")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC, EXIT_NONCONVERGED = 0, 2, 3, 4, 5
MODEL_FILES = {"U": "model_U.rbf", "F": "model_F.rbf", "theta": "model_theta.rbf"}


class NotConverged(Exception):
    pass


def _oracle_for(cfg: PipelineConfig, space, dataset_path=None):
    if dataset_path is not None or cfg.oracle_kind == "dataset":
        recs, warns = oracle.load_dataset(dataset_path or cfg.dataset_path, space)
        for w in warns:
            log.warning(w)
        return oracle.DatasetOracle(recs, space)
    return oracle.SyntheticOracle(space)


def cmd_sample(cfg: PipelineConfig, out: Path) -> Path:
    space = cfg.space
    pts, consumed = sobol_sample_with_stats(space, cfg.n, cfg.skip)
    if cfg.oracle_kind == "external":
        path = write_csv(out / "points.csv", space.names, [[float(v) for v in p] for p in pts])
        print(f"wrote {len(pts)} design points to {path} (rejected {consumed - len(pts)})")
        return path
    orc = _oracle_for(cfg, space)
    rng = np.random.default_rng(cfg.sample_seed)
    records = [oracle.evaluate_with_retry(orc, x, space, cfg.retry, rng) for x in pts]
    retries = sum(not np.array_equal(r.x, x) for r, x in zip(records, pts))
    path = oracle.write_dataset(records, out / "dataset.csv", space, cfg.metadata)
    print(f"wrote {len(records)} samples to {path} (Sobol rejections {consumed - len(pts)}, "
          f"replaced after non-convergence {retries})")
    return path


def _load_records(cfg, path):
    recs, warns = oracle.load_dataset(path, cfg.space)
    for w in warns:
        log.warning(w)
    good = [r for r in recs if isinstance(r, oracle.SampleRecord)]
    if len(good) < len(recs):
        log.warning("dropping %d non-converged rows", len(recs) - len(good))
    return good


def cmd_fit(cfg: PipelineConfig, out: Path, dataset: Path | None = None):
    path = dataset or out / "dataset.csv"
    records = _load_records(cfg, path)
    models, report = evaluation.validate(records, cfg.space, cfg.split, cfg.kernel)
    for t, name in MODEL_FILES.items():
        surrogate.save_model(getattr(models, t), out / name)
    evaluation.write_error_report_csv(report, out / "fit_report.csv")
    print(f"fitted on {report.n_train} samples, tested on {report.n_test}: "
          + ", ".join(f"{t} error {report.cov_error[t]:.4%}" for t in oracle.OUTPUTS))
    return models, report


def load_models(model_dir: Path) -> surrogate.SurrogateTriple:
    return surrogate.SurrogateTriple(*(surrogate.load_model(model_dir / MODEL_FILES[t]) for t in oracle.OUTPUTS))


def cmd_optimize(cfg: PipelineConfig, out: Path, model_dir: Path | None = None):
    models = load_models(model_dir or out)
    obj = optimization.StiffnessObjective.from_triple(models, cfg.epsilon, cfg.theta_target)
    space = obj.space
    if cfg.starts == 1:
        res = optimization.solve(obj, space, None, cfg.optimizer)
    else:
        try:
            res = optimization.multistart(obj, space, cfg.starts, cfg.optimizer_seed, cfg.optimizer)
        except MultistartError as exc:
            res = exc.results[0]
            res.starts_tried = len(exc.results)
    optimization.write_result_csv(res, space, cfg.theta_target, out / "optimization.csv")
    optimization.write_trace_csv(res, out / "optimization_trace.csv")
    optimization.write_report(res, space, cfg.theta_target, out / "optimization_report.txt", obj)
    print(optimization.format_report(res, space, cfg.theta_target, obj), end="")
    if not res.converged:
        raise NotConverged(res.message)
    return res


def cmd_surface(cfg: PipelineConfig, out: Path, model_dir: Path | None = None, params=None,
                resolution=None, fixed=None) -> Path:
    models = load_models(model_dir or out)
    obj = optimization.StiffnessObjective.from_triple(models, cfg.epsilon, cfg.theta_target)
    p1, p2 = params or cfg.surface_params
    grid = optimization.response_surface(obj, p1, p2, resolution or cfg.surface_resolution,
                                         cfg.surface_fixed if fixed is None else fixed)
    path = write_csv(out / f"surface_{p1}_{p2}.csv", [p1, p2, "theta", "k_o"],
                     [[float(v) for v in row] for row in grid])
    print(f"wrote {len(grid)} surface points to {path}")
    return path


def cmd_sensitivity(cfg: PipelineConfig, out: Path):
    space = cfg.sensitivity_space
    orc = _oracle_for(cfg, space, cfg.sensitivity_dataset) if cfg.sensitivity_dataset else oracle.SyntheticOracle(space)
    reduced, report, sweeps = sensitivity.sensitivity_study(space, orc, cfg.keep, cfg.sweep_points,
                                                            cfg.degree, cfg.epsilon)
    sensitivity.write_report_csv(report, out / "sensitivity_report.csv")
    sensitivity.write_sweep_csvs(sweeps, out / "sweeps")
    atomic_write_text(out / "reduced_space.cfg", dump_space(reduced))
    print("sensitivity ranking: " + ", ".join(
        f"{n} {report.scores[report.parameters.index(n)]:.3f}" for n in report.ranking))
    print(f"retained: {', '.join(report.retained)}")
    return reduced, report


def cmd_learning_curve(cfg: PipelineConfig, out: Path) -> Path:
    orc = _oracle_for(cfg, cfg.space)
    rows = evaluation.learning_curve(cfg.space, orc, cfg.learning_sizes, cfg.split, cfg.kernel,
                                     cfg.retry, cfg.skip, cfg.sample_seed)
    path = evaluation.write_learning_curve_csv(rows, out / "learning_curve.csv")
    for r in rows:
        print(f"n={r['size']:>6}  U {r['U']:.3e}  F {r['F']:.3e}  theta {r['theta']:.3e}  {r['error']}")
    return path


def cmd_pipeline(cfg: PipelineConfig, out: Path):
    if cfg.run_sensitivity:
        cmd_sensitivity(cfg, out)
    cmd_sample(cfg, out)
    cmd_fit(cfg, out)
    cmd_surface(cfg, out)
    return cmd_optimize(cfg, out)


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress):
        # Flags are accepted before or after the subcommand; the subcommand copy
        # must not clobber a value given earlier.
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        parser.add_argument("--config", type=Path, default=d(None), help="pipeline configuration file")
        parser.add_argument("--out-dir", type=Path, default=d(Path(".")), help="directory for all outputs")
        parser.add_argument("--seed", type=int, default=d(None), help="override every seed in the configuration")
        parser.add_argument("--verbose", "-v", action="store_true", default=d(False))
        return parser

    common = global_flags(argparse.ArgumentParser(add_help=False), True)
    p = global_flags(argparse.ArgumentParser(prog="oopstiff", description=__doc__.splitlines()[0]), False)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="Sobol-sample the space and evaluate the oracle")
    f = sub.add_parser("fit", parents=[common], help="fit and validate the three surrogates")
    f.add_argument("--dataset", type=Path, help="dataset CSV (default: OUT_DIR/dataset.csv)")
    sub.add_parser("sensitivity", parents=[common], help="one-at-a-time sensitivity and reduction")
    o = sub.add_parser("optimize", parents=[common], help="maximize stiffness at the target angle")
    o.add_argument("--models", type=Path, help="directory holding model_*.rbf (default: OUT_DIR)")
    s = sub.add_parser("surface", parents=[common], help="export a response-surface grid")
    s.add_argument("--models", type=Path)
    s.add_argument("--params", nargs=2, metavar=("P1", "P2"))
    s.add_argument("--resolution", type=int)
    s.add_argument("--fixed", nargs="*", metavar="NAME=VALUE", default=None)
    sub.add_parser("learning-curve", parents=[common], help="hold-out error against dataset size")
    sub.add_parser("pipeline", parents=[common], help="sample, fit, surface and optimize in one go")
    return p


def _parse_fixed(items):
    if items is None:
        return None
    out = {}
    for it in items:
        k, sep, v = it.partition("=")
        if not sep:
            raise ConfigError(f"--fixed expects NAME=VALUE, got {it!r}")
        out[k] = float(v)
    return out


def run(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    if cmd == "sample":
        cmd_sample(cfg, out)
    elif cmd == "fit":
        cmd_fit(cfg, out, args.dataset)
    elif cmd == "sensitivity":
        cmd_sensitivity(cfg, out)
    elif cmd == "optimize":
        cmd_optimize(cfg, out, args.models)
    elif cmd == "surface":
        cmd_surface(cfg, out, args.models, args.params, args.resolution, _parse_fixed(args.fixed))
    elif cmd == "learning-curve":
        cmd_learning_curve(cfg, out)
    elif cmd == "pipeline":
        cmd_pipeline(cfg, out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DatasetParseError, ModelFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NotConverged, OracleExhaustedError) as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (OopstiffError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
