"""Command-line entry point: ``python -m jdmd <command> --config FILE --seed N --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 non-convergence, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import experiments as ex
from . import io
from .config import ExperimentConfig, config_from_dict, load_config
from .errors import ConfigError, NonConvergenceError

log = logging.getLogger("jdmd")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3


def _config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if args.config is None:
        return config_from_dict({}, **overrides)
    return load_config(args.config, **overrides)


class Run:
    """Collects written files and emits the output directory's manifest."""

    def __init__(self, command: str, args, config: ExperimentConfig):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.args = args
        self.outputs: List[Path] = []
        self.manifest = io.RunManifest(command, config.to_dict(), config.seed,
                                       started=io.timestamp())

    def add(self, path: Path) -> Path:
        self.outputs.append(path)
        return path

    def finish(self):
        inputs = [p for p in [self.args.config] + self.args.inputs if p]
        io.write_manifest(self.out, self.manifest, inputs, self.outputs)


def cmd_collect(args, config):
    run = Run("collect", args, config)
    task = ex.build_task(config)
    train = ex.collect_training_data(config, task=task)
    tests = ex.collect_test_data(config, task=task)
    run.add(io.save_dataset(train, run.out / "train_dataset.json"))
    run.add(io.save_dataset(tests, run.out / "test_dataset.json"))
    run.add(io.save_dataset(io.reference_to_dataset(task.reference), run.out / "reference.json"))
    run.finish()


def _training_data(args, config, task):
    if args.data:
        args.inputs.append(args.data)
        return io.load_dataset(args.data)
    return ex.collect_training_data(config, task=task)


def cmd_train(args, config):
    run = Run("train", args, config)
    task = ex.build_task(config)
    data = _training_data(args, config, task)
    rows = []
    for learner in args.learners:
        model, lam = ex.train(learner, data, task)
        run.add(io.save_model(model, run.out / f"model_{learner}.json"))
        rows.append({"learner": learner, "lambda": lam,
                     "n_train": len(data.trajectories), "N_y": model.n_y})
    run.add(io.write_csv(rows, run.out / "train.csv"))
    run.finish()


def cmd_eval(args, config):
    run = Run("eval", args, config)
    task = ex.build_task(config)
    if args.tests:
        args.inputs.append(args.tests)
        tests = io.load_dataset(args.tests)
    else:
        tests = ex.collect_test_data(config, task=task)
    models = {"nominal": task.nominal}
    if args.models:
        for path in args.models:
            args.inputs.append(path)
            models[Path(path).stem.replace("model_", "")] = io.load_model(path)
    else:
        data = _training_data(args, config, task)
        for learner in ("edmd", "jdmd"):
            models[learner] = ex.train(learner, data, task)[0]
    reports = {name: ex.evaluate(m, task, tests, name) for name, m in models.items()}
    rows = []
    for name, rep in reports.items():
        for i in range(len(rep.tracking_error)):
            rows.append({"learner": name, "test": i,
                         "tracking_error": rep.tracking_error[i],
                         "stabilized": rep.stabilized[i],
                         "open_loop_error": rep.open_loop_error[i],
                         "jacobian_error": rep.jacobian_error[i]})
    run.add(io.write_csv(rows, run.out / "eval.csv"))
    run.add(io.save_report({k: r.to_dict() for k, r in reports.items()},
                           run.out / "eval_report.json"))
    run.finish()


def friction_rows(records) -> List[dict]:
    def cell(v):
        return "fail" if v is None else v
    return [{"mu": r["mu"], "nominal": "pass" if r["nominal"] else "fail",
             "edmd": cell(r["edmd"]), "jdmd": cell(r["jdmd"])} for r in records]


def cmd_sweep_friction(args, config):
    run = Run("sweep-friction", args, config)
    records = ex.friction_sweep(config)
    run.add(io.write_csv(friction_rows(records), run.out / "friction.csv",
                         ["mu", "nominal", "edmd", "jdmd"]))
    run.add(io.save_report({"config": config.to_dict(), "records": records},
                           run.out / "friction_report.json"))
    run.finish()


def cmd_sweep_samples(args, config):
    run = Run("sweep-samples", args, config)
    rows = ex.sample_efficiency_sweep(config)
    run.add(io.write_csv(rows, run.out / "samples.csv",
                         ["learner", "n", "median", "q05", "q95", "success_rate"]))
    run.add(io.save_report({"config": config.to_dict(), "rows": rows},
                           run.out / "samples_report.json"))
    run.finish()


def cmd_histograms(args, config):
    run = Run("histograms", args, config)
    report = ex.error_histograms(config)
    rows = []
    for metric, h in report["histograms"].items():
        edges = h["edges"]
        for learner in ("edmd", "jdmd"):
            for i, count in enumerate(h[learner]):
                rows.append({"metric": metric, "learner": learner, "bin_low": edges[i],
                             "bin_high": edges[i + 1], "count": count})
    run.add(io.write_csv(rows, run.out / "histograms.csv"))
    run.add(io.save_report({"config": config.to_dict(), **report},
                           run.out / "histograms_report.json"))
    run.finish()


COMMANDS = {
    "collect": (cmd_collect, "simulate training and test trajectories"),
    "train": (cmd_train, "fit EDMD and/or JDMD models"),
    "eval": (cmd_eval, "closed-loop, open-loop and Jacobian errors on test trajectories"),
    "sweep-friction": (cmd_sweep_friction, "minimum training set size per friction level"),
    "sweep-samples": (cmd_sweep_samples, "tracking error versus training set size"),
    "histograms": (cmd_histograms, "error distributions for EDMD and JDMD"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jdmd",
        description="Learn bilinear models with EDMD/JDMD and run the tracking experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="TOML or JSON experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int)
        if name in ("train", "eval"):
            p.add_argument("--data", help="training dataset JSON (default: collect)")
        if name == "train":
            p.add_argument("--learners", nargs="+", choices=("edmd", "jdmd"),
                           default=["edmd", "jdmd"])
        if name == "eval":
            p.add_argument("--models", nargs="+", help="model JSON files")
            p.add_argument("--tests", help="test dataset JSON (default: collect)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    args.inputs = []
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _config(args)
        with np.errstate(all="ignore"):
            COMMANDS[args.command][0](args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
