"""Command-line entry point: ``llmcf {ingest,train,gen,eval,augment,report}``.

Exit codes: 0 success, 1 usage error, 2 data or configuration error
(including missing files and refusing to overwrite), 3 runtime failure.
A YAML or JSON file passed with ``--config`` overrides command-line flags;
its keys are the long flag names with dashes or underscores.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from . import errors
from .augment import SOURCES, run_experiment
from .baselines import METHODS as BASELINE_METHODS
from .baselines import SearchBudget, generate_baseline_batch
from .cfmetrics import (CfReport, dumps_jsonl, evaluate_batch, read_jsonl, render_reports,
                        reports_to_csv, diversity_to_csv)
from .datasets import heart_schema
from .llm import (REPAIR, GenConfig, HttpTransport, MockTransport, PromptSpec, TransportConfig,
                  generate_llm_batch)
from .llm.parse import POLICIES
from .models import classification_report, load_model, save_model, train
from .schema import feature_bounds, load_csv, load_schema_file, split

log = logging.getLogger("llmcf")

GEN_METHODS = ("llm-zero", "llm-few") + BASELINE_METHODS
TRANSPORTS = ("mock", "live")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Everything one command needs; built from flags, then the config file."""
    command: str = ""
    data: str | None = None
    schema: str | None = None
    model: str | None = None
    kind: str = "rf"
    hyperparams: dict = field(default_factory=dict)
    method: str | None = None
    shots: int = 3
    transport: str | None = None
    endpoint: str = TransportConfig.endpoint
    model_name: str = TransportConfig.model_name
    temperature: float = 0.0
    seed: int = 42
    test_fraction: float = 0.2
    out: str | None = None
    csv: str | None = None
    force: bool = False
    max_evals: int = 2000
    grid_size: int = 10
    k: int = 3
    weights: tuple = (1.0, 0.5, 0.5)
    max_retries: int = 3
    immutable_policy: str = REPAIR
    workers: int = 4
    max_instances: int | None = None
    cfs: str | None = None
    inputs: tuple = ()
    models: tuple = ("rf",)
    methods: tuple = ("llm-zero", "llm-few", "nice", "none")
    minority_only: bool = False
    format: str = "md"

    def validate(self):
        if self.shots < 0:
            raise UsageError("--shots must be >= 0")
        if self.command == "gen":
            if self.method not in GEN_METHODS:
                raise UsageError(f"--method must be one of {GEN_METHODS}")
            if self.method.startswith("llm-") and self.transport not in TRANSPORTS:
                raise UsageError(f"--method {self.method} requires --transport {{mock,live}}")
        if self.immutable_policy not in POLICIES:
            raise UsageError(f"--immutable-policy must be one of {POLICIES}")
        if len(self.weights) != 3:
            raise UsageError("--weights takes three numbers")
        bad = [m for m in self.methods if m not in SOURCES]
        if bad:
            raise UsageError(f"unknown augmentation methods {bad}")

    def budget(self) -> SearchBudget:
        return SearchBudget(self.max_evals, self.seed, self.grid_size)

    def gen_config(self) -> GenConfig:
        return GenConfig(max_retries=self.max_retries, immutable_policy=self.immutable_policy,
                         temperature=self.temperature, seed=self.seed, workers=self.workers)


def _csv_list(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _floats(text):
    return tuple(float(s) for s in _csv_list(text))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="llmcf", description="Counterfactual generation, evaluation and augmentation.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, data=True):
        sp.add_argument("--config", help="YAML/JSON file whose keys override flags")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--force", action="store_true", default=None,
                        help="overwrite existing output files")
        sp.add_argument("-v", "--verbose", action="count", default=0)
        sp.add_argument("-q", "--quiet", action="store_true")
        if data:
            sp.add_argument("--data", help="CSV file")
            sp.add_argument("--schema", help="schema file (defaults to the bundled heart schema)")
            sp.add_argument("--test-fraction", type=float)

    sp = sub.add_parser("ingest", help="validate a CSV against a schema")
    common(sp)

    sp = sub.add_parser("train", help="fit and save a model on the training split")
    common(sp)
    sp.add_argument("--kind", help="rf, xgb, svc or nn")
    sp.add_argument("--hyperparams", type=json.loads, help="JSON object")
    sp.add_argument("--out")

    sp = sub.add_parser("gen", help="generate counterfactuals for training instances")
    common(sp)
    sp.add_argument("--method", choices=GEN_METHODS)
    sp.add_argument("--model")
    sp.add_argument("--out")
    sp.add_argument("--shots", type=int)
    sp.add_argument("--transport", choices=TRANSPORTS)
    sp.add_argument("--endpoint")
    sp.add_argument("--model-name")
    sp.add_argument("--temperature", type=float)
    sp.add_argument("--max-retries", type=int)
    sp.add_argument("--immutable-policy", choices=POLICIES)
    sp.add_argument("--max-evals", type=int)
    sp.add_argument("--grid-size", type=int)
    sp.add_argument("--k", type=int, help="counterfactuals per instance for dice")
    sp.add_argument("--weights", type=_floats, help="dice loss weights, e.g. 1,0.5,0.5")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--max-instances", type=int)

    sp = sub.add_parser("eval", help="score a counterfactual batch")
    common(sp)
    sp.add_argument("--cfs", help="JSON-lines batch from gen")
    sp.add_argument("--model", help="re-check stored predictions against this model")
    sp.add_argument("--out", help="report file (.json or .csv)")

    sp = sub.add_parser("augment", help="run the model x augmentation-method grid")
    common(sp)
    sp.add_argument("--models", type=_csv_list)
    sp.add_argument("--methods", type=_csv_list)
    sp.add_argument("--shots", type=int)
    sp.add_argument("--transport", choices=TRANSPORTS)
    sp.add_argument("--endpoint")
    sp.add_argument("--model-name")
    sp.add_argument("--max-evals", type=int)
    sp.add_argument("--minority-only", action="store_true", default=None)
    sp.add_argument("--max-instances", type=int, help="cap on factuals per method")
    sp.add_argument("--out", help="markdown table")
    sp.add_argument("--csv", help="CSV table")

    sp = sub.add_parser("report", help="render saved eval reports")
    common(sp, data=False)
    sp.add_argument("inputs", nargs="*", help="JSON reports written by eval")
    sp.add_argument("--format", choices=("md", "csv", "diversity"))
    sp.add_argument("--out")
    return p


def _read_config_file(path) -> dict:
    text = Path(path).read_text()
    try:
        obj = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise errors.DataError(f"config file {path}: {exc}") from None
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise errors.DataError(f"config file {path} must hold a mapping")
    return {str(k).replace("-", "_"): v for k, v in obj.items()}


def make_config(ns: argparse.Namespace) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values = {k: v for k, v in vars(ns).items() if k in known and v is not None}
    if getattr(ns, "config", None):
        extra = _read_config_file(ns.config)
        unknown = sorted(set(extra) - known)
        if unknown:
            raise errors.DataError(f"unknown config keys: {unknown}")
        if "api_key" in extra:
            raise errors.DataError("API keys are read from the environment only")
        values.update(extra)
    for key in ("weights", "inputs", "models", "methods"):
        if key in values and isinstance(values[key], str):
            values[key] = _csv_list(values[key])
        if key in values:
            values[key] = tuple(values[key])
    if "weights" in values:
        values["weights"] = tuple(float(w) for w in values["weights"])
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _schema(cfg: RunConfig):
    return load_schema_file(cfg.schema) if cfg.schema else heart_schema()


def _dataset(cfg: RunConfig):
    if not cfg.data:
        raise UsageError("--data is required")
    return load_csv(cfg.data, _schema(cfg))


def _split(cfg: RunConfig):
    ds = _dataset(cfg)
    return split(ds, cfg.test_fraction, cfg.seed, stratified=True)


def _require(cfg: RunConfig, name: str):
    if getattr(cfg, name) in (None, ""):
        raise UsageError(f"--{name.replace('_', '-')} is required")


def _check_out(path, force):
    if path and Path(path).exists() and not force:
        raise errors.DataError(f"{path} exists; pass --force to overwrite")


def _write(path, text: str):
    Path(path).write_text(text)
    log.info("wrote %s", path)


def cmd_ingest(cfg: RunConfig) -> int:
    ds = _dataset(cfg)
    counts = ds.class_counts()
    print(f"rows={len(ds)} features={ds.schema.d} "
          f"continuous={len(ds.schema.continuous_indices)} "
          f"categorical={len(ds.schema.categorical_indices)} "
          f"immutable={len(ds.schema.immutable_indices)} class0={counts[0]} class1={counts[1]}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    _require(cfg, "out")
    _check_out(cfg.out, cfg.force)
    tr, te = _split(cfg)
    model = train(cfg.kind, tr, cfg.hyperparams or None, cfg.seed, feature_bounds(tr))
    save_model(model, cfg.out)
    print(f"kind={model.kind} train_rows={len(tr)} train_accuracy={model.training_accuracy:.4f}")
    if len(te):
        rep = classification_report(model, te)
        print(" ".join(f"{k}={v:.4f}" for k, v in rep.as_dict().items()))
    return 0


def _transport(cfg: RunConfig, model, tr, bounds):
    if cfg.transport == "live":
        return HttpTransport(TransportConfig(cfg.endpoint, cfg.model_name, cfg.temperature,
                                             max_retries=cfg.max_retries))
    return MockTransport(model, tr, bounds, seed=cfg.seed)


def cmd_gen(cfg: RunConfig) -> int:
    for name in ("model", "out"):
        _require(cfg, name)
    _check_out(cfg.out, cfg.force)
    model = load_model(cfg.model)
    tr, _ = _split(cfg)
    if model.schema != tr.schema:
        raise errors.SchemaMismatch("model schema differs from the data schema")
    bounds = feature_bounds(tr)
    instances = list(tr.rows[: cfg.max_instances] if cfg.max_instances is not None else tr.rows)
    if cfg.method.startswith("llm-"):
        spec = PromptSpec(shots=0 if cfg.method == "llm-zero" else cfg.shots)
        batch = generate_llm_batch(instances, model, _transport(cfg, model, tr, bounds),
                                   tr.schema, spec, cfg.gen_config(), tr, bounds)
    else:
        batch = generate_baseline_batch(cfg.method, instances, model, tr, bounds, cfg.budget(),
                                        cfg.k, cfg.weights, cfg.workers)
    _write(cfg.out, dumps_jsonl(batch))
    print(f"method={cfg.method} instances={len(instances)} pairs={len(batch.pairs)} "
          f"failures={batch.n_failures}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    _require(cfg, "cfs")
    _check_out(cfg.out, cfg.force)
    tr, _ = _split(cfg)
    batch = read_jsonl(cfg.cfs, tr.schema)
    model = load_model(cfg.model) if cfg.model else None
    report = evaluate_batch(batch, model, tr.schema, feature_bounds(tr))
    if cfg.out:
        if str(cfg.out).endswith(".csv"):
            _write(cfg.out, reports_to_csv([report]))
        else:
            _write(cfg.out, json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    sys.stdout.write(render_reports([report]))
    return 0


def cmd_augment(cfg: RunConfig) -> int:
    for path in (cfg.out, cfg.csv):
        _check_out(path, cfg.force)
    ds = _dataset(cfg)
    factory = None
    if cfg.transport == "live":
        factory = lambda m, tr, b: _transport(cfg, m, tr, b)  # noqa: E731
    elif cfg.transport is None and any(m in ("llm-zero", "llm-few", "both") for m in cfg.methods):
        log.info("no --transport given; LLM methods use the mock transport")
    report = run_experiment(ds, cfg.models, cfg.methods, cfg.seed, cfg.test_fraction,
                            transport_factory=factory, budget=cfg.budget(),
                            gen_config=cfg.gen_config(), minority_only=cfg.minority_only,
                            max_factuals=cfg.max_instances, shots=cfg.shots,
                            dataset_id=Path(cfg.data).stem)
    md = report.to_markdown()
    if cfg.out:
        _write(cfg.out, md)
    if cfg.csv:
        _write(cfg.csv, report.to_csv())
    sys.stdout.write(md)
    return 0


def cmd_report(cfg: RunConfig) -> int:
    if not cfg.inputs:
        raise UsageError("report needs at least one input file")
    _check_out(cfg.out, cfg.force)
    reports = []
    for path in cfg.inputs:
        try:
            reports.append(CfReport.from_json(json.loads(Path(path).read_text())))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise errors.DataError(f"{path}: not an eval report ({exc})") from None
    fmt = cfg.format
    text = {"md": render_reports, "csv": reports_to_csv, "diversity": diversity_to_csv}[fmt](reports)
    if cfg.out:
        _write(cfg.out, text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "gen": cmd_gen, "eval": cmd_eval,
            "augment": cmd_augment, "report": cmd_report}


def _setup_logging(ns):
    level = logging.WARNING if getattr(ns, "quiet", False) else (
        logging.DEBUG if getattr(ns, "verbose", 0) > 1 else logging.INFO)
    root = logging.getLogger("llmcf")
    root.handlers[:] = []
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False


def dispatch(argv=None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(f"{exc}\n{parser.format_usage()}", file=sys.stderr, end="")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    _setup_logging(ns)
    try:
        cfg = make_config(ns)
        return COMMANDS[ns.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (errors.DataError, FileNotFoundError, IsADirectoryError) as exc:
        name = type(exc).__name__
        print(f"error: {name}: {exc}", file=sys.stderr)
        return 2
    except errors.CfRuntimeError as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
