"""Command-line entry point.

Subcommands: synth, train, fit-hmm, predict, experiment. Every run writes a
JSON manifest next to its outputs capturing the config, seeds, and input
digests; machine-readable results go to files only and diagnostics to
stderr. Exit codes: 0 success, 1 usage, 2 data error, 3 config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .cascade import build_cascade, cascade_from_json, cascade_to_json
from .demo import demo_csv_path, demo_label_rule, load_demo_sequence
from .errors import ConfigError, DataError
from .eval_harness import (
    EvaluationReport,
    ExperimentConfig,
    as_xy,
    derive_seed,
    rank_models,
    run_noise_grid,
    split_half,
    write_predictions_csv,
    write_rankings_csv,
    write_report_csv,
    write_summary_csv,
)
from .hmm import estimate_counting, hmm_from_json, hmm_to_json, predict_status
from .lifelog_data import (
    LabelRule,
    NoiseConfig,
    estimate_synthesis_params,
    label_sequence,
    load_csv,
    perturb_and_relabel,
    save_csv,
    synthesize,
    with_synthesis_settings,
)
from .pareto_evolve import EvolutionConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"usage error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def default_config_dict() -> dict:
    cfg = ExperimentConfig()
    return {
        "seed": cfg.seed,
        "threads": cfg.threads,
        "folds": cfg.folds,
        "split_fraction": cfg.split_fraction,
        "samples_per_class": cfg.samples_per_class,
        "hmm_alpha": cfg.hmm_alpha,
        "include_baseline": cfg.include_baseline,
        "evolution": {
            "population_size": cfg.evolution.population_size,
            "max_evaluations": cfg.evolution.max_evaluations,
            "crossover_probability": cfg.evolution.crossover_probability,
            "mutation_probability": cfg.evolution.mutation_probability,
            "tree_depth": cfg.evolution.tree_depth,
            "tournament_size": cfg.evolution.tournament_size,
            "constants_enabled": cfg.evolution.constants_enabled,
            "max_offspring_depth": cfg.evolution.max_offspring_depth,
        },
        "noise": {"level": cfg.noise.level, "grid": list(cfg.noise.grid)},
        "label_rule": cfg.rule.to_json(),
    }


def config_from_dict(obj: dict) -> ExperimentConfig:
    known = set(default_config_dict())
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    def section(name, allowed):
        sub = obj.get(name, {})
        bad = set(sub) - allowed
        if bad:
            raise ConfigError(f"unknown {name} config keys: {sorted(bad)}")
        return sub

    try:
        evo = section(
            "evolution",
            {
                "population_size",
                "max_evaluations",
                "crossover_probability",
                "mutation_probability",
                "tree_depth",
                "tournament_size",
                "constants_enabled",
                "max_offspring_depth",
                "seed",
            },
        )
        evo.pop("seed", None)  # evolution seeds are derived from the master seed
        noise = section("noise", {"level", "grid", "seed"})
        noise.pop("seed", None)
        rule = obj.get("label_rule", {})
        cfg = ExperimentConfig(
            evolution=EvolutionConfig(**evo),
            noise=NoiseConfig(level=noise.get("level", 0.0), grid=tuple(noise.get("grid", NoiseConfig().grid))),
            rule=LabelRule.from_json(rule) if rule else LabelRule(),
            folds=int(obj.get("folds", 10)),
            split_fraction=float(obj.get("split_fraction", 0.5)),
            samples_per_class=int(obj.get("samples_per_class", 200)),
            hmm_alpha=float(obj.get("hmm_alpha", 1e-3)),
            seed=int(obj.get("seed", 42)),
            threads=int(obj.get("threads", 1)),
            include_baseline=bool(obj.get("include_baseline", False)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config value: {e}") from None
    cfg.validate()
    return cfg


def _load_config(args) -> tuple[ExperimentConfig, dict]:
    obj = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    cfg = config_from_dict(obj)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    cfg.validate()
    return cfg, obj


def _demo_rule_fallback(cfg: ExperimentConfig, raw_config: dict) -> None:
    """Demo runs score against the demo participant's personalized
    thresholds unless the config names a rule explicitly."""
    if "label_rule" not in raw_config:
        cfg.rule = demo_label_rule()
        print("using the demo profile's label rule", file=sys.stderr)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(path: Path, command: str, cfg: ExperimentConfig, inputs, outputs, warnings=()):
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": _config_to_dict(cfg),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": [str(o) for o in outputs],
        "warnings": list(warnings),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config_to_dict(cfg: ExperimentConfig) -> dict:
    out = default_config_dict()
    out.update(
        {
            "seed": cfg.seed,
            "threads": cfg.threads,
            "folds": cfg.folds,
            "split_fraction": cfg.split_fraction,
            "samples_per_class": cfg.samples_per_class,
            "hmm_alpha": cfg.hmm_alpha,
            "include_baseline": cfg.include_baseline,
            "evolution": {
                f.name: getattr(cfg.evolution, f.name)
                for f in dataclasses.fields(cfg.evolution)
                if f.name != "seed"
            },
            "noise": {"level": cfg.noise.level, "grid": list(cfg.noise.grid)},
            "label_rule": cfg.rule.to_json(),
        }
    )
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    cfg, raw_config = _load_config(args)
    if args.raw_csv:
        raw = load_csv(args.raw_csv)
        inputs = [args.raw_csv]
    else:
        raw = load_demo_sequence()
        inputs = [demo_csv_path()]
        _demo_rule_fallback(cfg, raw_config)
    if raw.labels is None:
        raw.labels = label_sequence(raw, cfg.rule)
    params = estimate_synthesis_params(raw, class_count=cfg.rule.class_count)
    params = with_synthesis_settings(params, cfg.samples_per_class, derive_seed(cfg.seed, 2, 0))
    synthetic = synthesize(params)
    # training labels come from the configured labeling process at the
    # configured noise level, not from the generating class
    synthetic = perturb_and_relabel(
        synthetic,
        NoiseConfig(level=cfg.noise.level, seed=derive_seed(cfg.seed, 3, 0)),
        cfg.rule,
    )
    out = Path(args.out)
    save_csv(synthetic, out)
    warnings = [
        f"class {c} missing from raw data; global duration pool used"
        for c in params.fallback_classes
    ]
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "synth", cfg, inputs, [out], warnings)
    print(f"wrote {len(synthetic)} synthetic records to {out}", file=sys.stderr)
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg, _ = _load_config(args)
    synthetic = load_csv(args.synthetic_csv)
    if synthetic.labels is None:
        raise DataError(f"{args.synthetic_csv}: training data must carry labels")
    train, val = split_half(synthetic, derive_seed(cfg.seed, 4, 0), cfg.split_fraction)
    out = Path(args.out)
    n_classes = max(synthetic.labels)
    log_paths = {
        k: out.parent / f"{out.stem}_class{k}_log.csv" for k in range(1, n_classes + 1)
    }
    evo = dataclasses.replace(cfg.evolution, seed=derive_seed(cfg.seed, 5, 0))
    cascade = build_cascade(as_xy(train), as_xy(val), evo, threads=cfg.threads, log_paths=log_paths)
    out.write_text(json.dumps(cascade_to_json(cascade), indent=2) + "\n", encoding="utf-8")
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "train",
        cfg,
        [args.synthetic_csv],
        [out, *log_paths.values()],
    )
    errors = ", ".join(f"class {s.target_class}: {s.error:.4f}" for s in cascade.stages)
    print(f"trained cascade ({errors}) -> {out}", file=sys.stderr)
    return EXIT_OK


def _cmd_fit_hmm(args) -> int:
    cfg, _ = _load_config(args)
    real = load_csv(args.real_csv)
    cascade = cascade_from_json(json.loads(Path(args.model_json).read_text(encoding="utf-8")))
    labels = real.labels if real.labels is not None else label_sequence(real, cfg.rule)
    observations = cascade.classify_sequence(real.features())
    model = estimate_counting(
        [(labels, observations)],
        cascade.class_count,
        cascade.observation_count,
        alpha=cfg.hmm_alpha,
    )
    out = Path(args.out)
    out.write_text(json.dumps(hmm_to_json(model), indent=2) + "\n", encoding="utf-8")
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "fit-hmm",
        cfg,
        [args.real_csv, args.model_json],
        [out],
    )
    print(f"estimated hmm over {len(real)} days -> {out}", file=sys.stderr)
    return EXIT_OK


def _cmd_predict(args) -> int:
    cfg, _ = _load_config(args)
    real = load_csv(args.real_csv)
    if not real.records:
        raise DataError(f"{args.real_csv}: no records to predict")
    cascade = cascade_from_json(json.loads(Path(args.model_json).read_text(encoding="utf-8")))
    model = hmm_from_json(json.loads(Path(args.hmm_json).read_text(encoding="utf-8")))
    observations = cascade.classify_sequence(real.features())
    states = predict_status(model, cascade, real.features())
    out = Path(args.out)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = ["date", "observation", "predicted_state"]
        if real.labels is not None:
            header += ["label", "match"]
        w.writerow(header)
        for i, rec in enumerate(real.records):
            row = [rec.date.isoformat(), int(observations[i]), int(states[i])]
            if real.labels is not None:
                row += [real.labels[i], int(states[i] == real.labels[i])]
            w.writerow(row)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "predict",
        cfg,
        [args.real_csv, args.model_json, args.hmm_json],
        [out],
    )
    print(f"predicted {len(real)} days -> {out}", file=sys.stderr)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    cfg, raw_config = _load_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.raw_csv:
        raws = [load_csv(p) for p in args.raw_csv]
        inputs = list(args.raw_csv)
    else:
        raws = [load_demo_sequence()]
        inputs = [demo_csv_path()]
        print("no raw files given; using the bundled demo participant", file=sys.stderr)
        _demo_rule_fallback(cfg, raw_config)
    merged: dict[str, EvaluationReport] = {}
    warnings = []
    for idx, raw in enumerate(raws):
        reports = run_noise_grid(cfg, raw, participant_seed=derive_seed(cfg.seed, 7, idx))
        for model, report in reports.items():
            if model in merged:
                merged[model].cells.extend(report.cells)
            else:
                merged[model] = report
            warnings.extend(report.warnings)
    table = rank_models(merged)
    outputs = []
    for name, writer, payload in (
        ("report.csv", write_report_csv, merged),
        ("predictions.csv", write_predictions_csv, merged),
        ("summary.csv", write_summary_csv, table),
        ("rankings.csv", write_rankings_csv, table),
    ):
        path = out_dir / name
        writer(path, payload)
        outputs.append(path)
    _write_manifest(out_dir / "manifest.json", "experiment", cfg, inputs, outputs, warnings)
    print(f"experiment complete: {len(merged)} model(s) -> {out_dir}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="actiseq", description=__doc__)
    parser.add_argument(
        "--print-default-config",
        action="store_true",
        help="print the full default config JSON and exit",
    )
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--threads", type=int, help="worker cap; 1 = deterministic single stream")

    p = sub.add_parser("synth", help="write balanced synthetic training data")
    p.add_argument("raw_csv", nargs="?", help="raw lifelog CSV (bundled demo profile if omitted)")
    p.add_argument("--out", required=True, help="output CSV path")
    common(p)

    p = sub.add_parser("train", help="train the cascade classifier on synthetic data")
    p.add_argument("synthetic_csv")
    p.add_argument("--out", required=True, help="output model JSON path")
    common(p)

    p = sub.add_parser("fit-hmm", help="estimate the status model from labeled days")
    p.add_argument("real_csv")
    p.add_argument("model_json")
    p.add_argument("--out", required=True, help="output model JSON path")
    common(p)

    p = sub.add_parser("predict", help="decode the status sequence for a lifelog")
    p.add_argument("real_csv")
    p.add_argument("model_json")
    p.add_argument("hmm_json")
    p.add_argument("--out", required=True, help="output CSV path")
    common(p)

    p = sub.add_parser("experiment", help="run the full noise-grid evaluation")
    p.add_argument("raw_csv", nargs="*", help="per-participant CSVs (demo participant if none)")
    p.add_argument("--out", required=True, help="output directory")
    common(p)

    return parser


_HANDLERS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "fit-hmm": _cmd_fit_hmm,
    "predict": _cmd_predict,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # raised for usage errors and --help
        return int(e.code or 0)
    if args.print_default_config:
        print(json.dumps(default_config_dict(), indent=2, sort_keys=True))
        return EXIT_OK
    if not args.command:
        print("usage error: a subcommand is required (see --help)", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
