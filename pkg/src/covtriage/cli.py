"""Command-line entry point: generate, train, evaluate, dca, explain, serve.

Every subcommand is a thin deterministic composition of module operations:
identical inputs and seeds give byte-identical outputs.  A JSON config file
(flat key/value, keys mirroring flag names with underscores) can preseed any
flag; explicit flags win.  The effective configuration is echoed into every
output artifact (sidecar .meta.json for CSVs, embedded for JSON artifacts).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cohort import CohortSpec, generate_cohort, read_cohort, write_cohort
from .errors import (CovtriageError, ModelFormatError, ModelVersionError,
                     SchemaError, ValidationError)
from .evaluate import dca_curve, evaluate_report, format_metric_block
from .explain import summary, write_summary
from .features import FEATURE_NAMES, encode_matrix, load_region_table
from .gbdt import (TrainConfig, load_model, predict_proba, save_model,
                   split_train_test, train)
from .triage import BandPolicy

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_SCHEMA = 4
EXIT_VERSION = 5


def _fail(code: int, slug: str, detail: str) -> int:
    print(f'error code={slug} detail="{detail}"', file=sys.stderr)
    return code


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    doc = json.loads(p.read_text("utf-8"))
    if not isinstance(doc, dict):
        raise SchemaError("config file must be a flat JSON object")
    return doc


def _merge(args: argparse.Namespace, file_conf: dict, keys: list[str]) -> dict:
    """Flag value if given, else config-file value, else the flag default."""
    eff = {}
    for key in keys:
        flag_val = getattr(args, key, None)
        eff[key] = flag_val if flag_val is not None else file_conf.get(key)
    return eff


def _require(eff: dict, key: str):
    if eff.get(key) is None:
        raise ValidationError(key, "required (set the flag or the config-file key)")
    return eff[key]


def _write_meta(out_path: str, command: str, effective: dict) -> None:
    meta = {"tool": f"covtriage {__version__}", "command": command,
            "effective_config": effective}
    Path(str(out_path) + ".meta.json").write_text(
        json.dumps(meta, indent=1, sort_keys=True) + "\n", "utf-8")


def _check_input(path: str) -> None:
    if not Path(path).exists():
        raise FileNotFoundError(f"input file not found: {path}")


def cmd_generate(args, file_conf) -> int:
    keys = ["out", "n", "seed", "prevalence", "temp_missing_rate"]
    eff = _merge(args, file_conf, keys)
    _require(eff, "out")
    _require(eff, "seed")
    _require(eff, "n")
    spec = CohortSpec(n=int(eff["n"]), seed=int(eff["seed"]))
    if eff.get("prevalence") is not None:
        from dataclasses import replace
        from .cohort import calibrate_intercept
        spec = replace(spec, prevalence_target=float(eff["prevalence"]))
        spec = replace(spec, risk=replace(spec.risk, intercept=calibrate_intercept(spec)))
    if eff.get("temp_missing_rate") is not None:
        from dataclasses import replace
        spec = replace(spec, temp_missing_rate=float(eff["temp_missing_rate"]))
    records = generate_cohort(spec)
    write_cohort(records, eff["out"])
    _write_meta(eff["out"], "generate", eff)
    print(f"wrote {len(records)} records to {eff['out']}")
    return EXIT_OK


def _load_split(cohort_path: str, ratio: float, seed: int):
    _check_input(cohort_path)
    records = read_cohort(cohort_path)
    train_recs, test_recs = split_train_test(records, ratio, seed)
    return train_recs, test_recs


def cmd_train(args, file_conf) -> int:
    keys = ["cohort", "out", "seed", "ratio", "n_trees", "max_depth",
            "learning_rate", "l2_lambda", "pos_weight"]
    eff = _merge(args, file_conf, keys)
    _require(eff, "cohort")
    _require(eff, "out")
    seed = int(_require(eff, "seed"))
    ratio = float(eff["ratio"] if eff["ratio"] is not None else 0.8)
    eff["ratio"] = ratio

    cfg = TrainConfig(
        n_trees=int(eff["n_trees"]) if eff["n_trees"] is not None else TrainConfig.n_trees,
        max_depth=int(eff["max_depth"]) if eff["max_depth"] is not None else TrainConfig.max_depth,
        learning_rate=float(eff["learning_rate"]) if eff["learning_rate"] is not None else TrainConfig.learning_rate,
        l2_lambda=float(eff["l2_lambda"]) if eff["l2_lambda"] is not None else TrainConfig.l2_lambda,
        positive_class_weight=float(eff["pos_weight"]) if eff["pos_weight"] is not None else TrainConfig.positive_class_weight,
        seed=seed,
    )
    train_recs, _ = _load_split(eff["cohort"], ratio, seed)
    X = encode_matrix(train_recs)
    y = np.array([r.label for r in train_recs], dtype=np.float64)
    model = train(X, y, cfg, feature_names=FEATURE_NAMES)
    model.metrics["split_ratio"] = ratio
    model.metrics["split_seed"] = seed
    model.metrics["effective_config"] = eff
    save_model(model, eff["out"])

    log_path = str(eff["out"]) + ".train.log"
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(f"covtriage {__version__} train\n")
        fh.write(f"n_train={len(y)} positives={int(y.sum())} config={cfg}\n")
        for i, loss in enumerate(model.metrics["train_loss"]):
            fh.write(f"round={i} train_loss={loss!r}\n")
    print(f"trained {cfg.n_trees} trees on {len(y)} rows; model at {eff['out']}")
    return EXIT_OK


def _model_split(args, file_conf, model):
    """Evaluation must see the exact test partition of training; default the
    split parameters to the ones recorded in the model artifact."""
    eff = _merge(args, file_conf, ["cohort", "model", "ratio", "seed"])
    _require(eff, "cohort")
    _require(eff, "model")
    ratio = eff["ratio"] if eff["ratio"] is not None else model.metrics.get("split_ratio", 0.8)
    seed = eff["seed"] if eff["seed"] is not None else model.metrics.get("split_seed", 0)
    eff["ratio"], eff["seed"] = float(ratio), int(seed)
    return eff


def cmd_evaluate(args, file_conf) -> int:
    pre = _merge(args, file_conf, ["model", "out", "bootstrap", "level"])
    _require(pre, "model")
    _require(pre, "out")
    _check_input(pre["model"])
    model = load_model(pre["model"])
    eff = _model_split(args, file_conf, model)
    eff.update({k: pre[k] for k in ("out", "bootstrap", "level")})
    b = int(eff["bootstrap"]) if eff["bootstrap"] is not None else 1000
    level = float(eff["level"]) if eff["level"] is not None else 0.95
    eff["bootstrap"], eff["level"] = b, level

    _, test_recs = _load_split(eff["cohort"], eff["ratio"], eff["seed"])
    scores = predict_proba(model, encode_matrix(test_recs))
    labels = np.array([r.label for r in test_recs], dtype=np.int64)
    report = evaluate_report(scores, labels, B=b, level=level, seed=eff["seed"])

    doc = report.to_dict()
    doc["effective_config"] = eff
    doc["model_digest"] = model.digest()
    Path(eff["out"]).write_text(json.dumps(doc, indent=1) + "\n", "utf-8")
    base = str(eff["out"])
    base = base[:-5] if base.endswith(".json") else base
    with open(base + ".roc.csv", "w", encoding="utf-8") as fh:
        fh.write("fpr,tpr,threshold\n")
        for fpr, tpr, thr in report.roc_curve:
            fh.write(f"{fpr!r},{tpr!r},{thr!r}\n")
    with open(base + ".pr.csv", "w", encoding="utf-8") as fh:
        fh.write("recall,precision,threshold\n")
        for rec, prec, thr in report.pr_curve:
            fh.write(f"{rec!r},{prec!r},{thr!r}\n")
    print(format_metric_block(report))
    return EXIT_OK


def cmd_dca(args, file_conf) -> int:
    pre = _merge(args, file_conf, ["model", "out", "grid_step", "grid_max"])
    _require(pre, "model")
    _require(pre, "out")
    _check_input(pre["model"])
    model = load_model(pre["model"])
    eff = _model_split(args, file_conf, model)
    eff.update({k: pre[k] for k in ("out", "grid_step", "grid_max")})
    step = float(eff["grid_step"]) if eff["grid_step"] is not None else 0.005
    gmax = float(eff["grid_max"]) if eff["grid_max"] is not None else 0.5
    eff["grid_step"], eff["grid_max"] = step, gmax

    _, test_recs = _load_split(eff["cohort"], eff["ratio"], eff["seed"])
    scores = predict_proba(model, encode_matrix(test_recs))
    labels = np.array([r.label for r in test_recs], dtype=np.int64)
    curve = dca_curve(scores, labels, np.arange(0.0, gmax + 1e-12, step))
    with open(eff["out"], "w", encoding="utf-8") as fh:
        fh.write("threshold,model,treat_all,treat_none\n")
        for i in range(len(curve.thresholds)):
            fh.write(f"{float(curve.thresholds[i])!r},{float(curve.model[i])!r},"
                     f"{float(curve.treat_all[i])!r},{float(curve.treat_none[i])!r}\n")
    _write_meta(eff["out"], "dca", eff)
    print(f"wrote decision curve ({len(curve.thresholds)} points) to {eff['out']}")
    return EXIT_OK


def cmd_explain(args, file_conf) -> int:
    pre = _merge(args, file_conf, ["model", "out", "rank_by", "max_rows"])
    _require(pre, "model")
    _require(pre, "out")
    _check_input(pre["model"])
    model = load_model(pre["model"])
    eff = _model_split(args, file_conf, model)
    eff.update({k: pre[k] for k in ("out", "rank_by", "max_rows")})
    rank_by = eff["rank_by"] if eff["rank_by"] is not None else "mean_abs"
    eff["rank_by"] = rank_by

    _, test_recs = _load_split(eff["cohort"], eff["ratio"], eff["seed"])
    if eff["max_rows"] is not None:
        test_recs = test_recs[: int(eff["max_rows"])]
    X = encode_matrix(test_recs)
    s = summary(model, X, row_ids=[r.id for r in test_recs], rank_by=rank_by)
    base = str(eff["out"])
    ranking_path = (base[:-4] if base.endswith(".csv") else base) + ".ranking.json"
    write_summary(s, eff["out"], ranking_path)
    _write_meta(eff["out"], "explain", eff)
    top = s.feature_names[s.ranking[0]]
    print(f"wrote attributions for {len(test_recs)} rows to {eff['out']} "
          f"(top feature by {rank_by}: {top})")
    return EXIT_OK


def cmd_serve(args, file_conf) -> int:
    eff = _merge(args, file_conf, ["model", "bind", "low_cut", "high_cut", "lookup"])
    _require(eff, "model")
    _check_input(eff["model"])
    model = load_model(eff["model"])
    policy = BandPolicy(
        low_cut=float(eff["low_cut"]) if eff["low_cut"] is not None else 0.05,
        high_cut=float(eff["high_cut"]) if eff["high_cut"] is not None else 0.5,
    )
    regions = load_region_table(eff["lookup"]) if eff["lookup"] else load_region_table()
    bind = eff["bind"] if eff["bind"] is not None else "127.0.0.1:8000"
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValidationError("bind", f"expected ADDR:PORT, got {bind!r}")

    from .service import ScoringEngine, create_app
    import uvicorn
    engine = ScoringEngine(model, policy=policy, regions=regions)
    engine.warmup()
    app = create_app(engine)
    print(f"serving model {model.digest()} on {host}:{port}")
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covtriage", description=__doc__)
    p.add_argument("--version", action="version", version=f"covtriage {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its keys")

    g = sub.add_parser("generate", help="write a synthetic cohort CSV")
    common(g)
    g.add_argument("--out")
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--prevalence", type=float, help="recalibrate outcome prevalence")
    g.add_argument("--temp-missing-rate", type=float, dest="temp_missing_rate")

    t = sub.add_parser("train", help="train a model on the cohort's train split")
    common(t)
    t.add_argument("--cohort")
    t.add_argument("--out")
    t.add_argument("--seed", type=int)
    t.add_argument("--ratio", type=float)
    t.add_argument("--n-trees", type=int, dest="n_trees")
    t.add_argument("--max-depth", type=int, dest="max_depth")
    t.add_argument("--learning-rate", type=float, dest="learning_rate")
    t.add_argument("--l2-lambda", type=float, dest="l2_lambda")
    t.add_argument("--pos-weight", type=float, dest="pos_weight")

    e = sub.add_parser("evaluate", help="score the test split and report metrics")
    common(e)
    e.add_argument("--cohort")
    e.add_argument("--model")
    e.add_argument("--out")
    e.add_argument("--ratio", type=float)
    e.add_argument("--seed", type=int)
    e.add_argument("--bootstrap", type=int)
    e.add_argument("--level", type=float)

    d = sub.add_parser("dca", help="decision-curve analysis on the test split")
    common(d)
    d.add_argument("--cohort")
    d.add_argument("--model")
    d.add_argument("--out")
    d.add_argument("--ratio", type=float)
    d.add_argument("--seed", type=int)
    d.add_argument("--grid-step", type=float, dest="grid_step")
    d.add_argument("--grid-max", type=float, dest="grid_max")

    x = sub.add_parser("explain", help="attribution summary over the test split")
    common(x)
    x.add_argument("--cohort")
    x.add_argument("--model")
    x.add_argument("--out")
    x.add_argument("--ratio", type=float)
    x.add_argument("--seed", type=int)
    x.add_argument("--rank-by", choices=["mean_abs", "max_abs"], dest="rank_by")
    x.add_argument("--max-rows", type=int, dest="max_rows")

    s = sub.add_parser("serve", help="run the scoring service")
    common(s)
    s.add_argument("--model")
    s.add_argument("--bind")
    s.add_argument("--low-cut", type=float, dest="low_cut")
    s.add_argument("--high-cut", type=float, dest="high_cut")
    s.add_argument("--lookup", help="override the bundled region table")

    return p


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "dca": cmd_dca,
    "explain": cmd_explain,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_conf = _load_config_file(getattr(args, "config", None))
        return _COMMANDS[args.command](args, file_conf)
    except FileNotFoundError as exc:
        return _fail(EXIT_MISSING_INPUT, "missing-input", str(exc))
    except ModelVersionError as exc:
        return _fail(EXIT_VERSION, "model-version", str(exc))
    except (SchemaError, ModelFormatError) as exc:
        return _fail(EXIT_SCHEMA, "schema", str(exc))
    except ValidationError as exc:
        return _fail(EXIT_USAGE, "validation", str(exc))
    except CovtriageError as exc:
        return _fail(1, "error", str(exc))


if __name__ == "__main__":
    sys.exit(main())
