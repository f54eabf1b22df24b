"""Command-line surface: synth, split, preprocess, train, explain,
evaluate and threshold-spectrum.

Exit codes: 0 success, 1 pipeline/model error, 2 usage/config error.
All artifacts are written via temp-file-and-rename after the full
computation succeeds, so failed runs leave no partial outputs behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, evalkit, graphx, models, pipeline, synthgen, zonecore
from .dataio import _fmt
from .engine import DEFAULT_QUANTILES, DEFAULT_SEEDS, EngineConfig, trace_lines
from .errors import ConfigError, FormatError, ModelError, PipelineError, SmxError


def _write_atomic(path: Path, text: str, written: list[Path]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    written.append(path)


def _cleanup(written: list[Path]) -> None:
    for path in written:
        try:
            path.unlink()
        except OSError:
            pass


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# manifest handling

def _resolve(base: Path | None, value: str) -> Path:
    path = Path(value)
    if base is not None and not path.is_absolute():
        path = base / path
    return path


def _load_manifest(args) -> dict:
    """Merge an optional manifest file with direct flags (flags win)."""
    manifest: dict = {}
    base: Path | None = None
    if getattr(args, "manifest", None):
        mpath = Path(args.manifest)
        if not mpath.exists():
            raise ConfigError(f"manifest not found: {mpath}")
        try:
            manifest = json.loads(mpath.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{mpath}: invalid JSON ({exc})") from exc
        base = mpath.parent
    for key in ("train", "test", "zones", "model", "out"):
        flag = getattr(args, key, None)
        if flag is not None:
            manifest[key] = flag
            manifest.setdefault("_flag_keys", []).append(key)
    if getattr(args, "preprocess", None):
        manifest["preprocess"] = {
            "method": args.preprocess,
            "window": args.window,
            "order": args.order,
        }
    engine = dict(manifest.get("engine", {}))
    for flag, key in (
        ("bags", "bags"),
        ("bag_fraction", "bag_fraction"),
        ("min_support", "min_support_fraction"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            engine[key] = value
    if getattr(args, "quantiles", None) is not None:
        engine["quantiles"] = list(_parse_floats(args.quantiles))
    if getattr(args, "seeds", None) is not None:
        engine["seeds"] = list(_parse_ints(args.seeds))
    manifest["engine"] = engine
    manifest["_base"] = base
    return manifest


def _manifest_engine(manifest: dict) -> EngineConfig:
    engine = manifest.get("engine", {})
    return EngineConfig(
        bags=int(engine.get("bags", 10)),
        bag_fraction=float(engine.get("bag_fraction", 0.8)),
        min_support_fraction=float(engine.get("min_support_fraction", 0.2)),
        quantiles=tuple(float(q) for q in engine.get("quantiles", DEFAULT_QUANTILES)),
        seeds=tuple(int(s) for s in engine.get("seeds", DEFAULT_SEEDS)),
    )


def _manifest_path(manifest: dict, key: str, required: bool = True) -> Path | None:
    value = manifest.get(key)
    if value is None:
        if required:
            raise ConfigError(f"manifest is missing required entry '{key}'")
        return None
    base = None if key in manifest.get("_flag_keys", []) else manifest.get("_base")
    path = _resolve(base, str(value))
    if not path.exists():
        raise ConfigError(f"{key} file not found: {path}")
    return path


def _load_model_entry(manifest: dict):
    spec = manifest.get("model")
    if spec is None:
        raise ConfigError("manifest is missing required entry 'model'")
    if isinstance(spec, dict):
        return models.load_model(spec)
    return models.load_model(_manifest_path(manifest, "model"))


def _load_data(manifest: dict, need_test: bool):
    train = dataio.load_csv(_manifest_path(manifest, "train"))
    test = None
    test_path = _manifest_path(manifest, "test", required=need_test)
    if test_path is not None:
        test = dataio.load_csv(test_path)
    zones = dataio.load_zone_config(_manifest_path(manifest, "zones"))
    pre = manifest.get("preprocess")
    if pre:
        state = dataio.fit_preprocess(
            train,
            pre["method"],
            savgol_window=int(pre.get("window", 15)),
            savgol_order=int(pre.get("order", 2)),
        )
        train = dataio.apply_preprocess(state, train)
        if test is not None:
            test = dataio.apply_preprocess(state, test)
    return train, test, zones


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    cfg = synthgen.load_config(args.config) if args.config else synthgen.benchmark_config()
    ds = synthgen.generate(cfg)
    written: list[Path] = []
    _write_atomic(Path(args.out), dataio.dataset_csv_text(ds), written)
    if args.zones_out:
        zones = synthgen.benchmark_zones()
        payload = [
            {"name": z.name, "start": z.start, "end": z.end, "plausible": z.plausible}
            for z in zones.zones
        ]
        _write_atomic(Path(args.zones_out), json.dumps(payload, indent=2) + "\n", written)
    return 0


def cmd_split(args) -> int:
    ds = dataio.load_csv(args.input)
    train, test = dataio.kennard_stone_split(ds, args.train_fraction)
    written: list[Path] = []
    _write_atomic(Path(args.out_train), dataio.dataset_csv_text(train), written)
    _write_atomic(Path(args.out_test), dataio.dataset_csv_text(test), written)
    return 0


def cmd_preprocess(args) -> int:
    train = dataio.load_csv(args.train)
    state = dataio.fit_preprocess(
        train, args.method, savgol_window=args.window, savgol_order=args.order
    )
    written: list[Path] = []
    _write_atomic(Path(args.out_train), dataio.dataset_csv_text(dataio.apply_preprocess(state, train)), written)
    if args.test:
        if not args.out_test:
            raise ConfigError("--out-test is required when --test is given")
        test = dataio.load_csv(args.test)
        _write_atomic(Path(args.out_test), dataio.dataset_csv_text(dataio.apply_preprocess(state, test)), written)
    if args.state:
        _write_atomic(Path(args.state), json.dumps(state.to_dict(), indent=2) + "\n", written)
    return 0


def cmd_train(args) -> int:
    train = dataio.load_csv(args.train)
    if args.model == "ridge":
        model = models.fit_ridge(train, lam=args.lam)
        extra = ""
    else:
        model = models.fit_logistic(train, l2=args.l2, max_iters=args.max_iters, tol=args.tol)
        extra = f" converged={model.converged} iters={model.n_iters}"
    preds = model.predict(train.intensities) if args.model == "ridge" else None
    if preds is not None:
        acc = float(np.mean((preds > 0.5).astype(int) == train.labels))
    else:
        acc = float(
            np.mean((model.predict_proba(train.intensities)[:, 1] > 0.5).astype(int) == train.labels)
        )
    models.save_model(model, args.out)
    print(f"trained {args.model}: train accuracy {acc:.4f}{extra}")
    return 0


def cmd_explain(args) -> int:
    manifest = _load_manifest(args)
    out_dir = manifest.get("out") or manifest.get("output_dir")
    if out_dir is None:
        raise ConfigError("an output directory is required (--out or manifest output_dir)")
    base = None if "out" in manifest.get("_flag_keys", []) else manifest.get("_base")
    out = _resolve(base, str(out_dir))
    train, _test, zones = _load_data(manifest, need_test=False)
    model = _load_model_entry(manifest)
    cfg = _manifest_engine(manifest)

    result = pipeline.explain(train, zones, model, cfg)

    written: list[Path] = []
    try:
        _write_atomic(out / "predicate_ranking.csv", graphx.ranking_csv(result.ranking, result.predicate_set), written)
        _write_atomic(out / "zone_ranking.csv", graphx.zone_ranking_csv(result.zone_order), written)
        _write_atomic(out / "zone_models.json", zonecore.zone_models_to_json(result.zone_models), written)
        trace: list[str] = []
        for seed in cfg.seeds:
            graph = next(g for g in result.graphs if g.seed == seed)
            _write_atomic(out / f"graph_seed_{seed}.dot", graphx.to_dot(graph, result.predicate_set), written)
            _write_atomic(out / f"graph_seed_{seed}.json", graphx.to_json(graph, result.predicate_set), written)
            trace.extend(trace_lines(seed, result.bag_results[seed], result.predicate_set))
        _write_atomic(out / "bag_trace.jsonl", "\n".join(trace) + "\n", written)
        for j, pred in enumerate(result.predicate_set.predicates):
            zm = result.zone_models[pred.zone_index]
            spectrum = zonecore.threshold_spectrum(zm, pred.tau)
            _write_atomic(
                out / "threshold_spectra" / f"predicate_{j:03d}.csv",
                zonecore.threshold_spectrum_csv(spectrum, train.axis, zm.indices),
                written,
            )
    except Exception:
        _cleanup(written)
        raise
    return 0


def cmd_threshold_spectrum(args) -> int:
    manifest = _load_manifest(args)
    train, _test, zones = _load_data(manifest, need_test=False)
    zone_models, _scores = zonecore.fit_zone_models(train, zones)
    matches = [m for m in zone_models if m.zone_name == args.zone]
    if not matches:
        raise ConfigError(f"zone '{args.zone}' is not defined in the zone config")
    model = matches[0]
    spectrum = zonecore.threshold_spectrum(model, args.tau)
    written: list[Path] = []
    _write_atomic(
        Path(args.out),
        zonecore.threshold_spectrum_csv(spectrum, train.axis, model.indices),
        written,
    )
    return 0


# ---------------------------------------------------------------------------
# evaluation harness

_METRIC_KEYS = ("faithfulness_auc", "alignment_auc", "simplicity_auc", "stability_median")


def _curve_dict(curve: evalkit.EvalCurve) -> dict:
    return {"x": curve.x, "y": curve.y, "auc": curve.auc}


def _evaluate_one(manifest: dict, methods: list[str], args) -> dict:
    train, test, zones = _load_data(manifest, need_test=True)
    model = _load_model_entry(manifest)
    cfg = _manifest_engine(manifest)
    zone_sets = {
        z.name: idx for z, idx in zip(zones.zones, dataio.resolve_zones(zones, train))
    }
    plausible = zones.plausible_names()

    per_method: dict[str, dict] = {}
    rankings: dict[str, list[str]] = {}
    importances: dict[str, np.ndarray] = {}

    if "smx" in methods:
        result = pipeline.explain(train, zones, model, cfg)
        rankings["smx"] = result.ranked_zone_names()
        importances["smx"] = result.ranking.mean_lrc
        per_method["smx"] = {
            "zone_ranking": [
                {"zone": name, "ranked": ranked} for name, ranked in result.zone_order
            ]
        }
    if "pfi" in methods:
        imps = evalkit.pfi(model, test.intensities, repeats=args.pfi_repeats, seed=args.pfi_seed)
        order = evalkit.variable_zone_ranking(imps, zone_sets, zones.names())
        rankings["pfi"] = [name for name, ranked in order if ranked]
        importances["pfi"] = imps
        per_method["pfi"] = {
            "zone_ranking": [{"zone": name, "ranked": ranked} for name, ranked in order]
        }

    depth = min(len(r) for r in rankings.values())
    if args.kmax:
        depth = min(depth, args.kmax)
    if depth < 1:
        raise PipelineError("a method produced an empty zone ranking; nothing to evaluate")

    for name in methods:
        section = per_method[name]
        ranked = rankings[name][:depth]
        section["faithfulness"] = _curve_dict(
            evalkit.faithfulness_curve(model, test.intensities, ranked, zone_sets, depth)
        )
        section["alignment"] = _curve_dict(evalkit.agreement_curve(ranked, plausible))
        section["simplicity"] = _curve_dict(evalkit.simplicity_curve(importances[name]))

    if args.stability_runs >= 2:
        seeds = list(range(args.stability_runs))
        if "smx" in methods:
            def smx_runner(seed: int):
                reruns = EngineConfig(
                    bags=cfg.bags,
                    bag_fraction=cfg.bag_fraction,
                    min_support_fraction=cfg.min_support_fraction,
                    quantiles=cfg.quantiles,
                    seeds=pipeline.derive_seeds(seed, len(cfg.seeds)),
                )
                return pipeline.explain(train, zones, model, reruns).predicate_labels()

            res = evalkit.stability_study(smx_runner, seeds, rho=args.rho, depth=args.depth)
            per_method["smx"]["stability"] = {
                "instabilities": res.instabilities,
                "median": res.median,
            }
        if "pfi" in methods:
            def pfi_runner(seed: int):
                imps = evalkit.pfi(model, test.intensities, repeats=args.pfi_repeats, seed=seed)
                return list(np.argsort(-imps, kind="stable"))

            res = evalkit.stability_study(pfi_runner, seeds, rho=args.rho, depth=args.depth)
            per_method["pfi"]["stability"] = {
                "instabilities": res.instabilities,
                "median": res.median,
            }

    name = manifest.get("name") or Path(str(manifest.get("train"))).stem
    return {"name": str(name), "depth": depth, "methods": per_method}


def _metric_value(section: dict, metric: str) -> float | None:
    if metric == "stability_median":
        stability = section.get("stability")
        return None if stability is None else stability["median"]
    key = metric.removesuffix("_auc")
    return section[key]["auc"]


def _compare(datasets: list[dict], methods: list[str]) -> list[dict]:
    comparisons = []
    others = [m for m in methods if m != "smx"]
    if "smx" not in methods or not others:
        return comparisons
    for metric in _METRIC_KEYS:
        for other in others:
            diffs = []
            for entry in datasets:
                a = _metric_value(entry["methods"][other], metric)
                b = _metric_value(entry["methods"]["smx"], metric)
                if a is None or b is None:
                    continue
                diffs.append(a - b)
            if len(diffs) < 4:
                continue  # the exact test needs at least 4 paired values
            row: dict = {
                "metric": metric,
                "pair": f"{other}-smx",
                "n": len(diffs),
                "median_diff": float(np.median(diffs)),
            }
            try:
                test = evalkit.wilcoxon_signed_rank(diffs)
                row["statistic"] = test.statistic
                row["p_value"] = test.p_value
            except (ConfigError, PipelineError) as exc:
                row["note"] = str(exc)
            comparisons.append(row)
    return comparisons


def cmd_evaluate(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("smx", "pfi"):
            raise ConfigError(f"unknown method '{m}' (expected smx and/or pfi)")
    if not methods:
        raise ConfigError("at least one method is required")
    datasets = []
    for mpath in args.manifest:
        ns = argparse.Namespace(manifest=mpath)
        manifest = _load_manifest(ns)
        datasets.append(_evaluate_one(manifest, methods, args))
    report = {
        "methods": methods,
        "datasets": datasets,
        "comparisons": _compare(datasets, methods),
    }
    out = Path(args.out)
    written: list[Path] = []
    try:
        _write_atomic(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n", written)
        for entry in datasets:
            for method, section in entry["methods"].items():
                for metric in ("faithfulness", "alignment", "simplicity"):
                    curve = section.get(metric)
                    if curve is None:
                        continue
                    lines = ["k,value"]
                    lines.extend(f"{k},{_fmt(v)}" for k, v in zip(curve["x"], curve["y"]))
                    _write_atomic(
                        out / "curves" / f"{entry['name']}__{method}__{metric}.csv",
                        "\n".join(lines) + "\n",
                        written,
                    )
    except Exception:
        _cleanup(written)
        raise
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smx",
        description="Zone-based post-hoc explanations for binary spectral classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark dataset")
    p.add_argument("--config", help="synthetic config JSON (defaults to the built-in benchmark)")
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.add_argument("--zones-out", help="also write the benchmark zone config JSON here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="per-class Kennard-Stone train/test split")
    p.add_argument("--input", required=True)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("preprocess", help="fit preprocessing on train and apply it")
    p.add_argument("--method", required=True, choices=dataio.PREPROCESS_METHODS)
    p.add_argument("--train", required=True)
    p.add_argument("--out-train", required=True)
    p.add_argument("--test")
    p.add_argument("--out-test")
    p.add_argument("--state", help="write fitted parameters to this JSON file")
    p.add_argument("--window", type=int, default=15)
    p.add_argument("--order", type=int, default=2)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="fit a builtin reference model")
    p.add_argument("--train", required=True)
    p.add_argument("--model", required=True, choices=("ridge", "logistic"))
    p.add_argument("--out", required=True)
    p.add_argument("--lam", type=float, default=1.0, help="ridge regularization")
    p.add_argument("--l2", type=float, default=0.01, help="logistic regularization")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_train)

    def add_common(p):
        p.add_argument("--manifest", help="JSON manifest; direct flags override it")
        p.add_argument("--train")
        p.add_argument("--test")
        p.add_argument("--zones")
        p.add_argument("--model")
        p.add_argument("--preprocess", choices=dataio.PREPROCESS_METHODS)
        p.add_argument("--window", type=int, default=15)
        p.add_argument("--order", type=int, default=2)
        p.add_argument("--bags", type=int)
        p.add_argument("--bag-fraction", type=float, dest="bag_fraction")
        p.add_argument("--min-support", type=float, dest="min_support")
        p.add_argument("--quantiles")
        p.add_argument("--seeds")

    p = sub.add_parser("explain", help="run the full explanation pipeline")
    add_common(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="score explanation quality for smx/pfi")
    p.add_argument("--manifest", nargs="+", required=True, help="one or more dataset manifests")
    p.add_argument("--methods", default="smx,pfi")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--kmax", type=int, default=0, help="cap the masking depth (0 = auto)")
    p.add_argument("--stability-runs", type=int, default=10, dest="stability_runs")
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--pfi-repeats", type=int, default=10, dest="pfi_repeats")
    p.add_argument("--pfi-seed", type=int, default=0, dest="pfi_seed")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("threshold-spectrum", help="back-project one score threshold")
    add_common(p)
    p.add_argument("--zone", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_threshold_spectrum)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PipelineError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SmxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
