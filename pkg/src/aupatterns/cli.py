"""Command-line surface: ingestion, mining, fixture analytics, experiments.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 consistency-tolerance failure (from ``paper-tables``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analytics, mining, reference
from .annotations import AnnotationError, infer_registry, parse_annotations
from .experiments import (
    FoldPlan,
    ProtocolViolation,
    default_spec_factory,
    eval_unseen,
    make_folds,
    run_all_patterns,
    run_multi_au,
    run_pattern_pretrain,
    run_single_au,
    save_fold_scores,
)
from .metrics import report_csv
from .mining import DEFAULT_HISTOGRAM_EDGES, PatternCodebook
from .nn import TrainConfig, load_checkpoint, preset_wide_cnn, save_checkpoint
from .synth import bp4d_like_spec, demo_training_spec, generate, read_images, write_images

USAGE_ERROR, DATA_ERROR, TOLERANCE_ERROR = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _print_table(headers, rows):
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(headers)]
    line = "  ".join(str(h).ljust(w) for h, w in zip(headers, widths))
    print(line)
    print("-" * len(line))
    for r in rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))


def _cli_manifest(out_dir: Path, argv, config: dict, outputs: list[str], extra=None):
    doc = {
        "argv": list(argv),
        "package_version": __version__,
        "config": config,
        "outputs": sorted(outputs),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        doc.update(extra)
    _write(out_dir / "cli_manifest.json", json.dumps(doc, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# analyze

def cmd_analyze(args, argv) -> int:
    path = Path(args.annotations)
    text = path.read_text()
    first_line = text.splitlines()[0] if text else ""
    registry = infer_registry(first_line)
    table = parse_annotations(text, registry)
    out = Path(args.out)

    rates = mining.base_rates(table)
    rates_csv = "au,rate\n" + "\n".join(
        f"{c},{r:.9f}" for c, r in zip(rates.codes, rates.rates)
    ) + "\n"
    _write(out / "base_rates.csv", rates_csv)

    cns = mining.census(table)
    _write(out / "census.csv", mining.census_report_csv(cns))

    edges = list(DEFAULT_HISTOGRAM_EDGES)
    max_count = max(cns.entries.values())
    if max_count > edges[-1]:
        edges[-1] = max_count  # widen the final bin to cover the data
    pct = mining.histogram(cns, edges)
    hist_rows = ["bin_lo,bin_hi,n_patterns,percent"]
    tallies = [0] * (len(edges) - 1)
    for c in cns.entries.values():
        for b in range(len(edges) - 1):
            if (edges[b] <= c < edges[b + 1]) or (b == len(edges) - 2 and c == edges[-1]):
                tallies[b] += 1
                break
    for b in range(len(edges) - 1):
        hist_rows.append(f"{edges[b]},{edges[b+1]},{tallies[b]},{pct[b]:.9f}")
    _write(out / "histogram.csv", "\n".join(hist_rows) + "\n")

    tops = mining.top_pattern_per_task(table)
    task_rows = ["task,bits,count"]
    for task in sorted(tops):
        p, c = tops[task]
        task_rows.append(f"{task},{p.to_string()},{c}")
    _write(out / "task_top_patterns.csv", "\n".join(task_rows) + "\n")

    outputs = ["base_rates.csv", "census.csv", "histogram.csv", "task_top_patterns.csv"]
    _cli_manifest(out, argv, {"annotations": str(path)}, outputs,
                  {"data_sha256": _sha256_file(path), "n_frames": len(table),
                   "n_distinct_patterns": cns.n_distinct})

    print(f"{len(table)} frames, {cns.n_distinct} distinct patterns, "
          f"{len(table.subjects())} subjects, {len(table.tasks())} tasks")
    top, _ = mining.top_bottom(cns, 5, 2)
    _print_table(["count", "bits"], [(c, p.to_string()) for p, c in top])
    print(f"reports written to {out}")
    return 0


# ---------------------------------------------------------------------------
# paper-tables (fixture consistency runner)

def _check(name, computed, published, tol, failures, rows):
    diff = abs(computed - published)
    ok = diff <= tol and not math.isnan(computed)
    if not ok:
        failures.append(f"{name}: computed {computed:.4f} vs published {published:.4f} "
                        f"(|diff| {diff:.4f} > {tol})")
    rows.append((name, f"{computed:.4f}", f"{published:.4f}", f"{diff:.4f}",
                 "ok" if ok else "FAIL"))
    return ok


def cmd_paper_tables(args, argv) -> int:
    fixtures = Path(args.fixtures) if args.fixtures else analytics.fixture_path("checksums.json").parent
    digests = analytics.verify_fixtures(fixtures)
    out = Path(args.out)
    failures: list[str] = []

    datasets = {
        "bp4d": (reference.PUBLISHED_CORR_BP4D, reference.PUBLISHED_CORR_BP4D_AVG,
                 reference.PUBLISHED_STD_BP4D, reference.PUBLISHED_STD_BP4D_AVG),
        "disfa": (reference.PUBLISHED_CORR_DISFA, reference.PUBLISHED_CORR_DISFA_AVG,
                  reference.PUBLISHED_STD_DISFA, reference.PUBLISHED_STD_DISFA_AVG),
    }
    for name, (pub_corr, pub_corr_avg, pub_std, pub_std_avg) in datasets.items():
        scores = analytics.load_method_scores(fixtures / f"{name}_scores.csv")
        rates = analytics.load_rates(fixtures / f"{name}_rates.csv")
        corr = analytics.imbalance_correlations(scores, rates, exclude=("Ones",))
        rows = []
        for m, pub in pub_corr.items():
            _check(f"corr[{m}]", corr.correlations[m], pub, reference.CORR_TOL, failures, rows)
        avg_pub_set = sum(corr.correlations[m] for m in pub_corr) / len(pub_corr)
        _check("corr[average]", avg_pub_set, pub_corr_avg, reference.CORR_TOL, failures, rows)
        _write(out / f"correlations_{name}.csv",
               "method,computed,published,diff,status\n"
               + "\n".join(",".join(r) for r in rows) + "\n")

        per_au, avg = analytics.cross_method_std(scores, exclude=("Ones",))
        rows = []
        for au, pub in pub_std.items():
            _check(f"std[AU{au}]", per_au[au], pub, reference.STD_TOL, failures, rows)
        _check("std[average]", avg, pub_std_avg, reference.STD_TOL, failures, rows)
        _write(out / f"std_{name}.csv",
               "au,computed,published,diff,status\n"
               + "\n".join(",".join(r) for r in rows) + "\n")

    # all-active control: internal closed-form consistency on the bp4d fixture
    ones = analytics.load_ones_reference(fixtures / "ones_experiment1.csv")
    rows = []
    for au, vals in ones.items():
        p = vals["f1_micro"]
        _check(f"ones[AU{au}].f1_binary", 2 * p / (1 + p), vals["f1_binary"],
               reference.ONES_CONSISTENCY_TOL, failures, rows)
        _check(f"ones[AU{au}].f1_macro", p / (1 + p), vals["f1_macro"],
               reference.ONES_CONSISTENCY_TOL, failures, rows)
        if vals["auc"] != 0.5:
            failures.append(f"ones[AU{au}].auc: {vals['auc']} != 0.5")
            rows.append((f"ones[AU{au}].auc", str(vals["auc"]), "0.5", "-", "FAIL"))
    rates = analytics.load_rates(fixtures / "bp4d_rates.csv")
    ones_binary = [ones[au]["f1_binary"] for au in rates.codes]
    _check("ones[corr.f1_binary]", analytics.pearson(rates.rates, ones_binary),
           reference.ONES_F1_BINARY_CORR, reference.CORR_TOL, failures, rows)
    _write(out / "ones_consistency.csv",
           "check,computed,published,diff,status\n"
           + "\n".join(",".join(r) for r in rows) + "\n")

    # histogram fixture: recompute percentages from the stored counts
    hist = analytics.load_histogram_fixture(fixtures / "bp4d_histogram.csv")
    total = sum(h["count"] for h in hist)
    rows = []
    for h in hist:
        pct = 100.0 * h["count"] / total
        ok = abs(pct - h["percent"]) <= 1e-8
        if not ok:
            failures.append(f"histogram bin {h['bin_lo']}-{h['bin_hi']}: {pct} != {h['percent']}")
        rows.append((f"{h['bin_lo']}-{h['bin_hi']}", f"{pct:.8f}", f"{h['percent']:.8f}",
                     "ok" if ok else "FAIL"))
    below50 = sum(h["percent"] for h in hist if h["bin_hi"] <= 50)
    _check("histogram[below-50 sum]", below50, reference.HISTOGRAM_BELOW_50_SUM,
           reference.HISTOGRAM_SUM_TOL, failures, [])
    _write(out / "histogram_check.csv",
           "bin,computed,fixture,status\n" + "\n".join(",".join(r) for r in rows) + "\n")

    outputs = ["correlations_bp4d.csv", "correlations_disfa.csv", "std_bp4d.csv",
               "std_disfa.csv", "ones_consistency.csv", "histogram_check.csv"]
    _cli_manifest(out, argv, {"fixtures": str(fixtures)}, outputs,
                  {"fixture_sha256": digests, "failures": failures})

    print(f"fixture checks: {len(failures)} violation(s)")
    for f in failures:
        print(f"  FAIL {f}")
    print(f"reports written to {out}")
    return TOLERANCE_ERROR if failures else 0


# ---------------------------------------------------------------------------
# gen-data

def cmd_gen_data(args, argv) -> int:
    if args.spec == "demo":
        spec = demo_training_spec(seed=args.seed)
    else:
        spec = bp4d_like_spec(seed=args.seed)
    overrides = {}
    if args.subjects:
        overrides["n_subjects"] = args.subjects
    if args.frames:
        overrides["frames_per_subject"] = args.frames
    if args.noise is not None:
        overrides["noise_std"] = args.noise
    if overrides:
        spec = replace(spec, **overrides)
    table, images = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .annotations import serialize_annotations

    (out / "annotations.csv").write_text(serialize_annotations(table))
    write_images(out / "images.bin", images)
    echo = {
        "spec": args.spec,
        "seed": spec.seed,
        "n_subjects": spec.n_subjects,
        "frames_per_subject": spec.frames_per_subject,
        "image_side": spec.image_side,
        "noise_std": spec.noise_std,
        "n_tasks": spec.n_tasks,
        "archetypes": [[p.to_string(), w] for p, w in spec.archetypes],
    }
    _cli_manifest(out, argv, echo, ["annotations.csv", "images.bin"],
                  {"annotations_sha256": _sha256_file(out / "annotations.csv"),
                   "images_sha256": _sha256_file(out / "images.bin")})
    print(f"wrote {len(table)} frames ({spec.n_subjects} subjects) to {out}")
    return 0


# ---------------------------------------------------------------------------
# run

_CONFIG_DEFAULTS = {
    "seed": 0,
    "folds": 3,
    "min_count": 40,
    "threshold": 0.5,
    "scale": 0.0625,
    "jobs": 1,
    "epochs": 5,
    "learning_rate": 0.15,
    "momentum": 0.9,
    "batch_size": 64,
    "arch": "compact",
    "annotations": None,
    "images": None,
    "image_side": 32,
    "pretrained": None,
}


def _usage_error(msg: str):
    print(f"error: {msg}", file=sys.stderr)
    raise SystemExit(USAGE_ERROR)


def _load_config(args) -> dict:
    cfg = dict(_CONFIG_DEFAULTS)
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        unknown = set(loaded) - set(cfg)
        if unknown:
            _usage_error(f"unknown config key(s): {sorted(unknown)}")
        cfg.update(loaded)
    for key in ("seed", "folds", "min_count", "threshold", "scale", "jobs", "pretrained"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = val
    return cfg


def _load_run_data(cfg):
    """Either user-supplied annotation/image files or the bundled synth set."""
    if cfg["annotations"]:
        if not cfg["images"]:
            _usage_error("config has 'annotations' but no 'images' path")
        text = Path(cfg["annotations"]).read_text()
        registry = infer_registry(text.splitlines()[0])
        table = parse_annotations(text, registry)
        images = read_images(cfg["images"], cfg["image_side"])
        data_digest = hashlib.sha256(text.encode()).hexdigest()
    else:
        spec = demo_training_spec(seed=cfg["seed"])
        table, images = generate(spec)
        from .annotations import serialize_annotations

        data_digest = hashlib.sha256(serialize_annotations(table).encode()).hexdigest()
    side = next(iter(images.values())).shape[0]
    return table, images, side, data_digest


def _make_factory(cfg, side):
    if cfg["arch"] == "wide":
        def make(head, units):
            return preset_wide_cnn((1, side, side), units, head=head,
                                   width_multiplier=cfg["scale"], seed=cfg["seed"])
        return make
    return default_spec_factory((1, side, side), seed=cfg["seed"])


def _train_config(cfg, loss="bce") -> TrainConfig:
    return TrainConfig(
        loss=loss,
        learning_rate=cfg["learning_rate"],
        momentum=cfg["momentum"],
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        threshold=cfg["threshold"],
        seed=cfg["seed"],
    )


def cmd_run(args, argv) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table, images, side, data_digest = _load_run_data(cfg)
    plan = make_folds(table.subjects(), k=cfg["folds"], seed=cfg["seed"])
    make = _make_factory(cfg, side)
    tc = _train_config(cfg)
    exp = args.experiment
    outputs: list[str] = []
    manifests: dict = {}

    if exp == "exp1":
        run = run_multi_au(table, images, make("sigmoid", table.registry.k), tc, plan)
        _write(out / "metrics_exp1.csv", report_csv(run.report))
        save_fold_scores(out / "folds_exp1.npz", run.folds)
        outputs += ["metrics_exp1.csv", "folds_exp1.npz"]
        manifests = json.loads(run.manifest.to_json())
        _print_report(run.report)
    elif exp == "exp2":
        runs = run_single_au(table, images, make("sigmoid", table.registry.k), tc, plan,
                             jobs=cfg["jobs"])
        summary = ["au,f1_binary,f1_micro,f1_macro,auc"]
        for au, run in sorted(runs.items()):
            name = f"metrics_exp2_AU{au}.csv"
            _write(out / name, report_csv(run.report))
            outputs.append(name)
            r = run.report.rows[0]
            summary.append(f"{au},{r.f1_binary.value:.9f},{r.f1_micro.value:.9f},"
                           f"{r.f1_macro.value:.9f},{r.auc.value:.9f}")
        _write(out / "metrics_exp2_summary.csv", "\n".join(summary) + "\n")
        outputs.append("metrics_exp2_summary.csv")
        manifests = json.loads(next(iter(runs.values())).manifest.to_json())
        print((out / "metrics_exp2_summary.csv").read_text())
    elif exp == "exp3":
        res = run_pattern_pretrain(table, images, tc, cfg["min_count"],
                                   make_spec=make, plan=plan)
        for role in ("direct", "pattern", "split"):
            run = getattr(res, role)
            _write(out / f"metrics_exp3_{role}.csv", report_csv(run.report))
            save_fold_scores(out / f"folds_exp3_{role}.npz", run.folds)
            outputs += [f"metrics_exp3_{role}.csv", f"folds_exp3_{role}.npz"]
        for i, (pspec, pstate) in enumerate(res.pattern.models):
            name = f"pattern_fold{i}.ckpt"
            save_checkpoint(out / name, pspec, pstate)
            outputs.append(name)
        _write(out / "codebook.json", res.codebook.to_json())
        _write(out / "plan.json", json.dumps(
            {"seed": plan.seed, "folds": [list(f) for f in plan.folds]}))
        _write(out / "variance.json", json.dumps(res.f1_binary_variance, indent=2))
        outputs += ["codebook.json", "plan.json", "variance.json"]
        manifests = json.loads(res.direct.manifest.to_json())
        print(f"codebook classes: {len(res.codebook)}; "
              f"in/out frames: {len(res.in_table)}/{len(res.out_table)}")
        print("f1_binary variance:", json.dumps(res.f1_binary_variance))
        _print_report(res.split.report)
    elif exp in ("exp4", "unseen"):
        pre = cfg["pretrained"]
        if not pre:
            _usage_error(
                f"'{exp}' needs --pretrained pointing at an exp3 output directory")
        pre = Path(pre)
        if not (pre / "codebook.json").exists():
            _usage_error(
                f"{pre} has no codebook.json; run exp3 first and pass its output directory")
        codebook = PatternCodebook.from_json((pre / "codebook.json").read_text())
        plan_doc = json.loads((pre / "plan.json").read_text())
        plan = FoldPlan(tuple(tuple(f) for f in plan_doc["folds"]), plan_doc["seed"])
        pattern_models = []
        for i in range(plan.k):
            ck = pre / f"pattern_fold{i}.ckpt"
            if not ck.exists():
                _usage_error(f"missing checkpoint {ck}")
            pattern_models.append(load_checkpoint(ck))
        if exp == "exp4":
            runs = run_all_patterns(table, images, tc, pattern_models, plan, codebook,
                                    make_spec=make)
            for role, run in runs.items():
                _write(out / f"metrics_exp4_{role}.csv", report_csv(run.report))
                save_fold_scores(out / f"folds_exp4_{role}.npz", run.folds)
                outputs += [f"metrics_exp4_{role}.csv", f"folds_exp4_{role}.npz"]
                _print_report(run.report)
            manifests = json.loads(runs["direct"].manifest.to_json())
        else:
            _, out_table = mining.restrict(table, codebook)
            run = eval_unseen(pattern_models, plan, out_table, images, codebook, tc)
            _write(out / "metrics_unseen.csv", report_csv(run.report))
            save_fold_scores(out / "folds_unseen.npz", run.folds)
            outputs += ["metrics_unseen.csv", "folds_unseen.npz"]
            manifests = json.loads(run.manifest.to_json())
            _print_report(run.report)

    _cli_manifest(out, argv, cfg, outputs,
                  {"data_sha256": data_digest, "run_manifest": manifests})
    print(f"outputs written to {out}")
    return 0


def _print_report(report):
    rows = []
    for r in report.rows:
        rows.append((f"AU{r.au}", f"{r.f1_binary.value:.4f}", f"{r.f1_micro.value:.4f}",
                     f"{r.f1_macro.value:.4f}", f"{r.auc.value:.4f}"))
    rows.append(("AVG", *(f"{report.average(m).value:.4f}"
                          for m in ("f1_binary", "f1_micro", "f1_macro", "auc"))))
    _print_table(["au", "f1_binary", "f1_micro", "f1_macro", "auc"], rows)


# ---------------------------------------------------------------------------
# report

def cmd_report(args, argv) -> int:
    import csv as _csv

    for path in args.metrics:
        print(f"== {path}")
        with open(path, newline="") as fh:
            rows = list(_csv.reader(fh))
        _print_table(rows[0], rows[1:])
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="aupatterns",
                description="AU occurrence-pattern analytics and detection experiments")
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="mine an annotations CSV into report CSVs")
    pa.add_argument("annotations")
    pa.add_argument("--out", required=True)

    pt = sub.add_parser("paper-tables",
                        help="recompute the fixture analytics and check tolerances")
    pt.add_argument("--fixtures", default=None, help="fixture directory (default: bundled)")
    pt.add_argument("--out", required=True)

    pg = sub.add_parser("gen-data", help="write a synthetic annotations + images set")
    pg.add_argument("--spec", choices=["demo", "bp4d-like"], default="demo")
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", required=True)
    pg.add_argument("--subjects", type=int, default=None)
    pg.add_argument("--frames", type=int, default=None)
    pg.add_argument("--noise", type=float, default=None)

    pr = sub.add_parser("run", help="run an experiment pipeline")
    pr.add_argument("experiment", choices=["exp1", "exp2", "exp3", "exp4", "unseen"])
    pr.add_argument("--config", default=None, help="JSON config file (flat keys)")
    pr.add_argument("--out", required=True)
    pr.add_argument("--seed", type=int, default=None)
    pr.add_argument("--jobs", type=int, default=None)
    pr.add_argument("--min-count", dest="min_count", type=int, default=None)
    pr.add_argument("--threshold", type=float, default=None)
    pr.add_argument("--folds", type=int, default=None)
    pr.add_argument("--scale", type=float, default=None)
    pr.add_argument("--pretrained", default=None,
                    help="exp3 output directory (for exp4 and unseen)")

    pp = sub.add_parser("report", help="pretty-print stored metrics CSVs")
    pp.add_argument("metrics", nargs="+")
    return p


_COMMANDS = {
    "analyze": cmd_analyze,
    "paper-tables": cmd_paper_tables,
    "gen-data": cmd_gen_data,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, argv)
    except SystemExit as e:
        return int(e.code or 0)
    except (AnnotationError, analytics.FixtureError, ProtocolViolation) as e:
        print(f"data error: {e}", file=sys.stderr)
        return DATA_ERROR
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
