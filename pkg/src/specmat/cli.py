"""Command-line entry point: ``specmat {validate,synth,preprocess,run,report}``.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O or usage failure.

``run`` reads an optional JSON config whose keys mirror the flags::

    {"corpus": "data/", "sensor": "nir", "classifier": "mlp", "protocol": "kfold",
     "k": 5, "n_per_object": 80, "n_objects": [1, 2, 3], "seed": 0, "repeats": 1,
     "workers": 1, "out": "runs/a",
     "filter": {"order": 5, "cutoff": 0.1},
     "train": {"epochs": 300, "batch_size": 32, "learning_rate": 0.0005},
     "svm": {"lambda": 0.0001, "epochs": 100, "batch_size": 8}}

Flags given on the command line override the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from specmat.core import CorpusError, SensorKind, SynthConfig, load_corpus, synth_corpus, write_corpus
from specmat.evaluation import (
    ClassifierConfig,
    EvalReport,
    SweepReport,
    centroid_oracle_accuracy,
    load_report,
    run_kfold,
    run_leave_one_object_out,
    run_object_count_sweep,
    summarize_spectra,
    write_report,
)
from specmat.figures import write_confusion_figure, write_spectrum_figure, write_sweep_figure
from specmat.mlp import TrainConfig
from specmat.preprocess import FilterSpec, design_butterworth, preprocess_arrays

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2
log = logging.getLogger("specmat")


class UsageError(Exception):
    """Bad invocation or config file; maps to exit code 2."""


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    corpus: str | None = None
    sensor: str = "nir"
    classifier: str = "mlp"
    protocol: str = "kfold"
    k: int = 5
    n_per_object: int | None = None
    n_objects: list | int | str | None = None
    seed: int = 0
    repeats: int = 1
    workers: int = 1
    out: str = "run_out"
    filter: FilterSpec = FilterSpec()
    train: TrainConfig = TrainConfig()
    svm_lambda: float = 1e-4
    svm_epochs: int = 100
    svm_batch_size: int = 8

    def check(self) -> None:
        if self.corpus is None:
            raise UsageError("no corpus given (--corpus or config 'corpus')")
        if self.classifier not in ("mlp", "svm"):
            raise UsageError(f"unknown classifier {self.classifier!r}")
        if self.protocol not in ("kfold", "loobj", "sweep"):
            raise UsageError(f"unknown protocol {self.protocol!r}")
        try:
            SensorKind.parse(self.sensor)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if self.repeats < 1 or self.workers < 1:
            raise UsageError("repeats and workers must be >= 1")
        if self.protocol == "sweep" and self.repeats > 1:
            raise UsageError("repeats are supported for kfold and loobj only")

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(kind=self.classifier, train=self.train, svm_lambda=self.svm_lambda,
                                svm_epochs=self.svm_epochs, svm_batch_size=self.svm_batch_size)

    def to_dict(self) -> dict:
        return {"corpus": self.corpus, "sensor": self.sensor, "classifier": self.classifier,
                "protocol": self.protocol, "k": self.k, "n_per_object": self.n_per_object,
                "n_objects": self.n_objects, "seed": self.seed, "repeats": self.repeats,
                "workers": self.workers, "out": self.out, "filter": asdict(self.filter),
                "train": asdict(self.train),
                "svm": {"lambda": self.svm_lambda, "epochs": self.svm_epochs,
                        "batch_size": self.svm_batch_size}}


_TOP_KEYS = {"corpus", "sensor", "classifier", "protocol", "k", "n_per_object", "n_objects",
             "seed", "repeats", "workers", "out", "filter", "train", "svm"}


def _parse_n_objects(value):
    """Accept an int, "all", a list, or a string like "1-9", "1,3,all"."""
    if value is None or isinstance(value, int):
        return value
    if isinstance(value, list):
        return [_parse_n_objects(v) for v in value]
    text = str(value).strip()
    if text == "all":
        return "all"
    if "," in text:
        return [_parse_n_objects(part) for part in text.split(",")]
    if "-" in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return int(text)


def config_from_json(path: str) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig()
    try:
        for key in ("corpus", "sensor", "classifier", "protocol", "out"):
            if key in doc:
                setattr(cfg, key, str(doc[key]))
        for key in ("k", "n_per_object", "seed", "repeats", "workers"):
            if key in doc:
                setattr(cfg, key, None if doc[key] is None else int(doc[key]))
        if "n_objects" in doc:
            cfg.n_objects = _parse_n_objects(doc["n_objects"])
        if "filter" in doc:
            cfg.filter = FilterSpec(**doc["filter"])
        if "train" in doc:
            cfg.train = TrainConfig(**doc["train"])
        svm = doc.get("svm", {})
        unknown = set(svm) - {"lambda", "epochs", "batch_size"}
        if unknown:
            raise UsageError(f"unknown svm keys: {sorted(unknown)}")
        cfg.svm_lambda = float(svm.get("lambda", cfg.svm_lambda))
        cfg.svm_epochs = int(svm.get("epochs", cfg.svm_epochs))
        cfg.svm_batch_size = int(svm.get("batch_size", cfg.svm_batch_size))
    except TypeError as exc:
        raise UsageError(f"bad config entry: {exc}") from None
    return cfg


def build_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = config_from_json(args.config) if args.config else RunConfig()
    for key in ("corpus", "sensor", "classifier", "protocol", "k", "n_per_object", "seed",
                "repeats", "workers", "out"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    if args.n_objects is not None:
        cfg.n_objects = _parse_n_objects(args.n_objects)
    filt = {k: v for k, v in (("order", args.filter_order), ("cutoff", args.cutoff))
            if v is not None}
    if filt:
        cfg.filter = replace(cfg.filter, **filt)
    train = {k: v for k, v in (("epochs", args.epochs), ("batch_size", args.batch_size),
                               ("learning_rate", args.learning_rate)) if v is not None}
    if train:
        cfg.train = replace(cfg.train, **train)
    for key in ("svm_lambda", "svm_epochs", "svm_batch_size"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    cfg.check()
    return cfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        corpus = load_corpus(args.corpus)
    except CorpusError as exc:
        print(f"INVALID: {exc}")
        return EXIT_DOMAIN
    report = corpus.validation
    print(report.format())
    return EXIT_OK if report.ok else EXIT_DOMAIN


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        objects_per_material=args.objects_per_material,
        samples_per_object=args.samples_per_object,
        sensors=tuple(args.sensors),
        class_scale=args.class_scale,
        object_scale=args.object_scale,
        noise_scale=args.noise_scale,
        template_seed=args.template_seed,
    )
    try:
        corpus = synth_corpus(cfg, args.seed)
    except ValueError as exc:
        print(f"synth failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus.objects)} objects, {len(corpus.samples)} samples to {args.out}")
    for sensor in corpus.sensors():
        arrays = corpus.arrays(sensor)
        acc = centroid_oracle_accuracy(preprocess_arrays(arrays), arrays.labels)
        print(f"centroid oracle accuracy ({sensor.tag}): {acc:.4f}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    try:
        corpus = load_corpus(args.corpus)
        spec = FilterSpec(args.filter_order, args.cutoff)
        design_butterworth(spec)
        sensors = [SensorKind.parse(args.sensor)] if args.sensor else corpus.sensors()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for sensor in sensors:
            arrays = corpus.arrays(sensor)
            X = preprocess_arrays(arrays, spec)
            path = out / f"features_{sensor.tag}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["object_id", "sensor", "sample_index",
                            *(f"f{i}" for i in range(X.shape[1]))])
                for obj, idx, row in zip(arrays.object_ids, arrays.sample_indices, X):
                    w.writerow([obj, sensor.tag, int(idx), *(f"{v:.9g}" for v in row)])
            print(f"wrote {path} ({X.shape[0]} x {X.shape[1]})")
    except (CorpusError, ValueError) as exc:
        print(f"preprocess failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (OSError, UsageError):
        raise
    except Exception as exc:  # any module error is reported with its stage
        raise StageError(name, exc) from exc


def _print_summary(report: EvalReport) -> None:
    print(f"{report.protocol} n={report.n} {report.sensor}/{report.classifier}: "
          f"overall accuracy {report.overall_accuracy:.4f}")
    for material, acc in report.material_accuracy().items():
        print(f"  {material:8s} {acc:.4f}")


def _write_repeats(out: Path, reports: list[EvalReport]) -> None:
    with open(out / "accuracy.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["protocol", "n", "fold", "accuracy"])
        for r_i, r in enumerate(reports):
            for f_i, a in enumerate(r.fold_accuracies):
                w.writerow([r.protocol, r.n, f"{r_i}.{f_i}", f"{a:.9g}"])


def cmd_run(args) -> int:
    cfg = build_run_config(args)
    if not Path(cfg.corpus).exists():
        raise FileNotFoundError(f"corpus not found: {cfg.corpus}")
    corpus = _stage("load", load_corpus, cfg.corpus)
    if not corpus.validation.ok:
        print(corpus.validation.format(), file=sys.stderr)
        raise StageError("validate", ValueError("corpus has violations"))
    _stage("filter design", design_butterworth, cfg.filter)
    clf = _stage("config", cfg.classifier_config)
    common = dict(filter_spec=cfg.filter, workers=cfg.workers)
    out = Path(cfg.out)
    if cfg.protocol == "sweep":
        n_range = cfg.n_objects if cfg.n_objects is not None else list(range(1, 10))
        n_range = n_range if isinstance(n_range, list) else [n_range]
        report = _stage("evaluate", run_object_count_sweep, corpus, cfg.sensor, clf, n_range,
                        seed=cfg.seed, **common)
        _stage("write", write_report, report, out, {"run_config": cfg.to_dict()})
        write_sweep_figure(report.points, out / "figures", f"{report.sensor}/{report.classifier}")
        for n, acc in report.points:
            print(f"n={n}: accuracy {acc:.4f}")
        print(f"spearman(n, accuracy) = {report.spearman:.4f}")
        return EXIT_OK

    reports = []
    for r in range(cfg.repeats):
        seed = cfg.seed + r
        if cfg.protocol == "kfold":
            rep = _stage("evaluate", run_kfold, corpus, cfg.sensor, clf, cfg.n_per_object,
                         seed=seed, k=cfg.k, **common)
        else:
            n = None if cfg.n_objects in (None, "all") else cfg.n_objects
            if isinstance(n, list):
                raise UsageError("loobj takes a single --n-objects value; use sweep for a range")
            rep = _stage("evaluate", run_leave_one_object_out, corpus, cfg.sensor, clf, n,
                         seed=seed, **common)
        reports.append(rep)
    extra = {"run_config": cfg.to_dict()}
    if len(reports) > 1:
        accs = np.array([r.overall_accuracy for r in reports])
        extra["repeats"] = {"seeds": [cfg.seed + i for i in range(len(reports))],
                            "overall_accuracies": accs.tolist(),
                            "mean": float(accs.mean()), "sd": float(accs.std(ddof=1))}
    _stage("write", write_report, reports[0], out, extra)
    if len(reports) > 1:
        _write_repeats(out, reports)
    write_confusion_figure(reports[0].material_confusion, out / "figures", "confusion_material",
                           f"{reports[0].sensor}/{reports[0].classifier} {reports[0].protocol}")
    _print_summary(reports[0])
    if len(reports) > 1:
        rep = extra["repeats"]
        print(f"over {len(reports)} seeds: {rep['mean']:.4f} +/- {rep['sd']:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    if args.kind == "spectrum":
        if not args.corpus or not args.objects:
            raise UsageError("spectrum figures need --corpus and --objects")
        corpus = _stage("load", load_corpus, args.corpus)
        try:
            summaries = summarize_spectra(corpus, args.sensor, args.objects)
        except KeyError as exc:
            raise StageError("summarize", ValueError(exc.args[0])) from exc
        except ValueError as exc:
            raise StageError("summarize", exc) from exc
        for s in summaries.values():
            for path in write_spectrum_figure(s, out):
                print(f"wrote {path}")
        return EXIT_OK
    if not args.report:
        raise UsageError(f"{args.kind} figures need --report")
    if not Path(args.report).exists():
        raise FileNotFoundError(f"report not found: {args.report}")
    try:
        report = load_report(args.report)
    except (KeyError, TypeError, ValueError) as exc:
        raise StageError("read report", ValueError(f"malformed report: {exc!r}")) from exc
    if args.kind == "sweep":
        if not isinstance(report, SweepReport):
            raise StageError("read report", ValueError("report is not a sweep"))
        paths = write_sweep_figure(report.points, out, f"{report.sensor}/{report.classifier}")
    else:
        reports = report.reports if isinstance(report, SweepReport) else [report]
        paths = []
        for r in reports:
            suffix = f"_n{r.n}" if isinstance(report, SweepReport) else ""
            title = f"{r.sensor}/{r.classifier} {r.protocol} n={r.n}"
            paths += write_confusion_figure(r.material_confusion, out,
                                            f"confusion_material{suffix}", title)
            paths += write_confusion_figure(r.object_confusion, out,
                                            f"confusion_object{suffix}", title)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specmat", description="Material recognition from spectra.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a corpus and print the validation report")
    v.add_argument("corpus", help="corpus directory or objects.csv")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("synth", help="write a synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--objects-per-material", type=int, default=10)
    s.add_argument("--samples-per-object", type=int, default=100)
    s.add_argument("--sensors", nargs="+", default=["visible", "nir"],
                   choices=["visible", "nir"])
    d = SynthConfig()
    s.add_argument("--class-scale", type=float, default=d.class_scale)
    s.add_argument("--object-scale", type=float, default=d.object_scale)
    s.add_argument("--noise-scale", type=float, default=d.noise_scale)
    s.add_argument("--template-seed", type=int, default=d.template_seed)
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("preprocess", help="write features_<sensor>.csv")
    f.add_argument("--corpus", required=True)
    f.add_argument("--sensor", choices=["visible", "nir"], help="default: every sensor present")
    f.add_argument("--out", required=True)
    f.add_argument("--filter-order", type=int, default=FilterSpec().order)
    f.add_argument("--cutoff", type=float, default=FilterSpec().cutoff)
    f.set_defaults(func=cmd_preprocess)

    r = sub.add_parser("run", help="run an evaluation protocol")
    r.add_argument("--config", help="JSON run config; flags override it")
    r.add_argument("--corpus")
    r.add_argument("--sensor", choices=["visible", "nir"])
    r.add_argument("--classifier", choices=["mlp", "svm"])
    r.add_argument("--protocol", choices=["kfold", "loobj", "sweep"])
    r.add_argument("--k", type=int)
    r.add_argument("--n-per-object", type=int, help="kfold: training samples kept per object")
    r.add_argument("--n-objects", help='training objects per material: N, "all", "1-9" or "1,5,all"')
    r.add_argument("--seed", type=int)
    r.add_argument("--repeats", type=int, help="run seeds seed..seed+R-1 and report mean and SD")
    r.add_argument("--workers", "--threads", dest="workers", type=int,
                   help="parallel fold processes")
    r.add_argument("--out")
    r.add_argument("--epochs", type=int)
    r.add_argument("--batch-size", type=int)
    r.add_argument("--learning-rate", type=float)
    r.add_argument("--svm-lambda", type=float)
    r.add_argument("--svm-epochs", type=int)
    r.add_argument("--svm-batch-size", type=int)
    r.add_argument("--filter-order", type=int)
    r.add_argument("--cutoff", type=float)
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("report", help="draw SVG figures and their CSVs")
    g.add_argument("--kind", required=True, choices=["spectrum", "confusion", "sweep"])
    g.add_argument("--report", help="report directory or report.json")
    g.add_argument("--corpus")
    g.add_argument("--sensor", choices=["visible", "nir"], default="nir")
    g.add_argument("--objects", nargs="+")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CorpusError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
