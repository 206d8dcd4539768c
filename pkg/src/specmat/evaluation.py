"""Cross-validation protocols, confusion matrices and evaluation reports.

Three protocols are supported:

* ``kfold``  stratified k-fold where every fold holds the same number of
  samples from every object, optionally thinning the training split to
  ``n_per_object`` samples per object;
* ``loobj``  leave-one-object-out, optionally training on only
  ``n_objects`` objects per material;
* ``sweep``  ``loobj`` repeated over a range of ``n_objects``.

Every fold gets its own seed derived from the master seed, so folds can run
in any order (or in parallel) and still produce the same report.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from specmat.core import Corpus, MaterialClass, SensorArrays, SensorKind, group_indices
from specmat.mlp import MlpArchitecture, TrainConfig, predict_labels, train
from specmat.preprocess import FilterSpec, normalize_unit, preprocess_arrays
from specmat.svm import predict_svm_labels, train_svm

logger = logging.getLogger(__name__)

MATERIALS = [m.label for m in MaterialClass]
_PROTOCOL_KEYS = {"kfold": 1, "loobj": 2, "subsample": 3, "objects": 4}


def derive_seed(master: int, *keys: int) -> int:
    """Counter-based child seed: same (master, keys) -> same seed, any call order."""
    return int(np.random.SeedSequence([int(master), *map(int, keys)]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# classifiers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "mlp"
    hidden: tuple[int, ...] = (64, 64, 32, 32)
    leaky_slope: float = 0.3
    dropout_rate: float = 0.25
    train: TrainConfig = TrainConfig()
    svm_lambda: float = 1e-4
    svm_epochs: int = 100
    svm_batch_size: int = 8

    def __post_init__(self):
        if self.kind not in ("mlp", "svm"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ClassifierConfig":
        doc = dict(doc)
        if "hidden" in doc:
            doc["hidden"] = tuple(doc["hidden"])
        if isinstance(doc.get("train"), dict):
            doc["train"] = TrainConfig(**doc["train"])
        return cls(**doc)


def fit_predict(clf: ClassifierConfig, X_train: np.ndarray, y_train: np.ndarray,
                X_test: np.ndarray, seed: int) -> np.ndarray:
    """Train a fresh classifier with ``seed`` and return its test predictions."""
    if clf.kind == "mlp":
        arch = MlpArchitecture(X_train.shape[1], clf.hidden, len(MaterialClass),
                               clf.leaky_slope, clf.dropout_rate)
        model = train(X_train, y_train, arch, replace(clf.train, seed=seed))
        return predict_labels(model, X_test)
    model = train_svm(X_train, y_train, clf.svm_lambda, clf.svm_epochs, seed, clf.svm_batch_size)
    return predict_svm_labels(model, X_test)


def _fold_task(args):
    clf, X_train, y_train, X_test, seed = args
    return fit_predict(clf, X_train, y_train, X_test, seed)


# ---------------------------------------------------------------------------
# fold plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Fold:
    train: np.ndarray  # row indices into the sensor arrays
    test: np.ndarray
    seed: int
    held_out: str | None = None


@dataclass(frozen=True, eq=False)
class FoldPlan:
    protocol: str
    sensor: SensorKind
    folds: tuple[Fold, ...]
    seed: int
    excluded: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __len__(self) -> int:
        return len(self.folds)

    def violations(self, arrays: SensorArrays) -> list[str]:
        """Check disjointness, coverage, stratification and object leakage."""
        out = []
        n = len(arrays)
        objects = arrays.object_ids
        covered = np.zeros(n, dtype=int)
        for i, f in enumerate(self.folds):
            if np.intersect1d(f.train, f.test).size:
                out.append(f"fold {i}: train and test overlap")
            covered[f.test] += 1
            if self.protocol == "loobj":
                leaked = set(objects[f.train]) & set(objects[f.test])
                if leaked:
                    out.append(f"fold {i}: objects {sorted(leaked)} in both train and test")
                if set(objects[f.test]) != {f.held_out}:
                    out.append(f"fold {i}: test set is not exactly object {f.held_out!r}")
        if self.protocol == "kfold":
            kept = np.setdiff1d(np.arange(n), self.excluded)
            if np.any(covered[kept] != 1) or np.any(covered[self.excluded] != 0):
                out.append("folds do not partition the retained samples")
            per_object = {o: set(map(int, np.bincount(
                [i for i, f in enumerate(self.folds) for r in f.test if objects[r] == o],
                minlength=len(self.folds)))) for o in np.unique(objects)}
            uneven = [o for o, c in per_object.items() if len(c) != 1]
            if uneven:
                out.append(f"objects not stratified evenly across folds: {uneven[:5]}")
        elif self.protocol == "loobj":
            if np.any(covered > 1):
                out.append("a sample is tested more than once")
        return out


def plan_stratified_kfold(corpus: Corpus, sensor: SensorKind | str, k: int = 5,
                          seed: int = 0) -> FoldPlan:
    """Split every object's samples evenly over ``k`` folds.

    Objects whose sample count is not a multiple of ``k`` lose the surplus
    (chosen at random) with a warning.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    sensor = SensorKind.parse(sensor)
    arrays = corpus.arrays(sensor)
    if len(arrays) == 0:
        raise ValueError(f"corpus has no {sensor} samples")
    rng = np.random.default_rng(derive_seed(seed, _PROTOCOL_KEYS["kfold"]))
    chunks: list[list[np.ndarray]] = [[] for _ in range(k)]
    excluded = []
    for obj, rows in sorted(group_indices(arrays.object_ids).items()):
        if len(rows) < k:
            raise ValueError(f"object {obj!r} has {len(rows)} samples, fewer than k={k}")
        rows = rng.permutation(rows)
        per_fold, surplus = divmod(len(rows), k)
        if surplus:
            logger.warning("object %s: %d samples not divisible by k=%d; dropping %d",
                           obj, len(rows), k, surplus)
            excluded.extend(rows[per_fold * k:])
        for f in range(k):
            chunks[f].append(rows[f * per_fold:(f + 1) * per_fold])
    tests = [np.sort(np.concatenate(c)) for c in chunks]
    kept = np.sort(np.concatenate(tests))
    folds = tuple(Fold(np.setdiff1d(kept, test), test,
                       derive_seed(seed, _PROTOCOL_KEYS["kfold"], f)) for f, test in enumerate(tests))
    return FoldPlan("kfold", sensor, folds, seed, np.sort(np.array(excluded, dtype=int)))


def _object_materials(corpus: Corpus, arrays: SensorArrays) -> dict[str, int]:
    return {o: int(corpus.object(o).material) for o in np.unique(arrays.object_ids)}


def plan_leave_one_object_out(corpus: Corpus, sensor: SensorKind | str,
                              n_objects_per_material: int | None = None,
                              seed: int = 0) -> FoldPlan:
    """One fold per object; train on the others (or ``n`` of them per material)."""
    sensor = SensorKind.parse(sensor)
    arrays = corpus.arrays(sensor)
    if len(arrays) == 0:
        raise ValueError(f"corpus has no {sensor} samples")
    rows_of = group_indices(arrays.object_ids)
    material_of = _object_materials(corpus, arrays)
    by_material: dict[int, list[str]] = {int(m): [] for m in MaterialClass}
    for obj in sorted(material_of):
        by_material[material_of[obj]].append(obj)
    present = {m: objs for m, objs in by_material.items() if objs}
    n = n_objects_per_material
    if n is None:
        thin = [MaterialClass(m).label for m, objs in present.items() if len(objs) < 2]
        if thin:
            raise ValueError(f"materials with fewer than 2 objects: {thin}")
    elif n < 1:
        raise ValueError("n_objects_per_material must be >= 1")

    folds = []
    for i, held in enumerate(sorted(material_of)):
        # the training seed ignores n, so n = (objects - 1) reproduces n = all
        fold_seed = derive_seed(seed, _PROTOCOL_KEYS["loobj"], i)
        if n is None:
            train_objs = [o for o in sorted(material_of) if o != held]
        else:
            rng = np.random.default_rng(derive_seed(seed, _PROTOCOL_KEYS["objects"], i, n))
            train_objs = []
            for m, objs in present.items():
                pool = [o for o in objs if o != held]
                if len(pool) < n:
                    raise ValueError(f"{MaterialClass(m).label}: only {len(pool)} training "
                                     f"objects available when holding out {held!r}, need {n}")
                train_objs += sorted(rng.choice(pool, size=n, replace=False).tolist())
        train_rows = np.sort(np.concatenate([rows_of[o] for o in train_objs]))
        folds.append(Fold(train_rows, rows_of[held], fold_seed, held))
    return FoldPlan("loobj", sensor, tuple(folds), seed)


def subsample_per_object(train_ids: np.ndarray, object_ids: np.ndarray, n_per_object: int,
                         seed: int) -> np.ndarray:
    """Keep exactly ``n_per_object`` random rows of every object in ``train_ids``.

    ``object_ids`` maps every row index of the sensor arrays to its object.
    """
    if n_per_object < 1:
        raise ValueError("n_per_object must be >= 1")
    train_ids = np.asarray(train_ids, dtype=int)
    rng = np.random.default_rng(seed)
    keep = []
    for obj, pos in sorted(group_indices(np.asarray(object_ids)[train_ids]).items()):
        if len(pos) < n_per_object:
            raise ValueError(f"object {obj!r} has {len(pos)} training samples, "
                             f"fewer than {n_per_object}")
        keep.append(train_ids[rng.choice(pos, size=n_per_object, replace=False)])
    return np.sort(np.concatenate(keep)) if keep else train_ids[:0]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class ConfusionMatrix:
    """Counts of predicted material (columns) per row label (material or object)."""

    row_labels: list[str]
    row_truth: list[int]
    counts: np.ndarray  # (rows, 5) int

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def row_accuracy(self) -> np.ndarray:
        correct = self.counts[np.arange(len(self.row_truth)), self.row_truth]
        totals = self.row_totals
        return np.divide(correct, totals, out=np.zeros(len(totals)), where=totals > 0)

    def correct(self) -> int:
        return int(self.counts[np.arange(len(self.row_truth)), self.row_truth].sum())

    def to_dict(self) -> dict:
        return {"row_labels": list(self.row_labels), "row_truth": [int(t) for t in self.row_truth],
                "columns": MATERIALS, "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "ConfusionMatrix":
        counts = np.array(doc["counts"], dtype=int).reshape(len(doc["row_labels"]), len(MATERIALS))
        return cls(list(doc["row_labels"]), [int(t) for t in doc["row_truth"]], counts)


@dataclass
class EvalReport:
    protocol: str
    sensor: str
    classifier: str
    n: int | str | None
    fold_accuracies: list[float]
    fold_sizes: list[int]
    overall_accuracy: float
    material_confusion: ConfusionMatrix
    object_confusion: ConfusionMatrix
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def mean_fold_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies)) if self.fold_accuracies else 0.0

    def material_accuracy(self) -> dict[str, float]:
        return dict(zip(MATERIALS, map(float, self.material_confusion.row_accuracy())))

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "sensor": self.sensor,
            "classifier": self.classifier,
            "n": self.n,
            "overall_accuracy": self.overall_accuracy,
            "mean_fold_accuracy": self.mean_fold_accuracy,
            "fold_accuracies": list(self.fold_accuracies),
            "fold_sizes": list(self.fold_sizes),
            "material_accuracy": self.material_accuracy(),
            "confusion_material": self.material_confusion.to_dict(),
            "confusion_object": self.object_confusion.to_dict(),
            "config": self.config,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(doc["protocol"], doc["sensor"], doc["classifier"], doc.get("n"),
                   [float(a) for a in doc["fold_accuracies"]], [int(s) for s in doc["fold_sizes"]],
                   float(doc["overall_accuracy"]),
                   ConfusionMatrix.from_dict(doc["confusion_material"]),
                   ConfusionMatrix.from_dict(doc["confusion_object"]),
                   doc.get("config", {}), doc.get("metadata", {}))


def _metadata(started: float) -> dict:
    return {"created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "wall_clock_s": round(time.perf_counter() - started, 3)}


def _features(corpus: Corpus, sensor: SensorKind, spec: FilterSpec) -> np.ndarray:
    key = ("features", sensor, spec)
    if key not in corpus._cache:
        X = preprocess_arrays(corpus.arrays(sensor), spec)
        X.setflags(write=False)
        corpus._cache[key] = X
    return corpus._cache[key]


def _execute(plan: FoldPlan, X: np.ndarray, y: np.ndarray, clf: ClassifierConfig,
             train_rows: list[np.ndarray], workers: int) -> list[np.ndarray]:
    tasks = [(clf, X[tr], y[tr], X[f.test], f.seed) for f, tr in zip(plan.folds, train_rows)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_fold_task, tasks))
    return [_fold_task(t) for t in tasks]


def _report(protocol: str, corpus: Corpus, arrays: SensorArrays, plan: FoldPlan,
            predictions: list[np.ndarray], clf: ClassifierConfig, n, config: dict,
            started: float) -> EvalReport:
    y = arrays.labels
    material_of = _object_materials(corpus, arrays)
    objects = sorted(material_of)
    obj_row = {o: i for i, o in enumerate(objects)}
    mat = np.zeros((len(MATERIALS), len(MATERIALS)), dtype=int)
    obj = np.zeros((len(objects), len(MATERIALS)), dtype=int)
    accs, sizes = [], []
    for fold, pred in zip(plan.folds, predictions):
        truth = y[fold.test]
        np.add.at(mat, (truth, pred), 1)
        np.add.at(obj, ([obj_row[o] for o in arrays.object_ids[fold.test]], pred), 1)
        accs.append(float(np.mean(pred == truth)))
        sizes.append(len(fold.test))
    total = sum(sizes)
    correct = int(np.trace(mat))
    return EvalReport(
        protocol, arrays.sensor.tag, clf.kind, n, accs, sizes,
        correct / total if total else 0.0,
        ConfusionMatrix(list(MATERIALS), list(range(len(MATERIALS))), mat),
        ConfusionMatrix(objects, [material_of[o] for o in objects], obj),
        config, _metadata(started))


def _config_echo(clf: ClassifierConfig, spec: FilterSpec, seed: int, **extra) -> dict:
    return {"classifier": clf.to_dict(), "filter": asdict(spec), "seed": seed, **extra}


def run_kfold(corpus: Corpus, sensor: SensorKind | str, clf: ClassifierConfig = ClassifierConfig(),
              n_per_object: int | None = None, seed: int = 0, k: int = 5,
              filter_spec: FilterSpec = FilterSpec(), workers: int = 1) -> EvalReport:
    """Stratified k-fold; with ``n_per_object`` the training split is thinned per object
    while every fold is still tested in full."""
    started = time.perf_counter()
    sensor = SensorKind.parse(sensor)
    plan = plan_stratified_kfold(corpus, sensor, k, seed)
    arrays = corpus.arrays(sensor)
    X = _features(corpus, sensor, filter_spec)
    train_rows = []
    for f in plan.folds:
        if n_per_object is None:
            train_rows.append(f.train)
        else:
            train_rows.append(subsample_per_object(
                f.train, arrays.object_ids, n_per_object,
                derive_seed(f.seed, _PROTOCOL_KEYS["subsample"])))
    preds = _execute(plan, X, arrays.labels, clf, train_rows, workers)
    config = _config_echo(clf, filter_spec, seed, k=k, n_per_object=n_per_object)
    return _report("kfold", corpus, arrays, plan, preds, clf,
                   n_per_object if n_per_object is not None else "all", config, started)


def run_leave_one_object_out(corpus: Corpus, sensor: SensorKind | str,
                             clf: ClassifierConfig = ClassifierConfig(),
                             n_objects_per_material: int | None = None, seed: int = 0,
                             filter_spec: FilterSpec = FilterSpec(),
                             workers: int = 1) -> EvalReport:
    """Hold out each object in turn; report sample-level accuracy pooled over objects.

    ``n_objects_per_material=None`` trains on every other object.
    """
    started = time.perf_counter()
    sensor = SensorKind.parse(sensor)
    plan = plan_leave_one_object_out(corpus, sensor, n_objects_per_material, seed)
    arrays = corpus.arrays(sensor)
    X = _features(corpus, sensor, filter_spec)
    preds = _execute(plan, X, arrays.labels, clf, [f.train for f in plan.folds], workers)
    n = n_objects_per_material if n_objects_per_material is not None else "all"
    config = _config_echo(clf, filter_spec, seed, n_objects_per_material=n)
    return _report("loobj", corpus, arrays, plan, preds, clf, n, config, started)


@dataclass
class SweepReport:
    sensor: str
    classifier: str
    points: list[tuple[int | str, float]]
    spearman: float
    reports: list[EvalReport]
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "protocol": "sweep",
            "sensor": self.sensor,
            "classifier": self.classifier,
            "points": [{"n": n, "accuracy": a} for n, a in self.points],
            "spearman": self.spearman,
            # one metadata block per file, so nested reports drop theirs
            "reports": [deterministic_view(r.to_dict()) for r in self.reports],
            "config": self.config,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepReport":
        return cls(doc["sensor"], doc["classifier"],
                   [(p["n"], float(p["accuracy"])) for p in doc["points"]],
                   float(doc["spearman"]) if doc["spearman"] is not None else float("nan"),
                   [EvalReport.from_dict(r) for r in doc["reports"]],
                   doc.get("config", {}), doc.get("metadata", {}))


def trend_statistic(points: Sequence[tuple[int | str, float]]) -> float:
    """Spearman rank correlation of (n, accuracy) over the numeric n values."""
    numeric = [(n, a) for n, a in points if not isinstance(n, str)]
    if len(numeric) < 2:
        return float("nan")
    ns, accs = zip(*numeric)
    if len(set(accs)) == 1:
        return float("nan")
    return float(stats.spearmanr(ns, accs).statistic)


def run_object_count_sweep(corpus: Corpus, sensor: SensorKind | str,
                           clf: ClassifierConfig = ClassifierConfig(),
                           n_range: Sequence[int | str] = range(1, 10), seed: int = 0,
                           filter_spec: FilterSpec = FilterSpec(),
                           workers: int = 1) -> SweepReport:
    """Leave-one-object-out for each training-object count in ``n_range``.

    The entry ``"all"`` trains on every other object and matches
    :func:`run_leave_one_object_out` with the same seed.
    """
    started = time.perf_counter()
    sensor = SensorKind.parse(sensor)
    reports = []
    for n in n_range:
        n_objects = None if n == "all" else int(n)
        reports.append(run_leave_one_object_out(corpus, sensor, clf, n_objects, seed,
                                                filter_spec, workers))
    points = [(r.n, r.mean_fold_accuracy) for r in reports]
    config = _config_echo(clf, filter_spec, seed, n_range=[r.n for r in reports])
    return SweepReport(sensor.tag, clf.kind, points, trend_statistic(points), reports,
                       config, _metadata(started))


def run_repeated(runner, seeds: Sequence[int], *args, **kwargs) -> tuple[list[EvalReport], float, float]:
    """Run a protocol once per seed; returns the reports and the accuracy mean and SD."""
    reports = [runner(*args, seed=s, **kwargs) for s in seeds]
    accs = np.array([r.overall_accuracy for r in reports])
    sd = float(accs.std(ddof=1)) if len(accs) > 1 else 0.0
    return reports, float(accs.mean()), sd


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------

def _strip_metadata(doc: dict) -> dict:
    doc = {k: v for k, v in doc.items() if k != "metadata"}
    if "reports" in doc:
        doc["reports"] = [_strip_metadata(r) for r in doc["reports"]]
    return doc


def deterministic_view(doc: dict) -> dict:
    """Report dict without the timestamp/wall-clock metadata blocks."""
    return _strip_metadata(doc)


def write_report(report: EvalReport | SweepReport, out_dir: str | Path,
                 extra: dict | None = None) -> Path:
    """Write report.json, accuracy.csv, confusion_material.csv and confusion_object.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    reports = report.reports if isinstance(report, SweepReport) else [report]
    protocol = "sweep" if isinstance(report, SweepReport) else report.protocol

    with open(out / "accuracy.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["protocol", "n", "fold", "accuracy"])
        for r in reports:
            for i, a in enumerate(r.fold_accuracies):
                w.writerow([protocol, r.n, i, f"{a:.9g}"])
    with open(out / "confusion_material.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "true_material", *MATERIALS, "accuracy"])
        for r in reports:
            cm = r.material_confusion
            for label, row, acc in zip(cm.row_labels, cm.counts, cm.row_accuracy()):
                w.writerow([r.n, label, *map(int, row), f"{acc:.9g}"])
    with open(out / "confusion_object.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "object_id", "material", *MATERIALS, "accuracy"])
        for r in reports:
            cm = r.object_confusion
            for label, truth, row, acc in zip(cm.row_labels, cm.row_truth, cm.counts,
                                              cm.row_accuracy()):
                w.writerow([r.n, label, MATERIALS[truth], *map(int, row), f"{acc:.9g}"])
    return out


def load_report(path: str | Path) -> EvalReport | SweepReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("protocol") == "sweep":
        return SweepReport.from_dict(doc)
    return EvalReport.from_dict(doc)


# ---------------------------------------------------------------------------
# spectrum statistics and the centroid oracle
# ---------------------------------------------------------------------------

@dataclass
class SpectrumSummary:
    object_id: str
    wavelengths: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    n_samples: int

    @property
    def mean_sd(self) -> float:
        return float(self.sd.mean())


def summarize_spectra(corpus: Corpus, sensor: SensorKind | str,
                      object_ids: Sequence[str]) -> dict[str, SpectrumSummary]:
    """Per-wavelength mean and SD of each object's [0, 1]-normalized raw samples."""
    arrays = corpus.arrays(SensorKind.parse(sensor))
    rows_of = group_indices(arrays.object_ids)
    out = {}
    for obj in object_ids:
        corpus.object(obj)
        rows = rows_of.get(obj)
        if rows is None or len(rows) < 2:
            raise ValueError(f"object {obj!r} needs at least 2 {sensor} samples")
        normed = normalize_unit(arrays.intensities[rows])
        out[obj] = SpectrumSummary(obj, np.array(arrays.wavelengths[rows[0]]),
                                   normed.mean(axis=0), normed.std(axis=0), len(rows))
    return out


def centroid_oracle_accuracy(X: np.ndarray, y: np.ndarray) -> float:
    """Leave-one-out nearest-class-centroid accuracy (squared Euclidean distance)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    if len(classes) < 2:
        return 1.0
    centroids = np.stack([X[y == c].mean(axis=0) for c in classes])
    counts = np.array([(y == c).sum() for c in classes])
    pos = np.searchsorted(classes, y)
    d = (np.sum(X ** 2, axis=1)[:, None] - 2 * X @ centroids.T
         + np.sum(centroids ** 2, axis=1)[None, :])
    own_n = counts[pos]
    single = own_n == 1
    own = np.where(single[:, None], centroids[pos],
                   (own_n[:, None] * centroids[pos] - X) / np.maximum(own_n - 1, 1)[:, None])
    d[np.arange(len(y)), pos] = np.where(single, np.inf, np.sum((X - own) ** 2, axis=1))
    return float(np.mean(classes[np.argmin(d, axis=1)] == y))
