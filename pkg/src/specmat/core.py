"""Domain types, corpus ingestion/validation and a synthetic corpus generator.

On-disk layout of a corpus directory::

    objects.csv              object_id,display_name,material
    samples.csv              object_id,sensor,sample_index,v0,...,v{D-1}
    wavelengths_<sensor>.csv one row of D wavelengths in nm (optional)

Visible and NIR rows may share ``samples.csv``; each row carries exactly
as many values as its sensor's dimension, and the header spans the widest
sensor present.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FULL_OBJECTS_PER_MATERIAL = 10
FULL_SAMPLES_PER_OBJECT = 100
WAVELENGTH_TOLERANCE_NM = 2.0


class CorpusError(ValueError):
    """Raised when a corpus on disk cannot be ingested."""


class MaterialClass(enum.IntEnum):
    METAL = 0
    PLASTIC = 1
    WOOD = 2
    PAPER = 3
    FABRIC = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: str) -> "MaterialClass":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown material {name!r}") from None


class SensorKind(enum.Enum):
    """Spectrometer family with its fixed dimension and wavelength range (nm)."""

    VISIBLE = ("visible", 288, 317.0, 856.0)
    NIR = ("nir", 331, 740.0, 1070.0)

    def __init__(self, tag: str, expected_dim: int, lo: float, hi: float):
        self.tag = tag
        self.expected_dim = expected_dim
        self.wavelength_range = (lo, hi)

    @classmethod
    def parse(cls, tag: "str | SensorKind") -> "SensorKind":
        if isinstance(tag, SensorKind):
            return tag
        for kind in cls:
            if kind.tag == tag.strip().lower():
                return kind
        raise ValueError(f"unknown sensor {tag!r}")

    def default_grid(self) -> np.ndarray:
        lo, hi = self.wavelength_range
        if self is SensorKind.NIR:
            return np.arange(int(lo), int(hi) + 1, dtype=float)
        return np.linspace(lo, hi, self.expected_dim)

    def __str__(self) -> str:
        return self.tag


def _frozen(a: Iterable[float]) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpectralSample:
    object_id: str
    sensor: SensorKind
    sample_index: int
    wavelengths: np.ndarray
    intensities: np.ndarray

    def problems(self) -> list[str]:
        """Return the invariant violations of this sample (empty when valid)."""
        out = []
        dim = self.sensor.expected_dim
        where = f"{self.object_id}/{self.sensor}/{self.sample_index}"
        if self.sample_index < 0:
            out.append(f"{where}: negative sample_index")
        if len(self.intensities) != dim:
            out.append(f"{where}: {len(self.intensities)} intensities, expected {dim}")
        if len(self.wavelengths) != len(self.intensities):
            out.append(f"{where}: {len(self.wavelengths)} wavelengths vs "
                       f"{len(self.intensities)} intensities")
        if not np.all(np.isfinite(self.intensities)):
            out.append(f"{where}: non-finite intensities")
        elif np.any(self.intensities < 0):
            out.append(f"{where}: negative intensities")
        w = self.wavelengths
        if len(w) >= 2 and not np.all(np.diff(w) > 0):
            out.append(f"{where}: wavelengths not strictly increasing")
        if len(w):
            lo, hi = self.sensor.wavelength_range
            if abs(w[0] - lo) > WAVELENGTH_TOLERANCE_NM or abs(w[-1] - hi) > WAVELENGTH_TOLERANCE_NM:
                out.append(f"{where}: wavelength grid {w[0]:g}..{w[-1]:g} nm outside "
                           f"{lo:g}..{hi:g} nm")
        return out


@dataclass(frozen=True)
class ObjectRecord:
    object_id: str
    display_name: str
    material: MaterialClass


@dataclass(frozen=True)
class SensorArrays:
    """Stacked view of every sample from one sensor, in corpus order."""

    sensor: SensorKind
    intensities: np.ndarray  # (N, D)
    wavelengths: np.ndarray  # (N, D)
    object_ids: np.ndarray  # (N,) str
    sample_indices: np.ndarray  # (N,) int
    labels: np.ndarray  # (N,) int material codes

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class ValidationReport:
    counts: dict[tuple[str, str], int]
    objects_per_material: dict[str, int]
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def balanced(self) -> bool:
        return len(set(self.objects_per_material.values())) <= 1

    def sensor_totals(self) -> dict[str, int]:
        tot: Counter[str] = Counter()
        for (_, sensor), n in self.counts.items():
            tot[sensor] += n
        return dict(tot)

    def format(self) -> str:
        lines = [f"objects: {sum(self.objects_per_material.values())}"]
        lines.append("objects per material: " + ", ".join(
            f"{m}={n}" for m, n in self.objects_per_material.items()))
        for sensor, n in self.sensor_totals().items():
            per_obj = sorted({c for (_, s), c in self.counts.items() if s == sensor})
            lines.append(f"{sensor}: {n} samples, per object {per_obj}")
        lines += [f"WARNING {w}" for w in self.warnings]
        lines += [f"VIOLATION {v}" for v in self.violations]
        lines.append("status: " + ("ok" if self.ok else f"{len(self.violations)} violation(s)"))
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class Corpus:
    objects: tuple[ObjectRecord, ...]
    samples: tuple[SpectralSample, ...]
    provenance: str = ""
    validation: ValidationReport | None = field(default=None, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def object(self, object_id: str) -> ObjectRecord:
        index = self._cache.get("objects")
        if index is None:
            index = self._cache["objects"] = {o.object_id: o for o in self.objects}
        try:
            return index[object_id]
        except KeyError:
            raise KeyError(f"unknown object id {object_id!r}") from None

    def sensors(self) -> list[SensorKind]:
        present = {s.sensor for s in self.samples}
        return [k for k in SensorKind if k in present]

    def arrays(self, sensor: SensorKind | str) -> SensorArrays:
        sensor = SensorKind.parse(sensor)
        key = ("arrays", sensor)
        if key not in self._cache:
            rows = [s for s in self.samples if s.sensor is sensor]
            dim = sensor.expected_dim
            X = np.array([s.intensities for s in rows], dtype=float).reshape(len(rows), dim)
            W = np.array([s.wavelengths for s in rows], dtype=float).reshape(len(rows), dim)
            ids = np.array([s.object_id for s in rows], dtype=object)
            idx = np.array([s.sample_index for s in rows], dtype=int)
            labels = np.array([int(self.object(s.object_id).material) for s in rows], dtype=int)
            for a in (X, W, ids, idx, labels):
                a.setflags(write=False)
            self._cache[key] = SensorArrays(sensor, X, W, ids, idx, labels)
        return self._cache[key]


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check every invariant of ``corpus`` and report counts; never raises."""
    violations: list[str] = []
    warnings: list[str] = []

    ids = Counter(o.object_id for o in corpus.objects)
    for oid, n in ids.items():
        if n > 1:
            violations.append(f"object id {oid!r} declared {n} times")
    known = set(ids)

    per_material = {m.label: 0 for m in MaterialClass}
    for o in corpus.objects:
        per_material[MaterialClass(o.material).label] += 1

    counts: dict[tuple[str, str], int] = {}
    for o in corpus.objects:
        for sensor in corpus.sensors():
            counts[(o.object_id, sensor.tag)] = 0
    seen: set[tuple[str, str, int]] = set()
    for s in corpus.samples:
        violations.extend(s.problems())
        if s.object_id not in known:
            violations.append(f"sample {s.object_id}/{s.sensor}/{s.sample_index}: "
                              "object id not declared")
            continue
        key = (s.object_id, s.sensor.tag, s.sample_index)
        if key in seen:
            violations.append(f"duplicate sample {'/'.join(map(str, key))}")
        seen.add(key)
        counts[(s.object_id, s.sensor.tag)] += 1

    if not corpus.samples:
        warnings.append("corpus has no samples")
    if len(set(per_material.values())) > 1:
        warnings.append("unbalanced materials: " + ", ".join(
            f"{m}={n}" for m, n in per_material.items()))
    for m, n in per_material.items():
        if n != FULL_OBJECTS_PER_MATERIAL:
            warnings.append(f"{m}: {n} objects (full corpus has {FULL_OBJECTS_PER_MATERIAL})")
    off = sorted(k for k, n in counts.items() if n != FULL_SAMPLES_PER_OBJECT)
    if off and corpus.samples:
        shown = ", ".join(f"{o}/{s}={counts[(o, s)]}" for o, s in off[:5])
        more = f" (+{len(off) - 5} more)" if len(off) > 5 else ""
        warnings.append(f"{len(off)} object/sensor pairs without "
                        f"{FULL_SAMPLES_PER_OBJECT} samples: {shown}{more}")
    return ValidationReport(counts, per_material, violations, warnings)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _parse_floats(cells: Sequence[str], path: Path, lineno: int) -> np.ndarray:
    try:
        values = np.array([float(c) for c in cells], dtype=float)
    except ValueError as exc:
        raise CorpusError(f"{path.name}:{lineno}: {exc}") from None
    if not np.all(np.isfinite(values)):
        raise CorpusError(f"{path.name}:{lineno}: non-finite value")
    return values


def _load_grid(root: Path, sensor: SensorKind) -> np.ndarray:
    path = root / f"wavelengths_{sensor.tag}.csv"
    if not path.exists():
        return _frozen(sensor.default_grid())
    rows = [r for r in _read_rows(path) if r]
    if len(rows) != 1:
        raise CorpusError(f"{path.name}: expected one row, found {len(rows)}")
    grid = _parse_floats(rows[0], path, 1)
    if len(grid) != sensor.expected_dim:
        raise CorpusError(f"{path.name}:1: {len(grid)} wavelengths, expected {sensor.expected_dim}")
    if not np.all(np.diff(grid) > 0):
        raise CorpusError(f"{path.name}:1: wavelengths not strictly increasing")
    return _frozen(grid)


def load_corpus(manifest_path: str | Path) -> Corpus:
    """Load and validate a corpus from a directory (or its ``objects.csv``).

    Hard errors raise :class:`CorpusError`; deviations from the full
    50-object shape are only recorded as warnings in ``corpus.validation``.
    """
    root = Path(manifest_path)
    if root.is_file():
        root = root.parent
    objects_path, samples_path = root / "objects.csv", root / "samples.csv"
    for p in (objects_path, samples_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing corpus file {p}")

    rows = _read_rows(objects_path)
    if not rows or [c.strip() for c in rows[0]] != ["object_id", "display_name", "material"]:
        raise CorpusError(f"{objects_path.name}:1: bad header")
    objects: list[ObjectRecord] = []
    seen_ids: set[str] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise CorpusError(f"{objects_path.name}:{lineno}: expected 3 fields, got {len(row)}")
        oid, name, material = row
        try:
            mat = MaterialClass.parse(material)
        except ValueError as exc:
            raise CorpusError(f"{objects_path.name}:{lineno}: {exc}") from None
        if oid in seen_ids:
            raise CorpusError(f"{objects_path.name}:{lineno}: duplicate object id {oid!r}")
        seen_ids.add(oid)
        objects.append(ObjectRecord(oid, name, mat))

    rows = _read_rows(samples_path)
    if not rows or [c.strip() for c in rows[0][:3]] != ["object_id", "sensor", "sample_index"]:
        raise CorpusError(f"{samples_path.name}:1: bad header")
    grids: dict[SensorKind, np.ndarray] = {}
    samples: list[SpectralSample] = []
    keys: set[tuple[str, str, int]] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) < 4:
            raise CorpusError(f"{samples_path.name}:{lineno}: too few fields")
        oid, sensor_tag, idx = row[:3]
        try:
            sensor = SensorKind.parse(sensor_tag)
            sample_index = int(idx)
        except ValueError as exc:
            raise CorpusError(f"{samples_path.name}:{lineno}: {exc}") from None
        if oid not in seen_ids:
            raise CorpusError(f"{samples_path.name}:{lineno}: unknown object id {oid!r}")
        values = _parse_floats(row[3:], samples_path, lineno)
        if len(values) != sensor.expected_dim:
            raise CorpusError(f"{samples_path.name}:{lineno}: {len(values)} values for "
                              f"{sensor} sample, expected {sensor.expected_dim}")
        key = (oid, sensor.tag, sample_index)
        if key in keys:
            raise CorpusError(f"{samples_path.name}:{lineno}: duplicate sample {key}")
        keys.add(key)
        if sensor not in grids:
            grids[sensor] = _load_grid(root, sensor)
        sample = SpectralSample(oid, sensor, sample_index, grids[sensor], _frozen(values))
        problems = sample.problems()
        if problems:
            raise CorpusError(f"{samples_path.name}:{lineno}: {problems[0]}")
        samples.append(sample)

    corpus = Corpus(tuple(objects), tuple(samples), provenance=str(root))
    report = validate_corpus(corpus)
    for w in report.warnings:
        logger.info("%s: %s", root, w)
    return Corpus(corpus.objects, corpus.samples, corpus.provenance, report)


def canonical_order(corpus: Corpus) -> tuple[list[ObjectRecord], list[SpectralSample]]:
    sensor_rank = {k: i for i, k in enumerate(SensorKind)}
    objects = sorted(corpus.objects, key=lambda o: o.object_id)
    samples = sorted(corpus.samples,
                     key=lambda s: (sensor_rank[s.sensor], s.object_id, s.sample_index))
    return objects, samples


def write_corpus(corpus: Corpus, directory: str | Path) -> Path:
    """Write ``corpus`` in canonical order and number format; returns the directory."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    objects, samples = canonical_order(corpus)

    with open(root / "objects.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["object_id", "display_name", "material"])
        for o in objects:
            w.writerow([o.object_id, o.display_name, MaterialClass(o.material).label])

    width = max((s.sensor.expected_dim for s in samples), default=SensorKind.NIR.expected_dim)
    grids: dict[SensorKind, np.ndarray] = {}
    with open(root / "samples.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["object_id", "sensor", "sample_index"] + [f"v{i}" for i in range(width)])
        for s in samples:
            grid = grids.setdefault(s.sensor, np.asarray(s.wavelengths))
            if not np.array_equal(grid, s.wavelengths):
                raise CorpusError(f"{s.sensor} samples use differing wavelength grids; "
                                  "the CSV layout stores one grid per sensor")
            w.writerow([s.object_id, s.sensor.tag, s.sample_index]
                       + [_fmt(v) for v in s.intensities])

    for sensor, grid in grids.items():
        with open(root / f"wavelengths_{sensor.tag}.csv", "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerow([_fmt(v) for v in grid])
    return root


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

BUMP_CENTERS = (0.25, 0.5, 0.75)
BUMP_WIDTH = 0.08
PERTURBATION_HARMONICS = 4
BASELINE = 2.0


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the synthetic generator.

    ``class_scale`` sets the size of the per-material Gaussian bumps,
    ``object_scale`` the smooth per-object perturbation and ``noise_scale``
    the i.i.d. per-sample noise. Material templates come from
    ``template_seed`` so the class shapes stay fixed across sample seeds.
    """

    objects_per_material: int = FULL_OBJECTS_PER_MATERIAL
    samples_per_object: int = FULL_SAMPLES_PER_OBJECT
    sensors: tuple[str, ...] = ("visible", "nir")
    class_scale: float = 1.0
    object_scale: float = 0.15
    noise_scale: float = 0.002
    gain_range: tuple[float, float] = (0.9, 1.1)
    template_seed: int = 0

    def check(self) -> None:
        if self.objects_per_material <= 0 or self.samples_per_object <= 0:
            raise ValueError("object and sample counts must be positive")
        if min(self.class_scale, self.object_scale, self.noise_scale) < 0:
            raise ValueError("scales must be non-negative")
        lo, hi = self.gain_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad gain range {self.gain_range}")
        if not self.sensors:
            raise ValueError("at least one sensor required")
        for s in self.sensors:
            SensorKind.parse(s)


def class_templates(sensor: SensorKind, config: SynthConfig) -> np.ndarray:
    """Noise-free base curve of each material on the sensor's default grid, (5, D)."""
    u = np.linspace(0.0, 1.0, sensor.expected_dim)
    bumps = np.stack([np.exp(-0.5 * ((u - c) / BUMP_WIDTH) ** 2) for c in BUMP_CENTERS])
    rng = np.random.default_rng([config.template_seed, list(SensorKind).index(sensor)])
    amplitudes = rng.uniform(-1.0, 1.0, size=(len(MaterialClass), len(BUMP_CENTERS)))
    return BASELINE + config.class_scale * amplitudes @ bumps


def synth_corpus(config: SynthConfig = SynthConfig(), seed: int = 0) -> Corpus:
    """Generate a labeled corpus shaped like the real one.

    Deterministic in ``(config, seed)``. Per sample the intensity is
    ``gain * (template[material] + object_perturbation) + noise``,
    clipped at zero.
    """
    config.check()
    rng = np.random.default_rng(seed)
    objects = []
    for m in MaterialClass:
        for j in range(config.objects_per_material):
            objects.append(ObjectRecord(f"{m.label}_{j:02d}", f"synthetic {m.label} {j}", m))

    samples: list[SpectralSample] = []
    for tag in config.sensors:
        sensor = SensorKind.parse(tag)
        grid = _frozen(sensor.default_grid())
        templates = class_templates(sensor, config)
        u = np.linspace(0.0, 1.0, sensor.expected_dim)
        k = np.arange(1, PERTURBATION_HARMONICS + 1)[:, None]
        for obj in objects:
            coef = rng.normal(size=(PERTURBATION_HARMONICS, 1)) / k
            phase = rng.uniform(0.0, 2 * math.pi, size=(PERTURBATION_HARMONICS, 1))
            perturb = config.object_scale * np.sum(coef * np.cos(math.pi * k * u + phase), axis=0)
            curve = templates[obj.material] + perturb
            n = config.samples_per_object
            gains = rng.uniform(*config.gain_range, size=(n, 1))
            noise = config.noise_scale * rng.normal(size=(n, sensor.expected_dim))
            block = np.clip(gains * curve + noise, 0.0, None)
            for i in range(n):
                samples.append(SpectralSample(obj.object_id, sensor, i, grid, _frozen(block[i])))

    corpus = Corpus(tuple(objects), tuple(samples), provenance=f"synthetic seed={seed} {config}")
    return Corpus(corpus.objects, corpus.samples, corpus.provenance, validate_corpus(corpus))


def group_indices(keys: Sequence) -> dict:
    """Map each distinct key to the sorted positions where it occurs."""
    out: dict = defaultdict(list)
    for i, k in enumerate(keys):
        out[k].append(i)
    return {k: np.array(v, dtype=int) for k, v in out.items()}
