from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specmat import (
    Corpus,
    CorpusError,
    MaterialClass,
    ObjectRecord,
    SensorKind,
    SpectralSample,
    SynthConfig,
    load_corpus,
    synth_corpus,
    validate_corpus,
    write_corpus,
)
from specmat.core import class_templates, group_indices
from specmat.evaluation import centroid_oracle_accuracy
from specmat.preprocess import preprocess_arrays


def _nir_sample(oid="a", idx=0, values=None, grid=None):
    grid = SensorKind.NIR.default_grid() if grid is None else grid
    values = np.ones(331) if values is None else values
    return SpectralSample(oid, SensorKind.NIR, idx, np.asarray(grid, float), np.asarray(values, float))


def _write(tmp_path: Path, objects: str, samples: str) -> Path:
    (tmp_path / "objects.csv").write_text(objects)
    (tmp_path / "samples.csv").write_text(samples)
    return tmp_path


def _sample_row(oid, sensor, idx, values):
    return ",".join([oid, sensor, str(idx)] + [f"{v:g}" for v in values])


NIR_HEADER = "object_id,sensor,sample_index," + ",".join(f"v{i}" for i in range(331))


# --- enums ------------------------------------------------------------------

def test_material_codes_are_a_bijection():
    assert [m.value for m in MaterialClass] == [0, 1, 2, 3, 4]
    assert [m.label for m in MaterialClass] == ["metal", "plastic", "wood", "paper", "fabric"]
    for m in MaterialClass:
        assert MaterialClass.parse(m.label) is m
        assert MaterialClass.parse(m.label.upper()) is m


def test_unknown_material_rejected():
    with pytest.raises(ValueError):
        MaterialClass.parse("glass")


def test_sensor_kinds():
    assert SensorKind.NIR.expected_dim == 331
    assert SensorKind.VISIBLE.expected_dim == 288
    assert SensorKind.parse("NIR") is SensorKind.NIR
    with pytest.raises(ValueError):
        SensorKind.parse("uv")


def test_default_grids():
    nir = SensorKind.NIR.default_grid()
    assert len(nir) == 331 and nir[0] == 740 and nir[-1] == 1070
    assert np.all(np.diff(nir) == 1)
    vis = SensorKind.VISIBLE.default_grid()
    assert len(vis) == 288 and vis[0] == pytest.approx(317) and vis[-1] == pytest.approx(856)
    assert np.diff(vis).mean() == pytest.approx(539 / 287)


# --- samples ----------------------------------------------------------------

def test_valid_sample_has_no_problems():
    assert _nir_sample().problems() == []


def test_sample_arrays_are_read_only():
    s = synth_corpus(SynthConfig(objects_per_material=1, samples_per_object=1), seed=0).samples[0]
    with pytest.raises(ValueError):
        s.intensities[0] = 1.0


@pytest.mark.parametrize("values, grid, fragment", [
    (np.ones(330), np.arange(740, 1070), "expected 331"),
    (np.r_[np.nan, np.ones(330)], None, "non-finite"),
    (np.r_[-1.0, np.ones(330)], None, "negative"),
    (None, np.r_[741, np.arange(740, 1070)], "strictly increasing"),
    (None, np.arange(750, 1081), "outside"),
])
def test_sample_defects_reported(values, grid, fragment):
    problems = _nir_sample(values=values, grid=grid).problems()
    assert any(fragment in p for p in problems), problems


def test_endpoint_tolerance_is_two_nm():
    assert _nir_sample(grid=np.arange(742, 1073)).problems() == []
    assert _nir_sample(grid=np.arange(743, 1074)).problems() != []


# --- synthetic corpus -------------------------------------------------------

def test_full_shaped_synthetic_corpus(full_corpus):
    report = full_corpus.validation
    assert report.ok and report.balanced
    assert len(full_corpus.objects) == 50
    assert report.sensor_totals() == {"visible": 5000, "nir": 5000}
    assert set(report.counts.values()) == {100}
    assert report.objects_per_material == {m.label: 10 for m in MaterialClass}
    assert report.warnings == []


def test_synth_is_deterministic(tmp_path):
    cfg = SynthConfig(objects_per_material=2, samples_per_object=5)
    write_corpus(synth_corpus(cfg, seed=7), tmp_path / "a")
    write_corpus(synth_corpus(cfg, seed=7), tmp_path / "b")
    for name in ("objects.csv", "samples.csv", "wavelengths_nir.csv", "wavelengths_visible.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_seed_changes_samples():
    cfg = SynthConfig(objects_per_material=1, samples_per_object=2)
    a, b = synth_corpus(cfg, seed=1), synth_corpus(cfg, seed=2)
    assert not np.array_equal(a.samples[0].intensities, b.samples[0].intensities)


def test_zero_noise_fixed_gain_gives_identical_samples():
    cfg = SynthConfig(objects_per_material=2, samples_per_object=2, noise_scale=0.0,
                      gain_range=(1.0, 1.0))
    corpus = synth_corpus(cfg, seed=0)
    for (obj, sensor), rows in group_indices([(s.object_id, s.sensor) for s in corpus.samples]).items():
        first, second = (corpus.samples[i].intensities for i in rows)
        assert np.array_equal(first, second)


def test_class_templates_share_shape_across_seeds():
    cfg = SynthConfig()
    t = class_templates(SensorKind.NIR, cfg)
    assert t.shape == (5, 331)
    assert np.array_equal(t, class_templates(SensorKind.NIR, cfg))
    flat = class_templates(SensorKind.NIR, SynthConfig(class_scale=0.0))
    assert np.all(flat == flat[0])


@pytest.mark.parametrize("bad", [
    dict(objects_per_material=0), dict(samples_per_object=-1), dict(noise_scale=-0.1),
    dict(class_scale=-1.0), dict(gain_range=(0.0, 1.0)),
])
def test_synth_rejects_bad_config(bad):
    with pytest.raises(ValueError):
        synth_corpus(SynthConfig(**bad), seed=0)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.floats(0, 2), st.floats(0, 0.5),
       st.floats(0, 0.1), st.integers(0, 2 ** 31))
def test_synth_output_always_validates(n_obj, n_samp, sc, so, sn, seed):
    cfg = SynthConfig(objects_per_material=n_obj, samples_per_object=n_samp, class_scale=sc,
                      object_scale=so, noise_scale=sn)
    corpus = synth_corpus(cfg, seed)
    assert corpus.validation.violations == []
    assert all(len(s.intensities) == s.sensor.expected_dim for s in corpus.samples)


def test_centroid_oracle_on_defaults(full_corpus):
    for sensor in SensorKind:
        arrays = full_corpus.arrays(sensor)
        acc = centroid_oracle_accuracy(preprocess_arrays(arrays), arrays.labels)
        assert acc >= 0.99, (sensor, acc)


def test_centroid_oracle_at_chance_without_structure():
    corpus = synth_corpus(SynthConfig(class_scale=0.0, object_scale=0.0), seed=7)
    arrays = corpus.arrays("nir")
    acc = centroid_oracle_accuracy(preprocess_arrays(arrays), arrays.labels)
    assert abs(acc - 0.2) <= 0.05


# --- validation -------------------------------------------------------------

def test_missing_object_flagged(full_corpus):
    drop = "wood_03"
    corpus = Corpus(tuple(o for o in full_corpus.objects if o.object_id != drop),
                    tuple(s for s in full_corpus.samples if s.object_id != drop))
    report = validate_corpus(corpus)
    assert report.ok
    assert report.objects_per_material["wood"] == 9
    assert not report.balanced
    assert any("wood: 9 objects" in w for w in report.warnings)


def test_short_nir_sample_violation():
    obj = ObjectRecord("a", "a", MaterialClass.METAL)
    corpus = Corpus((obj,), (_nir_sample(values=np.ones(330), grid=np.arange(740, 1070)),))
    report = validate_corpus(corpus)
    assert not report.ok
    assert any("expected 331" in v for v in report.violations)


def test_validation_catches_undeclared_and_duplicates():
    obj = ObjectRecord("a", "a", MaterialClass.METAL)
    corpus = Corpus((obj, obj), (_nir_sample("a", 0), _nir_sample("a", 0), _nir_sample("b", 0)))
    v = validate_corpus(corpus).violations
    assert any("declared 2 times" in x for x in v)
    assert any("duplicate sample" in x for x in v)
    assert any("not declared" in x for x in v)


def test_validation_format_mentions_status(full_corpus):
    text = full_corpus.validation.format()
    assert "status: ok" in text and "nir: 5000 samples" in text


# --- CSV ingestion ----------------------------------------------------------

def test_hand_built_manifest(tmp_path):
    rows = [_sample_row("m1", "nir", i, np.full(331, 1.0 + i)) for i in range(3)]
    _write(tmp_path, "object_id,display_name,material\nm1,spoon,metal\n",
           NIR_HEADER + "\n" + "\n".join(rows) + "\n")
    corpus = load_corpus(tmp_path / "objects.csv")
    assert corpus.validation.sensor_totals() == {"nir": 3}
    assert corpus.validation.ok
    arrays = corpus.arrays("nir")
    assert arrays.intensities.shape == (3, 331)
    assert np.array_equal(arrays.intensities[:, 0], [1.0, 2.0, 3.0])
    assert np.array_equal(arrays.wavelengths[0], SensorKind.NIR.default_grid())
    assert corpus.object("m1").material is MaterialClass.METAL


def test_empty_sample_table_loads_with_warning(tmp_path):
    _write(tmp_path, "object_id,display_name,material\nm1,spoon,metal\n", NIR_HEADER + "\n")
    corpus = load_corpus(tmp_path)
    assert len(corpus.samples) == 0
    assert "corpus has no samples" in corpus.validation.warnings
    assert len(corpus.arrays("nir")) == 0


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_corpus(tmp_path / "nothing")


@pytest.mark.parametrize("objects, samples, fragment", [
    ("id,name,material\n", NIR_HEADER + "\n", "objects.csv:1"),
    ("object_id,display_name,material\nm1,a,glass\n", NIR_HEADER + "\n", "objects.csv:2"),
    ("object_id,display_name,material\nm1,a,metal\nm1,b,wood\n", NIR_HEADER + "\n",
     "objects.csv:3: duplicate"),
    ("object_id,display_name,material\nm1,a,metal\n",
     NIR_HEADER + "\n" + _sample_row("m1", "nir", 0, np.ones(330)) + "\n", "samples.csv:2"),
    ("object_id,display_name,material\nm1,a,metal\n",
     NIR_HEADER + "\n" + _sample_row("m2", "nir", 0, np.ones(331)) + "\n", "unknown object"),
    ("object_id,display_name,material\nm1,a,metal\n",
     NIR_HEADER + "\n" + _sample_row("m1", "nir", 0, np.ones(331)) + "\n"
     + _sample_row("m1", "nir", 0, np.ones(331)) + "\n", "samples.csv:3: duplicate"),
    ("object_id,display_name,material\nm1,a,metal\n",
     NIR_HEADER + "\nm1,nir,0," + ",".join(["1"] * 330 + ["x"]) + "\n", "samples.csv:2"),
    ("object_id,display_name,material\nm1,a,metal\n",
     NIR_HEADER + "\nm1,uv,0," + ",".join(["1"] * 331) + "\n", "samples.csv:2"),
])
def test_malformed_rows_name_the_line(tmp_path, objects, samples, fragment):
    _write(tmp_path, objects, samples)
    with pytest.raises(CorpusError, match=fragment):
        load_corpus(tmp_path)


def test_custom_wavelength_grid(tmp_path):
    grid = np.linspace(741.0, 1069.5, 331)
    _write(tmp_path, "object_id,display_name,material\nm1,a,metal\n",
           NIR_HEADER + "\n" + _sample_row("m1", "nir", 0, np.ones(331)) + "\n")
    (tmp_path / "wavelengths_nir.csv").write_text(",".join(f"{w:.9g}" for w in grid) + "\n")
    corpus = load_corpus(tmp_path)
    assert np.allclose(corpus.samples[0].wavelengths, grid)


def test_round_trip_is_byte_exact(tmp_path):
    corpus = synth_corpus(SynthConfig(objects_per_material=2, samples_per_object=3), seed=11)
    first = write_corpus(corpus, tmp_path / "a")
    second = write_corpus(load_corpus(first), tmp_path / "b")
    for name in ("objects.csv", "samples.csv", "wavelengths_nir.csv", "wavelengths_visible.csv"):
        a, b = (first / name).read_bytes(), (second / name).read_bytes()
        assert a == b, name
        assert b"\r\n" not in a


def test_round_trip_preserves_values_to_nine_digits(tmp_path):
    corpus = synth_corpus(SynthConfig(objects_per_material=1, samples_per_object=2), seed=5)
    loaded = load_corpus(write_corpus(corpus, tmp_path))
    def by_key(c):
        return {(s.object_id, s.sensor, s.sample_index): s.intensities for s in c.samples}

    before, after = by_key(corpus), by_key(loaded)
    assert before.keys() == after.keys()
    for key in before:
        assert np.allclose(before[key], after[key], rtol=1e-8, atol=0)


def test_group_indices():
    groups = group_indices(["b", "a", "b", "c", "a"])
    assert {k: v.tolist() for k, v in groups.items()} == {"b": [0, 2], "a": [1, 4], "c": [3]}
    assert sum(len(v) for v in groups.values()) == 5
