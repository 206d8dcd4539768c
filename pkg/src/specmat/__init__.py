"""Material classification from visible-light and near-infrared spectra."""

from specmat.core import (
    Corpus,
    CorpusError,
    MaterialClass,
    ObjectRecord,
    SensorKind,
    SpectralSample,
    SynthConfig,
    ValidationReport,
    load_corpus,
    synth_corpus,
    validate_corpus,
    write_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusError",
    "MaterialClass",
    "ObjectRecord",
    "SensorKind",
    "SpectralSample",
    "SynthConfig",
    "ValidationReport",
    "load_corpus",
    "synth_corpus",
    "validate_corpus",
    "write_corpus",
]
