"""
Core data model and on-disk formats.

Raw recordings (CSV with a ``#`` metadata line, or a fixed-header little-endian
binary), processed series bundles, per-trial labels and feature tables. All
value types are immutable and safe to share between threads; loaders validate
every invariant and never drop rows without a reason code.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import (
    EmptyTable,
    InvalidLabels,
    InvalidRecording,
    IoFailure,
    LengthMismatch,
    MissingHeaderField,
    NonFiniteSample,
)

logger = logging.getLogger(__name__)

# Canonical feature order: index i is feature No. i+1 everywhere in the code base.
FEATURE_NAMES: Tuple[str, ...] = (
    "PTT_max", "PTT_min", "PAT",
    "DW", "DW25", "DW50", "DW75", "DW90",
    "SW", "SW25", "SW50", "SW75", "SW90",
    "PW", "PW25", "PW50", "PW75", "PW90",
    "PWR25", "PWR50", "PWR75", "PWR90",
    "HI_max", "HI_min", "HI_MD", "PP", "HIR_max", "HIR_MD",
    "AS", "DS",
    "HId_max", "PWd", "PWd50", "PWRd", "ASd", "DSd",
    "SD", "Skew", "Kurt",
    "ApEn", "SampEn",
    "HR",
)

RAW_HEADER_FIELDS = ("sample_rate_hz", "excitation_freq_hz", "r0_ohm")
RAW_COLUMNS = ("vs", "vr", "ecg")

_BIN_MAGIC = b"BZBP"
_BIN_VERSION = 1
_BIN_HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("n_samples", "<u8"),
    ("sample_rate_hz", "<f8"),
    ("excitation_freq_hz", "<f8"),
    ("r0_ohm", "<f8"),
    ("subject_id", "S32"),
    ("trial_id", "S32"),
])


class RawFormat(Enum):
    CSV = "csv"
    BIN = "bin"


class SeriesKind(Enum):
    BIOZ_ABS = "BIOZ_ABS"
    BIOZ_REAL = "BIOZ_REAL"
    BIOZ_IMAG = "BIOZ_IMAG"
    ECG = "ECG"


@dataclass(frozen=True, eq=False)
class RawRecording:
    """Synchronized carrier-band streams of one trial with acquisition metadata."""

    vs_samples: np.ndarray
    vr_samples: np.ndarray
    ecg_samples: np.ndarray
    sample_rate_hz: float
    excitation_freq_hz: float
    r0_ohm: float
    subject_id: str = ""
    trial_id: str = ""
    duration_s: Optional[float] = None

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, name), dtype=float) for name in ("vs_samples", "vr_samples", "ecg_samples")]
        lengths = {len(a) for a in arrays}
        if len(lengths) != 1:
            raise LengthMismatch(f"Channel lengths differ: {sorted(lengths)}")
        n = lengths.pop()
        if n < 1:
            raise LengthMismatch("Recording holds no samples")
        for name, value in (("sample_rate_hz", self.sample_rate_hz), ("excitation_freq_hz", self.excitation_freq_hz),
                            ("r0_ohm", self.r0_ohm)):
            if not np.isfinite(value) or value <= 0:
                raise InvalidRecording(f"{name} must be positive, got {value}", field=name)
        if self.sample_rate_hz / self.excitation_freq_hz < 4:
            raise InvalidRecording(
                f"Excitation {self.excitation_freq_hz} Hz is not resolvable at {self.sample_rate_hz} Hz"
            )
        duration = n / self.sample_rate_hz
        if self.duration_s is not None and abs(self.duration_s - duration) > 1.0 / self.sample_rate_hz:
            raise InvalidRecording(f"duration_s={self.duration_s} disagrees with {n} samples at {self.sample_rate_hz} Hz")
        for name, array in zip(("vs_samples", "vr_samples", "ecg_samples"), arrays):
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "duration_s", duration if self.duration_s is None else float(self.duration_s))

    @property
    def n_samples(self) -> int:
        return len(self.vs_samples)


@dataclass(frozen=True, eq=False)
class ProcessedSeries:
    """A demodulated 500 Hz series; ``t0_s`` is the time of sample 0."""

    values: np.ndarray
    sample_rate_hz: float
    kind: SeriesKind
    processing_log: Tuple[str, ...] = ()
    t0_s: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "processing_log", tuple(self.processing_log))
        object.__setattr__(self, "kind", SeriesKind(self.kind))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(len(self.values)) / self.sample_rate_hz

    @property
    def duration_s(self) -> float:
        return len(self.values) / self.sample_rate_hz

    def with_step(self, values: np.ndarray, step: str) -> "ProcessedSeries":
        """New series with ``values`` and one more processing-log entry."""
        return replace(self, values=values, processing_log=self.processing_log + (step,))

    def slice(self, start: int, stop: int, step: str) -> "ProcessedSeries":
        return ProcessedSeries(
            values=self.values[start:stop],
            sample_rate_hz=self.sample_rate_hz,
            kind=self.kind,
            processing_log=self.processing_log + (step,),
            t0_s=self.t0_s + start / self.sample_rate_hz,
        )


@dataclass(frozen=True, eq=False)
class LabeledSegment:
    """An 8 s BIOZ/ECG window carrying its trial's reference labels."""

    biz: ProcessedSeries
    ecg: ProcessedSeries
    sbp_mmhg: float
    dbp_mmhg: float
    segment_index: int
    group_id: str = ""

    def __post_init__(self):
        if not (self.sbp_mmhg > self.dbp_mmhg > 0):
            raise InvalidLabels(f"Labels must satisfy sbp > dbp > 0, got ({self.sbp_mmhg}, {self.dbp_mmhg})")
        if (len(self.biz) != len(self.ecg) or self.biz.sample_rate_hz != self.ecg.sample_rate_hz
                or self.biz.t0_s != self.ecg.t0_s):
            raise LengthMismatch("BIOZ and ECG slices do not cover the same interval", stage="preprocess")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """The 42 canonical features of one segment plus its labels."""

    values: np.ndarray
    sbp_mmhg: float
    dbp_mmhg: float
    valid: bool = True
    reasons: Tuple[str, ...] = ()
    group_id: str = ""
    segment_index: int = 0
    # cycles left out of the per-cycle averages
    n_excluded_cycles: int = 0

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_NAMES.index(name)])

    def as_dict(self) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(FEATURE_NAMES, self.values)}


@dataclass(eq=False)
class FeatureTable:
    """Columnar feature table; invalid rows are kept with a reason."""

    features: np.ndarray
    sbp: np.ndarray
    dbp: np.ndarray
    group_ids: List[str]
    valid: np.ndarray
    reasons: List[str]
    segment_index: np.ndarray
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    provenance: Dict[str, Any] = field(default_factory=dict)
    n_excluded_cycles: Optional[np.ndarray] = None  # None: zeros

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float).reshape(-1, len(self.feature_names))
        self.sbp = np.asarray(self.sbp, dtype=float)
        self.dbp = np.asarray(self.dbp, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.segment_index = np.asarray(self.segment_index, dtype=int)
        self.group_ids = [str(g) for g in self.group_ids]
        self.reasons = [str(r) for r in self.reasons]
        self.feature_names = tuple(self.feature_names)
        n = len(self.features)
        if self.n_excluded_cycles is None:
            self.n_excluded_cycles = np.zeros(n, dtype=int)
        self.n_excluded_cycles = np.asarray(self.n_excluded_cycles, dtype=int)
        columns = (self.sbp, self.dbp, self.group_ids, self.valid, self.reasons, self.segment_index,
                   self.n_excluded_cycles)
        if not all(len(x) == n for x in columns):
            raise LengthMismatch("Feature table columns have different row counts")
        for i in range(n):
            if self.valid[i] and not np.all(np.isfinite(self.features[i])):
                raise InvalidRecording(f"Row {i} is marked valid but holds non-finite features", row=i)

    @classmethod
    def empty(cls, feature_names: Sequence[str] = FEATURE_NAMES) -> "FeatureTable":
        return cls(np.empty((0, len(feature_names))), [], [], [], [], [], [], tuple(feature_names))

    @classmethod
    def from_vectors(cls, vectors: Iterable[FeatureVector]) -> "FeatureTable":
        vectors = list(vectors)
        if not vectors:
            return cls.empty()
        return cls(
            features=np.vstack([v.values for v in vectors]),
            sbp=[v.sbp_mmhg for v in vectors],
            dbp=[v.dbp_mmhg for v in vectors],
            group_ids=[v.group_id for v in vectors],
            valid=[v.valid for v in vectors],
            reasons=[";".join(v.reasons) for v in vectors],
            segment_index=[v.segment_index for v in vectors],
            n_excluded_cycles=[v.n_excluded_cycles for v in vectors],
        )

    def __len__(self) -> int:
        return len(self.features)

    @property
    def rows(self) -> List[FeatureVector]:
        return [
            FeatureVector(self.features[i], float(self.sbp[i]), float(self.dbp[i]), bool(self.valid[i]),
                          tuple(r for r in self.reasons[i].split(";") if r), self.group_ids[i], int(self.segment_index[i]),
                          int(self.n_excluded_cycles[i]))
            for i in range(len(self))
        ]

    @property
    def subjects(self) -> List[str]:
        return [g.split("/", 1)[0] for g in self.group_ids]

    def target(self, name: str) -> np.ndarray:
        name = name.lower()
        if name not in ("sbp", "dbp"):
            raise ValueError(f"Unknown target {name!r}")
        return self.sbp if name == "sbp" else self.dbp

    def take(self, index: np.ndarray) -> "FeatureTable":
        index = np.asarray(index, dtype=int)
        return FeatureTable(
            self.features[index], self.sbp[index], self.dbp[index], [self.group_ids[i] for i in index],
            self.valid[index], [self.reasons[i] for i in index], self.segment_index[index],
            self.feature_names, dict(self.provenance), self.n_excluded_cycles[index],
        )

    def valid_rows(self) -> "FeatureTable":
        return self.take(np.flatnonzero(self.valid))

    def project(self, names: Sequence[str], provenance: Optional[Mapping[str, Any]] = None) -> "FeatureTable":
        """Keep only ``names`` (in canonical relative order)."""
        wanted = set(names)
        columns = [i for i, name in enumerate(self.feature_names) if name in wanted]
        return FeatureTable(
            self.features[:, columns], self.sbp, self.dbp, list(self.group_ids), self.valid, list(self.reasons),
            self.segment_index, tuple(self.feature_names[i] for i in columns),
            {**self.provenance, **(provenance or {})}, self.n_excluded_cycles,
        )

    def equals(self, other: "FeatureTable") -> bool:
        return (
            self.feature_names == other.feature_names
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features, equal_nan=True)
            and np.array_equal(self.sbp, other.sbp)
            and np.array_equal(self.dbp, other.dbp)
            and self.group_ids == other.group_ids
            and np.array_equal(self.valid, other.valid)
            and self.reasons == other.reasons
            and np.array_equal(self.segment_index, other.segment_index)
            and np.array_equal(self.n_excluded_cycles, other.n_excluded_cycles)
            and self.provenance == other.provenance
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "group_id": self.group_ids,
            "segment_index": self.segment_index,
            "sbp_mmhg": self.sbp,
            "dbp_mmhg": self.dbp,
            "valid": self.valid,
            "reason": self.reasons,
            "n_excluded_cycles": self.n_excluded_cycles,
        })
        features = pd.DataFrame(self.features, columns=list(self.feature_names))
        return pd.concat([frame, features], axis=1)


@dataclass(frozen=True)
class SummaryStats:
    """Label statistics of a feature table."""

    n_rows: int
    sbp_mean: float
    sbp_sd: float
    dbp_mean: float
    dbp_sd: float
    per_subject_counts: Dict[str, int]
    sbp_histogram: Tuple[Tuple[float, ...], Tuple[int, ...]]
    dbp_histogram: Tuple[Tuple[float, ...], Tuple[int, ...]]


# ===== Raw recordings =====

def load_raw(path: Path, format: RawFormat = RawFormat.CSV) -> RawRecording:
    """Load and validate one trial's raw recording."""
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"Raw recording not found: {path}", path=str(path))
    fmt = RawFormat(format)
    logger.debug("Loading raw %s recording %s", fmt.value, path)
    if fmt is RawFormat.BIN:
        return _load_raw_bin(path)
    return _load_raw_csv(path)


def save_raw(recording: RawRecording, path: Path, format: RawFormat = RawFormat.CSV) -> Path:
    """Write a raw recording in CSV or binary form."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        if RawFormat(format) is RawFormat.BIN:
            header = np.zeros(1, dtype=_BIN_HEADER)
            header[0] = (_BIN_MAGIC, _BIN_VERSION, recording.n_samples, recording.sample_rate_hz,
                         recording.excitation_freq_hz, recording.r0_ohm,
                         recording.subject_id.encode("utf-8"), recording.trial_id.encode("utf-8"))
            with open(path, "wb") as handle:
                handle.write(header.tobytes())
                for array in (recording.vs_samples, recording.vr_samples, recording.ecg_samples):
                    handle.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
        else:
            meta = " ".join([
                f"sample_rate_hz={recording.sample_rate_hz!r}",
                f"excitation_freq_hz={recording.excitation_freq_hz!r}",
                f"r0_ohm={recording.r0_ohm!r}",
                f"subject_id={recording.subject_id}",
                f"trial_id={recording.trial_id}",
            ])
            frame = pd.DataFrame({"vs": recording.vs_samples, "vr": recording.vr_samples, "ecg": recording.ecg_samples})
            with open(path, "w", encoding="utf-8", newline="") as handle:
                handle.write(f"# {meta}\n")
                frame.to_csv(handle, index=False)
    except OSError as exc:
        raise IoFailure(f"Cannot write {path}: {exc}", path=str(path)) from exc
    return path


def _parse_raw_header(line: str) -> Dict[str, str]:
    if not line.startswith("#"):
        raise MissingHeaderField("First line must be a '#' metadata header", field="header")
    fields = {}
    for token in line[1:].split():
        if "=" in token:
            key, value = token.split("=", 1)
            fields[key.strip()] = value.strip()
    for name in RAW_HEADER_FIELDS:
        if name not in fields:
            raise MissingHeaderField(f"Header lacks {name}", field=name)
    return fields


def _load_raw_csv(path: Path) -> RawRecording:
    with open(path, "r", encoding="utf-8") as handle:
        header = _parse_raw_header(handle.readline())
        frame = pd.read_csv(handle, na_values=[""], keep_default_na=False, float_precision="round_trip")
    missing = [c for c in RAW_COLUMNS if c not in frame.columns]
    if missing:
        raise MissingHeaderField(f"Missing columns {missing}", field=",".join(missing))

    n_rows = len(frame)
    columns = {}
    lengths = {}
    for name in RAW_COLUMNS:
        column = frame[name]
        empty = column.isna().to_numpy()
        # Empty cells may only form a trailing run (a shorter column)
        filled = np.flatnonzero(~empty)
        length = int(filled[-1]) + 1 if len(filled) else 0
        gaps = np.flatnonzero(empty[:length])
        if len(gaps):
            raise NonFiniteSample(f"Empty {name} value at row {gaps[0]}", row=int(gaps[0]), column=name)
        try:
            values = pd.to_numeric(column.iloc[:length]).to_numpy(dtype=float)
        except (TypeError, ValueError) as exc:
            raise NonFiniteSample(f"Unparseable {name} value: {exc}", column=name) from exc
        bad = np.flatnonzero(~np.isfinite(values))
        if len(bad):
            raise NonFiniteSample(f"Non-finite {name} value at row {bad[0]}", row=int(bad[0]), column=name)
        columns[name] = values
        lengths[name] = length
    if len(set(lengths.values())) != 1:
        raise LengthMismatch(f"Column lengths differ: {lengths} (file has {n_rows} rows)", path=str(path))
    return RawRecording(
        vs_samples=columns["vs"],
        vr_samples=columns["vr"],
        ecg_samples=columns["ecg"],
        sample_rate_hz=float(header["sample_rate_hz"]),
        excitation_freq_hz=float(header["excitation_freq_hz"]),
        r0_ohm=float(header["r0_ohm"]),
        subject_id=header.get("subject_id", ""),
        trial_id=header.get("trial_id", ""),
    )


def _load_raw_bin(path: Path) -> RawRecording:
    data = path.read_bytes()
    if len(data) < _BIN_HEADER.itemsize:
        raise MissingHeaderField("File too small for the binary header", field="header")
    header = np.frombuffer(data, dtype=_BIN_HEADER, count=1)[0]
    if bytes(header["magic"]) != _BIN_MAGIC:
        raise MissingHeaderField("Bad magic in binary header", field="magic")
    n = int(header["n_samples"])
    body = len(data) - _BIN_HEADER.itemsize
    if body != 3 * 8 * n:
        raise LengthMismatch(f"Binary body holds {body} bytes, header promises 3 x {n} samples", path=str(path))
    samples = np.frombuffer(data, dtype="<f8", offset=_BIN_HEADER.itemsize).reshape(3, n)
    for name, channel in zip(RAW_COLUMNS, samples):
        bad = np.flatnonzero(~np.isfinite(channel))
        if len(bad):
            raise NonFiniteSample(f"Non-finite {name} value at row {bad[0]}", row=int(bad[0]), column=name)
    return RawRecording(
        vs_samples=samples[0].copy(),
        vr_samples=samples[1].copy(),
        ecg_samples=samples[2].copy(),
        sample_rate_hz=float(header["sample_rate_hz"]),
        excitation_freq_hz=float(header["excitation_freq_hz"]),
        r0_ohm=float(header["r0_ohm"]),
        subject_id=bytes(header["subject_id"]).decode("utf-8"),
        trial_id=bytes(header["trial_id"]).decode("utf-8"),
    )


def adapt_public_trial(frame: pd.DataFrame, metadata: Mapping[str, Any],
                       mapping: Optional[Mapping[str, str]] = None) -> RawRecording:
    """Map a public-dataset trial table onto a :class:`RawRecording`.

    ``mapping`` maps our channel names (vs, vr, ecg) to the dataset's column
    names; the default comes from ``DATASET_CONFIG["public_columns"]``.
    """
    from .config import DATASET_CONFIG

    mapping = dict(mapping or DATASET_CONFIG["public_columns"])
    missing = [source for source in mapping.values() if source not in frame.columns]
    if missing:
        raise MissingHeaderField(f"Public dataset table lacks columns {missing}", field=",".join(missing))
    for name in RAW_HEADER_FIELDS:
        if name not in metadata:
            raise MissingHeaderField(f"Public dataset metadata lacks {name}", field=name)
    channels = {}
    for ours, source in mapping.items():
        values = frame[source].to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if len(bad):
            raise NonFiniteSample(f"Non-finite {source} value at row {bad[0]}", row=int(bad[0]), column=source)
        channels[ours] = values
    return RawRecording(
        vs_samples=channels["vs"],
        vr_samples=channels["vr"],
        ecg_samples=channels["ecg"],
        sample_rate_hz=float(metadata["sample_rate_hz"]),
        excitation_freq_hz=float(metadata["excitation_freq_hz"]),
        r0_ohm=float(metadata["r0_ohm"]),
        subject_id=str(metadata.get("subject_id", "")),
        trial_id=str(metadata.get("trial_id", "")),
    )


# ===== Processed series bundles =====

def save_series(path: Path, series: Mapping[str, ProcessedSeries]) -> Path:
    """Write equally sampled series as one CSV with a JSON metadata line."""
    path = Path(path)
    items = list(series.items())
    if not items:
        raise IoFailure("Nothing to write", path=str(path))
    first = items[0][1]
    for name, s in items:
        if len(s) != len(first) or s.sample_rate_hz != first.sample_rate_hz or s.t0_s != first.t0_s:
            raise LengthMismatch(f"Series {name} is not aligned with {items[0][0]}")
    meta = {
        "sample_rate_hz": first.sample_rate_hz,
        "t0_s": first.t0_s,
        "columns": {name: {"kind": s.kind.value, "processing_log": list(s.processing_log)} for name, s in items},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            pd.DataFrame({name: s.values for name, s in items}).to_csv(handle, index=False)
    except OSError as exc:
        raise IoFailure(f"Cannot write {path}: {exc}", path=str(path)) from exc
    return path


def load_series(path: Path) -> Dict[str, ProcessedSeries]:
    """Read a series bundle written by :func:`save_series`."""
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"Series file not found: {path}", path=str(path))
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline()
        if not first.startswith("#"):
            raise MissingHeaderField("Series file lacks its metadata line", field="header")
        meta = json.loads(first[1:])
        frame = pd.read_csv(handle, float_precision="round_trip")
    out = {}
    for name, info in meta["columns"].items():
        values = frame[name].to_numpy(dtype=float)
        out[name] = ProcessedSeries(values, float(meta["sample_rate_hz"]), SeriesKind(info["kind"]),
                                    tuple(info["processing_log"]), float(meta["t0_s"]))
    return out


# ===== Labels =====

def save_labels(path: Path, labels: Mapping[Tuple[str, str], Tuple[float, float]]) -> Path:
    """Write per-trial reference labels."""
    rows = [
        {"subject_id": s, "trial_id": t, "sbp_mmhg": sbp, "dbp_mmhg": dbp}
        for (s, t), (sbp, dbp) in sorted(labels.items())
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=["subject_id", "trial_id", "sbp_mmhg", "dbp_mmhg"]).to_csv(path, index=False)
    return path


def load_labels(path: Path) -> Dict[Tuple[str, str], Tuple[float, float]]:
    """Read per-trial reference labels keyed by (subject_id, trial_id)."""
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"Label file not found: {path}", path=str(path))
    frame = pd.read_csv(path, dtype={"subject_id": str, "trial_id": str}, float_precision="round_trip")
    for column in ("subject_id", "trial_id", "sbp_mmhg", "dbp_mmhg"):
        if column not in frame.columns:
            raise MissingHeaderField(f"Label file lacks {column}", field=column)
    return {
        (row.subject_id, row.trial_id): (float(row.sbp_mmhg), float(row.dbp_mmhg))
        for row in frame.itertuples(index=False)
    }


# ===== Feature tables =====

_TABLE_META_COLUMNS = ("group_id", "segment_index", "sbp_mmhg", "dbp_mmhg", "valid", "reason", "n_excluded_cycles")


def save_feature_table(table: FeatureTable, path: Path) -> Path:
    """Write a feature table; ``load_feature_table`` restores it bit-exactly."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write("# " + json.dumps({"provenance": table.provenance}, sort_keys=True) + "\n")
            table.to_frame().to_csv(handle, index=False)
    except OSError as exc:
        raise IoFailure(f"Cannot write {path}: {exc}", path=str(path)) from exc
    logger.info("Feature table with %d rows written to %s", len(table), path)
    return path


def load_feature_table(path: Path) -> FeatureTable:
    """Read a feature table written by :func:`save_feature_table`."""
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"Feature table not found: {path}", path=str(path))
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline()
        if first.startswith("#"):
            provenance = json.loads(first[1:])["provenance"]
            start = handle.tell()
        else:
            provenance, start = {}, 0
        handle.seek(start)
        header = handle.readline().strip().split(",")
        handle.seek(start)
        feature_names = [c for c in header if c not in _TABLE_META_COLUMNS]
        frame = pd.read_csv(
            handle,
            dtype={"group_id": str, "reason": str},
            keep_default_na=False,
            na_values={name: [""] for name in feature_names},
            float_precision="round_trip",
        )
    return FeatureTable(
        features=frame[feature_names].to_numpy(dtype=float).reshape(-1, len(feature_names)),
        sbp=frame["sbp_mmhg"].to_numpy(dtype=float),
        dbp=frame["dbp_mmhg"].to_numpy(dtype=float),
        group_ids=frame["group_id"].tolist(),
        valid=frame["valid"].map(lambda v: str(v) == "True").to_numpy(dtype=bool),
        reasons=frame["reason"].tolist(),
        segment_index=frame["segment_index"].to_numpy(dtype=int),
        feature_names=tuple(feature_names),
        provenance=provenance,
        n_excluded_cycles=frame["n_excluded_cycles"].to_numpy(dtype=int) if "n_excluded_cycles" in frame else None,
    )


def dataset_summary(table: FeatureTable, bin_width_mmhg: float = 5.0) -> SummaryStats:
    """Mean ± SD of the labels, per-subject counts and label histograms."""
    if len(table) == 0:
        raise EmptyTable("Cannot summarize an empty table")

    def mean_sd(values: np.ndarray) -> Tuple[float, float]:
        sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return float(np.mean(values)), sd

    def histogram(values: np.ndarray):
        low = np.floor(values.min() / bin_width_mmhg) * bin_width_mmhg
        high = max(np.ceil(values.max() / bin_width_mmhg) * bin_width_mmhg, low + bin_width_mmhg)
        edges = np.arange(low, high + bin_width_mmhg / 2, bin_width_mmhg)
        counts, edges = np.histogram(values, bins=edges)
        return tuple(float(e) for e in edges), tuple(int(c) for c in counts)

    counts: Dict[str, int] = {}
    for subject in table.subjects:
        counts[subject] = counts.get(subject, 0) + 1
    sbp_mean, sbp_sd = mean_sd(table.sbp)
    dbp_mean, dbp_sd = mean_sd(table.dbp)
    return SummaryStats(
        n_rows=len(table),
        sbp_mean=sbp_mean,
        sbp_sd=sbp_sd,
        dbp_mean=dbp_mean,
        dbp_sd=dbp_sd,
        per_subject_counts=dict(sorted(counts.items())),
        sbp_histogram=histogram(table.sbp),
        dbp_histogram=histogram(table.dbp),
    )
