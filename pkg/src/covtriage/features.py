"""Deterministic encoding of patient records into the model's numeric rows.

The 22-slot order below is the single canonical feature order; training,
attribution, the CLI and the scoring service all share it.  Missing values
(unknown symptoms, absent temperature) are encoded as explicit missing
markers, never as zeros.
"""

from __future__ import annotations

import csv
import difflib
import hashlib
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .cohort import DISEASES, DISEASE_MAX, PatientRecord, SYMPTOMS, TEMP_BOUNDS, validate_record
from .errors import RegionLookupError, SchemaError, ValidationError

FEATURE_NAMES: tuple[str, ...] = (
    "sex", "age", "latitude", "longitude", "onset_month", "temp_bin",
    *SYMPTOMS, *DISEASES,
)
N_FEATURES = len(FEATURE_NAMES)  # 22

_SYMPTOM_SLOT = {name: 6 + i for i, name in enumerate(SYMPTOMS)}
_DISEASE_SLOT = {name: 15 + i for i, name in enumerate(DISEASES)}


def feature_fingerprint(names: Sequence[str] = FEATURE_NAMES) -> str:
    return hashlib.sha256(",".join(names).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class FeatureVector:
    """values[i] is meaningful only where present[i]; missing slots hold NaN."""

    values: np.ndarray
    present: np.ndarray

    def __post_init__(self):
        if self.values.shape != (N_FEATURES,) or self.present.shape != (N_FEATURES,):
            raise ValidationError("values", f"feature vector must have {N_FEATURES} slots")

    def as_row(self) -> np.ndarray:
        """Model input row: float64 with NaN marking missing slots."""
        return self.values

    @property
    def n_missing(self) -> int:
        return int((~self.present).sum())


def bin_temperature(t: float) -> int:
    """Map a body temperature to its ordered severity bin (1..4)."""
    if not (TEMP_BOUNDS[0] <= t <= TEMP_BOUNDS[1]):
        raise ValidationError("body_temp", f"temperature {t!r} outside {TEMP_BOUNDS}")
    if t <= 36.5:
        return 1
    if t < 37.5:
        return 2
    if t < 38.3:
        return 3
    return 4


# Keyword table for free-text underlying-disease grouping.  Matching is
# case-insensitive on whitespace-normalized text, and priority order matters:
# the first group whose keyword occurs in the name wins, so "lung cancer"
# lands in cancer, not lung.
GROUP_KEYWORDS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("cancer", ("cancer", "lymphoma", "leukemia", "myelogenous white blood",
                "carcinoma", "malignan", "tumor", "hematoma")),
    ("cardio", ("hypertension", "stroke", "cerebral infarction", "myocardial",
                "arteriosclerosis", "angina", "heart", "cardio", "cerebrovascular")),
    ("renal", ("renal", "glomerular", "kidney")),
    ("degenerative", ("alzheimer", "dementia", "parkinson")),
    ("liver", ("hepatitis", "cirrhosis", "liver")),
    ("lung", ("emphysema", "lung", "copd", "asthma", "bronch", "pulmonary")),
    ("diabetes", ("diabetes",)),
)


@dataclass(frozen=True)
class DiseaseGroups:
    counts: dict[str, int]
    unrecognized: tuple[str, ...]
    clamped: tuple[str, ...]  # groups whose count hit the documented maximum


def group_diseases(reported: Iterable[str]) -> DiseaseGroups:
    """Fold free-text disease names into the seven group counters.

    Unrecognized names are returned, never silently dropped; counts are
    clamped at the documented per-group maxima and the clamp is reported.
    """
    counts = {name: 0 for name in DISEASES}
    unrecognized: list[str] = []
    clamped: list[str] = []
    for raw in reported:
        text = " ".join(str(raw).lower().split())
        if not text:
            continue
        for group, keywords in GROUP_KEYWORDS:
            if any(k in text for k in keywords):
                if counts[group] >= DISEASE_MAX[group]:
                    if group not in clamped:
                        clamped.append(group)
                else:
                    counts[group] += 1
                break
        else:
            unrecognized.append(raw)
    return DiseaseGroups(counts=counts, unrecognized=tuple(unrecognized), clamped=tuple(clamped))


_DEFAULT_REGION_TABLE: Optional[dict[str, tuple[float, float]]] = None


def load_region_table(path=None) -> dict[str, tuple[float, float]]:
    """Region-code -> (latitude, longitude) lookup. Bundled table by default."""
    if path is None:
        text = resources.files("covtriage.data").joinpath("kr_regions.csv").read_text("utf-8")
        lines = text.splitlines()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != ["region_code", "latitude", "longitude"]:
        raise SchemaError("region table must have header region_code,latitude,longitude")
    table = {}
    for i, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise SchemaError(f"region table line {i}: expected 3 cells")
        try:
            table[row[0]] = (float(row[1]), float(row[2]))
        except ValueError as exc:
            raise SchemaError(f"region table line {i}: {exc}") from exc
    return table


def _default_region_table() -> dict[str, tuple[float, float]]:
    global _DEFAULT_REGION_TABLE
    if _DEFAULT_REGION_TABLE is None:
        _DEFAULT_REGION_TABLE = load_region_table()
    return _DEFAULT_REGION_TABLE


def geocode(region_code: str, table: Optional[dict[str, tuple[float, float]]] = None) -> tuple[float, float]:
    """Resolve a region code to its table coordinates."""
    table = _default_region_table() if table is None else table
    if region_code in table:
        return table[region_code]
    near = difflib.get_close_matches(region_code, table.keys(), n=3, cutoff=0.2)
    if not near:
        near = sorted(table.keys())[:3]
    raise RegionLookupError(region_code, near)


def encode(record: PatientRecord) -> FeatureVector:
    """Encode one record into the canonical 22-slot row."""
    validate_record(record)
    values = np.full(N_FEATURES, np.nan, dtype=np.float64)
    present = np.zeros(N_FEATURES, dtype=bool)

    def put(slot: int, v: float) -> None:
        values[slot] = v
        present[slot] = True

    put(0, 1.0 if record.sex == "male" else 0.0)
    put(1, float(record.age))
    put(2, record.latitude)
    put(3, record.longitude)
    put(4, float(record.onset_month))
    if record.body_temp is not None:
        put(5, float(bin_temperature(record.body_temp)))
    for name in SYMPTOMS:
        v = getattr(record, name)
        if v is not None:
            put(_SYMPTOM_SLOT[name], 1.0 if v else 0.0)
    for name in DISEASES:
        put(_DISEASE_SLOT[name], float(getattr(record, name)))
    return FeatureVector(values=values, present=present)


def encode_matrix(records: Sequence[PatientRecord]) -> np.ndarray:
    """Stack encodings into an (n, 22) float64 matrix with NaN for missing."""
    out = np.empty((len(records), N_FEATURES), dtype=np.float64)
    for i, rec in enumerate(records):
        out[i] = encode(rec).values
    return out
