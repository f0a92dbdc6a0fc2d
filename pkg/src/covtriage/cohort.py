"""Patient data model, seeded synthetic cohort generation, and cohort CSV I/O.

The generator draws each feature from configurable marginal tables whose
defaults are calibrated to a nationwide confirmed-case cohort (n=149,471,
Feb 2020 - Jul 2021).  Features are independent except for two injected
couplings: underlying-disease counts rise with age, and the outcome label is
drawn from an explicit logistic risk model over the generated features.  The
risk model doubles as the Bayes-optimal oracle score in evaluation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import SchemaError, ValidationError

SYMPTOMS = (
    "cough",
    "sputum",
    "sore_throat",
    "dyspnea",
    "musculoskeletal_pain",
    "headache",
    "chill",
    "ageusia",
    "anosmia",
)

DISEASES = ("liver", "cancer", "diabetes", "cardio", "renal", "degenerative", "lung")

# Maximum plausible per-group disease counts seen in the calibration cohort.
DISEASE_MAX = {
    "liver": 3,
    "cancer": 5,
    "diabetes": 1,
    "cardio": 5,
    "renal": 2,
    "degenerative": 3,
    "lung": 3,
}

LAT_BOUNDS = (33.0, 39.0)
LONG_BOUNDS = (124.5, 132.0)
TEMP_BOUNDS = (30.0, 45.0)
AGE_BOUNDS = (0, 110)

CSV_HEADER = [
    "id", "sex", "age", "latitude", "longitude", "body_temp", "onset_month",
    *SYMPTOMS, *DISEASES, "outcome",
]

_COHORT_N = 149_471  # calibration cohort size; denominators below


@dataclass(frozen=True, slots=True)
class PatientRecord:
    """One confirmed case. Symptoms are tri-state: True/False/None (unknown)."""

    id: str
    sex: str  # "male" | "female"
    age: int
    latitude: float
    longitude: float
    body_temp: Optional[float]
    onset_month: int
    cough: Optional[bool]
    sputum: Optional[bool]
    sore_throat: Optional[bool]
    dyspnea: Optional[bool]
    musculoskeletal_pain: Optional[bool]
    headache: Optional[bool]
    chill: Optional[bool]
    ageusia: Optional[bool]
    anosmia: Optional[bool]
    liver: int
    cancer: int
    diabetes: int
    cardio: int
    renal: int
    degenerative: int
    lung: int
    outcome: Optional[str] = None  # "deceased" | "survived" | None

    def symptom(self, name: str) -> Optional[bool]:
        return getattr(self, name)

    def disease(self, name: str) -> int:
        return getattr(self, name)

    @property
    def label(self) -> Optional[int]:
        if self.outcome is None:
            return None
        return 1 if self.outcome == "deceased" else 0


def validate_record(rec: PatientRecord) -> None:
    """Raise ValidationError naming the first offending field."""
    if rec.sex not in ("male", "female"):
        raise ValidationError("sex", f"must be 'male' or 'female', got {rec.sex!r}")
    if not isinstance(rec.age, int) or not (AGE_BOUNDS[0] <= rec.age <= AGE_BOUNDS[1]):
        raise ValidationError("age", f"must be an integer in {AGE_BOUNDS}, got {rec.age!r}")
    if not (LAT_BOUNDS[0] <= rec.latitude <= LAT_BOUNDS[1]):
        raise ValidationError("latitude", f"must lie in {LAT_BOUNDS}, got {rec.latitude!r}")
    if not (LONG_BOUNDS[0] <= rec.longitude <= LONG_BOUNDS[1]):
        raise ValidationError("longitude", f"must lie in {LONG_BOUNDS}, got {rec.longitude!r}")
    if rec.body_temp is not None and not (TEMP_BOUNDS[0] <= rec.body_temp <= TEMP_BOUNDS[1]):
        raise ValidationError("body_temp", f"must lie in {TEMP_BOUNDS} or be absent, got {rec.body_temp!r}")
    if not (1 <= rec.onset_month <= 12):
        raise ValidationError("onset_month", f"must be in 1..12, got {rec.onset_month!r}")
    for name in SYMPTOMS:
        v = getattr(rec, name)
        if v is not None and not isinstance(v, bool):
            raise ValidationError(name, f"must be True, False or None, got {v!r}")
    for name in DISEASES:
        v = getattr(rec, name)
        if not isinstance(v, int) or v < 0 or v > DISEASE_MAX[name]:
            raise ValidationError(name, f"must be an integer in 0..{DISEASE_MAX[name]}, got {v!r}")
    if rec.outcome not in (None, "deceased", "survived"):
        raise ValidationError("outcome", f"must be 'deceased', 'survived' or None, got {rec.outcome!r}")


@dataclass(frozen=True)
class RiskModel:
    """Ground-truth logistic risk over generated features (log-odds units).

    All symptom and disease coefficients are non-negative, so risk is
    monotone increasing in age, in fever severity, and in each disease count.
    The intercept is calibrated by `calibrate_intercept` so that mean risk
    over the default generator matches the target outcome prevalence.
    """

    intercept: float = -7.5628662109375  # calibrated: mean risk 0.013381 under defaults
    age_per_sd: float = 2.1
    male: float = 0.32
    temp_bin: tuple[float, float, float, float] = (0.0, 0.35, 0.9, 1.8)
    lat_per_sd: float = 0.15
    long_per_sd: float = 0.2
    symptom_coefs: dict[str, float] = field(default_factory=lambda: {
        "cough": 0.15, "sputum": 0.2, "sore_throat": 0.05, "dyspnea": 1.5,
        "musculoskeletal_pain": 0.05, "headache": 0.05, "chill": 0.15,
        "ageusia": 0.05, "anosmia": 0.05,
    })
    disease_coefs: dict[str, float] = field(default_factory=lambda: {
        "liver": 0.5, "cancer": 0.7, "diabetes": 0.4, "cardio": 0.45,
        "renal": 0.9, "degenerative": 0.8, "lung": 0.5,
    })


def _p(count: int) -> float:
    return count / _COHORT_N


# Default marginals: calibration-cohort frequencies (exact counts over 149,471).
DEFAULT_SEX_MALE_P = _p(75_073)
DEFAULT_TEMP_BIN_P = (_p(121_557), _p(6_310), _p(17_227), _p(4_377))
DEFAULT_SYMPTOM_P = {
    # (true, false, unknown)
    "cough": (_p(34_201), _p(99_997), 1.0 - _p(34_201) - _p(99_997)),
    "sputum": (_p(17_108), _p(117_090), 1.0 - _p(17_108) - _p(117_090)),
    "sore_throat": (_p(25_078), _p(109_120), 1.0 - _p(25_078) - _p(109_120)),
    "dyspnea": (_p(1_962), _p(132_236), 1.0 - _p(1_962) - _p(132_236)),
    "musculoskeletal_pain": (_p(24_017), _p(110_181), 1.0 - _p(24_017) - _p(110_181)),
    "headache": (_p(16_337), _p(117_861), 1.0 - _p(16_337) - _p(117_861)),
    "chill": (_p(17_227), _p(116_971), 1.0 - _p(17_227) - _p(116_971)),
    "ageusia": (_p(4_846), _p(129_352), 1.0 - _p(4_846) - _p(129_352)),
    "anosmia": (_p(5_498), _p(128_700), 1.0 - _p(5_498) - _p(128_700)),
}
DEFAULT_DISEASE_PMF = {
    "liver": (_p(148_632), _p(354), _p(475), _p(10)),
    "cancer": (_p(147_260), _p(594), _p(1_423), _p(187), _p(5), _p(2)),
    "diabetes": (_p(139_063), _p(10_408)),
    "cardio": (_p(127_608), _p(2_165), _p(18_719), _p(825), _p(139), _p(15)),
    "renal": (_p(148_698), _p(758), _p(15)),
    "degenerative": (_p(146_945), _p(2_331), _p(193), _p(2)),
    "lung": (_p(147_253), _p(2_086), _p(122), _p(10)),
}
DEFAULT_PREVALENCE = _p(2_000)

# Sampling ranges per temperature bin, kept strictly inside the bin borders
# so a generated temperature always re-bins to the bin it was drawn for.
_TEMP_BIN_RANGES = ((35.5, 36.5), (36.6, 37.4), (37.5, 38.2), (38.3, 40.0))


@dataclass(frozen=True)
class CohortSpec:
    """Full configuration of the synthetic generator."""

    n: int
    seed: int
    prevalence_target: float = DEFAULT_PREVALENCE
    sex_male_p: float = DEFAULT_SEX_MALE_P
    age_mean: float = 44.36
    age_sd: float = 20.27
    lat_mean: float = 36.93
    lat_sd: float = 0.93
    long_mean: float = 127.39
    long_sd: float = 0.76
    temp_bin_p: tuple[float, float, float, float] = DEFAULT_TEMP_BIN_P
    temp_missing_rate: float = 0.0
    symptom_p: dict[str, tuple[float, float, float]] = field(
        default_factory=lambda: dict(DEFAULT_SYMPTOM_P))
    disease_pmf: dict[str, tuple[float, ...]] = field(
        default_factory=lambda: dict(DEFAULT_DISEASE_PMF))
    monthly_weights: tuple[float, ...] = (1.0 / 12,) * 12
    # log-scale slope of disease incidence per age SD; 0 disables the coupling
    disease_age_slope: float = 0.8
    risk: RiskModel = field(default_factory=RiskModel)


def validate_spec(spec: CohortSpec) -> None:
    if spec.n < 1:
        raise ValidationError("n", f"cohort size must be >= 1, got {spec.n}")
    if not (0.0 <= spec.prevalence_target <= 1.0):
        raise ValidationError("prevalence_target", f"must be in [0,1], got {spec.prevalence_target}")
    if not (0.0 <= spec.sex_male_p <= 1.0):
        raise ValidationError("sex_male_p", f"must be in [0,1], got {spec.sex_male_p}")
    if abs(sum(spec.temp_bin_p) - 1.0) > 1e-9 or min(spec.temp_bin_p) < 0:
        raise ValidationError("temp_bin_p", "bin probabilities must be non-negative and sum to 1")
    if not (0.0 <= spec.temp_missing_rate <= 1.0):
        raise ValidationError("temp_missing_rate", f"must be in [0,1], got {spec.temp_missing_rate}")
    if set(spec.symptom_p) != set(SYMPTOMS):
        raise ValidationError("symptom_p", f"must cover exactly {SYMPTOMS}")
    for name, probs in spec.symptom_p.items():
        if len(probs) != 3 or min(probs) < -1e-12 or abs(sum(probs) - 1.0) > 1e-9:
            raise ValidationError(f"symptom_p[{name}]", "tri-state probabilities must sum to 1")
    if set(spec.disease_pmf) != set(DISEASES):
        raise ValidationError("disease_pmf", f"must cover exactly {DISEASES}")
    for name, pmf in spec.disease_pmf.items():
        if len(pmf) - 1 > DISEASE_MAX[name]:
            raise ValidationError(f"disease_pmf[{name}]", f"supports counts beyond max {DISEASE_MAX[name]}")
        if min(pmf) < -1e-12 or abs(sum(pmf) - 1.0) > 1e-9:
            raise ValidationError(f"disease_pmf[{name}]", "count probabilities must sum to 1")
    if len(spec.monthly_weights) != 12 or min(spec.monthly_weights) < 0:
        raise ValidationError("monthly_weights", "needs 12 non-negative weights")
    if abs(sum(spec.monthly_weights) - 1.0) > 1e-9:
        raise ValidationError("monthly_weights", "weights must sum to 1")
    if spec.age_sd <= 0 or spec.lat_sd <= 0 or spec.long_sd <= 0:
        raise ValidationError("age_sd", "scale parameters must be positive")


def _risk_linear(spec: CohortSpec, *, male: np.ndarray, age: np.ndarray,
                 lat: np.ndarray, long: np.ndarray, temp_bin: np.ndarray,
                 symptoms_true: dict[str, np.ndarray],
                 disease_counts: dict[str, np.ndarray]) -> np.ndarray:
    """Linear log-odds score shared by scalar and vectorized risk paths.

    `temp_bin` uses 0 for a missing temperature (contributes nothing).
    """
    r = spec.risk
    z = np.full(age.shape, r.intercept, dtype=np.float64)
    z += r.age_per_sd * (age - spec.age_mean) / spec.age_sd
    z += r.male * male
    bins = np.concatenate(([0.0], r.temp_bin))  # index 0: missing temperature
    z += bins[temp_bin]
    z += r.lat_per_sd * (lat - spec.lat_mean) / spec.lat_sd
    z += r.long_per_sd * (long - spec.long_mean) / spec.long_sd
    for name in SYMPTOMS:
        z += r.symptom_coefs[name] * symptoms_true[name]
    for name in DISEASES:
        z += r.disease_coefs[name] * disease_counts[name]
    return z


def _temp_to_bin(t: Optional[float]) -> int:
    if t is None:
        return 0
    if t <= 36.5:
        return 1
    if t < 37.5:
        return 2
    if t < 38.3:
        return 3
    return 4


def true_risk(rec: PatientRecord, spec: CohortSpec) -> float:
    """Ground-truth mortality probability of one record under the generator."""
    validate_record(rec)
    z = _risk_linear(
        spec,
        male=np.array([1.0 if rec.sex == "male" else 0.0]),
        age=np.array([float(rec.age)]),
        lat=np.array([rec.latitude]),
        long=np.array([rec.longitude]),
        temp_bin=np.array([_temp_to_bin(rec.body_temp)]),
        symptoms_true={s: np.array([1.0 if getattr(rec, s) is True else 0.0]) for s in SYMPTOMS},
        disease_counts={d: np.array([float(getattr(rec, d))]) for d in DISEASES},
    )
    return float(1.0 / (1.0 + np.exp(-z[0])))


def _truncated_normal(rng: np.random.Generator, mean: float, sd: float,
                      lo: float, hi: float, n: int) -> np.ndarray:
    """Rejection-sampled truncated normal; deterministic for a given rng state."""
    out = rng.normal(mean, sd, n)
    bad = (out < lo) | (out > hi)
    while bad.any():
        out[bad] = rng.normal(mean, sd, int(bad.sum()))
        bad = (out < lo) | (out > hi)
    return out


class _Columns:
    """Columnar draw of a cohort; records are materialized on demand."""

    def __init__(self, spec: CohortSpec):
        rng = np.random.default_rng(spec.seed)
        n = spec.n
        # Draw order is part of the reproducibility contract; do not reorder.
        self.male = (rng.random(n) < spec.sex_male_p).astype(np.float64)
        age_raw = np.clip(rng.normal(spec.age_mean, spec.age_sd, n), *AGE_BOUNDS)
        self.age = np.rint(age_raw)
        self.lat = _truncated_normal(rng, spec.lat_mean, spec.lat_sd, *LAT_BOUNDS, n=n)
        self.long = _truncated_normal(rng, spec.long_mean, spec.long_sd, *LONG_BOUNDS, n=n)

        bin_idx = rng.choice(4, size=n, p=np.asarray(spec.temp_bin_p) / sum(spec.temp_bin_p))
        lo = np.array([r[0] for r in _TEMP_BIN_RANGES])[bin_idx]
        hi = np.array([r[1] for r in _TEMP_BIN_RANGES])[bin_idx]
        temp = np.round(lo + rng.random(n) * (hi - lo), 1)
        # Rounding to 0.1 degC cannot cross a bin border: borders are multiples of 0.1.
        self.temp_missing = rng.random(n) < spec.temp_missing_rate
        self.temp = temp
        self.temp_bin = np.where(self.temp_missing, 0, bin_idx + 1)

        self.month = rng.choice(
            np.arange(1, 13), size=n, p=np.asarray(spec.monthly_weights) / sum(spec.monthly_weights))

        # symptom states: 0=true, 1=false, 2=unknown
        self.symptom_state: dict[str, np.ndarray] = {}
        for name in SYMPTOMS:
            p_true, p_false, _ = spec.symptom_p[name]
            u = rng.random(n)
            self.symptom_state[name] = np.where(u < p_true, 0, np.where(u < p_true + p_false, 1, 2))

        # diseases: marginal pmf tilted by an age multiplier with unit mean,
        # so pooled marginals stay close to the configured tables
        z_age = (self.age - spec.age_mean) / spec.age_sd
        s = spec.disease_age_slope
        mult = np.exp(s * z_age - 0.5 * s * s)
        self.disease: dict[str, np.ndarray] = {}
        for name in DISEASES:
            pmf = np.asarray(spec.disease_pmf[name], dtype=np.float64)
            p_any = 1.0 - pmf[0]
            if p_any <= 0.0:
                self.disease[name] = np.zeros(n, dtype=np.int64)
                rng.random(n)  # keep the draw count stable across configs
                continue
            p_any_age = np.minimum(p_any * mult, 0.9)
            u = rng.random(n)
            has = u < p_any_age
            counts = np.zeros(n, dtype=np.int64)
            if has.any():
                # conditional count distribution given >=1 is age-independent
                cond = pmf[1:] / p_any
                # reuse u for the conditional draw: u / p_any_age is uniform on [0,1)
                v = np.where(has, u / np.maximum(p_any_age, 1e-300), 0.0)
                counts = np.where(has, 1 + np.searchsorted(np.cumsum(cond), v), 0)
                counts = np.minimum(counts, len(pmf) - 1)
            self.disease[name] = counts.astype(np.int64)

        z = _risk_linear(
            spec, male=self.male, age=self.age, lat=self.lat, long=self.long,
            temp_bin=self.temp_bin,
            symptoms_true={s_: (self.symptom_state[s_] == 0).astype(np.float64) for s_ in SYMPTOMS},
            disease_counts={d: self.disease[d].astype(np.float64) for d in DISEASES},
        )
        self.risk = 1.0 / (1.0 + np.exp(-z))
        self.deceased = rng.random(n) < self.risk


_STATE_TO_TRISTATE = {0: True, 1: False, 2: None}


def generate_cohort(spec: CohortSpec) -> list[PatientRecord]:
    """Draw a full cohort. Deterministic for a fixed spec and seed."""
    validate_spec(spec)
    cols = _Columns(spec)
    width = max(6, len(str(spec.n)))
    records = []
    for i in range(spec.n):
        records.append(PatientRecord(
            id=f"P{i:0{width}d}",
            sex="male" if cols.male[i] else "female",
            age=int(cols.age[i]),
            latitude=float(cols.lat[i]),
            longitude=float(cols.long[i]),
            body_temp=None if cols.temp_missing[i] else float(cols.temp[i]),
            onset_month=int(cols.month[i]),
            **{s: _STATE_TO_TRISTATE[int(cols.symptom_state[s][i])] for s in SYMPTOMS},
            **{d: int(cols.disease[d][i]) for d in DISEASES},
            outcome="deceased" if cols.deceased[i] else "survived",
        ))
    return records


def true_risk_scores(records: Sequence[PatientRecord], spec: CohortSpec) -> np.ndarray:
    """Vectorized `true_risk` over many records (the Bayes oracle score)."""
    z = _risk_linear(
        spec,
        male=np.array([1.0 if r.sex == "male" else 0.0 for r in records]),
        age=np.array([float(r.age) for r in records]),
        lat=np.array([r.latitude for r in records]),
        long=np.array([r.longitude for r in records]),
        temp_bin=np.array([_temp_to_bin(r.body_temp) for r in records]),
        symptoms_true={s: np.array([1.0 if getattr(r, s) is True else 0.0 for r in records])
                       for s in SYMPTOMS},
        disease_counts={d: np.array([float(getattr(r, d)) for r in records]) for d in DISEASES},
    )
    return 1.0 / (1.0 + np.exp(-z))


def calibrate_intercept(spec: CohortSpec, target: Optional[float] = None,
                        n: int = 200_000, seed: int = 0,
                        tol: float = 1e-4, max_iter: int = 60) -> float:
    """Bisection on the risk-model intercept so that mean generated risk
    matches the target prevalence under a Monte-Carlo draw of size n."""
    target = spec.prevalence_target if target is None else target
    if not (0.0 < target < 1.0):
        raise ValidationError("prevalence_target", "calibration target must be in (0,1)")

    def mean_risk(intercept: float) -> float:
        probe = replace(spec, n=n, seed=seed, risk=replace(spec.risk, intercept=intercept))
        return float(_Columns(probe).risk.mean())

    lo, hi = -30.0, 10.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        m = mean_risk(mid)
        if abs(m - target) <= tol * max(target, 1e-12):
            return mid
        if m > target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_tristate(v: Optional[bool]) -> str:
    if v is None:
        return ""
    return "1" if v else "0"


def write_cohort(records: Iterable[PatientRecord], path) -> None:
    """Write records as CSV under the documented schema (UTF-8, header first)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in records:
            row = [
                r.id, r.sex, str(r.age), _fmt_float(r.latitude), _fmt_float(r.longitude),
                "" if r.body_temp is None else _fmt_float(r.body_temp), str(r.onset_month),
            ]
            row += [_fmt_tristate(getattr(r, s)) for s in SYMPTOMS]
            row += [str(getattr(r, d)) for d in DISEASES]
            row.append("" if r.outcome is None else ("1" if r.outcome == "deceased" else "0"))
            w.writerow(row)


def _parse_tristate(cell: str, field_name: str, line: int) -> Optional[bool]:
    if cell == "":
        return None
    if cell == "1":
        return True
    if cell == "0":
        return False
    raise SchemaError(f"line {line}: {field_name} must be 1, 0 or empty, got {cell!r}")


def read_cohort(path) -> list[PatientRecord]:
    """Read a cohort CSV; rejects wrong headers and malformed rows by line number."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: expected header " + ",".join(CSV_HEADER))
        if header != CSV_HEADER:
            unknown = [c for c in header if c not in CSV_HEADER]
            detail = f"unknown columns {unknown}; " if unknown else ""
            raise SchemaError(f"{detail}expected header: {','.join(CSV_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise SchemaError(f"line {line}: expected {len(CSV_HEADER)} cells, got {len(row)}")
            try:
                cells = dict(zip(CSV_HEADER, row))
                rec = PatientRecord(
                    id=cells["id"],
                    sex=cells["sex"],
                    age=int(cells["age"]),
                    latitude=float(cells["latitude"]),
                    longitude=float(cells["longitude"]),
                    body_temp=None if cells["body_temp"] == "" else float(cells["body_temp"]),
                    onset_month=int(cells["onset_month"]),
                    **{s: _parse_tristate(cells[s], s, line) for s in SYMPTOMS},
                    **{d: int(cells[d]) for d in DISEASES},
                    outcome=(None if cells["outcome"] == ""
                             else "deceased" if cells["outcome"] == "1"
                             else "survived" if cells["outcome"] == "0"
                             else cells["outcome"]),
                )
            except SchemaError:
                raise
            except (ValueError, KeyError) as exc:
                raise SchemaError(f"line {line}: malformed row ({exc})") from exc
            try:
                validate_record(rec)
            except ValidationError as exc:
                raise SchemaError(f"line {line}: {exc}") from exc
            records.append(rec)
    return records
