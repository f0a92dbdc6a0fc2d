"""Probability-band triage policy and decision assembly.

Band rule (closed interval in the middle): p < low_cut is low risk,
low_cut <= p <= high_cut is moderate, p > high_cut is high.  The facility
ladder is a pure function of the band and is configurable policy, not
clinical certitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from .cohort import PatientRecord
from .errors import ValidationError
from .explain import shap_values
from .features import FEATURE_NAMES, encode
from .gbdt import TreeEnsemble

BANDS = ("low", "moderate", "high")

RECOMMENDATIONS = {
    "low": "home/CTC monitoring",
    "moderate": "hospital admission",
    "high": "tertiary referral",
}


@dataclass(frozen=True)
class BandPolicy:
    low_cut: float = 0.05
    high_cut: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.low_cut < self.high_cut < 1.0):
            raise ValidationError(
                "policy", f"need 0 < low_cut < high_cut < 1, got ({self.low_cut}, {self.high_cut})")


def band(p: float, policy: BandPolicy = BandPolicy()) -> str:
    if not (0.0 <= p <= 1.0):
        raise ValidationError("probability", f"must be in [0,1], got {p}")
    if p < policy.low_cut:
        return "low"
    if p > policy.high_cut:
        return "high"
    return "moderate"


@dataclass(frozen=True)
class TopFactor:
    feature: str
    phi: float
    direction: str  # "up" | "down" | "none"
    probability_delta: float  # sigmoid(margin) - sigmoid(margin - phi)


@dataclass(frozen=True)
class TriageDecision:
    probability: float
    band: str
    recommendation: str
    top_factors: tuple[TopFactor, ...]
    model_version: str
    policy: BandPolicy
    timestamp: str  # UTC ISO-8601

    def to_dict(self) -> dict:
        return {
            "probability": self.probability,
            "band": self.band,
            "recommendation": self.recommendation,
            "top_factors": [vars(f) for f in self.top_factors],
            "model_version": self.model_version,
            "policy": {"low_cut": self.policy.low_cut, "high_cut": self.policy.high_cut},
            "timestamp": self.timestamp,
        }


def _sigmoid(z: float) -> float:
    return float(1.0 / (1.0 + np.exp(-z)))


def assess(record: PatientRecord, model: TreeEnsemble,
           policy: BandPolicy = BandPolicy(), k: int = 5,
           timestamp: Optional[str] = None) -> TriageDecision:
    """Full pipeline for one patient: encode, predict, attribute, band."""
    if model.feature_names != tuple(FEATURE_NAMES):
        raise ValidationError(
            "model", "model feature order does not match the canonical encoding")
    vec = encode(record)
    attribution = shap_values(model, vec)
    margin = attribution.predicted_margin
    p = _sigmoid(margin)
    b = band(p, policy)
    order = np.argsort(-np.abs(attribution.phi), kind="stable")[:k]
    factors = tuple(
        TopFactor(
            feature=FEATURE_NAMES[i],
            phi=float(attribution.phi[i]),
            direction="up" if attribution.phi[i] > 0 else "down" if attribution.phi[i] < 0 else "none",
            probability_delta=p - _sigmoid(margin - float(attribution.phi[i])),
        )
        for i in order
    )
    return TriageDecision(
        probability=p,
        band=b,
        recommendation=RECOMMENDATIONS[b],
        top_factors=factors,
        model_version=model.digest(),
        policy=policy,
        timestamp=timestamp or datetime.now(timezone.utc).isoformat(),
    )
