"""Mortality-risk triage engine: synthetic cohorts, boosted trees with
exact Shapley attribution, imbalanced-classification evaluation, and a
probability-band triage policy served over HTTP."""

__version__ = "0.1.0"

from .cohort import (CohortSpec, PatientRecord, RiskModel, calibrate_intercept,
                     generate_cohort, read_cohort, true_risk, true_risk_scores,
                     write_cohort)
from .errors import (CovtriageError, ModelFormatError, ModelVersionError,
                     RegionLookupError, SchemaError, ValidationError)
from .evaluate import (BootstrapResult, Confusion, DcaCurve, EvalReport, auprc,
                       auroc, best_youden, bootstrap, confusion_at, dca_curve,
                       evaluate_report, net_benefit)
from .explain import (Attribution, AttributionSummary, brute_shap, shap_matrix,
                      shap_values, summary)
from .features import (FEATURE_NAMES, FeatureVector, bin_temperature, encode,
                       encode_matrix, geocode, group_diseases, load_region_table)
from .gbdt import (TrainConfig, Tree, TreeEnsemble, gain_importance, load_model,
                   predict_margin, predict_proba, save_model, split_train_test,
                   train)
from .triage import BandPolicy, TriageDecision, assess, band

__all__ = [name for name in dir() if not name.startswith("_")]
