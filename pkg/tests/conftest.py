import numpy as np
import pytest

from covtriage import (CohortSpec, FEATURE_NAMES, TrainConfig, encode_matrix,
                       generate_cohort, split_train_test, train)


@pytest.fixture(scope="session")
def spec_small():
    return CohortSpec(n=20_000, seed=73)


@pytest.fixture(scope="session")
def cohort_small(spec_small):
    return generate_cohort(spec_small)


@pytest.fixture(scope="session")
def split_small(cohort_small):
    return split_train_test(cohort_small, 0.8, seed=73)


@pytest.fixture(scope="session")
def model_small(split_small):
    train_recs, _ = split_small
    X = encode_matrix(train_recs)
    y = np.array([r.label for r in train_recs], dtype=np.float64)
    cfg = TrainConfig(n_trees=60, max_depth=4, seed=73)
    return train(X, y, cfg, feature_names=FEATURE_NAMES)
