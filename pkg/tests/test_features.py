import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covtriage import (RegionLookupError, ValidationError, bin_temperature, encode,
                       geocode, group_diseases, load_region_table)
from covtriage.cohort import DISEASE_MAX, DISEASES, PatientRecord, SYMPTOMS
from covtriage.features import FEATURE_NAMES, N_FEATURES


def make_record(**overrides):
    base = dict(
        id="t", sex="female", age=40, latitude=36.9, longitude=127.4,
        body_temp=36.2, onset_month=5,
        **{s: False for s in SYMPTOMS}, **{d: 0 for d in DISEASES},
        outcome=None,
    )
    base.update(overrides)
    return PatientRecord(**base)


@st.composite
def records(draw):
    tri = st.sampled_from([True, False, None])
    return make_record(
        sex=draw(st.sampled_from(["male", "female"])),
        age=draw(st.integers(0, 110)),
        latitude=draw(st.floats(33.0, 39.0)),
        longitude=draw(st.floats(124.5, 132.0)),
        body_temp=draw(st.one_of(st.none(), st.floats(30.0, 45.0))),
        onset_month=draw(st.integers(1, 12)),
        **{s: draw(tri) for s in SYMPTOMS},
        **{d: draw(st.integers(0, DISEASE_MAX[d])) for d in DISEASES},
    )


class TestBinTemperature:
    @pytest.mark.parametrize("t,expected", [
        (30.0, 1), (36.5, 1), (36.6, 2), (37.4, 2), (37.5, 3),
        (38.2, 3), (38.3, 4), (45.0, 4),
    ])
    def test_boundaries(self, t, expected):
        assert bin_temperature(t) == expected

    @pytest.mark.parametrize("t", [29.9, 45.1, -5.0])
    def test_out_of_range(self, t):
        with pytest.raises(ValidationError):
            bin_temperature(t)

    @given(st.floats(30.0, 45.0), st.floats(30.0, 45.0))
    @settings(max_examples=200)
    def test_monotone(self, a, b):
        if a > b:
            a, b = b, a
        assert bin_temperature(a) <= bin_temperature(b)


class TestGroupDiseases:
    def test_two_cancers(self):
        g = group_diseases(["lung cancer", "liver cancer"])
        assert g.counts["cancer"] == 2
        assert all(v == 0 for k, v in g.counts.items() if k != "cancer")
        assert g.unrecognized == ()

    def test_empty(self):
        g = group_diseases([])
        assert all(v == 0 for v in g.counts.values())

    def test_cardio_pair(self):
        g = group_diseases(["hypertension", "stroke"])
        assert g.counts["cardio"] == 2

    def test_unrecognized_surfaced(self):
        g = group_diseases(["Hypertension", "flurgle syndrome"])
        assert g.counts["cardio"] == 1
        assert g.unrecognized == ("flurgle syndrome",)

    def test_case_and_whitespace_normalized(self):
        g = group_diseases(["  DIABETES   Mellitus "])
        assert g.counts["diabetes"] == 1

    def test_clamped_at_documented_max(self):
        g = group_diseases(["diabetes"] * 4)
        assert g.counts["diabetes"] == DISEASE_MAX["diabetes"] == 1
        assert "diabetes" in g.clamped


class TestGeocode:
    def test_exact_lookup(self):
        table = load_region_table()
        assert geocode("KR-11") == table["KR-11"]

    def test_unknown_code(self):
        with pytest.raises(RegionLookupError) as err:
            geocode("ZZ-99")
        assert err.value.suggestions

    def test_table_inside_bounding_box(self):
        for code, (lat, long_) in load_region_table().items():
            assert 33.0 <= lat <= 39.0, code
            assert 124.5 <= long_ <= 132.0, code


class TestEncode:
    def test_all_unknown_symptoms(self):
        rec = make_record(**{s: None for s in SYMPTOMS})
        vec = encode(rec)
        sym_slots = slice(6, 15)
        assert (~vec.present[sym_slots]).all()
        assert np.isnan(vec.values[sym_slots]).all()

    def test_hand_trace(self):
        rec = make_record(sex="male", age=44, body_temp=38.5, dyspnea=True)
        vec = encode(rec)
        by_name = dict(zip(FEATURE_NAMES, vec.values))
        assert by_name["sex"] == 1.0
        assert by_name["age"] == 44.0
        assert by_name["temp_bin"] == 4.0
        assert by_name["dyspnea"] == 1.0
        assert vec.present.all()

    def test_missing_count_preserved(self):
        rec = make_record(body_temp=None, cough=None, anosmia=None)
        vec = encode(rec)
        assert vec.n_missing == 3

    @given(records())
    @settings(max_examples=100)
    def test_deterministic(self, rec):
        a, b = encode(rec), encode(rec)
        assert np.array_equal(a.values, b.values, equal_nan=True)
        assert np.array_equal(a.present, b.present)
        assert len(a.values) == N_FEATURES

    @given(records(), records())
    @settings(max_examples=150)
    def test_injective_on_encoded_fields(self, r1, r2):
        fields = ["sex", "age", "latitude", "longitude", "body_temp", "onset_month",
                  *SYMPTOMS, *DISEASES]
        differ = any(getattr(r1, f) != getattr(r2, f) for f in fields)
        a, b = encode(r1), encode(r2)
        same = (np.array_equal(a.values, b.values, equal_nan=True)
                and np.array_equal(a.present, b.present))
        if differ:
            # distinct temperatures can share a bin: only the bin is encoded
            t1, t2 = r1.body_temp, r2.body_temp
            temps_equivalent = (
                t1 is not None and t2 is not None
                and bin_temperature(t1) == bin_temperature(t2)
                and all(getattr(r1, f) == getattr(r2, f)
                        for f in fields if f != "body_temp"))
            assert not same or temps_equivalent
        else:
            assert same
