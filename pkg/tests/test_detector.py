import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_rule
from uasw.detector import (
    DetectorParams,
    detect,
    detect_buffer,
    false_positive_count,
)
from uasw.pipeline import DeltaVector


def dv(near=(0, 0, 0), far=None):
    d = np.zeros(15)
    d[:3] = near
    for b, v in (far or {}).items():
        d[b - 1] = v
    return DeltaVector(d)


deltas = st.lists(st.floats(0, 60, allow_nan=False), min_size=15, max_size=15).map(
    lambda xs: DeltaVector(np.array(xs))
)


class TestFalsePositiveCount:
    def test_all_exceed(self):
        assert false_positive_count(dv((25, 25, 25))) == 3

    def test_none(self):
        assert false_positive_count(dv()) == 0

    def test_strict_inequality(self):
        assert false_positive_count(dv((21, 19, 20))) == 1


class TestDetect:
    def test_far_triple(self):
        v = detect(dv(far={5: 25, 6: 25, 7: 25}))
        assert v.detected and v.trigger_bin == 5 and v.sigma == 0
        assert v.range_estimate_cm == 75.0

    def test_all_zero(self):
        v = detect(dv())
        assert not v.detected and v.sigma == 0 and v.trigger_bin is None

    def test_gate(self):
        v = detect(dv((21, 22, 23), {5: 25, 6: 25, 7: 25}))
        assert not v.detected and v.sigma == 3

    def test_two_near_still_allowed(self):
        assert detect(dv((21, 22, 0), {5: 25, 6: 25, 7: 25})).detected

    def test_lowest_trigger_wins(self):
        v = detect(dv(far={b: 30 for b in range(8, 16)}))
        assert v.trigger_bin == 8

    def test_triple_must_start_by_b13(self):
        assert detect(dv(far={13: 30, 14: 30, 15: 30})).trigger_bin == 13
        assert not detect(dv(far={14: 30, 15: 30})).detected

    def test_gap_in_triple(self):
        assert not detect(dv(far={5: 25, 6: 20, 7: 25})).detected

    def test_mean_variant(self):
        d = dv(far={5: 50, 6: 5, 7: 10})
        assert not detect(d).detected
        assert detect(d, DetectorParams(triple_rule="mean")).detected

    def test_gamma_for_rx_gain(self):
        assert DetectorParams.for_rx_gain(0).gamma == 20
        assert DetectorParams.for_rx_gain(7).gamma == 20
        assert DetectorParams.for_rx_gain(7, {7: 35.0}).gamma == 35.0

    def test_params_validation(self):
        with pytest.raises(ValueError):
            DetectorParams(gamma=0)
        with pytest.raises(ValueError):
            DetectorParams(near_bins=(1, 2, 4))

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            detect(DeltaVector(np.zeros(14)))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            d = rng.choice([0.0, 10.0, 20.0, 25.0], size=15) + rng.uniform(-1, 1, 15) * (rng.random() < 0.5)
            d = np.abs(d)
            v = detect(DeltaVector(d))
            assert (v.detected, v.trigger_bin, v.sigma) == brute_force_rule(d)


@settings(max_examples=300)
@given(deltas, st.lists(st.floats(0, 40), min_size=12, max_size=12))
def test_monotone_in_far_bins(d, bump):
    if not detect(d).detected:
        return
    raised = d.delta.copy()
    raised[3:] += np.array(bump)
    assert detect(DeltaVector(raised)).detected


@settings(max_examples=300)
@given(deltas)
def test_gate_dominance_and_ranges(d):
    v = detect(d)
    assert v.sigma in (0, 1, 2, 3)
    if v.sigma == 3:
        assert not v.detected
    if v.detected:
        assert 4 <= v.trigger_bin <= 13 and v.trigger_bin + 2 <= 15


def test_detect_buffer_prefers_newest_firing():
    old = dv(far={5: 25, 6: 25, 7: 25})
    new = dv(far={9: 25, 10: 25, 11: 25})
    quiet = dv()
    assert detect_buffer([old, new, quiet]).trigger_bin == 9
    assert detect_buffer([old, quiet, quiet]).trigger_bin == 5
    v = detect_buffer([quiet, quiet, dv((30, 0, 0))])
    assert not v.detected and v.sigma == 1
    with pytest.raises(ValueError):
        detect_buffer([])
