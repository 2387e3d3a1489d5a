import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdiqkd.datasets import CountRecord, CountsDataset, IncompleteDatasetError, gains_from_counts
from mdiqkd.finitesize import FluctuationPolicy, epsilon_from_sigmas, fluctuation, loosen, merge_bell
from mdiqkd.io import load_bundled


def test_epsilon_examples():
    assert epsilon_from_sigmas(0) == 1.0
    assert epsilon_from_sigmas(1) == pytest.approx(0.3173, abs=1e-4)
    assert epsilon_from_sigmas(7) == pytest.approx(2.56e-12, rel=2e-3)
    with pytest.raises(ValueError):
        epsilon_from_sigmas(-1)


@given(st.floats(0, 30), st.floats(0.01, 5))
def test_epsilon_decreasing(n, dn):
    assert epsilon_from_sigmas(n + dn) < epsilon_from_sigmas(n)


def test_policy_budget():
    p = FluctuationPolicy(7)
    assert p.total_budget == pytest.approx(21 * p.epsilon)
    assert p.total_budget < 5.4e-11


def test_fluctuation_examples():
    assert fluctuation(100, 7) == pytest.approx(0.7)
    assert fluctuation(4, 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fluctuation(0, 7)


@given(st.floats(1, 1e15), st.floats(0, 10))
def test_fluctuation_scales_with_inverse_root(x, n):
    assert fluctuation(4 * x, n) == pytest.approx(fluctuation(x, n) / 2)


def tiny_dataset(c_uu=49, err_uu=0):
    recs = [CountRecord("ZZ", "s", "s", None, 10, 1, 1e6, 0.5, 0.5)]
    for a in "uvw":
        for b in "uvw":
            c = c_uu if (a, b) == ("u", "u") else 400
            e = err_uu if (a, b) == ("u", "u") else 100
            recs.append(CountRecord("XX", a, b, None, c, e, 1e6, 0.1, 0.1))
    return CountsDataset("tiny", 1.0, recs)


def test_loosen_factors_on_small_sample():
    g = loosen(gains_from_counts(tiny_dataset()), FluctuationPolicy(7))
    e = g.entry("u", "u")
    assert e.gain_upper == pytest.approx(2.0)
    assert e.gain_lower == 0.0
    assert math.isinf(e.error_upper)  # no error coincidences: undefined sample
    assert "uu:error" in g.fluctuation["undefined"]
    other = g.entry("v", "v")
    assert other.gain_upper == pytest.approx(1.35)
    assert other.error_upper == pytest.approx(1.7)
    assert g.fluctuation["gain_sample"] == "N*Q"


def test_undefined_error_row_is_dropped():
    from mdiqkd.decoy import build_error_constraints

    g = loosen(gains_from_counts(tiny_dataset()), FluctuationPolicy(7))
    ecs = build_error_constraints(g, 1e-3)
    assert "uu:error" in ecs.dropped
    assert len(ecs) == 6


def test_zero_sigmas_changes_nothing():
    g = loosen(gains_from_counts(tiny_dataset()), FluctuationPolicy(0))
    assert all(e.gain_upper == e.gain_lower == 1.0 for e in g.x.values())


def test_loosened_interval_brackets_raw():
    g = loosen(gains_from_counts(load_bundled("2.33dB_finite"), merge_bell=True), FluctuationPolicy(7))
    for e in g.x.values():
        assert e.gain * e.gain_lower <= e.gain <= e.gain * e.gain_upper
        assert e.error_gain * e.error_lower <= e.error_gain <= e.error_gain * e.error_upper


def test_merge_example():
    merged = merge_bell(load_bundled("2.33dB_finite"))
    assert merged.record("XX", "u", "u", None).coincidences == 4771407 + 4853012 == 9624419
    assert merged.bell_states == [None]
    with pytest.raises(ValueError):
        merge_bell(merged)


def test_merge_requires_partner():
    data = load_bundled("2.33dB_finite")
    partial = CountsDataset(data.channel_label, data.attenuation_db, data.records[:-1])
    with pytest.raises(IncompleteDatasetError):
        merge_bell(partial)


def test_merge_commutes_with_gains():
    data = load_bundled("2.33dB_finite")
    a = gains_from_counts(merge_bell(data))
    b = gains_from_counts(data, merge_bell=True)
    for key, e in a.x.items():
        assert e.gain == pytest.approx(b.x[key].gain, rel=1e-15)
        assert e.error_rate == pytest.approx(b.x[key].error_rate, rel=1e-15)


def test_merging_shrinks_fluctuation_by_root_two():
    data = load_bundled("2.33dB_finite")
    pol = FluctuationPolicy(7)
    split = loosen(gains_from_counts(data, bell=data.bell_states[0]), pol).entry("u", "u")
    merged = loosen(gains_from_counts(data, merge_bell=True), pol).entry("u", "u")
    ratio = (split.gain_upper - 1) / (merged.gain_upper - 1)
    assert ratio == pytest.approx(math.sqrt(2), rel=0.02)
