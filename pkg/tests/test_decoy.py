import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mdiqkd.core import ClassFluxes
from mdiqkd.datasets import CountRecord, CountsDataset, gains_from_counts
from mdiqkd.decoy import (
    MERGED_PAIRS,
    ZeroYieldError,
    bound_single_photon_error,
    bound_single_photon_yield,
    build_error_constraints,
    build_yield_constraints,
    estimate_bounds,
    mixture_coefficients,
    truncation_remainder,
    yield_index,
)
from mdiqkd.finitesize import FluctuationPolicy, loosen
from mdiqkd.io import load_bundled

FLUX = ClassFluxes(0.7, 0.08, 0.02, 0.001)


def make_dataset(y, e, fluxes=FLUX, N=1e12, cut=30):
    """Counts generated exactly by yield/error functions y(m, n), e(m, n)."""
    m = np.arange(cut + 1)
    Y = np.array([[y(i, j) for j in m] for i in m], dtype=float)
    E = np.array([[e(i, j) for j in m] for i in m], dtype=float)
    records = []
    for ca in "uvw":
        for cb in "uvw":
            w = np.outer(stats.poisson.pmf(m, fluxes[ca]), stats.poisson.pmf(m, fluxes[cb]))
            Q = float((w * Y).sum())
            QE = float((w * Y * E).sum())
            records.append(CountRecord("XX", ca, cb, None, Q * N, QE * N, N, fluxes[ca], fluxes[cb]))
    records.append(CountRecord("ZZ", "s", "s", None, 1.0, 0.0, 1.0, fluxes.s, fluxes.s))
    return CountsDataset("toy", 0.0, records)


def test_remainder_examples():
    assert truncation_remainder(7, 0.0, 0.0) == 0.0
    assert truncation_remainder(3, 0.0, 0.0) == 0.0
    assert 0 < truncation_remainder(7, 0.08, 0.08) < 1e-12
    assert truncation_remainder(1, 5.0, 5.0) > truncation_remainder(9, 5.0, 5.0)
    with pytest.raises(ValueError):
        truncation_remainder(0, 0.1, 0.1)
    with pytest.raises(ValueError):
        truncation_remainder(7, -0.1, 0.1)


@given(K=st.integers(1, 10), a=st.floats(0, 1), b=st.floats(0, 1))
def test_coefficients_plus_remainder_sum_to_one(K, a, b):
    total = mixture_coefficients(K, a, b).sum() * math.exp(-a - b) + truncation_remainder(K, a, b)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_constraint_counts():
    g = gains_from_counts(make_dataset(lambda i, j: 0.01, lambda i, j: 0.5))
    ycs = build_yield_constraints(g)
    assert len(ycs) == 14
    assert ycs.count("yield_upper") == ycs.count("yield_lower") == 7
    ecs = build_error_constraints(g, 0.01)
    assert len(ycs) + len(ecs) == 21
    b = estimate_bounds(g)
    assert b.constraint_count == 21


def test_cumulative_yield_row_is_sum():
    g = gains_from_counts(make_dataset(lambda i, j: 0.01 * (i + j), lambda i, j: 0.5))
    ycs = build_yield_constraints(g)
    row = [c for c in ycs.constraints if c.label == "vw+wv+ww" and c.kind == "yield_upper"][0]
    total = sum(mixture_coefficients(7, g.entry(a, b).flux_a, g.entry(a, b).flux_b) for a, b in MERGED_PAIRS)
    assert np.allclose(row.coeffs, total)
    rhs = sum(math.exp(g.entry(a, b).flux_a + g.entry(a, b).flux_b) * g.entry(a, b).gain for a, b in MERGED_PAIRS)
    assert row.rhs == pytest.approx(rhs, rel=1e-14)


def test_cumulative_error_row_is_average():
    g = gains_from_counts(make_dataset(lambda i, j: 0.01 * (i + j), lambda i, j: 0.3))
    ecs = build_error_constraints(g, 0.01)
    row = [c for c in ecs.constraints if c.label == "vw+wv+ww"][0]
    rhs = []
    for a, b in MERGED_PAIRS:
        e = g.entry(a, b)
        rhs.append(math.exp(e.flux_a + e.flux_b) * e.error_gain / (e.flux_a * e.flux_b))
    assert row.rhs == pytest.approx(np.mean(rhs), rel=1e-12)
    assert row.e_coeff == pytest.approx(0.01)


def test_constant_yield_is_bracketed():
    y0 = 3e-3
    g = gains_from_counts(make_dataset(lambda i, j: y0 if i and j else 0.0, lambda i, j: 0.1 if i and j else 0.5))
    b = estimate_bounds(g)
    assert b.y11_lower <= y0 * (1 + 1e-9)
    assert b.y11_lower >= 0.8 * y0
    assert b.e11_upper >= 0.1 * (1 - 1e-9)
    assert b.e11_upper <= 0.2


def test_all_zero_gains_give_zero_yield():
    g = gains_from_counts(make_dataset(lambda i, j: 0.0, lambda i, j: 0.5))
    assert bound_single_photon_yield(g) == 0.0
    with pytest.raises(ZeroYieldError):
        estimate_bounds(g)
    with pytest.raises(ZeroYieldError):
        bound_single_photon_error(g, 0.0)


def test_random_errors_bound_at_least_half():
    g = gains_from_counts(make_dataset(lambda i, j: 0.01 if i and j else 1e-6, lambda i, j: 0.5))
    y = bound_single_photon_yield(g)
    assert bound_single_photon_error(g, y) >= 0.5 - 1e-9


def test_truncation_order_stability():
    g = gains_from_counts(load_bundled("2.33dB"), bell=load_bundled("2.33dB").bell_states[0])
    ys = [bound_single_photon_yield(g, K=K) for K in (5, 7, 9)]
    assert max(ys) / min(ys) - 1 < 0.02


def test_finite_size_never_tighter():
    data = load_bundled("2.33dB_finite")
    g = gains_from_counts(data, merge_bell=True)
    asym = estimate_bounds(g)
    fin = estimate_bounds(loosen(g, FluctuationPolicy(7)))
    assert fin.y11_lower <= asym.y11_lower * (1 + 1e-9)
    assert fin.e11_upper >= asym.e11_upper * (1 - 1e-9)
    assert fin.finite_size and fin.failure_budget == pytest.approx(21 * 2.56e-12, rel=0.01)


def test_yield_index_layout():
    assert yield_index(7, 0, 0) == 0
    assert yield_index(7, 1, 1) == 9
    assert yield_index(7, 7, 7) == 63


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_bounds_are_sound(seed):
    rng = np.random.default_rng(seed)
    Y = rng.uniform(0, 1, (31, 31)) * rng.uniform(0, 0.05)
    E = rng.uniform(0, 1, (31, 31))
    E[0, :] = E[:, 0] = 0.5
    data = make_dataset(lambda i, j: Y[i, j], lambda i, j: E[i, j])
    g = gains_from_counts(data)
    y = bound_single_photon_yield(g, relax=False)
    assert y <= Y[1, 1] * (1 + 1e-9) + 1e-15
    if y > 0:
        assert bound_single_photon_error(g, y, relax=False) >= E[1, 1] * (1 - 1e-9) - 1e-15
