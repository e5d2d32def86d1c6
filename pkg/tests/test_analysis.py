import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from giverscheme import analysis, simulate
from giverscheme.analysis import (boltzmann_entropy, detect_oscillations, gini, gini_sample,
                                  kl_divergence, lorenz_curve, quadrature_moments,
                                  sample_entropy)
from giverscheme.exceptions import (InsufficientRangeError, SupportMismatchError,
                                    TailDominatedError, UntrustedMassError)
from giverscheme.inversion import WealthDistribution

from oracles import gaussian_entropy, gaussian_gini, two_level_conditions


def density(w, p, floor=1e-8):
    return WealthDistribution(w=w, p=p, method="exact", trust_floor=floor)


@pytest.fixture(scope="module")
def exponential():
    w = np.geomspace(1e-8, 25, 2000)
    return density(w, np.exp(-w))


@pytest.fixture(scope="module")
def lattice_histogram():
    pop = simulate.init_population(None, "eq13", 0)
    return simulate.histogram(pop, 1.0)


# --- moments -----------------------------------------------------------------

def test_exponential_moments(exponential):
    mom = quadrature_moments(exponential, 3)
    np.testing.assert_allclose(mom.values, [1, 1, 2, 6], rtol=1e-8)
    assert mom.variance == pytest.approx(1.0, rel=1e-8)
    assert np.all(mom.error < 1e-6)


def test_gamma_moments_with_power_law_head():
    # p = w^(-1/2) e^-w / Gamma(1/2): the head correction carries real mass
    w = np.geomspace(1e-6, 40, 3000)
    p = w ** -0.5 * np.exp(-w) / math.gamma(0.5)
    mom = quadrature_moments(density(w, p), 2)
    exact = np.array([1.0, 0.5, 0.75])
    np.testing.assert_allclose(mom.values, exact, rtol=1e-6)
    # the error estimate is good to a factor of two
    assert np.all(np.abs(mom.values - exact) <= 2 * mom.error)
    assert mom.truncation[0] > 1e-4


def test_heavy_tail_is_rejected():
    w = np.geomspace(1e-3, 10, 500)
    p = 2.0 / (1 + w) ** 3
    with pytest.raises(TailDominatedError):
        quadrature_moments(density(w, p), 2)


def test_histogram_moments(lattice_histogram):
    mom = quadrature_moments(lattice_histogram, 2)
    assert mom.values[0] == pytest.approx(1.0, rel=1e-12)
    assert mom.values[1] == pytest.approx(1.0, rel=1e-3)


# --- entropy -------------------------------------------------------------------

def test_exponential_entropy(exponential):
    # values below the floor (w > b) contribute nothing: S = 1 - (b + 1) e^-b
    b = -math.log(exponential.trust_floor)
    rep = boltzmann_entropy(exponential)
    assert rep.S == pytest.approx(1.0 - (b + 1) * math.exp(-b), abs=5e-8)
    assert rep.error < 1e-6


def test_two_level_start_has_zero_entropy(lattice_histogram):
    p1, p2, w2 = simulate.two_level_zero_entropy()
    mass, mean, S = two_level_conditions(p1, p2, w2)
    assert (mass, mean, S) == pytest.approx((1.0, 1.0, 0.0), abs=1e-12)
    rep = boltzmann_entropy(lattice_histogram)
    assert rep.S == pytest.approx(0.0, abs=1e-3)
    assert kl_divergence(lattice_histogram) == pytest.approx(1.0, abs=1e-3)


def test_gaussian_sample_entropy(rng):
    var = 0.01
    rep = sample_entropy(rng.normal(1.0, math.sqrt(var), 1_000_000))
    assert rep.S == pytest.approx(gaussian_entropy(var), abs=0.01)
    assert rep.binning_spread < 0.01
    assert isinstance(rep.bin_width, float)


def test_untrusted_mass(exponential):
    w = np.geomspace(1e-3, 2.0, 400)
    with pytest.raises(UntrustedMassError):
        boltzmann_entropy(density(w, np.exp(-w)))


def test_floor_values_do_not_contribute():
    w = np.geomspace(1e-8, 25, 2000)
    p = np.exp(-w)
    noisy = p.copy()
    noisy[p < 1e-8] = -5e-9  # truncation noise below the floor
    assert boltzmann_entropy(density(w, noisy)).S == pytest.approx(
        boltzmann_entropy(density(w, np.where(p < 1e-8, 0.0, p))).S, abs=1e-15)


# --- divergence ----------------------------------------------------------------

def test_kl_identity(exponential):
    assert kl_divergence(exponential) == pytest.approx(0.0, abs=1e-7)
    assert kl_divergence(exponential, reference=lambda w: np.exp(-w)) == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("shape", [0.5, 2.0, 5.0])
def test_kl_equals_one_minus_entropy_for_unit_mean(shape):
    # gamma densities with unit mean
    w = np.geomspace(1e-8, 60, 4000)
    p = shape ** shape * w ** (shape - 1) * np.exp(-shape * w) / math.gamma(shape)
    dist = density(w, p, floor=1e-12)
    S = boltzmann_entropy(dist)
    D = kl_divergence(dist)
    mu1 = quadrature_moments(dist, 1, rtol=1e-4).values[1]
    # D = -S + int p w dw = 1 - S at unit mean
    assert D == pytest.approx(mu1 - S.S, abs=2 * (S.error + 1e-6))
    assert D == pytest.approx(1 - S.S, abs=1e-3)


def test_kl_support_mismatch(exponential):
    with pytest.raises(SupportMismatchError):
        kl_divergence(exponential, reference=lambda w: np.where(w < 1.0, 1.0, 0.0))


# --- inequality ----------------------------------------------------------------

def test_gini_sample_hand_values():
    assert gini_sample([1, 1, 1, 1]) == 0.0
    assert gini_sample([0, 0, 0, 1]) == pytest.approx(0.75)
    assert gini_sample([0, 0, 0, 0]) == 0.0


def test_exponential_gini(exponential):
    rep = gini(exponential)
    assert rep.G == pytest.approx(0.5, abs=1e-6)


def test_gaussian_like_gini(rng):
    var = 0.01
    x = rng.normal(1.0, math.sqrt(var), 1_000_000)
    assert gini(x).G == pytest.approx(gaussian_gini(var), rel=0.01)


@given(arrays(float, st.integers(2, 200), elements=st.floats(0.0, 1e3)))
@settings(max_examples=100, deadline=None)
def test_lorenz_and_gini_properties(sample):
    if sample.sum() <= 0:
        return
    rep = gini(sample)
    X, L = rep.X, rep.L
    assert X[0] == 0 and L[0] == 0
    assert X[-1] == pytest.approx(1.0) and L[-1] == pytest.approx(1.0)
    assert np.all(L <= X + 1e-12)
    assert np.all(np.diff(L) >= -1e-15)
    assert 0.0 <= rep.G <= 1.0
    assert rep.G == pytest.approx(gini_sample(sample), abs=1e-12)


@given(arrays(float, st.integers(2, 100), elements=st.floats(0.01, 1e3)), st.floats(0.1, 100))
@settings(max_examples=50, deadline=None)
def test_gini_scale_invariant(sample, c):
    assert gini_sample(sample * c) == pytest.approx(gini_sample(sample), abs=1e-12)


def test_histogram_lorenz(lattice_histogram):
    X, L = lorenz_curve(lattice_histogram)
    assert np.all(L <= X + 1e-12)
    assert gini(lattice_histogram).G == pytest.approx(gini_sample(lattice_histogram.sample), abs=1e-3)


def test_lorenz_rejects_empty_mass():
    w = np.geomspace(0.1, 10, 50)
    with pytest.raises(UntrustedMassError):
        lorenz_curve(density(w, np.zeros_like(w)))


# --- oscillations --------------------------------------------------------------

def test_synthetic_log_periodic_density():
    w = np.geomspace(1e-8, 10, 1500)
    p = np.exp(-w) * (1 + 0.1 * np.sin(2 * np.pi * np.log10(w) / 1.5))
    rep = detect_oscillations(density(w, p))
    assert rep.is_oscillatory
    assert rep.log10_period == pytest.approx(1.5, abs=0.05)


def test_smooth_density_not_oscillatory(exponential):
    rep = detect_oscillations(exponential)
    assert not rep.is_oscillatory
    assert math.isnan(rep.log10_period)


def test_short_range_raises():
    w = np.geomspace(0.1, 10, 100)
    with pytest.raises(InsufficientRangeError):
        detect_oscillations(density(w, np.exp(-w)))


@pytest.mark.parametrize("f, period", [(0.9, 1.0), (0.95, 1.3)])
def test_steady_state_periods(steady, f, period):
    rep = detect_oscillations(steady(f))
    assert rep.is_oscillatory
    assert rep.log10_period == pytest.approx(period, abs=0.05)


@pytest.mark.parametrize("f", [0.25, 0.5, 0.75])
def test_steady_state_smooth(steady, f):
    assert not detect_oscillations(steady(f)).is_oscillatory


def test_small_f_range_conflict(steady):
    # the trusted run at f = 0.05 spans under 1.4 decades
    with pytest.raises(InsufficientRangeError):
        detect_oscillations(steady(0.05))
    rep = detect_oscillations(steady(0.05), min_decades=1.0, w_max=None)
    assert not rep.is_oscillatory


def test_report_exports(tmp_path, steady):
    rep = detect_oscillations(steady(0.9))
    assert set(rep.to_dict()) == {"is_oscillatory", "log10_period", "peak_locations", "amplitude"}
    assert rep.to_csv(tmp_path / "resid.csv").exists()
    assert analysis.EntropyReport(1.0, 0.0).to_json(tmp_path / "s.json").exists()
