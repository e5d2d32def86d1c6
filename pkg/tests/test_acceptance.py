"""End-to-end acceptance criteria, one test per criterion.

Each test prints ``CRITERION n: PASS|FAIL <details>``; the lines are also
collected and repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from giverscheme import analysis, figures, inversion, simulate, solver
from giverscheme.inversion import GiverTransform, RULE_TOLERANCE, invert, invert_distribution
from giverscheme.moments import asymptotic_exponent, steady_moments

from conftest import steady_distribution
from test_inversion import PAIRS, W

RESULTS = []


def record(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def test_01_closed_form_recovery():
    start = time.perf_counter()
    w = np.geomspace(0.1, 10, 200)
    p = invert(GiverTransform(0.5), w, "talbot")
    err = float(np.max(np.abs(p / np.exp(-w) - 1)))
    elapsed = time.perf_counter() - start
    record(1, err <= 1e-6 and elapsed <= 60, f"max rel err {err:.2e} (<= 1e-6), {elapsed:.1f} s (<= 60 s)")


def test_02_moment_closure():
    worst, details = 0.0, []
    for f in (0.05, 0.1, 0.25, 0.5, 0.75, 0.9):
        got = analysis.quadrature_moments(steady_distribution(f), 2).values
        rel = float(np.max(np.abs(got / steady_moments(f, 2).values - 1)))
        worst = max(worst, rel)
        details.append(f"f={f}:{rel:.1e}")
    record(2, worst <= 5e-7, f"worst rel err {worst:.1e} (6 digits: <= 5e-7; 8-digit target "
                             f"{'met' if worst <= 5e-9 else 'not met'}) " + " ".join(details))


def test_03_tail_exponent():
    parts, ok = [], True
    for f in (0.1, 0.5, 0.75):
        fit = solver.fit_tail_exponent(solver.solve_ray(f, 1e4j))
        rel = abs(fit / asymptotic_exponent(f) - 1)
        ok &= rel <= 0.02
        parts.append(f"|g| f={f}:{rel:.1e}")
    # the approach to the power law is slow and log-periodic at large f, so fit
    # a decade well inside the asymptotic regime
    for f in (0.25, 0.75):
        w = np.geomspace(1e-6, 1e-5, 30)
        slope = np.polyfit(np.log(w), np.log(invert(GiverTransform(f), w, "auto")), 1)[0]
        rel = abs(slope / (asymptotic_exponent(f) - 1) - 1)
        ok &= rel <= 0.05
        parts.append(f"slope f={f}:{rel:.1e}")
    record(3, ok, "rel errors " + " ".join(parts) + " (<= 2% / 5%)")


def test_04_ray_versus_invariant():
    rng = np.random.default_rng(2024)
    worst_ratio = 0.0
    for f in (0.1, 0.3, 0.5):
        for _ in range(50):
            theta = rng.uniform(-math.pi / 2, math.pi / 2)
            z = 10 ** rng.uniform(-2, 2) * np.exp(1j * theta)
            grid = solver.solve_ray(f, 2 * z)
            diff = abs(solver.evaluate(grid, z) - solver.invariant_transform(f, z))
            tol = 10 * (grid.tolerance + grid.interpolation_error + 1e-14)
            worst_ratio = max(worst_ratio, diff / tol)
    record(4, worst_ratio <= 1.0, f"worst |diff| / (10 x combined tol) = {worst_ratio:.2f} over 150 points")


def _entropy(f):
    return analysis.boltzmann_entropy(steady_distribution(f)).S


def test_05_entropy_anchors():
    s_half = _entropy(0.5)
    signs = {f: _entropy(f) for f in (0.03, 0.9, 0.1, 0.7)}
    sign_ok = signs[0.03] < 0 and signs[0.9] < 0 and signs[0.1] > 0 and signs[0.7] > 0
    lo = brentq(_entropy, 0.04, 0.08, xtol=1e-4)
    hi = brentq(_entropy, 0.8, 0.88, xtol=1e-4)
    ok = abs(s_half - 1) <= 1e-3 and sign_ok and abs(lo - 0.058) <= 0.005 and abs(hi - 0.836) <= 0.005
    record(5, ok, f"S(0.5)={s_half:.6f}, signs ok={sign_ok}, crossings {lo:.4f} and {hi:.4f}")


def test_06_entropy_turnover():
    hits, parts = 0, []
    for seed in range(5):
        traj = simulate.run(simulate.init_population(None, "eq13", seed), 0.058, 100, gini=False)
        S = traj.entropy
        k = int(np.argmax(S))
        turns = 5 <= k <= 20 and S[k] > S[0] and S[k] > S[-1] and abs(S[-1]) <= 0.05
        hits += turns
        parts.append(f"seed{seed}: max@{k} S_end={S[-1]:+.3f}")
    record(6, hits >= 4, f"{hits}/5 runs turn over; " + ", ".join(parts))


def test_07_gini_anchors():
    g_half = analysis.gini(steady_distribution(0.5)).G
    G5 = [analysis.gini(steady_distribution(f)).G for f in (0.1, 0.25, 0.5, 0.75, 0.9)]
    increasing = bool(np.all(np.diff(G5) > 0))
    fs = figures.f_sweep()
    var = fs / (1 - fs)
    G = np.array([analysis.gini(steady_distribution(float(f))).G for f in fs])
    d1 = np.diff(G) / np.diff(var)
    d2 = np.diff(d1) / (0.5 * (var[2:] - var[:-2]))
    flips = np.flatnonzero(np.sign(d2[1:]) != np.sign(d2[:-1]))
    brackets = [(var[i + 1], var[i + 2]) for i in flips]
    inflection = any(a <= 1.0 <= b for a, b in brackets)
    ok = abs(g_half - 0.5) <= 1e-3 and increasing and inflection
    record(7, ok, f"G(0.5)={g_half:.6f}, increasing={increasing}, second-difference sign "
                  f"changes at sigma^2 in {[(round(a, 3), round(b, 3)) for a, b in brackets]}")


def test_08_random_process():
    dist = steady_distribution(0.05)
    path = simulate.simulate_process(0.05, 1_000_000, 0).w_sequence
    mean, var = float(path.mean()), float(path.var())
    ks = {n: np.mean([simulate.ks_distance(simulate.simulate_process(0.05, n, s).w_sequence, dist)
                      for s in range(5)]) for n in (10 ** 6, 10 ** 7)}
    ok = (0.995 <= mean <= 1.005 and 0.045 <= var <= 0.060 and ks[10 ** 6] <= 0.02
          and ks[10 ** 7] < ks[10 ** 6])
    record(8, ok, f"mean {mean:.4f}, var {var:.4f}, mean KS {ks[10**6]:.4f} (1e6) -> {ks[10**7]:.4f} (1e7)")


def test_09_oscillation_periods():
    p9 = analysis.detect_oscillations(steady_distribution(0.9)).log10_period
    p99 = analysis.detect_oscillations(steady_distribution(0.99)).log10_period
    ok = abs(p9 - 1.0) <= 0.15 and abs(p99 - 2.0) <= 0.3
    record(9, ok, f"period {p9:.3f} decades at f=0.9, {p99:.3f} at f=0.99")


def test_10_simulation_physics():
    worst_drift, violations = 0.0, 0
    for f in (0.05, 0.5, 0.95):
        traj = simulate.run(simulate.init_population(1000, "uniform:0:100", 1), f, 10_000,
                            entropy=False, gini=False)
        worst_drift = max(worst_drift, float(traj.total_drift.max()))
        violations += traj.phase_space_violations()
    record(10, worst_drift <= 1e-10 and violations == 0,
           f"max drift {worst_drift:.1e}, phase-space violations {violations} over 3 x 1e4 steps")


def test_11_variance_relaxation():
    parts, ok = [], True
    for f in (0.1, 0.3, 0.5):
        start = time.perf_counter()
        steps = int(math.ceil(5 / (f * (1 - f))))
        traj = simulate.run(simulate.init_population(100_000, "delta:1", 0), f, steps,
                            entropy=False, gini=False)
        rate = simulate.fit_variance_rate(traj)
        rel = abs(rate / (f * (1 - f)) - 1)
        elapsed = time.perf_counter() - start
        ok &= rel <= 0.1 and elapsed <= 300
        parts.append(f"f={f}: rate {rate:.4f} ({rel:.1%}, {elapsed:.1f} s)")
    record(11, ok, "; ".join(parts))


def test_12_inversion_suite():
    pairs_ok = all(
        np.allclose(np.real(invert(PAIRS[name][0], W, method)), PAIRS[name][1](W),
                    atol=RULE_TOLERANCE[method][0], rtol=RULE_TOLERANCE[method][1])
        for method in inversion.METHODS for name in PAIRS)
    worst, parts = 0.0, []
    for f in (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99):
        dist = invert_distribution(GiverTransform(f), method="talbot", cross_check="euler")
        rel = dist.cross_check["max_rel_diff"]
        worst = max(worst, rel)
        parts.append(f"f={f}:{rel:.1e}")
    record(12, pairs_ok and worst <= 1e-5,
           f"closed-form pairs ok={pairs_ok}; Euler/Talbot max rel diff {worst:.1e} (<= 1e-5) "
           + " ".join(parts))
