"""Plot-ready data tables, one builder per named figure (fig1 to fig7).

Every builder takes an output directory and a seed and returns the list of
files it wrote.  Nothing is rendered; the CSVs are meant for any plotting
tool.
"""

import math
from pathlib import Path

import numpy as np

from . import analysis, inversion, simulate, solver
from .io import write_csv
from .moments import steady_variance

SMALL_F = (0.5, 0.25, 0.1, 0.05, 0.025)
LARGE_F = (0.5, 0.75, 0.9, 0.95, 0.99)


def f_sweep(n=40, lo=0.01, hi=0.9):
    """``n`` values log-spaced in ``[lo, hi]``."""
    return np.geomspace(lo, hi, n)


def _distribution_table(f):
    dist = inversion.invert_distribution(inversion.GiverTransform(f))
    return {"w": dist.w, "p": dist.p, "trusted_flag": dist.trusted.astype(int),
            "method": [dist.method] * len(dist.w)}


def fig1(out, seed=0, f=0.1, z_max=1e4, thin=10):
    """``g`` along three rays at ``f = 0.1`` plus ``|g|`` over a patch of the plane."""
    files = []
    for deg in (0, 45, 90):
        grid = solver.solve_ray(f, z_max * np.exp(1j * math.radians(deg)))
        sel = slice(None, None, thin)
        files.append(write_csv(Path(out) / f"fig1_ray_{deg:03d}.csv", {
            "log10_abs_z": grid.u[sel], "re_g": grid.values.real[sel],
            "im_g": grid.values.imag[sel], "abs_g": np.abs(grid.values[sel])}))
    x = np.linspace(-20.0, 20.0, 81)
    X, Y = np.meshgrid(x, x)
    G = solver.invariant_transform(f, X + 1j * Y)
    files.append(write_csv(Path(out) / "fig1_plane.csv", {
        "re_z": X.ravel(), "im_z": Y.ravel(), "abs_g": np.abs(G).ravel()}))
    return files


def fig2(out, seed=0, fs=SMALL_F):
    """Steady-state densities for ``f <= 1/2``."""
    return [write_csv(Path(out) / f"fig2_f{f:g}.csv", _distribution_table(f)) for f in fs]


def fig3(out, seed=0, fs=LARGE_F):
    """Steady-state densities for ``f >= 1/2`` (log-periodic structure)."""
    return [write_csv(Path(out) / f"fig3_f{f:g}.csv", _distribution_table(f)) for f in fs]


def fig4(out, seed=0, n_agents=400_000, n_steps=100, bin_width=1.0):
    """Agent histograms after 100 generations against the inverted density."""
    files = []
    for f in (0.95, 0.05):
        pop = simulate.init_population(n_agents, "uniform:0:100", seed)
        simulate.run(pop, f, n_steps, entropy=False, gini=False)
        hist = simulate.histogram(pop, bin_width)
        dist = inversion.invert_distribution(inversion.GiverTransform(f))
        files.append(write_csv(Path(out) / f"fig4_f{f:g}.csv", {
            "bin_low": hist.bin_edges[:-1], "bin_high": hist.bin_edges[1:],
            "count": hist.counts, "expected": hist.expected_counts(dist)}))
    return files


def _steady_sweep(fs):
    rows = {"f": [], "variance": [], "entropy": [], "gini": []}
    for f in fs:
        dist = inversion.invert_distribution(inversion.GiverTransform(f))
        rows["f"].append(f)
        rows["variance"].append(steady_variance(f))
        rows["entropy"].append(analysis.boltzmann_entropy(dist).S)
        rows["gini"].append(analysis.gini(dist).G)
    return rows


def fig5a(out, seed=0, fs=None):
    """Steady-state entropy against variance over an ``f`` sweep."""
    rows = _steady_sweep(f_sweep() if fs is None else fs)
    return [write_csv(Path(out) / "fig5a.csv", {
        "f": rows["f"], "variance": rows["variance"], "entropy": rows["entropy"]})]


def fig5b(out, seed=0, f=0.058, n_steps=100):
    """Entropy trajectory from the zero-entropy two-level start."""
    pop = simulate.init_population(None, "eq13", seed)
    traj = simulate.run(pop, f, n_steps, gini=False)
    return [write_csv(Path(out) / "fig5b.csv", {"step": traj.step, "entropy": traj.entropy})]


def fig6(out, seed=0, f=0.05, n_iterations=1_000_000, bins=200):
    """Random-process histogram against the inverted density."""
    path = simulate.simulate_process(f, n_iterations, seed)
    hist = simulate.limiting_distribution(path, bins)
    edges = hist.bin_edges
    dens = hist.counts / (hist.n_agents * np.diff(edges))
    dist = inversion.invert_distribution(inversion.GiverTransform(f))
    centres = 0.5 * (edges[1:] + edges[:-1])
    p = np.interp(centres, dist.w, np.where(dist.trusted, dist.p, 0.0), left=0.0, right=0.0)
    return [write_csv(Path(out) / "fig6.csv", {
        "bin_low": edges[:-1], "bin_high": edges[1:], "xi": dens, "p_s": p})]


def fig7(out, seed=0, fs=None):
    """Steady-state Gini coefficient against variance over an ``f`` sweep."""
    rows = _steady_sweep(f_sweep() if fs is None else fs)
    return [write_csv(Path(out) / "fig7.csv", {
        "f": rows["f"], "variance": rows["variance"], "gini": rows["gini"]})]


FIGURES = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5a": fig5a,
           "fig5b": fig5b, "fig6": fig6, "fig7": fig7}
