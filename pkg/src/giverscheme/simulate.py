"""Agent-based simulation of the giver scheme and the one-agent random process.

Random numbers come from ``numpy.random.default_rng(seed)`` (PCG64 seeded
through ``SeedSequence``); the same seed and configuration give bit-identical
trajectories on one platform.

Each generation pairs agents by a uniform random permutation, adjacent
entries forming pairs, and a fair coin per pair picks the giver.  With an
odd number of agents the last entry of the permutation, a uniformly random
agent, sits the generation out.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import integrate, optimize

from ._validation import check_fraction, check_positive, check_positive_int
from .analysis import gini_sample, sample_entropy
from .io import write_csv, write_json

# phase-space bounds are checked with this relative rounding slack
PHASE_SPACE_RTOL = 1e-12


# --- initial conditions ------------------------------------------------------

@dataclass(frozen=True)
class InitSpec:
    """Initial wealth distribution.

    ``kind`` is one of ``uniform`` (params ``low, high``), ``eq13`` (params
    ``p1, p2, w2``; empty means the zero-entropy solution), ``delta``
    (param ``w0``) or ``list`` (explicit wealths).
    """

    kind: str
    params: tuple = ()

    def to_dict(self):
        return {"kind": self.kind, "params": list(self.params)}

    def __str__(self):
        if self.kind == "list":
            return f"list:{len(self.params)}"
        return ":".join([self.kind] + [repr(float(p)) for p in self.params])


def parse_init_spec(text):
    """Parse ``uniform:0:100``, ``eq13``, ``eq13:p1:p2:w2`` or ``delta:1``."""
    parts = text.split(":")
    kind = parts[0].strip().lower()
    try:
        params = tuple(float(p) for p in parts[1:])
    except ValueError as exc:
        raise ValueError(f"bad numeric parameter in init spec {text!r}") from exc
    spec = InitSpec(kind, params)
    _check_spec(spec)
    return spec


def two_level_zero_entropy():
    """``(p1, p2, w2)`` of the two-level unit-mean density with zero entropy.

    The density is ``p1`` on ``[0, 1)`` and ``p2`` on ``[1, w2)``; the three
    numbers solve normalisation, unit mean and ``S = 0``.
    """
    def eqs(x):
        p1, p2, w2 = x
        return [p1 + p2 * (w2 - 1.0) - 1.0,
                0.5 * p1 + 0.5 * p2 * (w2 ** 2 - 1.0) - 1.0,
                p1 * math.log(p1) + p2 * (w2 - 1.0) * math.log(p2)]

    sol, info, ier, msg = optimize.fsolve(eqs, [0.3, 1.7, 1.42], full_output=True, xtol=1e-14)
    if ier != 1:
        raise RuntimeError(f"two-level solve failed: {msg}")
    return tuple(float(v) for v in sol)


def _check_spec(spec):
    k, p = spec.kind, spec.params
    if k == "uniform":
        if len(p) != 2 or not (0.0 <= p[0] < p[1]):
            raise ValueError("uniform needs 0 <= low < high")
    elif k == "eq13":
        if len(p) not in (0, 3):
            raise ValueError("eq13 takes no parameters or p1:p2:w2")
        if p and (p[0] < 0 or p[1] < 0 or p[2] <= 1.0):
            raise ValueError("eq13 needs nonnegative densities and w2 > 1")
    elif k == "delta":
        if len(p) != 1 or p[0] < 0:
            raise ValueError("delta needs one nonnegative wealth")
    elif k == "list":
        if len(p) < 2 or min(p) < 0:
            raise ValueError("list needs at least two nonnegative wealths")
    else:
        raise ValueError(f"unknown initial distribution {k!r}")


def two_level_lattice(p1, p2, w2, agents_per_unit=100, units=1000):
    """Integer-wealth population for a two-level density.

    ``agents_per_unit`` agents sit at each of ``0..units`` and
    ``round(agents_per_unit * p2 / p1)`` at each of ``units+1..round(units*w2)``.
    With the zero-entropy parameters this gives 337123 agents.
    """
    n_high = round(agents_per_unit * p2 / p1)
    top = round(units * w2)
    low = np.repeat(np.arange(0, units + 1, dtype=float), agents_per_unit)
    high = np.repeat(np.arange(units + 1, top + 1, dtype=float), n_high)
    return np.concatenate([low, high])


@dataclass(eq=False)
class AgentPopulation:
    """Wealths of ``N`` agents plus the generation counter and RNG state."""

    wealth: np.ndarray
    seed: int
    step: int = 0
    rng: np.random.Generator = field(default=None, repr=False)
    total: float = field(default=None)

    def __post_init__(self):
        self.wealth = np.asarray(self.wealth, dtype=float)
        if self.wealth.ndim != 1 or len(self.wealth) < 2:
            raise ValueError("need at least two agents")
        if np.any(self.wealth < 0) or not np.all(np.isfinite(self.wealth)):
            raise ValueError("wealths must be finite and nonnegative")
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)
        if self.total is None:
            self.total = math.fsum(self.wealth)

    @property
    def n_agents(self):
        return len(self.wealth)

    @property
    def mean(self):
        return self.total / self.n_agents

    def copy(self):
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng.bit_generator.state
        return AgentPopulation(self.wealth.copy(), self.seed, self.step, rng, self.total)


def init_population(n_agents, spec, seed):
    """Build a population from an :class:`InitSpec` (or its string form).

    ``n_agents=None`` is allowed for ``eq13`` (the 337123-agent integer
    lattice) and ``list``.  Otherwise wealths are drawn from the spec with
    the seeded generator.
    """
    if isinstance(spec, str):
        spec = parse_init_spec(spec)
    _check_spec(spec)
    seed = check_positive_int(seed, "seed", min_val=0)
    rng = np.random.default_rng(seed)
    kind, p = spec.kind, spec.params
    if kind == "list":
        wealth = np.array(p, float)
        if n_agents is not None and n_agents != len(wealth):
            raise ValueError("n_agents does not match the explicit list")
        return AgentPopulation(wealth, seed, rng=rng)
    if kind == "eq13" and n_agents is None:
        wealth = two_level_lattice(*(p or two_level_zero_entropy()))
        return AgentPopulation(wealth, seed, rng=rng)
    n_agents = check_positive_int(n_agents, "n_agents", min_val=2)
    if kind == "uniform":
        wealth = rng.uniform(p[0], p[1], n_agents)
    elif kind == "delta":
        wealth = np.full(n_agents, p[0])
    else:
        p1, p2, w2 = p or two_level_zero_entropy()
        mass_low = p1
        mass_high = p2 * (w2 - 1.0)
        u = rng.random(n_agents)
        low = u < mass_low / (mass_low + mass_high)
        wealth = np.where(low, rng.random(n_agents), 1.0 + (w2 - 1.0) * rng.random(n_agents))
    return AgentPopulation(wealth, seed, rng=rng)


# --- dynamics ----------------------------------------------------------------

def transfer(wealth, f, givers, receivers):
    """Apply ``w_g -> (1-f) w_g``, ``w_r -> w_r + f w_g`` in place for given pairs."""
    d = f * wealth[givers]
    wealth[givers] -= d
    wealth[receivers] += d
    return wealth


def _pairs(rng, n):
    perm = rng.permutation(n)
    m = n // 2
    a, b = perm[0:2 * m:2], perm[1:2 * m:2]
    coin = rng.random(m) < 0.5
    return np.where(coin, a, b), np.where(coin, b, a)


def step(pop, f):
    """Advance one generation in place and return the population."""
    f = check_fraction(f)
    givers, receivers = _pairs(pop.rng, pop.n_agents)
    transfer(pop.wealth, f, givers, receivers)
    pop.step += 1
    return pop


@dataclass(frozen=True)
class Trajectory:
    """Per-generation statistics of the unit-mean-normalised wealths.

    ``norm_w`` and ``norm_dw`` are Euclidean norms after scaling the total
    wealth to 1; ``norm_dw`` at row ``t`` is the change made by generation ``t``.
    """

    f: float
    n_agents: int
    step: np.ndarray
    variance: np.ndarray
    entropy: np.ndarray
    gini: np.ndarray
    norm_w: np.ndarray
    norm_dw: np.ndarray
    total_drift: np.ndarray

    def columns(self):
        return {"step": self.step, "variance": self.variance, "entropy": self.entropy,
                "gini": self.gini, "norm_w": self.norm_w, "norm_dw": self.norm_dw}

    def to_csv(self, path):
        return write_csv(path, self.columns())

    def phase_space_violations(self, rtol=PHASE_SPACE_RTOL):
        """Count rows breaking ``|dw| <= sqrt(2) f |w_prev|`` or ``N^-1/2 <= |w| <= 1``."""
        dw_bound = math.sqrt(2.0) * self.f * self.norm_w[:-1] * (1.0 + rtol)
        bad_dw = np.sum(self.norm_dw[1:] > dw_bound)
        lo = self.n_agents ** -0.5 * (1.0 - rtol)
        bad_w = np.sum((self.norm_w < lo) | (self.norm_w > 1.0 + rtol))
        return int(bad_dw + bad_w)


def _stats(w, total, with_entropy, with_gini):
    x = w * (len(w) / total)
    var = float(np.var(x))
    S = sample_entropy(w).S if with_entropy else float("nan")
    G = gini_sample(w) if with_gini else float("nan")
    return var, S, G, float(np.linalg.norm(w) / total)


def run(pop, f, n_steps, entropy=True, gini=True):
    """Advance ``n_steps`` generations, recording statistics after each.

    Row 0 describes the starting population.  Entropy uses a
    Freedman-Diaconis histogram of the unit-mean wealths; it and the Gini
    coefficient can be switched off for speed.
    """
    f = check_fraction(f)
    n_steps = check_positive_int(n_steps, "n_steps")
    rows = np.empty((n_steps + 1, 6))
    total0 = pop.total
    var, S, G, nw = _stats(pop.wealth, total0, entropy, gini)
    rows[0] = (pop.step, var, S, G, nw, 0.0)
    drift = np.zeros(n_steps + 1)
    for t in range(1, n_steps + 1):
        before = pop.wealth.copy()
        step(pop, f)
        ndw = float(np.linalg.norm(pop.wealth - before) / total0)
        var, S, G, nw = _stats(pop.wealth, total0, entropy, gini)
        rows[t] = (pop.step, var, S, G, nw, ndw)
        drift[t] = abs(math.fsum(pop.wealth) - total0) / total0
    return Trajectory(f=f, n_agents=pop.n_agents, step=rows[:, 0].astype(int),
                      variance=rows[:, 1], entropy=rows[:, 2], gini=rows[:, 3],
                      norm_w=rows[:, 4], norm_dw=rows[:, 5], total_drift=drift)


def fit_variance_rate(traj, skip=0):
    """Per-generation relaxation rate of the variance.

    Fits ``sigma^2(t) = B + A (1 - r)**t`` by nonlinear least squares and
    returns ``r``.  Generations are synchronous, so the second moment obeys
    ``mu2(t+1) - mu2(t) = -f(1-f) mu2(t) + f`` exactly, and ``r`` estimates
    ``f(1-f)``.
    """
    t = traj.step[skip:].astype(float)
    y = traj.variance[skip:]

    def model(t, B, A, r):
        return B + A * (1.0 - r) ** t

    r0 = traj.f * (1.0 - traj.f)
    p0 = (y[-1], y[0] - y[-1], min(max(r0, 1e-3), 0.9))
    popt, _ = optimize.curve_fit(model, t - t[0], y, p0=p0, maxfev=20000)
    return float(popt[2])


# --- histograms --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PopulationHistogram:
    """Counts of agents per wealth bin (raw monetary units).

    ``sample`` keeps the wealths the histogram was built from, so entropy
    estimates can be rebinned; it is not exported.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    n_agents: int
    mean_wealth: float
    sample: np.ndarray = field(default=None, repr=False)

    def expected_counts(self, density):
        """Counts predicted by a unit-mean density ``p``: ``N p(w/<w>) dw / <w>``.

        ``density`` is a callable or an object with ``w``/``p`` arrays (linear
        interpolation, zero outside).
        """
        centres = 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])
        x = centres / self.mean_wealth
        if callable(density):
            p = density(x)
        else:
            p = np.interp(x, density.w, density.p, left=0.0, right=0.0)
        return self.n_agents * p * np.diff(self.bin_edges) / self.mean_wealth

    def to_csv(self, path):
        return write_csv(path, {"bin_low": self.bin_edges[:-1],
                                "bin_high": self.bin_edges[1:], "count": self.counts})


def histogram(pop_or_sample, bin_width):
    """Histogram with bins of ``bin_width`` starting at zero."""
    bin_width = check_positive(bin_width, "bin_width")
    w = (pop_or_sample.wealth if isinstance(pop_or_sample, AgentPopulation)
         else np.asarray(pop_or_sample, float))
    top = max(float(w.max()), bin_width)
    n_bins = int(math.floor(top / bin_width)) + 1
    edges = bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(w, bins=edges)
    return PopulationHistogram(bin_edges=edges, counts=counts, n_agents=len(w),
                               mean_wealth=float(w.mean()), sample=w.copy())


# --- one-agent process -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProcessPath:
    """Path ``w_1 = 1, w_{i+1} = w_i + f`` or ``(1-f) w_i``."""

    f: float
    w_sequence: np.ndarray
    iterations: int

    def to_csv(self, path):
        return write_csv(path, {"i": np.arange(1, len(self.w_sequence) + 1),
                                "w": self.w_sequence})


@njit(cache=True)
def _walk(f, gains):
    out = np.empty(gains.shape[0] + 1)
    w = 1.0
    out[0] = w
    for i in range(gains.shape[0]):
        if gains[i]:
            w = w + f
        else:
            w = w - f * w
        out[i + 1] = w
    return out


def simulate_process(f, n_iterations, seed=None, coins=None):
    """Run the asymmetric random process for ``n_iterations`` steps.

    ``coins`` (booleans, True meaning a gain of ``f``) overrides the seeded
    fair coin, e.g. to force a path in tests.
    """
    f = check_fraction(f)
    n_iterations = check_positive_int(n_iterations, "n_iterations")
    if coins is None:
        gains = np.random.default_rng(seed).random(n_iterations) < 0.5
    else:
        gains = np.asarray(coins, bool)
        if gains.shape != (n_iterations,):
            raise ValueError("coins must have length n_iterations")
    return ProcessPath(f=f, w_sequence=_walk(f, gains), iterations=n_iterations)


def limiting_distribution(path, bins=200):
    """Normalised histogram of every visited wealth (the path's empirical density).

    Returns a :class:`PopulationHistogram` whose ``sample`` is the path.
    """
    w = path.w_sequence if isinstance(path, ProcessPath) else np.asarray(path, float)
    counts, edges = np.histogram(w, bins=bins, range=(0.0, float(w.max())))
    return PopulationHistogram(bin_edges=edges, counts=counts, n_agents=len(w),
                               mean_wealth=float(w.mean()), sample=w)


def density_cdf(dist):
    """CDF of an inverted density on its trusted run, as ``(w, F)`` arrays."""
    w = np.asarray(dist.w, float)
    p = np.where(dist.trusted, dist.p, 0.0)
    F = integrate.cumulative_simpson(p * w, x=np.log(w), initial=0.0)
    return w, F / F[-1]


def ks_distance(sample, dist):
    """Kolmogorov-Smirnov distance between a sample and an inverted density."""
    x = np.sort(np.asarray(sample, float))
    w, F = density_cdf(dist)
    model = np.interp(x, w, F, left=0.0, right=1.0)
    n = len(x)
    upper = np.arange(1, n + 1) / n - model
    lower = model - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


def run_manifest(pop_seed, f, n_agents, n_steps, spec):
    return {"seed": pop_seed, "f": f, "N": n_agents, "steps": n_steps,
            "init": spec.to_dict() if isinstance(spec, InitSpec) else str(spec)}


def write_run_manifest(path, manifest):
    return write_json(path, manifest)
