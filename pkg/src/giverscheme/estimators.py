"""scikit-learn style wrappers around the functional API.

The numerical work lives in the functional modules; these classes only hold
parameters, validate them in ``fit`` and keep fitted results as trailing
underscore attributes, so they support ``get_params``/``set_params``/``clone``.
"""

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_scalar
from sklearn.utils.validation import check_is_fitted

from . import analysis, inversion, simulate
from ._validation import check_fraction
from .moments import steady_moments, steady_variance


class GiverSteadyState(BaseEstimator):
    """Steady-state wealth density of the giver scheme at fraction ``f``.

    ``fit`` inverts the transform on a default log grid; ``predict`` inverts
    it directly at the requested wealths (no interpolation).

    Parameters
    ----------
    f : float
    method, cross_check : str
        Inversion rule and the rule used to cross-check it; ``"auto"`` picks
        them by ``f`` (see :func:`giverscheme.inversion.select_methods`).
    points_per_decade : int
    trust_floor : float
    backend : {"invariant", "ray"}

    Attributes
    ----------
    transform_ : GiverTransform
    distribution_ : WealthDistribution
    moments_ : MomentSequence
        Exact ``mu_0..mu_2``.
    entropy_, gini_ : float
    """

    def __init__(self, f=0.5, method="auto", cross_check="auto",
                 points_per_decade=40, trust_floor=inversion.TRUST_FLOOR,
                 backend="invariant"):
        self.f = f
        self.method = method
        self.cross_check = cross_check
        self.points_per_decade = points_per_decade
        self.trust_floor = trust_floor
        self.backend = backend

    def _validate(self):
        f = check_fraction(self.f)
        check_scalar(self.points_per_decade, "points_per_decade", numbers.Integral, min_val=4)
        check_scalar(self.trust_floor, "trust_floor", numbers.Real, min_val=0.0,
                     include_boundaries="neither")
        for name in ("method", "cross_check"):
            value = getattr(self, name)
            if value is not None and value not in (*inversion.METHODS, inversion.AUTO):
                raise ValueError(f"{name}={value!r} not in {inversion.METHODS}")
        return f

    def fit(self, X=None, y=None):
        """Solve and invert; ``X`` and ``y`` are ignored."""
        f = self._validate()
        self.transform_ = inversion.GiverTransform(f, backend=self.backend)
        grid = inversion.default_wealth_grid(f, self.points_per_decade)
        self.distribution_ = inversion.invert_distribution(
            self.transform_, grid, method=self.method, cross_check=self.cross_check,
            trust_floor=self.trust_floor)
        self.moments_ = steady_moments(f, 2)
        self.variance_ = steady_variance(f)
        self.entropy_ = analysis.boltzmann_entropy(self.distribution_).S
        self.gini_ = analysis.gini(self.distribution_).G
        return self

    def predict(self, X):
        """Density ``p_s(w)`` at the wealths ``X``."""
        check_is_fitted(self, "transform_")
        w = np.asarray(X, float).ravel()
        return np.asarray(inversion.invert(self.transform_, w, self.method), float)

    def score_samples(self, X):
        """Log-density at ``X``; values at or below zero give ``-inf``."""
        p = self.predict(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)

    def transform(self, X):
        """Laplace transform ``g(z)`` at the complex arguments ``X``."""
        check_is_fitted(self, "transform_")
        return self.transform_(np.asarray(X, complex))


class GiverSchemeSimulator(BaseEstimator):
    """Agent-based run of the giver scheme.

    Attributes
    ----------
    population_ : AgentPopulation
    trajectory_ : Trajectory
    """

    def __init__(self, f=0.5, n_agents=10_000, n_steps=100, init="uniform:0:100",
                 seed=0, record_entropy=True, record_gini=True):
        self.f = f
        self.n_agents = n_agents
        self.n_steps = n_steps
        self.init = init
        self.seed = seed
        self.record_entropy = record_entropy
        self.record_gini = record_gini

    def fit(self, X=None, y=None):
        f = check_fraction(self.f)
        check_scalar(self.n_steps, "n_steps", numbers.Integral, min_val=1)
        check_scalar(self.seed, "seed", numbers.Integral, min_val=0)
        self.population_ = simulate.init_population(self.n_agents, self.init, self.seed)
        self.trajectory_ = simulate.run(self.population_, f, self.n_steps,
                                        entropy=self.record_entropy, gini=self.record_gini)
        return self

    def histogram(self, bin_width):
        check_is_fitted(self, "population_")
        return simulate.histogram(self.population_, bin_width)

    def relaxation_rate(self):
        check_is_fitted(self, "trajectory_")
        return simulate.fit_variance_rate(self.trajectory_)


class AsymmetricRandomWalk(BaseEstimator):
    """Single-agent process ``w -> w + f`` or ``w -> (1 - f) w``.

    Attributes
    ----------
    path_ : ProcessPath
    mean_, variance_ : float
        Sample statistics of the whole path.
    """

    def __init__(self, f=0.05, n_iterations=1_000_000, seed=0):
        self.f = f
        self.n_iterations = n_iterations
        self.seed = seed

    def fit(self, X=None, y=None):
        f = check_fraction(self.f)
        check_scalar(self.n_iterations, "n_iterations", numbers.Integral, min_val=1)
        self.path_ = simulate.simulate_process(f, self.n_iterations, self.seed)
        w = self.path_.w_sequence
        self.mean_ = float(w.mean())
        self.variance_ = float(w.var())
        return self

    def ks_distance(self, distribution):
        check_is_fitted(self, "path_")
        return simulate.ks_distance(self.path_.w_sequence, distribution)
