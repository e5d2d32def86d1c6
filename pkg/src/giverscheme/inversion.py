"""Numerical Laplace inversion of the steady-state transform.

All four rules have the form ``p(w) ~ sum_k Re[c_k F(s_k / w)] / w`` and are
vectorised over ``w``: every node argument for every ``w`` goes to the
evaluator in one batch.

* Euler and Talbot follow the node/weight construction of Abate and Whitt's
  unified framework.  Euler samples ``Re z > 0``; Talbot's contour crosses into
  ``Re z < 0``.
* Gaver-Stehfest samples the positive real axis.
* Zakian uses five fixed complex-conjugate pairs.
"""

import abc
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ._validation import check_fraction, check_positive_int, check_wealth_grid
from .exceptions import EvalDomainError, GiverSchemeError, NumericalError
from .io import write_csv, write_json
from .moments import asymptotic_exponent, steady_variance
from .solver import (DEFAULT_CONFIG, evaluate, invariant_complement,
                     invariant_transform, invariant_transform_rows, solve_ray)

TRUST_FLOOR = 1e-8
DEFAULT_TERMS = {"euler": 16, "talbot": 20, "stehfest": 14, "zakian": 5}
METHODS = tuple(DEFAULT_TERMS)
#: (atol, rtol) each rule meets at its default terms on smooth closed-form
#: pairs (exp(-w), 1, w, w exp(-w), w**2) over w in [0.1, 10]
RULE_TOLERANCE = {"euler": (1e-10, 1e-8), "talbot": (1e-12, 1e-10),
                  "stehfest": (1e-3, 1e-5), "zakian": (1e-5, 1e-6)}
AUTO = "auto"
# Below this fraction the density is a narrow peak at w = 1 and g ~ exp(-z)
# grows on Talbot's left-plane nodes; a 20-term Euler sum is then the only
# rule that still closes the moments (about 1e-5 at f = 0.01).
SMALL_F_CROSSOVER = 0.035
SMALL_F_RULES = (("euler", 20), ("talbot", 32))
LARGE_F_RULES = (("talbot", DEFAULT_TERMS["talbot"]), ("euler", DEFAULT_TERMS["euler"]))

DOMAIN_FULL = "full_plane"
DOMAIN_RIGHT = "right_half_plane"
DOMAIN_REAL = "positive_real_axis"


# --- evaluators --------------------------------------------------------------

class TransformEvaluator(abc.ABC):
    """A vectorised map ``z -> F(z)`` with a declared domain of validity.

    Subclasses implement :meth:`_evaluate`.  Instances must be pure: equal
    inputs give equal outputs, so one evaluator can be shared freely.
    """

    domain = DOMAIN_FULL

    @abc.abstractmethod
    def _evaluate(self, z):
        ...

    def check_domain(self, z):
        z = np.asarray(z, dtype=complex)
        if not np.all(np.isfinite(z)):
            raise EvalDomainError("non-finite inversion node")
        if self.domain == DOMAIN_RIGHT and np.any(z.real <= 0):
            raise EvalDomainError(
                f"{type(self).__name__} is defined for Re z > 0 only; "
                f"got a node with Re z = {z.real.min():.4g}")
        if self.domain == DOMAIN_REAL and (np.any(z.imag != 0) or np.any(z.real <= 0)):
            raise EvalDomainError(f"{type(self).__name__} accepts positive real z only")
        return z

    def __call__(self, z):
        z = self.check_domain(z)
        out = np.asarray(self._evaluate(z), dtype=complex)
        return out[()] if out.ndim == 0 else out


class ClosedFormTransform(TransformEvaluator):
    """Wrap a vectorised callable, e.g. ``lambda z: 1 / (1 + z)``."""

    def __init__(self, func, domain=DOMAIN_FULL, name=None):
        self.func = func
        self.domain = domain
        self.name = name or getattr(func, "__name__", "closed_form")

    def _evaluate(self, z):
        return self.func(z)

    def __repr__(self):
        return f"ClosedFormTransform({self.name!r}, domain={self.domain!r})"


class GiverTransform(TransformEvaluator):
    """Steady-state transform ``g`` of the giver scheme at fraction ``f``.

    Parameters
    ----------
    f : float
    backend : {"invariant", "ray"}
        ``"invariant"`` sweeps the interpolation-free lattice for every node
        and is valid in the whole plane.  ``"ray"`` solves one ray per node
        direction and interpolates; it is restricted to ``Re z > 0``.
    config : SolverConfig, optional
    """

    def __init__(self, f, backend="invariant", config=None):
        self.f = check_fraction(f)
        if backend not in ("invariant", "ray"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.config = config or DEFAULT_CONFIG
        self.domain = DOMAIN_FULL if backend == "invariant" else DOMAIN_RIGHT
        self._rays = {}

    def __repr__(self):
        return f"GiverTransform(f={self.f!r}, backend={self.backend!r})"

    def complement(self, z):
        """``1 - g(z)``, accurate where ``g`` is close to 1."""
        z = self.check_domain(z)
        if self.backend == "invariant":
            return invariant_complement(self.f, z, self.config)
        return 1.0 - self._evaluate(z)

    def _evaluate(self, z):
        if self.backend == "invariant":
            return invariant_transform(self.f, z, self.config)
        return self._evaluate_rays(z)

    def lattice_layout(self, w):
        """``(stride, classes)`` if ``w`` is log-uniform and commensurate with ``f``.

        The grid qualifies when its log step is ``stride * log(1/f)`` or
        ``log(1/f) / classes``.  Node arguments for the points of one residue
        class (index mod ``classes``) are then rows ``0, stride, 2 stride, ...``
        of a single invariant lattice, so one sweep per node and class serves
        every ``w``.  Returns None otherwise.
        """
        if self.backend != "invariant" or len(w) < 3:
            return None
        lw = np.log(w)
        step = lw[1] - lw[0]
        if np.max(np.abs(np.diff(lw) - step)) > 1e-9 * max(1.0, abs(lw).max()) * 1e-3 + 1e-12:
            return None
        unit = -math.log(self.f)
        for stride, classes in ((round(step / unit), 1), (1, round(unit / step))):
            if stride >= 1 and classes >= 1 and abs(stride * unit - classes * step) <= 1e-9 * unit:
                return stride, classes
        return None

    def evaluate_lattice(self, nodes, w, layout):
        """``g(nodes[j] / w[i])`` on a grid accepted by :meth:`lattice_layout`."""
        stride, classes = layout
        nodes = np.asarray(nodes, complex)
        self.check_domain(nodes / w[0])
        self.check_domain(nodes / w[-1])
        out = np.empty((len(w), len(nodes)), complex)
        for c in range(min(classes, len(w))):
            rows = np.arange(c, len(w), classes)
            for j, node in enumerate(nodes):
                out[rows, j] = invariant_transform_rows(
                    self.f, node / w[c], stride, len(rows), self.config)
        return out

    def _evaluate_rays(self, z):
        # node arguments for a fixed rule sit on a few fixed rays; solve each
        # ray once up to the largest modulus requested and reuse it
        flat = z.ravel()
        out = np.empty(flat.shape, complex)
        angles = np.round(np.angle(flat), 12)
        for a in np.unique(angles):
            sel = angles == a
            zmax = np.max(np.abs(flat[sel]))
            grid = self._rays.get(a)
            if grid is None or 10.0 ** grid.u[-1] < zmax:
                grid = solve_ray(self.f, max(zmax, 1e-3) * np.exp(1j * a), self.config)
                self._rays[a] = grid
            # project onto the ray to absorb rounding in the argument
            zz = np.abs(flat[sel]) * np.exp(1j * grid.theta)
            out[sel] = evaluate(grid, zz)
        return out.reshape(z.shape)


def as_evaluator(g):
    if isinstance(g, TransformEvaluator):
        return g
    if callable(g):
        return ClosedFormTransform(g)
    raise TypeError("g must be a TransformEvaluator or a callable")


# --- rule tables -------------------------------------------------------------

def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False
    return arrays


@lru_cache(maxsize=None)
def euler_rule(M):
    """Nodes ``beta_k`` and weights ``eta_k``, ``k = 0..2M``."""
    M = check_positive_int(M, "terms")
    beta = M * math.log(10.0) / 3.0 + 1j * math.pi * np.arange(2 * M + 1)
    xi = np.zeros(2 * M + 1)
    xi[0] = 0.5
    xi[1:M + 1] = 1.0
    xi[2 * M] = 2.0 ** -M
    for k in range(1, M):
        xi[2 * M - k] = xi[2 * M - k + 1] + 2.0 ** -M * math.comb(M, k)
    eta = 10.0 ** (M / 3.0) * (-1.0) ** np.arange(2 * M + 1) * xi
    return _freeze(beta, eta.astype(complex))


@lru_cache(maxsize=None)
def talbot_rule(M):
    """Nodes ``delta_k`` and weights ``gamma_k`` (factor ``2/5`` folded in)."""
    M = check_positive_int(M, "terms", min_val=2)
    k = np.arange(1, M)
    cot = 1.0 / np.tan(k * math.pi / M)
    delta = np.empty(M, complex)
    delta[0] = 2.0 * M / 5.0
    delta[1:] = 2.0 * k * math.pi / 5.0 * (cot + 1j)
    gamma = np.empty(M, complex)
    gamma[0] = 0.5 * np.exp(delta[0])
    gamma[1:] = (1.0 + 1j * (k * math.pi / M) * (1.0 + cot ** 2) - 1j * cot) * np.exp(delta[1:])
    return _freeze(delta, gamma * 0.4)


@lru_cache(maxsize=None)
def stehfest_rule(N):
    """Gaver-Stehfest nodes ``k ln 2`` and weights ``V_k ln 2``, ``k = 1..N``."""
    N = check_positive_int(N, "order", min_val=2)
    if N % 2:
        raise ValueError(f"Stehfest order must be even, got {N}")
    half = N // 2
    V = []
    for k in range(1, N + 1):
        s = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            s += Fraction(j ** half * math.factorial(2 * j),
                          math.factorial(half - j) * math.factorial(j)
                          * math.factorial(j - 1) * math.factorial(k - j)
                          * math.factorial(2 * j - k))
        V.append((-1) ** (k + half) * s)
    ln2 = math.log(2.0)
    nodes = ln2 * np.arange(1, N + 1, dtype=float)
    weights = ln2 * np.array([float(v) for v in V])
    return _freeze(nodes.astype(complex), weights.astype(complex))


_ZAKIAN_ALPHA = np.array([12.83767675 + 1.666063445j, 12.22613209 + 5.012718792j,
                          10.93430308 + 8.409673116j, 8.776434715 + 11.92185389j,
                          5.225453361 + 15.72952905j])
_ZAKIAN_K = np.array([-36902.08210 + 196990.4257j, 61277.02524 - 95408.62551j,
                      -28916.56288 + 18169.18531j, 4655.361138 - 1.901528642j,
                      -118.7414011 - 141.3036911j])


@lru_cache(maxsize=None)
def zakian_rule(n_terms=5):
    if n_terms != 5:
        raise ValueError("only the five-pair Zakian constants are provided")
    return _freeze(_ZAKIAN_ALPHA.copy(), 2.0 * _ZAKIAN_K)


def _rule(method, terms):
    if method == "euler":
        return euler_rule(terms)
    if method == "talbot":
        return talbot_rule(terms)
    if method == "stehfest":
        return stehfest_rule(terms)
    if method == "zakian":
        return zakian_rule(terms)
    raise ValueError(f"unknown inversion method {method!r}; choose from {METHODS}")


def _apply_rule(g, w, nodes, weights):
    g = as_evaluator(g)
    w_arr = np.asarray(w, dtype=float)
    if np.any(~np.isfinite(w_arr)) or np.any(w_arr <= 0):
        raise ValueError("w must be finite and positive")
    flat = w_arr.ravel()
    layout = g.lattice_layout(flat) if hasattr(g, "lattice_layout") else None
    if layout is not None:
        F = g.evaluate_lattice(nodes, flat, layout)
    else:
        F = g(nodes[None, :] / flat[:, None])
    out = np.sum((weights[None, :] * F).real, axis=1) / flat
    out = out.reshape(w_arr.shape)
    return out[()] if out.ndim == 0 else out


def invert(g, w, method="euler", terms=None):
    """Invert ``g`` at ``w`` (scalar or array) with the named rule."""
    if method == AUTO:
        (method, auto_terms), _ = select_methods(getattr(g, "f", float("nan")))
        terms = auto_terms if terms is None else terms
    if method not in DEFAULT_TERMS:
        raise ValueError(f"unknown inversion method {method!r}; choose from {METHODS}")
    terms = DEFAULT_TERMS[method] if terms is None else terms
    nodes, weights = _rule(method, terms)
    return _apply_rule(g, w, nodes, weights)


def euler_invert(g, w, terms=DEFAULT_TERMS["euler"]):
    """Euler-summation Fourier-series inversion.

    ``terms`` is the Abate-Whitt ``M`` (``2M + 1`` nodes).  ``M = 16`` is
    the accuracy optimum in double precision, about eight digits at the peak.
    """
    return invert(g, w, "euler", terms)


def talbot_invert(g, w, terms=DEFAULT_TERMS["talbot"]):
    """Fixed-Talbot inversion with ``terms`` nodes on a deformed contour.

    The contour reaches ``Re z < 0``; evaluators restricted to the right
    half-plane raise :class:`EvalDomainError`.
    """
    return invert(g, w, "talbot", terms)


def stehfest_invert(g, w, order=DEFAULT_TERMS["stehfest"]):
    """Gaver-Stehfest inversion from real-axis samples at ``k ln2 / w``."""
    return invert(g, w, "stehfest", order)


def zakian_invert(g, w):
    """Zakian inversion with five complex-conjugate node pairs."""
    return invert(g, w, "zakian", 5)


# --- distributions -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WealthDistribution:
    """Density ``p(w)`` on a wealth grid, as produced by an inversion.

    ``trusted`` is False where ``p`` is below ``trust_floor`` or where the
    inversion failed; analysis routines only use trusted values.
    """

    w: np.ndarray
    p: np.ndarray
    method: str
    trust_floor: float = TRUST_FLOOR
    f: float = float("nan")
    failed: np.ndarray = None
    cross_method: str = None
    cross_p: np.ndarray = None
    cross_check: dict = field(default_factory=dict)
    moments: dict = field(default_factory=dict)

    def __post_init__(self):
        w = check_wealth_grid(self.w, "w")
        p = np.asarray(self.p, dtype=float)
        if p.shape != w.shape:
            raise ValueError("w and p must have the same shape")
        failed = (np.zeros(w.shape, bool) if self.failed is None
                  else np.asarray(self.failed, bool))
        for name, arr in (("w", w), ("p", p), ("failed", failed)):
            arr = np.array(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def trusted(self):
        return ~self.failed & np.isfinite(self.p) & (self.p >= self.trust_floor)

    def to_csv(self, path):
        return write_csv(path, {"w": self.w, "p": self.p,
                                "trusted_flag": self.trusted.astype(int),
                                "method": [self.method] * len(self.w)})

    def sidecar(self):
        return {"f": self.f, "method": self.method, "trust_floor": self.trust_floor,
                "n_points": int(len(self.w)), "n_failed": int(self.failed.sum()),
                "n_trusted": int(self.trusted.sum()),
                "cross_method": self.cross_method, "cross_check": self.cross_check,
                "quadrature_moments": self.moments}

    def to_json(self, path):
        return write_json(path, self.sidecar())


def default_wealth_grid(f, points_per_decade=40):
    """Log-spaced grid covering the head and tail of the steady state.

    The lower end sits where the head mass ``~ w**alpha`` is ~1e-12 (at most
    1e-2); the upper end at ``20 (1 + sigma^2)``.  The log step is adjusted
    to a multiple or an integer fraction of ``log(1/f)`` so the invariant
    evaluator can reuse lattice sweeps (see ``GiverTransform.lattice_layout``).
    """
    f = check_fraction(f)
    alpha = asymptotic_exponent(f)
    lo = min(1e-2, max(1e-150, 10.0 ** (-12.0 / alpha)))
    hi = 20.0 * (1.0 + steady_variance(f))
    step = math.log(10.0) / points_per_decade
    unit = -math.log(f)
    if unit <= step:
        step = unit * round(step / unit)
    else:
        step = unit / math.ceil(unit / step)
    n = int(math.ceil(math.log(hi / lo) / step)) + 1
    return lo * np.exp(step * np.arange(n))


def select_methods(f):
    """Primary and cross-check ``(method, terms)`` pairs for fraction ``f``.

    Returns the large-``f`` pair when ``f`` is unknown (generic evaluators).
    """
    if np.isfinite(f) and f < SMALL_F_CROSSOVER:
        return SMALL_F_RULES
    return LARGE_F_RULES


def _invert_flagging(g, w, method, terms):
    """Invert at every ``w``; points whose evaluation fails come back NaN."""
    try:
        return np.asarray(invert(g, w, method, terms), dtype=float), np.zeros(w.shape, bool)
    except (NumericalError, FloatingPointError):
        pass
    p = np.full(w.shape, np.nan)
    for i, wi in enumerate(w):
        try:
            p[i] = invert(g, wi, method, terms)
        except (NumericalError, FloatingPointError):
            pass
    return p, ~np.isfinite(p)


def invert_distribution(g, w_grid=None, method=AUTO, cross_check=AUTO,
                        terms=None, cross_terms=None, trust_floor=TRUST_FLOOR,
                        max_failed_fraction=0.1, moment_rtol=1e-6):
    """Invert a transform on a wealth grid, cross-check it and take moments.

    Parameters
    ----------
    g : TransformEvaluator or callable
        For a :class:`GiverTransform` the grid defaults to
        :func:`default_wealth_grid`.
    w_grid : array_like, optional
        Positive, strictly increasing.
    method, cross_check : str
        Inversion rules; ``cross_check=None`` skips the second inversion.
        ``"auto"`` picks them (with their term counts) by :func:`select_methods`.
    moment_rtol : float
        Target accuracy of the head/tail corrections in the quadrature moments.

    Returns
    -------
    WealthDistribution

    Raises
    ------
    NumericalError
        More than ``max_failed_fraction`` of the points failed.
    """
    from .analysis import quadrature_moments

    g = as_evaluator(g)
    f = getattr(g, "f", float("nan"))
    if w_grid is None:
        if not isinstance(g, GiverTransform):
            raise ValueError("w_grid is required for a generic evaluator")
        w_grid = default_wealth_grid(f)
    w = check_wealth_grid(w_grid)
    (auto_m, auto_t), (auto_c, auto_ct) = select_methods(f)
    if method == AUTO:
        method, terms = auto_m, auto_t if terms is None else terms
    if cross_check == AUTO:
        cross_check, cross_terms = auto_c, auto_ct if cross_terms is None else cross_terms
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    p, failed = _invert_flagging(g, w, method, terms)
    if failed.mean() > max_failed_fraction:
        raise NumericalError(f"{failed.sum()} of {len(w)} inversion points failed "
                             f"with method {method!r}")
    cross_p = None
    stats = {}
    if cross_check:
        if cross_check not in METHODS:
            raise ValueError(f"unknown cross-check method {cross_check!r}")
        cross_p, cross_failed = _invert_flagging(g, w, cross_check, cross_terms)
        stats = cross_agreement(p, cross_p, trust_floor, ~(failed | cross_failed))
        stats["method"] = cross_check
    dist = WealthDistribution(w=w, p=p, method=method, trust_floor=trust_floor, f=f,
                              failed=failed, cross_method=cross_check or None,
                              cross_p=cross_p, cross_check=stats)
    try:
        mom = quadrature_moments(dist, 2, rtol=moment_rtol)
        moments = {"mu": mom.values.tolist(), "error": mom.error.tolist(),
                   "truncation": mom.truncation.tolist()}
    except GiverSchemeError as exc:
        moments = {"error_message": str(exc)}
    object.__setattr__(dist, "moments", moments)
    return dist


def cross_agreement(p, q, trust_floor=TRUST_FLOOR, valid=None):
    """Pointwise relative difference of two inversions above the trust floor."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    mask = np.isfinite(p) & np.isfinite(q) & (p >= trust_floor) & (q >= trust_floor)
    if valid is not None:
        mask &= valid
    if not mask.any():
        return {"n_compared": 0, "max_rel_diff": float("nan"),
                "median_rel_diff": float("nan"), "w_index_of_max": -1}
    rel = np.abs(p[mask] - q[mask]) / np.abs(q[mask])
    idx = np.flatnonzero(mask)[np.argmax(rel)]
    return {"n_compared": int(mask.sum()), "max_rel_diff": float(rel.max()),
            "median_rel_diff": float(np.median(rel)), "w_index_of_max": int(idx)}
