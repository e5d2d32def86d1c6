"""Steady-state Laplace transform ``g(z)`` of the giver scheme.

``g`` satisfies ``g(z) = g((1-f)z) / 2 + g(z) g(fz) / 2``.  Two procedures are
provided:

* :func:`solve_ray` iterates ``g <- g((1-f)z) / (2 - g(fz))`` on a grid that is
  uniform in ``log10|z|`` along one ray, reading the scaled arguments off a
  cubic spline of the previous iterate.
* :func:`solve_invariant` works on the lattice ``z f**k (1-f)**m``, which is
  closed under both scalings, so no interpolation is needed.

Below ``|z| = 1e-4`` both use the moment series of :mod:`.moments`.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels
from ._validation import check_fraction, check_positive, check_positive_int
from .exceptions import (DivisionGuardError, GridOverflowError, NonConvergedError,
                         NumericalError, OffRayError, OutOfRangeError,
                         WindowTooSmallError)
from .io import write_csv, write_json
from .moments import (DEFAULT_TAYLOR_TERMS, TAYLOR_RADIUS, complement_coefficients,
                      taylor_eval)

LOG_TAYLOR_RADIUS = math.log10(TAYLOR_RADIUS)
DIVISION_GUARD = 1e-14
ANGLE_TOLERANCE = 1e-12


class InitialGuess(str, enum.Enum):
    CAUCHY = "cauchy"            # 1 / (1 + z)
    EXPONENTIAL = "exponential"  # exp(-z)

    def __call__(self, z):
        if self is InitialGuess.CAUCHY:
            return 1.0 / (1.0 + z)
        return np.exp(-z)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration settings shared by both procedures.

    Parameters
    ----------
    tolerance : float
        Stop when the largest absolute change between iterates is below this.
    max_iterations : int
    nodes_per_decade : int
        Ray-grid density in ``log10|z|``.
    initial_guess : {"cauchy", "exponential"}
    rtol : float
        Optional extra relative criterion, ``|change| <= rtol * |g|`` at every
        node.  Zero disables it.  Useful when the far tail of ``|g|`` is itself
        close to ``tolerance``.
    staged : bool
        Solve up to ``|z| = 1`` first and extend one decade at a time, each
        stage starting from the previous solution.
    max_grid_nodes : int
        Cap on ``(K+1)(M+1)`` for the invariant lattice.
    taylor_terms : int
    """

    tolerance: float = 1e-12
    max_iterations: int = 500
    nodes_per_decade: int = 1000
    initial_guess: InitialGuess = InitialGuess.CAUCHY
    rtol: float = 0.0
    staged: bool = False
    max_grid_nodes: int = 50_000_000
    taylor_terms: int = DEFAULT_TAYLOR_TERMS

    def __post_init__(self):
        check_positive(self.tolerance, "tolerance")
        check_positive_int(self.max_iterations, "max_iterations")
        check_positive_int(self.nodes_per_decade, "nodes_per_decade", min_val=2)
        check_positive(self.rtol, "rtol", include_zero=True)
        check_positive_int(self.max_grid_nodes, "max_grid_nodes")
        check_positive_int(self.taylor_terms, "taylor_terms")
        object.__setattr__(self, "initial_guess", InitialGuess(self.initial_guess))

    def to_dict(self):
        return {"tolerance": self.tolerance, "max_iterations": self.max_iterations,
                "nodes_per_decade": self.nodes_per_decade,
                "initial_guess": self.initial_guess.value, "rtol": self.rtol,
                "staged": self.staged, "max_grid_nodes": self.max_grid_nodes,
                "taylor_terms": self.taylor_terms}


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True, eq=False)
class RayGrid:
    """Converged values of ``g`` along the ray ``arg z = theta``.

    ``u`` holds ``log10|z|`` on a uniform grid from -4 to ``log10|z_max|``.
    """

    f: float
    theta: float
    u: np.ndarray
    values: np.ndarray
    converged: bool
    iterations: int
    tolerance: float
    residual: float
    interpolation_error: float
    config: SolverConfig = field(default=DEFAULT_CONFIG, repr=False)

    def __post_init__(self):
        for name in ("u", "values"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        # splines on real and imaginary parts, in log10|z|
        object.__setattr__(self, "_spline", CubicSpline(self.u, self.values))

    @property
    def z(self):
        return 10.0 ** self.u * np.exp(1j * self.theta)

    @property
    def z_max(self):
        return 10.0 ** self.u[-1] * np.exp(1j * self.theta)

    @property
    def step(self):
        return (self.u[-1] - self.u[0]) / (len(self.u) - 1)

    def __call__(self, z):
        return evaluate(self, z)

    def header(self):
        return {"f": self.f, "theta": self.theta, "tolerance": self.tolerance,
                "iterations": self.iterations, "residual": self.residual,
                "converged": self.converged,
                "interpolation_error": self.interpolation_error,
                "nodes_per_decade": self.config.nodes_per_decade,
                "log10_abs_z_max": float(self.u[-1])}

    def to_csv(self, path):
        return write_csv(path, {"log10_abs_z": self.u, "re_g": self.values.real,
                                "im_g": self.values.imag})

    def to_json(self, path):
        return write_json(path, self.header())


def _ray_points(u_hi, npd):
    n = int(round((u_hi - LOG_TAYLOR_RADIUS) * npd))
    return np.linspace(LOG_TAYLOR_RADIUS, u_hi, max(n, 4) + 1)


def _iterate_ray(f, theta, u, g0, config):
    """Run the fixed-point sweep on grid ``u`` from the starting values ``g0``."""
    rot = np.exp(1j * theta)
    uf = u + math.log10(f)
    u1 = u + math.log10(1.0 - f)
    small_f = uf < LOG_TAYLOR_RADIUS
    small_1 = u1 < LOG_TAYLOR_RADIUS
    gf = np.empty_like(g0)
    g1 = np.empty_like(g0)
    gf[small_f] = taylor_eval(f, 10.0 ** uf[small_f] * rot, config.taylor_terms)
    g1[small_1] = taylor_eval(f, 10.0 ** u1[small_1] * rot, config.taylor_terms)
    g = g0.copy()
    change = np.full(g.shape, np.inf)
    for it in range(1, config.max_iterations + 1):
        spline = CubicSpline(u, g)
        gf[~small_f] = spline(uf[~small_f])
        g1[~small_1] = spline(u1[~small_1])
        den = 2.0 - gf
        if np.min(np.abs(den)) < DIVISION_GUARD:
            k = int(np.argmin(np.abs(den)))
            raise DivisionGuardError(
                f"|2 - g(fz)| = {abs(den[k]):.3g} at log10|z| = {u[k]:.4f} (iteration {it})")
        new = g1 / den
        if not np.all(np.isfinite(new)):
            raise NonConvergedError("iterate became non-finite", change, it)
        change = np.abs(new - g)
        g = new
        if change.max() <= config.tolerance and (
                config.rtol == 0.0 or np.all(change <= config.rtol * np.abs(g))):
            return g, it
    raise NonConvergedError(
        f"ray iteration did not converge in {config.max_iterations} iterations "
        f"(max change {change.max():.3g})", change, config.max_iterations)


def fixed_point_residual(f, g, z):
    """``|g(z) - g((1-f)z)/2 - g(z) g(fz)/2|`` for a callable ``g``."""
    z = np.asarray(z, dtype=complex)
    gz = g(z)
    return np.abs(gz - 0.5 * g((1.0 - f) * z) - 0.5 * gz * g(f * z))


def solve_ray(f, z_max, config=None):
    """Solve for ``g`` along the ray through ``z_max``.

    Parameters
    ----------
    f : float
        Transfer fraction in (0, 1).
    z_max : complex
        Far end of the ray; its argument fixes the ray, ``|z_max| > 1e-4``.
    config : SolverConfig, optional

    Returns
    -------
    RayGrid

    Raises
    ------
    NonConvergedError
        ``max_iterations`` exhausted; carries the last change profile.
    DivisionGuardError
        ``|2 - g(fz)|`` dropped below 1e-14.
    """
    f = check_fraction(f)
    config = config or DEFAULT_CONFIG
    z_max = complex(z_max)
    if not np.isfinite(z_max) or abs(z_max) <= TAYLOR_RADIUS:
        raise ValueError(f"|z_max| must be finite and exceed {TAYLOR_RADIUS}")
    theta = math.atan2(z_max.imag, z_max.real)
    rot = np.exp(1j * theta)
    u_top = math.log10(abs(z_max))
    npd = config.nodes_per_decade

    if config.staged and u_top > 0.0:
        stops = [*np.arange(0.0, u_top, 1.0), u_top]
    else:
        stops = [u_top]
    total_it = 0
    prev = None
    for stop in stops:
        u = _ray_points(stop, npd)
        g0 = config.initial_guess(10.0 ** u * rot)
        if prev is not None:
            inside = u <= prev[0][-1]
            g0[inside] = CubicSpline(*prev)(u[inside])
        g, it = _iterate_ray(f, theta, u, g0, config)
        total_it += it
        prev = (u, g)
    u, g = prev

    probe = _probe_points(u)
    spline = CubicSpline(u, g)

    def gfun(z):
        return _spline_or_series(f, spline, z, config.taylor_terms)

    residual = float(np.max(fixed_point_residual(f, gfun, 10.0 ** probe * rot)))
    return RayGrid(f=f, theta=theta, u=u, values=g, converged=True,
                   iterations=total_it, tolerance=config.tolerance,
                   residual=residual,
                   interpolation_error=_interpolation_error(u, g),
                   config=config)


def _probe_points(u):
    # nodes plus midpoints, so the residual also sees the interpolant
    mid = 0.5 * (u[1:] + u[:-1])
    return np.sort(np.concatenate([u, mid]))


def _interpolation_error(u, g):
    # a spline through every other node has ~16x the error of the full one
    if len(u) < 9:
        return float("nan")
    coarse = CubicSpline(u[::2], g[::2])
    odd = u[1::2]
    odd = odd[odd < u[::2][-1]]
    return float(np.max(np.abs(coarse(odd) - g[1:1 + 2 * len(odd):2])) / 16.0)


def _spline_or_series(f, spline, z, n_terms):
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    out = np.empty(z.shape, complex)
    small = r < TAYLOR_RADIUS
    out[small] = taylor_eval(f, z[small], n_terms)
    out[~small] = spline(np.log10(r[~small]))
    return out


def evaluate(grid, z_query):
    """Interpolate a solved ray at ``z_query`` (scalar or array).

    Points with ``|z| < 1e-4`` are evaluated from the moment series.

    Raises
    ------
    OffRayError
        ``arg z_query`` differs from the ray angle by more than 1e-12.
    OutOfRangeError
        ``|z_query| > |z_max|``.
    """
    z = np.asarray(z_query, dtype=complex)
    r = np.abs(z)
    nonzero = r > 0
    dtheta = np.angle(z[nonzero] * np.exp(-1j * grid.theta))
    if np.any(np.abs(dtheta) > ANGLE_TOLERANCE):
        raise OffRayError(f"query is off the ray arg z = {grid.theta!r} "
                          f"(max deviation {np.max(np.abs(dtheta)):.3g} rad)")
    top = 10.0 ** grid.u[-1]
    if np.any(r > top * (1 + 1e-14)):
        raise OutOfRangeError(f"|z| = {np.max(r):.6g} exceeds grid extent {top:.6g}")
    log_r = np.log10(np.where(nonzero, r, 1.0))
    # clip round-off overshoot at the top node
    log_r = np.minimum(log_r, grid.u[-1])
    out = np.empty(z.shape, complex)
    small = r < TAYLOR_RADIUS
    out[small] = taylor_eval(grid.f, z[small], grid.config.taylor_terms)
    big = ~small
    out[big] = grid._spline(log_r[big])
    # exact knot values where the query hits a node
    idx = np.rint((log_r - grid.u[0]) / grid.step).astype(int)
    idx = np.clip(idx, 0, len(grid.u) - 1)
    knot = big & (log_r == grid.u[idx])
    out[knot] = grid.values[idx[knot]]
    return out[()] if out.ndim == 0 else out


def fit_tail_exponent(grid, fit_window=None):
    """Power-law exponent of ``|g|`` at large ``|z|`` on a solved ray.

    Parameters
    ----------
    grid : RayGrid
    fit_window : (float, float), optional
        Range of ``log10|z|``; defaults to the top 1.5 decades of the grid.

    Returns
    -------
    float
        Minus the least-squares slope of ``log|g|`` against ``log|z|``.
    """
    if not grid.converged:
        raise ValueError("grid is not converged")
    if fit_window is None:
        fit_window = (grid.u[-1] - 1.5, grid.u[-1])
    lo, hi = map(float, fit_window)
    if lo > hi or lo < grid.u[0] - 1e-12 or hi > grid.u[-1] + 1e-12:
        raise OutOfRangeError(f"fit window {fit_window} outside grid "
                              f"[{grid.u[0]}, {grid.u[-1]}]")
    sel = (grid.u >= lo - 1e-12) & (grid.u <= hi + 1e-12)
    if sel.sum() < 10:
        raise WindowTooSmallError(f"fit window holds {sel.sum()} nodes, need >= 10")
    slope = np.polyfit(grid.u[sel], np.log10(np.abs(grid.values[sel])), 1)[0]
    return float(-slope)


# --- invariant lattice -------------------------------------------------------

def lattice_extent(f, z):
    """``(K, M)`` such that ``|z| f**K`` and ``|z| (1-f)**M`` are below 1e-4."""
    r = abs(z)
    if r <= TAYLOR_RADIUS:
        return 0, 0
    K = math.ceil(math.log(TAYLOR_RADIUS / r) / math.log(f))
    M = math.ceil(math.log(TAYLOR_RADIUS / r) / math.log1p(-f))
    # guard against ceil landing exactly on the radius
    while r * f ** K >= TAYLOR_RADIUS:
        K += 1
    while r * (1.0 - f) ** M >= TAYLOR_RADIUS:
        M += 1
    return K, M


@dataclass(frozen=True, eq=False)
class InvariantGrid:
    """``g`` on the lattice ``z f**k (1-f)**m``, ``0 <= k <= K``, ``0 <= m <= M``."""

    f: float
    z: complex
    K: int
    M: int
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def nodes(self):
        k = np.arange(self.K + 1)[:, None]
        m = np.arange(self.M + 1)[None, :]
        return self.z * self.f ** k * (1.0 - self.f) ** m

    @property
    def value(self):
        return complex(self.values[0, 0])


def _check_overflow(f, z, config):
    K, M = lattice_extent(f, z)
    if (K + 1) * (M + 1) > config.max_grid_nodes:
        raise GridOverflowError(
            f"invariant lattice for |z|={abs(z):.3g}, f={f} needs "
            f"{(K + 1) * (M + 1)} nodes (cap {config.max_grid_nodes})")
    return K, M


def build_invariant_grid(f, z, config=None):
    """Fill the full invariant lattice for ``z`` (see :class:`InvariantGrid`)."""
    f = check_fraction(f)
    config = config or DEFAULT_CONFIG
    z = complex(z)
    if not abs(z) > TAYLOR_RADIUS:
        raise ValueError(f"|z| must exceed {TAYLOR_RADIUS}")
    K, M = _check_overflow(f, z, config)
    coef = np.asarray(complement_coefficients(f, config.taylor_terms), dtype=complex)
    h, status = _kernels.complement_grid(z, f, coef, TAYLOR_RADIUS, DIVISION_GUARD, K, M)
    if status == _kernels.STATUS_DIVISION_GUARD:
        raise DivisionGuardError(f"|2 - g(fz)| below {DIVISION_GUARD} on lattice of z={z}")
    return InvariantGrid(f=f, z=z, K=K, M=M, values=1.0 - h)


def solve_invariant(f, z, config=None):
    """``g(z)`` from the invariant lattice, with no interpolation.

    Lattice nodes below ``|z| = 1e-4`` are seeded from the moment series and
    the rule ``g[k,m] = g[k,m+1] / (2 - g[k+1,m])`` is applied in dependency
    order (k and m descending).  Every node depends only on nodes that are
    already final, so one ordered sweep is the converged fixed point.
    """
    f = check_fraction(f)
    config = config or DEFAULT_CONFIG
    z = complex(z)
    if not abs(z) > TAYLOR_RADIUS:
        raise ValueError(f"|z| must exceed {TAYLOR_RADIUS}")
    _check_overflow(f, z, config)
    return complex(invariant_transform(f, np.array([z]), config)[0])


def _transform_pair(f, z, config):
    config = config or DEFAULT_CONFIG
    z = np.asarray(z, dtype=complex)
    flat = np.ascontiguousarray(z.ravel())
    if flat.size:
        K, M = lattice_extent(f, flat[np.argmax(np.abs(flat))])
        if (K + 1) * (M + 1) > config.max_grid_nodes:
            raise GridOverflowError(
                f"invariant lattice needs {(K + 1) * (M + 1)} nodes "
                f"(cap {config.max_grid_nodes})")
    coef = np.asarray(complement_coefficients(f, config.taylor_terms), dtype=complex)
    g, h, status = _kernels.transform_batch(flat, f, coef, TAYLOR_RADIUS, DIVISION_GUARD)
    if np.any(status == _kernels.STATUS_DIVISION_GUARD):
        raise DivisionGuardError(f"|2 - g(fz)| below {DIVISION_GUARD} on an invariant lattice")
    if np.any(status == _kernels.STATUS_NONFINITE):
        raise NumericalError("non-finite argument passed to the invariant evaluator")
    return g.reshape(z.shape), h.reshape(z.shape)


def invariant_complement(f, z, config=None):
    """``1 - g(z)`` on an array of arguments via the invariant lattice.

    Works for any finite complex ``z`` (the sweep computes the analytic
    continuation off the positive half-plane).  Accurate relative to
    ``|1 - g|``, which matters where ``g`` is close to 1.
    """
    f = check_fraction(f)
    return _transform_pair(f, z, config)[1]


def invariant_transform(f, z, config=None):
    """Vectorised ``g(z)`` via the invariant lattice, accurate relative to ``|g|``."""
    f = check_fraction(f)
    out = _transform_pair(f, z, config)[0]
    return out[()] if out.ndim == 0 else out


def invariant_transform_rows(f, z, stride, n_rows, config=None):
    """``g(z f**(stride*i))``, ``i = 0..n_rows-1``, from a single lattice of ``z``.

    Every argument is a row of the invariant lattice of ``z``, so one sweep
    serves all of them.  This is the fast path for log-spaced inversion
    grids whose ratio is a power of ``1/f``.
    """
    f = check_fraction(f)
    config = config or DEFAULT_CONFIG
    z = complex(z)
    stride = check_positive_int(stride, "stride")
    n_rows = check_positive_int(n_rows, "n_rows")
    K, M = lattice_extent(f, z)
    if (K + 2) * (M + 1) > config.max_grid_nodes:
        raise GridOverflowError(f"invariant lattice needs {(K + 2) * (M + 1)} nodes "
                                f"(cap {config.max_grid_nodes})")
    if not np.isfinite(z):
        raise NumericalError("non-finite argument passed to the invariant evaluator")
    coef = np.asarray(complement_coefficients(f, config.taylor_terms), dtype=complex)
    g, status = _kernels.transform_rows(z, f, coef, TAYLOR_RADIUS, DIVISION_GUARD,
                                        stride, n_rows)
    if status == _kernels.STATUS_DIVISION_GUARD:
        raise DivisionGuardError(f"|2 - g(fz)| below {DIVISION_GUARD} on an invariant lattice")
    return g
