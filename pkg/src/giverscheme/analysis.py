"""Diagnostics of wealth densities: moments, entropy, divergence, Gini, oscillations.

Inputs are either inverted densities (anything with ``w``, ``p``, ``trusted``
and ``trust_floor`` attributes, e.g. :class:`~.inversion.WealthDistribution`)
or histograms (anything with ``bin_edges`` and ``counts``, e.g.
:class:`~.simulate.PopulationHistogram`).  Histograms are rescaled to unit
mean before use.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, signal, special

from .exceptions import (InsufficientRangeError, SupportMismatchError,
                         TailDominatedError, UntrustedMassError)
from .io import write_csv, write_json

UNTRUSTED_MASS_LIMIT = 0.01
OSCILLATION_THRESHOLD = 0.01


def _is_histogram(dist):
    return hasattr(dist, "bin_edges") and hasattr(dist, "counts")


def _trusted_run(dist):
    """Index slice of the longest contiguous trusted run around the peak."""
    trusted = np.asarray(dist.trusted, bool)
    if not trusted.any():
        raise UntrustedMassError("no trusted density values")
    p = np.where(trusted, dist.p, -np.inf)
    peak = int(np.argmax(p))
    lo = peak
    while lo > 0 and trusted[lo - 1]:
        lo -= 1
    hi = peak
    while hi < len(trusted) - 1 and trusted[hi + 1]:
        hi += 1
    return slice(lo, hi + 1)


def _trap_log(w, y):
    """``int y dw`` in ``ln w`` coordinates, with an error estimate.

    The value is the Richardson-extrapolated trapezoid rule (composite
    Simpson); the error estimate compares it with the same rule on every
    other node.  Plain trapezoid leaves an ``O(h^2)`` endpoint error wherever
    the integrand is cut off above zero, e.g. at the trust floor.
    """
    x = np.log(w)
    F = y * w
    if len(w) < 3:
        return integrate.trapezoid(F, x), abs(integrate.trapezoid(F, x))
    fine = integrate.simpson(F, x=x)
    if len(w) >= 7:
        idx = np.unique(np.r_[np.arange(0, len(w), 2), len(w) - 1])
        coarse = integrate.simpson(F[idx], x=x[idx])
        err = abs(fine - coarse) / 15.0
    else:
        err = abs(fine - integrate.trapezoid(F, x))
    return fine, err


def unit_mean_histogram(hist):
    """Bin edges and density of a histogram rescaled to unit mean."""
    edges = np.asarray(hist.bin_edges, float)
    counts = np.asarray(hist.counts, float)
    n = counts.sum()
    mean = float(getattr(hist, "mean_wealth", np.nan))
    if not np.isfinite(mean) or mean <= 0:
        centres = 0.5 * (edges[1:] + edges[:-1])
        mean = float(np.sum(counts * centres) / n)
    x = edges / mean
    dens = counts / (n * np.diff(x))
    return x, dens


# --- moments -----------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureMoments:
    """``mu_n = int w**n p dw`` with error estimates.

    ``error`` adds the quadrature (Richardson) error and the uncertainty of
    the head/tail corrections; ``truncation`` is the size of those corrections.
    """

    values: np.ndarray
    error: np.ndarray
    truncation: np.ndarray

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)

    @property
    def variance(self):
        return self.values[2] - self.values[1] ** 2


def _head_fit(w, p, width):
    # power law p ~ C w**beta on the lowest `width` decades
    sel = w <= w[0] * 10.0 ** width
    if sel.sum() < 4:
        sel = np.zeros(len(w), bool)
        sel[:min(len(w), 4)] = True
    beta, logc = np.polyfit(np.log(w[sel]), np.log(p[sel]), 1)
    return beta, math.exp(logc)


def _head_mass(a, n, beta, c):
    e = n + beta + 1.0
    if e <= 0:
        return math.inf
    return c * a ** e / e


def _tail_fit(w, p, frac):
    # gamma-type tail p ~ exp(c0 + c1 w + c2 ln w) on w in [frac*b, b]
    b = w[-1]
    sel = w >= frac * b
    if sel.sum() < 6:
        sel = np.zeros(len(w), bool)
        sel[-min(len(w), 6):] = True
    A = np.column_stack([np.ones(sel.sum()), w[sel], np.log(w[sel])])
    (c0, c1, c2), *_ = np.linalg.lstsq(A, np.log(p[sel]), rcond=None)
    return c0, c1, c2


def _tail_mass(b, n, c0, c1, c2):
    a = n + c2 + 1.0
    if c1 >= 0 or a <= 0:
        return math.inf
    lam = -c1
    # int_b^inf w^(a-1) exp(c0 - lam w) dw = e^c0 lam^-a Gamma(a, lam b)
    return math.exp(c0 - a * math.log(lam) + special.gammaln(a)) * special.gammaincc(a, lam * b)


def quadrature_moments(dist, n_max=2, rtol=1e-6):
    """Moments ``mu_0 .. mu_{n_max}`` of a density by composite quadrature.

    The trusted run around the peak is integrated in ``ln w`` by the
    Richardson-extrapolated trapezoid rule.  Mass below the run is added
    from a power-law fit to its lowest decade and mass above it from a
    gamma-type fit ``exp(c0 + c1 w + c2 ln w)`` to its upper half.  Each
    correction's uncertainty is the change when the fit window is halved.

    Raises
    ------
    TailDominatedError
        A correction's uncertainty exceeds ``rtol`` times the moment.
    """
    if _is_histogram(dist):
        x, dens = unit_mean_histogram(dist)
        vals = [np.sum(dens * (x[1:] ** (n + 1) - x[:-1] ** (n + 1)) / (n + 1))
                for n in range(n_max + 1)]
        z = np.zeros(n_max + 1)
        return QuadratureMoments(np.array(vals), z, z.copy())
    run = _trusted_run(dist)
    w = np.asarray(dist.w, float)[run]
    p = np.asarray(dist.p, float)[run]
    if len(w) < 8:
        raise TailDominatedError("fewer than 8 trusted points")
    head1, head2 = _head_fit(w, p, 1.0), _head_fit(w, p, 0.5)
    tail1, tail2 = _tail_fit(w, p, 0.5), _tail_fit(w, p, 0.75)
    vals, errs, trunc = [], [], []
    for n in range(n_max + 1):
        body, qerr = _trap_log(w, w ** n * p)
        h1 = _head_mass(w[0], n, *head1)
        h2 = _head_mass(w[0], n, *head2)
        t1 = _tail_mass(w[-1], n, *tail1)
        t2 = _tail_mass(w[-1], n, *tail2)
        corr_err = abs(h1 - h2) + abs(t1 - t2)
        total = body + h1 + t1
        if not np.isfinite(corr_err) or corr_err > rtol * abs(total):
            raise TailDominatedError(
                f"mu_{n}: truncation correction uncertain by {corr_err:.3g} "
                f"(head {h1:.3g}, tail {t1:.3g}, moment {total:.6g})")
        vals.append(total)
        errs.append(qerr + corr_err)
        trunc.append(h1 + t1)
    return QuadratureMoments(np.array(vals), np.array(errs), np.array(trunc))


# --- entropy and divergence --------------------------------------------------

@dataclass(frozen=True)
class EntropyReport:
    """Boltzmann entropy ``S = -int p log p dw`` (nats) of a unit-mean density."""

    S: float
    error: float
    binning_spread: float = float("nan")
    bin_width: float = float("nan")

    def to_dict(self):
        return {"S": self.S, "error": self.error,
                "binning_spread": self.binning_spread, "bin_width": self.bin_width}

    def to_json(self, path):
        return write_json(path, self.to_dict())


def _xlogy(p):
    return special.xlogy(p, p)


def _density_entropy(dist):
    p = np.asarray(dist.p, float)
    w = np.asarray(dist.w, float)
    trusted = np.asarray(dist.trusted, bool)
    q = np.where(trusted, p, 0.0)
    mass, _ = _trap_log(w, q)
    if 1.0 - mass > UNTRUSTED_MASS_LIMIT:
        raise UntrustedMassError(
            f"{1.0 - mass:.3g} of the probability mass is untrusted or off-grid")
    S, err = _trap_log(w, -_xlogy(q))
    return S, err


def _histogram_entropy(x, dens):
    return float(-np.sum(_xlogy(dens) * np.diff(x)))


def freedman_diaconis_width(sample):
    sample = np.asarray(sample, float)
    q75, q25 = np.percentile(sample, [75, 25])
    width = 2.0 * (q75 - q25) / len(sample) ** (1.0 / 3.0)
    if width <= 0:
        width = max(np.ptp(sample), 1.0) / max(int(np.sqrt(len(sample))), 1)
    return width


def _binned_entropy(x, h):
    edges = np.arange(0.0, x.max() + h, h)
    if len(edges) < 2:
        edges = np.array([0.0, h])
    counts, edges = np.histogram(x, bins=edges)
    return _histogram_entropy(edges, counts / (len(x) * np.diff(edges)))


def sample_entropy(sample, bin_width=None):
    """Entropy of a wealth sample from a unit-mean histogram.

    ``bin_width`` is on the unit-mean scale and defaults to the
    Freedman-Diaconis width.  The report's ``binning_spread`` is the range of
    the estimates at half, single and double the width.
    """
    sample = np.asarray(sample, float)
    x = sample / sample.mean()
    width = freedman_diaconis_width(x) if bin_width is None else float(bin_width)
    est = [_binned_entropy(x, width * scale) for scale in (1.0, 0.5, 2.0)]
    return EntropyReport(S=est[0], error=0.0, binning_spread=max(est) - min(est),
                         bin_width=float(width))


def boltzmann_entropy(dist):
    """Entropy of an inverted density or a histogram.

    Density values below the trust floor contribute zero.  Histograms are
    rescaled to unit mean and ``S`` is taken over their own bins.  The
    binning spread compares it with half and double the bin width (rebinned
    from the raw ``sample`` when the histogram carries one, otherwise only
    the doubled width from merged bins).

    Raises
    ------
    UntrustedMassError
        More than 1% of the mass lies below the floor or off the grid.
    """
    if _is_histogram(dist):
        x, dens = unit_mean_histogram(dist)
        S = _histogram_entropy(x, dens)
        width = float(np.diff(x).mean())
        sample = getattr(dist, "sample", None)
        if sample is not None:
            xs = np.asarray(sample, float) / np.mean(sample)
            alt = [_binned_entropy(xs, width * scale) for scale in (0.5, 2.0)]
        else:
            counts = np.asarray(dist.counts, float)
            m = len(counts) // 2 * 2
            x2 = x[:m + 1:2]
            alt = [_histogram_entropy(x2, (counts[:m:2] + counts[1:m:2])
                                      / (counts.sum() * np.diff(x2)))]
        est = [S, *alt]
        return EntropyReport(S=S, error=0.0, binning_spread=max(est) - min(est),
                             bin_width=width)
    S, err = _density_entropy(dist)
    return EntropyReport(S=float(S), error=float(err))


def _exp_log_density(w):
    return -np.asarray(w, float)


def kl_divergence(dist, reference=None, log_reference=None):
    """``D = int p log(p / m) dw`` against a reference density ``m``.

    Parameters
    ----------
    dist : density or histogram
    reference : callable, optional
        ``m(w)``; defaults to ``exp(-w)``.
    log_reference : callable, optional
        ``log m(w)``, used instead of ``log(reference(w))`` when given.

    Raises
    ------
    SupportMismatchError
        ``p > 0`` somewhere ``m = 0``.
    """
    if reference is None and log_reference is None:
        log_reference = _exp_log_density
    if log_reference is None:
        def log_reference(w):
            with np.errstate(divide="ignore"):
                return np.log(reference(w))

    if _is_histogram(dist):
        x, dens = unit_mean_histogram(dist)
        centres = 0.5 * (x[1:] + x[:-1])
        logm = log_reference(centres)
        if np.any((dens > 0) & ~np.isfinite(logm)):
            raise SupportMismatchError("histogram mass where the reference vanishes")
        terms = np.where(dens > 0, dens * (np.log(np.where(dens > 0, dens, 1.0)) - logm), 0.0)
        return float(np.sum(terms * np.diff(x)))
    w = np.asarray(dist.w, float)
    q = np.where(dist.trusted, dist.p, 0.0)
    logm = log_reference(w)
    if np.any((q > 0) & ~np.isfinite(logm)):
        raise SupportMismatchError("density is positive where the reference vanishes")
    mass, _ = _trap_log(w, q)
    if 1.0 - mass > UNTRUSTED_MASS_LIMIT:
        raise UntrustedMassError(
            f"{1.0 - mass:.3g} of the probability mass is untrusted or off-grid")
    integrand = np.where(q > 0, _xlogy(q) - q * np.where(q > 0, logm, 0.0), 0.0)
    D, _ = _trap_log(w, integrand)
    return float(D)


# --- inequality --------------------------------------------------------------

@dataclass(frozen=True)
class GiniReport:
    """Gini coefficient with the Lorenz curve ``(X, L)`` it was computed from."""

    G: float
    X: np.ndarray = field(repr=False)
    L: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"G": self.G, "n_lorenz": int(len(self.X))}

    def to_csv(self, path):
        return write_csv(path, {"X": self.X, "L": self.L})


def _lorenz_from_sample(sample):
    x = np.sort(np.asarray(sample, float))
    n = len(x)
    X = np.arange(n + 1) / n
    L = np.concatenate([[0.0], np.cumsum(x)]) / x.sum()
    return X, L


def lorenz_curve(dist):
    """Cumulative population share ``X`` and wealth share ``L``."""
    if isinstance(dist, np.ndarray) or isinstance(dist, (list, tuple)):
        return _lorenz_from_sample(dist)
    if _is_histogram(dist):
        edges = np.asarray(dist.bin_edges, float)
        counts = np.asarray(dist.counts, float)
        centres = 0.5 * (edges[1:] + edges[:-1])
        X = np.concatenate([[0.0], np.cumsum(counts)]) / counts.sum()
        wealth = counts * centres
        L = np.concatenate([[0.0], np.cumsum(wealth)]) / wealth.sum()
        return X, L
    run = _trusted_run(dist)
    w = np.asarray(dist.w, float)[run]
    p = np.asarray(dist.p, float)[run]
    # mass outside the trusted run is below the floor; normalise over the run
    lw = np.log(w)
    X = integrate.cumulative_simpson(p * w, x=lw, initial=0.0)
    L = integrate.cumulative_simpson(p * w * w, x=lw, initial=0.0)
    if not (np.isfinite(X[-1]) and np.isfinite(L[-1]) and X[-1] > 0 and L[-1] > 0):
        raise UntrustedMassError("trusted run carries no finite positive mass")
    return X / X[-1], L / L[-1]


def gini(dist):
    """``G = 1 - 2 int_0^1 L dX`` from the Lorenz curve.

    Accepts a density, a histogram or a raw wealth sample (array).  For a
    sample the Lorenz curve is exact and so is ``G``.  For a density the
    integral is taken as ``int L(w) p(w) dw`` by Simpson's rule in ``ln w``.
    """
    X, L = lorenz_curve(dist)
    if _is_histogram(dist) or isinstance(dist, (np.ndarray, list, tuple)):
        area = integrate.trapezoid(L, X)
    else:
        run = _trusted_run(dist)
        w = np.asarray(dist.w, float)[run]
        p = np.asarray(dist.p, float)[run]
        lw = np.log(w)
        mass = integrate.simpson(p * w, x=lw)
        area = integrate.simpson(L * p * w, x=lw) / mass
    L = np.minimum(L, X)  # rounding can push L a hair above the diagonal
    G = 1.0 - 2.0 * area
    return GiniReport(G=float(min(max(G, 0.0), 1.0)), X=X, L=L)


def gini_sample(sample):
    """Exact Gini coefficient of a finite sample (fast path, no Lorenz arrays)."""
    x = np.sort(np.asarray(sample, float))
    n = len(x)
    total = x.sum()
    if total <= 0:
        return 0.0
    i = np.arange(1, n + 1)
    return float(np.sum((2 * i - n - 1) * x) / (n * total))


# --- log-periodic structure --------------------------------------------------

@dataclass(frozen=True)
class OscillationReport:
    is_oscillatory: bool
    log10_period: float
    peak_locations: np.ndarray = field(repr=False)
    amplitude: float = 0.0
    log10_w: np.ndarray = field(default=None, repr=False)
    residual: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"is_oscillatory": self.is_oscillatory, "log10_period": self.log10_period,
                "peak_locations": np.asarray(self.peak_locations).tolist(),
                "amplitude": self.amplitude}

    def to_csv(self, path):
        return write_csv(path, {"log10_w": self.log10_w, "residual": self.residual})


def detect_oscillations(dist, threshold=OSCILLATION_THRESHOLD, trend_decades=4.0,
                        min_decades=3.0, w_max=1.0):
    """Find log-periodic modulation of a density.

    ``log10 p`` is resampled uniformly in ``log10 w`` over the trusted run,
    detrended by a local quadratic regression (Savitzky-Golay) spanning
    ``trend_decades``, and the maxima of the residual are located.  Maxima
    count when their prominence reaches ``threshold`` (in ``log10 p``); the
    density is oscillatory when there are at least two and the residual
    half-range reaches ``threshold``.  The period is the mean spacing.

    Parameters
    ----------
    threshold : float
        At ``f = 0.9`` the modulation is ~0.017 in ``log10 p`` (about 4%),
        hence the default of 0.01.
    w_max : float or None
        Ignore ``w`` above this value (default: the unit mean).  Past the
        mean the exponential cut-off bends the trend faster than a local
        quadratic can follow.

    Raises
    ------
    InsufficientRangeError
        The trusted run spans fewer than ``min_decades`` decades.
    """
    run = _trusted_run(dist)
    w = np.asarray(dist.w, float)[run]
    p = np.asarray(dist.p, float)[run]
    if w_max is not None:
        keep = w <= w_max
        w, p = w[keep], p[keep]
    if len(w) < 2:
        raise InsufficientRangeError("trusted range is empty")
    lw = np.log10(w)
    span = lw[-1] - lw[0]
    if span < min_decades:
        raise InsufficientRangeError(
            f"trusted density spans {span:.2f} decades, need {min_decades}")
    step = np.median(np.diff(lw))
    x = np.arange(lw[0], lw[-1] + 0.5 * step, step)
    y = np.interp(x, lw, np.log10(p))
    win = int(round(min(trend_decades, span) / step)) | 1
    win = max(5, min(win, len(x) - (1 - len(x) % 2)))
    trend = signal.savgol_filter(y, win, 2, mode="interp")
    resid = y - trend
    # drop half a window at each end, where the trend is extrapolated
    edge = win // 2
    core = slice(edge, len(x) - edge) if len(x) > 2 * edge + 4 else slice(None)
    xr, rr = x[core], resid[core]
    amplitude = 0.5 * float(rr.max() - rr.min()) if len(rr) else 0.0
    peaks, _ = signal.find_peaks(rr, prominence=threshold)
    locs = xr[peaks]
    oscillatory = amplitude >= threshold and len(peaks) >= 2
    period = float(np.mean(np.diff(locs))) if len(locs) >= 2 else float("nan")
    return OscillationReport(is_oscillatory=bool(oscillatory),
                             log10_period=period if oscillatory else float("nan"),
                             peak_locations=locs, amplitude=amplitude,
                             log10_w=x, residual=resid)
