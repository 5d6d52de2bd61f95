"""Self-contained statistical primitives.

Beta-binomial mass/tails, normal and chi-square survival functions, and
the two-sample Kolmogorov-Smirnov test. Everything here is scalar math
on top of ``math.lgamma`` / ``erfc`` so results are reproducible without
pulling in a stats stack.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BadParameterError


def normal_sf(z: float) -> float:
    """P(Z >= z) for a standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) (series + continued fraction)."""
    if x < 0 or a <= 0:
        raise BadParameterError("gamma_p requires x >= 0 and a > 0")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        # series representation
        term = 1.0 / a
        total = term
        n = a
        for _ in range(500):
            n += 1.0
            term *= x / n
            total += term
            if abs(term) < abs(total) * 1e-15:
                break
        return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    # continued fraction for Q(a, x), Lentz's algorithm
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    q = math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    return 1.0 - q


def chi2_sf(stat: float, df: int) -> float:
    """Survival function of the chi-square distribution."""
    if df <= 0:
        raise BadParameterError("chi2_sf requires df >= 1")
    if stat <= 0:
        return 1.0
    return max(0.0, min(1.0, 1.0 - _gamma_p(df / 2.0, stat / 2.0)))


def chi2_gof(observed: np.ndarray, expected_prop: np.ndarray) -> tuple[float, int, float]:
    """Chi-square goodness of fit of observed counts against expected proportions.

    Bins with zero expected proportion are dropped (their observed counts are
    pooled into the nearest active bin). Returns (statistic, df, p_value).
    """
    obs = np.asarray(observed, dtype=np.float64)
    prop = np.asarray(expected_prop, dtype=np.float64)
    if obs.shape != prop.shape:
        raise BadParameterError("observed and expected shapes differ")
    total = obs.sum()
    active = prop > 0
    if active.sum() < 2:
        raise BadParameterError("need at least two active bins for a GoF test")
    # pool zero-expectation bins into the nearest active neighbour
    obs_active = obs[active].copy()
    active_idx = np.nonzero(active)[0]
    for i in np.nonzero(~active)[0]:
        nearest = int(np.argmin(np.abs(active_idx - i)))
        obs_active[nearest] += obs[i]
    exp = prop[active] / prop[active].sum() * total
    stat = float(np.sum((obs_active - exp) ** 2 / exp))
    df = int(active.sum() - 1)
    return stat, df, chi2_sf(stat, df)


def betabinom_logpmf(k: np.ndarray | int, n: int, alpha: float, beta: float) -> np.ndarray:
    """log PMF of the beta-binomial distribution."""
    if alpha <= 0 or beta <= 0:
        raise BadParameterError("beta-binomial shape parameters must be positive")
    kk = np.atleast_1d(np.asarray(k, dtype=np.int64))
    lg = math.lgamma
    const = lg(n + 1) + lg(alpha + beta) - lg(alpha) - lg(beta) - lg(n + alpha + beta)
    out = np.array(
        [
            const
            - lg(v + 1)
            - lg(n - v + 1)
            + lg(v + alpha)
            + lg(n - v + beta)
            for v in kk
        ]
    )
    return out if np.ndim(k) else out[0]


def betabinom_pmf_vector(n: int, alpha: float, beta: float) -> np.ndarray:
    """Full PMF over support {0..n}, normalized against rounding drift."""
    p = np.exp(betabinom_logpmf(np.arange(n + 1), n, alpha, beta))
    return p / p.sum()


def betabinom_mean_var(n: int, alpha: float, beta: float) -> tuple[float, float]:
    mu = alpha / (alpha + beta)
    rho = 1.0 / (alpha + beta + 1.0)
    return n * mu, n * mu * (1.0 - mu) * (1.0 + (n - 1.0) * rho)


def betabinom_params_from_moments(n: int, mean: float, var: float) -> tuple[float, float]:
    """Invert mean/variance to (alpha, beta); variance is floored just above
    the binomial minimum so the inversion stays in range."""
    mu = min(max(mean / n, 1e-6), 1.0 - 1e-6)
    binom_var = n * mu * (1.0 - mu)
    v = max(var, binom_var * 1.0001)
    rho = (v / binom_var - 1.0) / (n - 1.0)
    rho = min(max(rho, 1e-9), 0.999)
    s = 1.0 / rho - 1.0
    return mu * s, (1.0 - mu) * s


def overdispersion_from_samples(samples: np.ndarray, n_bits: int) -> float:
    """Method-of-moments intra-image bit correlation rho from correct-bit counts."""
    k = np.asarray(samples, dtype=np.float64)
    if k.size < 2:
        return 0.0
    p = float(np.mean(k)) / n_bits
    p = min(max(p, 1e-9), 1 - 1e-9)
    var = float(np.var(k, ddof=1))
    rho = (var / (n_bits * p * (1 - p)) - 1.0) / (n_bits - 1.0)
    return min(max(rho, 0.0), 0.999)


def ks_2samp(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(x, dtype=np.float64))
    b = np.sort(np.asarray(y, dtype=np.float64))
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise BadParameterError("ks_2samp requires nonempty samples")
    grid = np.concatenate([a, b])
    cdf1 = np.searchsorted(a, grid, side="right") / n1
    cdf2 = np.searchsorted(b, grid, side="right") / n2
    d = float(np.max(np.abs(cdf1 - cdf2)))
    en = math.sqrt(n1 * n2 / (n1 + n2))
    return d, _kolmogorov_sf((en + 0.12 + 0.11 / en) * d)


def _kolmogorov_sf(t: float) -> float:
    """Kolmogorov distribution survival function."""
    if t < 1.1e-16:
        return 1.0
    x = -2.0 * t * t
    sign, p, r = 1.0, 0.0, 1.0
    while True:
        term = math.exp(x * r * r)
        p += sign * term
        if term == 0.0 or term / max(p, 1e-300) <= 1.1e-16:
            break
        r += 1.0
        sign = -sign
    return max(0.0, min(1.0, 2.0 * p))
