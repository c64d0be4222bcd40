"""Brownian bridges of duration k*beta and their deviation laws.

Paths are sampled on the uniform grid t_i = i*beta/S, i = 0..k*S, by
recursive midpoint bisection, which is exact in law at every grid time.
The path measure used throughout is the non-normalised bridge measure whose
total mass is the free transition kernel (2*pi*beta*k)^(-d/2) *
exp(-|x-y|^2 / (2*k*beta)); sampling always uses the normalised law and the
mass is carried separately as a weight.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad


def bridge_mass(x, y, k, beta):
    """Total mass of the duration-k*beta bridge measure from x to y.

    Equals the Gaussian transition density (2*pi*beta*k)^(-d/2) *
    exp(-|x-y|^2/(2*k*beta)) with d inferred from the endpoint vectors.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("endpoint dimensions differ")
    if k < 1 or int(k) != k:
        raise ValueError("multiplicity k must be a positive integer")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    d = x.size
    tau = k * beta
    sq = float(np.sum((x - y) ** 2))
    return (2.0 * math.pi * tau) ** (-0.5 * d) * math.exp(-sq / (2.0 * tau))


def log_bridge_mass(x, y, k, beta):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = x.size
    tau = k * beta
    sq = float(np.sum((x - y) ** 2))
    return -0.5 * d * math.log(2.0 * math.pi * tau) - sq / (2.0 * tau)


@dataclass
class BridgePath:
    """Sampled bridge on the grid i*beta/S, i = 0..k*S.

    samples has shape (k*S + 1, d); samples[0] == x and samples[-1] == y.
    """

    samples: np.ndarray
    k: int
    slices_per_beta: int
    beta: float

    @property
    def dimension(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.k * self.beta

    def grid_times(self):
        return np.arange(self.samples.shape[0]) * (self.beta / self.slices_per_beta)

    def whole_step_points(self):
        """Positions at times m*beta, m = 0..k (the leg endpoints)."""
        return self.samples[:: self.slices_per_beta]

    def leg_midpoints(self):
        """Segment midpoints grouped per leg, shape (k, S, d).

        Row m holds the midpoints of the S grid segments covering
        [m*beta, (m+1)*beta]; these are the quadrature nodes for the
        equal-time pair energy.
        """
        mids = 0.5 * (self.samples[:-1] + self.samples[1:])
        return mids.reshape(self.k, self.slices_per_beta, self.dimension)


def _fill_bisection(samples, times, lo, hi, rng):
    """Recursively sample interior grid points of a bridge, exactly in law.

    samples[lo] and samples[hi] must already be set.  The midpoint index is
    Gaussian with the linear-interpolation mean and per-coordinate variance
    (t_m - t_a)(t_b - t_m)/(t_b - t_a).
    """
    stack = [(lo, hi)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        m = (a + b) // 2
        ta, tm, tb = times[a], times[m], times[b]
        w = (tm - ta) / (tb - ta)
        mean = (1.0 - w) * samples[a] + w * samples[b]
        var = (tm - ta) * (tb - tm) / (tb - ta)
        samples[m] = mean + math.sqrt(var) * rng.standard_normal(samples.shape[1])
        stack.append((a, m))
        stack.append((m, b))


def sample_bridge(x, y, k, S, beta, rng):
    """Draw a bridge from x to y of duration k*beta on the S-per-beta grid.

    Returns a BridgePath whose grid marginals follow the exact bridge law:
    at time t, Gaussian around the interpolated mean with per-coordinate
    variance t*(k*beta - t)/(k*beta).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if k < 1 or S < 1:
        raise ValueError("k and S must be positive integers")
    n = k * S
    d = x.size
    samples = np.empty((n + 1, d))
    samples[0] = x
    samples[n] = y
    times = np.arange(n + 1) * (beta / S)
    _fill_bisection(samples, times, 0, n, rng)
    return BridgePath(samples=samples, k=k, slices_per_beta=S, beta=beta)


def resample_leg(path, m, rng):
    """Fresh interior for leg m of a BridgePath, endpoints kept.

    Returns a new BridgePath; the input is not modified.
    """
    S = path.slices_per_beta
    lo, hi = m * S, (m + 1) * S
    samples = path.samples.copy()
    times = np.arange(path.samples.shape[0]) * (path.beta / S)
    _fill_bisection(samples, times, lo, hi, rng)
    return BridgePath(samples=samples, k=path.k, slices_per_beta=S, beta=path.beta)


def _alternating_image_sum(v, a, tau, tol=1e-14):
    """sum over integer l != 0 of (-1)^(l-1) exp(-(v - 2*l*a)^2 / (2*tau)).

    Terms decay like a Gaussian in l; truncation below tol is certified by
    monotonicity of the exponents once |2*l*a| exceeds |v| + a.
    """
    total = 0.0
    for sign in (1, -1):
        l = sign
        while True:
            term = (-1.0) ** (l - 1) * math.exp(-((v - 2.0 * l * a) ** 2) / (2.0 * tau))
            total += term
            if abs(term) < tol and abs(2 * l * a) > abs(v) + a:
                break
            l += sign
    return total


def max_deviation_tail(a, k, displacement, beta):
    """P(sup over the first beta of time of |w(t) - w(0)| > a) for a 1-d bridge.

    The bridge runs from 0 to `displacement` over duration k*beta and the
    probability is under the normalised bridge law.  For k = 1 this is the
    classical reflection series
        sum_{l != 0} (-1)^(l-1) exp(-(y - 2*l*a)^2 / (2*beta)) / exp(-y^2/(2*beta))
    valid for |displacement| < a.  For k > 1 the first-leg endpoint u is
    integrated out numerically: conditioned on w(beta) = u the first leg is a
    beta-bridge, and |u| >= a forces a deviation outright.
    """
    if a <= 0:
        return 1.0
    y = float(displacement)
    if k == 1:
        if abs(y) >= a:
            return 1.0
        series = _alternating_image_sum(y, a, beta)
        return min(1.0, max(0.0, series / math.exp(-y * y / (2.0 * beta))))

    tau_rest = (k - 1) * beta

    def crossing_mass(u):
        # non-normalised first-leg tail mass at intermediate point u
        g_rest = math.exp(-((u - y) ** 2) / (2.0 * tau_rest))
        if abs(u) >= a:
            first = math.exp(-(u * u) / (2.0 * beta))
        else:
            first = _alternating_image_sum(u, a, beta)
        return first * g_rest

    # integrate over the three smooth pieces; Gaussian decay localises u
    width = 8.0 * math.sqrt(beta + tau_rest) + abs(y) + a
    pieces = [(-width, -a), (-a, a), (a, width)]
    total = 0.0
    for lo, hi in pieces:
        val, _ = quad(crossing_mass, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += val
    # the two leg prefactors combine against the full-bridge mass
    prefac = 1.0 / (2.0 * math.pi * math.sqrt(beta * tau_rest))
    mass = (2.0 * math.pi * k * beta) ** (-0.5) * math.exp(-y * y / (2.0 * k * beta))
    return min(1.0, max(0.0, prefac * total / mass))


def slice_stay_probability(lo, hi, u, v, tau, n_images=3):
    """P(a Brownian bridge from u to v over time tau stays inside (lo, hi)).

    Exact image series for the two-barrier killed kernel divided by the free
    kernel.  u, v may be arrays (elementwise).  Endpoints outside the
    interval give probability 0.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    h = hi - lo
    us = u - lo
    vs = v - lo
    inside = (us > 0) & (us < h) & (vs > 0) & (vs < h)
    num = np.zeros(np.broadcast(us, vs).shape)
    for n in range(-n_images, n_images + 1):
        num += np.exp(-((vs - us + 2.0 * n * h) ** 2) / (2.0 * tau))
        num -= np.exp(-((vs + us + 2.0 * n * h) ** 2) / (2.0 * tau))
    denom = np.exp(-((vs - us) ** 2) / (2.0 * tau))
    out = np.where(inside, np.clip(num / denom, 0.0, 1.0), 0.0)
    return out


def path_stay_probability(samples_1d, lo, hi, tau_slice):
    """Survival probability in (lo, hi) of the continuous bridge behind a skeleton.

    Product over consecutive grid pairs of the exact conditional two-barrier
    stay probability.  This removes the discretisation bias a bare
    grid-membership test would have: excursions between grid times are
    accounted for in law.
    """
    s = np.asarray(samples_1d, dtype=float)
    if np.any((s <= lo) | (s >= hi)):
        return 0.0
    probs = slice_stay_probability(lo, hi, s[:-1], s[1:], tau_slice)
    return float(np.prod(probs))


def box_stay_probability(samples, box, tau_slice):
    """Per-coordinate product of interval survival for a d-dim path skeleton."""
    total = 1.0
    for i in range(samples.shape[1]):
        c = box.center[i]
        total *= path_stay_probability(samples[:, i], c - box.half_side,
                                       c + box.half_side, tau_slice)
        if total == 0.0:
            break
    return total


def empirical_max_deviation_tail(a, k, displacement, beta, S, n_draws, rng):
    """Monte Carlo estimate of max_deviation_tail from sampled skeletons.

    Each draw contributes 1 minus the conditional probability that the
    continuous bridge stays inside (-a, a) relative to its start during the
    first leg, so the estimate is unbiased for the continuum law at any S.
    Returns (estimate, standard_error).
    """
    vals = np.empty(n_draws)
    tau = beta / S
    for i in range(n_draws):
        path = sample_bridge([0.0], [float(displacement)], k, S, beta, rng)
        first_leg = path.samples[: S + 1, 0]
        stay = path_stay_probability(first_leg, -a, a, tau)
        vals[i] = 1.0 - stay
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_draws))
    return est, se


def fit_gaussian_tail_envelope(params, box, k_max, a_grid):
    """Constants (c0, c1) with tail(a, k) <= c0 * exp(-c1 * a^2) on the grid.

    tail(a, k) bounds the probability that a loop of duration k*beta anchored
    in the box, or a pinned path with both whole-step endpoints in the box,
    wanders further than Euclidean distance a from the box during one leg.
    A union bound over coordinates reduces both cases to the 1-d deviation
    law; pinned displacements range over values admissible for the
    reflection series.  The fit is an envelope: a least-squares slope on
    log-tails versus a^2, with the intercept pushed up so no grid point
    exceeds the bound.  Raises ValueError when the tails do not decrease.
    """
    a_grid = np.asarray(a_grid, dtype=float)
    if a_grid.size < 2:
        raise ValueError("envelope fit needs at least two grid points")
    if np.any(a_grid <= 0):
        raise ValueError("deviation grid must be positive")
    d = box.dimension
    beta = params.beta
    root_d = math.sqrt(d)
    tails = []
    for a in a_grid:
        worst = 0.0
        a1 = a / root_d
        for k in range(1, k_max + 1):
            # anchored loop: start and end coincide
            worst = max(worst, min(1.0, d * max_deviation_tail(a1, k, 0.0, beta)))
            # pinned path: endpoints anywhere in the box, displacement up to
            # the box side but capped inside the series' validity region
            disp = min(2.0 * box.half_side, 0.95 * a1)
            worst = max(worst, min(1.0, d * max_deviation_tail(a1, k, disp, beta)))
        tails.append(max(worst, 1e-300))
    tails = np.asarray(tails)
    logs = np.log(tails)
    x = a_grid ** 2
    slope = float(np.polyfit(x, logs, 1)[0])
    if slope >= 0:
        raise ValueError("deviation tails do not decay on this grid; cannot fit envelope")
    c1 = -slope
    c0 = float(np.exp(np.max(logs + c1 * x)))
    return c0, c1
