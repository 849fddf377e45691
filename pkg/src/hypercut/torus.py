"""The flat contrast case: the circle-valued continuous walk whose m-th
Fourier mode decays as exp(-t m^2 / lambda).

The density has two expansions, used as mutual correctness oracles:

    Fourier:  p(x) = 1 + 2 sum_{m>=1} e^{-t m^2 / lambda} cos(2 pi m x)
    theta:    p(x) = sqrt(pi lambda / t) sum_n e^{-pi^2 lambda (x+n)^2 / t}

equal by Poisson summation.  The L^1 distance to uniform sits strictly
inside the sandwich

    e^{-t/lambda} <= ||p - 1||_1 <= sqrt(2 / (1 - e^{-2t/lambda})) e^{-t/lambda},

which makes the time to reach e^{-T} grow like lambda T: bounded
window-to-location ratio, hence no abrupt transition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import NumericRangeError

_TAIL_EPS = 1e-14


@dataclass(frozen=True)
class TorusConfig:
    """Scale lambda = a^2 > 0 and time t > 0; truncations are chosen from
    geometric tail bounds so the dropped mass is below 1e-12."""

    lam: float
    t: float

    def __post_init__(self):
        if self.lam <= 0.0 or self.t <= 0.0:
            raise ValueError("need lambda > 0 and t > 0")

    @property
    def rate(self) -> float:
        return self.t / self.lam

    def fourier_cutoff(self) -> int:
        # tail sum_{m>M} e^{-rate m^2} < e^{-rate M^2} / (1 - e^{-rate})
        m = 1
        while math.exp(-self.rate * m * m) / -math.expm1(-self.rate) > _TAIL_EPS:
            m += 1
            if m > 10_000:
                raise NumericRangeError("Fourier truncation ran away")
        return m + 1

    def theta_cutoff(self) -> int:
        a = math.pi ** 2 / self.rate
        n = 1
        while math.exp(-a * n * n) / -math.expm1(-a) > _TAIL_EPS:
            n += 1
            if n > 10_000:
                raise NumericRangeError("theta truncation ran away")
        return n + 1


def fourier_series(cfg: TorusConfig, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    m = np.arange(1, cfg.fourier_cutoff() + 1)
    terms = np.exp(-cfg.rate * m * m)
    return 1.0 + 2.0 * np.cos(2.0 * math.pi * np.multiply.outer(x, m)) @ terms


def theta_series(cfg: TorusConfig, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    nmax = cfg.theta_cutoff()
    ns = np.arange(-nmax, nmax + 1)
    shifted = np.add.outer(x, ns.astype(float))
    a = math.pi ** 2 / cfg.rate
    return math.sqrt(math.pi / cfg.rate) * np.exp(-a * shifted ** 2).sum(axis=-1)


def torus_density(cfg: TorusConfig, x, check_tol: float = 1e-10):
    """Density at x in [0, 1), evaluated by both series; the truncations
    auto-extend, and any residual disagreement beyond check_tol raises."""
    f = fourier_series(cfg, x)
    g = theta_series(cfg, x)
    gap = float(np.max(np.abs(f - g)))
    if gap > check_tol:
        raise NumericRangeError(
            f"series expansions disagree by {gap:.3g} after truncation")
    # the theta expansion has positive terms, so it stays positive where
    # the Fourier sum cancels down to rounding noise
    return g if np.ndim(x) else float(g)


def _centered_antiderivative(cfg: TorusConfig, x: float) -> float:
    """int_0^x (p - 1) = sum_m e^{-rate m^2} sin(2 pi m x) / (pi m)."""
    m = np.arange(1, cfg.fourier_cutoff() + 1)
    return float(np.sum(np.exp(-cfg.rate * m * m)
                        * np.sin(2.0 * math.pi * m * x) / (math.pi * m)))


def torus_l1(cfg: TorusConfig, via_quadrature: bool = True) -> float:
    """||p - 1||_1 on [0, 1].

    The density is symmetric and unimodal, so p - 1 changes sign at one
    point x* in (0, 1/2); adaptive quadrature of |p - 1| splits there.  The
    Fourier antiderivative gives the same value in closed form and is used
    as the cross-check (and the fallback for extreme rates).
    """
    dev = lambda x: torus_density(cfg, x) - 1.0
    hi = dev(0.0)
    if hi <= 0.0:  # numerically flat already
        return 0.0
    x_star = brentq(dev, 1e-12, 0.5, xtol=1e-14)
    closed = 2.0 * (2.0 * _centered_antiderivative(cfg, x_star))
    if not via_quadrature:
        return closed
    left, _ = quad(dev, 0.0, x_star, epsabs=1e-12, limit=200)
    mid, _ = quad(dev, x_star, 0.5, epsabs=1e-12, limit=200)
    value = 2.0 * (left - mid)
    if abs(value - closed) > 1e-9:
        raise NumericRangeError("quadrature and antiderivative disagree")
    return value


def torus_l1_bounds(cfg: TorusConfig) -> tuple[float, float]:
    """The sandwich (e^{-t/lam}, sqrt(2 / (1 - e^{-2 t/lam})) e^{-t/lam})."""
    lower = math.exp(-cfg.rate)
    upper = math.sqrt(2.0 / -math.expm1(-2.0 * cfg.rate)) * lower
    return lower, upper


def torus_l2(cfg: TorusConfig) -> float:
    """||p - 1||_2 from Parseval: sqrt(2 sum_m e^{-2 rate m^2})."""
    m = np.arange(1, cfg.fourier_cutoff() + 1)
    return math.sqrt(2.0 * float(np.sum(np.exp(-2.0 * cfg.rate * m * m))))


def mixing_time(lam: float, eps: float) -> float:
    """Smallest t with ||p_t - 1||_1 = eps, by bisection in the rate.

    The sandwich brackets the root: rate in [ln(1/eps) - 1, ln(1/eps) + 2].
    """
    if not 0.0 < eps < 2.0:
        raise ValueError("eps must lie in (0, 2)")
    f = lambda rate: torus_l1(TorusConfig(1.0, rate), via_quadrature=False) - eps
    lo = max(math.log(1.0 / eps) - 1.0, 1e-6)
    hi = math.log(1.0 / eps) + 2.0
    while f(lo) < 0.0:
        lo /= 2.0
        if lo < 1e-12:
            raise NumericRangeError("mixing-time bracket failed (low side)")
    while f(hi) > 0.0:
        hi += 2.0
        if hi > 1e6:
            raise NumericRangeError("mixing-time bracket failed (high side)")
    rate = brentq(f, lo, hi, xtol=1e-12)
    return lam * rate


def no_cutoff_profile(lambda_grid, T_grid) -> dict:
    """Table of the times t(e^{-T}) and the ratios t / (lambda T).

    A bounded ratio spread across the grid is the no-abrupt-transition
    signature: the window is proportional to the location.
    """
    rows = []
    for lam in lambda_grid:
        for T in T_grid:
            t = mixing_time(lam, math.exp(-T))
            rows.append({"lam": float(lam), "T": float(T), "t": t,
                         "ratio": t / (lam * T)})
    ratios = [row["ratio"] for row in rows]
    return {"rows": rows, "ratio_min": min(ratios), "ratio_max": max(ratios),
            "ratio_spread": max(ratios) / min(ratios)}
