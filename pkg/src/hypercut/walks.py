"""Samplers for the fixed-step-length walk and the continuous-time walk on
the half-plane, with the log-height CLT, Hoeffding, horizontal-coordinate,
and distance tail checks.

Randomness policy.  Every consumer derives streams from a 64-bit master
seed by the documented rule

    stream(seed, tag, block) = Generator(Philox(key=[seed, tag]).jumped(block))

with fixed-size walker blocks, so results are bit-identical for any worker
count and any block scheduling order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .errors import ConfigError
from .geometry import PointH, log_sphere_step_arrays, sphere_point
from .radial import RadialGrid
from .spectral import clt_constants, heat_radial_density

BLOCK = 1 << 14
# Anderson-Darling 1% critical value for a fully specified normal null
# (the standardization constants come from quadrature, not the sample).
AD_CRIT_1PCT = 3.857
MIN_STEP_LENGTH = 0.05


def stream(seed: int, tag: int, block: int = 0) -> np.random.Generator:
    """The package-wide seed-splitting rule (see module docstring)."""
    bg = np.random.Philox(key=np.array([seed & (2 ** 64 - 1), tag],
                                       dtype=np.uint64))
    if block:
        bg = bg.jumped(block)
    return np.random.Generator(bg)


def map_blocks(fn, n_items: int, workers: int = 1, block: int = BLOCK):
    """Apply fn(block_index, lo, hi) over fixed-size blocks; results come
    back in block order regardless of the executor."""
    spans = [(b, lo, min(lo + block, n_items))
             for b, lo in enumerate(range(0, n_items, block))]
    if workers <= 1:
        return [fn(*span) for span in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: fn(*s), spans))


@dataclass(frozen=True)
class WalkConfig:
    """Parameters of a half-plane walk ensemble."""

    r1: float
    k: int
    n_walkers: int
    seed: int
    z0: PointH = PointH(0.0, 1.0)

    def __post_init__(self):
        if self.r1 <= 0.0:
            raise ConfigError("step length must be positive")
        if self.n_walkers < 1 or self.k < 0:
            raise ConfigError("need n_walkers >= 1 and k >= 0")


@dataclass
class WalkStats:
    """Per-step aggregates and final-step samples of a walk ensemble."""

    config: WalkConfig
    mean_lny: np.ndarray
    var_lny: np.ndarray
    mean_dist: np.ndarray
    var_dist: np.ndarray
    mean_x2: np.ndarray
    max_dist: np.ndarray
    final_lny: np.ndarray
    final_x: np.ndarray
    final_dist: np.ndarray
    dist_quantiles: dict = field(default_factory=dict)

    def equals(self, other: "WalkStats") -> bool:
        return (self.config == other.config
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("mean_lny", "var_lny", "mean_dist",
                                  "var_dist", "mean_x2", "max_dist",
                                  "final_lny", "final_x", "final_dist")))


def _distances_log(x, lny, x0, lny0):
    """d(z, z0) from (x, log y) state, stable when y underflows."""
    y = np.exp(lny)
    y0 = math.exp(lny0)
    num = (x - x0) ** 2 + (y - y0) ** 2
    with np.errstate(divide="ignore"):
        big_log = np.log(num) - math.log(2.0) - lny - lny0
    small = big_log < 30.0
    out = np.empty_like(x)
    out[small] = np.arccosh(1.0 + np.exp(big_log[small]))
    out[~small] = math.log(2.0) + big_log[~small]
    out[num == 0.0] = 0.0
    return out


def step_discrete(z: PointH, r1: float, rng) -> PointH:
    """One step: uniform direction on the radius-r1 circle around z."""
    if r1 == 0.0:
        return z
    return sphere_point(z, r1, rng.uniform(0.0, math.pi))


def walk_discrete(config: WalkConfig, workers: int = 1) -> WalkStats:
    """Run the ensemble and aggregate per-step statistics.

    Walkers evolve in (x, log y); distances to the start are computed in a
    log-robust form, so long walks do not overflow.
    """
    k, n = config.k, config.n_walkers
    x0, lny0 = config.z0.x, math.log(config.z0.y)

    def run_block(b, lo, hi):
        rng = stream(config.seed, tag=1, block=b)
        m = hi - lo
        x = np.full(m, x0)
        lny = np.full(m, lny0)
        sums = np.zeros((max(k, 1), 5))
        maxd = np.zeros(max(k, 1))
        for step in range(k):
            theta = rng.uniform(0.0, math.pi, m)
            x, lny = log_sphere_step_arrays(x, lny, config.r1, theta)
            d = _distances_log(x, lny, x0, lny0)
            sums[step] = (lny.sum(), (lny ** 2).sum(), d.sum(),
                          (d ** 2).sum(), (np.minimum(x, 1e150) ** 2).sum())
            maxd[step] = d.max()
        d = _distances_log(x, lny, x0, lny0)
        return sums, maxd, lny.copy(), x.copy(), d

    parts = map_blocks(run_block, n, workers)
    sums = np.sum([p[0] for p in parts], axis=0)
    maxd = np.max([p[1] for p in parts], axis=0)
    final_lny = np.concatenate([p[2] for p in parts])
    final_x = np.concatenate([p[3] for p in parts])
    final_dist = np.concatenate([p[4] for p in parts])
    mean_lny = sums[:, 0] / n
    var_lny = sums[:, 1] / n - mean_lny ** 2
    mean_dist = sums[:, 2] / n
    var_dist = sums[:, 3] / n - mean_dist ** 2
    mean_x2 = sums[:, 4] / n
    if k == 0:
        mean_lny = var_lny = mean_dist = var_dist = mean_x2 = maxd = \
            np.zeros(0)
    qs = (0.1, 0.25, 0.5, 0.75, 0.9)
    quantiles = dict(zip(qs, np.quantile(final_dist, qs))) if k else {}
    return WalkStats(config, mean_lny, var_lny, mean_dist, var_dist, mean_x2,
                     maxd, final_lny, final_x, final_dist, quantiles)


class BrownianRadialSampler:
    """Inverse-CDF sampler of the radial law of the time-t continuous walk,
    precomputed on a grid once per t."""

    def __init__(self, t: float, grid: RadialGrid | None = None):
        self.t = t
        self.measure = heat_radial_density(t, grid)
        self._edges = self.measure.grid.edges
        self._cdf = self.measure.cdf_at_edges()
        self._cdf /= self._cdf[-1]

    def sample_radii(self, n: int, rng) -> np.ndarray:
        u = rng.random(n)
        return np.interp(u, self._cdf, self._edges)

    def jump(self, z: PointH, rng) -> PointH:
        r = float(self.sample_radii(1, rng)[0])
        return sphere_point(z, r, rng.uniform(0.0, math.pi))


def brownian_jump(z: PointH, t: float, rng,
                  sampler: BrownianRadialSampler | None = None) -> PointH:
    """One continuous-time jump: radius from the time-t radial law,
    direction uniform.  Pass a sampler to amortize the grid setup."""
    if sampler is None:
        sampler = BrownianRadialSampler(t)
    elif sampler.t != t:
        raise ValueError("sampler was built for a different time")
    return sampler.jump(z, rng)


def ad_statistic_normal(x: np.ndarray) -> float:
    """Anderson-Darling statistic against the standard normal with both
    parameters fixed (compare against AD_CRIT_1PCT)."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    log_cdf = sstats.norm.logcdf(x)
    log_sf = sstats.norm.logsf(x)
    i = np.arange(1, n + 1)
    return float(-n - np.mean((2 * i - 1) * (log_cdf + log_sf[::-1])))


def clt_check(config: WalkConfig, stats: WalkStats | None = None,
              workers: int = 1) -> dict:
    """Normality and moment checks of the final log-height against the
    quadrature constants.

    Requires k >= 50 and n >= 1e4; smaller runs are skipped with a notice
    instead of reporting an underpowered verdict.
    """
    if config.k < 50 or config.n_walkers < 10_000:
        return {"skipped": True,
                "notice": f"k={config.k}, n={config.n_walkers} too small "
                          "for a calibrated normality test"}
    consts = clt_constants(config.r1)
    if stats is None:
        stats = walk_discrete(config, workers)
    k, n, r1 = config.k, config.n_walkers, config.r1
    standardized = ((stats.final_lny + consts.alpha * r1 * k)
                    / (r1 * math.sqrt(consts.sigma2 * k)))
    a2 = ad_statistic_normal(standardized)
    mean_drift = float(-stats.final_lny.mean() / k)
    mean_tol = 3.0 * math.sqrt(consts.sigma2) * r1 / math.sqrt(k * n)
    var_hat = float(np.var(stats.final_lny / (r1 * math.sqrt(k))))
    return {
        "skipped": False,
        "alpha": consts.alpha,
        "sigma2": consts.sigma2,
        "ad_statistic": a2,
        "ad_pass_1pct": a2 < AD_CRIT_1PCT,
        "mean_drift": mean_drift,
        "mean_target": consts.alpha * r1,
        "mean_tol": mean_tol,
        "mean_ok": abs(mean_drift - consts.alpha * r1) <= mean_tol,
        "var_hat": var_hat,
        "var_rel_err": abs(var_hat / consts.sigma2 - 1.0),
        "var_ok": abs(var_hat / consts.sigma2 - 1.0) <= 0.05,
    }


def _tail_fit(lams: np.ndarray, probs: np.ndarray, min_count: int, n: int):
    counts = probs * n
    keep = (counts >= min_count) & (probs < 1.0)
    censored = int(np.count_nonzero(~keep))
    if keep.sum() < 3:
        return {"fit_ok": False, "censored": censored}
    xs = lams[keep] ** 2
    ys = np.log(probs[keep])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = np.sum((ys - ys.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 0.0
    return {"fit_ok": True, "slope": float(slope), "c": float(-slope),
            "r2": float(r2), "censored": censored,
            "lams": lams[keep], "probs": probs[keep]}


def tail_checks(config: WalkConfig, lambda_grid=None,
                stats: WalkStats | None = None, workers: int = 1,
                min_count: int = 20) -> dict:
    """Empirical tail decay of the three deviation families (log-height,
    horizontal coordinate squared, distance), each fitted log-linearly in
    lambda^2.

    Step lengths below 0.05 are refused: the constants degrade as the step
    shrinks and the fits stop meaning anything.
    """
    if config.r1 < MIN_STEP_LENGTH:
        raise ConfigError(f"step length {config.r1} below {MIN_STEP_LENGTH}; "
                          "tail fits are unreliable in that regime")
    if lambda_grid is None:
        lambda_grid = np.linspace(0.25, 3.0, 12)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    consts = clt_constants(config.r1)
    if stats is None:
        stats = walk_discrete(config, workers)
    k, n, r1 = config.k, config.n_walkers, config.r1
    drift = consts.alpha * r1 * k
    sqk = math.sqrt(k)
    reports = {}
    dev_lny = np.abs(stats.final_lny + drift)
    probs = np.array([(dev_lny >= lam * r1 * sqk).mean()
                      for lam in lambda_grid])
    reports["log_height"] = _tail_fit(lambda_grid, probs, min_count, n)
    log_x2 = 2.0 * np.log(np.abs(stats.final_x) + 1e-300)
    probs = np.array([(log_x2 >= lam * r1 * sqk).mean()
                      for lam in lambda_grid])
    reports["x_squared"] = _tail_fit(lambda_grid, probs, min_count, n)
    dev_d = np.abs(stats.final_dist - drift)
    probs = np.array([(dev_d >= lam * sqk).mean() for lam in lambda_grid])
    reports["distance"] = _tail_fit(lambda_grid, probs, min_count, n)
    reports["constants"] = {"alpha": consts.alpha, "sigma2": consts.sigma2}
    return reports
