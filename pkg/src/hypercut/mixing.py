"""Desk-scale mixing experiments on the congruence quotients: total
variation profiles of the fixed-step walk, transition location and width,
distance histograms against the ball-volume floor, median concentration of
distances, and the dilation inequality check.

The measurable partition lives in (x, u = 1/y) coordinates on the standard
fundamental domain, where the invariant measure is Lebesgue, so every cell
measure has a closed form through asin.  A cell of the quotient is a
(sheet, base-cell) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ResolutionError
from .geometry import PointH, ball_volume, sphere_step_arrays
from .modular import (MODULAR_AREA, QuotientPoint, injectivity_radius,
                      modq_context, quotient_distances_from, quotient_R,
                      quotient_volume, reduce_points_arrays,
                      sample_uniform_quotient, truncated_domain_fraction)
from .walks import map_blocks, stream

TV_BLOCK = 1 << 16
EPS_GRID = (1.9, 1.5, 1.0, 0.5, 0.1)
U_TOP = 2.0 / math.sqrt(3.0)


def _domain_height(x):
    """u-coordinate of the domain boundary arc: (1 - x^2)^{-1/2}."""
    return 1.0 / np.sqrt(1.0 - np.asarray(x, dtype=float) ** 2)


def _clip_primitive(x, u_lo: float, u_hi: float):
    """Odd primitive P with P' (x) = (min(u_hi, h(x)) - u_lo)^+ on x >= 0."""
    x = np.asarray(x, dtype=float)
    sign = np.sign(x)
    ax = np.minimum(np.abs(x), 0.5)
    xa = 0.0 if u_lo <= 1.0 else math.sqrt(1.0 - u_lo ** -2)
    xb = 0.0 if u_hi <= 1.0 else math.sqrt(1.0 - u_hi ** -2)
    mid_hi = np.clip(ax, xa, xb)
    out = (np.arcsin(mid_hi) - math.asin(xa)) - u_lo * (mid_hi - xa)
    out += (u_hi - u_lo) * np.maximum(ax - xb, 0.0)
    return sign * out


def _cell_measure(x_lo, x_hi, u_lo: float, u_hi: float) -> float:
    if u_hi <= u_lo:
        return 0.0
    return float(_clip_primitive(x_hi, u_lo, u_hi)
                 - _clip_primitive(x_lo, u_lo, u_hi))


@dataclass
class CellPartition:
    """Rectangular (x, u) cells clipped to the fundamental domain, with
    exact per-cell measures, replicated over the cover-group sheets.

    The u-grid is split at 1/cusp_cap: the strip u < 1/cusp_cap (points
    higher than the cap) gets its own coarser cells, so the partition still
    covers the whole surface while the capped part sums to pi/3 - 1/Y."""

    q: int
    x_edges: np.ndarray
    u_edges: np.ndarray
    base_measures: np.ndarray = field(init=False)
    n_sheets: int = field(init=False)

    def __post_init__(self):
        ctx = modq_context(self.q)
        self.n_sheets = ctx.size
        nx, nu = len(self.x_edges) - 1, len(self.u_edges) - 1
        meas = np.empty(nx * nu)
        for iu in range(nu):
            for ix in range(nx):
                meas[iu * nx + ix] = _cell_measure(
                    self.x_edges[ix], self.x_edges[ix + 1],
                    self.u_edges[iu], self.u_edges[iu + 1])
        self.base_measures = meas

    @classmethod
    def build(cls, q: int, nx: int, nu: int, cusp_cap: float = 10.0,
              n_cusp: int = 4) -> "CellPartition":
        if cusp_cap < 2.0:
            raise ConfigError("cusp cap must be >= 2")
        x_edges = np.linspace(-0.5, 0.5, nx + 1)
        u_edges = np.concatenate([
            np.linspace(0.0, 1.0 / cusp_cap, n_cusp + 1),
            np.linspace(1.0 / cusp_cap, U_TOP, nu + 1)[1:],
        ])
        part = cls(q, x_edges, u_edges)
        part.cusp_cap = cusp_cap
        return part

    @property
    def n_base(self) -> int:
        return len(self.base_measures)

    @property
    def n_cells(self) -> int:
        return self.n_base * self.n_sheets

    def base_total(self) -> float:
        return float(self.base_measures.sum())

    def capped_total(self) -> float:
        """Sum of cell measures below the cusp cap, over all sheets."""
        cap_u = getattr(self, "cusp_cap", None)
        if cap_u is None:
            return self.n_sheets * self.base_total()
        nx = len(self.x_edges) - 1
        keep = np.repeat(self.u_edges[:-1] >= 1.0 / cap_u - 1e-12, nx)
        return self.n_sheets * float(self.base_measures[keep].sum())

    def cell_probabilities(self) -> np.ndarray:
        pi_base = self.base_measures / (self.n_sheets * MODULAR_AREA)
        return np.tile(pi_base, self.n_sheets)

    def max_cell_fraction(self) -> float:
        return float(self.base_measures.max()) / quotient_volume(self.q)

    def base_cells_of(self, x, u) -> np.ndarray:
        ix = np.clip(np.searchsorted(self.x_edges, x, "right") - 1,
                     0, len(self.x_edges) - 2)
        iu = np.clip(np.searchsorted(self.u_edges, u, "right") - 1,
                     0, len(self.u_edges) - 2)
        return iu * (len(self.x_edges) - 1) + ix

    def cells_of(self, x, y, sheet_ids) -> np.ndarray:
        return sheet_ids * self.n_base + self.base_cells_of(x, 1.0 / np.asarray(y))

    def sample_in_cells(self, cell_ids, per_cell: int, rng):
        """Uniform mu-samples inside given base cells (rejection against
        the domain arc); returns (x, y) arrays."""
        nx = len(self.x_edges) - 1
        xs, ys = [], []
        for cid in cell_ids:
            iu, ix = divmod(int(cid), nx)
            got = 0
            while got < per_cell:
                m = 4 * per_cell
                x = rng.uniform(self.x_edges[ix], self.x_edges[ix + 1], m)
                u = rng.uniform(self.u_edges[iu], self.u_edges[iu + 1], m)
                ok = u <= _domain_height(x)
                take = min(int(ok.sum()), per_cell - got)
                xs.append(x[ok][:take])
                ys.append(1.0 / u[ok][:take])
                got += take
        return np.concatenate(xs), np.concatenate(ys)


def default_partition(q: int, cusp_cap: float = 10.0) -> CellPartition:
    """Cells sized just under the resolution floor mu(X)/1000: fine enough
    for the precondition, as coarse as allowed so the plug-in bias stays
    comparable across levels."""
    side = math.sqrt(0.8 * quotient_volume(q) / 1000.0)
    nx = max(3, int(math.ceil(1.0 / side)))
    nu = max(3, int(math.ceil(U_TOP / side)))
    return CellPartition.build(q, nx, nu, cusp_cap)


@dataclass
class TVProfile:
    """Estimated L1 distance to uniform along the walk."""

    q: int
    ks: np.ndarray
    tv: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_walkers: int
    n_cells: int
    starved_cells: int
    bias_note: float
    r1: float
    seed: int


def _walk_histograms(q, x0, r1, k_grid, n_walkers, partition, seed, workers):
    ctx = modq_context(q)
    start_sheet = ctx.index[x0.sheet.key()]
    k_grid = sorted(set(int(k) for k in k_grid))
    k_max = k_grid[-1] if k_grid else 0
    n_cells = partition.n_cells

    def run_block(b, lo, hi):
        rng = stream(seed, tag=2, block=b)
        m = hi - lo
        x = np.full(m, x0.base.x)
        y = np.full(m, x0.base.y)
        sheets = np.full(m, start_sheet, dtype=np.int64)
        counts = np.zeros((len(k_grid), n_cells), dtype=np.int64)
        slot = 0
        if k_grid and k_grid[0] == 0:
            cells = partition.cells_of(x, y, sheets)
            counts[0] = np.bincount(cells, minlength=n_cells)
            slot = 1
        for step in range(1, k_max + 1):
            theta = rng.uniform(0.0, math.pi, m)
            x, y = sphere_step_arrays(x, y, r1, theta)
            x, y, sheets = reduce_points_arrays(x, y, sheets, ctx)
            if slot < len(k_grid) and k_grid[slot] == step:
                cells = partition.cells_of(x, y, sheets)
                counts[slot] = np.bincount(cells, minlength=n_cells)
                slot += 1
        return counts

    parts = map_blocks(run_block, n_walkers, workers, block=TV_BLOCK)
    return k_grid, np.sum(parts, axis=0)


def tv_profile(q: int, x0: QuotientPoint, r1: float, k_grid, n_walkers: int,
               partition: CellPartition | None = None, seed: int = 0,
               workers: int = 1, n_boot: int = 200,
               r0_floor: float = 0.1) -> TVProfile:
    """Plug-in estimate of || walk law at step k - uniform ||_1 on the
    level-q quotient, with a walker bootstrap CI per grid point.

    Preconditions enforced: the start point has injectivity radius at least
    r0_floor, and no cell exceeds mu(X)/1000.
    """
    if x0.q != q:
        raise ConfigError("start point lives on a different quotient")
    inj = injectivity_radius(x0, r_max=max(4.0, 2.5 * r0_floor))
    if inj.value < r0_floor:
        raise ConfigError(
            f"start point has injectivity radius {inj.value:.3g} < {r0_floor}")
    if partition is None:
        partition = default_partition(q)
    if partition.max_cell_fraction() > 1.0 / 1000.0 + 1e-12:
        raise ResolutionError("partition has a cell above mu(X)/1000")
    ks, counts = _walk_histograms(q, x0, r1, k_grid, n_walkers, partition,
                                  seed, workers)
    pi = partition.cell_probabilities()
    n = n_walkers
    tv = np.abs(counts / n - pi).sum(axis=1)
    boot_rng = stream(seed, tag=3)
    lo = np.empty_like(tv)
    hi = np.empty_like(tv)
    for i in range(len(ks)):
        p_hat = counts[i] / n
        resampled = boot_rng.multinomial(n, p_hat, size=n_boot)
        tv_boot = np.abs(resampled / n - pi).sum(axis=1)
        lo[i], hi[i] = np.percentile(tv_boot, [2.5, 97.5])
    expected = n * pi
    starved = int(np.count_nonzero((expected < 5.0) & (pi > 0)))
    bias = float(np.sum(np.sqrt(2.0 * pi * (1.0 - pi) / (math.pi * n))))
    return TVProfile(q, np.array(ks), tv, lo, hi, n, partition.n_cells,
                     starved, bias, r1, seed)


def cutoff_locator(times, tvs, time_scale: float, R_X: float,
                   eps_grid=EPS_GRID) -> dict:
    """Crossing times t(eps) of a TV profile, plus the normalized transition
    location t(1.0) * scale / R_X and width (t(0.1) - t(1.9)) * scale / sqrt(R_X).

    ``times`` may be discrete step counts or continuous times;
    ``time_scale`` converts one unit into geometric distance (the per-step
    drift for the discrete walk, 1.0 for continuous profiles).
    """
    times = np.asarray(times, dtype=float)
    tvs = np.asarray(tvs, dtype=float)
    crossing = {}
    for eps in eps_grid:
        below = np.nonzero(tvs < eps)[0]
        if below.size == 0:
            raise ValueError(
                f"profile never drops below eps={eps}: not bracketed")
        j = below[0]
        if j == 0:
            crossing[eps] = float(times[0])
            continue
        t0, t1 = times[j - 1], times[j]
        v0, v1 = tvs[j - 1], tvs[j]
        frac = (v0 - eps) / (v0 - v1) if v1 < v0 else 1.0
        crossing[eps] = float(t0 + frac * (t1 - t0))
    width = crossing[0.1] - crossing[1.9]
    return {
        "t_eps": crossing,
        "location_normalized": crossing[1.0] * time_scale / R_X,
        "width_normalized": width * time_scale / math.sqrt(R_X),
        "width_to_location": width / crossing[1.0] if crossing[1.0] > 0
        else math.inf,
    }


def distance_histogram(q: int, x0: QuotientPoint, n_samples: int,
                       r_max: float, seed: int = 0, cusp_cap: float = 10.0,
                       gammas=(0.5, 1.0, 2.0), r0_floor: float = 0.1) -> dict:
    """Empirical law of the distance from x0 to a uniform sample.

    Reports, per gamma, the mass below R_X - gamma ln R_X scaled by
    R_X^gamma (the ball-volume floor needs no spectral input), the mass
    beyond R_X + gamma ln R_X, and a small-radius volume comparison.
    Samples farther than r_max are counted as right-tail overflow.
    """
    R = quotient_R(q)
    if r_max < R + 3.0 * math.log(R):
        raise ConfigError("r_max below R_X + 3 ln R_X cannot resolve the tail")
    inj = injectivity_radius(x0, r_max=4.0)
    if inj.value < r0_floor:
        raise ConfigError(
            f"start point has injectivity radius {inj.value:.3g} < {r0_floor}")
    rng = stream(seed, tag=4)
    (xs, ys, sheets), trunc = sample_uniform_quotient(q, cusp_cap, rng,
                                                      n_samples)
    dists = quotient_distances_from(x0, xs, ys, sheets, r_max)
    finite = dists[np.isfinite(dists)]
    n_exceed = int(n_samples - finite.size)
    vol = quotient_volume(q)
    # Samples live on the truncated surface; a count-based fraction times
    # (1 - trunc) is the mu-fraction, exact for thresholds below the
    # distance to the cusp cap (~ln Y - 1), where the excluded mass cannot
    # contribute.
    correction = 1.0 - trunc
    lower, upper = {}, {}
    for g in gammas:
        thr_lo = R - g * math.log(R)
        frac_lo = float((finite < thr_lo).sum() / n_samples) * correction
        lower[g] = {"threshold": thr_lo, "fraction": frac_lo,
                    "scaled": frac_lo * R ** g}
        thr_hi = R + g * math.log(R)
        if thr_hi <= r_max:
            n_hi = int((finite > thr_hi).sum()) + n_exceed
            upper[g] = {"threshold": thr_hi,
                        "fraction": n_hi / n_samples * correction,
                        "cusp_mass_unresolved": trunc}
    r_grid = np.linspace(0.4, min(1.8, r_max), 8)
    volume_rows = [{"r": float(r),
                    "fraction": float((finite < r).sum() / n_samples)
                    * correction,
                    "ball_fraction": ball_volume(float(r)) / vol}
                   for r in r_grid]
    return {"q": q, "R_X": R, "distances": finite, "n_exceed": n_exceed,
            "n_samples": n_samples, "truncated_fraction": trunc,
            "injectivity_radius": inj.value, "lower_tail": lower,
            "upper_tail": upper, "volume_comparison": volume_rows,
            "r_max": r_max}


@dataclass(frozen=True)
class ConcentrationReport:
    r_med: float
    a: float
    slope: float
    r2: float
    n_samples: int
    window_80: float
    inconclusive: bool


def concentration_fit(distances, n_exceed: int = 0,
                      exceed_floor: float | None = None,
                      gamma_grid=None, min_count: int = 10) -> ConcentrationReport:
    """Fit the two-sided tail mass around the empirical median to a
    geometric law a^{-gamma}.

    Overflow samples (distance known only to exceed ``exceed_floor``) join
    every tail they certainly belong to; the gamma grid is capped so no
    tail is ambiguous.  R^2 below 0.7 is reported as inconclusive.
    """
    d = np.sort(np.asarray(distances, dtype=float))
    n = d.size + n_exceed
    if n < 10_000:
        raise ConfigError("concentration fit needs at least 1e4 samples")
    if d.size < 2 or d[0] == d[-1]:
        raise ConfigError("degenerate sample: no spread to fit")
    if n_exceed > 0 and exceed_floor is None:
        raise ConfigError("overflow samples need their floor value")
    # median including overflow mass on the right
    mid = (n - 1) / 2.0
    r_med = float(np.interp(mid, np.arange(d.size), d)) \
        if mid < d.size - 1 else float(d[-1])
    g_hi = 0.9 * (d[-1] - r_med) if n_exceed == 0 \
        else 0.9 * min(exceed_floor - r_med, r_med)
    if gamma_grid is None:
        gamma_grid = np.linspace(0.2, max(g_hi, 0.4), 10)
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    tails = np.array([(np.sum(np.abs(d - r_med) >= g) + n_exceed) / n
                      for g in gamma_grid])
    keep = tails * n >= min_count
    if keep.sum() < 3:
        raise ConfigError("tail counts too small to fit")
    slope, _ = np.polyfit(gamma_grid[keep], np.log(tails[keep]), 1)
    resid = np.log(tails[keep]) - np.polyval(
        np.polyfit(gamma_grid[keep], np.log(tails[keep]), 1),
        gamma_grid[keep])
    ss = np.sum((np.log(tails[keep]) - np.log(tails[keep]).mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2) / ss) if ss > 0 else 0.0
    q10, q90 = np.quantile(d, [0.1, 0.9]) if n_exceed == 0 else (
        np.quantile(d, 0.1), np.interp(0.9 * n, np.arange(d.size), d))
    return ConcentrationReport(
        r_med=r_med, a=math.exp(-slope), slope=float(slope), r2=r2,
        n_samples=n, window_80=float(q90 - q10),
        inconclusive=bool(r2 < 0.7))


def kappa(r: float, p: float) -> float:
    """The dilation constant (r + 1)^2 e^{-2r/p}."""
    rate = 0.0 if math.isinf(p) else 2.0 * r / p
    return (r + 1.0) ** 2 * math.exp(-rate)


def isoperimetric_check(q: int, region, r: float, p: float, n_mc: int,
                        seed: int = 0, partition: CellPartition | None = None,
                        cusp_cap: float = 30.0, refs_per_cell: int = 8) -> dict:
    """Monte-Carlo check of mu(Y_r)/mu(X) >= c / (kappa_{r,p} (1-c) + c).

    ``region`` is ("ball", center: QuotientPoint, r0) or
    ("cells", partition, [base-cell ids on sheet 0]).  For a ball the
    dilated set is the exact ball of radius r0 + r; for cell unions the
    dilation is probed against reference points sampled inside the region,
    which can only under-count membership, so a pass is sound.  ``p`` must
    be a certified upper bound for the surface's integrability exponent.
    """
    if r > 5.0:
        raise ConfigError("dilation radius above 5 not supported")
    vol = quotient_volume(q)
    rng = stream(seed, tag=5)
    (xs, ys, sheets), trunc = sample_uniform_quotient(q, cusp_cap, rng, n_mc)
    kind = region[0]
    if kind == "ball":
        _, center, r0 = region
        inj = injectivity_radius(center, r_max=4.0)
        if r0 > inj.value:
            raise ConfigError("seed ball exceeds the injectivity radius")
        c = ball_volume(r0) / vol
        dists = quotient_distances_from(center, xs, ys, sheets,
                                        min(r0 + r + 0.5, 8.0))
        hits = dists <= r0 + r
    elif kind == "cells":
        _, cell_partition, cell_ids = region
        c = float(cell_partition.base_measures[np.asarray(cell_ids)].sum()) / vol
        rx, ry = cell_partition.sample_in_cells(cell_ids, refs_per_cell, rng)
        ctx = modq_context(q)
        best = np.full(n_mc, np.inf)
        for j in range(rx.size):
            ref = QuotientPoint(PointH(float(rx[j]), float(ry[j])),
                                ctx.elements[0])
            dd = quotient_distances_from(ref, xs, ys, sheets, min(r + 0.5, 8.0))
            best = np.minimum(best, dd)
        hits = best <= r
    else:
        raise ConfigError(f"unknown region kind {kind!r}")
    c_prime = float(hits.mean()) * (1.0 - trunc)
    ci = 3.0 * math.sqrt(max(c_prime * (1.0 - c_prime), 1e-12) / n_mc)
    bound = c / (kappa(r, p) * (1.0 - c) + c)
    passes = c_prime >= bound - ci
    inconclusive = abs(c_prime - bound) <= ci
    return {"c": c, "c_prime": c_prime, "bound": bound,
            "kappa": kappa(r, p), "ci": ci, "passes": bool(passes),
            "inconclusive": bool(inconclusive),
            "truncated_fraction": trunc}


def r_over_alpha(q: int, alpha: float, r1: float) -> float:
    """The drift-normalized location scale R_X / (alpha r1)."""
    return quotient_R(q) / (alpha * r1)


def uniformity_reference(q: int, cusp_cap: float = 10.0) -> dict:
    """Analytic bookkeeping shared by the experiments."""
    return {"volume": quotient_volume(q), "R_X": quotient_R(q),
            "truncated_fraction": truncated_domain_fraction(cusp_cap)}
