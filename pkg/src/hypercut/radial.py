"""Discretized measures over a step radius r, shared by the spectral and
flat-torus machinery.

A RadialMeasure stores per-cell masses on a uniform grid; densities are
masses divided by cell width.  The law-of-cosines kernel

    cosh r'' = cosh r cosh r1 - sinh r sinh r1 cos w,   w uniform on [0, pi]

is the single-step radial transition used for both the k-step mixtures and
the heat-kernel semigroup checks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError


@dataclass(frozen=True)
class RadialGrid:
    """Uniform partition of [r_min, r_max] into n_cells cells."""

    r_min: float
    r_max: float
    n_cells: int

    def __post_init__(self):
        if not (self.r_max > self.r_min >= 0.0):
            raise ValueError("need 0 <= r_min < r_max")
        if self.n_cells < 1:
            raise ValueError("need at least one cell")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def width(self) -> float:
        return (self.r_max - self.r_min) / self.n_cells


def default_grid(r_max: float, r_min: float = 0.0) -> RadialGrid:
    """Default resolution: step 1e-3 * max(1, r_max / 10)."""
    step = 1e-3 * max(1.0, r_max / 10.0)
    n = max(1, int(math.ceil((r_max - r_min) / step)))
    return RadialGrid(r_min, r_max, n)


@dataclass(frozen=True)
class RadialMeasure:
    """Nonnegative masses on the cells of a RadialGrid."""

    grid: RadialGrid
    masses: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.shape != (self.grid.n_cells,):
            raise ValueError("masses must have one entry per cell")
        if np.any(m < -1e-15) or not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite and >= 0")
        object.__setattr__(self, "masses", np.maximum(m, 0.0))

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.grid.width

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def is_probability(self, tol: float = 1e-6) -> bool:
        return abs(self.total_mass() - 1.0) <= tol

    def cdf_at_edges(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.masses)))

    def normalized(self) -> "RadialMeasure":
        total = self.total_mass()
        if total <= 0.0:
            raise ValueError("cannot normalize a zero measure")
        meta = dict(self.meta)
        meta["normalization_defect"] = total - 1.0
        return RadialMeasure(self.grid, self.masses / total, meta)

    def mean(self) -> float:
        return float(np.dot(self.grid.centers, self.masses) / self.total_mass())

    def sup_cdf_gap(self, other: "RadialMeasure") -> float:
        """Sup over all edge positions of |CDF difference|."""
        edges = np.union1d(self.grid.edges, other.grid.edges)
        a = np.interp(edges, self.grid.edges, self.cdf_at_edges())
        b = np.interp(edges, other.grid.edges, other.cdf_at_edges())
        return float(np.max(np.abs(a - b)))

    @classmethod
    def from_cdf(cls, grid: RadialGrid, cdf, meta: dict | None = None,
                 mass_tol: float = 1e-3) -> "RadialMeasure":
        vals = np.asarray(cdf(grid.edges), dtype=float)
        masses = np.diff(vals)
        if np.any(masses < -1e-12):
            raise ValueError("CDF is not monotone on the grid")
        defect = abs(vals[-1] - vals[0] - 1.0)
        if defect > mass_tol:
            raise ResolutionError(
                f"grid drops {defect:.3g} of the mass (tol {mass_tol:g})")
        return cls(grid, np.maximum(masses, 0.0), meta or {})

    def to_csv(self, path) -> None:
        """Serialize as (r, density) rows at cell centers."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "density"])
            for r, d in zip(self.grid.centers, self.density):
                w.writerow([f"{r:.17g}", f"{d:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "RadialMeasure":
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh)][1:]
        r = np.array([float(a) for a, _ in rows])
        d = np.array([float(b) for _, b in rows])
        width = r[1] - r[0] if len(r) > 1 else 2.0 * r[0]
        grid = RadialGrid(r[0] - width / 2.0, r[-1] + width / 2.0, len(r))
        return cls(grid, d * width)


def step_kernel_cdf(r_new, r_old, r_step):
    """P(distance after one step of length r_step from radius r_old <= r_new)
    for a uniform direction angle; vectorized over r_new and r_old.

    Degenerate radii (r_old or r_step ~ 0) reduce to a step function, which
    the clip to [-1, 1] handles.
    """
    r_new = np.asarray(r_new, dtype=float)
    r_old = np.asarray(r_old, dtype=float)
    den = np.sinh(r_old) * np.sinh(r_step)
    num = np.cosh(r_old) * math.cosh(r_step) - np.cosh(r_new)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0),
                       np.where(num > 0.0, 2.0, -2.0))
    return np.arccos(np.clip(arg, -1.0, 1.0)) / math.pi


def convolve_step(measure: RadialMeasure, r_step: float,
                  out_grid: RadialGrid | None = None) -> RadialMeasure:
    """One law-of-cosines step of fixed length r_step applied to a radial
    measure.  The new CDF at each edge is the mass-weighted kernel CDF; the
    midpoint rule over cells is exact in the masses and second order in the
    smooth kernel.
    """
    if out_grid is None:
        out_grid = default_grid(measure.grid.r_max + r_step)
    edges = out_grid.edges
    centers = measure.grid.centers
    cdf = np.zeros_like(edges)
    block = max(1, 20_000_000 // max(len(edges), 1))
    for lo in range(0, len(centers), block):
        sl = slice(lo, lo + block)
        k = step_kernel_cdf(edges[None, :], centers[sl, None], r_step)
        cdf += measure.masses[sl] @ k
    total = measure.total_mass()
    if total > 0:
        cdf /= total
    cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
    masses = np.diff(cdf) * total
    return RadialMeasure(out_grid, masses)


def convolve(m1: RadialMeasure, m2: RadialMeasure,
             out_grid: RadialGrid | None = None,
             chunk: int = 64) -> RadialMeasure:
    """Radial convolution of two measures (both step lengths random)."""
    if out_grid is None:
        out_grid = default_grid(m1.grid.r_max + m2.grid.r_max)
    edges = out_grid.edges
    nz1 = m1.masses > 0.0
    nz2 = m2.masses > 0.0
    c1, w1 = m1.grid.centers[nz1], m1.masses[nz1]
    c2, w2 = m2.grid.centers[nz2], m2.masses[nz2]
    cdf = np.zeros_like(edges)
    for lo in range(0, len(c2), chunk):
        sl = slice(lo, lo + chunk)
        # kernel CDF tensor (cells2, cells1, edges), reduced over cells1
        den = np.sinh(c1)[None, :, None] * np.sinh(c2[sl])[:, None, None]
        num = (np.cosh(c1)[None, :, None] * np.cosh(c2[sl])[:, None, None]
               - np.cosh(edges)[None, None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0),
                           np.where(num > 0.0, 2.0, -2.0))
        k = np.arccos(np.clip(arg, -1.0, 1.0)) / math.pi
        cdf += np.einsum("j,ije,i->e", w1, k, w2[sl])
    total = m1.total_mass() * m2.total_mass()
    if total > 0:
        cdf /= total
    cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
    return RadialMeasure(out_grid, np.diff(cdf) * total)
