"""Spherical functions of the half-plane, their decay bounds, the
eigenvalue <-> integrability-exponent dictionary, k-step radial mixtures,
the radial heat kernel, and the radial Fourier transform with its
Plancherel check.

Numerical conventions fixed here once and used consistently:

* phi(s, r) is the value at radius r of the radial eigenfunction with
  spectral parameter s, evaluated through the one-dimensional integral
  (sqrt 2 / pi) r int_0^1 cos(s r x) / sqrt(cosh r - cosh r x) dx.
  The endpoint singularity is removed by 1 - x = u^2 together with the
  identity cosh r - cosh(rx) = 2 sinh(r(1+x)/2) sinh(r(1-x)/2), so the
  integrand is bounded and free of cancellation.
* The transform of a radial probability measure nu(dr) is
  nu_hat(s) = int phi(s, r) nu(dr); the transform of a radial function h
  (density with respect to the invariant area measure) is
  2 pi int h(r) phi(s, r) sinh r dr.  With that pairing the exact Parseval
  weight is (1/4pi) s tanh(pi s) ds over the whole real s-line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericRangeError, QuadratureError, ResolutionError
from .quadrature import panel_nodes, trapezoid_doubling
from .radial import RadialGrid, RadialMeasure, convolve_step, default_grid

_R_CAP = 600.0


@dataclass(frozen=True)
class SphericalParam:
    """Spectral parameter of a radial eigenfunction.

    principal: s real, eigenvalue 1/4 + s^2.
    complementary: sp in (-1/2, 1/2), eigenvalue 1/4 - sp^2 in (0, 1/4),
    integrability exponent p = 1 / (1/2 - |sp|) >= 2.
    """

    kind: str
    s: float = 0.0
    sp: float = 0.0

    def __post_init__(self):
        if self.kind not in ("principal", "complementary", "trivial"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "complementary" and not abs(self.sp) < 0.5:
            raise ValueError("complementary parameter needs |sp| < 1/2")

    @classmethod
    def principal(cls, s: float) -> "SphericalParam":
        return cls("principal", s=float(s))

    @classmethod
    def complementary(cls, sp: float) -> "SphericalParam":
        return cls("complementary", sp=float(sp))

    @classmethod
    def from_p(cls, p: float) -> "SphericalParam":
        if p == 2.0:
            return cls.principal(0.0)
        return cls.complementary(0.5 - 1.0 / p)

    @property
    def laplace_eigenvalue(self) -> float:
        if self.kind == "principal":
            return 0.25 + self.s * self.s
        if self.kind == "complementary":
            return 0.25 - self.sp * self.sp
        return 0.0

    @property
    def p_value(self) -> float:
        if self.kind == "principal":
            return 2.0
        if self.kind == "trivial":
            return math.inf
        return 1.0 / (0.5 - abs(self.sp))


@dataclass(frozen=True)
class CltConstants:
    """Drift and variance of the one-step log-height increment."""

    r1: float
    alpha: float
    sigma2: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.sigma2 <= 4.0:
            raise ValueError(f"sigma2 must lie in [0, 4], got {self.sigma2}")


def _check_radius(r: float) -> float:
    r = float(r)
    if r < 0.0:
        raise ValueError("radius must be >= 0")
    if r > _R_CAP:
        raise NumericRangeError(f"radius {r} exceeds evaluation cap {_R_CAP}")
    return r


def _integrand_base(r: float, u: np.ndarray):
    """(x, weight-free base) of the regularized integrand 2u / sqrt(...)."""
    x = 1.0 - u * u
    den = np.sqrt(2.0 * np.sinh(r * (1.0 + x) / 2.0)
                  * np.sinh(r * (1.0 - x) / 2.0))
    return x, 2.0 * u / den


def spherical_principal_grid(s_values, r: float, *, tol: float = 1e-8,
                             chunk: int = 512):
    """phi(s, r) for an array of spectral parameters at one radius.

    Panels scale with the oscillation count s r; the count is doubled until
    the whole chunk moves by less than ``tol``.  Chunking over s keeps the
    node tensors bounded regardless of the sweep size.
    """
    r = _check_radius(r)
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    if r == 0.0:
        return np.ones_like(s)
    out = np.empty_like(s)
    for lo in range(0, s.size, chunk):
        sc = s[lo:lo + chunk]
        smax = float(np.max(np.abs(sc)))
        n_panels = max(16, int(smax * r / 3.0) + 8)
        prev = None
        for _ in range(7):
            u, w = panel_nodes(0.0, 1.0, n_panels)
            x, base = _integrand_base(r, u)
            vals = np.cos(np.outer(sc, r * x)) @ (base * w)
            vals *= math.sqrt(2.0) / math.pi * r
            if prev is not None:
                err = float(np.max(np.abs(vals - prev)))
                if err <= tol:
                    break
            prev = vals
            n_panels *= 2
        else:
            raise QuadratureError(
                "spherical function sweep did not converge", achieved=err)
        out[lo:lo + chunk] = vals
    return out


def spherical_principal(s: float, r: float, *, tol: float = 1e-8) -> float:
    """Principal-series eigenvalue of the radius-r averaging operator."""
    return float(spherical_principal_grid([s], r, tol=tol)[0])


def spherical_complementary(p: float, r: float, *, tol: float = 1e-10) -> float:
    """Complementary-series eigenvalue, parameterized by the exponent p >= 2.

    Coincides with spherical_principal(0, r) at p = 2; the integrand is the
    cosh analogue of the principal one (no oscillation).
    """
    if p < 2.0:
        raise ValueError("need p >= 2")
    r = _check_radius(r)
    if r == 0.0:
        return 1.0
    sp = 0.5 if math.isinf(p) else 0.5 - 1.0 / p
    n_panels = 24
    prev = None
    for _ in range(8):
        u, w = panel_nodes(0.0, 1.0, n_panels)
        x, base = _integrand_base(r, u)
        val = float(np.cosh(sp * r * x) @ (base * w))
        val *= math.sqrt(2.0) / math.pi * r
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev = val
        n_panels *= 2
    raise QuadratureError("complementary evaluation did not converge",
                          achieved=abs(val - prev))


def complementary_lower_envelope(p: float, r: float,
                                 eps: float = 0.5) -> float:
    """Lower decay envelope sqrt(eps) exp(-r (1/2 - |sp| (1 - eps))), valid
    up to an absolute constant for r >= 1.
    """
    sp = 0.5 if math.isinf(p) else 0.5 - 1.0 / p
    return math.sqrt(eps) * math.exp(-r * (0.5 - abs(sp) * (1.0 - eps)))


def hc_bound(r: float, p: float = 2.0) -> float:
    """The operator-norm bound (r + 1) e^{-r/p} for the radius-r average."""
    if r < 0.0:
        raise ValueError("radius must be >= 0")
    if p < 2.0:
        raise ValueError("need p >= 2")
    rate = 0.0 if math.isinf(p) else r / p
    return (r + 1.0) * math.exp(-rate)


def p_to_lambda(p: float) -> float:
    """Laplace eigenvalue floor 1/4 - (1/2 - 1/p)^2 for exponent p >= 2."""
    if p < 2.0:
        raise ValueError("need p >= 2")
    inv = 0.0 if math.isinf(p) else 1.0 / p
    return 0.25 - (0.5 - inv) ** 2


def lambda_to_p(lam: float) -> float:
    """Inverse of :func:`p_to_lambda`; defined for lam in (0, 1/4]."""
    if not 0.0 < lam <= 0.25:
        raise ValueError(f"eigenvalue {lam} outside (0, 1/4]")
    root = math.sqrt(0.25 - lam)
    if root == 0.5:
        return math.inf
    return 1.0 / (0.5 - root)


def decay_exponent_check(p: float = 2.0, epsilon: float = 0.5,
                         r_max: float = 200.0) -> dict:
    """Evaluate int_0^{r_max} e^r ((r+1) e^{-r/p})^{p+epsilon} dr and probe
    whether the tail decays.

    The integrand simplifies to (r+1)^{p+eps} e^{-eps r / p}: integrable for
    eps > 0, constant-order-or-growing at eps = 0.  Returns the integral on
    the window, the fitted tail rate (log-slope over the upper half), and a
    convergence verdict.
    """
    if p < 2.0 or epsilon < 0.0:
        raise ValueError("need p >= 2 and epsilon >= 0")
    q = p + epsilon

    def integrand(r):
        return np.exp(r + q * np.log1p(r) - q * r / p)

    nodes, weights = panel_nodes(0.0, r_max, 256)
    integral = float(integrand(nodes) @ weights)
    rs = np.linspace(r_max / 2.0, r_max, 64)
    slope = np.polyfit(rs, np.log(integrand(rs)), 1)[0]
    converges = slope < -1e-3
    return {"integral": integral, "tail_rate": float(slope),
            "converges": bool(converges), "p": p, "epsilon": epsilon}


def technical_s_decay(r: float, s_grid=None) -> dict:
    """Scan |phi(s, r)| sqrt(|s|) over s in [1, 1000].

    The weighted sup is attained on a bounded prefix: the report carries the
    sup over [1, 50] and over [500, 1000] for the containment check.
    """
    if r <= 0.0:
        raise ValueError("need r > 0")
    if s_grid is None:
        s_grid = np.concatenate([np.linspace(1.0, 50.0, 250),
                                 np.linspace(50.0, 1000.0, 500)])
    s_grid = np.asarray(s_grid, dtype=float)
    vals = spherical_principal_grid(s_grid, r, tol=1e-7)
    weighted = np.abs(vals) * np.sqrt(np.abs(s_grid))
    low = s_grid <= 50.0
    high = s_grid >= 500.0
    return {
        "s": s_grid,
        "weighted": weighted,
        "sup": float(weighted.max()),
        "sup_low": float(weighted[low].max()),
        "sup_high": float(weighted[high].max()),
    }


def clt_constants(r1: float) -> CltConstants:
    """Drift alpha and variance sigma^2 of the log-height increment.

    The angular integral for alpha evaluates in closed form,
    (1/pi) int ln(e^r cos^2 t + e^{-r} sin^2 t) dt = 2 ln cosh(r/2),
    which the variance quadrature cross-checks implicitly.  The variance
    integrand is analytic but its nearest poles sit e^{-r1} away from the
    axis, so the trapezoid rule (error <= 1e-10) is used up to r1 = 12 and
    the large-step expansion pi^2 / (3 r1^2) beyond (error ~ e^{-r1}).
    """
    if r1 <= 0.0:
        raise ValueError("need r1 > 0")
    alpha = 2.0 * math.log(math.cosh(r1 / 2.0)) / r1

    def logheight(theta):
        return np.log(np.exp(r1) * np.cos(theta) ** 2
                      + np.exp(-r1) * np.sin(theta) ** 2)

    if r1 <= 12.0:
        iv, _ = trapezoid_doubling(
            lambda t: (logheight(t) / r1 - alpha) ** 2, 0.0, math.pi,
            tol=1e-11, n0=128, max_doublings=14)
        sigma2 = iv / math.pi
    else:
        sigma2 = math.pi ** 2 / (3.0 * r1 * r1)
    return CltConstants(r1=r1, alpha=alpha, sigma2=sigma2)


def two_step_cdf(r, r1: float):
    """Closed-form CDF of the radius after two steps of length r1:
    acos((cosh^2 r1 - cosh r) / sinh^2 r1) / pi on [0, 2 r1].
    """
    arg = (math.cosh(r1) ** 2 - np.cosh(np.asarray(r, dtype=float))) \
        / math.sinh(r1) ** 2
    return np.arccos(np.clip(arg, -1.0, 1.0)) / math.pi


def radial_mixture(k: int, r1: float, grid: RadialGrid | None = None,
                   mass_tol: float = 1e-3) -> RadialMeasure:
    """The radial law of the k-step fixed-length walk, as a density on
    [0, k r1].

    k must be at least 2: the 0- and 1-step laws are atoms, not densities.
    k = 2 comes from the closed-form CDF; k >= 3 applies the law-of-cosines
    step kernel once per extra step.
    """
    if k < 2:
        raise ValueError("the k-step radial law is a density only for k >= 2")
    if r1 <= 0.0:
        raise ValueError("need r1 > 0")
    measure = RadialMeasure.from_cdf(
        default_grid(2.0 * r1) if grid is None or k > 2 else grid,
        lambda r: two_step_cdf(r, r1), meta={"k": 2, "r1": r1})
    for j in range(3, k + 1):
        out = default_grid(j * r1) if grid is None or j < k else grid
        measure = RadialMeasure(out, convolve_step(measure, r1, out).masses,
                                {"k": j, "r1": r1})
    defect = abs(measure.total_mass() - 1.0)
    if defect > mass_tol:
        raise ResolutionError(
            f"mixture grid too coarse: mass defect {defect:.3g}")
    return measure


def heat_envelope(t: float, r):
    """The printed two-sided envelope shape t^{-1} r (1+r+t)^{-1/2}
    exp(-(r-t)^2 / 4t), known only up to constants.
    """
    r = np.asarray(r, dtype=float)
    return r / (t * np.sqrt(1.0 + r + t)) * np.exp(-((r - t) ** 2) / (4.0 * t))


def _heat_density_exact(t: float, r: np.ndarray) -> np.ndarray:
    """Radial density of the time-t heat flow, through the classical
    integral form

        p(t, r) = sinh(r) e^{-t/4} / (2^{3/2} sqrt(pi) t^{3/2})
                  * int_r^inf s e^{-s^2/4t} / sqrt(cosh s - cosh r) ds,

    regularized by s = r + v^2.  Exactly normalized; the discretization is
    renormalized downstream anyway.
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0.0
    rp = r[pos]
    v_hi = np.sqrt(np.sqrt(rp * rp + 220.0 * t) + 4.0 * math.sqrt(t) - rp)
    u, w = panel_nodes(0.0, 1.0, 48)
    v = v_hi[:, None] * u[None, :]
    s = rp[:, None] + v * v
    den = np.sqrt(2.0 * np.sinh((s + rp[:, None]) / 2.0)
                  * np.sinh(np.maximum((s - rp[:, None]) / 2.0, 0.0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(den > 0.0, 2.0 * v * s
                             * np.exp(-s * s / (4.0 * t)) / den, 0.0)
    integral = (integrand @ w) * v_hi
    const = math.exp(-t / 4.0) / (2.0 ** 1.5 * math.sqrt(math.pi) * t ** 1.5)
    out[pos] = np.sinh(rp) * const * integral
    return out


def heat_radial_density(t: float, grid: RadialGrid | None = None
                        ) -> RadialMeasure:
    """Radial law of the time-t continuous walk as a RadialMeasure.

    Cell masses use Simpson's rule on the exact density, then a numerical
    renormalization whose defect is recorded in ``meta``.
    """
    if t <= 1e-3:
        raise ResolutionError("time below 1e-3 is under-resolved")
    if grid is None:
        grid = default_grid(t + 14.0 * math.sqrt(t) + 2.0)
    edges = grid.edges
    centers = grid.centers
    p_edges = _heat_density_exact(t, edges)
    p_centers = _heat_density_exact(t, centers)
    masses = grid.width / 6.0 * (p_edges[:-1] + 4.0 * p_centers + p_edges[1:])
    measure = RadialMeasure(grid, masses, {"t": t})
    defect = abs(measure.total_mass() - 1.0)
    if defect > 1e-6:
        raise ResolutionError(
            f"heat grid too coarse: normalization defect {defect:.3g}")
    return measure.normalized()


def heat_envelope_fit(measure: RadialMeasure, t: float) -> tuple[float, float]:
    """(c1, c2) with c1 <= density / envelope <= c2 over r in [t/4, 4t]."""
    centers = measure.grid.centers
    sel = (centers >= t / 4.0) & (centers <= 4.0 * t)
    ratio = measure.density[sel] / heat_envelope(t, centers[sel])
    return float(ratio.min()), float(ratio.max())


def phi_on_radii(s_values, radii, *, tol: float = 1e-8,
                 chunk: int = 256) -> np.ndarray:
    """phi(s, r) as a (len(s), len(radii)) table.

    Radii are processed in ascending chunks so the panel count follows the
    local oscillation budget instead of the global maximum.
    """
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    r = np.atleast_1d(np.asarray(radii, dtype=float))
    order = np.argsort(r)
    smax = max(float(np.max(np.abs(s))), 1e-9)
    out = np.empty((s.size, r.size))
    for lo in range(0, r.size, chunk):
        idx = order[lo:lo + chunk]
        rmax_c = float(r[idx].max())
        if rmax_c == 0.0:
            out[:, idx] = 1.0
            continue
        n_panels = max(12, int(smax * rmax_c / 4.0) + 6)
        u, w = panel_nodes(0.0, 1.0, n_panels)
        x = 1.0 - u * u
        rr = r[idx][:, None]
        with np.errstate(divide="ignore"):
            den = np.sqrt(2.0 * np.sinh(rr * (1.0 + x) / 2.0)
                          * np.sinh(rr * (1.0 - x) / 2.0))
            base = np.where(rr > 0.0, 2.0 * u / den, 0.0) * w
        vals = np.einsum("sru,ru->sr",
                         np.cos(s[:, None, None] * (rr * x)[None]), base)
        vals *= math.sqrt(2.0) / math.pi * rr.ravel()[None, :]
        vals[:, r[idx] == 0.0] = 1.0
        out[:, idx] = vals
    return out


def helgason_radial(measure: RadialMeasure, s):
    """Transform of a radial measure: nu_hat(s) = int phi(s, r) nu(dr).

    For the k-step mixture this equals phi(s, r1)^k by the convolution
    property.  Scalar s returns a float, arrays return arrays.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    table = phi_on_radii(s_arr, measure.grid.centers)
    vals = table @ measure.masses
    return float(vals[0]) if np.isscalar(s) or np.ndim(s) == 0 else vals


def plancherel_check(measure: RadialMeasure, *, s_cap: float = 80.0) -> dict:
    """Compare the spatial energy of a radial measure with its spectral
    energy under the (1/4pi) s tanh(pi s) ds weight.

    The measure is read as mu-density h(r) = density(r) / (2 pi sinh r);
    spatial energy is int |h|^2 dmu, spectral energy uses the transform
    2 pi int h phi sinh r dr = nu_hat.  Truncation of the s-integral is
    chosen from a decay probe and reported.
    """
    centers = measure.grid.centers
    width = measure.grid.width
    e_space = float(np.sum(measure.masses ** 2 / (width * np.sinh(centers)))
                    / (2.0 * math.pi))
    probe = np.linspace(0.0, s_cap, 81)
    probe_vals = np.abs(helgason_radial(measure, probe))
    weighted = probe_vals ** 2 * probe * np.tanh(math.pi * probe)
    peak = float(weighted.max())
    above = np.nonzero(weighted > 1e-10 * peak)[0]
    s_max = float(probe[min(above[-1] + 1, probe.size - 1)])
    s_nodes, s_weights = panel_nodes(0.0, s_max, max(24, int(s_max)))
    vals = helgason_radial(measure, s_nodes)
    e_freq = float(np.sum(vals ** 2 * s_nodes * np.tanh(math.pi * s_nodes)
                          * s_weights) / (2.0 * math.pi))
    tail_note = float(weighted[-1] / peak) if peak > 0 else 0.0
    return {"space_energy": e_space, "freq_energy": e_freq,
            "ratio": e_freq / e_space, "s_max": s_max,
            "relative_tail_at_cap": tail_note}


def gaussian_radial_bump(center: float = 1.2, width: float = 0.35,
                         r_max: float = 4.0, n_cells: int = 800
                         ) -> RadialMeasure:
    """A smooth compactly supported radial bump (as a measure over radius),
    the standard probe for the Plancherel and round-trip checks.
    """
    grid = RadialGrid(0.0, r_max, n_cells)
    c = grid.centers
    h = np.exp(-((c - center) ** 2) / (2.0 * width ** 2))
    density = 2.0 * math.pi * np.sinh(c) * h
    return RadialMeasure(grid, density * grid.width,
                         {"center": center, "width": width})
