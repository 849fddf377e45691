"""Exact arithmetic for the modular group and its principal congruence
quotients: fundamental-domain reduction, cosets mod q, distance on the
quotient via certified enumeration, injectivity radii, uniform sampling,
and random permutation covers of the level-2 free subgroup.

Conventions.  A point of the level-q quotient is a pair (base, sheet): the
base lies in the standard fundamental domain |x| <= 1/2, |z| >= 1 and the
sheet is a coset mod q.  The underlying half-plane point is (any integer
lift of the sheet) applied to the base, so the distance between (z1, c1)
and (z2, c2) is

    min d(z1, g z2)  over integer g congruent to c1^{-1} c2 mod q,

and the enumeration is complete for all g with
cosh d(i, g i) = (a^2+b^2+c^2+d^2)/2 below the certified cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import CapacityError, DegeneracyError
from .geometry import PointH, distance

FUNDAMENTAL_TOL = 1e-12
MODULAR_AREA = math.pi / 3.0
_Q_CAP = 101
_ENUM_BOUND_CAP = 14.5
_REDUCE_CAP = 1_000_000


def _canonical_sign(a: int, b: int, c: int, d: int):
    """Lexicographically larger of +/-(a, b, c, d): first nonzero positive."""
    for v in (a, b, c, d):
        if v != 0:
            if v < 0:
                return -a, -b, -c, -d
            break
    return a, b, c, d


@dataclass(frozen=True)
class GroupElement:
    """An exact-integer element of the projective modular group."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise ValueError("determinant must be exactly 1")
        a, b, c, d = _canonical_sign(self.a, self.b, self.c, self.d)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(1, 0, 0, 1)

    @classmethod
    def translation(cls, n: int) -> "GroupElement":
        return cls(1, n, 0, 1)

    @classmethod
    def inversion(cls) -> "GroupElement":
        return cls(0, -1, 1, 0)

    def mul(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inv(self) -> "GroupElement":
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def apply(self, z: PointH) -> PointH:
        den2 = (self.c * z.x + self.d) ** 2 + (self.c * z.y) ** 2
        x = ((self.a * z.x + self.b) * (self.c * z.x + self.d)
             + self.a * self.c * z.y * z.y) / den2
        return PointH(x, z.y / den2)

    @property
    def frobenius_norm2(self) -> int:
        return self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2

    def displacement_of_origin(self) -> float:
        """d(i, g i) from the certificate cosh d = ||g||_F^2 / 2."""
        return math.acosh(self.frobenius_norm2 / 2.0)

    def mod_q(self, q: int) -> "CosetModQ":
        return CosetModQ(q, self.a % q, self.b % q, self.c % q, self.d % q)


@dataclass(frozen=True)
class CosetModQ:
    """A residue class in the level-q cover group (projective, canonical
    representative = lexicographically smaller of the two signs mod q)."""

    q: int
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        q = self.q
        if q < 1:
            raise ValueError("modulus must be >= 1")
        a, b, c, d = self.a % q, self.b % q, self.c % q, self.d % q
        if (a * d - b * c) % q != 1 % q:
            raise ValueError("determinant must be 1 mod q")
        neg = ((-a) % q, (-b) % q, (-c) % q, (-d) % q)
        if neg < (a, b, c, d):
            a, b, c, d = neg
        for name, v in zip("abcd", (a, b, c, d)):
            object.__setattr__(self, name, v)

    @classmethod
    def identity(cls, q: int) -> "CosetModQ":
        return cls(q, 1, 0, 0, 1)

    def mul(self, other: "CosetModQ") -> "CosetModQ":
        q = self.q
        return CosetModQ(
            q,
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inv(self) -> "CosetModQ":
        return CosetModQ(self.q, self.d, -self.b, -self.c, self.a)

    def key(self) -> tuple:
        return (self.a, self.b, self.c, self.d)


def psl2q_order(q: int) -> int:
    """|PSL_2(Z/q)| = q^3 prod_{p | q} (1 - p^-2), halved for q > 2."""
    if q == 1:
        return 1
    order = q ** 3
    n, p = q, 2
    while p * p <= n:
        if n % p == 0:
            order = order // (p * p) * (p * p - 1)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        order = order // (n * n) * (n * n - 1)
    return order // 2 if q > 2 else order


def _ext_gcd(a: int, b: int):
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_s, s = s, old_s - quo * s
        old_t, t = t, old_t - quo * t
    return old_r, old_s, old_t


class ModQContext:
    """Enumeration and multiplication tables for the level-q cover group."""

    def __init__(self, q: int):
        if not 1 <= q <= _Q_CAP:
            raise CapacityError(f"modulus {q} outside supported range "
                                f"[1, {_Q_CAP}]")
        self.q = q
        self.elements: list[CosetModQ] = self._enumerate(q)
        self.index = {e.key(): i for i, e in enumerate(self.elements)}
        self.size = len(self.elements)
        self._t_pow = None
        self._s_right = None

    @staticmethod
    def _enumerate(q: int) -> list[CosetModQ]:
        if q == 1:
            return [CosetModQ.identity(1)]
        seen = set()
        out = []
        for a in range(q):
            for c in range(q):
                g = math.gcd(math.gcd(a, c), q)
                if g != 1:
                    continue
                g0, x, y = _ext_gcd(a, c)
                ginv = pow(g0 % q, -1, q)
                d0 = (x * ginv) % q
                b0 = (-y * ginv) % q
                for t in range(q):
                    b, d = (b0 + t * a) % q, (d0 + t * c) % q
                    e = CosetModQ(q, a, b, c, d)
                    k = e.key()
                    if k not in seen:
                        seen.add(k)
                        out.append(e)
        out.sort(key=lambda e: e.key())
        return out

    def coset_of(self, a: int, b: int, c: int, d: int) -> int:
        return self.index[CosetModQ(self.q, a, b, c, d).key()]

    def _right_mul_table(self, g: CosetModQ) -> np.ndarray:
        return np.array([self.index[e.mul(g).key()] for e in self.elements],
                        dtype=np.int64)

    @property
    def t_pow_tables(self) -> np.ndarray:
        """t_pow_tables[n, i] = index of elements[i] * T^n, n mod q."""
        if self._t_pow is None:
            tables = np.empty((self.q, self.size), dtype=np.int64)
            tables[0] = np.arange(self.size)
            t1 = self._right_mul_table(CosetModQ(self.q, 1, 1, 0, 1))
            for n in range(1, self.q):
                tables[n] = t1[tables[n - 1]]
            self._t_pow = tables
        return self._t_pow

    @property
    def s_right_table(self) -> np.ndarray:
        """s_right_table[i] = index of elements[i] * S."""
        if self._s_right is None:
            self._s_right = self._right_mul_table(
                CosetModQ(self.q, 0, -1, 1, 0))
        return self._s_right


@lru_cache(maxsize=16)
def modq_context(q: int) -> ModQContext:
    return ModQContext(q)


def coset_index(q: int):
    """(order, element list) of the level-q cover group; the enumeration is
    exhaustive and must match the closed form."""
    ctx = modq_context(q)
    if ctx.size != psl2q_order(q):
        raise AssertionError("enumeration disagrees with the closed form")
    return ctx.size, tuple(ctx.elements)


def quotient_volume(q: int) -> float:
    """mu(X_q) = N_q * pi/3."""
    return psl2q_order(q) * MODULAR_AREA


def quotient_R(q: int) -> float:
    """Radius of the ball whose area equals mu(X_q)."""
    return math.acosh(quotient_volume(q) / (2.0 * math.pi) + 1.0)


@dataclass(frozen=True)
class QuotientPoint:
    """(fundamental-domain point, sheet) pair representing a quotient point."""

    base: PointH
    sheet: CosetModQ

    def __post_init__(self):
        x, y = self.base.x, self.base.y
        if abs(x) > 0.5 + FUNDAMENTAL_TOL or x * x + y * y < 1.0 - FUNDAMENTAL_TOL:
            raise ValueError("base point outside the fundamental domain")

    @property
    def q(self) -> int:
        return self.sheet.q


def in_fundamental_domain(x: float, y: float,
                          tol: float = FUNDAMENTAL_TOL) -> bool:
    return abs(x) <= 0.5 + tol and x * x + y * y >= 1.0 - tol


def reduce_fundamental(z: PointH):
    """Reduce z into the fundamental domain.

    Returns (z', g) with g an exact group element satisfying g z = z'.
    Each inversion strictly increases the height, so the loop terminates;
    the cap guards degenerate inputs.
    """
    x, y = z.x, z.y
    g = GroupElement.identity()
    for _ in range(_REDUCE_CAP):
        n = math.floor(x + 0.5)
        if n != 0:
            x -= n
            g = GroupElement.translation(-n).mul(g)
        n2 = x * x + y * y
        if n2 < 1.0 - 1e-15:
            x, y = -x / n2, y / n2
            g = GroupElement.inversion().mul(g)
        elif n == 0:
            return PointH(x, y), g
    raise DegeneracyError("fundamental-domain reduction hit iteration cap")


def reduce_points_arrays(x, y, sheets, ctx: ModQContext, max_iter: int = 400):
    """Vectorized reduction of coordinate arrays with sheet bookkeeping.

    Sheets are indices into ctx.elements; every T/S move applied to a point
    multiplies its sheet on the right by the inverse move, so the pair keeps
    representing the same quotient point.
    """
    x = np.asarray(x, dtype=float).copy()
    y = np.asarray(y, dtype=float).copy()
    sheets = np.asarray(sheets, dtype=np.int64).copy()
    t_pow = ctx.t_pow_tables
    s_right = ctx.s_right_table
    for _ in range(max_iter):
        n = np.floor(x + 0.5)
        moved = n != 0.0
        if moved.any():
            x[moved] -= n[moved]
            nmod = (n[moved].astype(np.int64)) % ctx.q
            sheets[moved] = t_pow[nmod, sheets[moved]]
        n2 = x * x + y * y
        inv = n2 < 1.0 - 1e-15
        if not (moved.any() or inv.any()):
            return x, y, sheets
        if inv.any():
            x[inv] = -x[inv] / n2[inv]
            y[inv] = y[inv] / n2[inv]
            sheets[inv] = s_right[sheets[inv]]
    raise DegeneracyError("vectorized reduction hit iteration cap")


class PSLZEnumeration:
    """All projective integer matrices with Frobenius norm^2 <= 2 cosh(bound),
    i.e. all g with d(i, g i) <= bound, as flat int arrays.

    Built by exhausting coprime first columns and the integer line of
    completions, so completeness needs no connectivity argument.
    """

    def __init__(self, bound: float):
        if bound > _ENUM_BOUND_CAP:
            raise CapacityError(
                f"enumeration bound {bound:.3f} exceeds cap {_ENUM_BOUND_CAP}"
                " (element count grows like e^bound)")
        self.bound = bound
        cap = 2.0 * math.cosh(bound)
        rows = set()
        amax = int(math.isqrt(int(cap)))
        for a in range(0, amax + 1):
            c_cap = int(math.isqrt(int(cap - a * a)))
            for c in range(-c_cap, c_cap + 1):
                if a == 0 and c <= 0:
                    continue
                if math.gcd(a, abs(c)) != 1:
                    continue
                g0, xx, yy = _ext_gcd(a, c)
                # a*d - c*b = 1 with (d, b) = (xx, -yy) scaled by 1/g0 = +-1
                d0, b0 = xx * g0, -yy * g0
                rest = cap - a * a - c * c
                aa = a * a + c * c
                beta = a * b0 + c * d0
                disc = beta * beta - aa * (b0 * b0 + d0 * d0 - rest)
                if disc < 0:
                    continue
                sq = math.sqrt(disc)
                t_lo = math.ceil((-beta - sq) / aa)
                t_hi = math.floor((-beta + sq) / aa)
                for t in range(t_lo, t_hi + 1):
                    b, d = b0 + t * a, d0 + t * c
                    if b * b + d * d + aa > cap:
                        continue
                    rows.add(_canonical_sign(a, b, c, d))
        ordered = sorted(rows)
        mat = np.array(ordered, dtype=np.int64).reshape(len(ordered), 4)
        self.a, self.b, self.c, self.d = (mat[:, j] for j in range(4))
        self.size = len(ordered)
        self._coset_labels: dict[int, np.ndarray] = {}
        self._coset_members: dict[int, dict[int, np.ndarray]] = {}

    def coset_labels(self, q: int) -> np.ndarray:
        if q not in self._coset_labels:
            ctx = modq_context(q)
            labels = np.empty(self.size, dtype=np.int64)
            for i in range(self.size):
                labels[i] = ctx.coset_of(int(self.a[i]), int(self.b[i]),
                                         int(self.c[i]), int(self.d[i]))
            self._coset_labels[q] = labels
            members = {}
            order = np.argsort(labels, kind="stable")
            sorted_labels = labels[order]
            starts = np.searchsorted(sorted_labels, np.arange(ctx.size))
            ends = np.searchsorted(sorted_labels, np.arange(ctx.size), "right")
            for cid in range(ctx.size):
                members[cid] = order[starts[cid]:ends[cid]]
            self._coset_members[q] = members
        return self._coset_labels[q]

    def members_of(self, q: int, coset_id: int) -> np.ndarray:
        self.coset_labels(q)
        return self._coset_members[q][coset_id]


@lru_cache(maxsize=8)
def _enumeration(bound_key: int) -> PSLZEnumeration:
    return PSLZEnumeration(bound_key / 4.0)


def get_enumeration(bound: float) -> PSLZEnumeration:
    """Shared enumeration covering at least the requested bound (quantized
    upward to quarter units so repeated queries reuse the cache)."""
    return _enumeration(math.ceil(bound * 4.0))


def _distances_to_images(z1: PointH, z2: PointH, enum: PSLZEnumeration,
                         idx: np.ndarray) -> np.ndarray:
    a, b = enum.a[idx], enum.b[idx]
    c, d = enum.c[idx], enum.d[idx]
    den2 = (c * z2.x + d) ** 2 + (c * z2.y) ** 2
    wx = ((a * z2.x + b) * (c * z2.x + d) + a * c * z2.y * z2.y) / den2
    wy = z2.y / den2
    qarg = ((wx - z1.x) ** 2 + (wy - z1.y) ** 2) / (2.0 * z1.y * wy)
    return np.arccosh(1.0 + qarg)


def quotient_distance(p1: QuotientPoint, p2: QuotientPoint, r_max: float,
                      enum: PSLZEnumeration | None = None) -> float:
    """Distance on the level-q quotient, or math.inf when it exceeds r_max.

    The returned value is the exact minimum over the certified enumeration;
    a CapacityError names the enumeration bound that would be needed.
    """
    if p1.q != p2.q:
        raise ValueError("points live on different quotients")
    if r_max > 30.0:
        raise ValueError("r_max above 30 is not supported")
    origin = PointH(0.0, 1.0)
    need = r_max + distance(origin, p1.base) + distance(origin, p2.base)
    if enum is None or enum.bound < need:
        enum = get_enumeration(need)
    target = p1.sheet.inv().mul(p2.sheet)
    ctx = modq_context(p1.q)
    idx = enum.members_of(p1.q, ctx.index[target.key()])
    if idx.size == 0:
        return math.inf
    dmin = float(_distances_to_images(p1.base, p2.base, enum, idx).min())
    return dmin if dmin <= r_max else math.inf


def quotient_distances_from(p0: QuotientPoint, xs, ys, sheet_ids, r_max: float,
                            enum: PSLZEnumeration | None = None) -> np.ndarray:
    """Distances from a fixed point to many (x, y, sheet-index) samples;
    entries beyond r_max come back as inf."""
    q = p0.q
    ctx = modq_context(q)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    sheet_ids = np.asarray(sheet_ids, dtype=np.int64)
    origin = PointH(0.0, 1.0)
    d0 = distance(origin, p0.base)
    dmax_samples = float(np.max(np.arccosh(
        1.0 + (xs ** 2 + (ys - 1.0) ** 2) / (2.0 * ys))))
    need = r_max + d0 + dmax_samples
    if enum is None or enum.bound < need:
        enum = get_enumeration(need)
    inv0 = p0.sheet.inv()
    target_of_sheet = np.array(
        [ctx.index[inv0.mul(e).key()] for e in ctx.elements], dtype=np.int64)
    out = np.full(xs.shape, math.inf)
    targets = target_of_sheet[sheet_ids]
    for cid in np.unique(targets):
        members = enum.members_of(q, int(cid))
        if members.size == 0:
            continue
        a, b = enum.a[members], enum.b[members]
        c, d = enum.c[members], enum.d[members]
        sel = np.nonzero(targets == cid)[0]
        for j in sel:
            x2, y2 = xs[j], ys[j]
            den2 = (c * x2 + d) ** 2 + (c * y2) ** 2
            wx = ((a * x2 + b) * (c * x2 + d) + a * c * y2 * y2) / den2
            wy = y2 / den2
            qarg = ((wx - p0.base.x) ** 2 + (wy - p0.base.y) ** 2) \
                / (2.0 * p0.base.y * wy)
            dmin = math.acosh(1.0 + float(np.min(qarg)))
            if dmin <= r_max:
                out[j] = dmin
    return out


def quotient_distance_pairs(q: int, xs1, ys1, sheets1, xs2, ys2, sheets2,
                            r_max: float,
                            enum: PSLZEnumeration | None = None) -> np.ndarray:
    """Distances between aligned arrays of (x, y, sheet-index) pairs on the
    level-q quotient; entries beyond r_max come back as inf."""
    ctx = modq_context(q)
    xs1, ys1 = np.asarray(xs1, float), np.asarray(ys1, float)
    xs2, ys2 = np.asarray(xs2, float), np.asarray(ys2, float)
    sheets1 = np.asarray(sheets1, np.int64)
    sheets2 = np.asarray(sheets2, np.int64)
    dorig1 = np.arccosh(1.0 + (xs1 ** 2 + (ys1 - 1.0) ** 2) / (2.0 * ys1))
    dorig2 = np.arccosh(1.0 + (xs2 ** 2 + (ys2 - 1.0) ** 2) / (2.0 * ys2))
    need = r_max + float(dorig1.max()) + float(dorig2.max())
    if enum is None or enum.bound < need:
        enum = get_enumeration(need)
    inv_table = np.array([ctx.index[e.inv().key()] for e in ctx.elements],
                         dtype=np.int64)
    mul = np.empty((ctx.size, ctx.size), dtype=np.int64)
    for i, e in enumerate(ctx.elements):
        for j, f in enumerate(ctx.elements):
            mul[i, j] = ctx.index[e.mul(f).key()]
    targets = mul[inv_table[sheets1], sheets2]
    out = np.full(xs1.shape, math.inf)
    for cid in np.unique(targets):
        members = enum.members_of(q, int(cid))
        if members.size == 0:
            continue
        a, b = enum.a[members], enum.b[members]
        c, d = enum.c[members], enum.d[members]
        sel = np.nonzero(targets == cid)[0]
        for j in sel:
            x2, y2 = xs2[j], ys2[j]
            den2 = (c * x2 + d) ** 2 + (c * y2) ** 2
            wx = ((a * x2 + b) * (c * x2 + d) + a * c * y2 * y2) / den2
            wy = y2 / den2
            qarg = ((wx - xs1[j]) ** 2 + (wy - ys1[j]) ** 2) \
                / (2.0 * ys1[j] * wy)
            dmin = math.acosh(1.0 + float(np.min(qarg)))
            if dmin <= r_max:
                out[j] = dmin
    return out


class InjectivityRadius(NamedTuple):
    value: float
    stabilizer_order: int


def injectivity_radius(p: QuotientPoint, r_max: float = 8.0,
                       enum: PSLZEnumeration | None = None
                       ) -> InjectivityRadius:
    """Half the smallest displacement of the base point under nontrivial
    level-q elements (displacement searched up to r_max).

    Torsion elements fixing the point contribute distance 0 and are
    excluded; their count (including the identity) is reported as the
    stabilizer order.  Returns value = inf when every nontrivial
    displacement exceeds r_max.
    """
    z = p.base
    origin = PointH(0.0, 1.0)
    need = r_max + 2.0 * distance(origin, z)
    if enum is None or enum.bound < need:
        enum = get_enumeration(need)
    q = p.q
    ctx = modq_context(q)
    idx = enum.members_of(q, ctx.index[CosetModQ.identity(q).key()])
    keep = ~((enum.a[idx] == 1) & (enum.b[idx] == 0)
             & (enum.c[idx] == 0) & (enum.d[idx] == 1))
    idx = idx[keep]
    if idx.size == 0:
        return InjectivityRadius(math.inf, 1)
    dists = _distances_to_images(z, z, enum, idx)
    fixing = dists < 1e-9
    stab = int(np.count_nonzero(fixing)) + 1
    moving = dists[~fixing]
    moving = moving[moving <= r_max]
    if moving.size == 0:
        return InjectivityRadius(math.inf, stab)
    return InjectivityRadius(float(moving.min()) / 2.0, stab)


CUSP_TAIL_OVER = 1.0  # mu{y > Y} inside the domain strip is exactly 1/Y


def truncated_domain_fraction(cusp_cap: float) -> float:
    """Fraction of the base-domain area above the cusp cap: (1/Y)/(pi/3)."""
    return (CUSP_TAIL_OVER / cusp_cap) / MODULAR_AREA


def sample_base_domain(n: int, cusp_cap: float, rng):
    """Uniform mu-samples of the fundamental domain truncated at y <= Y,
    by rejection in the (x, 1/y) strip where mu is Lebesgue."""
    if cusp_cap < 2.0:
        raise ValueError("cusp cap must be >= 2")
    u_hi = 2.0 / math.sqrt(3.0)
    u_lo = 1.0 / cusp_cap
    xs = np.empty(n)
    us = np.empty(n)
    got = 0
    while got < n:
        m = max(1024, int(1.2 * (n - got)))
        x = rng.uniform(-0.5, 0.5, m)
        u = rng.uniform(u_lo, u_hi, m)
        ok = u <= 1.0 / np.sqrt(1.0 - x * x)
        take = min(int(ok.sum()), n - got)
        xs[got:got + take] = x[ok][:take]
        us[got:got + take] = u[ok][:take]
        got += take
    return xs, 1.0 / us


def sample_uniform_quotient(q: int, cusp_cap: float, rng, n: int | None = None):
    """Uniform samples of the level-q quotient truncated at height Y.

    Sheets are uniform over the cover group; bases follow mu on the
    truncated domain.  Returns (samples, truncated_fraction): a single
    QuotientPoint, or (x, y, sheet-index) arrays when n is given.
    """
    ctx = modq_context(q)
    size = 1 if n is None else n
    xs, ys = sample_base_domain(size, cusp_cap, rng)
    sheets = rng.integers(0, ctx.size, size)
    frac = truncated_domain_fraction(cusp_cap)
    if n is None:
        return (QuotientPoint(PointH(float(xs[0]), float(ys[0])),
                              ctx.elements[int(sheets[0])]), frac)
    return (xs, ys, sheets), frac


# --- random covers of the level-2 free subgroup -------------------------

GEN_A = GroupElement(1, 2, 0, 1)
GEN_B = GroupElement(1, 0, 2, 1)


def _nearest_int(p: int, quo: int) -> int:
    if quo < 0:
        p, quo = -p, -quo
    return (2 * p + quo) // (2 * quo)


def sanov_reduce(g: GroupElement) -> list[tuple[str, int]]:
    """Write a level-2 element as the unique reduced word
    [('A', n1), ('B', n2), ...] in the two free generators.

    Peeling alternates by which column dominates; parity (a, d odd and
    b, c even) rules out ties, so each division step strictly shrinks the
    matrix and the loop terminates.
    """
    a, b, c, d = g.a, g.b, g.c, g.d
    if (a % 2, b % 2, c % 2, d % 2) != (1, 0, 0, 1):
        raise ValueError("element is not in the level-2 subgroup")
    word: list[tuple[str, int]] = []
    for _ in range(10_000):
        if c == 0:
            if a < 0:
                a, b, d = -a, -b, -d
            if b != 0:
                word.append(("A", b // 2))
            return word
        if abs(a) > abs(c):
            k = _nearest_int(a, 2 * c)
            if k != 0:
                word.append(("A", k))
            a, b = a - 2 * k * c, b - 2 * k * d
        else:
            k = _nearest_int(c, 2 * a)
            if k != 0:
                word.append(("B", k))
            c, d = c - 2 * k * a, d - 2 * k * b
    raise DegeneracyError("word reduction hit iteration cap")


def word_to_element(word) -> GroupElement:
    g = GroupElement.identity()
    for letter, n in word:
        base = GEN_A if letter == "A" else GEN_B
        step = GroupElement.identity()
        m = abs(n)
        h = base if n > 0 else base.inv()
        for _ in range(m):
            step = step.mul(h)
        g = g.mul(step)
    return g


def _perm_power(perm: np.ndarray, n: int) -> np.ndarray:
    out = np.arange(perm.size)
    base = perm if n >= 0 else np.argsort(perm)
    n = abs(n)
    while n:
        if n & 1:
            out = base[out]
        base = base[base]
        n >>= 1
    return out


@dataclass(frozen=True)
class RandomCover:
    """A degree-n cover of the level-2 quotient, given by the permutations
    attached to the two free generators (0-based images)."""

    n: int
    sigma_a: np.ndarray
    sigma_b: np.ndarray

    def __post_init__(self):
        for s in (self.sigma_a, self.sigma_b):
            if sorted(s.tolist()) != list(range(self.n)):
                raise ValueError("generator images must be permutations")

    def transfer(self, word) -> np.ndarray:
        """Permutation image of a word (composition left-to-right, i.e.
        phi(g1 g2) = phi(g1) after phi(g2))."""
        out = np.arange(self.n)
        for letter, k in word:
            sig = self.sigma_a if letter == "A" else self.sigma_b
            out = out[_perm_power(sig, k)]
        return out

    def sheet_after(self, sheet: int, g: GroupElement) -> int:
        """Sheet index after moving by a level-2 element (the walk on the
        cover updates sheets by the inverse permutation image)."""
        perm = self.transfer(sanov_reduce(g))
        return int(np.argsort(perm)[sheet])

    def is_transitive(self) -> bool:
        seen = {0}
        frontier = [0]
        while frontier:
            i = frontier.pop()
            for s in (self.sigma_a, self.sigma_b):
                for j in (int(s[i]), int(np.argsort(s)[i])):
                    if j not in seen:
                        seen.add(j)
                        frontier.append(j)
        return len(seen) == self.n

    def to_json(self) -> str:
        return json.dumps({"n": self.n,
                           "sigma_A": self.sigma_a.tolist(),
                           "sigma_B": self.sigma_b.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "RandomCover":
        obj = json.loads(text)
        return cls(obj["n"], np.array(obj["sigma_A"], dtype=np.int64),
                   np.array(obj["sigma_B"], dtype=np.int64))


def random_cover(n: int, rng) -> RandomCover:
    """Uniform random degree-n cover: independent uniform permutations for
    the two free generators.  Non-transitive samples are legal (the cover
    is then disconnected) and are only flagged via is_transitive()."""
    if n < 1:
        raise ValueError("need n >= 1")
    return RandomCover(n, rng.permutation(n), rng.permutation(n))
