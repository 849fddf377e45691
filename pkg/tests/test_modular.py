import itertools
import math

import numpy as np
import pytest
from scipy import stats as sstats

from hypercut.errors import CapacityError
from hypercut.geometry import PointH, distance
from hypercut.modular import (GEN_A, GEN_B, CosetModQ, GroupElement,
                              QuotientPoint, RandomCover, coset_index,
                              get_enumeration, injectivity_radius,
                              in_fundamental_domain, modq_context,
                              psl2q_order, quotient_R, quotient_distance,
                              quotient_distances_from, quotient_volume,
                              random_cover, reduce_fundamental,
                              reduce_points_arrays, sample_uniform_quotient,
                              sanov_reduce, truncated_domain_fraction,
                              word_to_element)

ORIGIN = PointH(0.0, 1.0)
I1 = CosetModQ.identity(1)


def qpoint(x, y, q=1, sheet=None):
    return QuotientPoint(PointH(x, y),
                         sheet if sheet is not None else CosetModQ.identity(q))


class TestGroupElement:
    def test_determinant_enforced(self):
        with pytest.raises(ValueError):
            GroupElement(1, 1, 1, 1)

    def test_projective_canonical_sign(self):
        assert GroupElement(-1, 0, 0, -1) == GroupElement.identity()
        assert GroupElement(0, -1, 1, 0) == GroupElement(0, 1, -1, 0)

    def test_group_ops(self):
        t = GroupElement.translation(3)
        assert t.mul(t.inv()) == GroupElement.identity()
        s = GroupElement.inversion()
        assert s.mul(s) == GroupElement.identity()  # projective order 2

    def test_apply_matches_float_mobius(self):
        g = GroupElement(2, 1, 1, 1)
        z = PointH(0.3, 0.8)
        w = g.apply(z)
        den = complex(z.x, z.y) * 1 + 1  # cz + d with c=1, d=1
        expected = (2 * complex(z.x, z.y) + 1) / den
        assert (w.x, w.y) == pytest.approx((expected.real, expected.imag),
                                           abs=1e-14)

    def test_frobenius_certificate(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            word = [("A" if rng.random() < 0.5 else "B",
                     int(rng.integers(-3, 4)) or 1) for _ in range(4)]
            g = word_to_element(word)
            assert distance(ORIGIN, g.apply(ORIGIN)) == pytest.approx(
                g.displacement_of_origin(), abs=1e-9)


class TestCosetModQ:
    def test_canonical_projective_rep(self):
        a = CosetModQ(5, 2, 1, 1, 1)
        b = CosetModQ(5, -2, -1, -1, -1)
        assert a == b

    def test_determinant_mod_q(self):
        with pytest.raises(ValueError):
            CosetModQ(5, 1, 0, 0, 2)

    @pytest.mark.parametrize("q", [2, 3, 4, 5])
    def test_group_axioms_exhaustive(self, q):
        _, elements = coset_index(q)
        keys = {e.key() for e in elements}
        for a in elements:
            assert a.inv().key() in keys
            assert a.mul(a.inv()) == CosetModQ.identity(q)
        rng = np.random.default_rng(q)
        idx = rng.integers(0, len(elements), (300, 2))
        for i, j in idx:
            assert elements[i].mul(elements[j]).key() in keys

    def test_order_closed_form(self):
        # |PSL_2(Z/q)| = q^3 prod (1 - p^-2), halved for q > 2
        assert [psl2q_order(q) for q in (1, 2, 3, 4, 5, 6, 7)] == \
            [1, 6, 12, 24, 60, 72, 168]

    @pytest.mark.parametrize("q", [2, 3, 4, 5, 6, 7])
    def test_enumeration_matches_closed_form(self, q):
        n, elements = coset_index(q)
        assert n == psl2q_order(q)
        assert len({e.key() for e in elements}) == n

    def test_q2_by_raw_count(self):
        # independent brute force over all 2x2 matrices mod 2
        count = sum(1 for a, b, c, d in itertools.product(range(2), repeat=4)
                    if (a * d - b * c) % 2 == 1)
        assert count == coset_index(2)[0]

    def test_capacity_cap(self):
        with pytest.raises(CapacityError):
            coset_index(102)


def brute_force_reduce(z: PointH, depth: int = 40):
    """Independent reduction: greedy alternation of translation and
    inversion on complex numbers, no shared code with the library path."""
    w = complex(z.x, z.y)
    for _ in range(depth):
        n = math.floor(w.real + 0.5)
        w -= n
        if abs(w) < 1.0 - 1e-15:
            w = -1.0 / w
        elif n == 0:
            break
    return w


class TestReduceFundamental:
    def test_fixed_point(self):
        z, g = reduce_fundamental(ORIGIN)
        assert (z.x, z.y) == (0.0, 1.0)
        assert g == GroupElement.identity()

    def test_translation(self):
        z, g = reduce_fundamental(PointH(5.0, 1.0))
        assert (z.x, z.y) == pytest.approx((0.0, 1.0), abs=1e-15)
        assert g == GroupElement.translation(-5)

    def test_known_deep_point(self):
        z, g = reduce_fundamental(PointH(0.1, 0.1))
        w = brute_force_reduce(PointH(0.1, 0.1))
        assert (z.x, z.y) == pytest.approx((w.real, w.imag), abs=1e-9)
        img = g.apply(PointH(0.1, 0.1))
        assert (img.x, img.y) == pytest.approx((z.x, z.y), abs=1e-9)

    def test_random_points_land_in_domain_with_exact_witness(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            z0 = PointH(rng.uniform(-8, 8), 10 ** rng.uniform(-2, 1))
            z, g = reduce_fundamental(z0)
            assert in_fundamental_domain(z.x, z.y)
            img = g.apply(z0)
            assert (img.x, img.y) == pytest.approx((z.x, z.y), abs=1e-9)
            w = brute_force_reduce(z0)
            assert z.y == pytest.approx(w.imag, abs=1e-9)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(23)
        ctx = modq_context(5)
        x = rng.uniform(-4, 4, 300)
        y = 10 ** rng.uniform(-1.5, 1, 300)
        start = ctx.index[CosetModQ.identity(5).key()]
        sheets = np.full(300, start, dtype=np.int64)
        rx, ry, rs = reduce_points_arrays(x, y, sheets, ctx)
        for i in range(0, 300, 17):
            z, g = reduce_fundamental(PointH(x[i], y[i]))
            assert (rx[i], ry[i]) == pytest.approx((z.x, z.y), abs=1e-9)
            # sheet tracks the inverse reduction word mod q
            expected = CosetModQ.identity(5).mul(g.inv().mod_q(5))
            assert ctx.elements[rs[i]] == expected


class TestEnumeration:
    def test_complete_against_raw_search(self):
        bound = 3.0
        enum = get_enumeration(bound)
        cap = 2.0 * math.cosh(enum.bound)
        found = set()
        lim = int(math.isqrt(int(cap))) + 1
        for a, b, c, d in itertools.product(range(-lim, lim + 1), repeat=4):
            if a * d - b * c == 1 and a * a + b * b + c * c + d * d <= cap:
                e = GroupElement(a, b, c, d)
                found.add((e.a, e.b, e.c, e.d))
        mine = set(zip(enum.a.tolist(), enum.b.tolist(),
                       enum.c.tolist(), enum.d.tolist()))
        assert mine == found

    def test_capacity_error(self):
        with pytest.raises(CapacityError):
            get_enumeration(20.0)


class TestQuotientDistance:
    def test_zero_at_same_point(self):
        p = qpoint(0.1, 1.2)
        assert quotient_distance(p, p, 4.0) == 0.0

    def test_q1_known_value(self):
        # min over the whole group of d(i, g 2i) is ln 2 (brute-forced)
        p1 = qpoint(0.0, 1.0)
        p2 = qpoint(0.0, 2.0)
        assert quotient_distance(p1, p2, 6.0) == pytest.approx(
            math.log(2.0), abs=1e-12)

    def test_q2_minimal_displacement_in_identity_coset(self):
        # shortest nontrivial level-2 translation at i is z -> z + 2:
        # acosh(3); the enumeration confirms no shorter conjugate exists
        enum = get_enumeration(8.0)
        ctx = modq_context(2)
        idx = enum.members_of(2, ctx.index[CosetModQ.identity(2).key()])
        keep = ~((enum.a[idx] == 1) & (enum.b[idx] == 0)
                 & (enum.c[idx] == 0) & (enum.d[idx] == 1))
        best = math.inf
        z = ORIGIN
        for j in idx[keep]:
            g = GroupElement(int(enum.a[j]), int(enum.b[j]),
                             int(enum.c[j]), int(enum.d[j]))
            best = min(best, distance(z, g.apply(z)))
        assert best == pytest.approx(math.acosh(3.0), abs=1e-12)

    def test_exceeds_r_max(self):
        p1 = qpoint(0.0, 1.0, q=5)
        p2 = qpoint(0.0, 9.0, q=5,
                    sheet=modq_context(5).elements[13])
        assert quotient_distance(p1, p2, 0.5) == math.inf

    def test_below_direct_lift_distance(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            z1 = PointH(rng.uniform(-0.5, 0.5), rng.uniform(1.0, 2.5))
            z2 = PointH(rng.uniform(-0.5, 0.5), rng.uniform(1.0, 2.5))
            d = quotient_distance(qpoint(z1.x, z1.y), qpoint(z2.x, z2.y), 8.0)
            assert d <= distance(z1, z2) + 1e-12

    def test_interior_close_pairs_match_lift_distance(self):
        # deep in the domain interior, nearby points see no shorter
        # conjugate: the quotient distance equals the lift distance
        rng = np.random.default_rng(41)
        for _ in range(20):
            z1 = PointH(rng.uniform(-0.2, 0.2), rng.uniform(1.3, 1.7))
            z2 = PointH(z1.x + rng.uniform(-0.05, 0.05),
                        z1.y + rng.uniform(-0.05, 0.05))
            d = quotient_distance(qpoint(z1.x, z1.y), qpoint(z2.x, z2.y), 6.0)
            assert d == pytest.approx(distance(z1, z2), abs=1e-12)

    def test_pseudometric_small_sample(self):
        rng = np.random.default_rng(12)
        pts = []
        for _ in range(12):
            p, _ = sample_uniform_quotient(3, 5.0, rng)
            pts.append(p)
        dmat = {}
        for i, a in enumerate(pts):
            for j, b in enumerate(pts):
                dmat[i, j] = quotient_distance(a, b, 8.0)
        for i in range(12):
            for j in range(12):
                assert dmat[i, j] == pytest.approx(dmat[j, i], abs=1e-9)
                for k in range(12):
                    if all(math.isfinite(dmat[x]) for x in
                           ((i, k), (i, j), (j, k))):
                        assert dmat[i, k] <= dmat[i, j] + dmat[j, k] + 1e-9

    def test_deck_transformations_are_isometries(self):
        # left multiplication of both sheets by any cover-group element
        # leaves the relative coset, hence the distance, unchanged
        ctx = modq_context(3)
        rng = np.random.default_rng(9)
        p1, _ = sample_uniform_quotient(3, 5.0, rng)
        p2, _ = sample_uniform_quotient(3, 5.0, rng)
        base = quotient_distance(p1, p2, 8.0)
        for h in (ctx.elements[3], ctx.elements[7], ctx.elements[10]):
            moved1 = QuotientPoint(p1.base, h.mul(p1.sheet))
            moved2 = QuotientPoint(p2.base, h.mul(p2.sheet))
            assert quotient_distance(moved1, moved2, 8.0) == base

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(31)
        x0 = qpoint(0.0, 1.0, q=5)
        (xs, ys, sheets), _ = sample_uniform_quotient(5, 10.0, rng, 40)
        batch = quotient_distances_from(x0, xs, ys, sheets, 8.0)
        ctx = modq_context(5)
        for j in range(0, 40, 7):
            p = QuotientPoint(PointH(xs[j], ys[j]),
                              ctx.elements[int(sheets[j])])
            assert batch[j] == pytest.approx(
                quotient_distance(x0, p, 8.0), abs=1e-10)


class TestInjectivityRadius:
    def test_q2_at_origin(self):
        rep = injectivity_radius(qpoint(0.0, 1.0, q=2), r_max=6.0)
        assert rep.value == pytest.approx(0.5 * math.acosh(3.0), abs=1e-12)
        assert rep.stabilizer_order == 1

    def test_q1_elliptic_point(self):
        # i is fixed by the inversion: stabilizer of order 2, radius from
        # the shortest translation acosh(3/2)
        rep = injectivity_radius(qpoint(0.0, 1.0), r_max=6.0)
        assert rep.stabilizer_order == 2
        assert rep.value == pytest.approx(0.5 * math.acosh(1.5), abs=1e-12)

    def test_cusp_shrinkage(self):
        # high points: radius ~ half the distance of the level-q horizontal
        # translation z -> z + q
        for q, y in ((3, 6.0), (5, 8.0)):
            rep = injectivity_radius(qpoint(0.0, y, q=q), r_max=8.0)
            expected = 0.5 * math.acosh(1.0 + q * q / (2.0 * y * y))
            assert rep.value == pytest.approx(expected, abs=1e-12)

    def test_generic_interior_point_positive(self):
        rep = injectivity_radius(qpoint(0.21, 1.4), r_max=8.0)
        assert rep.value > 0.0


class TestUniformSampling:
    def test_truncated_fraction_formula(self):
        assert truncated_domain_fraction(10.0) == pytest.approx(
            (1.0 / 10.0) / (math.pi / 3.0))

    def test_volume_and_radius(self):
        assert quotient_volume(5) == pytest.approx(60 * math.pi / 3)
        assert quotient_R(5) == pytest.approx(math.acosh(11.0), abs=1e-12)

    def test_base_domain_area_by_quadrature(self):
        # independent oracle for the classical pi/3: integrate 1/y^2 over
        # |x| <= 1/2, y >= sqrt(1 - x^2)
        from scipy.integrate import quad
        area, _ = quad(lambda x: 1.0 / math.sqrt(1.0 - x * x), -0.5, 0.5,
                       epsabs=1e-12)
        assert area == pytest.approx(math.pi / 3.0, abs=1e-10)
        assert quotient_volume(1) == pytest.approx(area, abs=1e-10)

    def test_samples_in_domain(self):
        rng = np.random.default_rng(8)
        (x, y, sheets), frac = sample_uniform_quotient(3, 10.0, rng, 5000)
        assert frac == pytest.approx(0.3 / math.pi, abs=1e-12)
        assert np.all(np.abs(x) <= 0.5)
        assert np.all(x * x + y * y >= 1.0 - 1e-12)
        assert np.all(y <= 10.0)

    def test_sheet_marginal_chi_square(self):
        rng = np.random.default_rng(44)
        n = 100_000
        (_, _, sheets), _ = sample_uniform_quotient(3, 10.0, rng, n)
        counts = np.bincount(sheets, minlength=12)
        expected = n / 12.0
        stat = float(((counts - expected) ** 2 / expected).sum())
        assert stat < sstats.chi2.ppf(0.99, df=11)

    def test_base_marginal_chi_square(self):
        # mu-uniformity of the base point in (x, 1/y) cells
        rng = np.random.default_rng(45)
        n = 100_000
        (x, y, _), _ = sample_uniform_quotient(1, 10.0, rng, n)
        u = 1.0 / y
        # rectangle [−1/2,1/2] x [0.1, 0.9] strictly below the boundary arc
        inside = u <= 0.9
        cells_x = np.clip(((x[inside] + 0.5) * 4).astype(int), 0, 3)
        cells_u = np.clip(((u[inside] - 0.1) / 0.8 * 4).astype(int), 0, 3)
        counts = np.bincount(4 * cells_u + cells_x, minlength=16)
        expected = inside.sum() / 16.0
        stat = float(((counts - expected) ** 2 / expected).sum())
        assert stat < sstats.chi2.ppf(0.99, df=15)


class TestSanovWords:
    def test_round_trip_reduced_words(self):
        rng = np.random.default_rng(77)
        for _ in range(60):
            length = int(rng.integers(1, 8))
            word = []
            letter = "A" if rng.random() < 0.5 else "B"
            for _ in range(length):
                n = int(rng.integers(1, 4)) * (1 if rng.random() < 0.5 else -1)
                word.append((letter, n))
                letter = "B" if letter == "A" else "A"
            assert sanov_reduce(word_to_element(word)) == word

    def test_identity_and_cancellation(self):
        assert sanov_reduce(GroupElement.identity()) == []
        g = GEN_A.mul(GEN_A.inv())
        assert sanov_reduce(g) == []

    def test_rejects_odd_level(self):
        with pytest.raises(ValueError):
            sanov_reduce(GroupElement.translation(1))


class TestRandomCover:
    def test_trivial_cover(self):
        cover = random_cover(1, np.random.default_rng(0))
        g = GEN_A.mul(GEN_B)
        assert cover.sheet_after(0, g) == 0

    def test_cancellation_keeps_sheet(self):
        cover = random_cover(6, np.random.default_rng(5))
        g = GEN_A.mul(GEN_A.inv())
        for j in range(6):
            assert cover.sheet_after(j, g) == j

    def test_transfer_is_antihomomorphic_on_sheets(self):
        # moving by g then h equals moving by g h in one shot
        cover = random_cover(7, np.random.default_rng(6))
        rng = np.random.default_rng(11)
        for _ in range(20):
            g = word_to_element([("A", int(rng.integers(1, 3))),
                                 ("B", int(rng.integers(-3, -1)))])
            h = word_to_element([("B", int(rng.integers(1, 3))),
                                 ("A", int(rng.integers(1, 4)))])
            j = int(rng.integers(0, 7))
            assert cover.sheet_after(cover.sheet_after(j, g), h) == \
                cover.sheet_after(j, g.mul(h))

    def test_transitive_fraction_n3_exhaustive(self):
        perms = list(itertools.permutations(range(3)))
        count = sum(
            RandomCover(3, np.array(sa), np.array(sb)).is_transitive()
            for sa in perms for sb in perms)
        assert count == 26  # out of (3!)^2 = 36 pairs

    def test_json_round_trip(self):
        cover = random_cover(9, np.random.default_rng(13))
        back = RandomCover.from_json(cover.to_json())
        assert back.n == 9
        assert np.array_equal(back.sigma_a, cover.sigma_a)
        assert np.array_equal(back.sigma_b, cover.sigma_b)
