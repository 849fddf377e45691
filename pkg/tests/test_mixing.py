import math

import numpy as np
import pytest

from hypercut.errors import ConfigError
from hypercut.geometry import PointH, ball_volume
from hypercut.mixing import (CellPartition, ConcentrationReport,
                             concentration_fit, cutoff_locator,
                             default_partition, distance_histogram,
                             isoperimetric_check, kappa, tv_profile)
from hypercut.modular import (CosetModQ, QuotientPoint, modq_context,
                              quotient_R, quotient_volume)
from hypercut.spectral import clt_constants
from hypercut.torus import TorusConfig, torus_l1

MOD_AREA = math.pi / 3.0


def origin(q):
    return QuotientPoint(PointH(0.0, 1.0), CosetModQ.identity(q))


class TestCellPartition:
    @pytest.mark.parametrize("q,nx,nu", [(1, 6, 8), (2, 14, 16), (3, 9, 11)])
    def test_measures_sum_exactly(self, q, nx, nu):
        part = CellPartition.build(q, nx, nu)
        assert part.base_total() == pytest.approx(MOD_AREA, abs=1e-12)
        assert np.all(part.base_measures >= -1e-15)

    def test_capped_total_matches_tail_formula(self):
        part = CellPartition.build(3, 9, 11, cusp_cap=10.0)
        expected = part.n_sheets * (MOD_AREA - 1.0 / 10.0)
        assert part.capped_total() == pytest.approx(expected, abs=1e-9)

    def test_probabilities_normalized(self):
        part = default_partition(2)
        assert part.cell_probabilities().sum() == pytest.approx(1.0,
                                                                abs=1e-12)

    def test_resolution_floor(self):
        for q in (2, 3, 5):
            assert default_partition(q).max_cell_fraction() <= 1e-3 + 1e-12

    def test_binning_agrees_with_measures(self):
        # uniform samples land in cells proportionally to their measures
        from hypercut.modular import sample_uniform_quotient
        from hypercut.walks import stream
        part = CellPartition.build(1, 5, 6, cusp_cap=10.0)
        rng = stream(5, 50)
        n = 200_000
        (x, y, _), _ = sample_uniform_quotient(1, 10.0, rng, n)
        cells = part.base_cells_of(x, 1.0 / y)
        counts = np.bincount(cells, minlength=part.n_base)
        capped = part.base_measures.copy()
        # cells under the cusp cap receive no samples from the truncated
        # sampler; compare on the capped region only
        nx = 5
        under = np.repeat(part.u_edges[:-1] < 1.0 / 10.0 - 1e-12, nx)
        probs = np.where(under, 0.0, capped)
        probs /= probs.sum()
        err = np.abs(counts / n - probs).max()
        assert err <= 5e-3

    def test_sample_in_cells_stays_inside(self):
        from hypercut.walks import stream
        part = CellPartition.build(2, 6, 7)
        rng = stream(1, 51)
        ids = [int(np.argmax(part.base_measures))]
        x, y = part.sample_in_cells(ids, 64, rng)
        cells = part.base_cells_of(x, 1.0 / y)
        assert np.all(cells == ids[0])


class TestTvProfile:
    def test_initial_tv_is_point_mass_value(self):
        part = default_partition(2)
        prof = tv_profile(2, origin(2), 1.0, [0], 5_000, part, seed=3)
        start_cell = part.cells_of(np.array([0.0]), np.array([1.0]),
                                   np.array([modq_context(2).index[
                                       CosetModQ.identity(2).key()]]))
        pi0 = part.cell_probabilities()[start_cell[0]]
        assert prof.tv[0] == pytest.approx(2.0 * (1.0 - pi0), abs=1e-12)

    def test_monotone_within_ci_and_bounds(self):
        prof = tv_profile(2, origin(2), 1.0, range(0, 9), 40_000, seed=4)
        assert np.all(prof.tv <= 2.0 + 1e-12)
        assert np.all(prof.tv >= 0.0)
        for i in range(len(prof.ks) - 1):
            assert prof.tv[i + 1] <= prof.tv[i] + (
                prof.ci_hi[i + 1] - prof.ci_lo[i + 1]) + 0.02

    def test_deterministic_across_workers(self):
        a = tv_profile(2, origin(2), 1.0, [0, 2, 4], 30_000, seed=9,
                       workers=1)
        b = tv_profile(2, origin(2), 1.0, [0, 2, 4], 30_000, seed=9,
                       workers=3)
        assert np.array_equal(a.tv, b.tv)
        assert np.array_equal(a.ci_lo, b.ci_lo)

    def test_cover_group_start_invariance(self):
        # moving the start sheet by a deck transformation relabels cells
        # of equal equilibrium probability: same profile, same seed
        ctx = modq_context(2)
        h = ctx.elements[4]
        a = tv_profile(2, origin(2), 1.0, [1, 3, 5], 20_000, seed=12)
        moved = QuotientPoint(PointH(0.0, 1.0),
                              h.mul(CosetModQ.identity(2)))
        b = tv_profile(2, moved, 1.0, [1, 3, 5], 20_000, seed=12)
        # identical up to float reassociation: the cell sum is permuted
        np.testing.assert_allclose(a.tv, b.tv, rtol=1e-12)

    def test_partition_refinement_stability(self):
        coarse = CellPartition.build(2, 14, 16)
        fine = CellPartition.build(2, 28, 32)
        a = tv_profile(2, origin(2), 1.0, [6], 60_000, coarse, seed=5)
        b = tv_profile(2, origin(2), 1.0, [6], 60_000, fine, seed=5)
        ci = (a.ci_hi[0] - a.ci_lo[0]) + (b.ci_hi[0] - b.ci_lo[0])
        assert abs(a.tv[0] - b.tv[0]) <= ci + b.bias_note

    def test_precondition_failures(self):
        with pytest.raises(ConfigError):
            tv_profile(2, origin(3), 1.0, [0], 100)
        high = QuotientPoint(PointH(0.0, 40.0), CosetModQ.identity(2))
        with pytest.raises(ConfigError):
            tv_profile(2, high, 1.0, [0], 100, r0_floor=0.5)


class TestCutoffLocator:
    def test_step_profile_zero_width(self):
        # a one-interval jump puts every crossing inside that interval:
        # zero width at grid resolution
        ks = np.arange(10)
        tvs = np.where(ks < 5, 2.0, 0.0)
        rep = cutoff_locator(ks, tvs, 1.0, 2.0)
        assert 4.0 <= rep["t_eps"][1.9] <= rep["t_eps"][0.1] <= 5.0
        assert rep["t_eps"][0.1] - rep["t_eps"][1.9] <= 1.0

    def test_unbracketed_raises(self):
        with pytest.raises(ValueError):
            cutoff_locator([0, 1, 2], [2.0, 1.8, 1.6], 1.0, 2.0)

    def test_torus_profile_no_abrupt_transition(self):
        # continuous-time flat profile: width stays proportional to the
        # location, the opposite of an abrupt transition
        lam = 1.0
        ts = np.linspace(0.05, 12.0, 400)
        tvs = np.array([min(2.0, torus_l1(TorusConfig(lam, t))) for t in ts])
        rep = cutoff_locator(ts, tvs, 1.0, R_X=4.0)
        assert rep["width_to_location"] >= 0.5
        # doubling the scale doubles the whole profile in time: the
        # absolute window grows with lambda instead of tightening
        ts2 = np.linspace(0.1, 24.0, 400)
        tvs2 = np.array([min(2.0, torus_l1(TorusConfig(2.0, t)))
                         for t in ts2])
        rep2 = cutoff_locator(ts2, tvs2, 1.0, R_X=4.0)
        w1 = rep["t_eps"][0.1] - rep["t_eps"][1.9]
        w2 = rep2["t_eps"][0.1] - rep2["t_eps"][1.9]
        assert w2 == pytest.approx(2.0 * w1, rel=0.05)


class TestDistanceHistogram:
    def test_requires_spanning_r_max(self):
        with pytest.raises(ConfigError):
            distance_histogram(5, origin(5), 100, 3.0)

    def test_small_radius_matches_ball_volume(self):
        # valid while the ball embeds: at the level-5 origin the
        # injectivity radius is ~1.65, so compare on r <= 1.6
        hist = distance_histogram(5, origin(5), 20_000, 8.0, seed=6)
        assert hist["injectivity_radius"] > 1.6
        for row in hist["volume_comparison"]:
            if row["ball_fraction"] >= 2e-2 and row["r"] <= 1.6:
                assert row["fraction"] == pytest.approx(
                    row["ball_fraction"], rel=0.1)

    def test_gamma_zero_trivial_bound(self):
        hist = distance_histogram(2, origin(2), 5_000, 8.0, seed=7,
                                  gammas=(1e-9,))
        frac = list(hist["lower_tail"].values())[0]["fraction"]
        assert frac <= ball_volume(quotient_R(2)) / quotient_volume(2) + 0.05


class TestConcentrationFit:
    def test_synthetic_geometric_tail_recovers_rate(self):
        # |d - median| ~ Exp(1) gives tail mass e^{-gamma}: slope -1
        rng = np.random.default_rng(5)
        n = 40_000
        sign = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        d = 3.0 + sign * (-np.log(rng.random(n)))
        rep = concentration_fit(d)
        assert rep.slope == pytest.approx(-1.0, abs=0.05)
        assert rep.a == pytest.approx(math.e, rel=0.06)
        assert rep.r2 >= 0.99
        assert not rep.inconclusive

    def test_degenerate_refused(self):
        with pytest.raises(ConfigError):
            concentration_fit(np.full(20_000, 1.0))
        with pytest.raises(ConfigError):
            concentration_fit(np.array([1.0, 2.0]))

    def test_overflow_needs_floor(self):
        rng = np.random.default_rng(6)
        with pytest.raises(ConfigError):
            concentration_fit(rng.random(20_000), n_exceed=5)


class TestIsoperimetry:
    def test_kappa_value(self):
        assert kappa(2.0, 2.0) == pytest.approx(9.0 * math.exp(-2.0))

    def test_whole_space_region(self):
        # the full base footprint on every sheet: c = 1 and the bound
        # degenerates to 1 / (kappa * 0 + 1) = 1
        part = CellPartition.build(2, 4, 5)
        all_cells = np.nonzero(part.base_measures > 0)[0]
        rep = isoperimetric_check(2, ("cells", part, all_cells), 0.5, 4.0,
                                  2_000, seed=8, refs_per_cell=3)
        assert rep["c"] == pytest.approx(1.0 / part.n_sheets, abs=1e-9)
        # dilating a full sheet footprint catches everything nearby
        assert rep["c_prime"] >= rep["bound"] - rep["ci"]

    def test_two_ball_oracle(self):
        # Y = ball(r0): the dilation is the exact ball of radius r0 + r,
        # so c'/c must match the analytic volume ratio
        rep = isoperimetric_check(5, ("ball", origin(5), 0.7), 0.6, 4.0,
                                  60_000, seed=10)
        expected = ball_volume(1.3) / ball_volume(0.7)
        assert rep["c_prime"] / rep["c"] == pytest.approx(expected, rel=0.05)
        assert rep["passes"]

    def test_ball_exceeding_injectivity_refused(self):
        with pytest.raises(ConfigError):
            isoperimetric_check(5, ("ball", origin(5), 2.5), 0.5, 4.0, 100)
