"""Sobol generation, Owen scrambling, shifts, and star discrepancy."""

import math

import numpy as np
import pytest

from nestiq.lds import (
    DigitalSequence,
    DirectionNumberError,
    PointSet,
    RandomizationKey,
    lattice_points,
    load_direction_numbers,
    owen_scramble,
    random_shift,
    sobol_sequence,
    star_discrepancy_1d,
    star_discrepancy_brute,
)

PARAMS = load_direction_numbers()


class TestDirectionNumbers:
    def test_builtin_covers_64_dimensions(self):
        assert PARAMS.dimension == 64

    def test_dimension_one_is_radical_inverse(self):
        p = load_direction_numbers(dimension=1)
        expected = np.array([1 << (32 - k) for k in range(1, 33)], dtype=np.uint64)
        np.testing.assert_array_equal(p.directions[0].astype(np.uint64), expected)

    def test_single_record_expands(self):
        # degree-1 polynomial with m_1 = 1: v_1 = 2^31
        p = load_direction_numbers("2 1 0 1")
        assert p.dimension == 2
        assert int(p.directions[1, 0]) == 2**31

    def test_even_initial_value_rejected(self):
        with pytest.raises(DirectionNumberError, match="odd"):
            load_direction_numbers("2 1 0 2")

    def test_malformed_line_reports_lineno(self):
        with pytest.raises(DirectionNumberError, match="line 2"):
            load_direction_numbers("2 1 0 1\n3 2 1 1 oops")

    def test_dimension_gap_rejected(self):
        with pytest.raises(DirectionNumberError, match="gap|duplicate"):
            load_direction_numbers("2 1 0 1\n4 3 1 1 3 1")

    def test_header_line_tolerated(self):
        p = load_direction_numbers("d s a m_i\n2 1 0 1")
        assert p.dimension == 2

    def test_top_bit_invariant(self):
        d = PARAMS.directions.astype(np.uint64)
        k = np.arange(1, 33, dtype=np.uint64)
        assert np.all(d >= (np.uint64(1) << (np.uint64(32) - k))[None, :])


class TestSobolSequence:
    def test_dimension1_k2_set(self):
        seq = sobol_sequence(PARAMS, 1, 2)
        assert set(seq.fractions().ravel()) == {0.0, 0.25, 0.5, 0.75}

    def test_k0_single_origin_point(self):
        seq = sobol_sequence(PARAMS, 1, 0)
        assert seq.count == 1 and seq.fractions()[0, 0] == 0.0

    def test_projections_are_full_grids(self):
        seq = sobol_sequence(PARAMS, 2, 3)
        fr = seq.fractions()
        for j in range(2):
            np.testing.assert_allclose(np.sort(fr[:, j]), np.arange(8) / 8)

    @pytest.mark.parametrize("k", range(1, 13))
    def test_dimension1_set_equality(self, k):
        seq = sobol_sequence(PARAMS, 1, k)
        expected = {i << (32 - k) for i in range(1 << k)}
        assert set(int(v) for v in seq.values[:, 0]) == expected

    def test_count_must_be_power_of_two(self):
        with pytest.raises(ValueError, match="power of two"):
            DigitalSequence(values=np.zeros((3, 1), dtype=np.uint32))

    def test_range_checks(self):
        with pytest.raises(ValueError):
            sobol_sequence(PARAMS, 0, 3)
        with pytest.raises(ValueError):
            sobol_sequence(PARAMS, 65, 3)
        with pytest.raises(ValueError):
            sobol_sequence(PARAMS, 1, 32)


class TestOwenScramble:
    def test_uniform_marginal_mean(self):
        seq = sobol_sequence(PARAMS, 1, 12)
        pts = owen_scramble(seq, RandomizationKey(5))
        # iid-uniform bound, generous for a scrambled net
        assert abs(pts.values[:, 0].mean() - 0.5) < 3 * (1 / math.sqrt(12)) / 64

    def test_deterministic(self):
        seq = sobol_sequence(PARAMS, 3, 8)
        key = RandomizationKey(9, tag="err")
        a = owen_scramble(seq, key)
        b = owen_scramble(seq, key)
        np.testing.assert_array_equal(a.values, b.values)

    def test_distinct_keys_differ(self):
        seq = sobol_sequence(PARAMS, 1, 6)
        a = owen_scramble(seq, RandomizationKey(1))
        b = owen_scramble(seq, RandomizationKey(2))
        assert not np.array_equal(a.values, b.values)

    def test_elementary_intervals_1d(self):
        seq = sobol_sequence(PARAMS, 1, 8)
        pts = owen_scramble(seq, RandomizationKey(3))
        hist = np.histogram(pts.values[:, 0], bins=256, range=(0, 1))[0]
        assert np.all(hist == 1)

    def test_net_preservation_2d(self):
        # every dyadic box of volume 2^-6 holds exactly one point, all splits
        seq = sobol_sequence(PARAMS, 2, 6)
        pts = owen_scramble(seq, RandomizationKey(17)).values
        for j1 in range(7):
            hist = np.histogram2d(
                pts[:, 0], pts[:, 1], bins=[2**j1, 2 ** (6 - j1)],
                range=[[0, 1], [0, 1]],
            )[0]
            assert np.all(hist == 1), f"split {j1}/{6 - j1}"

    def test_ks_uniformity_across_keys(self):
        from scipy.stats import kstest

        seq = sobol_sequence(PARAMS, 1, 12)
        passed = 0
        for s in range(100):
            pts = owen_scramble(seq, RandomizationKey(s, tag="ks"))
            stat = kstest(pts.values[:, 0], "uniform").statistic
            passed += stat < 0.03
        assert passed >= 95

    def test_coordinates_strictly_inside(self):
        seq = sobol_sequence(PARAMS, 4, 10)
        v = owen_scramble(seq, RandomizationKey(0)).values
        assert np.all(v >= 2.0**-64) and np.all(v < 1.0)

    def test_discrepancy_decay_slope(self):
        ks = range(4, 13)
        stats = []
        for k in ks:
            seq = sobol_sequence(PARAMS, 1, k)
            pts = owen_scramble(seq, RandomizationKey(k, tag="decay"))
            stats.append(star_discrepancy_1d(pts))
        slope = np.polyfit(list(ks), np.log2(stats), 1)[0]
        assert slope <= -0.9


class TestRandomShift:
    def test_identity_shift_hook(self):
        pts = PointSet(values=np.array([[0.25], [0.75]]))
        out = random_shift(pts, RandomizationKey(0), shift=np.array([0.0]))
        np.testing.assert_allclose(out.values, pts.values, atol=2**-60)

    def test_exact_wraparound(self):
        pts = PointSet(values=np.array([[0.25], [0.75]]))
        out = random_shift(pts, RandomizationKey(0), shift=np.array([0.5]))
        np.testing.assert_allclose(np.sort(out.values[:, 0]), [0.25, 0.75])
        np.testing.assert_allclose(out.values[:, 0], [0.75, 0.25])

    def test_shift_preserves_lattice_gaps(self):
        base = lattice_points(np.array([1.0]), 7)
        shifted = random_shift(base, RandomizationKey(12))

        def circular_gaps(v):
            s = np.sort(v)
            return np.sort(np.diff(np.concatenate([s, s[:1] + 1.0])))

        np.testing.assert_allclose(
            circular_gaps(base.values[:, 0]),
            circular_gaps(shifted.values[:, 0]),
            atol=1e-12,
        )


class TestLatticePoints:
    def test_1d_grid(self):
        pts = lattice_points(np.array([1.0]), 4)
        np.testing.assert_allclose(
            np.sort(pts.values[:, 0]), [2.0**-64, 0.25, 0.5, 0.75]
        )

    def test_diagonal(self):
        pts = lattice_points(np.array([1.0, 1.0]), 3)
        np.testing.assert_allclose(pts.values[:, 0], pts.values[:, 1])
        np.testing.assert_allclose(np.sort(pts.values[:, 0]), [2.0**-64, 1 / 3, 2 / 3])

    def test_single_point_clamped_off_origin(self):
        pts = lattice_points(np.array([0.3, 0.7]), 1)
        np.testing.assert_array_equal(pts.values, [[2.0**-64, 2.0**-64]])

    def test_empty_vector_rejected(self):
        with pytest.raises(ValueError):
            lattice_points(np.array([]), 4)


def _brute_1d(points, grid=200001):
    """Sup over anchored intervals on a dense grid (independent oracle)."""
    t = np.asarray(points)
    s = np.linspace(0, 1, grid)
    counts = np.searchsorted(np.sort(t), s, side="left") / t.size
    counts_hi = np.searchsorted(np.sort(t), s, side="right") / t.size
    return max(np.max(np.abs(counts - s)), np.max(np.abs(counts_hi - s)))


class TestStarDiscrepancy:
    def test_single_midpoint(self):
        assert star_discrepancy_1d(np.array([0.5])) == pytest.approx(0.5)
        assert _brute_1d(np.array([0.5])) == pytest.approx(0.5, abs=1e-4)

    def test_two_points(self):
        assert star_discrepancy_1d(np.array([0.25, 0.75])) == pytest.approx(0.25)
        assert _brute_1d(np.array([0.25, 0.75])) == pytest.approx(0.25, abs=1e-4)

    @pytest.mark.parametrize("k", range(1, 11))
    def test_sobol_first_block_exact(self, k):
        seq = sobol_sequence(PARAMS, 1, k)
        assert star_discrepancy_1d(seq.fractions()) == 2.0**-k

    def test_brute_agrees_with_sorted_formula(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(size=(20, 1))
        assert star_discrepancy_brute(pts) == pytest.approx(
            star_discrepancy_1d(pts), abs=1e-12
        )

    def test_brute_2d_single_point(self):
        assert star_discrepancy_brute(np.array([[0.5, 0.5]])) == pytest.approx(0.75)

    def test_brute_2d_diagonal_matches_enumeration(self):
        pts = np.array([[0.2, 0.2], [0.5, 0.5], [0.8, 0.8]])
        # hand enumeration: box [0,1)x[0,1) gives |1 - 1| = 0, box just below
        # (0.8, 0.8) holds 2/3 of the mass over volume 0.64, box at (0.5,0.5)
        # closed holds 2/3 over 0.25 etc.; the sup is 2/3 - 0.2^2 at (0.2,0.2)+
        # closed? enumerate explicitly:
        best = 0.0
        for sx in [0.2, 0.5, 0.8, 1.0]:
            for sy in [0.2, 0.5, 0.8, 1.0]:
                vol = sx * sy
                le = np.mean((pts[:, 0] <= sx) & (pts[:, 1] <= sy))
                lt = np.mean((pts[:, 0] < sx) & (pts[:, 1] < sy))
                best = max(best, le - vol, vol - lt)
        assert star_discrepancy_brute(pts) == pytest.approx(best, abs=1e-12)

    def test_size_limits_refused(self):
        with pytest.raises(ValueError, match="limited"):
            star_discrepancy_brute(np.zeros((65, 1)) + 0.5)
        with pytest.raises(ValueError, match="limited"):
            star_discrepancy_brute(np.zeros((4, 4)) + 0.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            star_discrepancy_1d(np.zeros((0, 1)))


class TestRandomizationKey:
    def test_distinct_indices_distinct_streams(self):
        k = RandomizationKey(1, tag="a")
        u1 = k.child(0).uniforms(100)
        u2 = k.child(1).uniforms(100)
        assert not np.allclose(u1, u2)

    def test_uniforms_deterministic_and_in_range(self):
        k = RandomizationKey(123, tag="x", indices=(4, 5))
        u = k.uniforms((50, 3))
        np.testing.assert_array_equal(u, k.uniforms((50, 3)))
        assert np.all(u > 0) and np.all(u < 1)

    def test_uniforms_pass_ks(self):
        from scipy.stats import kstest

        u = RandomizationKey(77).uniforms(8192)
        assert kstest(u, "uniform").statistic < 0.02
