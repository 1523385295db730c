import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import binom

from puf_forge.metrics import (
    DEFAULT_CORNERS,
    REFERENCE_CORNER,
    BitMatrix,
    Corner,
    LocationMeta,
    SchemaError,
    ber,
    breakdown_probability,
    fhd,
    inter_fhd_stats,
    majority_error_probability,
    majority_vote,
    majority_vote_stack,
    or_debias,
    percent_str,
)


def layout(n, tags=None):
    tags = tags or [f"t{i}" for i in range(n)]
    return [LocationMeta(t, t, i) for i, t in enumerate(tags)]


def matrix_with_unstable(k, chips=99, locs=24, repeats=3, corner=Corner(1.2, 25)):
    ref = np.zeros((chips, locs), dtype=np.uint8)
    sets = {(REFERENCE_CORNER, 0): ref}
    for r in range(repeats):
        reads = ref.copy()
        if r == repeats - 1:
            reads.ravel()[:k] = 1
        sets[(corner, r)] = reads
    return BitMatrix.from_sets(sets, layout(locs))


bitvec = st.integers(1, 40).flatmap(lambda n: st.tuples(*[arrays(np.uint8, n, elements=st.integers(0, 1))] * 3))


class TestFHD:
    @given(bitvec)
    def test_metric_properties(self, abc):
        a, b, c = abc
        assert fhd(a, a) == 0.0
        assert fhd(a, b) == fhd(b, a)
        assert fhd(a, c) <= fhd(a, b) + fhd(b, c) + 1e-12
        assert 0.0 <= fhd(a, b) <= 1.0

    def test_examples(self):
        assert fhd([0, 0, 1, 1], [0, 1, 1, 0]) == 0.5
        assert fhd([1] * 8, [0] * 8) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            fhd([0, 1], [0, 1, 1])


class TestInterFHD:
    def test_matches_brute_force(self, rng):
        data = (rng.random((37, 11)) < 0.4).astype(np.uint8)
        values = [fhd(a, b) for a, b in itertools.combinations(data, 2)]
        stats = inter_fhd_stats(data, chunk=8)
        assert stats.pairs == len(values)
        assert stats.mean == pytest.approx(np.mean(values))
        assert stats.std == pytest.approx(np.std(values))
        assert stats.histogram.sum() == stats.pairs

    def test_thread_count_does_not_matter(self, rng):
        data = (rng.random((300, 24)) < 0.5).astype(np.uint8)
        one = inter_fhd_stats(data, threads=1, chunk=64)
        four = inter_fhd_stats(data, threads=4, chunk=64)
        np.testing.assert_array_equal(one.histogram, four.histogram)
        assert one.mean == four.mean

    def test_needs_two_chips(self):
        with pytest.raises(ValueError):
            inter_fhd_stats(np.zeros((1, 4), dtype=np.uint8))


class TestBER:
    @pytest.mark.parametrize("k, expected", [(0, "0.00%"), (1, "0.04%"), (2, "0.08%"), (3, "0.12%")])
    def test_table_arithmetic(self, k, expected):
        result = ber(matrix_with_unstable(k), Corner(1.2, 25))
        assert result.total_cells == 2376
        assert result.unstable_count == k
        assert result.percent == expected

    def test_repeats_per_corner_limits_reads(self):
        # the flipped reads sit in the last repeat only
        assert ber(matrix_with_unstable(3), Corner(1.2, 25), repeats_per_corner=2).unstable_count == 0

    def test_reference_corner_other_repeats(self):
        ref = np.zeros((4, 2), dtype=np.uint8)
        noisy = ref.copy()
        noisy[0, 0] = 1
        bm = BitMatrix.from_sets({(REFERENCE_CORNER, 0): ref, (REFERENCE_CORNER, 1): noisy}, layout(2))
        assert ber(bm, REFERENCE_CORNER).unstable_count == 1


class TestPercent:
    @pytest.mark.parametrize("fraction, kwargs, expected", [
        (16 / 99, {"decimals": 1}, "16.2%"),
        (12 / 198, {"decimals": 1}, "6.1%"),
        (0.5, {"decimals": 1}, "50.0%"),
        (3 / 2376, {"truncate": True}, "0.12%"),
        (3 / 2376, {}, "0.13%"),
    ])
    def test_formatting(self, fraction, kwargs, expected):
        assert percent_str(fraction, **kwargs) == expected


class TestBreakdown:
    def test_single_structure(self):
        data = np.zeros((99, 1), dtype=np.uint8)
        data[:16, 0] = 1
        rows = breakdown_probability(data, structure_tags=["Test1"])
        assert rows["Test1"].percent == "16.2%"

    def test_duplicates_pooled(self):
        data = np.zeros((99, 2), dtype=np.uint8)
        data[:7, 0] = 1
        data[:5, 1] = 1
        rows = breakdown_probability(data, structure_tags=["V_T2", "V_T2"])
        assert rows["V_T2"].total == 198
        assert rows["V_T2"].percent == "6.1%"

    def test_unknown_tag_warns(self):
        data = np.zeros((5, 1), dtype=np.uint8)
        with pytest.warns(UserWarning, match="unknown structure tag"):
            rows = breakdown_probability(data, tags=["nope"], structure_tags=["a"])
        assert rows == {}


class TestMajority:
    @pytest.mark.parametrize("reads, expected", [([0, 1, 1], 1), ([1, 0, 0], 0), ([1], 1)])
    def test_vote(self, reads, expected):
        assert majority_vote(reads) == expected

    def test_even_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            majority_vote([0, 1])
        with pytest.raises(ValueError, match="odd"):
            majority_vote_stack(np.zeros((4, 2, 2)))

    def test_stack(self):
        stack = np.array([[[0, 1]], [[1, 1]], [[0, 0]]])
        np.testing.assert_array_equal(majority_vote_stack(stack), [[0, 1]])

    @given(st.floats(0, 1), st.sampled_from([1, 3, 5, 11, 21]))
    def test_error_probability_matches_binomial_tail(self, q, n):
        assert majority_error_probability(q, n) == pytest.approx(binom.sf(n // 2, n, q), abs=1e-12)

    def test_example(self):
        assert majority_error_probability(0.01, 11) < 1e-9


class TestOrDebias:
    def test_example(self):
        assert or_debias(0.25, 2) == pytest.approx(0.5625)
        assert or_debias(0.25, 2) == pytest.approx(0.5623, abs=1e-3)

    @pytest.mark.parametrize("p, k", [(-0.1, 1), (0.5, 0)])
    def test_rejects(self, p, k):
        with pytest.raises(ValueError):
            or_debias(p, k)


class TestBitMatrixIO:
    def make(self, rng):
        sets = {(c, r): (rng.random((5, 3)) < 0.5).astype(np.uint8) for c in DEFAULT_CORNERS for r in range(2)}
        return BitMatrix.from_sets(sets, [LocationMeta("V_T1", "V_T1", 0), LocationMeta("V_T1", "V_T1", 2),
                                          LocationMeta("P_T2", "P_T2", 1)], chip_ids=[10, 11, 12, 13, 14])

    def test_round_trip(self, rng, tmp_path):
        bm = self.make(rng)
        bm.write_csv(tmp_path / "b.csv")
        bm.write_layout(tmp_path / "l.json")
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            back = BitMatrix.read(tmp_path / "b.csv", tmp_path / "l.json")
        np.testing.assert_array_equal(back.data, bm.data)
        assert back.locations == bm.locations
        assert back.reference == bm.reference
        assert list(back.chips) == [10, 11, 12, 13, 14]
        assert back.corners() == sorted(DEFAULT_CORNERS)

    def test_no_sidecar_warns(self, rng, tmp_path):
        bm = self.make(rng)
        bm.write_csv(tmp_path / "b.csv")
        with pytest.warns(UserWarning, match="sidecar"):
            back = BitMatrix.read(tmp_path / "b.csv")
        assert [loc.adjacency_index for loc in back.locations] == [0, 1, 2]

    def test_schema_errors_are_located(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("chip_id,corner_v,corner_t,repeat,loc_000,loc_001\n"
                        "0,1,25,0,0,2\n"
                        "1,1,25,0,1\n")
        with pytest.raises(SchemaError) as info:
            BitMatrix.read(path)
        problems = info.value.problems
        assert any("row 2" in p and "loc_001" in p for p in problems)
        assert any("row 3" in p for p in problems)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("chip,corner_v,corner_t,repeat,loc_000\n0,1,25,0,1\n")
        with pytest.raises(SchemaError, match="header"):
            BitMatrix.read(path)

    def test_missing_reference(self):
        with pytest.raises(ValueError, match="reference"):
            BitMatrix.from_sets({(Corner(1.2, 25), 0): np.zeros((2, 2))}, layout(2))

    def test_inconsistent_chips(self):
        with pytest.raises(ValueError, match="same chips"):
            BitMatrix(np.zeros((3, 1)), [0, 1, 0], [1, 1, 1.2], [25, 25, 25], [0, 0, 0], layout(1))
