"""Aggregation, spatial-max scoring, and order-statistic tests."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adapt.attention import (
    AttentionTensor,
    TokenScores,
    aggregate_blocks,
    aggregate_heads,
    cumulative_score,
    kth_largest,
    kth_largest_of,
    mean_score,
    should_transition,
    token_scores,
    transition_statistic,
)
from adapt.errors import (
    AxisMissing,
    DimMismatch,
    EmptyList,
    FormatError,
    IndexOutOfRange,
    KOutOfRange,
    RangeViolation,
)
from adapt.tensorio import load_tensor, load_vector, save_tensor, save_vector


def make_tensor(data, axes=("head", "h", "w", "seq")):
    return AttentionTensor(data=np.asarray(data, dtype=np.float32), axes=axes)


def random_tensor(rng, shape, axes=("head", "h", "w", "seq")):
    return AttentionTensor(
        data=rng.random(shape).astype(np.float32) * 0.9, axes=axes
    )


class TestAggregateHeads:
    def test_constant_tensor(self):
        t = make_tensor(np.full((4, 2, 2, 3), 0.5))
        out = aggregate_heads(t)
        assert out.axes == ("h", "w", "seq")
        assert np.allclose(out.data, 0.5)

    def test_two_point_mean(self):
        t = make_tensor(np.stack([np.zeros((2, 2, 3)), np.ones((2, 2, 3))]))
        assert np.allclose(aggregate_heads(t).data, 0.5)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(1)
        t = random_tensor(rng, (5, 3, 4, 6))
        out = aggregate_heads(t)
        # independent oracle: explicit per-element mean over the head axis
        oracle = np.zeros((3, 4, 6), dtype=np.float64)
        for head in range(5):
            oracle += t.data[head]
        oracle /= 5
        assert np.max(np.abs(out.data - oracle)) < 1e-7

    def test_axis_missing(self):
        t = make_tensor(np.full((2, 2, 3), 0.1), axes=("h", "w", "seq"))
        with pytest.raises(AxisMissing):
            aggregate_heads(t)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        t = random_tensor(rng, (4, 2, 2, 3))
        perm = t.data[[2, 0, 3, 1]]
        out_a = aggregate_heads(t)
        out_b = aggregate_heads(make_tensor(perm))
        assert np.allclose(out_a.data, out_b.data, atol=1e-7)


class TestAggregateBlocks:
    def test_single_block_identity(self):
        rng = np.random.default_rng(3)
        b = random_tensor(rng, (2, 2, 3), axes=("h", "w", "seq"))
        out = aggregate_blocks([b])
        assert np.allclose(out.data, b.data)

    def test_identical_blocks(self):
        b = make_tensor(np.full((2, 2, 3), 0.25), axes=("h", "w", "seq"))
        out = aggregate_blocks([b, b, b])
        assert np.allclose(out.data, 0.25)

    def test_empty_list(self):
        with pytest.raises(EmptyList):
            aggregate_blocks([])

    def test_dim_mismatch(self):
        a = make_tensor(np.full((2, 2, 3), 0.1), axes=("h", "w", "seq"))
        b = make_tensor(np.full((2, 2, 4), 0.1), axes=("h", "w", "seq"))
        with pytest.raises(DimMismatch):
            aggregate_blocks([a, b])

    def test_order_invariant_and_in_range(self):
        rng = np.random.default_rng(4)
        blocks = [random_tensor(rng, (2, 3, 4), axes=("h", "w", "seq")) for _ in range(4)]
        out_a = aggregate_blocks(blocks)
        out_b = aggregate_blocks(blocks[::-1])
        assert np.allclose(out_a.data, out_b.data, atol=1e-7)
        assert np.all(out_a.data >= 0.0) and np.all(out_a.data <= 1.0)


class TestTokenScores:
    def test_one_hot_spatial_map(self):
        data = np.zeros((2, 2, 3), dtype=np.float32)
        data[1, 0, 2] = 1.0
        t = make_tensor(data, axes=("h", "w", "seq"))
        out = token_scores(t, [2], ["frog"])
        assert out.values == (1.0,)

    def test_all_zero_map(self):
        t = make_tensor(np.zeros((2, 2, 3)), axes=("h", "w", "seq"))
        assert token_scores(t, [1], ["x"]).values == (0.0,)

    def test_matches_exhaustive_scan_oracle(self):
        rng = np.random.default_rng(5)
        t = random_tensor(rng, (3, 4, 6), axes=("h", "w", "seq"))
        out = token_scores(t, [0, 2, 5], ["a", "b", "c"])
        for value, pos in zip(out.values, (0, 2, 5)):
            best = -1.0
            for i in range(3):
                for j in range(4):
                    best = max(best, float(t.data[i, j, pos]))
            assert value == pytest.approx(best, abs=0.0)

    def test_invariant_to_other_positions(self):
        rng = np.random.default_rng(6)
        base = rng.random((3, 4, 6)).astype(np.float32) * 0.9
        changed = base.copy()
        changed[:, :, 0] = 0.99  # non-token position
        a = token_scores(make_tensor(base, axes=("h", "w", "seq")), [2, 3], ["a", "b"])
        b = token_scores(make_tensor(changed, axes=("h", "w", "seq")), [2, 3], ["a", "b"])
        assert a.values == b.values

    def test_index_out_of_range(self):
        t = make_tensor(np.zeros((2, 2, 3)), axes=("h", "w", "seq"))
        with pytest.raises(IndexOutOfRange):
            token_scores(t, [3], ["x"])

    def test_negative_values_rejected(self):
        with pytest.raises(RangeViolation):
            make_tensor(np.full((2, 2, 3), -0.1), axes=("h", "w", "seq"))

    def test_score_range_validated(self):
        with pytest.raises(RangeViolation):
            TokenScores(values=(1.5,), token_labels=("x",))


class TestOrderStatistics:
    @pytest.mark.parametrize(
        "values,k,expected",
        [
            ([0.5, 0.2, 0.9], 1, 0.9),
            ([0.5, 0.2, 0.9], 2, 0.5),
            ([0.3, 0.3, 0.1], 2, 0.3),
        ],
    )
    def test_kth_largest(self, values, k, expected):
        scores = TokenScores(values=values, token_labels=["t"] * len(values))
        assert kth_largest(scores, k) == pytest.approx(expected)

    def test_k_out_of_range(self):
        scores = TokenScores(values=(0.5,), token_labels=("x",))
        with pytest.raises(KOutOfRange):
            kth_largest(scores, 2)
        with pytest.raises(KOutOfRange):
            kth_largest(scores, 0)

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=20))
    def test_monotone_in_k(self, values):
        ordered = [kth_largest_of(values, k) for k in range(1, len(values) + 1)]
        assert all(a >= b for a, b in zip(ordered, ordered[1:]))

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=20))
    def test_matches_sort_oracle(self, values):
        for k in range(1, len(values) + 1):
            assert kth_largest_of(values, k) == sorted(values)[len(values) - k]


class TestShouldTransition:
    def test_below_threshold(self):
        scores = TokenScores(values=(0.02,), token_labels=("x",))
        assert should_transition(scores, 1, 0.025) is True

    def test_boundary_is_strict(self):
        scores = TokenScores(values=(0.025,), token_labels=("x",))
        assert should_transition(scores, 1, 0.025) is False

    def test_well_above(self):
        scores = TokenScores(values=(0.9,), token_labels=("x",))
        assert should_transition(scores, 1, 0.025) is False


class TestAggregationAblations:
    def test_mean_matches_oracle(self):
        values = (0.1, 0.4, 0.7)
        scores = TokenScores(values=values, token_labels=("a", "b", "c"))
        assert mean_score(scores) == pytest.approx(float(np.mean(values)))

    def test_cumulative_matches_oracle(self):
        values = (0.1, 0.4, 0.7)
        scores = TokenScores(values=values, token_labels=("a", "b", "c"))
        assert cumulative_score(scores) == pytest.approx(float(np.sum(values)))

    def test_statistic_dispatch(self):
        scores = TokenScores(values=(0.1, 0.4), token_labels=("a", "b"))
        assert transition_statistic(scores, 1, "individual") == 0.4
        assert transition_statistic(scores, 1, "mean") == pytest.approx(0.25)
        assert transition_statistic(scores, 1, "cumulative") == pytest.approx(0.5)
        with pytest.raises(RangeViolation):
            transition_statistic(scores, 1, "median")


class TestTensorFiles:
    def test_inline_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        t = random_tensor(rng, (2, 2, 2, 3))
        path = tmp_path / "small.json"
        save_tensor(path, t)
        back = load_tensor(path)
        assert back.axes == t.axes
        assert np.array_equal(back.data, t.data)
        assert not (tmp_path / "small.json.bin").exists()

    def test_binary_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        t = random_tensor(rng, (4, 8, 8, 12))
        path = tmp_path / "big.json"
        save_tensor(path, t)
        assert (tmp_path / "big.json.bin").exists()
        back = load_tensor(path)
        assert back.data.tobytes() == t.data.tobytes()

    def test_vector_round_trip(self, tmp_path):
        v = np.array([0.5, -1.25, 3.0], dtype=np.float32)
        path = tmp_path / "vec.json"
        save_vector(path, v)
        assert load_vector(path).tobytes() == v.tobytes()

    def test_size_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            '{"dtype":"f32le","axes":["dim"],"dims":[3],"data":[1.0,2.0]}'
        )
        with pytest.raises(FormatError):
            load_vector(path)

    def test_unknown_dtype_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            '{"dtype":"f64le","axes":["dim"],"dims":[1],"data":[1.0]}'
        )
        with pytest.raises(FormatError):
            load_vector(path)
