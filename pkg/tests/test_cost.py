import itertools

import numpy as np
import pytest

from cacheplan import (
    ConfigError,
    CostTensor,
    CostVariant,
    FormatError,
    build_pact,
    generate_synthetic,
    read_cost_tensor,
    segment_cost,
    write_cost_tensor,
)
from oracles import segment_cost_oracle

ALL_VARIANTS = [
    CostVariant(dim, agg, bound)
    for dim in ("3d", "2d")
    for agg in ("cum", "term")
    for bound in ("paper", "skipped")
]


class TestVariant:
    def test_rejects_unknown_modes(self):
        with pytest.raises(ConfigError):
            CostVariant(dim_mode="4d")
        with pytest.raises(ConfigError):
            CostVariant(aggregate_mode="max")
        with pytest.raises(ConfigError):
            CostVariant(bound_mode="loose")

    def test_dict_round_trip(self):
        v = CostVariant("2d", "term", "skipped")
        assert CostVariant.from_dict(v.to_dict()) == v


class TestSegmentCost:
    def test_linear_is_free_at_order_one(self, linear_traj):
        assert segment_cost(linear_traj, 10, 7, 5, order=1) == 0.0

    def test_quadratic_hand_values(self, quadratic_traj):
        cum = segment_cost(quadratic_traj, 10, 7, 5, order=1, variant=CostVariant())
        assert cum == pytest.approx(14.0, abs=1e-12)
        term = segment_cost(
            quadratic_traj, 10, 7, 5, order=1, variant=CostVariant(aggregate_mode="term")
        )
        assert term == pytest.approx(10.0, abs=1e-12)

    def test_no_predecessor_is_hold(self, quadratic_traj):
        # zeroth-order hold from h_7 = 49: |36-49| + |25-49|
        got = segment_cost(quadratic_traj, None, 7, 5, order=1)
        assert got == pytest.approx(13.0 + 24.0, abs=1e-12)
        assert got == segment_cost(quadratic_traj, 11, 7, 5, order=1)

    def test_order_zero_is_hold_even_with_predecessor(self, quadratic_traj):
        assert segment_cost(quadratic_traj, 10, 7, 5, order=0) == pytest.approx(
            37.0, abs=1e-12
        )

    def test_skipped_bounds_drop_target_term(self, quadratic_traj):
        v = CostVariant(bound_mode="skipped")
        assert segment_cost(quadratic_traj, 10, 7, 5, order=1, variant=v) == pytest.approx(
            4.0, abs=1e-12
        )
        # adjacent keys skip nothing
        assert segment_cost(quadratic_traj, 10, 7, 6, order=1, variant=v) == 0.0

    def test_index_validation(self, quadratic_traj):
        with pytest.raises(ConfigError):
            segment_cost(quadratic_traj, 5, 7, 3)  # i <= j
        with pytest.raises(ConfigError):
            segment_cost(quadratic_traj, 10, 7, 7)  # k >= j
        with pytest.raises(ConfigError):
            segment_cost(quadratic_traj, 12, 7, 5)  # i beyond no-predecessor
        with pytest.raises(ConfigError):
            segment_cost(quadratic_traj, 10, 11, 5)  # j beyond T

    @pytest.mark.parametrize("variant", ALL_VARIANTS, ids=str)
    def test_matches_literal_oracle(self, variant):
        rng = np.random.default_rng(17)
        traj = generate_synthetic("two-regime", 12, 3, {"noise": 0.05}, seed=5)
        for _ in range(60):
            j = int(rng.integers(1, 13))
            k = int(rng.integers(0, j))
            i = int(rng.integers(j + 1, 14))
            if rng.uniform() < 0.2:
                i = None
            order = int(rng.integers(0, 3))
            got = segment_cost(traj, i, j, k, order=order, variant=variant)
            want = segment_cost_oracle(
                traj, i, j, k, order, variant.dim_mode, variant.aggregate_mode, variant.bound_mode
            )
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


class TestBuildPact:
    @pytest.mark.parametrize("variant", ALL_VARIANTS, ids=str)
    def test_entries_match_segment_cost(self, variant):
        traj = generate_synthetic("two-regime", 8, 2, {"noise": 0.02}, seed=1)
        tensor = build_pact([traj], order=1, variant=variant)
        for i in range(2, 10):
            for j in range(1, i):
                for k in range(j):
                    assert tensor.value(i, j, k) == pytest.approx(
                        segment_cost(traj, i, j, k, order=1, variant=variant),
                        rel=1e-12,
                        abs=1e-12,
                    )

    def test_quadratic_t6_hand_entry(self):
        # h_t = t^2, keys (6, 4): errors at tau=3 and tau=2 are 3 and 8
        traj = generate_synthetic(
            "polynomial", 6, 1, {"degree": 2, "coefficients": [0.0, 0.0, 1.0]}
        )
        tensor = build_pact([traj], order=1)
        assert tensor.value(6, 4, 2) == pytest.approx(11.0, abs=1e-12)

    def test_linear_interior_is_zero(self, linear_traj):
        tensor = build_pact([linear_traj], order=1)
        T = linear_traj.total_steps
        for j in range(1, T + 1):
            for i in range(j + 1, T + 1):  # real predecessors only
                assert np.all(tensor.values[i, j, :j] <= 1e-6)

    def test_identical_trajectories_average_exactly(self):
        traj = generate_synthetic("exp-decay", 10, 3, seed=2)
        one = build_pact([traj], order=2)
        five = build_pact([traj] * 5, order=2)
        assert np.array_equal(one.values, five.values)
        assert five.sample_count == 5

    def test_aggregation_linearity(self):
        a = generate_synthetic("exp-decay", 9, 2, seed=1)
        b = generate_synthetic("exp-decay", 9, 2, seed=2)
        both = build_pact([a, b], order=1)
        mean = (build_pact([a], order=1).values + build_pact([b], order=1).values) / 2.0
        assert np.allclose(both.values, mean, rtol=1e-12, atol=1e-12)

    def test_pair2d_entries_ignore_predecessor(self):
        traj = generate_synthetic("two-regime", 7, 2, seed=3)
        tensor = build_pact([traj], order=1, variant=CostVariant(dim_mode="2d"))
        for j in range(1, 8):
            for k in range(j):
                column = tensor.values[j + 1 : 9, j, k]
                assert np.all(column == column[0])

    def test_superadditivity_of_cumulative(self):
        traj = generate_synthetic("two-regime", 9, 2, {"noise": 0.05}, seed=8)
        for bound in ("paper", "skipped"):
            tensor = build_pact([traj], order=1, variant=CostVariant(bound_mode=bound))
            for i in range(2, 11):
                for j in range(1, i):
                    row = tensor.values[i, j, :j]
                    assert np.all(np.diff(row) <= 1e-12)  # cost shrinks as k grows

    def test_shape_mismatch_rejected(self):
        a = generate_synthetic("exp-decay", 9, 2, seed=1)
        b = generate_synthetic("exp-decay", 10, 2, seed=1)
        c = generate_synthetic("exp-decay", 9, 3, seed=1)
        with pytest.raises(ConfigError):
            build_pact([a, b])
        with pytest.raises(ConfigError):
            build_pact([a, c])

    def test_empty_calibration_rejected(self):
        with pytest.raises(ConfigError, match="empty"):
            build_pact([])

    def test_large_t_rejected(self):
        traj = generate_synthetic("polynomial", 129, 1, {"degree": 0, "coefficients": [0.0]})
        with pytest.raises(ConfigError, match="128"):
            build_pact([traj])


class TestTensorType:
    def test_addressing_errors(self):
        traj = generate_synthetic("exp-decay", 6, 1, seed=0)
        tensor = build_pact([traj], order=1)
        assert tensor.value(None, 4, 2) == tensor.value(7, 4, 2)
        with pytest.raises(ConfigError):
            tensor.value(3, 4, 2)
        with pytest.raises(ConfigError):
            tensor.value(8, 4, 2)
        with pytest.raises(ConfigError):
            tensor.value(5, 4, 4)
        with pytest.raises(ConfigError):
            tensor.value(5, 4, -1)

    def test_values_finite_and_nonnegative(self):
        traj = generate_synthetic("two-regime", 10, 2, {"noise": 0.1}, seed=6)
        for variant in ALL_VARIANTS:
            tensor = build_pact([traj], order=1, variant=variant)
            assert np.all(np.isfinite(tensor.values))
            assert np.all(tensor.values >= 0.0)


class TestTensorSerialization:
    def test_round_trip(self):
        traj = generate_synthetic("two-regime", 8, 2, seed=4)
        for variant in ALL_VARIANTS:
            tensor = build_pact([traj, traj], order=2, variant=variant)
            back = read_cost_tensor(write_cost_tensor(tensor))
            assert back.total_steps == tensor.total_steps
            assert back.variant == tensor.variant
            assert back.sample_count == 2
            assert np.array_equal(back.values, tensor.values)

    def test_header_and_magic(self):
        traj = generate_synthetic("exp-decay", 5, 1, seed=0)
        data = write_cost_tensor(build_pact([traj], order=1))
        assert data[:4] == b"DPCT"
        with pytest.raises(FormatError, match="magic"):
            read_cost_tensor(b"XXXX" + data[4:])
        with pytest.raises(FormatError, match="version"):
            read_cost_tensor(data[:4] + b"\x09\x00\x00\x00" + data[8:])

    def test_truncation_detected(self):
        traj = generate_synthetic("exp-decay", 5, 1, seed=0)
        data = write_cost_tensor(build_pact([traj], order=1))
        with pytest.raises(FormatError, match="payload"):
            read_cost_tensor(data[:-8])

    def test_payload_is_lexicographic_over_valid_triples(self):
        traj = generate_synthetic("exp-decay", 4, 1, seed=0)
        tensor = build_pact([traj], order=1)
        data = write_cost_tensor(tensor)
        flat = np.frombuffer(data[28:], dtype="<f8")
        triples = [
            (i, j, k)
            for i, j, k in itertools.product(range(6), repeat=3)
            if i > j > k and j <= 4
        ]
        assert len(flat) == len(triples)
        for value, (i, j, k) in zip(flat, triples):
            assert value == tensor.values[i, j, k]
