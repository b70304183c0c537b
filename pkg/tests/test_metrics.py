import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hullreplay.metrics import (
    Direction,
    MissingEntry,
    PerformanceMatrix,
    aip,
    average_at,
    forgetting,
    summarize,
)


def _m(rows, direction="positive"):
    return PerformanceMatrix.from_rows("m", direction, rows)


@st.composite
def triangles(draw, min_size=2, max_size=6):
    T = draw(st.integers(min_size, max_size))
    vals = st.floats(-100, 100, allow_nan=False)
    return [[draw(vals) for _ in range(i)] for i in range(1, T + 1)]


class TestAverageAndAip:
    def test_first_row(self):
        assert average_at(_m([[3.5]]), 1) == 3.5

    def test_row_mean(self):
        assert average_at(_m([[0], [0, 0], [2, 4, 6]]), 3) == 4

    def test_constant(self):
        m = _m([[7.0] * i for i in range(1, 6)])
        assert [average_at(m, t) for t in range(1, 6)] == [7.0] * 5
        assert aip(m) == 7.0

    def test_single_timestamp(self):
        assert aip(_m([[0.25]])) == 0.25

    def test_two_by_two(self):
        assert aip(_m([[1], [2, 4]])) == 2

    def test_three_by_three_identities(self):
        m = _m([[5], [4, 6], [3, 5, 7]])
        s = summarize(m)
        assert s.average_at == [5, 5, 5]
        assert s.aip == 5
        assert s.per_timestamp_forgetting == [2, 1]
        assert s.forgetting == 1.5


class TestForgetting:
    def test_positive_direction(self):
        m = _m([[0.9], [0.7, 0.0], [0.6, 0.0, 0.0]])
        assert forgetting(m)[0][0] == pytest.approx(0.3)

    def test_negative_direction(self):
        m = _m([[0.10], [0.25, 0.0]], "negative")
        assert forgetting(m)[0] == [pytest.approx(0.15)]

    def test_negative_uses_best_past(self):
        m = _m([[0.10], [0.15, 0.2], [0.25, 0.3, 0.1]], "negative")
        per, F = forgetting(m)
        assert per == [pytest.approx(0.15), pytest.approx(0.1)]

    def test_constant_column(self):
        m = _m([[1.0], [1.0, 2.0], [1.0, 2.0, 3.0]])
        per, F = forgetting(m)
        assert per == [0.0, 0.0] and F == 0.0

    def test_improvement_is_negative_not_clamped(self):
        per, _ = forgetting(_m([[0.5], [0.9, 1.0]]))
        assert per == [pytest.approx(-0.4)]

    def test_needs_two_rows(self):
        with pytest.raises(MissingEntry):
            forgetting(_m([[1.0]]))
        assert summarize(_m([[1.0]])).forgetting is None

    def test_missing_entry(self):
        m = PerformanceMatrix("m", Direction.POSITIVE)
        m.set(2, 1, 1.0)
        with pytest.raises(MissingEntry):
            aip(m)

    def test_upper_triangle_rejected(self):
        with pytest.raises(ValueError):
            PerformanceMatrix("m", "positive").set(1, 2, 0.0)


class TestEquivariance:
    @settings(max_examples=100, deadline=None)
    @given(triangles(), st.floats(0.1, 10), st.floats(-50, 50))
    def test_affine(self, rows, a, b):
        base = _m(rows)
        moved = _m([[a * v + b for v in r] for r in rows])
        assert aip(moved) == pytest.approx(a * aip(base) + b, rel=1e-9, abs=1e-7)
        assert forgetting(moved)[1] == pytest.approx(a * forgetting(base)[1], rel=1e-9, abs=1e-7)

    @settings(max_examples=100, deadline=None)
    @given(triangles())
    def test_direction_flip(self, rows):
        pos = _m(rows, "positive")
        neg = _m([[-v for v in r] for r in rows], "negative")
        assert forgetting(neg)[1] == pytest.approx(forgetting(pos)[1], abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(triangles())
    def test_aip_is_mean_of_averages(self, rows):
        s = summarize(_m(rows))
        assert s.aip == pytest.approx(np.mean(s.average_at), abs=1e-9)
        assert s.forgetting == pytest.approx(np.mean(s.per_timestamp_forgetting), abs=1e-9)
