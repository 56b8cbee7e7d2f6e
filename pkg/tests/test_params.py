"""Tests for ParamVector and its layout."""

import numpy as np
import pytest

from wprox.exceptions import ConfigurationError, NumericError
from wprox.params import ParamSlice, ParamVector


@pytest.fixture
def vector():
    return ParamVector.from_shapes([("W", (2, 3)), ("b", (3,)), ("s", ())], np.arange(10.0))


class TestParamVector:
    def test_from_shapes_layout(self, vector):
        assert len(vector) == 10
        assert vector.names == ["W", "b", "s"]
        assert vector.slice_of("b") == ParamSlice("b", 6, 3, (3,))
        np.testing.assert_array_equal(vector.block("W"), np.arange(6.0).reshape(2, 3))
        assert vector.block("s").shape == (1,)

    def test_values_are_read_only_copies(self):
        raw = np.ones(3)
        v = ParamVector.flat(raw)
        raw[0] = 5.0
        assert v.values[0] == 1.0
        with pytest.raises(ValueError):
            v.values[0] = 2.0

    def test_empty_vector(self):
        v = ParamVector.from_shapes([])
        assert len(v) == 0
        assert v.names == []

    def test_gap_in_layout_rejected(self):
        with pytest.raises(ConfigurationError, match="starts at"):
            ParamVector(np.zeros(3), (ParamSlice("a", 0, 1), ParamSlice("b", 2, 1)))

    def test_uncovered_values_rejected(self):
        with pytest.raises(ConfigurationError, match="covers"):
            ParamVector(np.zeros(3), (ParamSlice("a", 0, 2),))

    def test_duplicate_names_rejected(self):
        with pytest.raises(ConfigurationError, match="Duplicate"):
            ParamVector(np.zeros(2), (ParamSlice("a", 0, 1), ParamSlice("a", 1, 1)))

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            ParamVector.flat([0.0, np.nan])

    def test_with_values_keeps_layout(self, vector):
        other = vector.with_values(np.zeros(10))
        assert other.layout == vector.layout
        assert other != vector
        with pytest.raises(ConfigurationError):
            vector.with_values(np.zeros(4))

    def test_equality_and_hash(self, vector):
        twin = ParamVector.from_shapes([("W", (2, 3)), ("b", (3,)), ("s", ())], np.arange(10.0))
        assert twin == vector
        assert hash(twin) == hash(vector)

    def test_unknown_slice(self, vector):
        with pytest.raises(KeyError):
            vector.block("missing")


class TestLayoutHeader:
    def test_header_parses_back(self, vector):
        header = vector.layout_header()
        assert header == "W:0:6:2x3 b:6:3:3 s:9:1:-"
        assert ParamVector.parse_layout_header(header) == vector.layout

    def test_malformed_header(self):
        with pytest.raises(ConfigurationError, match="Malformed"):
            ParamVector.parse_layout_header("W:0:six:2x3")
