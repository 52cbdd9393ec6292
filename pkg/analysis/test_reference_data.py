"""Tests for the published reference values."""

import pytest
from reference_data import (
    SOURCE_TAG,
    reference_row,
    reference_table,
    spec_size,
    table_specs,
)
from states import parse_state_spec


def test_reference_table_shape():
    """Twenty-four rows, all tagged with their source."""
    df = reference_table()
    assert len(df) == 24
    assert (df["source"] == SOURCE_TAG).all()


def test_reference_specs_parse():
    """Every tabulated spec is a valid state spec."""
    for spec in reference_table().index:
        parse_state_spec(spec)


def test_reference_bounds_are_ordered():
    """P_NL never exceeds P_E in the published rows."""
    df = reference_table()
    assert (df["P_NL"] <= df["P_E"]).all()


@pytest.mark.parametrize("spec,label,w", [
    ("W:3", "W3", 0.644),
    ("ring:6", "R6", 0.707),
    ("grid:2x3:periodic", "Cl^p_2x3", 0.667),
])
def test_reference_row(spec, label, w):
    """Lookup is case-insensitive."""
    row = reference_row(spec)
    assert row["label"] == label
    assert row["w"] == w


def test_reference_row_missing():
    """Untabulated states give None."""
    assert reference_row("ghz:3") is None


@pytest.mark.parametrize("spec,size", [("w:5", 5), ("grid:2x3", 6), ("dicke:7:3", 7)])
def test_spec_size(spec, size):
    """Sizes from the spec text."""
    assert spec_size(spec) == size


def test_table_specs():
    """Family and size filters keep the table order."""
    assert table_specs(["w", "ring"], [5, 6]) == ["w:5", "ring:5", "w:6", "ring:6"]
    assert table_specs(["grid"], [6]) == ["grid:2x3:periodic", "grid:2x3"]
    assert table_specs(["w"], []) == []
