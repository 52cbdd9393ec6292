"""This is the script for tests for table and headline generation"""
import json
import math
from unittest.mock import patch
import pandas as pd
import pytest
from report_generator import (
    HEADLINE_COLUMNS,
    TABLE_COLUMNS,
    compare_with_reference,
    heralded_tripartite_value,
    headline_report,
    psi_chsh_value,
    psi4_chsh,
    table_row,
    table_rows,
    write_frame,
)
from persistency import (
    EntanglementPersistency,
    NonlocalityPersistency,
    PersistencyReport,
    StrengthResult,
)
from utilities import Budget


@pytest.fixture
def budget():
    return Budget(restarts=4, sweeps=100, fit_samples=500, tol=1e-3)


@pytest.fixture
def computed_table():
    return pd.DataFrame([
        {"state": "w:3", "P_E_lo": 2, "P_E_hi": 2, "P_NL_lb": 1, "w": 0.650, "w_status": "ok"},
        {"state": "ring:6", "P_E_lo": 2, "P_E_hi": 3, "P_NL_lb": 3, "w": 0.707, "w_status": "ok"},
        {"state": "ghz:3", "P_E_lo": 1, "P_E_hi": 1, "P_NL_lb": 1, "w": 0.5, "w_status": "ok"},
    ], columns=TABLE_COLUMNS)


def test_table_rows_empty(budget):
    """
    Tests that no states give a header-only frame.
    """
    df = table_rows([], budget, seed=0)
    assert list(df.columns) == TABLE_COLUMNS
    assert df.empty


@patch("report_generator.table_row")
def test_table_rows_keeps_order(mock_table_row, budget):
    """
    Tests that rows come back in the order of the specs.
    """
    mock_table_row.side_effect = lambda spec, *args, **kwargs: {
        "state": spec, "P_E_lo": 1, "P_E_hi": 1, "P_NL_lb": 1, "w": 0.5, "w_status": "ok"}

    df = table_rows(["w:4", "w:3"], budget, seed=3)

    assert list(df["state"]) == ["w:4", "w:3"]
    assert mock_table_row.call_count == 2


@patch("report_generator.table_row")
def test_table_rows_logs_validation_error(mock_table_row, budget, caplog):
    """
    Tests that a validation error is logged and re-raised.
    """
    mock_table_row.side_effect = ValueError("bad spec")

    with pytest.raises(ValueError):
        table_rows(["w:x"], budget, seed=0)
    assert "Validation error for w:x" in caplog.text


def test_compare_with_reference(computed_table):
    """
    Tests that published values and deltas are appended.
    """
    merged = compare_with_reference(computed_table)

    w3 = merged.set_index("state").loc["w:3"]
    assert w3["paper_P_E"] == 2
    assert w3["delta_P_E_lo"] == 0
    assert w3["delta_P_NL"] == 0
    assert math.isclose(w3["delta_w"], 0.006)
    r6 = merged.set_index("state").loc["ring:6"]
    assert r6["delta_P_E_lo"] == -1
    assert r6["delta_P_E_hi"] == 0


def test_compare_with_reference_untabulated(computed_table):
    """
    Tests that states without a published row get empty reference cells.
    """
    merged = compare_with_reference(computed_table)
    ghz = merged.set_index("state").loc["ghz:3"]
    assert pd.isna(ghz["paper_P_E"])


def test_compare_with_reference_leaves_input(computed_table):
    """
    Tests that the computed frame is not modified.
    """
    before = computed_table.copy()
    compare_with_reference(computed_table)
    pd.testing.assert_frame_equal(computed_table, before)


def test_write_frame_csv(computed_table, tmp_path):
    """
    Tests that CSV is returned and written.
    """
    path = tmp_path / "table.csv"

    text = write_frame(computed_table, str(path))

    assert text.splitlines()[0] == ",".join(TABLE_COLUMNS)
    assert path.read_text(encoding="utf-8") == text


def test_write_frame_json(computed_table):
    """
    Tests JSON records output.
    """
    records = json.loads(write_frame(computed_table, fmt="json"))
    assert records[0]["state"] == "w:3"
    assert len(records) == 3


def test_write_frame_unknown_format(computed_table):
    """
    Tests that an unknown format is refused.
    """
    with pytest.raises(ValueError):
        write_frame(computed_table, fmt="xml")


def test_write_frame_unwritable_path(computed_table, tmp_path, caplog):
    """
    Tests that a failed write is logged and re-raised.
    """
    with pytest.raises(IOError):
        write_frame(computed_table, str(tmp_path / "missing" / "table.csv"))
    assert "File handling error" in caplog.text


def test_heralded_tripartite_value():
    """
    Tests the heralded value 4 sqrt 2 on the residue of the four-site chain.
    """
    assert abs(heralded_tripartite_value() - 4 * math.sqrt(2)) <= 1e-4


def test_psi_chsh_value():
    """
    Tests the explicit-settings CHSH value at theta = 0.6278.
    """
    assert abs(psi_chsh_value() - 2.2247) <= 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("removed,expected", [((0, 1), 2.3226), ((0, 2), 2.3216)])
def test_psi4_chsh(removed, expected):
    """
    Tests the CHSH values of the two-site residues of the four-site state.
    """
    assert abs(psi4_chsh(removed, restarts=16, seed=1) - expected) <= 2e-3


@patch("report_generator.heralded_tripartite_value")
def test_headline_report_wraps_errors(mock_value, caplog):
    """
    Tests that a failing target is logged and raised as RuntimeError.
    """
    mock_value.side_effect = ArithmeticError("boom")

    with pytest.raises(RuntimeError):
        headline_report()
    assert "Unexpected error computing" in caplog.text


@pytest.mark.slow
def test_headline_report_all_pass():
    """
    Tests that every headline target is reproduced within tolerance.
    """
    df = headline_report(seed=0, restarts=16)
    assert list(df.columns) == HEADLINE_COLUMNS
    assert df["passed"].all()


@patch("report_generator.analyze")
def test_table_row_unresolved_strength(mock_analyze, budget):
    """
    Tests that an unresolved strength is shown as such instead of a number.
    """
    mock_analyze.return_value = PersistencyReport(
        spec="w:3", n=3, pe=EntanglementPersistency(lo=2, hi=2),
        pnl=NonlocalityPersistency(lb=1),
        strength=StrengthResult(w=None, bracket=None, k_remove=0, unresolved=[()]))

    row = table_row("w:3", budget, seed=0)

    assert row["w"] is None
    assert row["w_status"] == "unresolved"
    assert list(row) == TABLE_COLUMNS


def test_compare_with_reference_unresolved_strength(computed_table):
    """
    Tests that an unresolved strength gets no delta while the other deltas stay.
    """
    table = computed_table.copy()
    table.loc[0, "w"] = None
    table.loc[0, "w_status"] = "unresolved"

    w3 = compare_with_reference(table).set_index("state").loc["w:3"]

    assert pd.isna(w3["delta_w"])
    assert w3["delta_P_NL"] == 0
    assert w3["w_status"] == "unresolved"
