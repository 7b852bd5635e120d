"""Tests for src.storage — LocalCSVStorage headers, exact floats, FAILED markers."""

from pathlib import Path

import pytest

from src.storage import FAILED, VERSION, LocalCSVStorage, format_cell


@pytest.fixture
def storage(tmp_path: Path) -> LocalCSVStorage:
    return LocalCSVStorage(tmp_path / "results")


class TestFormatCell:
    def test_floats_round_trip_exactly(self):
        assert format_cell(0.1) == "0.10000000000000001"
        assert float(format_cell(1 / 3)) == 1 / 3

    def test_missing_values_are_empty(self):
        assert format_cell(None) == ""
        assert format_cell(float("nan")) == ""

    def test_bool_and_str(self):
        assert format_cell(True) == "true"
        assert format_cell(False) == "false"
        assert format_cell("C") == "C"
        assert format_cell(7) == "7"


class TestLocalCSVStorage:
    def test_save_and_load(self, storage: LocalCSVStorage):
        path = storage.save("otoc_C", ["t", "otoc"], [(0.0, 0.0), (0.5, 0.25)])
        assert Path(path).exists()

        header, columns, rows = storage.load("otoc_C")
        assert header == [f"rabichaos {VERSION}"]
        assert columns == ["t", "otoc"]
        assert rows == [["0", "0"], ["0.5", "0.25"]]

    def test_provenance_and_status_header(self, storage: LocalCSVStorage):
        storage.save(
            "echo_C",
            ["t", "L"],
            [(0.0, 1.0)],
            provenance=["diagnostic = echo", "delta = 0.1"],
            status={"mean_L": 0.5},
        )
        header, _, _ = storage.load("echo_C")
        assert header[1:] == ["diagnostic = echo", "delta = 0.1", "mean_L = 0.5"]

    def test_header_precedes_columns(self, storage: LocalCSVStorage):
        path = storage.save("x", ["a"], [(1,)], provenance=["omega = 1.0"])
        lines = Path(path).read_text().splitlines()
        assert lines[0].startswith("# rabichaos ")
        assert lines[1] == "# omega = 1.0"
        assert lines[2] == "a"

    def test_missing_values_written_empty(self, storage: LocalCSVStorage):
        storage.save("map", ["q1", "p1", "S"], [(1.5, 1.5, None)])
        _, _, rows = storage.load("map")
        assert rows == [["1.5", "1.5", ""]]

    def test_failed_marker(self, storage: LocalCSVStorage):
        storage.save_failed("otoc_X", ["t", "otoc"], "CutoffError: tail too large")
        header, columns, rows = storage.load("otoc_X")
        assert header[-1] == f"status = {FAILED}: CutoffError: tail too large"
        assert columns == ["t", "otoc"]
        assert rows == []

    def test_row_length_mismatch(self, storage: LocalCSVStorage):
        with pytest.raises(ValueError, match="fields"):
            storage.save("bad", ["a", "b"], [(1,)])

    def test_save_overwrites(self, storage: LocalCSVStorage):
        storage.save("x", ["v"], [(1,)])
        storage.save("x", ["v"], [(2,)])
        _, _, rows = storage.load("x")
        assert rows == [["2"]]

    def test_load_no_file_raises(self, storage: LocalCSVStorage):
        with pytest.raises(FileNotFoundError):
            storage.load("nothing")

    def test_save_creates_parent_directory(self, tmp_path: Path):
        s = LocalCSVStorage(tmp_path / "sub" / "dir")
        s.save("x", ["ok"], [(True,)])
        assert (tmp_path / "sub" / "dir" / "x.csv").exists()
