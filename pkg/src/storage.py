import csv
import math
from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

try:
    VERSION = version("rabichaos")
except PackageNotFoundError:
    VERSION = "0+unknown"

FAILED = "FAILED"


def format_cell(value: Any) -> str:
    """Bit-exact text for one CSV field; None and NaN are empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if math.isnan(value) else "%.17g" % value
    return str(value)


class ResultStorage(ABC):
    """Abstract base class for writing diagnostic tables."""

    @abstractmethod
    def save(
        self,
        name: str,
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
        provenance: Sequence[str] = (),
        status: dict[str, Any] | None = None,
    ) -> str:
        """Write one table. Returns the path or reference to the saved data."""
        pass

    def save_failed(
        self,
        name: str,
        columns: Sequence[str],
        reason: str,
        provenance: Sequence[str] = (),
    ) -> str:
        """Write a table that carries a FAILED marker and no data rows."""
        return self.save(
            name, columns, [], provenance, {"status": f"{FAILED}: {reason}"}
        )


class LocalCSVStorage(ResultStorage):
    """
    CSV files under one output directory, each with a ``#`` provenance header.
    """

    def __init__(self, out_dir: str | Path = "results"):
        self.out_dir = Path(out_dir)

    def path(self, name: str) -> Path:
        return self.out_dir / f"{name}.csv"

    def save(
        self,
        name: str,
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
        provenance: Sequence[str] = (),
        status: dict[str, Any] | None = None,
    ) -> str:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# rabichaos {VERSION}\n")
            for line in provenance:
                f.write(f"# {line}\n")
            for key, value in (status or {}).items():
                f.write(f"# {key} = {format_cell(value)}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                if len(row) != len(columns):
                    raise ValueError(
                        f"{name}: row has {len(row)} fields, expected {len(columns)}"
                    )
                writer.writerow([format_cell(v) for v in row])
        return str(path)

    def load(self, name: str) -> tuple[list[str], list[str], list[list[str]]]:
        """Header lines (without ``# ``), column names and raw rows."""
        path = self.path(name)
        if not path.exists():
            raise FileNotFoundError(f"Result file not found: {path}")
        with open(path, "r", encoding="utf-8", newline="") as f:
            lines = f.read().splitlines()
        header = [line[2:] for line in lines if line.startswith("# ")]
        body = list(csv.reader(line for line in lines if not line.startswith("#")))
        return header, body[0], body[1:]
