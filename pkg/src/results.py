"""
Result tables and CSV output
Every table has a fixed column order; floats use one fixed format with a
'.' decimal point so repeated runs are byte-identical
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

from src.config import CSV_FLOAT_FORMAT

logger = logging.getLogger(__name__)

TABLE_COLUMNS: Dict[str, Sequence[str]] = {
    "rates": ("length_m", "method", "seed", "user", "rate_mbps", "rate_mbps_df"),
    "tones": ("length_m", "method", "seed", "tone", "frequency_mhz", "user", "bits"),
    "dominance": ("seed", "tone", "frequency_mhz", "beta_r", "beta_c", "beta"),
    "alpha": ("alpha", "snr_db", "users", "method", "bits"),
    "learning": ("mode", "seed", "iteration", "mse_db", "elapsed_ms"),
}


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return CSV_FLOAT_FORMAT % value
    # numpy scalars
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


@dataclass
class ResultTable:
    """Rows of one output file, kept in insertion order"""

    name: str
    rows: List[tuple] = field(default_factory=list)

    def __post_init__(self):
        if self.name not in TABLE_COLUMNS:
            raise ValueError(f"unknown table '{self.name}'")

    @property
    def columns(self) -> Sequence[str]:
        return TABLE_COLUMNS[self.name]

    @property
    def filename(self) -> str:
        return f"{self.name}.csv"

    def extend(self, rows: Sequence[tuple]):
        self.rows.extend(rows)

    def __len__(self) -> int:
        return len(self.rows)

    def write(self, out_dir: Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / self.filename
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([format_value(v) for v in row])
        logger.info("Wrote %d rows to %s", len(self.rows), path)
        return path


def write_tables(tables: Dict[str, ResultTable], out_dir: Path) -> List[Path]:
    """Write every non-empty table; returns the written paths in table order"""
    return [table.write(out_dir) for name, table in tables.items() if len(table)]
