"""Result tables and their CSV/JSON rendering."""

import io
import json
import sys
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from myller_geometry.errors import GeometryError, OutputError

logger = structlog.get_logger()

Format = Literal["csv", "json"]


def plain(value: Any) -> Any:
    """Recursively convert numpy scalars and arrays into JSON-ready values; NaN becomes null."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


class ResultTable(BaseModel):
    """Rectangular table of finite reals with the metadata of the run."""

    model_config = ConfigDict(frozen=True)

    columns: list[str]
    rows: list[list[float]]
    meta: dict[str, Any] = Field(default_factory=dict)
    summary: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def rectangular(self) -> "ResultTable":
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} values, expected {width}")
        return self

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        meta: dict[str, Any] | None = None,
        summary: dict[str, Any] | None = None,
    ) -> "ResultTable":
        values = frame.to_numpy(dtype=float)
        finite = np.isfinite(values)
        if not finite.all():
            row, col = (int(k[0]) for k in np.nonzero(~finite))
            raise GeometryError("Result contains a non-finite value", node=row, column=str(frame.columns[col]))
        return cls(
            columns=[str(c) for c in frame.columns],
            rows=values.tolist(),
            meta=plain(meta or {}),
            summary=plain(summary or {}),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns, dtype=float)


def render(table: ResultTable, fmt: Format) -> str:
    if fmt == "csv":
        buffer = io.StringIO()
        table.to_frame().to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
        return buffer.getvalue()
    document = {**table.summary, "columns": table.columns, "rows": table.rows, "meta": table.meta}
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit(table: ResultTable, fmt: Format = "csv", path: str | Path | None = None) -> None:
    """Write the table to `path`, or to standard output when no path is given."""
    text = render(table, fmt)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    except OSError as e:
        raise OutputError("Cannot write results", path=str(path), reason=str(e)) from e
    logger.info("Results written", path=str(path), format=fmt, rows=len(table.rows))
