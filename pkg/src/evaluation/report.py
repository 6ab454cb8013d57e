from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import astuple, dataclass, field
from pathlib import Path

import numpy as np

from src.config.manager import write_json_atomic
from src.errors import DatasetError

logger = logging.getLogger(__name__)

METRICS = ("stft", "rte", "drre", "sle")
ROW_FIELDS = ("split", "room_id", "context_id", "query_id", *METRICS)


@dataclass(frozen=True)
class MetricRow:
    split: str
    room_id: str
    context_id: str
    query_id: str
    stft: float
    rte: float
    drre: float
    sle: float


def _mean(values: list[float]) -> float:
    finite = [v for v in values if math.isfinite(v)]
    return float(np.mean(finite)) if finite else float("nan")


def aggregate(rows: list[MetricRow]) -> dict[str, dict[str, float]]:
    """Per-split mean of every metric over the rows where it is defined, plus counts."""
    out: dict[str, dict[str, float]] = {}
    for split in sorted({r.split for r in rows}):
        chunk = [r for r in rows if r.split == split]
        agg: dict[str, float] = {"count": len(chunk)}
        for metric in METRICS:
            values = [getattr(r, metric) for r in chunk]
            agg[metric] = _mean(values)
            agg[f"{metric}_defined"] = sum(1 for v in values if math.isfinite(v))
        out[split] = agg
    return out


def _json_float(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass
class EvalReport:
    rows: list[MetricRow] = field(default_factory=list)
    aggregates: dict[str, dict[str, float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: list[MetricRow], metadata: dict | None = None) -> EvalReport:
        return cls(list(rows), aggregate(rows), dict(metadata or {}))

    def verify(self, tolerance: float = 1e-9) -> None:
        """Aggregates must equal the row means they summarise."""
        recomputed = aggregate(self.rows)
        for split, agg in self.aggregates.items():
            for metric in METRICS:
                a, b = agg[metric], recomputed[split][metric]
                if math.isnan(a) and math.isnan(b):
                    continue
                if abs(a - b) > tolerance:
                    raise DatasetError(f"aggregate {split}.{metric} {a} differs from the row mean {b}")

    def mean(self, split: str, metric: str) -> float:
        return self.aggregates[split][metric]

    def csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(ROW_FIELDS)
        for row in self.rows:
            values = astuple(row)
            writer.writerow([*values[:4], *(repr(v) for v in values[4:])])
        return buffer.getvalue()

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "aggregates": {
                split: {k: _json_float(v) for k, v in agg.items()} for split, agg in self.aggregates.items()
            },
        }

    def save(self, directory: Path, stem: str = "report") -> tuple[Path, Path]:
        directory = Path(directory)
        csv_path = directory / f"{stem}.csv"
        json_path = directory / f"{stem}.json"
        try:
            directory.mkdir(parents=True, exist_ok=True)
            tmp = csv_path.with_suffix(".csv.tmp")
            tmp.write_text(self.csv_text(), encoding="utf-8")
            tmp.replace(csv_path)
            write_json_atomic(json_path, self.to_dict())
        except OSError as exc:
            raise DatasetError(f"cannot write report: {exc}", directory) from exc
        logger.info("Wrote %s and %s", csv_path, json_path)
        return csv_path, json_path
