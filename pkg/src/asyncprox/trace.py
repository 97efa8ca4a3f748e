"""Per-iteration run records with JSONL and CSV export.

Each record carries the iteration index, the synchronous residual in
the uniform norm, and (when a reference solution is known) the error to
the reference plus the trailing-window quantity z_p used to certify
monotone progress of delayed iterations.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["Trace", "TraceRecord", "TRACE_FIELDS"]

TRACE_FIELDS = ("p", "residual_inf", "z_p", "err_inf", "wall_ns")


@dataclass(frozen=True)
class TraceRecord:
    p: int
    residual_inf: float
    z_p: float | None = None
    err_inf: float | None = None
    wall_ns: int = 0

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "residual_inf": self.residual_inf,
            "z_p": self.z_p,
            "err_inf": self.err_inf,
            "wall_ns": self.wall_ns,
        }


class Trace:
    """Ordered list of sampled iteration records."""

    def __init__(self, records=None):
        self.records: list[TraceRecord] = list(records) if records else []

    def append(self, record: TraceRecord):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def iterations(self) -> np.ndarray:
        return np.array([r.p for r in self.records], dtype=np.int64)

    def residuals(self) -> np.ndarray:
        return np.array([r.residual_inf for r in self.records])

    def z_values(self) -> np.ndarray | None:
        """z_p column as an array, or None if any record lacks it."""
        if not self.records or any(r.z_p is None for r in self.records):
            return None
        return np.array([r.z_p for r in self.records])

    def errors(self) -> np.ndarray | None:
        if not self.records or any(r.err_inf is None for r in self.records):
            return None
        return np.array([r.err_inf for r in self.records])

    def to_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_json_dict()) + "\n")

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_FIELDS)
            for r in self.records:
                writer.writerow([
                    r.p,
                    repr(r.residual_inf),
                    "" if r.z_p is None else repr(r.z_p),
                    "" if r.err_inf is None else repr(r.err_inf),
                    r.wall_ns,
                ])

    def write(self, path, fmt: str):
        if fmt == "jsonl":
            self.to_jsonl(path)
        elif fmt == "csv":
            self.to_csv(path)
        else:
            raise ValueError(f"unknown trace format {fmt!r}; expected 'csv' or 'jsonl'")

    @classmethod
    def from_jsonl(cls, path) -> "Trace":
        records = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            records.append(TraceRecord(
                p=int(d["p"]),
                residual_inf=float(d["residual_inf"]),
                z_p=None if d.get("z_p") is None else float(d["z_p"]),
                err_inf=None if d.get("err_inf") is None else float(d["err_inf"]),
                wall_ns=int(d.get("wall_ns", 0)),
            ))
        return cls(records)

    @classmethod
    def from_csv(cls, path) -> "Trace":
        records = []
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                records.append(TraceRecord(
                    p=int(row["p"]),
                    residual_inf=float(row["residual_inf"]),
                    z_p=float(row["z_p"]) if row["z_p"] else None,
                    err_inf=float(row["err_inf"]) if row["err_inf"] else None,
                    wall_ns=int(row["wall_ns"]) if row["wall_ns"] else 0,
                ))
        return cls(records)
