"""Reception records: the only observable handed to the estimators."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

CSV_COLUMNS = ("rx_id", "tx_id", "m", "s_local_seconds")


@dataclass(frozen=True)
class ReceptionRecord:
    rx: str
    tx: str
    m: int
    s_local: float


def format_seconds(x: float) -> str:
    # 17 significant digits in exponent notation round-trips every double
    return format(float(x), ".16e")


class Dataset:
    """Column store of reception records with per-link lookup.

    Records are kept sorted by (rx, tx, m).  ``link(rx, tx)`` returns the
    packet indices and local timestamps of one link as numpy arrays.
    """

    def __init__(self, rx, tx, m, s):
        rx = np.asarray(rx, dtype=str)
        tx = np.asarray(tx, dtype=str)
        m = np.asarray(m, dtype=np.int64)
        s = np.asarray(s, dtype=float)
        if not (rx.shape == tx.shape == m.shape == s.shape) or rx.ndim != 1:
            raise ValueError("record columns must be 1-d arrays of equal length")
        order = np.lexsort((m, tx, rx))
        self.rx, self.tx, self.m, self.s = rx[order], tx[order], m[order], s[order]
        for col in (self.rx, self.tx, self.m, self.s):
            col.flags.writeable = False
        self._links = None
        if len(self) > 1:
            same = (self.rx[1:] == self.rx[:-1]) & (self.tx[1:] == self.tx[:-1]) & (self.m[1:] == self.m[:-1])
            if same.any():
                j = int(np.argmax(same))
                raise ValueError(f"duplicate record {(self.rx[j], self.tx[j], int(self.m[j]))}")
        if np.any(self.rx == self.tx):
            raise ValueError("a node cannot receive its own packet")

    @classmethod
    def empty(cls) -> "Dataset":
        return cls([], [], [], [])

    @classmethod
    def from_records(cls, records: Iterable[ReceptionRecord]) -> "Dataset":
        records = list(records)
        return cls(
            [r.rx for r in records],
            [r.tx for r in records],
            [r.m for r in records],
            [r.s_local for r in records],
        )

    @classmethod
    def concat(cls, parts: Iterable["Dataset"]) -> "Dataset":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, c) for p in parts]) for c in ("rx", "tx", "m", "s")))

    def __len__(self) -> int:
        return int(self.s.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            len(self) == len(other)
            and np.array_equal(self.rx, other.rx)
            and np.array_equal(self.tx, other.tx)
            and np.array_equal(self.m, other.m)
            and np.array_equal(self.s, other.s)
        )

    def records(self) -> list[ReceptionRecord]:
        return [
            ReceptionRecord(str(a), str(b), int(c), float(d))
            for a, b, c, d in zip(self.rx, self.tx, self.m, self.s)
        ]

    def _index(self) -> dict:
        if self._links is None:
            links = {}
            if len(self):
                key_change = np.flatnonzero(
                    (self.rx[1:] != self.rx[:-1]) | (self.tx[1:] != self.tx[:-1])
                ) + 1
                bounds = np.concatenate([[0], key_change, [len(self)]])
                for lo, hi in zip(bounds[:-1], bounds[1:]):
                    links[(str(self.rx[lo]), str(self.tx[lo]))] = (self.m[lo:hi], self.s[lo:hi])
            self._links = links
        return self._links

    def link(self, rx: str, tx: str) -> tuple[np.ndarray, np.ndarray]:
        empty = (np.empty(0, np.int64), np.empty(0))
        return self._index().get((rx, tx), empty)

    def n_link(self, rx: str, tx: str) -> int:
        return int(self.link(rx, tx)[0].size)

    def links(self) -> list[tuple[str, str]]:
        return sorted(self._index())

    def receivers(self) -> list[str]:
        return sorted({rx for rx, _ in self._index()})

    def transmitters(self) -> list[str]:
        return sorted({tx for _, tx in self._index()})

    def heard_by(self, rx: str) -> list[str]:
        return sorted(tx for r, tx in self._index() if r == rx)

    def hearers_of(self, tx: str) -> list[str]:
        return sorted(rx for rx, t in self._index() if t == tx)

    def count(self, rx: str | None = None, tx: str | None = None) -> int:
        mask = np.ones(len(self), bool)
        if rx is not None:
            mask &= self.rx == rx
        if tx is not None:
            mask &= self.tx == tx
        return int(mask.sum())

    def find(self, rx: str, tx: str, m: int) -> ReceptionRecord:
        ms, ss = self.link(rx, tx)
        j = int(np.searchsorted(ms, m))
        if j >= ms.size or ms[j] != m:
            raise KeyError((rx, tx, m))
        return ReceptionRecord(rx, tx, int(m), float(ss[j]))

    def with_timestamps(self, s) -> "Dataset":
        out = Dataset.__new__(Dataset)
        out.rx, out.tx, out.m = self.rx, self.tx, self.m
        out.s = np.asarray(s, dtype=float)
        out.s.flags.writeable = False
        out._links = None
        return out

    def drop_receiver(self, rx: str) -> "Dataset":
        keep = self.rx != rx
        return Dataset(self.rx[keep], self.tx[keep], self.m[keep], self.s[keep])

    # serialization

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rx, tx, m, s in zip(self.rx, self.tx, self.m, self.s):
            w.writerow((rx, tx, int(m), format_seconds(s)))
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, source) -> "Dataset":
        text = _read_text(source)
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and set(CSV_COLUMNS) - set(rows[0]):
            raise ValueError(f"dataset CSV must have columns {CSV_COLUMNS}")
        return cls(
            [r["rx_id"] for r in rows],
            [r["tx_id"] for r in rows],
            [int(r["m"]) for r in rows],
            [float(r["s_local_seconds"]) for r in rows],
        )

    def to_json(self, path=None) -> str:
        rows = [
            {"rx_id": str(rx), "tx_id": str(tx), "m": int(m), "s_local_seconds": format_seconds(s)}
            for rx, tx, m, s in zip(self.rx, self.tx, self.m, self.s)
        ]
        text = json.dumps({"records": rows}, indent=1)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, source) -> "Dataset":
        doc = json.loads(_read_text(source))
        rows = doc["records"] if isinstance(doc, dict) else doc
        return cls(
            [r["rx_id"] for r in rows],
            [r["tx_id"] for r in rows],
            [int(r["m"]) for r in rows],
            [float(r["s_local_seconds"]) for r in rows],
        )

    @classmethod
    def load(cls, path) -> "Dataset":
        path = Path(path)
        if path.suffix.lower() == ".json":
            return cls.from_json(path)
        return cls.from_csv(path)


def _read_text(source) -> str:
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        return Path(source).read_text(encoding="utf-8")
    return source
