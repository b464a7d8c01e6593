"""Relative clock-rate estimation and compensation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from tsloc.dataset import Dataset
from tsloc.errors import InsufficientCommonPackets, MissingDriftEstimate


@dataclass(frozen=True)
class DriftEstimate:
    rx: str
    relative_drift: float
    reference: str
    n_packets: int = 0


def estimate_drift(records: Dataset, rx: str, reference: str) -> DriftEstimate:
    """Rate of ``rx``'s clock relative to ``reference``'s, minus one.

    Fits ``s_rx`` against ``s_reference`` over packets heard by both with one
    common slope and a separate intercept per transmitter (each transmitter's
    propagation delays shift the intercept).  The deviation ``s_rx - s_ref`` is
    regressed instead of ``s_rx`` itself so the slope comes out directly as
    ``slope - 1`` without cancellation.
    """
    if rx == reference:
        return DriftEstimate(rx, 0.0, reference, records.count(rx=rx))
    sxx = sxy = 0.0
    n_total = 0
    for tx in sorted(set(records.heard_by(rx)) & set(records.heard_by(reference))):
        m_r, s_r = records.link(rx, tx)
        m_f, s_f = records.link(reference, tx)
        _, ir, iff = np.intersect1d(m_r, m_f, assume_unique=True, return_indices=True)
        if ir.size < 2:
            continue
        x = s_f[iff]
        y = s_r[ir] - x
        xc = x - x.mean()
        sxx += float(xc @ xc)
        sxy += float(xc @ (y - y.mean()))
        n_total += ir.size
    if n_total < 2 or sxx <= 0:
        raise InsufficientCommonPackets(
            f"receivers {rx!r} and {reference!r} share fewer than 2 packets from a common transmitter"
        )
    return DriftEstimate(rx, sxy / sxx, reference, n_total)


def correct_drift(records: Dataset, drifts: Mapping[str, DriftEstimate]) -> Dataset:
    """Rescale every receiver's timestamps to the reference receiver's rate."""
    refs = {d.reference for d in drifts.values()}
    s = np.array(records.s, dtype=float)
    for rx in records.receivers():
        if rx in drifts:
            d = drifts[rx].relative_drift
        elif rx in refs:
            d = 0.0
        else:
            raise MissingDriftEstimate(f"no drift estimate for receiver {rx!r}")
        if d != 0.0:
            mask = records.rx == rx
            s[mask] = s[mask] / (1.0 + d)
    return records.with_timestamps(s)


def pick_reference(records: Dataset) -> str:
    """Receiver with the most receptions (ties broken by id)."""
    rxs = records.receivers()
    if not rxs:
        raise InsufficientCommonPackets("dataset has no receptions")
    counts = {rx: records.count(rx=rx) for rx in rxs}
    return min(rxs, key=lambda r: (-counts[r], r))


def compensate_drift(records: Dataset, reference: str | None = None):
    """Estimate every receiver's drift against one reference and correct the dataset.

    Returns ``(corrected, drifts)``.
    """
    reference = reference or pick_reference(records)
    drifts = {rx: estimate_drift(records, rx, reference) for rx in records.receivers()}
    return correct_drift(records, drifts), drifts
