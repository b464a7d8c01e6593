"""Timestamp differencing: same receiver, same packet, and double differences.

Under the simplified clock (no drift, no slow error, no noise)

* same receiver:  s_k[m_b] - s_k[m_a] = t_b - t_a + (d_bk - d_ak) / c
* same packet:    s_k[m] - s_l[m]     = a_k - a_l + (d_ik - d_il) / c
* double diff.:   (s_k[m'] - s_k[m]) - (s_l[m'] - s_l[m]) = (d_jk - d_ik - d_jl + d_il) / c
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from tsloc.dataset import Dataset, ReceptionRecord
from tsloc.errors import IncompleteQuad, MismatchedPacket, MismatchedReceiver


class DifferenceKind(str, enum.Enum):
    SAME_RECEIVER = "SameReceiver"
    SAME_PACKET = "SamePacket"
    DOUBLE_DIFFERENCE = "DoubleDifference"


@dataclass(frozen=True)
class DifferenceObservation:
    kind: DifferenceKind
    # role -> node id, roles among tx_i, tx_j, rx_k, rx_l
    nodes: dict
    # transmitter -> packet index
    packets: dict
    value: float


def diff_same_receiver(rec_a: ReceptionRecord, rec_b: ReceptionRecord) -> DifferenceObservation:
    if rec_a.rx != rec_b.rx:
        raise MismatchedReceiver(f"records come from receivers {rec_a.rx!r} and {rec_b.rx!r}")
    if (rec_a.tx, rec_a.m) == (rec_b.tx, rec_b.m):
        raise MismatchedReceiver("same-receiver difference needs two distinct packets")
    return DifferenceObservation(
        DifferenceKind.SAME_RECEIVER,
        {"tx_i": rec_a.tx, "tx_j": rec_b.tx, "rx_k": rec_a.rx},
        {"i": rec_a.m, "j": rec_b.m},
        rec_b.s_local - rec_a.s_local,
    )


def diff_same_packet(rec_k: ReceptionRecord, rec_l: ReceptionRecord) -> DifferenceObservation:
    if (rec_k.tx, rec_k.m) != (rec_l.tx, rec_l.m):
        raise MismatchedPacket(
            f"packets ({rec_k.tx}, {rec_k.m}) and ({rec_l.tx}, {rec_l.m}) differ"
        )
    if rec_k.rx == rec_l.rx:
        raise MismatchedPacket("same-packet difference needs two distinct receivers")
    return DifferenceObservation(
        DifferenceKind.SAME_PACKET,
        {"tx_i": rec_k.tx, "rx_k": rec_k.rx, "rx_l": rec_l.rx},
        {"i": rec_k.m},
        rec_k.s_local - rec_l.s_local,
    )


def dtdoa(rec_ik, rec_jk, rec_il, rec_jl) -> DifferenceObservation:
    """Double difference over transmitters {i, j} and receivers {k, l}.

    Both clock biases and both transmission times cancel.
    """
    recs = (rec_ik, rec_jk, rec_il, rec_jl)
    if any(r is None for r in recs):
        raise IncompleteQuad("all four reception records are required")
    ok = (
        rec_ik.rx == rec_jk.rx
        and rec_il.rx == rec_jl.rx
        and rec_ik.rx != rec_il.rx
        and (rec_ik.tx, rec_ik.m) == (rec_il.tx, rec_il.m)
        and (rec_jk.tx, rec_jk.m) == (rec_jl.tx, rec_jl.m)
        and (rec_ik.tx, rec_ik.m) != (rec_jk.tx, rec_jk.m)
    )
    if not ok:
        raise IncompleteQuad("records do not form a transmitter-pair x receiver-pair quad")
    b_k = diff_same_receiver(rec_ik, rec_jk).value
    b_l = diff_same_receiver(rec_il, rec_jl).value
    return DifferenceObservation(
        DifferenceKind.DOUBLE_DIFFERENCE,
        {"tx_i": rec_ik.tx, "tx_j": rec_jk.tx, "rx_k": rec_ik.rx, "rx_l": rec_il.rx},
        {"i": rec_ik.m, "j": rec_jk.m},
        b_k - b_l,
    )


def common_packets(dataset: Dataset, tx: str, rx_k: str, rx_l: str):
    """Packets of ``tx`` heard by both receivers: (m, s_k, s_l)."""
    mk, sk = dataset.link(rx_k, tx)
    ml, sl = dataset.link(rx_l, tx)
    m, ik, il = np.intersect1d(mk, ml, assume_unique=True, return_indices=True)
    return m, sk[ik], sl[il]


def paired_double_differences(
    dataset: Dataset, tx_ref: str, tx_x: str, rx_x: str, rx_ref: str, window: float
) -> np.ndarray:
    """Vectorised double differences for one transmitter pair and receiver pair.

    Every packet of ``tx_x`` heard at both receivers is paired with the
    closest-in-time packet of ``tx_ref`` heard at both, provided the two
    arrivals at ``rx_x`` lie within ``window`` seconds.  Pairing close packets
    makes the slowly varying clock error cancel inside each same-receiver
    difference.  Returns ``(s_x[x] - s_x[ref]) - (s_ref[x] - s_ref[ref])``.
    """
    _, xk, xl = common_packets(dataset, tx_x, rx_x, rx_ref)
    _, rk, rl = common_packets(dataset, tx_ref, rx_x, rx_ref)
    if xk.size == 0 or rk.size == 0:
        return np.empty(0)
    order = np.argsort(rk, kind="stable")
    rk, rl = rk[order], rl[order]
    j = np.searchsorted(rk, xk)
    lo = np.clip(j - 1, 0, rk.size - 1)
    hi = np.clip(j, 0, rk.size - 1)
    pick = np.where(np.abs(xk - rk[lo]) <= np.abs(rk[hi] - xk), lo, hi)
    keep = np.abs(xk - rk[pick]) <= window
    pick = pick[keep]
    return (xk[keep] - rk[pick]) - (xl[keep] - rl[pick])


def same_packet_differences(dataset: Dataset, tx: str, rx_k: str, rx_l: str) -> np.ndarray:
    _, sk, sl = common_packets(dataset, tx, rx_k, rx_l)
    return sk - sl
