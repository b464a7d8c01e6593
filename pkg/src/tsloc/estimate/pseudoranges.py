"""From drift-corrected timestamps to pseudo-ranges.

A pseudo-range set for a target holds one distance per anchor, all offset by
the same unknown bias.  Each entry keeps its timing part (``raw``) apart from
the geometric correction built from other nodes' positions (``terms``), so
that the joint refinement can re-evaluate the correction while those
positions are still being estimated::

    pseudo_range = raw + sum(coef * distance(x, y) for coef, x, y in terms)
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from tsloc.channel import SPEED_OF_LIGHT
from tsloc.dataset import Dataset
from tsloc.errors import DisconnectedTarget, InsufficientAnchors
from tsloc.estimate.differencing import paired_double_differences, same_packet_differences

# variance floor of an averaged entry, m^2
VARIANCE_FLOOR = 1e-6


class Scheme(str, enum.Enum):
    SAME_RECEIVER = "SameReceiver"
    SAME_PACKET = "SamePacket"
    DOUBLE_DIFFERENCE = "DoubleDifference"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        aliases = {
            "same_receiver": cls.SAME_RECEIVER,
            "same_packet": cls.SAME_PACKET,
            "double_difference": cls.DOUBLE_DIFFERENCE,
            "dtdoa": cls.DOUBLE_DIFFERENCE,
        }
        key = str(value)
        return aliases.get(key.lower(), None) or cls(key)


@dataclass(frozen=True)
class PseudoRangeEntry:
    anchor: str
    pseudo_range: float
    weight: float
    raw: float
    terms: tuple = ()
    n_obs: int = 0

    def evaluate(self, positions: Mapping[str, np.ndarray]) -> float:
        return self.raw + sum(
            coef * float(np.linalg.norm(positions[x] - positions[y])) for coef, x, y in self.terms
        )


@dataclass(frozen=True)
class PseudoRangeSet:
    target: str
    entries: tuple
    scheme: Scheme = Scheme.DOUBLE_DIFFERENCE
    reference: str | None = None
    # "receiver": anchors transmit to the target; "transmitter": anchors hear the target
    variant: str = "receiver"
    bias_convention: str = "all entries share one unknown additive bias"

    def __post_init__(self):
        if len(self.entries) < 1:
            raise InsufficientAnchors("a pseudo-range set needs at least one entry")
        if any(not e.weight > 0 for e in self.entries):
            raise ValueError("pseudo-range weights must be > 0")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def anchors(self) -> list[str]:
        return [e.anchor for e in self.entries]

    @property
    def values(self) -> np.ndarray:
        return np.array([e.pseudo_range for e in self.entries])

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.entries])

    def without(self, anchors: Iterable[str]) -> "PseudoRangeSet":
        drop = set(anchors)
        return replace(self, entries=tuple(e for e in self.entries if e.anchor not in drop))

    def shifted(self, offset: float) -> "PseudoRangeSet":
        return replace(
            self,
            entries=tuple(
                replace(e, pseudo_range=e.pseudo_range + offset, raw=e.raw + offset) for e in self.entries
            ),
        )

    def reevaluated(self, positions: Mapping[str, np.ndarray]) -> "PseudoRangeSet":
        return replace(
            self, entries=tuple(replace(e, pseudo_range=e.evaluate(positions)) for e in self.entries)
        )

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "scheme": self.scheme.value,
            "reference": self.reference,
            "entries": [
                {"anchor": e.anchor, "pseudo_range_m": e.pseudo_range, "weight": e.weight, "n_obs": e.n_obs}
                for e in self.entries
            ],
        }


def _mean_and_var(values_m: np.ndarray) -> tuple[float, float]:
    n = values_m.size
    var = float(np.var(values_m, ddof=1)) / n if n > 1 else np.inf
    return float(values_m.mean()), max(var, VARIANCE_FLOOR)


def _combine(parts: list[tuple[str, float, float, int]]):
    """Inverse-variance mean over reference nodes: (weights per ref, mean, variance, count)."""
    inv = np.array([1.0 / p[2] for p in parts])
    v = inv / inv.sum()
    mean = float(np.dot(v, [p[1] for p in parts]))
    return v, mean, 1.0 / float(inv.sum()), sum(p[3] for p in parts)


def _double_difference_set(records, known, target, scheme, window, c, min_pairs, variant):
    """Pseudo-ranges built from double differences.

    Receiver variant: anchors are transmitters heard by the target, reference
    receivers ``l`` have known positions, and for anchor ``a`` against the
    reference transmitter ``i0``::

        d(a, k) - d(i0, k) = c * DD + d(a, l) - d(i0, l)

    Transmitter variant: anchors are receivers hearing the target, known
    transmitters ``j`` play the reference role and the reference receiver
    ``l0`` takes the place of ``i0``::

        d(k, a) - d(k, l0) = c * DD + d(j, a) - d(j, l0)
    """
    if variant == "receiver":
        cands = [a for a in records.heard_by(target) if a in known]
        refs = [r for r in records.receivers() if r in known and r != target]
        hear = lambda a, r: records.n_link(r, a) > 0  # noqa: E731
    else:
        cands = [a for a in records.hearers_of(target) if a in known]
        refs = [t for t in records.transmitters() if t in known and t != target]
        hear = lambda a, r: records.n_link(a, r) > 0  # noqa: E731
    if len(cands) < 2 or not refs:
        return None

    def score(a):
        n_refs = sum(hear(a, r) for r in refs)
        n_pk = records.n_link(target, a) if variant == "receiver" else records.n_link(a, target)
        return (-n_refs, -n_pk, a)

    ref_anchor = min(cands, key=score)
    entries = []
    for a in cands:
        if a == ref_anchor:
            continue
        parts = []
        for r in refs:
            if r in (a, ref_anchor):
                continue
            if variant == "receiver":
                dd = paired_double_differences(records, ref_anchor, a, target, r, window)
            else:
                dd = paired_double_differences(records, r, target, a, ref_anchor, window)
            if dd.size >= min_pairs:
                mean, var = _mean_and_var(c * dd)
                parts.append((r, mean, var, dd.size))
        if not parts:
            continue
        v, raw, var, n = _combine(parts)
        if variant == "receiver":
            terms = tuple(t for vi, p in zip(v, parts) for t in ((vi, a, p[0]), (-vi, ref_anchor, p[0])))
        else:
            terms = tuple(t for vi, p in zip(v, parts) for t in ((vi, p[0], a), (-vi, p[0], ref_anchor)))
        entries.append(PseudoRangeEntry(a, 0.0, 1.0 / var, raw, terms, n))
    if not entries:
        return None
    ref_weight = float(np.median([e.weight for e in entries]))
    entries.append(PseudoRangeEntry(ref_anchor, 0.0, ref_weight, 0.0, (), 0))
    entries.sort(key=lambda e: e.anchor)
    prs = PseudoRangeSet(target, tuple(entries), scheme, ref_anchor, variant)
    return prs.reevaluated(known)


def _same_packet_set(records, known, target, c, min_pairs):
    cands = [a for a in records.heard_by(target) if a in known]
    refs = [r for r in records.receivers() if r in known and r != target]
    if len(cands) < 2 or not refs:
        return None

    def shared(r):
        return sum(min(records.n_link(target, a), records.n_link(r, a)) for a in cands if a != r)

    ref = min(refs, key=lambda r: (-shared(r), r))
    entries = []
    for a in cands:
        if a == ref:
            continue
        diffs = same_packet_differences(records, a, target, ref)
        if diffs.size < min_pairs:
            continue
        mean, var = _mean_and_var(c * diffs)
        entries.append(PseudoRangeEntry(a, 0.0, 1.0 / var, mean, ((1.0, a, ref),), diffs.size))
    if len(entries) < 2:
        return None
    return PseudoRangeSet(target, tuple(entries), Scheme.SAME_PACKET, ref, "receiver").reevaluated(known)


def extract_pseudoranges(
    records: Dataset,
    anchors,
    target: str,
    scheme=Scheme.DOUBLE_DIFFERENCE,
    *,
    window: float = 0.1,
    c: float = SPEED_OF_LIGHT,
    min_pairs: int = 2,
) -> PseudoRangeSet:
    """Pseudo-ranges from ``target`` to every usable anchor.

    ``anchors`` are NoisyPrior-like objects (``node``, ``pos0``) giving the
    best-known position of every node other than the target; they serve both
    as ranging anchors and as reference nodes.  ``records`` should already be
    drift-corrected.  Same-receiver differences are reduced to the double
    difference form by differencing them across two receivers, which removes
    the unknown transmission-time offset exactly.
    """
    scheme = Scheme.parse(scheme)
    known = {p.node: np.asarray(p.pos0, dtype=float) for p in anchors if p.node != target}
    if target not in records.receivers() and target not in records.transmitters():
        raise DisconnectedTarget(f"target {target!r} appears in no reception record")
    if len(known) < 2:
        raise InsufficientAnchors(f"target {target!r}: fewer than 2 anchors with known position")

    prs = None
    if scheme is Scheme.SAME_PACKET:
        prs = _same_packet_set(records, known, target, c, min_pairs)
    else:
        for variant in ("receiver", "transmitter"):
            prs = _double_difference_set(records, known, target, scheme, window, c, min_pairs, variant)
            if prs is not None:
                break
    if prs is None or len(prs) < 2:
        raise InsufficientAnchors(
            f"target {target!r}: cannot form at least 2 pseudo-ranges with scheme {scheme.value}"
        )
    return prs
