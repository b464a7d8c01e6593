import numpy as np
import pytest

from tsloc.channel import SPEED_OF_LIGHT as C
from tsloc.dataset import ReceptionRecord
from tsloc.errors import IncompleteQuad, MismatchedPacket, MismatchedReceiver
from tsloc.estimate.differencing import (
    DifferenceKind,
    diff_same_packet,
    diff_same_receiver,
    dtdoa,
    paired_double_differences,
)

from conftest import SQUARE, scene_of, simulate

D = 299.792458


def rec(rx, tx, m, a, t, d):
    """Simplified clock: s = a + t + d / c."""
    return ReceptionRecord(rx, tx, m, a + t + d / C)


def test_same_receiver_examples():
    obs = diff_same_receiver(rec("k", "a", 0, 0.0, 0.0, 0.0), rec("k", "b", 0, 0.0, 0.0, D))
    assert obs.kind is DifferenceKind.SAME_RECEIVER
    assert obs.value == pytest.approx(1e-6, abs=1e-18)
    biased = diff_same_receiver(rec("k", "a", 0, 7.0, 0.0, 0.0), rec("k", "b", 0, 7.0, 0.0, D))
    assert biased.value == pytest.approx(1e-6, abs=1e-14)


def test_same_packet_examples():
    obs = diff_same_packet(rec("k", "i", 0, 0.0, 0.0, D), rec("l", "i", 0, 0.0, 0.0, 0.0))
    assert obs.value == pytest.approx(1e-6, abs=1e-18)
    shifted = diff_same_packet(rec("k", "i", 0, 0.0, 5.0, D), rec("l", "i", 0, 0.0, 5.0, 0.0))
    assert shifted.value == pytest.approx(1e-6, abs=1e-14)


def test_dtdoa_examples():
    same = dtdoa(*(rec(rx, tx, 0, 0.0, 0.0, 50.0) for tx, rx in [("i", "k"), ("j", "k"), ("i", "l"), ("j", "l")]))
    assert same.value == 0.0
    # k at j, l at i, all four nodes on a square of side D
    d = {("i", "k"): D, ("j", "k"): 0.0, ("i", "l"): 0.0, ("j", "l"): D}
    t = {"i": 0.3, "j": 0.7}
    a = {"k": 2.0, "l": -1.0}
    r = {key: rec(key[1], key[0], 0, a[key[1]], t[key[0]], v) for key, v in d.items()}
    obs = dtdoa(r["i", "k"], r["j", "k"], r["i", "l"], r["j", "l"])
    assert obs.value == pytest.approx(-2e-6, abs=1e-14)
    assert obs.kind is DifferenceKind.DOUBLE_DIFFERENCE


def test_difference_errors():
    with pytest.raises(MismatchedReceiver):
        diff_same_receiver(ReceptionRecord("k", "a", 0, 0.0), ReceptionRecord("l", "b", 0, 0.0))
    with pytest.raises(MismatchedPacket):
        diff_same_packet(ReceptionRecord("k", "a", 0, 0.0), ReceptionRecord("l", "a", 1, 0.0))
    with pytest.raises(MismatchedPacket):
        diff_same_packet(ReceptionRecord("k", "a", 0, 0.0), ReceptionRecord("l", "b", 0, 0.0))
    good = [ReceptionRecord(rx, tx, 0, 0.0) for tx, rx in [("i", "k"), ("j", "k"), ("i", "l"), ("j", "l")]]
    with pytest.raises(IncompleteQuad):
        dtdoa(good[0], good[1], good[2], None)
    with pytest.raises(IncompleteQuad):
        dtdoa(good[0], good[1], good[0], good[1])


def random_draw(rng):
    pos = {n: rng.uniform(-500, 500, 2) for n in "ijkl"}
    a = {"k": rng.uniform(-10, 10), "l": rng.uniform(-10, 10)}
    t = {"i": rng.uniform(0, 10), "j": rng.uniform(0, 10)}
    d = {(tx, rx): float(np.linalg.norm(pos[tx] - pos[rx])) for tx in "ij" for rx in "kl"}
    r = {key: rec(key[1], key[0], 0, a[key[1]], t[key[0]], v) for key, v in d.items()}
    return d, a, t, r


def test_substitution_oracles(rng):
    for _ in range(1000):
        d, a, t, r = random_draw(rng)
        b = diff_same_receiver(r["i", "k"], r["j", "k"]).value
        assert abs(b - ((t["j"] - t["i"]) + (d["j", "k"] - d["i", "k"]) / C)) < 1e-12
        p = diff_same_packet(r["i", "k"], r["i", "l"]).value
        assert abs(p - ((a["k"] - a["l"]) + (d["i", "k"] - d["i", "l"]) / C)) < 1e-12
        dd = dtdoa(r["i", "k"], r["j", "k"], r["i", "l"], r["j", "l"]).value
        assert abs(dd - (d["j", "k"] - d["i", "k"] - d["j", "l"] + d["i", "l"]) / C) < 1e-12


def test_paired_double_differences_cancel_slow_error():
    from tsloc.clocks import ClockParams, SlowErrorParams

    scene = scene_of(SQUARE + [("k", "FixedReceiveOnly", (100, 50)), ("l", "FixedReceiveOnly", (330, 250))])
    slow = SlowErrorParams("gauss_markov", 50e-9, 1.0)
    clocks = {rx: ClockParams(bias_a=b, h_process=slow) for rx, b in [("k", 0.4), ("l", -0.2)]}
    ds, _, _ = simulate(scene, clocks, horizon=5.0, seed=1)
    dd = paired_double_differences(ds, "S1", "S3", "k", "l", window=0.1)
    p = {n: scene.position(n) for n in scene.ids}
    dist = lambda a, b: np.linalg.norm(p[a] - p[b])  # noqa: E731
    expected = (dist("S3", "k") - dist("S1", "k") - dist("S3", "l") + dist("S1", "l")) / C
    assert dd.size > 40
    # 50 ns slow error, packets at most 0.1 s apart: residual well under 50 ns
    assert np.median(np.abs(dd - expected)) < 10e-9
