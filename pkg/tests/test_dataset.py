import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsloc.dataset import Dataset, ReceptionRecord


def test_csv_columns_and_precision(tmp_path):
    ds = Dataset.from_records([ReceptionRecord("B", "A", 0, 0.1 + 0.2), ReceptionRecord("B", "A", 1, 1e-9 / 3)])
    text = ds.to_csv()
    lines = text.splitlines()
    assert lines[0] == "rx_id,tx_id,m,s_local_seconds"
    mantissa = lines[1].split(",")[3].split("e")[0].replace(".", "").lstrip("-")
    assert len(mantissa) == 17
    path = tmp_path / "d.csv"
    ds.to_csv(path)
    assert Dataset.load(path) == ds


def test_json_roundtrip(tmp_path):
    ds = Dataset.from_records([ReceptionRecord("B", "A", 3, np.pi), ReceptionRecord("C", "A", 3, np.e)])
    path = tmp_path / "d.json"
    ds.to_json(path)
    assert Dataset.load(path) == ds


def test_rejects_duplicates_and_self_reception():
    with pytest.raises(ValueError):
        Dataset.from_records([ReceptionRecord("B", "A", 0, 1.0), ReceptionRecord("B", "A", 0, 2.0)])
    with pytest.raises(ValueError):
        Dataset.from_records([ReceptionRecord("A", "A", 0, 1.0)])


def test_queries():
    recs = [ReceptionRecord("B", "A", m, float(m)) for m in range(3)]
    recs += [ReceptionRecord("C", "A", 1, 5.0), ReceptionRecord("C", "D", 0, 6.0)]
    ds = Dataset.from_records(recs[::-1])
    assert ds.receivers() == ["B", "C"]
    assert ds.transmitters() == ["A", "D"]
    assert ds.heard_by("C") == ["A", "D"]
    assert ds.hearers_of("A") == ["B", "C"]
    assert ds.n_link("B", "A") == 3 and ds.n_link("B", "D") == 0
    m, s = ds.link("B", "A")
    assert list(m) == [0, 1, 2] and list(s) == [0.0, 1.0, 2.0]
    assert ds.find("C", "D", 0).s_local == 6.0
    assert ds.drop_receiver("B").receivers() == ["C"]


doubles = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(doubles, min_size=1, max_size=30))
def test_csv_roundtrip_bit_exact(values):
    ds = Dataset.from_records([ReceptionRecord("R", "T", i, v) for i, v in enumerate(values)])
    back = Dataset.from_csv(ds.to_csv())
    assert np.array_equal(back.s, ds.s)
    assert back == ds
