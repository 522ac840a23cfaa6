import json

import numpy as np
import pytest

from netobs.core_model import systems_equal
from netobs.io import ModelFormatError, load_model, save_model, system_from_dict, system_to_dict

from conftest import rand_system


def test_ragged_rows_name_the_field():
    doc = {"subsystems": [{"A_TT": [[0.1, 0.2], [0.3]]}]}
    with pytest.raises(ModelFormatError, match=r"subsystems\[0\]\.A_TT: ragged"):
        system_from_dict(doc)


@pytest.mark.parametrize("doc, where", [
    ({}, "subsystems"),
    ({"subsystems": [{"A_TT": [[1.0]], "Q": [[1.0]]}]}, "unknown keys"),
    ({"subsystems": [{"A_TS": [[1.0]]}]}, "A_TT: missing"),
    ({"subsystems": [{"A_TT": [[1.0, 2.0]]}]}, "square"),
    ({"subsystems": [{"A_TT": [["a"]]}]}, r"A_TT\[0\]\[0\]"),
    ({"subsystems": [{"A_TT": [[1.0]], "C_T": [[1.0, 1.0]]}]}, "C_T"),
    ({"subsystems": [{"A_TT": [[1.0]], "A_TS": [[1.0]], "A_ST": [[1.0]]}],
      "phi": {"rows": 1, "cols": 1, "entries": [[0.5, 0, 1.0]]}}, r"phi.entries\[0\]"),
    ({"subsystems": [{"A_TT": [[1.0]]}], "phi": {"rows": 2, "cols": 0}}, "phi: declared"),
])
def test_schema_errors(doc, where):
    with pytest.raises(ModelFormatError, match=where):
        system_from_dict(doc)


def test_dims_fix_sizes_of_omitted_matrices():
    sys = system_from_dict({"subsystems": [{"A_TT": [[0.5]], "dims": {"m_d": 2, "m_y": 1, "m_w": 1}}]})
    s = sys.sub(1)
    assert s.B_T.shape == (1, 2) and s.C_T.shape == (1, 1) and not np.any(s.C_T)


def test_round_trip(tmp_path):
    sys = rand_system(np.random.default_rng(0), N=3, strict=False)
    path = tmp_path / "m.json"
    save_model(sys, path)
    back, digest = load_model(path)
    assert systems_equal(sys, back)
    assert len(digest) == 64
    assert system_to_dict(back) == json.loads(path.read_text())


def test_not_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    with pytest.raises(ModelFormatError, match="not valid JSON"):
        load_model(p)
