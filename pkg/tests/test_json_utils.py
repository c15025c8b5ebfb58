import json
from pathlib import Path

import numpy as np
import pytest

from busyq.errors import ModelValidationError
from busyq.schemas.run_schemas import GridSpec
from busyq.utils.builders import build_table, fmt, render
from busyq.utils.json_utils import load_network, load_queue, pointer

FIXTURES = Path(__file__).parent / "fixtures"


def test_load_queue_and_bare_family_fragment():
    queue = load_queue(FIXTURES / "mm1inf.json")
    assert queue.lam == 1.0
    assert queue.service.kind == "constant"
    family = load_queue(FIXTURES / "betaconst.json")
    assert family.lam == 1.0
    assert family.service.kind == "beta-const"


def test_load_network():
    net = load_network(FIXTURES / "tandem.json")
    assert net.J == 2


def test_routing_error_points_at_the_row():
    with pytest.raises(ModelValidationError) as exc:
        load_network(FIXTURES / "routing_bad.json")
    assert exc.value.code == "ROUTING_ROW_SUM"
    assert exc.value.path == "/routing/0"


def test_pydantic_errors_get_a_pointer(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"lambda": -1.0, "service": {"kind": "exponential", "rate": 1.0}}))
    with pytest.raises(ModelValidationError) as exc:
        load_queue(path)
    assert exc.value.code == "INVALID_MODEL"
    assert exc.value.path == "/lambda"


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(ModelValidationError) as exc:
        load_queue(tmp_path / "nope.json")
    assert exc.value.code == "FILE_NOT_FOUND"
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ModelValidationError) as exc:
        load_queue(broken)
    assert exc.value.code == "INVALID_MODEL"


def test_pointer_drops_union_tags():
    assert pointer(("service", "beta-const", "rho")) == "/service/rho"
    assert pointer(()) == ""


def test_grid_spec():
    grid = GridSpec.parse("0:1:0.25")
    assert np.allclose(grid.values(), [0.0, 0.25, 0.5, 0.75, 1.0])
    assert GridSpec.parse("1:1:1").values().tolist() == [1.0]


@pytest.mark.parametrize("text", ["0:1", "0:1:0", "1:0:0.1", "a:b:c"])
def test_bad_grid(text):
    with pytest.raises(ModelValidationError) as exc:
        GridSpec.parse(text)
    assert exc.value.code == "INVALID_GRID"


def test_twelve_significant_digits():
    assert fmt(1.0 / 3.0) == "0.333333333333"
    assert fmt(np.float64(2.0)) == "2"
    assert fmt(float("inf")) == "inf"
    assert fmt(np.int64(3)) == 3


def test_render_csv_and_json():
    table = build_table(["t", "value"], [0.0, 1.0], [0.5, 2.0 / 3.0], method="closed")
    assert render(table, "csv") == "t,value\n0,0.5\n1,0.666666666667\n"
    payload = json.loads(render(table, "json"))
    assert payload["columns"] == ["t", "value"]
    assert payload["rows"][1] == [1.0, 0.666666666667]
    assert payload["meta"] == {"method": "closed"}
