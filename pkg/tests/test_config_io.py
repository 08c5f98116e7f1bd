import numpy as np
import pytest

from modfree import io
from modfree.config import config_hash, defaults, dump_config, load_config, parse_config


def test_defaults_round_trip():
    cfg = defaults()
    assert parse_config(dump_config(cfg)) == cfg
    assert config_hash(parse_config(dump_config(cfg))) == config_hash(cfg)


def test_typed_values():
    cfg = parse_config("[particles]\nN = 32\nallow_capped = yes\nr_min = 1e-6\n"
                       "[sweep]\nN_list = 8, 16 32\n")
    assert cfg["particles"]["N"] == 32 and cfg["particles"]["allow_capped"] is True
    assert cfg["particles"]["r_min"] == 1e-6
    assert cfg["sweep"]["N_list"] == [8, 16, 32]
    assert cfg["kernel"]["epsilon"] is None


@pytest.mark.parametrize("text", ["[nope]\nx = 1\n", "[run]\nsed = 1\n",
                                  "[particles]\nN = many\n", "[run]\nbinary = maybe\n"])
def test_rejects_bad_config(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_hash_changes_with_content():
    a = defaults()
    b = defaults()
    b["run"]["seed"] = 1
    assert config_hash(a) != config_hash(b) and len(config_hash(a)) == 16
    b = defaults()
    b["run"]["out_dir"] = "elsewhere"
    b["run"]["workers"] = 4
    assert config_hash(a) == config_hash(b)


def test_load_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[run]\nseed = 9\n")
    assert load_config(p)["run"]["seed"] == 9
    assert load_config(None) == defaults()


def test_csv_round_trip(tmp_path):
    rows = [{"N": 8, "x": 0.1 + 0.2, "ok": True, "name": "a", "miss": None},
            {"N": 16, "x": np.float64(1 / 3), "ok": False, "name": "b", "miss": float("nan")}]
    p = io.write_csv(tmp_path / "a.csv", rows, config_hash="abc")
    h, back = io.read_csv(p)
    assert h == "abc"
    assert back[0]["x"] == 0.1 + 0.2 and back[1]["x"] == 1 / 3
    assert back[0]["ok"] == 1 and back[0]["miss"] is None and np.isnan(back[1]["miss"])
    first = p.read_bytes()
    io.write_csv(p, rows, config_hash="abc")
    assert p.read_bytes() == first


def test_read_csv_requires_hash(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        io.read_csv(p)


def test_manifest(tmp_path):
    p = io.write_manifest(tmp_path / "m.json", {"arr": np.arange(3), "v": np.inf}, "h")
    m = io.read_manifest(p)
    assert m["arr"] == [0, 1, 2] and m["v"] == "inf" and "created" in m
    m = io.read_manifest(io.write_manifest(tmp_path / "n.json", {}, "h", timestamp=False))
    assert "created" not in m


def test_long_format():
    rows = io.long_format([{"t": 0.0, "a": 1, "b": 2}])
    assert rows == [{"t": 0.0, "variable": "a", "value": 1}, {"t": 0.0, "variable": "b", "value": 2}]
