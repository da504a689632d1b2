import json
import os

import pytest

from pedfuzzy.fuzzy import FuzzyModelError, infer
from pedfuzzy.io import atomic_write_text, config_digest, parse_bool, provenance, read_key_values
from pedfuzzy.modelfile import dumps_model, load_model, loads_model, model_to_dict, save_model
from pedfuzzy.synthetic import default_planted_model

from conftest import make_sample


def test_round_trip_is_byte_identical(tmp_path):
    model = default_planted_model()
    path = tmp_path / "m.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded == model
    assert dumps_model(loaded) == path.read_text()


def test_round_trip_keeps_predictions():
    model = default_planted_model()
    loaded = loads_model(dumps_model(model))
    sample = make_sample(proximity="medium", gaze="not_looking", distance=3.3)
    assert infer(model, sample) == infer(loaded, sample)


def test_file_layout():
    data = json.loads(dumps_model(default_planted_model()))
    assert data["format"] == "pedfuzzy-model" and data["format_version"] == 1
    assert data["rules"][0]["if"] == [["proximity", "near"], ["zebra_crossing", "present"]]
    assert data["rules"][0]["then"] == "crossing"


def test_rejects_foreign_or_broken_files():
    with pytest.raises(FuzzyModelError):
        loads_model("{not json")
    with pytest.raises(FuzzyModelError):
        loads_model(json.dumps({"format": "something-else"}))
    data = model_to_dict(default_planted_model())
    data["rules"][0]["if"][0][0] = "mood"
    with pytest.raises(FuzzyModelError, match="mood"):
        loads_model(json.dumps(data))


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    atomic_write_text(target, "hello\n")
    atomic_write_text(target, "again\n")
    assert target.read_text() == "again\n"
    assert os.listdir(target.parent) == ["out.txt"]


def test_key_values(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# comment\nmin-support = 0.1  # trailing\n\nseed=4\n")
    assert read_key_values(path) == {"min_support": "0.1", "seed": "4"}
    path.write_text("oops\n")
    with pytest.raises(ValueError, match=":1"):
        read_key_values(path)


def test_parse_bool_and_provenance():
    assert parse_bool("on") and not parse_bool("No")
    with pytest.raises(ValueError):
        parse_bool("maybe")
    assert config_digest({"a": 1, "b": 2}) == config_digest({"b": 2, "a": 1})
    rec = provenance({"a": 1}, 7, extra="x")
    assert rec["seed"] == 7 and rec["tool"] == "pedfuzzy" and rec["extra"] == "x"
