import pytest

from typoattack.validator import (
    validate_existing_path, validate_max_in_flight, validate_max_retries, validate_model_name,
    validate_prompt_id, validate_seed, validate_timeout, validate_url,
)


@pytest.mark.parametrize("url,ok", [
    ("http://localhost:8000/v1", True),
    ("https://api.example.com/v1", True),
    ("localhost:8000", False),
    ("ftp://host/v1", False),
    ("http://", False),
    ("", False),
])
def test_validate_url(url, ok):
    is_valid, message = validate_url(url)
    assert is_valid is ok
    assert (message is None) is ok


@pytest.mark.parametrize("seed,ok", [(0, True), (42, True), ("7", True), (2 ** 64 - 1, True),
                                     (-1, False), (2 ** 64, False), ("x", False), (True, False)])
def test_validate_seed(seed, ok):
    assert validate_seed(seed)[0] is ok


def test_numeric_ranges():
    assert validate_timeout(0.5)[0]
    assert not validate_timeout(0)[0]
    assert not validate_timeout("soon")[0]
    assert validate_max_in_flight(1)[0] and validate_max_in_flight(256)[0]
    assert not validate_max_in_flight(0)[0] and not validate_max_in_flight(257)[0]
    assert validate_max_retries(0)[0] and validate_max_retries(10)[0]
    assert not validate_max_retries(11)[0]


def test_existing_path(tmp_path):
    assert validate_existing_path(str(tmp_path), "папка")[0]
    is_valid, message = validate_existing_path(str(tmp_path / "nope"), "корпус")
    assert not is_valid and "корпус" in message
    assert not validate_existing_path(None, "корпус")[0]


def test_prompt_and_model():
    assert validate_prompt_id("P1", ["BASE", "P1"])[0]
    assert not validate_prompt_id("P4", ["BASE", "P1"])[0]
    assert validate_model_name("llava-hf/llava-v1.5-13b")[0]
    assert not validate_model_name("")[0]
    assert not validate_model_name("bad name")[0]
