import pytest

from servokit.config import as_float, as_floats, as_int, check_known, load_config, parse_config_text
from servokit.errors import ConfigError


def test_parse_with_comments():
    s = parse_config_text("# header\ncam.fu = 700  # focal\n\nservo.lambda=0.5\n")
    assert s == {"cam.fu": "700", "servo.lambda": "0.5"}


@pytest.mark.parametrize("text", ["novalue\n", " = 3\n", "a = 1\na = 2\n"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_conversions():
    s = {"a": "1.5", "b": "3", "c": "1, 2,3", "bad": "x"}
    assert as_float(s, "a", 0) == 1.5 and as_float(s, "zz", 9.0) == 9.0
    assert as_int(s, "b", 0) == 3
    assert as_floats(s, "c") == [1.0, 2.0, 3.0]
    for fn in (as_float, as_int, as_floats):
        with pytest.raises(ConfigError):
            fn(s, "bad", 0)


def test_unknown_keys_rejected():
    check_known({"cam.fu": "1"}, ["cam.fu", "cam.fv"])
    with pytest.raises(ConfigError, match="cam.k1"):
        check_known({"cam.k1": "1"}, ["cam.fu"])


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
