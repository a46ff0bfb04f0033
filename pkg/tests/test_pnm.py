import numpy as np
import pytest

from servokit.errors import ImageFormatError
from servokit.pnm import read_pnm, write_pnm


def test_gray_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (7, 11), dtype=np.uint8)
    write_pnm(tmp_path / "a.pgm", img)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n11 7\n255\n")
    np.testing.assert_array_equal(read_pnm(tmp_path / "a.pgm"), img)


def test_color_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 4, 3), dtype=np.uint8)
    write_pnm(tmp_path / "a.ppm", img)
    np.testing.assert_array_equal(read_pnm(tmp_path / "a.ppm"), img)


def test_header_comments(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1 # size\n255\n\x01\x02")
    np.testing.assert_array_equal(read_pnm(tmp_path / "c.pgm"), [[1, 2]])


@pytest.mark.parametrize("data", [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n65535\n\x00\x00",
                                  b"P5\n1"])
def test_bad_files(tmp_path, data):
    (tmp_path / "bad.pgm").write_bytes(data)
    with pytest.raises(ImageFormatError):
        read_pnm(tmp_path / "bad.pgm")


def test_write_rejects_non_uint8(tmp_path):
    with pytest.raises(ImageFormatError):
        write_pnm(tmp_path / "x.pgm", np.zeros((2, 2)))
