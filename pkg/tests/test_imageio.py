import numpy as np
import pytest

from tilepath.errors import CorruptionError
from tilepath.imageio import read_image, read_pnm_raw, to_uint8, write_image


def test_ppm_round_trip_bit_exact(tmp_path, rng):
    px = rng.integers(0, 256, (7, 11, 3), dtype=np.uint8)
    write_image(tmp_path / "a.ppm", px)
    assert read_pnm_raw(tmp_path / "a.ppm").tobytes() == px.tobytes()


def test_float_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 4, 3)) / 255.0
    write_image(tmp_path / "a.ppm", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.ppm"), img)


def test_pgm(tmp_path):
    img = np.array([[0.0, 1.0], [0.5, 0.25]])
    write_image(tmp_path / "m.pgm", img)
    raw = (tmp_path / "m.pgm").read_bytes()
    assert raw.startswith(b"P5")
    assert read_pnm_raw(tmp_path / "m.pgm")[:, :, 0].tolist() == [[0, 255], [128, 64]]


def test_header_comments(tmp_path):
    data = b"P6\n# made by hand\n2 1\n# depth\n255\n" + bytes([1, 2, 3, 4, 5, 6])
    (tmp_path / "c.ppm").write_bytes(data)
    assert read_pnm_raw(tmp_path / "c.ppm").reshape(-1).tolist() == [1, 2, 3, 4, 5, 6]


@pytest.mark.parametrize("data", [
    b"P3\n1 1\n255\n0 0 0\n",
    b"P6\n2 2\n255\n" + bytes(5),
    b"P6\n2 2\n65535\n" + bytes(24),
    b"P6\n2 x\n255\n",
    b"",
])
def test_corrupt_files(tmp_path, data):
    (tmp_path / "bad.ppm").write_bytes(data)
    with pytest.raises(CorruptionError):
        read_pnm_raw(tmp_path / "bad.ppm")


def test_to_uint8_rounds_half_up():
    assert to_uint8(np.array([0.5 / 255, 1.49 / 255, -1.0, 2.0])).tolist() == [1, 1, 0, 255]
