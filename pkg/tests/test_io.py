import numpy as np
import pytest

from groundsight.errors import FormatError
from groundsight.io import (
    load_cloud,
    read_csv,
    read_pgm,
    read_ply,
    read_ppm,
    write_csv,
    write_pgm,
    write_ply,
    write_ppm,
)


def test_ply_roundtrip_with_labels(tmp_path, rng):
    pts = rng.normal(size=(50, 3)).astype(np.float32).astype(np.float64)
    labels = rng.integers(0, 2, 50).astype(np.uint8)
    write_ply(tmp_path / "a.ply", pts, labels)
    cloud, got = read_ply(tmp_path / "a.ply", with_labels=True)
    np.testing.assert_array_equal(cloud.points, pts)
    np.testing.assert_array_equal(got, labels)


def test_ply_empty(tmp_path):
    write_ply(tmp_path / "e.ply", np.zeros((0, 3)))
    assert len(read_ply(tmp_path / "e.ply")) == 0


def test_binary_ply_and_non_finite_rows(tmp_path):
    rec = np.array([(1.0, 2.0, 3.0), (np.nan, 0.0, 0.0), (4.0, 5.0, 6.0)],
                   dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4")])
    head = b"ply\nformat binary_little_endian 1.0\ncomment x\nelement vertex 3\n" \
           b"property float x\nproperty float y\nproperty float z\nend_header\n"
    (tmp_path / "b.ply").write_bytes(head + rec.tobytes())
    np.testing.assert_array_equal(read_ply(tmp_path / "b.ply").points, [[1, 2, 3], [4, 5, 6]])


@pytest.mark.parametrize(
    "body",
    [
        b"not a ply",
        b"ply\nformat ascii 1.0\nelement face 1\nproperty int x\nend_header\n1\n",
        b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
        b"property float z\nend_header\n1 2 3\n",
        b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\n"
        b"property float y\nproperty float z\nend_header\n",
    ],
)
def test_ply_format_errors(tmp_path, body):
    (tmp_path / "x.ply").write_bytes(body)
    with pytest.raises(FormatError):
        read_ply(tmp_path / "x.ply")


def test_csv_roundtrip_and_header(tmp_path, rng):
    pts = rng.normal(size=(20, 3))
    write_csv(tmp_path / "a.csv", pts)
    np.testing.assert_array_equal(read_csv(tmp_path / "a.csv").points, pts)
    (tmp_path / "h.csv").write_text("x,y,z\n1,2,3\nnan,1,1\n")
    np.testing.assert_array_equal(load_cloud(tmp_path / "h.csv").points, [[1, 2, 3]])
    (tmp_path / "bad.csv").write_text("1,2,3\n1,a,3\n")
    with pytest.raises(FormatError):
        read_csv(tmp_path / "bad.csv")


def test_pgm_16bit_is_big_endian(tmp_path):
    img = np.array([[1, 258], [65535, 0]], dtype=np.uint16)
    write_pgm(tmp_path / "d.pgm", img)
    raw = (tmp_path / "d.pgm").read_bytes()
    assert raw.startswith(b"P5\n2 2\n65535\n")
    assert raw[-8:] == b"\x00\x01\x01\x02\xff\xff\x00\x00"
    np.testing.assert_array_equal(read_pgm(tmp_path / "d.pgm"), img)


def test_netpbm_comments_and_rgb(tmp_path, rng):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# comment\n3 1\n# another\n255\n\x01\x02\x03")
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[1, 2, 3]])
    img = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
    write_ppm(tmp_path / "c.ppm", img)
    np.testing.assert_array_equal(read_ppm(tmp_path / "c.ppm"), img)
    (tmp_path / "t.ppm").write_bytes(b"P6\n4 4\n255\n\x00")
    with pytest.raises(FormatError):
        read_ppm(tmp_path / "t.ppm")
