"""Readers and writers for PLY/CSV point clouds and binary PGM/PPM images."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .core import Frame, PointCloud
from .errors import FormatError

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def read_ply(path, with_labels: bool = False):
    """Read the vertex element of an ASCII or binary little-endian PLY.

    Rows with non-finite coordinates are dropped.  With ``with_labels`` the
    optional ``label`` property is returned too (``None`` if absent).
    """
    data = Path(path).read_bytes()
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise FormatError(f"{path}: not a PLY file")
    nl = data.index(b"\n", end)
    header = data[:nl].decode("ascii", errors="replace").splitlines()
    body = data[nl + 1:]

    fmt = None
    elements = []  # [name, count, [(prop, dtype)]]
    for line in header[1:]:
        tok = line.split()
        if not tok or tok[0] in ("comment", "obj_info", "end_header"):
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append([tok[1], int(tok[2]), []])
        elif tok[0] == "property":
            if not elements:
                raise FormatError(f"{path}: property before element")
            if tok[1] == "list":
                raise FormatError(f"{path}: list properties are not supported")
            if tok[1] not in _PLY_TYPES:
                raise FormatError(f"{path}: unknown property type {tok[1]}")
            elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
    if not elements or elements[0][0] != "vertex":
        raise FormatError(f"{path}: first element must be 'vertex'")
    _, count, props = elements[0]
    names = [p for p, _ in props]
    if not {"x", "y", "z"} <= set(names):
        raise FormatError(f"{path}: vertex element lacks x/y/z")

    if fmt == "ascii":
        lines = body.decode("ascii").split("\n")
        rows = [ln for ln in lines if ln.strip()][:count]
        if len(rows) < count:
            raise FormatError(f"{path}: expected {count} vertices, found {len(rows)}")
        table = np.array([r.split()[: len(names)] for r in rows], dtype=np.float64).reshape(count, len(names))
        # honour declared types, e.g. float32 columns round like binary ones
        cols = {n: table[:, i].astype(t).astype(np.float64) for i, (n, t) in enumerate(props)}
    elif fmt == "binary_little_endian":
        dt = np.dtype([(n, "<" + t) for n, t in props])
        if len(body) < dt.itemsize * count:
            raise FormatError(f"{path}: truncated binary body")
        rec = np.frombuffer(body, dtype=dt, count=count)
        cols = {n: rec[n].astype(np.float64) for n in names}
    else:
        raise FormatError(f"{path}: unsupported PLY format {fmt!r}")

    xyz = np.column_stack([cols["x"], cols["y"], cols["z"]])
    keep = np.isfinite(xyz).all(axis=1)
    cloud = PointCloud(xyz[keep], Frame.RAW)
    if not with_labels:
        return cloud
    labels = cols.get("label")
    if labels is not None:
        labels = labels[keep].astype(np.uint8)
    return cloud, labels


def write_ply(path, points, labels=None) -> None:
    """ASCII PLY with float x, y, z and an optional uchar ``label``."""
    pts = np.asarray(points.points if isinstance(points, PointCloud) else points)
    pts = pts.astype(np.float32)
    n = pts.shape[0]
    head = ["ply", "format ascii 1.0", f"element vertex {n}",
            "property float x", "property float y", "property float z"]
    if labels is not None:
        labels = np.asarray(labels, dtype=np.uint8)
        if labels.shape != (n,):
            raise ValueError("labels must have one entry per point")
        head.append("property uchar label")
    head.append("end_header")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(head) + "\n")
        if n == 0:
            return
        if labels is None:
            np.savetxt(fh, pts, fmt="%.9g")
        else:
            table = np.column_stack([pts.astype(np.float64), labels])
            np.savetxt(fh, table, fmt=["%.9g", "%.9g", "%.9g", "%d"])


def read_csv(path) -> PointCloud:
    """``x,y,z`` per line; a non-numeric first line is treated as a header."""
    rows = []
    for i, line in enumerate(Path(path).read_text().splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            rows.append([float(p) for p in parts[:3]])
        except ValueError:
            if i == 0:
                continue
            raise FormatError(f"{path}:{i + 1}: bad row {line!r}") from None
        if len(parts) < 3:
            raise FormatError(f"{path}:{i + 1}: expected 3 columns")
    return PointCloud.from_array(np.array(rows, dtype=np.float64).reshape(-1, 3))


def write_csv(path, points) -> None:
    pts = np.asarray(points.points if isinstance(points, PointCloud) else points)
    np.savetxt(path, pts, fmt="%.17g", delimiter=",")


def load_cloud(path) -> PointCloud:
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return read_ply(path)
    if suffix in (".csv", ".txt", ".xyz"):
        return read_csv(path)
    raise FormatError(f"{path}: unknown point cloud extension {suffix!r}")


# -- netpbm ------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_netpbm(path, magic: bytes):
    data = Path(path).read_bytes()
    if data[:2] != magic:
        raise FormatError(f"{path}: expected {magic.decode()} image")
    pos = 2
    vals = []
    for _ in range(3):
        m = _TOKEN.match(data, pos)
        if not m:
            raise FormatError(f"{path}: truncated header")
        vals.append(int(m.group(1)))
        pos = m.end()
    pos += 1  # single whitespace byte before the raster
    w, h, maxval = vals
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: bad header values {vals}")
    return data[pos:], w, h, maxval


def read_pgm(path) -> np.ndarray:
    """P5 image as uint8 (maxval < 256) or uint16 (big-endian on disk)."""
    raster, w, h, maxval = _read_netpbm(path, b"P5")
    dt = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    if len(raster) < w * h * dt.itemsize:
        raise FormatError(f"{path}: truncated raster")
    img = np.frombuffer(raster, dtype=dt, count=w * h).reshape(h, w)
    return img.astype(np.uint16 if maxval > 255 else np.uint8)


def write_pgm(path, img: np.ndarray, maxval: int | None = None) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM images are 2-D")
    if maxval is None:
        maxval = 65535 if img.dtype == np.uint16 else 255
    h, w = img.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    raster = img.astype(">u2" if maxval > 255 else "u1").tobytes()
    Path(path).write_bytes(header + raster)


def read_ppm(path) -> np.ndarray:
    """P6 image as (h, w, 3) uint8."""
    raster, w, h, maxval = _read_netpbm(path, b"P6")
    if maxval > 255:
        raise FormatError(f"{path}: 16-bit PPM is not supported")
    if len(raster) < w * h * 3:
        raise FormatError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8, count=w * h * 3).reshape(h, w, 3).copy()


def write_ppm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("PPM images are (h, w, 3)")
    h, w, _ = img.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + img.astype(np.uint8).tobytes())
