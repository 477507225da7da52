"""Text formats: XYZ point lists, ASCII PLY (vertex only) and OFF meshes.

Also surface sampling, which turns meshes (e.g. ModelNet40 OFF files) into clouds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud
from .rng import SplitMix64


class ParseError(ValueError):
    pass


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise MeshError("mesh has non-finite vertex coordinates")
        if f.size:
            bad = np.nonzero((f < 0).any(axis=1) | (f >= len(v)).any(axis=1))[0]
            if bad.size:
                raise MeshError(f"face {int(bad[0])} references a vertex outside 0..{len(v) - 1}")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _decode(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return data.decode("utf-8")
    return data


def _finite_floats(tokens, lineno):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"line {lineno}: expected numbers, got {' '.join(tokens)!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ParseError(f"line {lineno}: non-finite value")
    return vals


def parse_xyz(data) -> PointCloud:
    pts = []
    for lineno, line in enumerate(_decode(data).splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tokens = s.split()
        if len(tokens) != 3:
            raise ParseError(f"line {lineno}: expected 3 values, got {len(tokens)}")
        pts.append(_finite_floats(tokens, lineno))
    return PointCloud(np.array(pts, dtype=np.float64).reshape(-1, 3))


def _fmt(v: float) -> str:
    return f"{float(v):.6g}"


def write_xyz(pc: PointCloud) -> bytes:
    return "".join(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n" for x, y, z in pc.points).encode()


def write_ply(pc: PointCloud) -> bytes:
    header = (
        "ply\n"
        "format ascii 1.0\n"
        f"element vertex {pc.count}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "end_header\n"
    )
    return header.encode() + write_xyz(pc)


def parse_ply(data) -> PointCloud:
    """Read the vertex positions of an ASCII PLY file; other elements are skipped."""
    lines = _decode(data).splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("line 1: missing 'ply' magic")
    elements = []  # [name, count, [property names]]
    fmt = None
    i = 1
    while True:
        if i >= len(lines):
            raise ParseError("missing end_header")
        tokens = lines[i].split()
        i += 1
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "end_header":
            break
        if tokens[0] == "format":
            fmt = tokens[1] if len(tokens) > 1 else None
        elif tokens[0] == "element":
            try:
                elements.append([tokens[1], int(tokens[2]), []])
            except (IndexError, ValueError):
                raise ParseError(f"line {i}: malformed element line") from None
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(f"line {i}: property before element")
            elements[-1][2].append(tokens[-1])
    if fmt != "ascii":
        raise ParseError(f"unsupported PLY format {fmt!r}; only ascii is read")
    pts = np.zeros((0, 3))
    for name, count, props in elements:
        body = lines[i : i + count]
        if len(body) < count:
            raise ParseError(f"element {name!r}: expected {count} lines, file ends early")
        if name == "vertex":
            try:
                cols = [props.index(axis) for axis in ("x", "y", "z")]
            except ValueError:
                raise ParseError("vertex element lacks x/y/z properties") from None
            rows = []
            for k, line in enumerate(body):
                tokens = line.split()
                if len(tokens) < len(props):
                    raise ParseError(f"line {i + k + 1}: expected {len(props)} values")
                vals = _finite_floats([tokens[c] for c in cols], i + k + 1)
                rows.append(vals)
            pts = np.array(rows, dtype=np.float64).reshape(-1, 3)
        i += count
    return PointCloud(pts)


def _off_tokens(text: str):
    """Yield (token, lineno) pairs, dropping '#' comments."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        for tok in line.split("#", 1)[0].split():
            yield tok, lineno


def parse_off(data) -> TriMesh:
    """Parse OFF, tolerating the ModelNet40 header quirk ``OFF492 6 0``.

    Polygon faces are fan-triangulated as (v0, vi, vi+1).
    """
    tokens = list(_off_tokens(_decode(data)))
    if not tokens or not tokens[0][0].startswith("OFF"):
        raise ParseError("missing OFF header")
    glued = tokens[0][0][3:]
    pos = 1
    if glued:
        tokens.insert(1, (glued, tokens[0][1]))

    def take_int(what):
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError(f"unexpected end of file reading {what}")
        tok, lineno = tokens[pos]
        pos += 1
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"line {lineno}: {what} must be an integer, got {tok!r}") from None

    nv = take_int("vertex count")
    nf = take_int("face count")
    take_int("edge count")
    if nv < 0 or nf < 0:
        raise ParseError("negative element counts")
    if pos + 3 * nv > len(tokens):
        raise ParseError(f"expected {nv} vertices, file ends early")
    verts = np.empty((nv, 3))
    for k in range(nv):
        chunk = tokens[pos : pos + 3]
        verts[k] = _finite_floats([t for t, _ in chunk], chunk[0][1])
        pos += 3
    tris = []
    for f in range(nf):
        k = take_int(f"face {f} vertex count")
        if k < 3:
            raise ParseError(f"face {f}: needs at least 3 vertices, got {k}")
        idx = [take_int(f"face {f} index") for _ in range(k)]
        for j in idx:
            if not 0 <= j < nv:
                raise MeshError(f"face {f} references vertex {j}, mesh has {nv} vertices")
        for j in range(1, k - 1):
            tris.append((idx[0], idx[j], idx[j + 1]))
    return TriMesh(verts, np.array(tris, dtype=np.int64).reshape(-1, 3))


def write_off(mesh: TriMesh) -> bytes:
    out = [f"OFF\n{len(mesh.vertices)} {len(mesh.faces)} 0\n"]
    out += [f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n" for x, y, z in mesh.vertices]
    out += [f"3 {a} {b} {c}\n" for a, b, c in mesh.faces]
    return "".join(out).encode()


def sample_surface(mesh: TriMesh, n: int, seed: int) -> PointCloud:
    """Area-weighted uniform samples: cumulative-area inversion, then sqrt barycentrics."""
    if n < 1:
        raise MeshError(f"sample count must be >= 1, got {n}")
    areas = mesh.triangle_areas()
    total = areas.sum() if areas.size else 0.0
    if not total > 0:
        raise MeshError("mesh has zero total area")
    cdf = np.cumsum(areas) / total
    rng = SplitMix64(seed)
    u = rng.uniform(3 * n).reshape(n, 3)
    tri = np.searchsorted(cdf, u[:, 0], side="right")
    # zero-area faces have an empty cdf interval; the clamp covers cdf[-1] rounding below 1
    tri = np.minimum(tri, np.nonzero(areas > 0)[0][-1])
    r1 = np.sqrt(u[:, 1:2])
    r2 = u[:, 2:3]
    a, b, c = (mesh.vertices[mesh.faces[tri, k]] for k in range(3))
    pts = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c
    return PointCloud(pts)
