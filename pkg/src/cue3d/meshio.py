"""OBJ and PLY reading/writing for :class:`~cue3d.core.TriMesh`.

Only the subset needed for evaluation is supported: positions, optional
per-vertex RGB, and polygonal faces (fan-triangulated on load).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import TriMesh
from .errors import ParseError

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


def load_mesh(path) -> TriMesh:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return _load_obj(path)
    if suffix == ".ply":
        return _load_ply(path)
    raise ParseError(f"unsupported mesh format: {path.suffix}")


def save_mesh(mesh: TriMesh, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        _save_obj(mesh, path)
    elif suffix == ".ply":
        _save_ply(mesh, path)
    else:
        raise ParseError(f"unsupported mesh format: {path.suffix}")


def _build(vertices, polygons, colors) -> TriMesh:
    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    if isinstance(polygons, np.ndarray):
        faces = polygons.reshape(-1, 3)
    else:
        tris = []
        for poly in polygons:
            for k in range(1, len(poly) - 1):
                tris.append((poly[0], poly[k], poly[k + 1]))
        faces = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    if len(faces):
        if faces.min() < 0 or faces.max() >= len(verts):
            raise ParseError("face index out of range")
        ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
        faces = faces[ok]
    return TriMesh(verts, faces, colors)


def _load_obj(path: Path) -> TriMesh:
    verts, colors, polys = [], [], []
    has_color = True
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                    if len(parts) >= 7:
                        colors.append([float(x) for x in parts[4:7]])
                    else:
                        has_color = False
                elif parts[0] == "f":
                    idx = []
                    for tok in parts[1:]:
                        i = int(tok.split("/")[0])
                        idx.append(i - 1 if i > 0 else len(verts) + i)
                    polys.append(idx)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    c = np.asarray(colors) if has_color and colors and len(colors) == len(verts) else None
    if c is not None and c.max() > 1.0:
        c = c / 255.0
    return _build(verts, polys, c)


def _save_obj(mesh: TriMesh, path: Path) -> None:
    lines = []
    if mesh.vertex_colors is not None:
        for v, c in zip(mesh.vertices, mesh.vertex_colors):
            lines.append("v %.17g %.17g %.17g %.6f %.6f %.6f" % (*v, *c))
    else:
        for v in mesh.vertices:
            lines.append("v %.17g %.17g %.17g" % tuple(v))
    for f in mesh.faces + 1:
        lines.append("f %d %d %d" % tuple(f))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_ply_header(fh):
    if fh.readline().strip() != b"ply":
        raise ParseError("not a PLY file")
    fmt = None
    elements = []
    while True:
        raw = fh.readline()
        if not raw:
            raise ParseError("truncated PLY header")
        parts = raw.decode("ascii", errors="replace").split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element")
            if parts[1] == "list":
                elements[-1][2].append((parts[4], ("list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]])))
            else:
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
        elif parts[0] == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise ParseError(f"unsupported PLY format {fmt}")
    return fmt, elements


def _load_ply(path: Path) -> TriMesh:
    with open(path, "rb") as fh:
        try:
            fmt, elements = _parse_ply_header(fh)
        except KeyError as exc:
            raise ParseError(f"unknown PLY property type {exc}") from exc
        body = fh.read()
    data = {}
    if fmt == "ascii":
        tokens = iter(body.split())
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                row = {}
                for pname, ptype in props:
                    if isinstance(ptype, tuple):
                        n = int(next(tokens))
                        row[pname] = [int(next(tokens)) for _ in range(n)]
                    else:
                        row[pname] = float(next(tokens))
                rows.append(row)
            data[name] = rows
        vrows = data.get("vertex", [])
        verts = [[r["x"], r["y"], r["z"]] for r in vrows]
        colors = None
        if vrows and all(k in vrows[0] for k in ("red", "green", "blue")):
            colors = np.asarray([[r["red"], r["green"], r["blue"]] for r in vrows]) / 255.0
        polys = [r.get("vertex_indices", r.get("vertex_index", [])) for r in data.get("face", [])]
        return _build(verts, polys, colors)

    endian = "<" if fmt == "binary_little_endian" else ">"
    offset = 0
    verts = np.zeros((0, 3))
    colors = None
    polys: list = []
    for name, count, props in elements:
        if all(not isinstance(t, tuple) for _, t in props):
            dtype = np.dtype([(p, endian + t) for p, t in props])
            arr = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
            offset += dtype.itemsize * count
            if name == "vertex":
                verts = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
                if all(c in arr.dtype.names for c in ("red", "green", "blue")):
                    rgb = np.stack([arr["red"], arr["green"], arr["blue"]], axis=1).astype(np.float64)
                    colors = rgb / 255.0 if arr["red"].dtype.kind in "iu" else rgb
            continue
        if name == "face" and len(props) == 1 and count:
            _, ctype, itype = props[0][1]
            tri = np.dtype([("n", endian + ctype), ("idx", endian + itype, (3,))])
            if offset + tri.itemsize * count <= len(body):
                arr = np.frombuffer(body, dtype=tri, count=count, offset=offset)
                if np.all(arr["n"] == 3):
                    polys = arr["idx"].astype(np.int64)
                    offset += tri.itemsize * count
                    continue
        # Elements with list properties need a sequential walk.
        rows = []
        for _ in range(count):
            row = {}
            for pname, ptype in props:
                if isinstance(ptype, tuple):
                    _, ctype, itype = ptype
                    cdt = np.dtype(endian + ctype)
                    n = int(np.frombuffer(body, cdt, 1, offset)[0])
                    offset += cdt.itemsize
                    idt = np.dtype(endian + itype)
                    row[pname] = np.frombuffer(body, idt, n, offset).tolist()
                    offset += idt.itemsize * n
                else:
                    dt = np.dtype(endian + ptype)
                    row[pname] = np.frombuffer(body, dt, 1, offset)[0]
                    offset += dt.itemsize
            rows.append(row)
        if name == "face":
            polys = [r.get("vertex_indices", r.get("vertex_index", [])) for r in rows]
    return _build(verts, polys, colors)


def _save_ply(mesh: TriMesh, path: Path) -> None:
    has_c = mesh.vertex_colors is not None
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if has_c:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += [f"element face {mesh.n_faces}", "property list uchar int vertex_indices", "end_header"]
    vfields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
    if has_c:
        vfields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    vbuf = np.zeros(mesh.n_vertices, dtype=vfields)
    for i, axis in enumerate("xyz"):
        vbuf[axis] = mesh.vertices[:, i]
    if has_c:
        rgb = np.round(mesh.vertex_colors * 255.0).astype(np.uint8)
        for i, ch in enumerate(("red", "green", "blue")):
            vbuf[ch] = rgb[:, i]
    fbuf = np.zeros(mesh.n_faces, dtype=[("n", "u1"), ("idx", "<i4", (3,))])
    fbuf["n"] = 3
    fbuf["idx"] = mesh.faces
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(vbuf.tobytes())
        fh.write(fbuf.tobytes())

