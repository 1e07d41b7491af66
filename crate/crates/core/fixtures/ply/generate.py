"""Writes the cube fixtures with plyfile, independently of the Rust writer."""
import json

import numpy as np
from plyfile import PlyData, PlyElement

verts = [(x, y, z) for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
tris = []
for a, b, c, d in quads:
    tris += [(a, b, c), (a, c, d)]

vertex = np.array(verts, dtype=[("x", "f4"), ("y", "f4"), ("z", "f4")])
face = np.empty(len(tris), dtype=[("vertex_indices", "i4", (3,))])
face["vertex_indices"] = tris

elements = [PlyElement.describe(vertex, "vertex"), PlyElement.describe(face, "face", len_types={"vertex_indices": "u1"})]
PlyData(elements, text=True, comments=["unit cube"]).write("cube_ascii.ply")
PlyData(elements, text=False, byte_order="<", comments=["unit cube"]).write("cube_binary_le.ply")

back = PlyData.read("cube_binary_le.ply")
with open("cube_expected.json", "w") as f:
    json.dump({
        "vertex": [[float(v) for v in row] for row in back["vertex"].data.tolist()],
        "face": [list(map(int, r[0])) for r in back["face"].data.tolist()],
    }, f)
    f.write("\n")
