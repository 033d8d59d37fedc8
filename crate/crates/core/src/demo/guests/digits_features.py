"""2x2 block means, optionally followed by extra summary features.

DIMS selects the output width: 16 (block means only), 20 or 21.
"""
import json

DIMS = __DIMS__

meta = json.load(open("input/meta.json"))
height, width = meta["image_shape"]


def read_matrix(path):
    with open(path) as f:
        return [[float(v) for v in line.rstrip("\n").split(",")] for line in f if line.strip()]


def features(row):
    px = lambda r, c: row[r * width + c]
    out = [
        (px(r, c) + px(r, c + 1) + px(r + 1, c) + px(r + 1, c + 1)) / 4.0
        for r in range(0, height, 2)
        for c in range(0, width, 2)
    ]
    ink = sum(row) or 1.0
    extra = [
        sum(px(r, c) * r for r in range(height) for c in range(width)) / ink,
        sum(px(r, c) * c for r in range(height) for c in range(width)) / ink,
        sum(row[: len(row) // 2]) / ink,
        sum(px(r, c) for r in range(height) for c in range(width // 2)) / ink,
        ink / len(row),
    ]
    return (out + extra)[:DIMS]


for name in ("x_train", "x_test"):
    rows = read_matrix("input/%s.csv" % name)
    with open("output/%s_out.csv" % name, "w") as f:
        for row in rows:
            f.write(",".join(repr(v) for v in features(row)) + "\n")
print("wrote", DIMS, "features per image")
