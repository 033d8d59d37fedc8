"""Writes each image as an 8x8 block of rows instead of one flat vector."""
import json

meta = json.load(open("input/meta.json"))
height, width = meta["image_shape"]

for name in ("x_train", "x_test"):
    with open("input/%s.csv" % name) as src, open("output/%s_out.csv" % name, "w") as dst:
        for line in src:
            values = line.rstrip("\n").split(",")
            for r in range(height):
                dst.write(",".join(values[r * width:(r + 1) * width]) + "\n")
