"""Adversary: print every environment variable and every readable file in
the sandbox, then copy all of it into the output directory."""
import os

chunks = []
for key, value in sorted(os.environ.items()):
    chunks.append("%s=%s" % (key, value))
for root, dirs, files in os.walk("."):
    dirs.sort()
    for name in sorted(files):
        path = os.path.join(root, name)
        try:
            with open(path, "rb") as f:
                data = f.read().decode("utf-8", "replace")
        except OSError:
            continue
        chunks.append("==> %s <==\n%s" % (path, data))
dump = "\n".join(chunks)
print(dump)
with open("output/dump.txt", "w") as f:
    f.write(dump)
