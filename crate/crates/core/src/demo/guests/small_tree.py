"""A depth-5 regression tree grown by greedy variance reduction."""

MAX_DEPTH = 5
MIN_LEAF = 5

def read_matrix(path):
    with open(path) as f:
        return [[float(v) for v in line.rstrip("\n").split(",")] for line in f if line.strip()]

X = read_matrix("input/x_train.csv")
y = [row[0] for row in read_matrix("input/y_train.csv")]
x_test = read_matrix("input/x_test.csv")
n_features = len(X[0])


def build(idx, depth):
    n = len(idx)
    total = sum(y[i] for i in idx)
    mean = total / n
    if depth == MAX_DEPTH or n < 2 * MIN_LEAF:
        return mean
    total_sq = sum(y[i] * y[i] for i in idx)
    parent = total_sq - total * total / n
    best = None
    for f in range(n_features):
        order = sorted(idx, key=lambda i: X[i][f])
        left = left_sq = 0.0
        for pos in range(n - 1):
            v = y[order[pos]]
            left += v
            left_sq += v * v
            nl, nr = pos + 1, n - pos - 1
            a, b = X[order[pos]][f], X[order[pos + 1]][f]
            if nl < MIN_LEAF or nr < MIN_LEAF or a == b:
                continue
            right = total - left
            sse = (left_sq - left * left / nl) + ((total_sq - left_sq) - right * right / nr)
            if best is None or sse < best[0]:
                best = (sse, f, (a + b) / 2)
    if best is None or best[0] >= parent - 1e-9:
        return mean
    _, f, t = best
    lo = [i for i in idx if X[i][f] <= t]
    hi = [i for i in idx if X[i][f] > t]
    return (f, t, build(lo, depth + 1), build(hi, depth + 1))


def predict(node, row):
    while isinstance(node, tuple):
        f, t, lo, hi = node
        node = lo if row[f] <= t else hi
    return node


tree = build(list(range(len(X))), 0)
with open("output/predictions.csv", "w") as f:
    for row in x_test:
        f.write(repr(predict(tree, row)) + "\n")
print("tree built on", len(X), "rows")
