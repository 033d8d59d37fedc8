"""Ordinary least squares with an intercept, solved in closed form."""

def read_matrix(path):
    with open(path) as f:
        return [[float(v) for v in line.rstrip("\n").split(",")] for line in f if line.strip()]

x_train = read_matrix("input/x_train.csv")
y_train = [row[0] for row in read_matrix("input/y_train.csv")]
x_test = read_matrix("input/x_test.csv")

design = [[1.0] + row for row in x_train]
k = len(design[0])
ata = [[sum(r[i] * r[j] for r in design) for j in range(k)] for i in range(k)]
aty = [sum(r[i] * y for r, y in zip(design, y_train)) for i in range(k)]

# Gaussian elimination with partial pivoting on [ata | aty].
m = [ata[i] + [aty[i]] for i in range(k)]
for col in range(k):
    pivot = max(range(col, k), key=lambda r: abs(m[r][col]))
    m[col], m[pivot] = m[pivot], m[col]
    for r in range(col + 1, k):
        factor = m[r][col] / m[col][col]
        for c in range(col, k + 1):
            m[r][c] -= factor * m[col][c]
w = [0.0] * k
for i in reversed(range(k)):
    w[i] = (m[i][k] - sum(m[i][j] * w[j] for j in range(i + 1, k))) / m[i][i]

with open("output/predictions.csv", "w") as f:
    for row in x_test:
        f.write(repr(w[0] + sum(a * b for a, b in zip(w[1:], row))) + "\n")
print("coefficients:", [round(v, 4) for v in w])
