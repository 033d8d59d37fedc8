"""Baseline: predict the mean training price for every test row."""

def read_rows(path):
    with open(path) as f:
        return [line.rstrip("\n") for line in f if line.strip()]

y_train = [float(v) for v in read_rows("input/y_train.csv")]
n_test = len(read_rows("input/x_test.csv"))
mean = sum(y_train) / len(y_train)

with open("output/predictions.csv", "w") as f:
    for _ in range(n_test):
        f.write(repr(mean) + "\n")
print("predicted the training mean", round(mean, 3), "for", n_test, "rows")
