//! Fixture generators shared by the benchmarks.

use crowdml_core::dataset::{Dataset, LabelVector, Matrix, SplitMix64, TaskKind};

/// `n` rows of `d` uniform features with a noisy nonlinear target.
pub fn regression_data(n: usize, d: usize, seed: u64) -> (Matrix, LabelVector) {
    let mut rng = SplitMix64::new(seed);
    let mut values = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.next_f64()).collect();
        let target = row.iter().enumerate().map(|(j, v)| (j as f64 + 1.0) * v).sum::<f64>()
            + if row[0] > 0.5 { 3.0 } else { 0.0 }
            + 0.1 * rng.next_normal();
        values.extend(row);
        y.push(target);
    }
    (
        Matrix::new(n, d, values).expect("shape"),
        LabelVector::continuous(y).expect("finite"),
    )
}

pub fn regression_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let (x, y) = regression_data(n, d, seed);
    Dataset::new(x, y, TaskKind::Regression, None).expect("dataset")
}

/// Paired true/predicted class labels over `k` classes, mostly agreeing.
pub fn class_pairs(n: usize, k: u32, seed: u64) -> (LabelVector, LabelVector) {
    let mut rng = SplitMix64::new(seed);
    let truth: Vec<u32> = (0..n).map(|_| rng.below(k as u64) as u32).collect();
    let pred: Vec<u32> = truth
        .iter()
        .map(|&c| if rng.next_f64() < 0.8 { c } else { rng.below(k as u64) as u32 })
        .collect();
    (LabelVector::from_classes(&truth), LabelVector::from_classes(&pred))
}
