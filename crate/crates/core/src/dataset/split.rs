use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, LabelVector, Matrix, Result};

/// SplitMix64 (Steele, Lea & Flood). Fixed here rather than delegated to a
/// general-purpose RNG crate so that shuffles are reproducible by any
/// implementation that follows these few lines.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..bound` by rejection: draws at or above the
    /// largest multiple of `bound` are discarded.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = (u64::MAX / bound) * bound;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// In-place Fisher-Yates, walking `i` from the end down to 1 and swapping
    /// with `j = below(i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

fn default_shuffle() -> bool {
    true
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.test_fraction > 0.0 && self.test_fraction < 1.0 {
            Ok(())
        } else {
            Err(DataError::InvalidFraction(self.test_fraction))
        }
    }

    /// `max(1, floor(test_fraction * n))`. A 1e-9 slack absorbs binary
    /// representation error so that e.g. 0.29 * 100 yields 29.
    pub fn test_size(&self, n: usize) -> usize {
        let raw = (self.test_fraction * n as f64 + 1e-9).floor() as usize;
        raw.clamp(1, n.saturating_sub(1).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub x_train: Matrix,
    pub y_train: LabelVector,
    pub x_test: Matrix,
    pub y_test: LabelVector,
    /// Source row of each training row, in order.
    pub train_rows: Vec<usize>,
    /// Source row of each test row, in order.
    pub test_rows: Vec<usize>,
}

/// Permutes rows (when `shuffle` is set) and takes the last
/// `test_size(n)` permuted rows as the test set.
pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<DataSplit> {
    spec.validate()?;
    let n = ds.rows();
    if n < 2 {
        return Err(DataError::TooFewRows(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if spec.shuffle {
        SplitMix64::new(spec.seed).shuffle(&mut order);
    }
    let n_test = spec.test_size(n);
    let (train_rows, test_rows) = order.split_at(n - n_test);
    Ok(DataSplit {
        x_train: ds.features.select_rows(train_rows),
        y_train: ds.labels.select(train_rows),
        x_test: ds.features.select_rows(test_rows),
        y_test: ds.labels.select(test_rows),
        train_rows: train_rows.to_vec(),
        test_rows: test_rows.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskKind;
    use proptest::prelude::*;

    fn dataset(n: usize) -> Dataset {
        let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let y = LabelVector::continuous((0..n).map(|i| i as f64 * 10.0).collect()).unwrap();
        Dataset::new(x, y, TaskKind::Regression, None).unwrap()
    }

    fn spec(test_fraction: f64, seed: u64) -> SplitSpec {
        SplitSpec {
            test_fraction,
            seed,
            shuffle: true,
        }
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0 from the published reference implementation.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn ten_rows_twenty_percent() {
        for seed in [0, 1, 42, u64::MAX] {
            let s = split_dataset(&dataset(10), &spec(0.2, seed)).unwrap();
            assert_eq!(s.x_train.rows(), 8);
            assert_eq!(s.x_test.rows(), 2);
            assert_eq!(s.y_test.len(), 2);
        }
    }

    #[test]
    fn deterministic_for_same_seed() {
        let a = split_dataset(&dataset(50), &spec(0.3, 9)).unwrap();
        let b = split_dataset(&dataset(50), &spec(0.3, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_single_row_and_bad_fraction() {
        assert!(matches!(
            split_dataset(&dataset(1), &spec(0.5, 0)),
            Err(DataError::TooFewRows(1))
        ));
        assert!(split_dataset(&dataset(10), &spec(0.0, 0)).is_err());
        assert!(split_dataset(&dataset(10), &spec(1.0, 0)).is_err());
    }

    #[test]
    fn tiny_fraction_still_yields_one_test_row() {
        let s = split_dataset(&dataset(10), &spec(0.01, 3)).unwrap();
        assert_eq!(s.test_rows.len(), 1);
    }

    #[test]
    fn unshuffled_split_takes_tail() {
        let s = split_dataset(
            &dataset(4),
            &SplitSpec {
                test_fraction: 0.5,
                seed: 0,
                shuffle: false,
            },
        )
        .unwrap();
        assert_eq!(s.train_rows, vec![0, 1]);
        assert_eq!(s.test_rows, vec![2, 3]);
    }

    #[test]
    fn labels_follow_rows() {
        let s = split_dataset(&dataset(20), &spec(0.25, 5)).unwrap();
        for (i, &r) in s.test_rows.iter().enumerate() {
            assert_eq!(s.y_test.values()[i], r as f64 * 10.0);
            assert_eq!(s.x_test.row(i)[0], r as f64);
        }
    }

    #[test]
    fn different_seeds_give_different_permutations() {
        let mut meta = SplitMix64::new(2024);
        for _ in 0..100 {
            let (a, b) = (meta.next_u64(), meta.next_u64());
            let n = 10 + meta.below(40) as usize;
            let sa = split_dataset(&dataset(n), &spec(0.3, a)).unwrap();
            let sb = split_dataset(&dataset(n), &spec(0.3, b)).unwrap();
            let pa: Vec<usize> = sa.train_rows.iter().chain(&sa.test_rows).copied().collect();
            let pb: Vec<usize> = sb.train_rows.iter().chain(&sb.test_rows).copied().collect();
            assert_ne!(pa, pb, "seeds {a} and {b} produced identical permutations");
        }
    }

    proptest! {
        #[test]
        fn split_partitions_rows(n in 2usize..=500, seed in any::<u64>(), frac in 0.01f64..0.99) {
            let s = split_dataset(&dataset(n), &spec(frac, seed)).unwrap();
            let mut all: Vec<usize> = s.train_rows.iter().chain(&s.test_rows).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.test_rows.len(), spec(frac, seed).test_size(n));
            prop_assert!(!s.train_rows.is_empty());
        }
    }
}
