use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;

/// Stored exemplars. Neighbors are ranked by squared Euclidean distance with
/// ties going to the lower exemplar index; a tied vote goes to the lowest
/// class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub exemplars: Matrix,
    pub classes: Vec<u32>,
}

impl KnnModel {
    pub fn predict_row(&self, row: &[f64]) -> u32 {
        let mut dist: Vec<(f64, usize)> = self
            .exemplars
            .row_iter()
            .enumerate()
            .map(|(i, e)| {
                let d: f64 = e.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.k.min(dist.len());
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_dist);
        }
        let mut votes: Vec<(u32, usize)> = Vec::new();
        for &(_, i) in &dist[..k] {
            let c = self.classes[i];
            match votes.iter_mut().find(|(class, _)| *class == c) {
                Some(v) => v.1 += 1,
                None => votes.push((c, 1)),
            }
        }
        votes
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(c, _)| c)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<u32> {
        x.row_iter().map(|r| self.predict_row(r)).collect()
    }
}
