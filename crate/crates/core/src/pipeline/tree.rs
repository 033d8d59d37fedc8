//! Greedy CART. Regression splits minimize the summed squared error of the
//! children, classification splits minimize weighted Gini impurity.
//! Candidate thresholds are midpoints between consecutive distinct values and
//! rows with `x <= threshold` go left. Equal gains keep the first candidate
//! found, scanning features and then thresholds in ascending order.

use serde::{Deserialize, Serialize};

use crate::dataset::{Matrix, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub task_kind: TaskKind,
    pub features: usize,
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.row_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    task_kind: TaskKind,
    /// Class ids in ascending order (classification only).
    classes: Vec<u32>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn class_pos(&self, v: f64) -> usize {
        self.classes.binary_search(&(v as u32)).unwrap_or(0)
    }

    /// Impurity scaled by sample count: SSE, or n * Gini.
    fn impurity(&self, rows: &[usize]) -> f64 {
        match self.task_kind {
            TaskKind::Regression => {
                let n = rows.len() as f64;
                let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / n;
                rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum()
            }
            TaskKind::Classification => {
                let mut counts = vec![0usize; self.classes.len()];
                for &r in rows {
                    counts[self.class_pos(self.y[r])] += 1;
                }
                gini_scaled(&counts, rows.len())
            }
        }
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        match self.task_kind {
            TaskKind::Regression => rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64,
            TaskKind::Classification => {
                let mut counts = vec![0usize; self.classes.len()];
                for &r in rows {
                    counts[self.class_pos(self.y[r])] += 1;
                }
                let mut best = 0;
                for (k, &c) in counts.iter().enumerate() {
                    if c > counts[best] {
                        best = k;
                    }
                }
                f64::from(self.classes[best])
            }
        }
    }

    fn best_split(&self, rows: &[usize], parent: f64) -> Option<Candidate> {
        let n = rows.len();
        if n < 2 * self.min_leaf {
            return None;
        }
        let mut best: Option<Candidate> = None;
        let mut order = rows.to_vec();
        for feature in 0..self.x.cols() {
            order.sort_by(|&a, &b| {
                self.x
                    .row(a)[feature]
                    .total_cmp(&self.x.row(b)[feature])
                    .then(a.cmp(&b))
            });
            let value = |i: usize| self.x.row(order[i])[feature];
            match self.task_kind {
                TaskKind::Regression => {
                    let total: f64 = order.iter().map(|&r| self.y[r]).sum();
                    let total_sq: f64 = order.iter().map(|&r| self.y[r] * self.y[r]).sum();
                    let (mut left, mut left_sq) = (0.0, 0.0);
                    for i in 0..n - 1 {
                        let t = self.y[order[i]];
                        left += t;
                        left_sq += t * t;
                        let nl = i + 1;
                        let nr = n - nl;
                        if nl < self.min_leaf || nr < self.min_leaf || value(i) == value(i + 1) {
                            continue;
                        }
                        let right = total - left;
                        let right_sq = total_sq - left_sq;
                        let children = (left_sq - left * left / nl as f64)
                            + (right_sq - right * right / nr as f64);
                        consider(&mut best, feature, (value(i) + value(i + 1)) / 2.0, parent - children);
                    }
                }
                TaskKind::Classification => {
                    let k = self.classes.len();
                    let mut right_counts = vec![0usize; k];
                    for &r in &order {
                        right_counts[self.class_pos(self.y[r])] += 1;
                    }
                    let mut left_counts = vec![0usize; k];
                    for i in 0..n - 1 {
                        let c = self.class_pos(self.y[order[i]]);
                        left_counts[c] += 1;
                        right_counts[c] -= 1;
                        let nl = i + 1;
                        let nr = n - nl;
                        if nl < self.min_leaf || nr < self.min_leaf || value(i) == value(i + 1) {
                            continue;
                        }
                        let children = gini_scaled(&left_counts, nl) + gini_scaled(&right_counts, nr);
                        consider(&mut best, feature, (value(i) + value(i + 1)) / 2.0, parent - children);
                    }
                }
            }
        }
        let min_gain = 1e-12 * parent.abs().max(1e-300);
        best.filter(|c| c.gain > min_gain)
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: self.leaf_value(&rows),
        });
        if depth >= self.max_depth {
            return at;
        }
        let parent = self.impurity(&rows);
        if parent <= 0.0 {
            return at;
        }
        let Some(split) = self.best_split(&rows, parent) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&row| self.x.row(row)[split.feature] <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

fn consider(best: &mut Option<Candidate>, feature: usize, threshold: f64, gain: f64) {
    if best.as_ref().is_none_or(|b| gain > b.gain) {
        *best = Some(Candidate {
            feature,
            threshold,
            gain,
        });
    }
}

fn gini_scaled(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

pub fn fit_tree(
    x: &Matrix,
    y: &[f64],
    task_kind: TaskKind,
    classes: &[u32],
    max_depth: usize,
    min_leaf: usize,
) -> TreeModel {
    let mut builder = Builder {
        x,
        y,
        task_kind,
        classes: classes.to_vec(),
        max_depth,
        min_leaf: min_leaf.max(1),
        nodes: Vec::new(),
    };
    if x.rows() > 0 {
        builder.build((0..x.rows()).collect(), 0);
    } else {
        builder.nodes.push(TreeNode::Leaf { value: 0.0 });
    }
    TreeModel {
        task_kind,
        features: x.cols(),
        nodes: builder.nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SplitMix64;
    use proptest::prelude::*;

    #[test]
    fn step_function_is_learned_exactly() {
        let x = Matrix::new(6, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let y = [1.0, 1.0, 1.0, 9.0, 9.0, 9.0];
        let t = fit_tree(&x, &y, TaskKind::Regression, &[], 3, 1);
        assert_eq!(t.predict(&x), y.to_vec());
        assert_eq!(t.depth(), 1);
        match &t.nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!((*feature, *threshold), (0, 2.5));
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn ties_pick_lowest_feature() {
        // Both columns separate the classes equally well.
        let x = Matrix::new(4, 2, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let t = fit_tree(&x, &y, TaskKind::Classification, &[0, 1], 2, 1);
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let y = [0.0, 10.0, 10.0, 10.0];
        let t = fit_tree(&x, &y, TaskKind::Regression, &[], 5, 2);
        match &t.nodes[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 1.5),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn depth_zero_is_majority_leaf() {
        let x = Matrix::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let t = fit_tree(&x, &[2.0, 1.0, 2.0], TaskKind::Classification, &[1, 2], 0, 1);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(&[0.0]), 2.0);
    }

    fn training_loss(t: &TreeModel, x: &Matrix, y: &[f64]) -> f64 {
        let p = t.predict(x);
        match t.task_kind {
            TaskKind::Regression => p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum(),
            TaskKind::Classification => p.iter().zip(y).filter(|(a, b)| a != b).count() as f64,
        }
    }

    proptest! {
        #[test]
        fn training_loss_non_increasing_in_depth(seed in any::<u64>(), classify in any::<bool>()) {
            let mut rng = SplitMix64::new(seed);
            let n = 40;
            let x = Matrix::new(n, 3, (0..n * 3).map(|_| (rng.next_f64() * 10.0).round()).collect()).unwrap();
            let y: Vec<f64> = (0..n)
                .map(|_| if classify { rng.below(3) as f64 } else { rng.next_normal() * 5.0 })
                .collect();
            let kind = if classify { TaskKind::Classification } else { TaskKind::Regression };
            let classes = [0, 1, 2];
            let mut prev = f64::INFINITY;
            for depth in 0..7 {
                let t = fit_tree(&x, &y, kind, &classes, depth, 1);
                let loss = training_loss(&t, &x, &y);
                prop_assert!(loss <= prev + 1e-9 * prev.abs().max(1.0), "depth {depth}: {loss} > {prev}");
                prev = loss;
            }
        }
    }
}
