//! Binary-split trees shared by every tree-based learner.
//!
//! Node impurity is tracked in count-weighted form computed from the running
//! sums `n`, `s = Σy` and `q = Σy²`:
//!
//! * Gini (targets in {0,1}): `n · 2p(1-p) = 2(s - s²/n)`
//! * squared error: `Σ(y - ȳ)² = q - s²/n`
//!
//! so one prefix-sum scan serves both criteria.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Gini,
    SquaredError,
}

impl Criterion {
    fn weighted_impurity(self, n: f64, s: f64, q: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        let v = match self {
            Criterion::Gini => 2.0 * (s - s * s / n),
            Criterion::SquaredError => q - s * s / n,
        };
        v.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Count-weighted impurity decrease of this split, divided by the
        /// number of samples at the root.
        impurity_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    /// Count-weighted root impurity divided by root sample count.
    pub root_impurity: f64,
}

impl Tree {
    /// Single-leaf tree.
    pub fn leaf(value: f64, n_samples: usize, n_features: usize) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, n_samples }],
            n_features,
            root_impurity: 0.0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Impurity decrease attributed to each feature, summed over splits.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for node in &self.nodes {
            if let Node::Split {
                feature,
                impurity_decrease,
                ..
            } = node
            {
                imp[*feature] += impurity_decrease;
            }
        }
        imp
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// How leaf outputs are computed from the samples that reach them.
#[derive(Debug, Clone, Copy)]
pub enum LeafRule<'a> {
    /// Mean target (positive-class frequency under Gini).
    Mean,
    /// Newton step `Σ target / Σ hessian`.
    Newton { hessians: &'a [f64] },
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all.
    pub max_features: Option<usize>,
}

pub struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    targets: &'a [f64],
    leaf_rule: LeafRule<'a>,
    params: TreeParams,
    n_root: f64,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    split_at: usize,
    gain: f64,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(rows: &'a [Vec<f64>], targets: &'a [f64], leaf_rule: LeafRule<'a>, params: TreeParams) -> Self {
        TreeBuilder {
            rows,
            targets,
            leaf_rule,
            params,
            n_root: 0.0,
            nodes: Vec::new(),
        }
    }

    /// Grows a tree on `indices` (duplicates allowed, as in bootstrap samples).
    pub fn build(mut self, indices: &[usize], rng: &mut Rng) -> Tree {
        let n_features = self.rows.first().map_or(0, Vec::len);
        self.n_root = indices.len() as f64;
        let mut idx = indices.to_vec();
        let (s, q) = self.sums(&idx);
        let root = self
            .params
            .criterion
            .weighted_impurity(idx.len() as f64, s, q);
        self.grow(&mut idx, 0, rng);
        Tree {
            nodes: self.nodes,
            n_features,
            root_impurity: if self.n_root > 0.0 { root / self.n_root } else { 0.0 },
        }
    }

    fn sums(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(s, q), &i| {
            let y = self.targets[i];
            (s + y, q + y * y)
        })
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        match self.leaf_rule {
            LeafRule::Mean => {
                if idx.is_empty() {
                    0.0
                } else {
                    idx.iter().map(|&i| self.targets[i]).sum::<f64>() / idx.len() as f64
                }
            }
            LeafRule::Newton { hessians } => {
                let num: f64 = idx.iter().map(|&i| self.targets[i]).sum();
                let den: f64 = idx.iter().map(|&i| hessians[i]).sum();
                num / den.max(1e-12)
            }
        }
    }

    fn push_leaf(&mut self, idx: &[usize]) -> usize {
        let value = self.leaf_value(idx);
        self.nodes.push(Node::Leaf {
            value,
            n_samples: idx.len(),
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let n = idx.len();
        let (s, q) = self.sums(idx);
        let impurity = self.params.criterion.weighted_impurity(n as f64, s, q);
        let pure = match self.params.criterion {
            Criterion::Gini => s == 0.0 || s == n as f64,
            Criterion::SquaredError => impurity <= 1e-14 * n as f64,
        };
        if depth >= self.params.max_depth || pure || n < 2 * self.params.min_samples_leaf.max(1) {
            return self.push_leaf(idx);
        }
        let Some(best) = self.best_split(idx, impurity, rng) else {
            return self.push_leaf(idx);
        };

        idx.sort_by(|&a, &b| self.rows[a][best.feature].total_cmp(&self.rows[b][best.feature]));
        let slot = self.nodes.len();
        // placeholder, patched once both children exist
        self.nodes.push(Node::Leaf {
            value: 0.0,
            n_samples: n,
        });
        let (left_idx, right_idx) = idx.split_at_mut(best.split_at);
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            n_samples: n,
            impurity_decrease: best.gain.max(0.0) / self.n_root,
        };
        slot
    }

    fn best_split(&self, idx: &[usize], parent: f64, rng: &mut Rng) -> Option<Candidate> {
        let m = self.rows[idx[0]].len();
        let features: Vec<usize> = match self.params.max_features {
            Some(k) if k < m => {
                let mut f = index::sample(rng, m, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..m).collect(),
        };
        let min_leaf = self.params.min_samples_leaf.max(1);
        let n = idx.len();
        let (s_total, q_total) = self.sums(idx);
        let crit = self.params.criterion;

        let mut best: Option<Candidate> = None;
        let mut order = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
            let (mut s_left, mut q_left) = (0.0, 0.0);
            for k in 0..n - 1 {
                let y = self.targets[order[k]];
                s_left += y;
                q_left += y * y;
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < min_leaf {
                    continue;
                }
                if n_right < min_leaf {
                    break;
                }
                let a = self.rows[order[k]][f];
                let b = self.rows[order[k + 1]][f];
                if a == b {
                    continue;
                }
                let left = crit.weighted_impurity(n_left as f64, s_left, q_left);
                let right = crit.weighted_impurity(n_right as f64, s_total - s_left, q_total - q_left);
                let gain = parent - left - right;
                if best.as_ref().is_none_or(|c| gain > c.gain) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        split_at: n_left,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn gini_params(max_depth: usize) -> TreeParams {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth,
            min_samples_leaf: 1,
            max_features: None,
        }
    }

    #[test]
    fn xor_needs_depth_two() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = vec![0.0, 1.0, 1.0, 0.0];
        let t = TreeBuilder::new(&rows, &y, LeafRule::Mean, gini_params(2)).build(&[0, 1, 2, 3], &mut seeded(0));
        for (r, target) in rows.iter().zip(&y) {
            assert_eq!(t.predict(r), *target);
        }
        let shallow =
            TreeBuilder::new(&rows, &y, LeafRule::Mean, gini_params(1)).build(&[0, 1, 2, 3], &mut seeded(0));
        assert!(rows.iter().all(|r| shallow.predict(r) == 0.5));
    }

    #[test]
    fn importance_conservation() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i * 7 % 13) as f64, (i * 3 % 5) as f64, (i % 2) as f64])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| if r[0] + 2.0 * r[1] > 9.0 { 1.0 } else { 0.0 })
            .collect();
        let idx: Vec<usize> = (0..40).collect();
        let t = TreeBuilder::new(&rows, &y, LeafRule::Mean, gini_params(4)).build(&idx, &mut seeded(1));

        // total decrease = root impurity minus leaf impurities, computed by routing samples
        let mut leaf_members: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for (r, &target) in rows.iter().zip(&y) {
            let mut i = 0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } = &t.nodes[i]
            {
                i = if r[*feature] <= *threshold { *left } else { *right };
            }
            leaf_members.entry(i).or_default().push(target);
        }
        let leaf_total: f64 = leaf_members
            .values()
            .map(|ys| {
                let p = ys.iter().sum::<f64>() / ys.len() as f64;
                ys.len() as f64 * 2.0 * p * (1.0 - p)
            })
            .sum::<f64>()
            / 40.0;
        let total = t.root_impurity - leaf_total;
        let by_feature: f64 = t.feature_importance().iter().sum();
        assert!((total - by_feature).abs() < 1e-9, "{total} vs {by_feature}");
    }

    #[test]
    fn min_samples_leaf_respected() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let params = TreeParams {
            min_samples_leaf: 5,
            ..gini_params(8)
        };
        let idx: Vec<usize> = (0..20).collect();
        let t = TreeBuilder::new(&rows, &y, LeafRule::Mean, params).build(&idx, &mut seeded(0));
        for n in &t.nodes {
            if let Node::Leaf { n_samples, .. } = n {
                assert!(*n_samples >= 5);
            }
        }
    }

    #[test]
    fn constant_feature_never_split() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i >= 5) as u8 as f64).collect();
        let idx: Vec<usize> = (0..10).collect();
        let t = TreeBuilder::new(&rows, &y, LeafRule::Mean, gini_params(3)).build(&idx, &mut seeded(0));
        assert_eq!(t.feature_importance()[0], 0.0);
        assert!(t.feature_importance()[1] > 0.0);
    }

    #[test]
    fn newton_leaf_value() {
        let rows = vec![vec![0.0], vec![0.0]];
        let g = vec![0.5, 0.25];
        let h = vec![0.25, 0.25];
        let params = TreeParams {
            criterion: Criterion::SquaredError,
            ..gini_params(2)
        };
        let t = TreeBuilder::new(&rows, &g, LeafRule::Newton { hessians: &h }, params).build(&[0, 1], &mut seeded(0));
        assert_eq!(t.predict(&[0.0]), 1.5);
    }
}
