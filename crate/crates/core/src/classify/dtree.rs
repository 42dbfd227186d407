use serde::{Deserialize, Serialize};

use super::{argmax_label, ClassifyError, FeatureVector, LabeledSample, Prediction};
use crate::ingest::Label;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Weight each class by `n / (classes_present * n_c)`.
    pub balanced: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 16, min_samples_leaf: 1, balanced: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case", bound = "")]
pub enum TreeNode<S: Scalar> {
    Leaf { label: Label, distribution: [f64; Label::COUNT] },
    /// `x[dim] <= threshold` goes left.
    Split { dim: usize, threshold: S, left: usize, right: usize },
}

/// Gini-split tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<S: Scalar> {
    pub params: TreeParams,
    pub seed: u64,
    pub nodes: Vec<TreeNode<S>>,
}

impl<S: Scalar> DecisionTree<S> {
    pub fn depth(&self) -> usize {
        fn go<S: Scalar>(nodes: &[TreeNode<S>], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

fn gini(w: &[f64; Label::COUNT]) -> f64 {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - w.iter().map(|x| (x / total) * (x / total)).sum::<f64>()
}

struct Best<S> {
    gain: f64,
    dim: usize,
    threshold: S,
}

struct Trainer<'a, S: Scalar> {
    rows: Vec<&'a [S]>,
    class: Vec<usize>,
    weight: [f64; Label::COUNT],
    params: &'a TreeParams,
    nodes: Vec<TreeNode<S>>,
}

impl<S: Scalar> Trainer<'_, S> {
    fn class_weights(&self, idx: &[usize]) -> [f64; Label::COUNT] {
        let mut w = [0.0; Label::COUNT];
        for &i in idx {
            w[self.class[i]] += self.weight[self.class[i]];
        }
        w
    }

    fn leaf(&mut self, w: &[f64; Label::COUNT]) -> usize {
        let total: f64 = w.iter().sum();
        let mut distribution = [0.0; Label::COUNT];
        if total > 0.0 {
            for c in 0..Label::COUNT {
                distribution[c] = w[c] / total;
            }
        }
        self.nodes.push(TreeNode::Leaf { label: argmax_label(&distribution), distribution });
        self.nodes.len() - 1
    }

    /// Lowest dimension, then lowest threshold, among the candidates with the largest gain.
    fn best_split(&self, idx: &[usize], parent: &[f64; Label::COUNT]) -> Option<Best<S>> {
        let total: f64 = parent.iter().sum();
        let parent_gini = gini(parent);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let dims = self.rows[idx[0]].len();
        let mut best: Option<Best<S>> = None;
        let mut order = idx.to_vec();
        for d in 0..dims {
            order.sort_by(|&a, &b| self.rows[a][d].partial_cmp(&self.rows[b][d]).unwrap().then(a.cmp(&b)));
            let mut left = [0.0; Label::COUNT];
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.class[i]] += self.weight[self.class[i]];
                let (a, b) = (self.rows[i][d], self.rows[order[pos + 1]][d]);
                let n_left = pos + 1;
                if a >= b || n_left < min_leaf || order.len() - n_left < min_leaf {
                    continue;
                }
                let mut right = *parent;
                for c in 0..Label::COUNT {
                    right[c] -= left[c];
                }
                let wl: f64 = left.iter().sum();
                let wr = total - wl;
                let gain = parent_gini - (wl / total) * gini(&left) - (wr / total) * gini(&right);
                if gain > best.as_ref().map_or(1e-12, |b| b.gain) {
                    let two = S::one() + S::one();
                    let mut t = a + (b - a) / two;
                    if t >= b {
                        t = a;
                    }
                    best = Some(Best { gain, dim: d, threshold: t });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let w = self.class_weights(&idx);
        let pure = w.iter().filter(|x| **x > 0.0).count() <= 1;
        if pure || depth >= self.params.max_depth || idx.len() < 2 * self.params.min_samples_leaf.max(1) {
            return self.leaf(&w);
        }
        let Some(best) = self.best_split(&idx, &w) else {
            return self.leaf(&w);
        };
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { label: Label::Normal, distribution: [0.0; Label::COUNT] });
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.rows[i][best.dim] <= best.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = TreeNode::Split { dim: best.dim, threshold: best.threshold, left, right };
        slot
    }
}

pub fn dtree_train<S: Scalar>(
    train: &[LabeledSample<S>],
    params: &TreeParams,
    seed: u64,
) -> Result<DecisionTree<S>, ClassifyError> {
    if train.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    let class: Vec<usize> = train.iter().map(|s| s.label.index()).collect();
    let mut weight = [1.0; Label::COUNT];
    if params.balanced {
        let mut counts = [0usize; Label::COUNT];
        class.iter().for_each(|c| counts[*c] += 1);
        let present = counts.iter().filter(|c| **c > 0).count() as f64;
        for c in 0..Label::COUNT {
            if counts[c] > 0 {
                weight[c] = train.len() as f64 / (present * counts[c] as f64);
            }
        }
    }
    let mut t = Trainer {
        rows: train.iter().map(|s| s.features.as_slice()).collect(),
        class,
        weight,
        params,
        nodes: Vec::new(),
    };
    t.grow((0..train.len()).collect(), 0);
    Ok(DecisionTree { params: params.clone(), seed, nodes: t.nodes })
}

pub fn dtree_predict<S: Scalar>(tree: &DecisionTree<S>, features: &FeatureVector<S>) -> Prediction {
    let x = features.as_slice();
    let mut i = 0;
    loop {
        match &tree.nodes[i] {
            TreeNode::Leaf { label, distribution } => return Prediction { label: *label, distribution: *distribution },
            TreeNode::Split { dim, threshold, left, right } => i = if x[*dim] <= *threshold { *left } else { *right },
        }
    }
}
