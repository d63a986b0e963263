//! Multi-class gradient-boosted trees with second-order exact greedy split
//! finding, and a Gaussian naive Bayes baseline.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkrError};
use crate::features::Layout;
use crate::model::Occupation;

pub const GBM_MAGIC: &str = "WORKR-GBM-1";
pub const NB_MAGIC: &str = "WORKR-NB-1";

const NUM_CLASSES: usize = Occupation::COUNT;

/// Rows with class labels, sharing one column layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMatrix {
    pub layout: Layout,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Occupation>,
}

impl LabeledMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.rows.len() != self.labels.len() {
            return Err(WorkrError::DimensionMismatch {
                expected: self.rows.len(),
                got: self.labels.len(),
            });
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != self.layout.len()) {
            return Err(WorkrError::DimensionMismatch {
                expected: self.layout.len(),
                got: r.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmConfig {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub early_stopping_rounds: usize,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            max_depth: 6,
            min_child_weight: 1.0,
            num_rounds: 200,
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            early_stopping_rounds: 20,
            seed: 1,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_depth >= 1
            && self.min_child_weight >= 0.0
            && self.learning_rate > 0.0
            && self.learning_rate <= 1.0
            && self.lambda >= 0.0
            && self.gamma >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(WorkrError::InvalidConfig(format!(
                "invalid boosting config: {self:?}"
            )))
        }
    }
}

/// `exp(s_k - max) / sum`.
pub fn softmax(scores: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = scores.map(|s| (s - max).exp());
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Gradient and diagonal hessian of the softmax cross-entropy.
pub fn grad_hess(probs: &[f64; NUM_CLASSES], y: usize) -> ([f64; NUM_CLASSES], [f64; NUM_CLASSES]) {
    let mut g = [0.0; NUM_CLASSES];
    let mut h = [0.0; NUM_CLASSES];
    for k in 0..NUM_CLASSES {
        let p = probs[k];
        g[k] = p - if k == y { 1.0 } else { 0.0 };
        h[k] = p * (1.0 - p);
    }
    (g, h)
}

/// Lowest index among the maxima.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: f64,
    },
}

/// A regression tree; node 0 is the root. Rows with `value < threshold`
/// go left. Leaf values are raw Newton weights, before shrinkage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { leaf: weight }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { leaf } => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// `-G / (H + lambda)`.
pub fn leaf_weight(grad: f64, hess: f64, lambda: f64) -> f64 {
    -grad / (hess + lambda)
}

/// Loss reduction of splitting `(G_L+G_R, H_L+H_R)` into the two children.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
        - (gl + gr) * (gl + gr) / (hl + hr + lambda))
        - gamma
}

/// Threshold strictly between two distinct sorted values, so that `lo` goes
/// left and `hi` goes right.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Column-major copy of the rows with each feature's row order sorted by
/// value (ties by row index).
pub struct ColumnIndex {
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    n_rows: usize,
}

impl ColumnIndex {
    pub fn new(rows: &[Vec<f64>]) -> ColumnIndex {
        let n_rows = rows.len();
        let n_features = rows.first().map_or(0, Vec::len);
        let columns: Vec<Vec<f64>> = (0..n_features)
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        ColumnIndex {
            columns,
            order,
            n_rows,
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    gl: f64,
    hl: f64,
}

const NONE: usize = usize::MAX;

/// Grows one tree level by level. Every level makes one sorted pass per
/// feature that scores all candidate thresholds of all open nodes at once.
pub fn grow_tree(index: &ColumnIndex, grad: &[f64], hess: &[f64], cfg: &GbmConfig) -> Result<Tree> {
    if index.n_rows == 0 || grad.len() != index.n_rows || hess.len() != index.n_rows {
        return Err(WorkrError::DimensionMismatch {
            expected: index.n_rows,
            got: grad.len().min(hess.len()),
        });
    }
    let lambda = cfg.lambda;
    let mut nodes: Vec<Node> = vec![Node::Leaf { leaf: 0.0 }];
    // per node: (G, H, depth)
    let mut stats: Vec<(f64, f64, usize)> = vec![(grad.iter().sum(), hess.iter().sum(), 0)];
    let mut node_of: Vec<usize> = vec![0; index.n_rows];
    let mut open: Vec<usize> = vec![0];

    while !open.is_empty() {
        // nodes at max depth become leaves without a scan
        let (splittable, terminal): (Vec<usize>, Vec<usize>) =
            open.iter().partition(|&&n| stats[n].2 < cfg.max_depth);
        for n in terminal {
            nodes[n] = Node::Leaf {
                leaf: leaf_weight(stats[n].0, stats[n].1, lambda),
            };
        }

        let mut slot_of = vec![NONE; nodes.len()];
        for (s, &n) in splittable.iter().enumerate() {
            slot_of[n] = s;
        }
        let k = splittable.len();
        let mut best: Vec<Option<Candidate>> = vec![None; k];
        let mut gl = vec![0.0; k];
        let mut hl = vec![0.0; k];
        let mut last = vec![0.0; k];
        let mut seen = vec![false; k];

        for f in 0..index.n_features() {
            gl.iter_mut().for_each(|v| *v = 0.0);
            hl.iter_mut().for_each(|v| *v = 0.0);
            seen.iter_mut().for_each(|v| *v = false);
            let col = &index.columns[f];
            for &r in &index.order[f] {
                let r = r as usize;
                let n = node_of[r];
                if n == NONE || slot_of[n] == NONE {
                    continue;
                }
                let s = slot_of[n];
                let v = col[r];
                if seen[s] && v > last[s] {
                    let (g_tot, h_tot, _) = stats[n];
                    let (gr, hr) = (g_tot - gl[s], h_tot - hl[s]);
                    if hl[s] >= cfg.min_child_weight && hr >= cfg.min_child_weight {
                        let gain = split_gain(gl[s], hl[s], gr, hr, lambda, cfg.gamma);
                        if best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate {
                                feature: f,
                                threshold: midpoint(last[s], v),
                                gain,
                                gl: gl[s],
                                hl: hl[s],
                            });
                        }
                    }
                }
                gl[s] += grad[r];
                hl[s] += hess[r];
                last[s] = v;
                seen[s] = true;
            }
        }

        let mut next_open = Vec::new();
        let mut split_of = vec![None; nodes.len()];
        for (s, &n) in splittable.iter().enumerate() {
            let (g_tot, h_tot, depth) = stats[n];
            match best[s] {
                Some(c) if c.gain > 0.0 => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { leaf: 0.0 });
                    nodes.push(Node::Leaf { leaf: 0.0 });
                    stats.push((c.gl, c.hl, depth + 1));
                    stats.push((g_tot - c.gl, h_tot - c.hl, depth + 1));
                    nodes[n] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    split_of[n] = Some((c.feature, c.threshold, left, right));
                    next_open.push(left);
                    next_open.push(right);
                }
                _ => {
                    nodes[n] = Node::Leaf {
                        leaf: leaf_weight(g_tot, h_tot, lambda),
                    };
                }
            }
        }

        for (r, n) in node_of.iter_mut().enumerate() {
            if *n == NONE {
                continue;
            }
            *n = match split_of.get(*n).copied().flatten() {
                Some((f, t, left, right)) => {
                    if index.columns[f][r] < t {
                        left
                    } else {
                        right
                    }
                }
                None if next_open.contains(n) => *n,
                None => NONE,
            };
        }
        open = next_open;
    }
    Ok(Tree { nodes })
}

/// Fits one tree to per-row gradients and hessians.
pub fn build_tree(rows: &[Vec<f64>], grad: &[f64], hess: &[f64], cfg: &GbmConfig) -> Result<Tree> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(WorkrError::EmptyTrainingSet);
    }
    grow_tree(&ColumnIndex::new(rows), grad, hess, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEval {
    pub round: usize,
    pub train_logloss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: Occupation,
    pub probs: [f64; NUM_CLASSES],
}

impl Prediction {
    fn from_scores(scores: &[f64; NUM_CLASSES]) -> Prediction {
        let probs = softmax(scores);
        Prediction {
            label: Occupation::from_index(argmax(&probs)).expect("class index"),
            probs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub magic: String,
    pub config: GbmConfig,
    pub fingerprint: String,
    pub n_features: usize,
    pub base_scores: [f64; NUM_CLASSES],
    /// `trees[class][round]`.
    pub trees: Vec<Vec<Tree>>,
}

impl GbmModel {
    pub fn rounds(&self) -> usize {
        self.trees.first().map_or(0, Vec::len)
    }

    fn raw_scores(&self, x: &[f64]) -> [f64; NUM_CLASSES] {
        let eta = self.config.learning_rate;
        let mut scores = self.base_scores;
        for (k, trees) in self.trees.iter().enumerate() {
            scores[k] += trees.iter().map(|t| eta * t.predict(x)).sum::<f64>();
        }
        scores
    }

    /// Predicts one row laid out as `layout`.
    pub fn predict(&self, layout: &Layout, x: &[f64]) -> Result<Prediction> {
        check_layout(&self.fingerprint, self.n_features, layout, x)?;
        Ok(Prediction::from_scores(&self.raw_scores(x)))
    }

    pub fn predict_matrix(&self, m: &LabeledMatrix) -> Result<Vec<Prediction>> {
        m.rows.iter().map(|r| self.predict(&m.layout, r)).collect()
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<GbmModel> {
        let m: GbmModel = serde_json::from_reader(reader)?;
        if m.magic != GBM_MAGIC {
            return Err(WorkrError::ModelFormat(format!("bad magic `{}`", m.magic)));
        }
        if m.trees.len() != NUM_CLASSES || m.trees.iter().any(|t| t.len() != m.rounds()) {
            return Err(WorkrError::ModelFormat("ragged tree lists".into()));
        }
        Ok(m)
    }
}

fn check_layout(fingerprint: &str, n_features: usize, layout: &Layout, x: &[f64]) -> Result<()> {
    if layout.fingerprint() != fingerprint {
        return Err(WorkrError::LayoutMismatch(format!(
            "model trained on layout {fingerprint}, got {}",
            layout.fingerprint()
        )));
    }
    if x.len() != n_features {
        return Err(WorkrError::DimensionMismatch {
            expected: n_features,
            got: x.len(),
        });
    }
    Ok(())
}

fn accuracy(scores: &[[f64; NUM_CLASSES]], labels: &[Occupation]) -> f64 {
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, y)| argmax(&s[..]) == y.index())
        .count();
    hits as f64 / labels.len() as f64
}

fn log_loss(scores: &[[f64; NUM_CLASSES]], labels: &[Occupation]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, y)| {
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - s[y.index()]
        })
        .sum();
    total / labels.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedGbm {
    pub model: GbmModel,
    pub trace: Vec<RoundEval>,
    pub best_round: Option<usize>,
}

/// Boosts one tree per class per round on the softmax objective. With a
/// non-empty validation set, training stops once validation accuracy has
/// not improved for `early_stopping_rounds` rounds and the model is cut back
/// to its best round.
pub fn train_gbm(
    train: &LabeledMatrix,
    val: &LabeledMatrix,
    cfg: &GbmConfig,
) -> Result<TrainedGbm> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(WorkrError::EmptyTrainingSet);
    }
    train.check()?;
    val.check()?;
    if val.layout != train.layout {
        return Err(WorkrError::LayoutMismatch(
            "training and validation layouts differ".into(),
        ));
    }

    let index = ColumnIndex::new(&train.rows);
    let n = train.len();
    let eta = cfg.learning_rate;
    let base = [0.0; NUM_CLASSES];
    let mut train_scores = vec![base; n];
    let mut val_scores = vec![base; val.len()];
    let mut trees: Vec<Vec<Tree>> = vec![Vec::new(); NUM_CLASSES];
    let mut trace = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut grad = vec![vec![0.0; n]; NUM_CLASSES];
    let mut hess = vec![vec![0.0; n]; NUM_CLASSES];

    for round in 0..cfg.num_rounds {
        for (i, (scores, y)) in train_scores.iter().zip(&train.labels).enumerate() {
            let (g, h) = grad_hess(&softmax(scores), y.index());
            for k in 0..NUM_CLASSES {
                grad[k][i] = g[k];
                hess[k][i] = h[k];
            }
        }
        for k in 0..NUM_CLASSES {
            let tree = grow_tree(&index, &grad[k], &hess[k], cfg)?;
            for (s, x) in train_scores.iter_mut().zip(&train.rows) {
                s[k] += eta * tree.predict(x);
            }
            for (s, x) in val_scores.iter_mut().zip(&val.rows) {
                s[k] += eta * tree.predict(x);
            }
            trees[k].push(tree);
        }

        let val_accuracy = (!val.is_empty()).then(|| accuracy(&val_scores, &val.labels));
        trace.push(RoundEval {
            round,
            train_logloss: log_loss(&train_scores, &train.labels),
            val_accuracy,
        });
        if let Some(acc) = val_accuracy {
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((round, acc));
            }
            let (best_round, _) = best.expect("set above");
            if round - best_round >= cfg.early_stopping_rounds {
                break;
            }
        }
    }

    if let Some((best_round, _)) = best {
        for t in &mut trees {
            t.truncate(best_round + 1);
        }
    }
    Ok(TrainedGbm {
        model: GbmModel {
            magic: GBM_MAGIC.into(),
            config: cfg.clone(),
            fingerprint: train.layout.fingerprint(),
            n_features: train.layout.len(),
            base_scores: base,
            trees,
        },
        trace,
        best_round: best.map(|(r, _)| r),
    })
}

/// Gaussian naive Bayes with variance smoothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub magic: String,
    pub fingerprint: String,
    pub n_features: usize,
    pub var_smoothing: f64,
    /// Added to every variance: `var_smoothing * max feature variance`.
    pub epsilon: f64,
    pub priors: [f64; NUM_CLASSES],
    /// `means[class][feature]`.
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

pub const DEFAULT_VAR_SMOOTHING: f64 = 1e-9;

pub fn train_nb(train: &LabeledMatrix, var_smoothing: f64) -> Result<NbModel> {
    if train.is_empty() {
        return Err(WorkrError::EmptyTrainingSet);
    }
    train.check()?;
    let d = train.layout.len();
    let n = train.len() as f64;

    let mut max_var: f64 = 0.0;
    for f in 0..d {
        let mean = train.rows.iter().map(|r| r[f]).sum::<f64>() / n;
        let var = train
            .rows
            .iter()
            .map(|r| (r[f] - mean).powi(2))
            .sum::<f64>()
            / n;
        max_var = max_var.max(var);
    }
    // an all-constant matrix would otherwise leave zero variances
    let epsilon = if max_var > 0.0 {
        var_smoothing * max_var
    } else {
        var_smoothing
    };

    let mut counts = [0usize; NUM_CLASSES];
    let mut means = vec![vec![0.0; d]; NUM_CLASSES];
    let mut variances = vec![vec![1.0; d]; NUM_CLASSES];
    for (row, y) in train.rows.iter().zip(&train.labels) {
        counts[y.index()] += 1;
        for (m, v) in means[y.index()].iter_mut().zip(row) {
            *m += v;
        }
    }
    for k in 0..NUM_CLASSES {
        if counts[k] == 0 {
            continue;
        }
        let c = counts[k] as f64;
        means[k].iter_mut().for_each(|m| *m /= c);
        let mut var = vec![0.0; d];
        for (row, y) in train.rows.iter().zip(&train.labels) {
            if y.index() == k {
                for f in 0..d {
                    var[f] += (row[f] - means[k][f]).powi(2);
                }
            }
        }
        variances[k] = var.into_iter().map(|v| v / c + epsilon).collect();
    }
    let priors = counts.map(|c| c as f64 / n);
    Ok(NbModel {
        magic: NB_MAGIC.into(),
        fingerprint: train.layout.fingerprint(),
        n_features: d,
        var_smoothing,
        epsilon,
        priors,
        means,
        variances,
    })
}

impl NbModel {
    /// Per-class log joint likelihood; classes unseen in training get `-inf`.
    pub fn log_joint(&self, x: &[f64]) -> [f64; NUM_CLASSES] {
        let mut out = [f64::NEG_INFINITY; NUM_CLASSES];
        for (k, slot) in out.iter_mut().enumerate() {
            if self.priors[k] == 0.0 {
                continue;
            }
            let ll: f64 = x
                .iter()
                .zip(&self.means[k])
                .zip(&self.variances[k])
                .map(|((v, m), var)| {
                    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - m).powi(2) / (2.0 * var)
                })
                .sum();
            *slot = self.priors[k].ln() + ll;
        }
        out
    }

    pub fn predict(&self, layout: &Layout, x: &[f64]) -> Result<Prediction> {
        check_layout(&self.fingerprint, self.n_features, layout, x)?;
        Ok(Prediction::from_scores(&self.log_joint(x)))
    }

    pub fn predict_matrix(&self, m: &LabeledMatrix) -> Result<Vec<Prediction>> {
        m.rows.iter().map(|r| self.predict(&m.layout, r)).collect()
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<NbModel> {
        let m: NbModel = serde_json::from_reader(reader)?;
        if m.magic != NB_MAGIC {
            return Err(WorkrError::ModelFormat(format!("bad magic `{}`", m.magic)));
        }
        Ok(m)
    }
}
