//! Built-in lightweight classifiers for the synthetic-train/real-test
//! protocol: full-batch logistic regression on one-hot features and a greedy
//! Gini decision tree on ordinal ones. Both consume the same discretized row
//! representation and train deterministically.

use crate::tabular::{AttrKind, Cell, Dataset};

/// One value index per feature attribute, missing cells already filled.
pub(crate) type OrdinalRow = Vec<u32>;

/// Discretizes `rows` of `d` down to the `attrs` columns. Missing cells take
/// the column's observed mean (numerical, re-binned) or mode (categorical),
/// falling back to index 0 when the column has no observed values.
pub(crate) fn ordinal_features(d: &Dataset, rows: &[usize], attrs: &[usize]) -> Vec<OrdinalRow> {
    let fills: Vec<u32> = attrs.iter().map(|&j| fill_index(d, j)).collect();
    rows.iter()
        .map(|&i| {
            attrs
                .iter()
                .zip(&fills)
                .map(|(&j, &fill)| d.cell_index(i, j).map_or(fill, |v| v as u32))
                .collect()
        })
        .collect()
}

fn fill_index(d: &Dataset, j: usize) -> u32 {
    match &d.schema().attr(j).kind {
        AttrKind::Categorical { domain } => {
            let mut counts = vec![0usize; domain.len()];
            for i in 0..d.n() {
                if let Cell::Cat(l) = d.cell(i, j) {
                    counts[l] += 1;
                }
            }
            // first-maximum keeps ties deterministic
            counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map_or(0, |(l, _)| l as u32)
        }
        AttrKind::Numerical { .. } => {
            let (mut sum, mut cnt) = (0.0f64, 0usize);
            for i in 0..d.n() {
                if let Cell::Num(v) = d.cell(i, j) {
                    sum += v;
                    cnt += 1;
                }
            }
            if cnt == 0 {
                0
            } else {
                d.schema()
                    .cell_index(j, Cell::Num(sum / cnt as f64))
                    .unwrap_or(0) as u32
            }
        }
    }
}

/// Binary logistic regression over one-hot encodings of ordinal rows,
/// trained by full-batch gradient descent: 500 iterations, step 0.1,
/// L2 penalty 1e-4 on the weights (not the bias).
#[derive(Debug, Clone)]
pub(crate) struct Logistic {
    weights: Vec<f64>,
    bias: f64,
    offsets: Vec<usize>,
}

const LOGISTIC_ITERS: usize = 500;
const LOGISTIC_STEP: f64 = 0.1;
const LOGISTIC_L2: f64 = 1e-4;

impl Logistic {
    pub(crate) fn train(rows: &[OrdinalRow], labels: &[bool], cards: &[usize]) -> Logistic {
        let mut offsets = Vec::with_capacity(cards.len());
        let mut dims = 0usize;
        for &c in cards {
            offsets.push(dims);
            dims += c;
        }
        let n = rows.len() as f64;
        let mut weights = vec![0.0f64; dims];
        let mut bias = 0.0f64;
        let mut grad = vec![0.0f64; dims];
        for _ in 0..LOGISTIC_ITERS {
            grad.fill(0.0);
            let mut grad_bias = 0.0;
            for (row, &y) in rows.iter().zip(labels) {
                let mut z = bias;
                for (f, &v) in row.iter().enumerate() {
                    z += weights[offsets[f] + v as usize];
                }
                let residual = sigmoid(z) - f64::from(u8::from(y));
                for (f, &v) in row.iter().enumerate() {
                    grad[offsets[f] + v as usize] += residual;
                }
                grad_bias += residual;
            }
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= LOGISTIC_STEP * (g / n + LOGISTIC_L2 * *w);
            }
            bias -= LOGISTIC_STEP * grad_bias / n;
        }
        Logistic {
            weights,
            bias,
            offsets,
        }
    }

    pub(crate) fn predict(&self, row: &OrdinalRow) -> bool {
        let mut z = self.bias;
        for (f, &v) in row.iter().enumerate() {
            z += self.weights[self.offsets[f] + v as usize];
        }
        z > 0.0
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Greedy binary decision tree on ordinal features, depth-limited, splitting
/// on `value <= threshold` by Gini impurity reduction.
#[derive(Debug, Clone)]
pub(crate) enum Tree {
    Leaf(bool),
    Split {
        feat: usize,
        thresh: u32,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

pub(crate) const TREE_DEPTH: usize = 4;

impl Tree {
    pub(crate) fn train(rows: &[OrdinalRow], labels: &[bool], cards: &[usize]) -> Tree {
        let idx: Vec<usize> = (0..rows.len()).collect();
        build(rows, labels, cards, &idx, 0)
    }

    pub(crate) fn predict(&self, row: &OrdinalRow) -> bool {
        match self {
            Tree::Leaf(v) => *v,
            Tree::Split {
                feat,
                thresh,
                left,
                right,
            } => {
                if row[*feat] <= *thresh {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

fn gini(pos: f64, neg: f64) -> f64 {
    let n = pos + neg;
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    let q = neg / n;
    1.0 - p * p - q * q
}

fn build(rows: &[OrdinalRow], labels: &[bool], cards: &[usize], idx: &[usize], depth: usize) -> Tree {
    let pos = idx.iter().filter(|&&i| labels[i]).count();
    let neg = idx.len() - pos;
    let majority = pos > neg;
    if pos == 0 || neg == 0 || depth == TREE_DEPTH {
        return Tree::Leaf(majority);
    }

    let parent = gini(pos as f64, neg as f64);
    let total = idx.len() as f64;
    let mut best: Option<(f64, usize, u32)> = None;
    for (f, &card) in cards.iter().enumerate() {
        // per-value label histogram, then prefix scan over thresholds
        let mut hist = vec![(0usize, 0usize); card];
        for &i in idx {
            let cell = &mut hist[rows[i][f] as usize];
            if labels[i] {
                cell.0 += 1;
            } else {
                cell.1 += 1;
            }
        }
        let (mut lp, mut ln) = (0usize, 0usize);
        for t in 0..card.saturating_sub(1) {
            lp += hist[t].0;
            ln += hist[t].1;
            let (rp, rn) = (pos - lp, neg - ln);
            let (nl, nr) = ((lp + ln) as f64, (rp + rn) as f64);
            if nl == 0.0 || nr == 0.0 {
                continue;
            }
            let gain = parent
                - (nl * gini(lp as f64, ln as f64) + nr * gini(rp as f64, rn as f64)) / total;
            // strict improvement keeps the first (feature, threshold) on ties
            if gain > best.map_or(1e-12, |(g, _, _)| g) {
                best = Some((gain, f, t as u32));
            }
        }
    }

    let Some((_, feat, thresh)) = best else {
        return Tree::Leaf(majority);
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| rows[i][feat] <= thresh);
    Tree::Split {
        feat,
        thresh,
        left: Box::new(build(rows, labels, cards, &left_idx, depth + 1)),
        right: Box::new(build(rows, labels, cards, &right_idx, depth + 1)),
    }
}
