//! Dense reference attention and the reporter-accelerated sparse paths.
//!
//! The ReLU^α activation applies the threshold `b` inside the activation,
//! `max(0, ⟨q,k⟩/√d − b)^α`, and the reporter uses the same `b` as its
//! half-space predicate. Pruned entries are therefore exactly the zero
//! entries of the attention matrix: the sparse path reproduces the dense
//! path bit for bit (the equivalence tests still allow `1e-10` relative).
//!
//! Softmax logits use the `/√d` scaling everywhere, including the index-set
//! path, and are stabilized by subtracting the maximum over the
//! participating logits before exponentiation.

use crate::error::{Error, Result};
use crate::hsr::{HalfspaceQuery, QueryCost, ReporterIndex};
use crate::tensor::{dot, DenseMatrix};

/// Which attention variant a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    /// `ReLU^α` attention with threshold `b`; exact under sparsification.
    ReluPow,
    /// Softmax restricted to the top-`r` keys per query.
    SoftmaxTopR,
}

/// Dimensions and activation parameters for one attention instance.
#[derive(Debug, Clone)]
pub struct AttentionConfig {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub alpha: u32,
    pub kind: ActivationKind,
    /// Top-r size; only meaningful for [`ActivationKind::SoftmaxTopR`].
    pub r: usize,
    /// ReLU activation threshold and half-space predicate threshold.
    pub b: f64,
    /// Logit scale `1/√d`.
    pub scale: f64,
}

impl AttentionConfig {
    pub fn new(
        n: usize,
        m: usize,
        d: usize,
        alpha: u32,
        kind: ActivationKind,
        r: usize,
        b: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("d must be at least 1".into()));
        }
        if alpha == 0 {
            return Err(Error::Parameter("alpha must be at least 1".into()));
        }
        if r > n {
            return Err(Error::Range(format!("r = {r} exceeds n = {n}")));
        }
        Ok(Self {
            n,
            m,
            d,
            alpha,
            kind,
            r,
            b,
            scale: 1.0 / (d as f64).sqrt(),
        })
    }
}

/// Attention result plus per-row sparsity diagnostics.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// `m × d` output matrix.
    pub out: DenseMatrix,
    /// Per-row fired count `k̃ᵢ` (reported keys for the sparse paths).
    pub fired_counts: Vec<usize>,
    /// Rows whose normalizer `D_ii` was zero; emitted as all-zero rows.
    pub empty_rows: Vec<usize>,
    /// Query-cost counters aggregated over all rows.
    pub diagnostics: QueryCost,
}

#[inline]
fn relu_pow(score: f64, b: f64, alpha: u32) -> f64 {
    let t = score - b;
    if t > 0.0 {
        t.powi(alpha as i32)
    } else {
        0.0
    }
}

/// Fold the `1/√d` logit scale into the query row once.
///
/// Every score is then the plain dot `⟨q·scale, k⟩`, so the reporter
/// predicate, the activation input and the sparsity oracle all evaluate the
/// exact same floating-point expression.
#[inline]
pub(crate) fn scaled_query_row(q_row: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (q_row.len() as f64).sqrt();
    q_row.iter().map(|&x| x * scale).collect()
}

fn check_shapes(q: &DenseMatrix, k: &DenseMatrix, v: &DenseMatrix) -> Result<()> {
    if k.cols() != q.cols() {
        return Err(Error::Dimension {
            context: "attention K cols",
            expected: q.cols(),
            got: k.cols(),
        });
    }
    if v.rows() != k.rows() {
        return Err(Error::Dimension {
            context: "attention V rows",
            expected: k.rows(),
            got: v.rows(),
        });
    }
    if v.cols() != q.cols() {
        return Err(Error::Dimension {
            context: "attention V cols",
            expected: q.cols(),
            got: v.cols(),
        });
    }
    Ok(())
}

/// Dense Softmax attention `Softmax(QKᵀ/√d)·V`.
pub fn dense_softmax_attention(
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_shapes(q, k, v)?;
    if k.rows() == 0 {
        return Err(Error::Parameter(
            "softmax attention requires at least one key".into(),
        ));
    }
    let (m, n, d) = (q.rows(), k.rows(), q.cols());
    let mut out = DenseMatrix::zeros(m, d);
    let all: Vec<usize> = (0..n).collect();
    let mut logits = vec![0.0; n];
    for i in 0..m {
        let qs = scaled_query_row(q.row(i));
        for (j, logit) in logits.iter_mut().enumerate() {
            *logit = dot(&qs, k.row(j));
        }
        let row = softmax_combine(&logits, &all, v, d);
        out.row_mut(i).copy_from_slice(&row);
    }
    Ok(out)
}

/// Softmax over `logits[set]` (max-subtracted), then the weighted sum of the
/// corresponding `V` rows. Returns zeros for an empty set.
fn softmax_combine(logits: &[f64], set: &[usize], v: &DenseMatrix, d: usize) -> Vec<f64> {
    let mut row = vec![0.0; d];
    if set.is_empty() {
        return row;
    }
    let max = set
        .iter()
        .map(|&j| logits[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut denom = 0.0;
    for &j in set {
        denom += (logits[j] - max).exp();
    }
    for &j in set {
        let w = (logits[j] - max).exp() / denom;
        for (acc, &value) in row.iter_mut().zip(v.row(j)) {
            *acc += w * value;
        }
    }
    row
}

/// Softmax attention for one query restricted to an index set `R`.
///
/// `set` must be strictly increasing with entries below `k.rows()`. The
/// logits keep the `/√d` scaling of the dense path.
pub fn softmax_attention_with_index_set(
    q_row: &[f64],
    k: &DenseMatrix,
    v: &DenseMatrix,
    set: &[usize],
) -> Result<Vec<f64>> {
    if q_row.len() != k.cols() {
        return Err(Error::Dimension {
            context: "index-set softmax query",
            expected: k.cols(),
            got: q_row.len(),
        });
    }
    let d = q_row.len();
    let qs = scaled_query_row(q_row);
    let mut logits = vec![0.0; set.len()];
    for (slot, &j) in set.iter().enumerate() {
        if j >= k.rows() {
            return Err(Error::Range(format!(
                "index {j} outside key range {}",
                k.rows()
            )));
        }
        if slot > 0 && set[slot - 1] >= j {
            return Err(Error::Parameter(
                "index set must be strictly increasing".into(),
            ));
        }
        logits[slot] = dot(&qs, k.row(j));
    }
    let mut weighted = vec![0.0; d];
    if set.is_empty() {
        return Ok(weighted);
    }
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut denom = 0.0;
    for &l in &logits {
        denom += (l - max).exp();
    }
    for (slot, &j) in set.iter().enumerate() {
        let w = (logits[slot] - max).exp() / denom;
        for (acc, &value) in weighted.iter_mut().zip(v.row(j)) {
            *acc += w * value;
        }
    }
    Ok(weighted)
}

/// Dense ReLU^α attention: `A = max(0, QKᵀ/√d − b)^α`, `out = D⁻¹AV`.
///
/// A row with `D_ii = 0` becomes all zeros and is recorded in `empty_rows`.
/// `fired_counts` uses the reporter predicate `score ≥ b`, so the dense and
/// sparse paths agree even at boundary equality.
pub fn dense_relu_attention(
    q: &DenseMatrix,
    k: &DenseMatrix,
    v: &DenseMatrix,
    alpha: u32,
    b: f64,
) -> Result<AttentionOutput> {
    check_shapes(q, k, v)?;
    if alpha == 0 {
        return Err(Error::Parameter("alpha must be at least 1".into()));
    }
    let (m, n, d) = (q.rows(), k.rows(), q.cols());
    let mut out = DenseMatrix::zeros(m, d);
    let mut fired_counts = vec![0usize; m];
    let mut empty_rows = Vec::new();
    let mut weights = vec![0.0; n];
    for (i, row_fired) in fired_counts.iter_mut().enumerate() {
        let qs = scaled_query_row(q.row(i));
        let mut denom = 0.0;
        let mut fired = 0;
        for (j, weight) in weights.iter_mut().enumerate() {
            let score = dot(&qs, k.row(j));
            if score >= b {
                fired += 1;
            }
            let a = relu_pow(score, b, alpha);
            *weight = a;
            denom += a;
        }
        *row_fired = fired;
        if denom == 0.0 {
            empty_rows.push(i);
            continue;
        }
        let row = out.row_mut(i);
        for (j, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                for (acc, &value) in row.iter_mut().zip(v.row(j)) {
                    *acc += w * value;
                }
            }
        }
        for acc in row.iter_mut() {
            *acc /= denom;
        }
    }
    let diagnostics = QueryCost {
        candidates_examined: m * n,
        nodes_visited: 0,
        reported: fired_counts.iter().sum(),
    };
    Ok(AttentionOutput {
        out,
        fired_counts,
        empty_rows,
        diagnostics,
    })
}

/// ReLU^α attention touching only the keys reported by the half-space index.
///
/// The index must be built over `k` and queried with the same threshold `b`
/// used inside the activation; the output then matches
/// [`dense_relu_attention`] exactly.
pub fn sparse_relu_attention(
    q: &DenseMatrix,
    index: &ReporterIndex,
    k: &DenseMatrix,
    v: &DenseMatrix,
    alpha: u32,
    b: f64,
) -> Result<AttentionOutput> {
    check_shapes(q, k, v)?;
    if index.n() != k.rows() || index.dim() != k.cols() {
        return Err(Error::Dimension {
            context: "sparse_relu_attention index/K",
            expected: k.rows(),
            got: index.n(),
        });
    }
    if alpha == 0 {
        return Err(Error::Parameter("alpha must be at least 1".into()));
    }
    let (m, d) = (q.rows(), q.cols());
    let mut out = DenseMatrix::zeros(m, d);
    let mut fired_counts = vec![0usize; m];
    let mut empty_rows = Vec::new();
    let mut diagnostics = QueryCost::default();
    for (i, row_fired) in fired_counts.iter_mut().enumerate() {
        // the scaled row is both the reporter direction and the score input,
        // so the half-space predicate and the activation agree bit for bit
        let qs = scaled_query_row(q.row(i));
        let fired = index.query(&HalfspaceQuery::new(qs.clone(), b))?;
        diagnostics.absorb(&fired.cost);
        *row_fired = fired.indices.len();
        // ascending fired indices: identical summation order to the dense
        // loop with its zero terms skipped
        let mut denom = 0.0;
        let mut weights = Vec::with_capacity(fired.indices.len());
        for &j in &fired.indices {
            let score = dot(&qs, k.row(j));
            let a = relu_pow(score, b, alpha);
            weights.push(a);
            denom += a;
        }
        if denom == 0.0 {
            empty_rows.push(i);
            continue;
        }
        let row = out.row_mut(i);
        for (&j, &w) in fired.indices.iter().zip(&weights) {
            if w != 0.0 {
                for (acc, &value) in row.iter_mut().zip(v.row(j)) {
                    *acc += w * value;
                }
            }
        }
        for acc in row.iter_mut() {
            *acc /= denom;
        }
    }
    Ok(AttentionOutput {
        out,
        fired_counts,
        empty_rows,
        diagnostics,
    })
}

/// Softmax attention over the top-`r` keys per query row.
///
/// The key set comes from [`ReporterIndex::query_extreme`] (raw inner
/// products, ties toward the smaller index); the softmax itself uses the
/// `/√d`-scaled logits of the selected keys only.
pub fn topr_softmax_attention(
    q: &DenseMatrix,
    index: &ReporterIndex,
    k: &DenseMatrix,
    v: &DenseMatrix,
    r: usize,
) -> Result<AttentionOutput> {
    check_shapes(q, k, v)?;
    if index.n() != k.rows() || index.dim() != k.cols() {
        return Err(Error::Dimension {
            context: "topr_softmax_attention index/K",
            expected: k.rows(),
            got: index.n(),
        });
    }
    let (m, n, d) = (q.rows(), k.rows(), q.cols());
    let mut out = DenseMatrix::zeros(m, d);
    let mut fired_counts = vec![0usize; m];
    let mut empty_rows = Vec::new();
    let mut diagnostics = QueryCost::default();
    if n == 0 {
        // degenerate cache: every row is empty
        empty_rows.extend(0..m);
        return Ok(AttentionOutput {
            out,
            fired_counts,
            empty_rows,
            diagnostics,
        });
    }
    if r == 0 || r > n {
        return Err(Error::Range(format!("r = {r} outside [1, {n}]")));
    }
    for (i, row_fired) in fired_counts.iter_mut().enumerate() {
        let qi = q.row(i);
        let fired = index.query_extreme(qi, r)?;
        diagnostics.absorb(&fired.cost);
        *row_fired = fired.indices.len();
        if fired.indices.is_empty() {
            empty_rows.push(i);
            continue;
        }
        let row = softmax_attention_with_index_set(qi, k, v, &fired.indices)?;
        out.row_mut(i).copy_from_slice(&row);
    }
    Ok(AttentionOutput {
        out,
        fired_counts,
        empty_rows,
        diagnostics,
    })
}

/// `‖a − b‖∞ / ‖a‖∞` with zero-over-zero treated as zero.
pub fn relative_linf_error(reference: &DenseMatrix, other: &DenseMatrix) -> f64 {
    let mut diff: f64 = 0.0;
    for (x, y) in reference.data().iter().zip(other.data()) {
        diff = diff.max((x - y).abs());
    }
    let norm = crate::tensor::linf_matrix_norm(reference);
    if norm == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / norm
    }
}
