//! KV-cache generation: a reporter index over the cached keys plus dense
//! handling of keys appended during decoding.
//!
//! Appended keys are never inserted into the index. Each inference attends
//! the indexed cache through the half-space reporter and every appended key
//! directly, in cache order followed by append order — the same summation
//! order as a dense pass over the concatenated key matrix, which keeps the
//! ReLU path exact under replay.

use crate::attention::{scaled_query_row, ActivationKind, AttentionConfig, AttentionOutput};
use crate::error::{Error, Result};
use crate::hsr::{FiredSet, HalfspaceQuery, QueryCost, ReporterBackend, ReporterIndex};
use crate::tensor::{dot, DenseMatrix};

/// Generation-time store: indexed cached keys plus appended (unindexed) keys.
///
/// Single writer: [`KvCache::step`] mutates the appended lists and must be
/// externally serialized; [`KvCache::inference`] on a quiescent cache is safe
/// from many threads.
pub struct KvCache {
    k_cached: DenseMatrix,
    v_cached: DenseMatrix,
    index: ReporterIndex,
    kind: ActivationKind,
    alpha: u32,
    r: usize,
    b: f64,
    k_new: Vec<f64>,
    v_new: Vec<f64>,
    appended: usize,
}

/// Build a cache: store K and V, take `b` from the config, index the keys.
pub fn gen_init(
    k: &DenseMatrix,
    v: &DenseMatrix,
    config: &AttentionConfig,
    backend: ReporterBackend,
) -> Result<KvCache> {
    if v.rows() != k.rows() {
        return Err(Error::Dimension {
            context: "gen_init V rows",
            expected: k.rows(),
            got: v.rows(),
        });
    }
    if v.cols() != k.cols() {
        return Err(Error::Dimension {
            context: "gen_init V cols",
            expected: k.cols(),
            got: v.cols(),
        });
    }
    if k.cols() != config.d {
        return Err(Error::Dimension {
            context: "gen_init K cols",
            expected: config.d,
            got: k.cols(),
        });
    }
    let index = ReporterIndex::build(k, backend)?;
    Ok(KvCache {
        k_cached: k.clone(),
        v_cached: v.clone(),
        index,
        kind: config.kind,
        alpha: config.alpha,
        r: config.r,
        b: config.b,
        k_new: Vec::new(),
        v_new: Vec::new(),
        appended: 0,
    })
}

impl KvCache {
    pub fn cached_len(&self) -> usize {
        self.k_cached.rows()
    }

    pub fn appended_len(&self) -> usize {
        self.appended
    }

    pub fn dim(&self) -> usize {
        self.k_cached.cols()
    }

    pub fn threshold(&self) -> f64 {
        self.b
    }

    /// The indexed key matrix (never mutated by steps).
    pub fn cached_keys(&self) -> &DenseMatrix {
        &self.k_cached
    }

    /// Fired set of the indexed part only, at the cache threshold.
    pub fn fired_cached(&self, q_row: &[f64]) -> Result<FiredSet> {
        let qs = scaled_query_row(q_row);
        self.index.query(&HalfspaceQuery::new(qs, self.b))
    }

    fn appended_key(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.k_new[i * d..(i + 1) * d]
    }

    fn appended_value(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.v_new[i * d..(i + 1) * d]
    }

    /// Attention of every row of `q` against cache ∪ appended keys.
    ///
    /// For [`ActivationKind::ReluPow`], `fired_counts` holds the per-row
    /// reported count of the indexed part (`k̃` of the cache); appended keys
    /// are always evaluated and show up in `diagnostics.candidates_examined`.
    /// For [`ActivationKind::SoftmaxTopR`], `fired_counts` holds the size of
    /// the selected top-r set taken over cached ∪ appended scores.
    pub fn inference(&self, q: &DenseMatrix) -> Result<AttentionOutput> {
        if q.cols() != self.dim() {
            return Err(Error::Dimension {
                context: "gen_inference Q cols",
                expected: self.dim(),
                got: q.cols(),
            });
        }
        let (m, d) = (q.rows(), self.dim());
        let mut out = DenseMatrix::zeros(m, d);
        let mut fired_counts = vec![0usize; m];
        let mut empty_rows = Vec::new();
        let mut diagnostics = QueryCost::default();
        for i in 0..m {
            let qi = q.row(i);
            let row_is_empty = match self.kind {
                ActivationKind::ReluPow => {
                    self.relu_row(qi, i, &mut out, &mut fired_counts, &mut diagnostics)?
                }
                ActivationKind::SoftmaxTopR => {
                    self.topr_row(qi, i, &mut out, &mut fired_counts, &mut diagnostics)?
                }
            };
            if row_is_empty {
                empty_rows.push(i);
            }
        }
        Ok(AttentionOutput {
            out,
            fired_counts,
            empty_rows,
            diagnostics,
        })
    }

    fn relu_row(
        &self,
        qi: &[f64],
        row: usize,
        out: &mut DenseMatrix,
        fired_counts: &mut [usize],
        diagnostics: &mut QueryCost,
    ) -> Result<bool> {
        let d = self.dim();
        let qs = scaled_query_row(qi);
        let fired = self.index.query(&HalfspaceQuery::new(qs.clone(), self.b))?;
        diagnostics.absorb(&fired.cost);
        diagnostics.candidates_examined += self.appended;
        fired_counts[row] = fired.indices.len();
        let mut denom = 0.0;
        let mut weights = Vec::with_capacity(fired.indices.len() + self.appended);
        for &j in &fired.indices {
            let score = dot(&qs, self.k_cached.row(j));
            let a = relu_pow(score, self.b, self.alpha);
            weights.push(a);
            denom += a;
        }
        for p in 0..self.appended {
            let score = dot(&qs, self.appended_key(p));
            let a = relu_pow(score, self.b, self.alpha);
            weights.push(a);
            denom += a;
        }
        if denom == 0.0 {
            return Ok(true);
        }
        let mut acc = vec![0.0; d];
        for (&j, &w) in fired.indices.iter().zip(&weights) {
            if w != 0.0 {
                for (slot, &value) in acc.iter_mut().zip(self.v_cached.row(j)) {
                    *slot += w * value;
                }
            }
        }
        for p in 0..self.appended {
            let w = weights[fired.indices.len() + p];
            if w != 0.0 {
                for (slot, &value) in acc.iter_mut().zip(self.appended_value(p)) {
                    *slot += w * value;
                }
            }
        }
        for (slot, &value) in out.row_mut(row).iter_mut().zip(&acc) {
            *slot = value / denom;
        }
        Ok(false)
    }

    fn topr_row(
        &self,
        qi: &[f64],
        row: usize,
        out: &mut DenseMatrix,
        fired_counts: &mut [usize],
        diagnostics: &mut QueryCost,
    ) -> Result<bool> {
        let d = self.dim();
        let n_cached = self.cached_len();
        // candidate pool: top-r of the indexed part plus every appended key
        let pool_r = self.r.min(n_cached);
        let mut pool: Vec<(f64, usize)> = Vec::with_capacity(pool_r + self.appended);
        if pool_r > 0 {
            let fired = self.index.query_extreme(qi, pool_r)?;
            diagnostics.absorb(&fired.cost);
            for &j in &fired.indices {
                pool.push((dot(qi, self.k_cached.row(j)), j));
            }
        }
        for p in 0..self.appended {
            pool.push((dot(qi, self.appended_key(p)), n_cached + p));
        }
        diagnostics.candidates_examined += self.appended;
        // top-r over concatenated indexing, ties toward the smaller index
        pool.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        pool.truncate(self.r);
        let mut selected: Vec<usize> = pool.iter().map(|&(_, j)| j).collect();
        selected.sort_unstable();
        fired_counts[row] = selected.len();
        if selected.is_empty() {
            return Ok(true);
        }
        // split back into cached rows and appended rows, keeping logit and
        // summation order aligned with the concatenated dense computation
        let qs = scaled_query_row(qi);
        let mut logits = Vec::with_capacity(selected.len());
        for &j in &selected {
            let key = if j < n_cached {
                self.k_cached.row(j)
            } else {
                self.appended_key(j - n_cached)
            };
            logits.push(dot(&qs, key));
        }
        let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut denom = 0.0;
        for &l in &logits {
            denom += (l - max).exp();
        }
        let mut acc = vec![0.0; d];
        for (slot, &j) in selected.iter().enumerate() {
            let w = (logits[slot] - max).exp() / denom;
            let vr = if j < n_cached {
                self.v_cached.row(j)
            } else {
                self.appended_value(j - n_cached)
            };
            for (entry, &value) in acc.iter_mut().zip(vr) {
                *entry += w * value;
            }
        }
        out.row_mut(row).copy_from_slice(&acc);
        Ok(false)
    }

    /// One autoregressive step: append `(k_new, v_new)` first (the query
    /// attends to its own key), then run inference for the single row `q`.
    pub fn step(&mut self, q: &[f64], k_new: &[f64], v_new: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        for (name, len) in [("q", q.len()), ("k_new", k_new.len()), ("v_new", v_new.len())] {
            if len != d {
                return Err(Error::Dimension {
                    context: match name {
                        "q" => "gen_step q",
                        "k_new" => "gen_step k_new",
                        _ => "gen_step v_new",
                    },
                    expected: d,
                    got: len,
                });
            }
        }
        self.k_new.extend_from_slice(k_new);
        self.v_new.extend_from_slice(v_new);
        self.appended += 1;
        let q_mat = DenseMatrix::from_vec(1, d, q.to_vec())?;
        let result = self.inference(&q_mat)?;
        Ok(result.out.row(0).to_vec())
    }
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

/// Dense replay oracle: ReLU attention of one query over `[K; appended]`.
pub fn dense_concat_relu_row(
    q_row: &[f64],
    k: &DenseMatrix,
    v: &DenseMatrix,
    k_new: &[Vec<f64>],
    v_new: &[Vec<f64>],
    alpha: u32,
    b: f64,
) -> Vec<f64> {
    let d = q_row.len();
    let scale = 1.0 / (d as f64).sqrt();
    let mut denom = 0.0;
    let mut weights = Vec::with_capacity(k.rows() + k_new.len());
    for j in 0..k.rows() {
        let a = relu_pow(dot(q_row, k.row(j)) * scale, b, alpha);
        weights.push(a);
        denom += a;
    }
    for kn in k_new {
        let a = relu_pow(dot(q_row, kn) * scale, b, alpha);
        weights.push(a);
        denom += a;
    }
    let mut acc = vec![0.0; d];
    if denom == 0.0 {
        return acc;
    }
    for (j, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            let vr: &[f64] = if j < k.rows() {
                v.row(j)
            } else {
                &v_new[j - k.rows()]
            };
            for (entry, &value) in acc.iter_mut().zip(vr) {
                *entry += w * value;
            }
        }
    }
    for entry in acc.iter_mut() {
        *entry /= denom;
    }
    acc
}
