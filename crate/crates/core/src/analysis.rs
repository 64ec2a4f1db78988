//! Threshold calibration, sparsity statistics and softmax error bounds.
//!
//! Calibration has two modes. `Conservative` uses the worst-case constant
//! `σ_a = 4·(1 + d⁻¹·ln(m/δ))^{1/2}·σ_q·σ_k`, which guarantees the fired
//! counts stay below `2·n^{4/5}` with probability `1 − δ` but over-prunes so
//! aggressively that almost nothing fires. `Calibrated` uses
//! `σ_a = σ_q·σ_k`, the standard deviation actually realized by `⟨q,k⟩/√d`
//! for Gaussian inputs, which makes the `n^{4/5}` scaling law measurable.
//! Both feed `b = σ_a·√(0.4·ln n)`. Logarithms are natural throughout.
//!
//! Massive-activation checks work on raw inner products `⟨q, Kᵢ⟩` — no
//! `/√d` scaling — normalized by `‖q‖₂`.

use crate::error::{Error, Result};
use crate::tensor::{dot, l2_norm, linf_matrix_norm, DenseMatrix};

/// How `σ_a` is derived from the instance distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    /// The worst-case constant with the factor 4; guaranteed sparsity bound.
    Conservative,
    /// `σ_a = σ_q·σ_k`; the realized score deviation, visible scaling law.
    Calibrated,
}

/// Distribution parameters feeding the threshold calibration.
#[derive(Debug, Clone)]
pub struct CalibrationParams {
    pub sigma_q: f64,
    pub sigma_k: f64,
    pub d: usize,
    pub m: usize,
    pub delta: f64,
    pub mode: CalibrationMode,
}

impl CalibrationParams {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.sigma_q <= 0.0 || self.sigma_k <= 0.0 {
            return Err(Error::Parameter("sigmas must be positive".into()));
        }
        if self.d == 0 || self.m == 0 {
            return Err(Error::Parameter("d and m must be positive".into()));
        }
        Ok(())
    }
}

/// Score standard deviation `σ_a` for the chosen calibration mode.
pub fn sigma_a(params: &CalibrationParams) -> Result<f64> {
    params.validate()?;
    Ok(match params.mode {
        CalibrationMode::Conservative => {
            let log_term = (params.m as f64 / params.delta).ln() / params.d as f64;
            4.0 * (1.0 + log_term).sqrt() * params.sigma_q * params.sigma_k
        }
        CalibrationMode::Calibrated => params.sigma_q * params.sigma_k,
    })
}

/// Activation threshold `b = σ_a·√(0.4·ln n)`; requires `n ≥ 2`.
pub fn threshold_b(sigma_a: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "threshold_b needs n >= 2, got {n}"
        )));
    }
    Ok(sigma_a * (0.4 * (n as f64).ln()).sqrt())
}

/// Per-row fired counts against the `2·n^{4/5}` bound.
#[derive(Debug, Clone)]
pub struct SparsityReport {
    pub n: usize,
    /// `k̃ᵢ` per query row, by the reporter predicate `score ≥ b`.
    pub fired_counts: Vec<usize>,
    pub max_fired: usize,
    pub mean_fired: f64,
    /// `2·n^{4/5}`.
    pub bound: f64,
    /// Fraction of rows with `k̃ᵢ > 2·n^{4/5}`.
    pub violation_fraction: f64,
}

/// Count `{j : ⟨Qᵢ,Kⱼ⟩/√d − b ≥ 0}` per row by direct scoring.
///
/// This is the brute-force oracle the sparse path's `fired_counts` are
/// checked against.
pub fn sparsity_report(q: &DenseMatrix, k: &DenseMatrix, b: f64) -> Result<SparsityReport> {
    if q.cols() != k.cols() {
        return Err(Error::Dimension {
            context: "sparsity_report",
            expected: q.cols(),
            got: k.cols(),
        });
    }
    let (m, n) = (q.rows(), k.rows());
    let mut fired_counts = Vec::with_capacity(m);
    for i in 0..m {
        // same scaled-row scoring as the attention kernels
        let qs = crate::attention::scaled_query_row(q.row(i));
        let count = (0..n).filter(|&j| dot(&qs, k.row(j)) >= b).count();
        fired_counts.push(count);
    }
    let bound = 2.0 * (n as f64).powf(0.8);
    let violations = fired_counts.iter().filter(|&&c| c as f64 > bound).count();
    let max_fired = fired_counts.iter().copied().max().unwrap_or(0);
    let mean_fired = if m == 0 {
        0.0
    } else {
        fired_counts.iter().sum::<usize>() as f64 / m as f64
    };
    Ok(SparsityReport {
        n,
        fired_counts,
        max_fired,
        mean_fired,
        bound,
        violation_fraction: if m == 0 { 0.0 } else { violations as f64 / m as f64 },
    })
}

/// Massive-activation parameters `(γ, β₁, β₂)`.
#[derive(Debug, Clone, Copy)]
pub struct MassiveActivationParams {
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl MassiveActivationParams {
    pub fn new(gamma: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Parameter(format!("gamma {gamma} outside [0,1]")));
        }
        if !(beta1 >= beta2 && beta2 >= 0.0) {
            return Err(Error::Parameter(format!(
                "need beta1 >= beta2 >= 0, got {beta1}, {beta2}"
            )));
        }
        Ok(Self { gamma, beta1, beta2 })
    }
}

/// Outcome of a massive-activation check.
#[derive(Debug, Clone, Copy)]
pub struct MassiveActivationReport {
    pub holds: bool,
    /// Mean of `⟨q,Kᵢ⟩/‖q‖₂` over the top set.
    pub measured_mean_top: f64,
    /// Max of `⟨q,Kᵢ⟩/‖q‖₂` over the rest (−∞ if the rest is empty).
    pub measured_max_rest: f64,
    /// `⌈n^γ⌉`, clamped to `n`.
    pub top_size: usize,
}

/// Indices of the `count` largest raw inner products `⟨q, Kᵢ⟩`, ties toward
/// the smaller index. Brute force on purpose: this is the analysis-side
/// oracle, independent of the reporter.
pub fn top_indices_by_dot(q: &[f64], k: &DenseMatrix, count: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..k.rows()).collect();
    ids.sort_by(|&a, &b| {
        dot(q, k.row(b))
            .total_cmp(&dot(q, k.row(a)))
            .then_with(|| a.cmp(&b))
    });
    ids.truncate(count);
    ids
}

/// Check the `(γ, β₁, β₂)` massive-activation property of `(q, K)`.
pub fn check_massive_activation(
    q: &[f64],
    k: &DenseMatrix,
    params: &MassiveActivationParams,
) -> Result<MassiveActivationReport> {
    if q.len() != k.cols() {
        return Err(Error::Dimension {
            context: "check_massive_activation",
            expected: k.cols(),
            got: q.len(),
        });
    }
    let n = k.rows();
    if n == 0 {
        return Err(Error::Parameter("key matrix must be non-empty".into()));
    }
    let q_norm = l2_norm(q);
    if q_norm == 0.0 {
        return Err(Error::Parameter("query must be non-zero".into()));
    }
    let top_size = ((n as f64).powf(params.gamma).ceil() as usize).min(n);
    let top = top_indices_by_dot(q, k, top_size);
    let mut in_top = vec![false; n];
    for &j in &top {
        in_top[j] = true;
    }
    let log_n = (n as f64).ln();
    let mean_top = top.iter().map(|&j| dot(q, k.row(j))).sum::<f64>() / (top_size as f64 * q_norm);
    let mut max_rest = f64::NEG_INFINITY;
    for (j, &kept) in in_top.iter().enumerate() {
        if !kept {
            max_rest = max_rest.max(dot(q, k.row(j)) / q_norm);
        }
    }
    let rest_ok = max_rest == f64::NEG_INFINITY || max_rest <= params.beta2 * log_n;
    let holds = mean_top >= params.beta1 * log_n && rest_ok;
    Ok(MassiveActivationReport {
        holds,
        measured_mean_top: mean_top,
        measured_max_rest: max_rest,
        top_size,
    })
}

/// General index-set error bound `(2ᾱ/α)·‖V‖∞` of the softmax restriction.
///
/// `α̂`, `ᾱ` are partition sums of the `/√d`-scaled logits over `set` and its
/// complement, both shifted by the maximum over the full logit vector so the
/// ratio is exact up to rounding.
pub fn softmax_error_bound_general(
    q: &[f64],
    k: &DenseMatrix,
    v: &DenseMatrix,
    set: &[usize],
) -> Result<f64> {
    if q.len() != k.cols() {
        return Err(Error::Dimension {
            context: "softmax_error_bound_general",
            expected: k.cols(),
            got: q.len(),
        });
    }
    let n = k.rows();
    let mut in_set = vec![false; n];
    for &j in set {
        if j >= n {
            return Err(Error::Range(format!("index {j} outside key range {n}")));
        }
        in_set[j] = true;
    }
    let qs = crate::attention::scaled_query_row(q);
    let logits: Vec<f64> = (0..n).map(|j| dot(&qs, k.row(j))).collect();
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut kept = 0.0;
    let mut excluded = 0.0;
    for j in 0..n {
        let w = (logits[j] - max).exp();
        if in_set[j] {
            kept += w;
        } else {
            excluded += w;
        }
    }
    let total = kept + excluded;
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * excluded / total * linf_matrix_norm(v))
}

/// Massive-activation error bound `2·‖V‖∞·n^{1−γ−(β₁−β₂)·‖q‖₂}`.
pub fn softmax_error_bound_massive(
    q: &[f64],
    v: &DenseMatrix,
    n: usize,
    params: &MassiveActivationParams,
) -> Result<f64> {
    let q_norm = l2_norm(q);
    if q_norm == 0.0 {
        return Err(Error::Parameter("query must be non-zero".into()));
    }
    let exponent = 1.0 - params.gamma - (params.beta1 - params.beta2) * q_norm;
    Ok(2.0 * linf_matrix_norm(v) * (n as f64).powf(exponent))
}
