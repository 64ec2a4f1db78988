//! Seeded synthetic instances for experiments and verification.

use crate::analysis::MassiveActivationParams;
use crate::rng::RngSpec;
use crate::tensor::{sample_gaussian_matrix, DenseMatrix};

/// A Gaussian attention instance: `Q ~ N(0, σ_q²)`, `K ~ N(0, σ_k²)`,
/// `V ~ N(0, 1)`, all entrywise i.i.d.
#[derive(Debug, Clone)]
pub struct GaussianInstance {
    pub q: DenseMatrix,
    pub k: DenseMatrix,
    pub v: DenseMatrix,
}

/// Sample a Gaussian instance from fixed substreams of `rng`.
pub fn gaussian_instance(
    n: usize,
    m: usize,
    d: usize,
    sigma_q: f64,
    sigma_k: f64,
    rng: &RngSpec,
) -> GaussianInstance {
    GaussianInstance {
        q: sample_gaussian_matrix(m, d, sigma_q, &rng.substream(0)),
        k: sample_gaussian_matrix(n, d, sigma_k, &rng.substream(1)),
        v: sample_gaussian_matrix(n, d, 1.0, &rng.substream(2)),
    }
}

/// How the value matrix of a massive-activation instance is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassiveValueStyle {
    /// `V ~ N(0,1)`; exercises the error bounds on generic values.
    Gaussian,
    /// Massive rows share one constant positive value, remaining rows are
    /// zero; makes the truncation error exactly non-increasing in `r`.
    TopHeavy,
}

/// A constructed `(γ, β₁, 0)` massive-activation instance with one query.
#[derive(Debug, Clone)]
pub struct MassiveInstance {
    pub q: Vec<f64>,
    pub k: DenseMatrix,
    pub v: DenseMatrix,
    pub params: MassiveActivationParams,
    /// `⌈n^γ⌉`, the size of the massive set.
    pub top_size: usize,
}

/// Build a query/key pair satisfying the massive-activation property by
/// construction.
///
/// The query is `q_scale·e₀`. The first `⌈n^γ⌉` keys point along `e₀` with
/// `⟨q, Kᵢ⟩ = √d·β₁·ln(n)·‖q‖·(1 + jitterᵢ)`; the `√d` head-room keeps the
/// property inequalities valid for the `/√d`-scaled softmax logits as well,
/// so the massive bound provably dominates the realized truncation error.
/// Remaining keys have a slightly negative first coordinate (their raw dot
/// is below zero, distinct per key) and Gaussian coordinates elsewhere.
pub fn massive_instance(
    n: usize,
    d: usize,
    gamma: f64,
    beta1: f64,
    q_scale: f64,
    style: MassiveValueStyle,
    rng: &RngSpec,
) -> MassiveInstance {
    assert!(n >= 2 && d >= 1 && q_scale > 0.0);
    let params = MassiveActivationParams::new(gamma, beta1, 0.0).expect("valid params");
    let top_size = ((n as f64).powf(gamma).ceil() as usize).clamp(1, n);
    let mut k = DenseMatrix::zeros(n, d);
    let mut uniforms = rng.substream(0).uniform_stream();
    let mut gauss = rng.substream(1).gaussian_stream();
    let log_n = (n as f64).ln();
    let massive_coord = (d as f64).sqrt() * beta1 * log_n;
    for i in 0..top_size {
        k.set(i, 0, massive_coord * (1.0 + 1e-6 * uniforms.next_f64()));
    }
    for i in top_size..n {
        k.set(i, 0, -(gauss.next_gaussian().abs() * 0.01 + 1e-9));
        for c in 1..d {
            k.set(i, c, gauss.next_gaussian());
        }
    }
    let mut q = vec![0.0; d];
    q[0] = q_scale;
    let v = match style {
        MassiveValueStyle::Gaussian => sample_gaussian_matrix(n, d, 1.0, &rng.substream(2)),
        MassiveValueStyle::TopHeavy => {
            let mut v = DenseMatrix::zeros(n, d);
            let height = 1.0 + 3.0 * uniforms.next_f64();
            for i in 0..top_size {
                for c in 0..d {
                    v.set(i, c, height);
                }
            }
            v
        }
    };
    MassiveInstance {
        q,
        k,
        v,
        params,
        top_size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::check_massive_activation;

    #[test]
    fn gaussian_instance_is_deterministic() {
        let a = gaussian_instance(32, 4, 3, 1.0, 1.0, &RngSpec::new(5));
        let b = gaussian_instance(32, 4, 3, 1.0, 1.0, &RngSpec::new(5));
        assert_eq!(a.q, b.q);
        assert_eq!(a.k, b.k);
        assert_eq!(a.v, b.v);
    }

    #[test]
    fn construction_satisfies_the_property() {
        for seed in 0..20 {
            let inst = massive_instance(
                512,
                6,
                0.5,
                2.0,
                1.1,
                MassiveValueStyle::TopHeavy,
                &RngSpec::new(seed),
            );
            let report = check_massive_activation(&inst.q, &inst.k, &inst.params).unwrap();
            assert!(report.holds, "seed {seed}");
            assert!(report.measured_max_rest < 0.0);
        }
    }
}
