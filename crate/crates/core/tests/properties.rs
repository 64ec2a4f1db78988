//! Cross-module invariants: sparse/dense agreement, bound domination,
//! monotone truncation error, and thread-safety of the shared structures.

use std::sync::Arc;

use proptest::prelude::*;

use hsr_attn::analysis::{softmax_error_bound_general, threshold_b};
use hsr_attn::attention::{
    dense_relu_attention, dense_softmax_attention, relative_linf_error, sparse_relu_attention,
    topr_softmax_attention,
};
use hsr_attn::generation::KvCache;
use hsr_attn::hsr::{HalfspaceQuery, ReporterBackend, ReporterIndex};
use hsr_attn::rng::RngSpec;
use hsr_attn::synth::{gaussian_instance, massive_instance, MassiveValueStyle};
use hsr_attn::tensor::linf_matrix_norm;
use hsr_attn::DenseMatrix;

#[test]
fn shared_structures_are_send_and_sync() {
    fn check<T: Send + Sync>() {}
    check::<DenseMatrix>();
    check::<ReporterIndex>();
    check::<KvCache>();
}

#[test]
fn concurrent_queries_match_sequential() {
    let inst = gaussian_instance(2048, 16, 6, 1.0, 1.0, &RngSpec::new(909));
    let index = Arc::new(ReporterIndex::build(&inst.k, ReporterBackend::SpatialTree).unwrap());
    let b = threshold_b(1.0, 2048).unwrap();
    let sequential: Vec<Vec<usize>> = (0..16)
        .map(|i| {
            index
                .query(&HalfspaceQuery::new(inst.q.row(i).to_vec(), b))
                .unwrap()
                .indices
        })
        .collect();
    let handles: Vec<_> = (0..16)
        .map(|i| {
            let index = Arc::clone(&index);
            let q = inst.q.row(i).to_vec();
            std::thread::spawn(move || index.query(&HalfspaceQuery::new(q, b)).unwrap().indices)
        })
        .collect();
    for (i, handle) in handles.into_iter().enumerate() {
        assert_eq!(handle.join().unwrap(), sequential[i]);
    }
}

#[test]
fn topr_error_never_exceeds_general_bound() {
    for seed in 0..100u64 {
        let spec = RngSpec::new(3_000 + seed);
        let mut u = spec.substream(9).uniform_stream();
        let n = 8 + u.next_bounded(120) as usize;
        let d = 1 + u.next_bounded(8) as usize;
        let inst = gaussian_instance(n, 2, d, 1.0, 1.0, &spec);
        let index = ReporterIndex::build(&inst.k, ReporterBackend::SpatialTree).unwrap();
        let dense = dense_softmax_attention(&inst.q, &inst.k, &inst.v).unwrap();
        let r = 1 + u.next_bounded(n as u64) as usize;
        let topr = topr_softmax_attention(&inst.q, &index, &inst.k, &inst.v, r).unwrap();
        for i in 0..2 {
            let set = index.query_extreme(inst.q.row(i), r).unwrap().indices;
            let bound =
                softmax_error_bound_general(inst.q.row(i), &inst.k, &inst.v, &set).unwrap();
            let measured = dense
                .row(i)
                .iter()
                .zip(topr.out.row(i))
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            assert!(
                measured <= bound + 1e-9,
                "seed {seed} row {i}: {measured} > {bound}"
            );
        }
    }
}

#[test]
fn truncation_error_is_monotone_on_top_heavy_instances() {
    for seed in 0..10u64 {
        let inst = massive_instance(
            512,
            4,
            0.5,
            2.0,
            1.0,
            MassiveValueStyle::TopHeavy,
            &RngSpec::new(500 + seed),
        );
        let v_norm = linf_matrix_norm(&inst.v);
        let q = DenseMatrix::from_vec(1, 4, inst.q.clone()).unwrap();
        let index = ReporterIndex::build(&inst.k, ReporterBackend::SpatialTree).unwrap();
        let dense = dense_softmax_attention(&q, &inst.k, &inst.v).unwrap();
        let mut previous = f64::INFINITY;
        for r in [1usize, 2, 4, 8, 16, 23, 32, 64, 128, 256, 512] {
            let topr = topr_softmax_attention(&q, &index, &inst.k, &inst.v, r).unwrap();
            let err = dense
                .row(0)
                .iter()
                .zip(topr.out.row(0))
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            assert!(
                err <= previous + 1e-12 * v_norm,
                "seed {seed}: error rose to {err} at r = {r}"
            );
            previous = err;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // dense and sparse ReLU agree for arbitrary thresholds, both backends
    #[test]
    fn sparse_relu_equals_dense(
        seed in 0u64..10_000,
        n in 1usize..300,
        m in 1usize..6,
        d in 1usize..6,
        alpha in 1u32..4,
        b in -3.0f64..3.0,
    ) {
        let inst = gaussian_instance(n, m, d, 1.0, 1.0, &RngSpec::new(seed));
        let dense = dense_relu_attention(&inst.q, &inst.k, &inst.v, alpha, b).unwrap();
        for backend in [ReporterBackend::LinearScan, ReporterBackend::SpatialTree] {
            let index = ReporterIndex::build(&inst.k, backend).unwrap();
            let sparse =
                sparse_relu_attention(&inst.q, &index, &inst.k, &inst.v, alpha, b).unwrap();
            prop_assert!(relative_linf_error(&dense.out, &sparse.out) <= 1e-10);
            prop_assert_eq!(&dense.empty_rows, &sparse.empty_rows);
            prop_assert_eq!(&dense.fired_counts, &sparse.fired_counts);
        }
    }
}
