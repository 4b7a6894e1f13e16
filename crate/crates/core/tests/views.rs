use cgnn_core::coarsen::build_coarsened_graph;
use cgnn_core::pipelines::{infer_single_node, infer_subgraphs, prepare_views};
use cgnn_core::synth::{erdos_renyi, synth_sbm};
use cgnn_core::{Augmentation, CoarseTask, CoarsenMethod, DegreeMode, GcnParams, OpTally, Provenance};
use proptest::prelude::*;

const AUGS: [Augmentation; 3] = [Augmentation::None, Augmentation::Extra, Augmentation::Cluster];

#[test]
fn single_node_agrees_with_subgraph_inference() {
    for seed in 0..20u64 {
        let g = synth_sbm(&[15, 20], 0.2, 0.03, 3, seed).unwrap();
        let aug = AUGS[seed as usize % 3];
        let views = prepare_views(&g, 0.2, CoarsenMethod::NeighborhoodGrowth, aug, seed).unwrap();
        let p = GcnParams::init(3, 6, 2, 2, seed).unwrap();
        for mode in [DegreeMode::Original, DegreeMode::Local] {
            let all = infer_subgraphs(&views.subgraphs, &p, mode).unwrap();
            for v in 0..g.n() {
                let one = infer_single_node(&views.subgraphs, &p, mode, v, &mut OpTally::default()).unwrap();
                assert_eq!(one.as_slice(), all.row(v), "seed {seed}, node {v}");
            }
        }
    }
}

#[test]
fn unknown_node_is_rejected() {
    let g = erdos_renyi(12, 0.3, 2, 1).unwrap();
    let views = prepare_views(&g, 0.5, CoarsenMethod::HeavyEdge, Augmentation::None, 0).unwrap();
    let p = GcnParams::init(2, 4, 1, 1, 0).unwrap();
    assert!(infer_single_node(&views.subgraphs, &p, DegreeMode::Original, 12, &mut OpTally::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_node_is_core_exactly_once(n in 2usize..80, p in 0.02f64..0.3, r in 0.05f64..1.0, seed in 0u64..1000, a in 0usize..3) {
        let g = erdos_renyi(n, p, 2, seed).unwrap();
        let views = prepare_views(&g, r, CoarsenMethod::HeavyEdge, AUGS[a], seed).unwrap();
        let mut seen = vec![0usize; n];
        for sub in views.subgraphs.subgraphs() {
            let cores = sub.provenance().iter().filter(|&&p| p == Provenance::Core).count();
            prop_assert_eq!(cores, sub.core_len());
            // core nodes come first
            prop_assert!(sub.provenance()[..cores].iter().all(|&p| p == Provenance::Core));
            for &v in sub.core_ids() {
                seen[v] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert!(views.partition.k() >= g.components().0);
    }

    #[test]
    fn coarsening_preserves_total_weight(n in 2usize..80, p in 0.02f64..0.3, r in 0.05f64..1.0, seed in 0u64..1000) {
        let g = erdos_renyi(n, p, 2, seed).unwrap();
        let views = prepare_views(&g, r, CoarsenMethod::NeighborhoodGrowth, Augmentation::None, seed).unwrap();
        let gc = build_coarsened_graph(&g, &views.partition, CoarseTask::None).unwrap();
        let total: f64 = g.degrees().iter().sum();
        prop_assert!((gc.adjacency().total_weight() - total).abs() < 1e-9);
        prop_assert!((gc.degrees().iter().sum::<f64>() - total).abs() < 1e-9);
    }
}
