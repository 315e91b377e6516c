use proptest::prelude::*;
use rig_normal::bounds::{
    bracket_best, bracket_half, bracket_log_branch, edge_kernel_norms, general_bound_bracket, q_log_margin,
};
use rig_normal::contractions::{norm_table, NormMethod};
use rig_normal::distance::{exact_distances, exact_pmf, mc_sample};
use rig_normal::moments::{expected_edges, variance_edges};
use rig_normal::sampler::{EdgeCountSampler, Strategy as SamplerStrategy};
use rig_normal::subgraphs::{enumerate_clique_covers, pi_complement, pi_cover_exact, pi_subgraph, SmallGraph};
use rig_normal::ModelParams;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn small_graph() -> impl Strategy<Value = SmallGraph> {
    (2usize..=4).prop_flat_map(|h| {
        let pairs: Vec<(usize, usize)> = (0..h).flat_map(|u| (u + 1..h).map(move |v| (u, v))).collect();
        let count = pairs.len();
        (1u32..1 << count).prop_map(move |mask| {
            let edges: Vec<_> = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
            SmallGraph::new(h, &edges).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_law_matches_moments(n in 2u64..=6, m in 1u64..=40, p in 0.02f64..0.98) {
        let params = ModelParams::new(n, m, p).unwrap();
        let pmf = exact_pmf(&params).unwrap();
        prop_assert!(pmf.probs.iter().all(|&w| w >= 0.0));
        prop_assert!((pmf.total() - 1.0).abs() < 1e-12);
        let (mean, var) = pmf.mean_variance();
        prop_assert!(rel(mean, expected_edges(&params)) < 1e-10);
        prop_assert!(rel(var, variance_edges(&params).variance) < 1e-10);
    }

    #[test]
    fn exact_distances_are_bounded(n in 2u64..=5, m in 1u64..=12, p in 0.05f64..0.95) {
        let d = exact_distances(&exact_pmf(&ModelParams::new(n, m, p).unwrap()).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&d.d_k));
        prop_assert!(d.d_w >= 0.0 && d.d_w <= 2.0);
    }

    #[test]
    fn covers_partition_the_subgraph_event(graph in small_graph(), m in 1u64..=12, p in 0.05f64..0.95) {
        let total: f64 = enumerate_clique_covers(&graph)
            .unwrap()
            .iter()
            .map(|c| pi_cover_exact(&graph, c, m, p).unwrap())
            .sum();
        prop_assert!(rel(total, pi_subgraph(&graph, m, p).unwrap()) < 1e-9);
    }

    #[test]
    fn complement_probability_shrinks_with_m(graph in small_graph(), m in 1u64..=1000, p in 0.01f64..0.99) {
        let a = pi_complement(&graph, m, p);
        let b = pi_complement(&graph, m + 1, p);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn norm_methods_agree(m in 1u64..=5, p in 0.01f64..0.99) {
        let c = norm_table(m, p, NormMethod::Closed).unwrap().entries();
        let a = norm_table(m, p, NormMethod::Alternating).unwrap().entries();
        for k in 0..5 {
            prop_assert!(c[k] >= 0.0);
            prop_assert!((c[k] - a[k]).abs() <= (1e-10 * c[k].abs()).max(1e-14), "k={} {} {}", k, c[k], a[k]);
        }
    }

    #[test]
    fn general_bracket_is_inverse_in_variance(m in 1u64..=30, p in 0.01f64..0.99, n in 2u64..10_000, scale in 0.1f64..10.0) {
        let params = ModelParams::new(n, m, p).unwrap();
        let norms = edge_kernel_norms(&norm_table(m, p, NormMethod::Closed).unwrap());
        let var = variance_edges(&params).variance;
        let a = general_bound_bracket(2, var, n, &norms).unwrap();
        let b = general_bound_bracket(2, var * scale, n, &norms).unwrap();
        prop_assert!(rel(a, b * scale) < 1e-12);
    }

    #[test]
    fn half_bracket_dominates_sharper_forms(n in 2u64..1_000_000, m in 1u64..1_000_000, p in 1e-4f64..0.1) {
        let params = ModelParams::new(n, m, p).unwrap();
        prop_assume!(params.mp3() <= 1.0);
        let best = bracket_best(&params).unwrap();
        let log = bracket_log_branch(&params).unwrap();
        let half = bracket_half(&params).unwrap();
        prop_assert!(best <= log * (1.0 + 1e-12));
        prop_assert!(log <= half * (1.0 + 1e-12));
    }

    #[test]
    fn q_margin_is_linear_in_m(m in 1u64..1_000_000, p in 0.001f64..0.999) {
        let one = q_log_margin(1, p).unwrap();
        prop_assert!(rel(q_log_margin(m, p).unwrap(), m as f64 * one) < 1e-12);
    }

    #[test]
    fn sampler_is_a_pure_function(n in 2u64..60, m in 1u64..40, p in 0.0f64..1.0, seed: u64, r in 0u64..1000) {
        let params = ModelParams::new(n, m, p).unwrap();
        let sampler = EdgeCountSampler::new(params).unwrap();
        let x = sampler.sample(seed, r);
        prop_assert_eq!(x, sampler.sample(seed, r));
        prop_assert!(x <= params.pair_count());
        let dense = EdgeCountSampler::with_strategy(params, SamplerStrategy::DenseRows).unwrap();
        let prefix = EdgeCountSampler::with_strategy(params, SamplerStrategy::PrefixBuckets).unwrap();
        prop_assert_eq!(dense.sample(seed, r), prefix.sample(seed, r));
    }

    #[test]
    fn negating_the_sample_keeps_distances(n in 3u64..40, m in 1u64..20, p in 0.05f64..0.95, seed: u64) {
        let params = ModelParams::new(n, m, p).unwrap();
        prop_assume!(variance_edges(&params).variance > 0.0);
        let s = mc_sample(&params, 500, seed, 1).unwrap();
        let a = s.distances();
        let b = s.negated().distances();
        prop_assert!((a.d_k - b.d_k).abs() < 1e-14);
        prop_assert!((a.d_w - b.d_w).abs() < 1e-12);
    }
}
