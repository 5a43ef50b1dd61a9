use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twinops_core::faultloc::{
    localize, localize_mp, localize_weighted, message_passing_states, propagate_fault,
    SeverityWeights,
};
use twinops_core::topology::{ElementKind, TopologyGraph};
use twinops_testkit::{coverage_scores, on_path_elements, random_topology};

fn cards_on_paths(g: &TopologyGraph) -> Vec<String> {
    on_path_elements(g)
        .into_iter()
        .filter(|id| g.element(id).unwrap().kind.is_card())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn injected_card_fault_is_found(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_topology(&mut rng, 50, 4);
        for f in cards_on_paths(&g) {
            let alarms = propagate_fault(&g, &f).unwrap();
            let r = localize(&g, &alarms).unwrap();
            prop_assert_eq!(&r.root_cause_id, &f);
            let oracle = coverage_scores(&g, &alarms, &SeverityWeights::default());
            prop_assert_eq!(r.ranking.len(), oracle.len());
            for e in &r.ranking {
                prop_assert!((e.score - oracle[&e.element_id]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn span_fault_blames_a_card_downstream(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_topology(&mut rng, 50, 4);
        for f in on_path_elements(&g) {
            if g.element(&f).unwrap().kind != ElementKind::FiberSpan {
                continue;
            }
            let alarms = propagate_fault(&g, &f).unwrap();
            prop_assert!(alarms.iter().all(|a| a.element_id != f));
            let r = localize(&g, &alarms).unwrap();
            let downstream: Vec<_> = g.paths_through(&f).flat_map(|(p, i)| p.route[i + 1..].to_vec()).collect();
            prop_assert!(downstream.contains(&r.root_cause_id));
        }
    }

    #[test]
    fn alarm_order_does_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_topology(&mut rng, 50, 4);
        let cards = cards_on_paths(&g);
        let f = cards.choose(&mut rng).unwrap();
        let mut alarms = propagate_fault(&g, f).unwrap();
        let base = localize(&g, &alarms).unwrap();
        let base_mp = localize_mp(&g, &alarms, 3).unwrap();
        for _ in 0..5 {
            alarms.shuffle(&mut rng);
            prop_assert_eq!(&localize(&g, &alarms).unwrap(), &base);
            prop_assert_eq!(&localize_mp(&g, &alarms, 3).unwrap(), &base_mp);
        }
    }

    #[test]
    fn uniform_weight_scaling_keeps_ranking(seed in any::<u64>(), factor in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_topology(&mut rng, 50, 4);
        let cards = cards_on_paths(&g);
        let f = cards.choose(&mut rng).unwrap();
        let alarms = propagate_fault(&g, f).unwrap();
        let w = SeverityWeights::default();
        let a = localize_weighted(&g, &alarms, &w).unwrap();
        let b = localize_weighted(&g, &alarms, &w.scaled(factor)).unwrap();
        let ids = |r: &twinops_core::faultloc::LocalizationResult| {
            r.ranking.iter().map(|e| e.element_id.clone()).collect::<Vec<_>>()
        };
        prop_assert_eq!(&a.root_cause_id, &b.root_cause_id);
        prop_assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn message_passing_states_stay_in_unit_interval(seed in any::<u64>(), k in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_topology(&mut rng, 50, 4);
        let cards = cards_on_paths(&g);
        let f = cards.choose(&mut rng).unwrap();
        let alarms = propagate_fault(&g, f).unwrap();
        for (_, s) in message_passing_states(&g, &alarms, k).unwrap() {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn single_path_chain_argmax_stable_across_iterations(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_topology(&mut rng, 20, 1);
        for f in cards_on_paths(&g) {
            let alarms = propagate_fault(&g, &f).unwrap();
            let k1 = localize_mp(&g, &alarms, 1).unwrap().root_cause_id;
            let k10 = localize_mp(&g, &alarms, 10).unwrap().root_cause_id;
            prop_assert_eq!(&k1, &k10);
            prop_assert_eq!(&k1, &f);
        }
    }
}
