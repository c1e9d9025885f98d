use std::collections::{BTreeMap, HashSet};

use graphdr::eval::{auroc, random_split};
use graphdr::fingerprint::{tanimoto, Fingerprint};
use graphdr::molgraph::{AtomLabel, BondOrder, MolecularGraph};
use graphdr::pairscore::{Triple, TripleDataset};
use graphdr::substructure::{sp_patterns, wl_patterns, PatternBag};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn graph() -> impl Strategy<Value = MolecularGraph> {
    (1usize..10).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        let k = pairs.len();
        (
            prop::collection::vec(prop::sample::select(vec!["C", "N", "O", "S"]), n),
            subsequence(pairs, 0..=k),
        )
            .prop_map(|(atoms, edges)| {
                MolecularGraph::new(
                    "g",
                    atoms.into_iter().map(AtomLabel::organic).collect(),
                    edges.into_iter().map(|(u, v)| (u, v, BondOrder::Single)),
                )
                .unwrap()
            })
    })
}

fn graph_and_perm() -> impl Strategy<Value = (MolecularGraph, Vec<usize>)> {
    graph().prop_flat_map(|g| {
        let n = g.node_count();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

fn sorted(bag: &PatternBag) -> BTreeMap<String, u32> {
    bag.counts.iter().map(|(k, &v)| (k.clone(), v)).collect()
}

proptest! {
    #[test]
    fn patterns_invariant_under_relabeling((g, perm) in graph_and_perm(), k in 0u32..4) {
        let h = g.permuted(&perm);
        prop_assert_eq!(sorted(&wl_patterns(&g, k).unwrap()), sorted(&wl_patterns(&h, k).unwrap()));
        prop_assert_eq!(sorted(&sp_patterns(&g)), sorted(&sp_patterns(&h)));
    }

    #[test]
    fn pattern_totals(g in graph(), k in 0u32..4) {
        let n = g.node_count() as u64;
        prop_assert_eq!(wl_patterns(&g, k).unwrap().total(), n * u64::from(k + 1));
        let connected: u64 = g
            .component_sizes()
            .iter()
            .map(|&s| (s * (s - 1) / 2) as u64)
            .sum();
        prop_assert_eq!(sp_patterns(&g).total(), connected);
    }

    #[test]
    fn random_split_partitions(n in 2usize..200, ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let data = TripleDataset::new(
            (0..n)
                .map(|i| Triple {
                    drug_a: format!("a{i}"),
                    drug_b: format!("b{i}"),
                    context: "c".into(),
                    label: (i % 2) as u8,
                })
                .collect(),
        );
        let plan = random_split(&data, ratio, seed).unwrap();
        prop_assert!(!plan.train.is_empty() && !plan.test.is_empty());
        let all: HashSet<usize> = plan.train.iter().chain(&plan.test).copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(plan.train.len() + plan.test.len(), n);
        prop_assert_eq!(plan, random_split(&data, ratio, seed).unwrap());
    }

    #[test]
    fn auroc_flips_with_scores(
        pairs in prop::collection::vec((0u8..6, any::<bool>()), 2..100)
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let labels: Vec<u8> = pairs.iter().map(|p| u8::from(p.1)).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let a = auroc(&scores, &labels).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + auroc(&neg, &labels).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tanimoto_is_a_similarity(
        x in prop::collection::vec(0usize..64, 0..20),
        y in prop::collection::vec(0usize..64, 0..20),
    ) {
        let a = Fingerprint::from_bits("a", 64, x).unwrap();
        let b = Fingerprint::from_bits("b", 64, y).unwrap();
        let s = tanimoto(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, tanimoto(&b, &a).unwrap());
        prop_assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
    }
}
