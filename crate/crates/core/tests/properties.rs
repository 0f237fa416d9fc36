mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use qaebac::crypto::{canonical_encode, keygen, sign_credential, verify_credential};
use qaebac::entropy::shannon_entropy;
use qaebac::ewpt::{sort_by_weight, Ewpt};
use qaebac::model::{Credential, Outcome, Reason};
use qaebac::optimizer::{compute_weights, decision_entropy, information_gain, AahPool, AnonymityTerm, DecisionRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn text() -> impl Strategy<Value = String> {
    "[a-z0-9 _.:-]{0,12}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoding_ignores_insertion_order(pairs in prop::collection::btree_map("[a-z]{1,6}", text(), 0..8)) {
        let forward: Credential = pairs.iter().map(|(a, v)| (a.as_str(), v.as_str())).collect();
        let backward: Credential = pairs.iter().rev().map(|(a, v)| (a.as_str(), v.as_str())).collect();
        prop_assert_eq!(canonical_encode(&forward).unwrap(), canonical_encode(&backward).unwrap());
        let encoded = canonical_encode(&forward).unwrap();
        prop_assert_eq!(&encoded[..4], &(pairs.len() as u32).to_be_bytes()[..]);
    }

    #[test]
    fn signatures_verify_and_detect_edits(
        pairs in prop::collection::btree_map("[a-z]{1,6}", text(), 1..6),
        seed in any::<[u8; 32]>(),
        extra in "[a-z]{7,9}",
    ) {
        let key = keygen(Some(&seed)).unwrap();
        let c: Credential = pairs.iter().map(|(a, v)| (a.as_str(), v.as_str())).collect();
        let sc = sign_credential(&key, &c).unwrap();
        prop_assert!(verify_credential(&key.public_key(), &sc));
        let mut edited = sc.clone();
        edited.credential.insert(extra, "x");
        prop_assert!(!verify_credential(&key.public_key(), &edited));
    }

    #[test]
    fn entropy_is_bounded(counts in prop::collection::vec(1u64..1000, 1..40)) {
        let h = shannon_entropy(counts.iter().copied());
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (counts.len() as f64).log2() + 1e-9);
        if counts.iter().all(|&c| c == counts[0]) {
            prop_assert!((h - (counts.len() as f64).log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn information_gain_is_within_outcome_entropy(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_instance(&mut rng, 6, 5, 0);
        let mut pool = AahPool::new(64).unwrap();
        for seq in 1..=n as u64 {
            let pairs = common::sorted_ids(&inst.space, &common::random_pairs(&mut rng, &inst.space, 0.6));
            let grant = rng.gen_bool(0.4);
            pool.record(DecisionRecord {
                pairs,
                outcome: if grant { Outcome::Grant } else { Outcome::Deny },
                reason: if grant { Reason::Granted } else { Reason::NoPath },
                seq,
            }).unwrap();
        }
        prop_assert!(pool.len() <= 64);
        let hd = decision_entropy(&pool);
        for attr in inst.space.attr_ids() {
            let ig = information_gain(&pool, &inst.space, attr);
            prop_assert!((0.0..=hd).contains(&ig));
        }
        let weights = compute_weights(&inst.space, &pool, inst.registry.matrix(), AnonymityTerm::Normalized);
        let w: Vec<f64> = weights.entries().iter().map(|e| e.weight).collect();
        prop_assert!(w.windows(2).all(|p| p[0] >= p[1]));
        prop_assert_eq!(weights.len(), inst.space.len());
    }

    #[test]
    fn tree_agrees_with_definition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = common::random_space(&mut rng, 6);
        let policies = common::random_policies(&mut rng, &space, 20);
        let weights = common::random_weights(&mut rng, &space);
        let tree = Ewpt::build(&policies, &space, &weights, 0).unwrap();
        prop_assert!(tree.leaf_count() <= policies.len());
        for _ in 0..50 {
            let req: BTreeMap<String, String> = common::random_pairs(&mut rng, &space, 0.7);
            let mut seq = common::sorted_ids(&space, &req);
            sort_by_weight(&space, &weights, &mut seq);
            let strict = tree.match_strict(&seq);
            prop_assert_eq!(strict.matched(), common::brute_match(&policies, &req, true));
            prop_assert!(strict.comparisons as usize <= tree.node_count());
            prop_assert_eq!(tree.match_subset(&seq).matched(), common::brute_match(&policies, &req, false));
        }
    }
}
