use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ceg_engine::ceg::{ceg_from_ptree, DEFAULT_PATH_CAP};
use ceg_engine::extraction::{sigma, Document};
use ceg_engine::fixtures;
use ceg_engine::graph::Digraph;
use ceg_engine::random::{random_backdoor_query, random_layered_fceg, random_staged_tree};
use ceg_engine::remedy::backdoor_remedial_effect;
use ceg_engine::shell::bundle::TreeDoc;
use ceg_engine::shell::oracle::{Manipulation, OracleJoint};
use ceg_engine::shell::{parse_bundle, to_canonical_json, ModelBundle};
use ceg_engine::tree::{compute_stages, same_up_to_permutation};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bundle_round_trip_is_canonical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = random_staged_tree(&mut rng, 15);
        let bundle = ModelBundle::new(TreeDoc::from_ptree(&pt));
        let text = to_canonical_json(&bundle);
        let back = parse_bundle(&text).unwrap();
        prop_assert_eq!(&back, &bundle);
        prop_assert_eq!(to_canonical_json(&back), text);
        let a = bundle.resolve().unwrap();
        let b = ceg_from_ptree(&pt).unwrap();
        prop_assert_eq!(a.ceg.topology_fingerprint(), b.topology_fingerprint());
    }

    #[test]
    fn oracle_marginal_is_path_probability(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ceg = ceg_from_ptree(&random_staged_tree(&mut rng, 15)).unwrap();
        let joint = OracleJoint::paths(&ceg, &[], DEFAULT_PATH_CAP).unwrap();
        prop_assert!((joint.total() - 1.0).abs() < 1e-12);
        for (p, w) in joint.path_marginal() {
            prop_assert_eq!(w, ceg.path_probability(&p).unwrap());
        }
    }

    #[test]
    fn stage_members_share_vectors(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = random_staged_tree(&mut rng, 15);
        let st = compute_stages(&pt);
        let internal: Vec<usize> = (0..pt.tree().num_vertices()).filter(|&v| !pt.tree().is_leaf(v)).collect();
        for &v in &internal {
            for &w in &internal {
                let same = st.stage_of(v) == st.stage_of(w);
                prop_assert_eq!(same, same_up_to_permutation(pt.theta(v), pt.theta(w)));
            }
        }
    }

    #[test]
    fn backdoor_matches_manipulated_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lc = random_layered_fceg(&mut rng, 16);
        let q = random_backdoor_query(&mut rng, &lc);
        if let Ok(t) = backdoor_remedial_effect(&lc.ceg, &q, DEFAULT_PATH_CAP) {
            let oracle = OracleJoint::paths(&lc.ceg, &[Manipulation::Florets(q.pi_star.clone())], DEFAULT_PATH_CAP)
                .unwrap()
                .mass(|r| q.y.holds(&lc.ceg, &r.path));
            prop_assert!((t.total - oracle).abs() < 1e-10);
            prop_assert!((t.lambda + t.lambda_bar - t.total).abs() < 1e-15);
        }
    }

    #[test]
    fn bayes_ball_agrees_with_trail_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..8);
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let mut g = Digraph::new();
        for s in &names {
            g.add_node(s);
        }
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.35) {
                    g.add_edge(&names[a], &names[b]);
                }
            }
        }
        let mut pick = |p: f64| -> BTreeSet<String> { names.iter().filter(|_| rng.random_bool(p)).cloned().collect() };
        let (a, b, z) = (pick(0.25), pick(0.25), pick(0.3));
        prop_assert_eq!(g.d_separated(&a, &b, &z).unwrap(), g.d_separated_by_trails(&a, &b, &z).unwrap());
    }

    #[test]
    fn sigma_is_acyclic_and_pure(words in proptest::collection::vec(
        prop::sample::select(vec![
            "seal", "deterioration", "oil", "leak", "caused", "led", "to", "due", "because", "of",
            "then", "after", "before", "moisture", "crack", "the", "in", "-", "resulted",
        ]),
        0..40,
    )) {
        let omega = fixtures::omega();
        let doc = Document::from_words("p", words.iter().copied());
        let a = sigma(&doc, &omega);
        prop_assert!(a.is_acyclic());
        prop_assert_eq!(&a, &sigma(&doc, &omega));
        for &(x, y) in &a.order {
            prop_assert!(x < a.events.len() && y < a.events.len() && x != y);
        }
    }
}

#[test]
fn mixed_decimal_and_number_probabilities_parse() {
    let text = r#"{"version": 1, "staged_tree": {"root": "v0", "florets": [
        {"vertex": "v0", "edges": [{"label": "a", "child": "l0", "prob": "0.25"}, {"label": "b", "child": "l1", "prob": 0.75}]}
    ], "leaves": {"l0": "fail", "l1": "not fail"}}}"#;
    let b = parse_bundle(text).unwrap();
    let m = b.resolve().unwrap();
    assert_eq!(m.ceg.num_internal(), 1);
    // numbers come back as decimal strings
    let canon = to_canonical_json(&b);
    assert!(canon.contains("\"prob\": \"0.75\""));
    let weights: BTreeMap<String, f64> =
        m.ceg.edges().iter().map(|e| (e.label.clone(), e.prob)).collect();
    assert_eq!(weights["b"], 0.75);
}
