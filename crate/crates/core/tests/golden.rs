use ceg_engine::fixtures;
use ceg_engine::shell::{ceg_to_dot, parse_bundle, to_canonical_json};

const BUSHING_DOT: &str = include_str!("golden/bushing_ceg.dot");

#[test]
fn bushing_dot_matches_golden() {
    let model = fixtures::bushing().resolve().unwrap();
    let dot = ceg_to_dot(&model.ceg);
    assert_eq!(dot, BUSHING_DOT);
    assert_eq!(dot, ceg_to_dot(&fixtures::bushing().resolve().unwrap().ceg));
}

#[test]
fn fixture_bundles_survive_canonical_round_trip() {
    for b in [fixtures::bushing(), fixtures::warning_lights(), fixtures::hierarchy()] {
        let text = to_canonical_json(&b);
        let back = parse_bundle(&text).unwrap();
        assert_eq!(back, b);
        assert_eq!(to_canonical_json(&back), text);
        let (m1, m2) = (b.resolve().unwrap(), back.resolve().unwrap());
        assert_eq!(m1.ceg.topology_fingerprint(), m2.ceg.topology_fingerprint());
    }
}
