//! Writer/parser round-trip properties on generated scores: serializing a
//! model and re-parsing it must reproduce the model exactly and without
//! warnings, and `standardize` must be a fixed point of itself.

mod common;

use common::{gen_score, GenConfig};
use omrned::kern::{parse_lenient, standardize, to_ekern, write_kern};
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn parse_inverts_write_on_generated_scores() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let cfg = GenConfig::default();
    for case in 0..400 {
        let score = gen_score(&mut rng, &cfg);
        let text = match write_kern(&score) {
            Ok(t) => t,
            Err(e) => panic!("case {case}: generated score failed to serialize: {e}\n{score:#?}"),
        };
        let (mut reparsed, warnings) = parse_lenient(&text);
        assert!(
            warnings.is_empty(),
            "case {case}: canonical output produced warnings {warnings:?}\n---\n{text}"
        );
        reparsed.source_warnings.clear();
        assert_eq!(
            reparsed, score,
            "case {case}: round trip changed the model\n---\n{text}"
        );
    }
}

#[test]
fn standardize_is_idempotent_on_generated_scores() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let cfg = GenConfig::default();
    for _ in 0..200 {
        let score = gen_score(&mut rng, &cfg);
        let text = write_kern(&score).unwrap();
        let once = standardize(&text);
        assert_eq!(once, text, "writer output is already canonical");
        assert_eq!(standardize(&once), once);
    }
}

#[test]
fn ekern_round_trip_equals_standardize_on_generated_scores() {
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let cfg = GenConfig::default();
    for _ in 0..200 {
        let score = gen_score(&mut rng, &cfg);
        let text = write_kern(&score).unwrap();
        let ek = to_ekern(&text);
        let back = omrned::kern::from_ekern(&ek).expect("generated ekern parses");
        assert_eq!(back, standardize(&text));
    }
}
