//! The checked-in Abilene document must stay in lockstep with the
//! programmatic fixture.

use std::path::Path;

use lbsim_core::topology::{build_abilene, load_topology, AbileneProfile};

#[test]
fn abilene_document_matches_builder() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/abilene.json");
    let from_file = load_topology(&path).expect("fixture document loads");
    let built = build_abilene(AbileneProfile::default());
    assert_eq!(from_file, built);
}
