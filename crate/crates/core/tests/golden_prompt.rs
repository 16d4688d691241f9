use director_core::llm::PromptTemplate;
use director_core::simworld::BallObservation;

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/prompts/{name}.txt", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn never_seen() {
    let p = PromptTemplate::default().render("Approach the ball", &BallObservation::NEVER_SEEN);
    assert_eq!(p, golden("goal2_never_seen"));
}

#[test]
fn visible_at_seventy_centimetres() {
    let obs = BallObservation { visible: true, last_seen: Some(0.0), distance: Some(0.74) };
    assert_eq!(PromptTemplate::default().render("Approach the ball", &obs), golden("goal2_visible"));
}

#[test]
fn stale_sighting_after_the_swap() {
    let obs = BallObservation { visible: false, last_seen: Some(11.6), distance: Some(0.26) };
    assert_eq!(PromptTemplate::default().render("stand still and wave", &obs), golden("goal4_stale"));
}

#[test]
fn template_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    std::fs::write(&path, PromptTemplate::default().text()).unwrap();
    assert_eq!(PromptTemplate::from_file(&path).unwrap(), PromptTemplate::default());
    std::fs::write(&path, "no slots here").unwrap();
    assert!(PromptTemplate::from_file(&path).is_err());
}
