use fwn::config::{RunConfig, PRESETS};
use fwn::FwnError;

#[test]
fn presets_round_trip_through_json() {
    for name in PRESETS {
        let cfg = RunConfig::preset(name).unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn missing_sections_take_dimension_defaults() {
    let cfg = RunConfig::from_json(r#"{"scenario":{"torus_dim":3,"mass":0,"shift_c":2,"mode_cutoff":2}}"#).unwrap();
    assert_eq!(cfg.analysis.ladder, vec![4, 6, 8, 12, 16]);
    assert_eq!(cfg.fock.max_particles, 4);
    assert_eq!(cfg.verify.seed, 0);
    assert!(cfg.verify.tol.is_none());
}

#[test]
fn unknown_keys_are_rejected_in_every_section() {
    let base = r#""scenario":{"torus_dim":1,"mass":2,"mode_cutoff":4}"#;
    for extra in [
        r#""gauge":{"coefficients":[],"x":1}"#,
        r#""gauge":{"coefficients":[{"gamma":[1],"re":1,"im":0,"x":1}]}"#,
        r#""fock":{"max_particles":4,"x":1}"#,
        r#""analysis":{"p_values":[1],"ladder":[1,2,3,4],"rel_tol":1e-4,"x":1}"#,
        r#""verify":{"seed":1,"suites":[]}"#,
    ] {
        let text = format!("{{{base},{extra}}}");
        assert!(matches!(RunConfig::from_json(&text), Err(FwnError::Config(_))), "{text}");
    }
}

#[test]
fn semantic_errors_are_reported() {
    let bad = [
        r#"{"scenario":{"torus_dim":1,"mass":2,"mode_cutoff":4},"gauge":{"coefficients":[{"gamma":[1,0,0],"re":1,"im":0}]}}"#,
        r#"{"scenario":{"torus_dim":1,"mass":2,"mode_cutoff":4},"analysis":{"p_values":[1],"ladder":[4,3,5,6],"rel_tol":1e-4}}"#,
        r#"{"scenario":{"torus_dim":1,"mass":2,"mode_cutoff":4},"fock":{"max_particles":0}}"#,
        r#"{"scenario":{"torus_dim":1,"mass":2,"mode_cutoff":4},"verify":{"seed":0,"tol":-1}}"#,
    ];
    for text in bad {
        assert!(RunConfig::from_json(text).is_err(), "{text}");
    }
}
