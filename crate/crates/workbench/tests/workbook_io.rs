use std::path::PathBuf;

use pra_core::taxonomy::{load_taxonomy, Taxonomy};
use pra_core::testkit::{self, SessionShape};
use pra_workbench::{
    load_workbook, parse_workbook, save_workbook, WorkbookDocument, WorkbookError,
};

fn tax() -> &'static Taxonomy {
    Taxonomy::bundled()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

#[test]
fn random_sessions_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = testkit::rng(0xb00c);
    for i in 0..200 {
        let shape = SessionShape {
            finalize: i % 4 != 0,
            ..SessionShape::default()
        };
        let session = testkit::random_session(&mut rng, tax(), shape);
        let doc = WorkbookDocument::new(session.clone(), tax());
        let path = dir.path().join(format!("{i}.json"));
        let written = save_workbook(&doc, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(written, bytes.len());

        let loaded = load_workbook(&path, tax()).unwrap();
        assert!(loaded.warnings.is_empty());
        assert_eq!(loaded.document.session, session);
        assert_eq!(loaded.document, doc);
        // Canonical: re-saving produces the same bytes.
        assert_eq!(loaded.document.to_canonical_bytes(), bytes);
    }
}

#[test]
fn fixture_loads_with_three_scenarios() {
    let loaded = load_workbook(&fixture("example_workbook.json"), tax()).unwrap();
    let s = &loaded.document.session;
    assert_eq!(s.scenarios.len(), 3);
    assert_eq!(s.revision, 24);
    assert!(s.is_finalized());
    let raw: serde_json::Value =
        serde_json::from_slice(&std::fs::read(fixture("example_workbook.json")).unwrap()).unwrap();
    assert_eq!(raw["session"]["revision"], 24);

    let bytes = std::fs::read(fixture("example_workbook.json")).unwrap();
    assert_eq!(loaded.document.to_canonical_bytes(), bytes);
}

#[test]
fn missing_aspect_is_named() {
    let mut raw: serde_json::Value =
        serde_json::from_slice(&std::fs::read(fixture("in_progress_workbook.json")).unwrap())
            .unwrap();
    raw["session"]["scenarios"][1]["aspect_ref"] = "capability/telepathy".into();
    let err = parse_workbook(raw.to_string().as_bytes(), tax()).unwrap_err();
    let WorkbookError::Invalid(violations) = &err else {
        panic!("expected violations, got {err}");
    };
    assert!(violations
        .iter()
        .any(|v| v.path.contains("scenarios[1]") || v.path.contains("agency-misuse")));
    assert!(err.to_string().contains("capability/telepathy"), "{err}");
}

#[test]
fn truncated_file_is_a_parse_error() {
    let bytes = std::fs::read(fixture("example_workbook.json")).unwrap();
    for cut in [0, 1, bytes.len() / 3, bytes.len() - 3] {
        let err = parse_workbook(&bytes[..cut], tax()).unwrap_err();
        assert!(
            matches!(err, WorkbookError::Parse { .. }),
            "cut {cut}: {err}"
        );
    }
}

#[test]
fn unknown_format_version_is_rejected_first() {
    let mut raw: serde_json::Value =
        serde_json::from_slice(&std::fs::read(fixture("example_workbook.json")).unwrap()).unwrap();
    raw["format_version"] = "pra-workbook/7".into();
    // Also break the session so only the version check can explain the error.
    raw["session"]["revision"] = "many".into();
    let err = parse_workbook(raw.to_string().as_bytes(), tax()).unwrap_err();
    match err {
        WorkbookError::UnsupportedFormat { found } => assert_eq!(found, "pra-workbook/7"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn taxonomy_version_mismatch_is_a_warning() {
    let mut doc: serde_json::Value = serde_json::from_str(Taxonomy::bundled_source()).unwrap();
    doc["version"] = "0.9.2-test".into();
    let other = load_taxonomy(&doc.to_string()).unwrap();
    let loaded = load_workbook(&fixture("example_workbook.json"), &other).unwrap();
    assert_eq!(loaded.warnings.len(), 1);
    assert!(loaded.warnings[0].contains("0.9.2-test"));
}

#[test]
fn unwritable_destination_errors() {
    let session = testkit::random_session(&mut testkit::rng(1), tax(), SessionShape::default());
    let doc = WorkbookDocument::new(session, tax());
    let err = save_workbook(&doc, std::path::Path::new("/nonexistent-dir/x/wb.json")).unwrap_err();
    assert!(matches!(err, WorkbookError::Io { .. }));
}
