mod common;

use common::{fixture, init, ok, pra, scripted_flow};

#[test]
fn report_on_unfinalized_workbook_fails() {
    let dir = tempfile::tempdir().unwrap();
    let wb = dir.path().join("wb.json");
    init(&wb, "AML-120");
    let out = pra(&wb, &["report"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: not_finalized: "), "{err}");
    assert!(err.contains("session not finalized"));
}

#[test]
fn scripted_flow_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = scripted_flow(&dir.path().join("a.json"));
    let b = scripted_flow(&dir.path().join("b.json"));
    assert_eq!(a, b);
    assert!(a.contains(
        "| Aspect group | First order | First order + prop | Second order | Second order + prop |"
    ));
    assert!(a.contains("## Disclaimer"));
    assert!(a.contains("| Reasoning | 6 |"));
    assert!(a.contains("**Total (max):** 6"));
    // Same workbook, same flags, same bytes.
    let again = ok(&dir.path().join("a.json"), &["report", "--format", "md"]);
    assert_eq!(a, again);
    // The flow reproduces the bundled fixture's session.
    let fixture_report = ok(&fixture("example_workbook.json"), &["report"]);
    assert_eq!(a, fixture_report);
}

#[test]
fn validate_fixture_and_list() {
    let out = ok(&fixture("example_workbook.json"), &["validate"]);
    assert!(out.starts_with("ok sess-"), "{out}");
    assert!(out.contains("scenarios 3"));
    let list = ok(&fixture("in_progress_workbook.json"), &["scenario", "list"]);
    assert_eq!(list.lines().count(), 3);
}

#[test]
fn other_formats_output_log_and_diff() {
    let dir = tempfile::tempdir().unwrap();
    let wb = dir.path().join("wb.json");
    std::fs::copy(fixture("example_workbook.json"), &wb).unwrap();

    let csv = ok(&wb, &["report", "--format", "table"]);
    assert!(csv.starts_with("section,key,column,value\n"));
    let structured = ok(&wb, &["report", "--format", "structured"]);
    let parsed = pra_core::reporting::parse_structured(&structured).unwrap();
    assert_eq!(parsed.tallied_matrix.total(), 4);

    let log_a = ok(
        &wb,
        &["output-log", "--completed-at", "2025-04-01T00:00:00Z"],
    );
    let log_b = ok(
        &wb,
        &["output-log", "--completed-at", "2025-04-01T00:00:00Z"],
    );
    assert_eq!(log_a, log_b);
    let log: pra_core::reporting::OutputLog = serde_json::from_str(&log_a).unwrap();
    assert!(log.verify());

    assert_eq!(
        ok(
            &wb,
            &[
                "diff",
                "--against",
                fixture("example_workbook.json").to_str().unwrap()
            ]
        ),
        "unchanged\n"
    );

    let out = pra(&wb, &["report", "--format", "pdf"]);
    assert!(!out.status.success());
}

#[test]
fn errors_are_machine_parsable_and_leave_workbook_alone() {
    let dir = tempfile::tempdir().unwrap();
    let wb = dir.path().join("wb.json");
    init(&wb, "AML-010");
    let before = std::fs::read(&wb).unwrap();
    let out = pra(
        &wb,
        &[
            "scenario",
            "add",
            "--id",
            "x",
            "--aspect",
            "capability/reasoning",
            "--interacts-with",
            "capability/agency",
            "--key-assumptions",
            "a",
            "--evidence-quality",
            "b",
            "--known-uncertainties",
            "c",
        ],
    );
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: gating: "), "{err}");
    assert_eq!(std::fs::read(&wb).unwrap(), before);

    ok(
        &wb,
        &[
            "scenario",
            "add",
            "--id",
            "y",
            "--aspect",
            "capability/reasoning",
        ],
    );
    let out = pra(
        &wb,
        &[
            "estimate",
            "--scenario",
            "y",
            "--assessor",
            "Ada",
            "--hsl",
            "2",
            "--ll",
            "3",
        ],
    );
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: rationale: "), "{err}");

    let out = pra(
        &wb,
        &[
            "estimate",
            "--scenario",
            "nope",
            "--assessor",
            "Ada",
            "--hsl",
            "9",
            "--ll",
            "1",
        ],
    );
    assert!(!out.status.success());

    let out = pra(&wb, &["init", "--bogus"]);
    assert!(!out.status.success());

    let missing = dir.path().join("missing.json");
    let out = pra(&missing, &["validate"]);
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error: io: "));

    std::fs::write(&wb, &before[..before.len() / 2]).unwrap();
    let out = pra(&wb, &["validate"]);
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error: parse: "));
}
