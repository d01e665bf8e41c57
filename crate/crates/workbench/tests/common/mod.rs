#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn pra(workbook: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pra"))
        .arg("--workbook")
        .arg(workbook)
        .args(args)
        .output()
        .expect("pra runs")
}

pub fn ok(workbook: &Path, args: &[&str]) -> String {
    let out = pra(workbook, args);
    assert!(
        out.status.success(),
        "pra {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

const RATIONALE: [&str; 6] = [
    "--key-assumptions",
    "deployment as documented",
    "--evidence-quality",
    "moderate",
    "--known-uncertainties",
    "usage mix",
];

pub fn init(workbook: &Path, aml: &str) {
    ok(
        workbook,
        &[
            "init",
            "--aml",
            aml,
            "--mode",
            "team",
            "--team",
            "Ada (lead)",
            "--team",
            "Bo (analyst)",
            "--date",
            "2025-03-01",
            "--organization",
            "Example Lab",
            "--time-frame",
            "18 months",
            "--system-name",
            "Example Model",
            "--system-version",
            "2.1",
            "--access-level",
            "API",
            "--generational-scope",
            "current generation",
            "--assumptions",
            "Deployed as a general assistant",
        ],
    );
}

/// init, three scenarios, team estimates with one recalibration, every
/// aspect completed, finalize. Returns the Markdown report.
pub fn scripted_flow(workbook: &Path) -> String {
    init(workbook, "AML-110");
    let scenarios: [(&str, &str, &[&str]); 3] = [
        (
            "cap-reason",
            "capability/reasoning",
            &[
                "--outcome",
                "minor",
                "--outcome",
                "severe",
                "--dimension",
                "governance-breakdown",
            ],
        ),
        (
            "agency-misuse",
            "capability/agency",
            &["--dimension", "critical-infrastructure-failure"],
        ),
        (
            "privacy-leak",
            "impact-domain/individual",
            &["--dimension", "social-fabric-erosion"],
        ),
    ];
    for (id, aspect, extra) in scenarios {
        let mut args = vec!["scenario", "add", "--id", id, "--aspect", aspect];
        args.extend_from_slice(extra);
        args.extend_from_slice(&RATIONALE);
        ok(workbook, &args);
    }
    let estimates = [
        ("cap-reason", "Ada", "0", "3", "5"),
        ("cap-reason", "Bo", "0", "3", "5"),
        ("cap-reason", "Ada", "1", "4", "3"),
        ("cap-reason", "Bo", "1", "5", "6"),
        ("agency-misuse", "Ada", "0", "HSL-3", "LL-5"),
        ("agency-misuse", "Bo", "0", "3", "5"),
        ("privacy-leak", "Ada", "0", "2", "6"),
        ("privacy-leak", "Bo", "0", "2", "6"),
    ];
    for (s, who, o, h, l) in estimates {
        ok(
            workbook,
            &[
                "estimate",
                "--scenario",
                s,
                "--assessor",
                who,
                "--outcome",
                o,
                "--hsl",
                h,
                "--ll",
                l,
            ],
        );
    }
    let flags = ok(workbook, &["recalibrate", "--scenario", "cap-reason"]);
    assert!(flags.contains("outcome 1"), "{flags}");
    ok(
        workbook,
        &[
            "recalibrate",
            "--scenario",
            "cap-reason",
            "--resolve",
            "--entry",
            "Ada:1:4:5",
            "--entry",
            "Bo:1:5:4",
        ],
    );
    let aspects = ok(workbook, &["aspects"]);
    for aspect in aspects.lines() {
        ok(
            workbook,
            &[
                "complete-aspect",
                "--aspect",
                aspect,
                "--rationale",
                "reviewed",
            ],
        );
    }
    ok(workbook, &["finalize"]);
    ok(workbook, &["report", "--format", "md"])
}
