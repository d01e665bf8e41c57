use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pra_core::taxonomy::{Rubrics, Taxonomy};
use pra_core::testkit;
use pra_workbench::service::{router, AppState};
use pra_workbench::SessionStore;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(AppState {
        store: Arc::new(SessionStore::in_memory(Taxonomy::bundled().clone())),
        rubrics: Arc::new(Rubrics::bundled().clone()),
    })
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn pct(s: &str) -> String {
    s.bytes()
        .map(|b| {
            if b.is_ascii_alphanumeric() || b"-_.~".contains(&b) {
                (b as char).to_string()
            } else {
                format!("%{b:02X}")
            }
        })
        .collect()
}

fn rationale() -> Value {
    json!({
        "key_assumptions": "a",
        "evidence_quality": "b",
        "known_uncertainties": "c",
        "sensitivity_notes": "",
        "operator_or_interaction_rationale": null
    })
}

fn scenario(id: &str, aspect: &str) -> Value {
    let mut sc = serde_json::to_value(pra_core::assessment::ScenarioRecord::new(
        id,
        aspect,
        pra_core::assessment::HazardMode::Competence,
        "n",
    ))
    .unwrap();
    sc["rationale"] = rationale();
    sc["dimension_refs"] = json!(["governance-breakdown"]);
    sc
}

async fn create(app: &Router, aml: &str) -> String {
    let body = json!({
        "system_info": serde_json::to_value(testkit::system_info(2)).unwrap(),
        "aml": aml,
        "team_mode": "team",
    });
    let (status, v) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["revision"], 0);
    v["id"].as_str().unwrap().to_string()
}

async fn mutate(app: &Router, id: &str, rev: u64, command: Value) -> (StatusCode, Value) {
    let env = json!({ "expected_revision": rev, "actor": "assessor-0", "command": command });
    call(
        app,
        Method::POST,
        &format!("/sessions/{id}/mutations"),
        Some(env),
    )
    .await
}

#[tokio::test]
async fn reference_endpoints() {
    let app = app();
    let (s, tax) = call(&app, Method::GET, "/reference/taxonomy", None).await;
    assert_eq!(s, StatusCode::OK);
    let nodes = tax["nodes"].as_array().unwrap();
    let count = |lvl: u64| nodes.iter().filter(|n| n["level"] == lvl).count();
    assert_eq!((count(0), count(1), count(2)), (4, 10, 61));

    let (s, ops) = call(&app, Method::GET, "/reference/operators", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ops.as_array().unwrap().len(), 26);

    let (s, tables) = call(&app, Method::GET, "/reference/tables", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tables["risk_matrix"][7][2], 6);
    assert_eq!(tables["risk_matrix"][0][0], 0);
    assert_eq!(tables["aml_protocols"].as_array().unwrap().len(), 11);

    let (s, rubrics) = call(&app, Method::GET, "/reference/rubrics", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(!rubrics["entries"].as_array().unwrap().is_empty());

    let (s, v) = call(&app, Method::GET, "/nowhere", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");
}

#[tokio::test]
async fn session_lifecycle() {
    let app = app();
    let id = create(&app, "AML-010").await;

    let body = json!({
        "system_info": serde_json::to_value(testkit::system_info(2)).unwrap(),
        "aml": "AML-010",
        "team_mode": "team",
    });
    let (s, v) = call(&app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(
        (s, v["error"].as_str()),
        (StatusCode::CONFLICT, Some("exists"))
    );

    let (s, v) = call(&app, Method::GET, "/sessions/sess-missing", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["message"].as_str().unwrap().contains("sess-missing"));

    let (s, v) = call(&app, Method::GET, &format!("/sessions/{id}/aspects"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["working_level"], 1);
    assert_eq!(v["remaining"].as_array().unwrap().len(), 10);

    // Not finalized yet.
    let (s, v) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/report-card"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "not_finalized");
    assert_eq!(v["message"], "session not finalized");

    let add = json!({ "op": "add_scenario", "scenario": scenario("s1", "capability/reasoning") });
    let (s, v) = mutate(&app, &id, 0, add.clone()).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["revision"], 1);

    // Stale revision.
    let (s, v) = mutate(&app, &id, 0, add).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "conflict");
    assert_eq!(v["current_revision"], 1);

    // Gating rejection names the flag.
    let mut so = scenario("s2", "capability/reasoning");
    so["order"] = json!("second_order");
    so["interaction"] =
        json!({ "aspect_a": "capability/agency", "aspect_b": "capability/reasoning" });
    let (s, v) = mutate(
        &app,
        &id,
        1,
        json!({ "op": "add_scenario", "scenario": so }),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "gating");
    assert!(v["message"]
        .as_str()
        .unwrap()
        .contains("assess_second_order"));

    // Malformed envelope.
    let (s, v) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/mutations"),
        Some(json!({ "expected_revision": 1 })),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "invalid_request");

    // Divergent estimates.
    let mut rev = 1;
    for (who, hsl, ll) in [("assessor-0", 2, 3), ("assessor-1", 2, 6)] {
        let cmd = json!({
            "op": "record_estimate", "scenario_id": "s1", "assessor": who,
            "outcome_index": 0, "hsl": hsl, "ll": ll, "rationale": rationale()
        });
        let (s, v) = mutate(&app, &id, rev, cmd).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        rev += 1;
    }
    let (s, v) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/divergences"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["scenario_id"], "s1");
    assert_eq!(v[0]["flags"][0]["ll_spread"], 3);
    assert_eq!(v[0]["estimates"][0].as_array().unwrap().len(), 2);

    let (_, v) = mutate(
        &app,
        &id,
        rev,
        json!({ "op": "flag_divergences", "scenario_id": "s1" }),
    )
    .await;
    assert_eq!(v["result"]["flags"].as_array().unwrap().len(), 1);
    rev += 1;
    let entries = json!([
        { "assessor": "assessor-0", "outcome_index": 0, "hsl": 2, "ll": 5 },
        { "assessor": "assessor-1", "outcome_index": 0, "hsl": 2, "ll": 4 }
    ]);
    let (s, v) = mutate(
        &app,
        &id,
        rev,
        json!({ "op": "resolve_recalibration", "scenario_id": "s1", "post_entries": entries }),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    rev += 1;

    let (_, aspects) = call(&app, Method::GET, &format!("/sessions/{id}/aspects"), None).await;
    for a in aspects["remaining"].as_array().unwrap() {
        let cmd = json!({ "op": "mark_aspect_complete", "aspect_id": a, "rationale": "done" });
        let (s, v) = mutate(&app, &id, rev, cmd).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        rev += 1;
    }

    let fin = json!({ "expected_revision": rev - 1, "actor": "assessor-0" });
    let (s, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/finalize"),
        Some(fin),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    let fin = json!({ "expected_revision": rev, "actor": "assessor-0" });
    let (s, v) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/finalize"),
        Some(fin),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    rev += 1;

    let (s, snap) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(snap["state"], "finalized");
    assert_eq!(snap["revision"], rev);

    // Finalized sessions reject mutations.
    let (s, v) = mutate(&app, &id, rev, json!({ "op": "finalize" })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "finalized");

    let (s, card) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/report-card"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    // (HSL-2, LL-5) is the max-risk post entry.
    assert_eq!(card["total_max"], 3);
    assert_eq!(card["radar"].as_array().unwrap().len(), 6);

    let custom = json!({
        "name": "pair",
        "dimensions": [
            { "id": "governance-breakdown", "label": "Governance", "definition": "d" },
            { "id": "other", "label": "Other", "definition": "d" }
        ]
    });
    let uri = format!(
        "/sessions/{id}/report-card?scheme={}",
        pct(&custom.to_string())
    );
    let (s, card) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(s, StatusCode::OK, "{card}");
    assert_eq!(card["focused"][0]["risk_level"], 3);
    assert_eq!(card["focused"][1]["risk_level"], Value::Null);

    let uri = format!(
        "/sessions/{id}/report-card?scheme={}",
        pct("{\"name\":\"x\",\"dimensions\":[]}")
    );
    let (s, v) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");

    let (s, m) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/tallied-matrix"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(m["counts"][5][1], 1);

    let at = json!({ "completed_at": "2025-05-01T12:00:00Z" });
    let (s, log1) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/output-log"),
        Some(at.clone()),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let (_, log2) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/output-log"),
        Some(at),
    )
    .await;
    assert_eq!(log1, log2);
    assert_eq!(log1["content_digest"].as_str().unwrap().len(), 64);
    let (s, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/output-log"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn output_log_requires_finalized() {
    let app = app();
    let id = create(&app, "AML-010").await;
    let at = json!({ "completed_at": "2025-05-01T12:00:00Z" });
    let (s, v) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/output-log"),
        Some(at),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "not_finalized");
    let (s, _) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/tallied-matrix"),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
}
