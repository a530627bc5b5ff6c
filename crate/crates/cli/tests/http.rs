use std::collections::BTreeMap;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use slipway_cli::server::{router, AppState, ErrorBody};
use slipway_core::baselines::ScenarioSet;
use slipway_core::eval::RocPoint;
use slipway_core::explain::BackgroundSet;
use slipway_core::features::{
    feature_index, feature_names, schema_checksum, PrecipType, SnowtamHistory, SnowtamReport, WeatherSample, WeatherSeries, N_FEATURES,
    SCHEMA_VERSION,
};
use slipway_core::gbt::{FeatureMatrix, LossKind, Tree, TreeEnsemble, TreeNode};
use slipway_core::service::{AssessmentPayload, Batch, DataStore, ExplanationSource, ModelBundle, Snapshot, TrainingManifest};
use slipway_core::time::{parse_timestamp, Timestamp};
use tower::ServiceExt;

fn stump(feature: usize, threshold: f64, lo: f64, hi: f64) -> Tree {
    Tree {
        nodes: vec![
            TreeNode::Split { feature, threshold, default_left: true, left: 1, right: 2 },
            TreeNode::Leaf { weight: lo },
            TreeNode::Leaf { weight: hi },
        ],
    }
}

fn bundle() -> ModelBundle {
    let names = feature_names().to_vec();
    let (depth, ta) = (feature_index("depth_mm").unwrap(), feature_index("ta").unwrap());
    let ensemble = |loss, trees, base| TreeEnsemble { base_score: base, trees, loss, feature_names: names.clone() };
    let rows: Vec<Vec<f64>> = [(0.0, 5.0), (0.0, -5.0), (10.0, 5.0), (10.0, -5.0)]
        .iter()
        .map(|&(d, t)| {
            let mut r = vec![f64::NAN; N_FEATURES];
            r[depth] = d;
            r[ta] = t;
            r
        })
        .collect();
    let bg = BackgroundSet::new(FeatureMatrix::from_rows(names.clone(), &rows).unwrap()).unwrap();
    ModelBundle {
        classifier: ensemble(LossKind::Logistic, vec![stump(depth, 5.0, -2.0, 2.0), stump(ta, 0.0, 0.5, -1.5)], -2.0),
        regressor: ensemble(LossKind::SquaredError, vec![stump(depth, 5.0, 0.1, -0.1), stump(ta, 0.0, -0.05, 0.05)], 0.2),
        schema_version: SCHEMA_VERSION,
        expected_positive_rate: 0.1,
        manifest: TrainingManifest {
            data_hash: "0".repeat(64),
            seed: 0,
            n_rows: 4,
            n_limited: 4,
            met_only: false,
            classifier_params: Default::default(),
            regressor_params: Default::default(),
            runways: vec!["01L".into(), "01R".into()],
            schema_checksum: schema_checksum(),
        },
        classifier_background: bg.clone(),
        regressor_background: bg,
    }
}

fn t(minute: i64) -> Timestamp {
    parse_timestamp("2024-01-10T00:00:00Z").unwrap() + chrono::Duration::minutes(minute)
}

fn sample(minute: i64, ta: f64, pt: PrecipType) -> WeatherSample {
    WeatherSample {
        timestamp: t(minute),
        pt: Some(pt),
        values: [if pt == PrecipType::None { 0.0 } else { 0.6 }, ta, ta + 2.0, 92.0, 4000.0, 1000.0, ta - 1.0, 1.0, 2.0],
    }
}

/// Five hours of weather on two runways; 01L is cold with a snow report.
fn state(roc: Option<Vec<RocPoint>>) -> AppState {
    let series = |runway: &str, ta: f64| {
        WeatherSeries::from_samples(runway, (0..=300).map(|m| sample(m, ta, if m == 200 { PrecipType::DrySnow } else { PrecipType::None })))
            .unwrap()
    };
    let weather = BTreeMap::from([("01L".to_string(), series("01L", -3.0)), ("01R".to_string(), series("01R", 4.0))]);
    let report = SnowtamReport {
        issued_at: t(10),
        runway: "01L".into(),
        layers: vec![4, 7],
        depth_mm: 8.0,
        coverage_pct: 100.0,
        sanded: false,
        chemicals: false,
        inspector_ba: Some(3),
    };
    let snowtams = BTreeMap::from([("01L".to_string(), SnowtamHistory::new(vec![report]).unwrap())]);
    AppState::new(bundle(), ScenarioSet::default(), DataStore::new(Snapshot::new(weather, snowtams)), roc)
}

async fn call(state: &AppState, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or_else(|_| panic!("not JSON: {}", String::from_utf8_lossy(&bytes))))
}

async fn get(state: &AppState, uri: &str) -> (StatusCode, Value) {
    call(state, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(state: &AppState, uri: &str, body: String) -> (StatusCode, Value) {
    call(state, Request::post(uri).header("content-type", "application/json").body(Body::from(body)).unwrap()).await
}

fn error(status: StatusCode, body: Value, expected: StatusCode, code: &str) -> ErrorBody {
    assert_eq!(status, expected, "{body}");
    let e: ErrorBody = serde_json::from_value(body).unwrap();
    assert_eq!(e.code, code);
    assert!(!e.message.is_empty());
    e
}

#[tokio::test]
async fn lists_runways() {
    let s = state(None);
    let (status, body) = get(&s, "/v1/runways").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body["runways"].as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["01L", "01R"]);
    assert_eq!(body["runways"][0]["last_observation"], "2024-01-10T05:00:00Z");
    assert_eq!(body["runways"][0]["last_report"], "2024-01-10T00:10:00Z");
    assert!(body["runways"][1]["last_report"].is_null());
    assert_eq!(body["model_versions"]["classifier"], json!(s.versions.classifier));
}

#[tokio::test]
async fn assessment_payload_is_valid() {
    let s = state(None);
    let (status, body) = get(&s, "/v1/runways/01L/assessment?at=2024-01-10T04:50:00Z").await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let p: AssessmentPayload = serde_json::from_value(body).unwrap();
    p.validate().unwrap();
    assert_eq!(p.runway_id, "01L");
    assert_eq!(p.timestamp, "2024-01-10T04:50:00Z");
    assert!(p.is_slippery);
    assert_eq!(p.arguments.source, ExplanationSource::Regression);
    assert_eq!(p.threshold, 0.1);
    assert_eq!(p.model_versions, s.versions);
    assert!(p.scenario_warnings.iter().any(|w| w == "SNOW"), "{:?}", p.scenario_warnings);
    assert!(p.arguments.positive.len() <= 5 && p.arguments.negative.len() <= 5);

    let (_, warm) = get(&s, "/v1/runways/01R/assessment?at=2024-01-10T04:50:00Z&threshold=0.5").await;
    let warm: AssessmentPayload = serde_json::from_value(warm).unwrap();
    assert!(!warm.is_slippery);
    assert_eq!(warm.threshold, 0.5);
    assert_eq!(warm.arguments.source, ExplanationSource::Classification);
}

#[tokio::test]
async fn assessment_defaults_to_latest_observation() {
    let s = state(None);
    let (status, body) = get(&s, "/v1/runways/01L/assessment").await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["timestamp"], "2024-01-10T05:00:00Z");
}

#[tokio::test]
async fn repeated_requests_are_identical() {
    let s = state(None);
    let (_, a) = get(&s, "/v1/runways/01L/assessment?at=2024-01-10T02:00:00Z").await;
    let (_, b) = get(&s, "/v1/runways/01L/assessment?at=2024-01-10T02:00:00Z").await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn structured_errors() {
    let s = state(None);
    let (st, body) = get(&s, "/v1/runways/01L/assessment?at=yesterday").await;
    let e = error(st, body, StatusCode::BAD_REQUEST, "invalid_input");
    assert!(e.detail.unwrap().contains("yesterday"));
    assert_eq!(e.model_versions.as_ref(), Some(&s.versions));

    let (st, body) = get(&s, "/v1/runways/01L/assessment?threshold=abc").await;
    error(st, body, StatusCode::BAD_REQUEST, "invalid_input");

    let (st, body) = get(&s, "/v1/runways/01L/assessment?at=2024-01-10T03:00:00Z&threshold=1.5").await;
    error(st, body, StatusCode::BAD_REQUEST, "invalid_input");

    let (st, body) = get(&s, "/v1/runways/27C/assessment?at=2024-01-10T03:00:00Z").await;
    error(st, body, StatusCode::NOT_FOUND, "not_found");

    let (st, body) = get(&s, "/v1/runways/01L/assessment?at=2024-01-11T03:00:00Z").await;
    error(st, body, StatusCode::SERVICE_UNAVAILABLE, "stale_data");

    let (st, body) = get(&s, "/v1/nothing").await;
    error(st, body, StatusCode::NOT_FOUND, "not_found");

    let (st, body) = get(&s, "/v1/roc").await;
    error(st, body, StatusCode::NOT_FOUND, "not_found");
}

#[tokio::test]
async fn whatif_without_overrides_matches_assessment() {
    let s = state(None);
    let (_, base) = get(&s, "/v1/runways/01L/assessment?at=2024-01-10T04:50:00Z").await;
    let (st, same) = post(&s, "/v1/whatif", json!({"runway": "01L", "at": "2024-01-10T04:50:00Z"}).to_string()).await;
    assert_eq!(st, StatusCode::OK, "{same}");
    assert_eq!(base, same);
}

#[tokio::test]
async fn whatif_applies_overrides() {
    let s = state(None);
    let req = json!({
        "runway": "01L",
        "at": "2024-01-10T04:50:00Z",
        "overrides": [
            {"kind": "report", "layers": "1", "depth_mm": 0.0},
            {"kind": "weather", "variable": "ta", "value": 6.0, "minutes": 60}
        ]
    });
    let (st, body) = post(&s, "/v1/whatif", req.to_string()).await;
    assert_eq!(st, StatusCode::OK, "{body}");
    let p: AssessmentPayload = serde_json::from_value(body).unwrap();
    p.validate().unwrap();
    assert!(!p.is_slippery);
    assert_eq!(p.arguments.source, ExplanationSource::Classification);

    // The stored data is untouched.
    let (_, after) = get(&s, "/v1/runways/01L/assessment?at=2024-01-10T04:50:00Z").await;
    assert_eq!(after["is_slippery"], true);
}

#[tokio::test]
async fn whatif_rejects_bad_requests() {
    let s = state(None);
    let (st, body) = post(&s, "/v1/whatif", "{not json".into()).await;
    error(st, body, StatusCode::BAD_REQUEST, "invalid_input");

    let unknown_kind = json!({"runway": "01L", "at": "2024-01-10T04:50:00Z", "overrides": [{"kind": "magic"}]});
    let (st, body) = post(&s, "/v1/whatif", unknown_kind.to_string()).await;
    error(st, body, StatusCode::BAD_REQUEST, "invalid_input");

    let unknown_feature =
        json!({"runway": "01L", "at": "2024-01-10T04:50:00Z", "overrides": [{"kind": "feature", "feature": "nope", "value": 1.0}]});
    let (st, body) = post(&s, "/v1/whatif", unknown_feature.to_string()).await;
    let e = error(st, body, StatusCode::BAD_REQUEST, "invalid_input");
    assert!(e.detail.unwrap().contains("nope"));

    let (st, body) = post(&s, "/v1/whatif", json!({"runway": "99", "at": "2024-01-10T04:50:00Z"}).to_string()).await;
    error(st, body, StatusCode::NOT_FOUND, "not_found");
}

#[tokio::test]
async fn manifest_and_roc() {
    let roc = vec![
        RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY },
        RocPoint { fpr: 0.2, tpr: 0.7, threshold: 0.4 },
        RocPoint { fpr: 1.0, tpr: 1.0, threshold: 0.01 },
    ];
    let s = state(Some(roc.clone()));
    let (st, body) = get(&s, "/v1/model/manifest").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body["manifest"]["runways"], json!(["01L", "01R"]));
    assert_eq!(body["expected_positive_rate"], 0.1);
    assert_eq!(body["schema_version"], json!(SCHEMA_VERSION));

    let (st, body) = get(&s, "/v1/roc").await;
    assert_eq!(st, StatusCode::OK);
    assert!(body["points"][0]["threshold"].is_null());
    let points: Vec<RocPoint> = serde_json::from_value(body["points"].clone()).unwrap();
    assert_eq!(points, roc);
}

#[tokio::test]
async fn committed_batches_are_served() {
    let s = state(None);
    let (st, _) = get(&s, "/v1/runways/01R/assessment?at=2024-01-10T06:00:00Z").await;
    assert_eq!(st, StatusCode::SERVICE_UNAVAILABLE);
    let batch = Batch { weather: (301..=360).map(|m| ("01R".to_string(), sample(m, 4.0, PrecipType::None))).collect(), snowtams: vec![] };
    s.store.commit(batch).unwrap();
    let (st, body) = get(&s, "/v1/runways/01R/assessment?at=2024-01-10T06:00:00Z").await;
    assert_eq!(st, StatusCode::OK, "{body}");
    let (_, list) = get(&s, "/v1/runways").await;
    assert_eq!(list["runways"][1]["last_observation"], "2024-01-10T06:00:00Z");
}
