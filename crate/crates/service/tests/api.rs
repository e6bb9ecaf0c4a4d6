use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde_json::{json, Value as Json};
use tower::ServiceExt;
use viewclean::catalog::{Catalog, DatasetConfig, Source, TaskCache};
use viewclean::classifier::Label;
use viewclean::engine::{run_cleaning, CleaningConfig, StopReason};
use viewclean::labeler::OracleLabeler;
use viewclean::synth;
use viewclean_service::api::{BatchResponse, ErrorBody, SessionDescriptor, SubmitResponse, ViewResponse};
use viewclean_service::{router, session_digest, AppState};

fn catalog() -> Catalog {
    let mut c = Catalog::default();
    c.insert(DatasetConfig {
        name: "synthetic".into(),
        source: Source::Synthetic {
            n: 200,
            dup_rate: 0.15,
            noise: 0.1,
            seed: 4,
        },
        schema: Vec::new(),
        features: synth::default_features(),
        blocking: synth::default_blocking(),
        views: vec![synth::top3_view(), synth::count_view(), synth::avg_price_view()],
        expected: None,
    })
    .unwrap();
    c
}

fn state(checkpoints: Option<PathBuf>) -> AppState {
    AppState::new(TaskCache::new(catalog(), PathBuf::from(".")), checkpoints)
}

fn config() -> Json {
    json!({ "budget": 40, "batch": 9, "initial_batch": 13, "seed": 21, "epsilon": 0.0, "window": 50 })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Json>) -> (StatusCode, Json) {
    call_with(app, method, uri, body, &[]).await
}

async fn call_with(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Json>,
    headers: &[(&str, &str)],
) -> (StatusCode, Json) {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Json::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Json::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn parse<T: DeserializeOwned>(v: Json) -> T {
    serde_json::from_value(v).unwrap()
}

async fn create(app: &Router, views: &[&str], cfg: Json) -> SessionDescriptor {
    let (status, body) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({ "dataset": "synthetic", "views": views, "config": cfg })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    parse(body)
}

async fn batch(app: &Router, id: &str) -> BatchResponse {
    let (status, body) = call(app, "GET", &format!("/sessions/{id}/batch"), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    parse(body)
}

fn truth() -> viewclean::GroundTruth {
    synth::generate_synthetic(200, 0.15, 0.1, 4).unwrap().1
}

fn oracle_labels(b: &BatchResponse, truth: &viewclean::GroundTruth) -> Json {
    let labels: Vec<Json> = b
        .pairs
        .iter()
        .map(|p| json!({ "pair": p.pair, "label": Label::from_bool(truth.is_match(&p.pair)) }))
        .collect();
    json!({ "labels": labels })
}

#[tokio::test]
async fn fresh_session_offers_a_stable_first_batch() {
    let app = router(state(None));
    let d = create(&app, &["Top3"], config()).await;
    assert_eq!(d.summary.outstanding, 13);
    assert_eq!(d.summary.labels_used, 0);
    assert!(!d.summary.stopped);
    let a = batch(&app, &d.id).await;
    let b = batch(&app, &d.id).await;
    assert_eq!(a, b);
    assert_eq!(a.pairs.len(), 13);
    assert_eq!(a.schema.len(), 4);
    assert!(a.pairs.iter().all(|p| p.left.id == p.pair.low() && p.right.id == p.pair.high()));

    let (status, body) = call(&app, "GET", &format!("/sessions/{}", d.id), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse::<SessionDescriptor>(body), d);
}

#[tokio::test]
async fn bad_creates_are_rejected_without_a_session() {
    let app = router(state(None));
    let cases = [
        (json!({ "dataset": "nope", "views": ["Top3"] }), StatusCode::NOT_FOUND),
        (json!({ "dataset": "synthetic", "views": ["Nope"] }), StatusCode::NOT_FOUND),
        (json!({ "dataset": "synthetic", "views": [] }), StatusCode::BAD_REQUEST),
        (
            json!({ "dataset": "synthetic", "views": ["Top3"], "config": { "budget": 5, "initial_batch": 13 } }),
            StatusCode::BAD_REQUEST,
        ),
        (
            json!({ "dataset": "synthetic", "views": ["Top3"], "config": { "alpha": 2.0 } }),
            StatusCode::BAD_REQUEST,
        ),
        (json!({ "views": ["Top3"] }), StatusCode::BAD_REQUEST),
    ];
    for (req, want) in cases {
        let (status, body) = call(&app, "POST", "/sessions", Some(req.clone())).await;
        assert_eq!(status, want, "{req} -> {body}");
        assert!(parse::<ErrorBody>(body).error.len() > 3);
    }
    let (status, _) = call(&app, "GET", "/sessions/missing/batch", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idempotency_key_returns_the_same_session() {
    let app = router(state(None));
    let req = json!({ "dataset": "synthetic", "views": ["Top3"], "config": config() });
    let hdr = [("Idempotency-Key", "abc-1")];
    let (s1, a) = call_with(&app, "POST", "/sessions", Some(req.clone()), &hdr).await;
    let (s2, b) = call_with(&app, "POST", "/sessions", Some(req.clone()), &hdr).await;
    assert_eq!((s1, s2), (StatusCode::CREATED, StatusCode::CREATED));
    assert_eq!(a, b);
    let (_, c) = call(&app, "POST", "/sessions", Some(req)).await;
    assert_ne!(a["id"], c["id"]);

    // the key may also travel in the body
    let req = json!({ "dataset": "synthetic", "views": ["Top3"], "idempotency_key": "k2" });
    let (_, x) = call(&app, "POST", "/sessions", Some(req.clone())).await;
    let (_, y) = call(&app, "POST", "/sessions", Some(req)).await;
    assert_eq!(x["id"], y["id"]);
}

#[tokio::test]
async fn mismatched_submissions_are_rejected_whole() {
    let app = router(state(None));
    let truth = truth();
    let d = create(&app, &["Top3"], config()).await;
    let b = batch(&app, &d.id).await;
    let good = oracle_labels(&b, &truth);

    let mut partial = good.clone();
    partial["labels"].as_array_mut().unwrap().pop();
    let mut foreign = good.clone();
    foreign["labels"][0]["pair"] = json!([0, 1]);
    if b.pairs.iter().any(|p| p.pair.low().0 == 0 && p.pair.high().0 == 1) {
        foreign["labels"][0]["pair"] = json!([0, 2]);
    }
    let uri = format!("/sessions/{}/labels", d.id);
    for bad in [partial, foreign, json!({ "labels": [] })] {
        let (status, body) = call(&app, "POST", &uri, Some(bad)).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(batch(&app, &d.id).await, b);
    }
    let (status, _) = call(&app, "POST", &uri, Some(json!({ "labels": "yes" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = call(&app, "POST", &uri, Some(good)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let r: SubmitResponse = parse(body);
    assert_eq!(r.summary.labels_used, 13);
    assert_eq!(r.record.batch, 1);
    assert!(r.view_change.is_some());
    assert_eq!(r.views.len(), 1);
    assert_eq!(r.views[0].name, "Top3");
}

#[tokio::test]
async fn http_session_matches_oracle_replay() {
    let st = state(None);
    let app = router(st.clone());
    let truth = truth();
    let mut cfg = config();
    cfg["holdout"] = json!(false);
    let d = create(&app, &["Top3", "Count*"], cfg.clone()).await;
    let uri = format!("/sessions/{}/labels", d.id);
    let mut last = None;
    loop {
        let b = batch(&app, &d.id).await;
        if b.stopped {
            assert_eq!(b.reason, Some(StopReason::Budget));
            assert!(b.pairs.is_empty());
            break;
        }
        let (status, body) = call(&app, "POST", &uri, Some(oracle_labels(&b, &truth))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        last = Some(parse::<SubmitResponse>(body));
    }
    let last = last.unwrap();
    assert_eq!(last.summary.labels_used, 40);
    assert!(last.summary.stopped);

    let (status, body) = call(&app, "GET", &format!("/sessions/{}/view", d.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let v: ViewResponse = parse(body);
    assert_eq!(v.views, last.views);
    assert_eq!(v.dirty.len(), 2);
    assert_eq!(v.history.len(), v.summary.batches - 1);

    // after the stop every write is refused and the state is read-only
    let (status, body) = call(&app, "POST", &uri, Some(json!({ "labels": [] }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(parse::<ErrorBody>(body).summary.unwrap(), last.summary);

    // the same labels through the oracle labeler reproduce the state
    let cache = TaskCache::new(catalog(), PathBuf::from("."));
    let prepared = cache
        .prepared("synthetic", &["Top3".into(), "Count*".into()], Default::default())
        .unwrap();
    let cfg: CleaningConfig = serde_json::from_value(cfg).unwrap();
    let mut oracle = OracleLabeler::new(&truth);
    let offline = run_cleaning(prepared, &mut oracle, cfg).unwrap();
    assert_eq!(session_digest(&st, &d.id).unwrap(), offline.digest());
}

#[tokio::test]
async fn convergence_reported_through_submit() {
    let app = router(state(None));
    let truth = truth();
    let cfg = json!({ "budget": 200, "batch": 10, "epsilon": 1.0, "window": 1, "seed": 3 });
    let d = create(&app, &["AvgPrice"], cfg).await;
    let uri = format!("/sessions/{}/labels", d.id);
    let mut reasons = Vec::new();
    for _ in 0..2 {
        let b = batch(&app, &d.id).await;
        let (_, body) = call(&app, "POST", &uri, Some(oracle_labels(&b, &truth))).await;
        reasons.push(parse::<SubmitResponse>(body).summary.reason);
    }
    // the first change (against the dirty view) is not part of the history
    assert_eq!(reasons, vec![None, Some(StopReason::Converged)]);
    let b = batch(&app, &d.id).await;
    assert!(b.stopped && b.reason == Some(StopReason::Converged));
}

#[tokio::test]
async fn checkpoints_restore_identical_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let cps = dir.path().join("sessions");
    let st = state(Some(cps.clone()));
    let app = router(st.clone());
    let truth = truth();
    let d = create(&app, &["Top3"], config()).await;
    let uri = format!("/sessions/{}/labels", d.id);
    for _ in 0..2 {
        let b = batch(&app, &d.id).await;
        let (status, _) = call(&app, "POST", &uri, Some(oracle_labels(&b, &truth))).await;
        assert_eq!(status, StatusCode::OK);
    }
    let before = batch(&app, &d.id).await;
    let digest = session_digest(&st, &d.id).unwrap();

    let cp = viewclean_service::read_checkpoint(&cps.join(format!("{}.json", d.id))).unwrap();
    assert_eq!(cp.transcript.len(), 22);

    let revived = state(Some(cps));
    assert_eq!(revived.restore().unwrap(), 1);
    let app2 = router(revived.clone());
    assert_eq!(session_digest(&revived, &d.id).unwrap(), digest);
    assert_eq!(batch(&app2, &d.id).await, before);
    let (_, body) = call(&app2, "GET", &format!("/sessions/{}", d.id), None).await;
    let d2: SessionDescriptor = parse(body);
    assert_eq!(d2.created_at, d.created_at);
    assert_eq!(d2.summary.labels_used, 22);
}

#[tokio::test]
async fn sessions_progress_independently_in_parallel() {
    let app = Arc::new(router(state(None)));
    let truth = Arc::new(truth());
    let mut tasks = Vec::new();
    for seed in 0..4u64 {
        let app = app.clone();
        let truth = truth.clone();
        tasks.push(tokio::spawn(async move {
            let cfg = json!({ "budget": 31, "batch": 9, "seed": seed, "epsilon": 0.0, "window": 50 });
            let d = create(&app, &["Top3"], cfg).await;
            loop {
                let b = batch(&app, &d.id).await;
                if b.stopped {
                    return b.labels_used;
                }
                let uri = format!("/sessions/{}/labels", d.id);
                let (status, _) = call(&app, "POST", &uri, Some(oracle_labels(&b, &truth))).await;
                assert_eq!(status, StatusCode::OK);
            }
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), 31);
    }
}
