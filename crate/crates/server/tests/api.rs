use std::sync::Arc;

use activecorr::binning::{build_pair_graph, make_log_bins, true_edge_counts};
use activecorr::catalog::{save_catalog, Bounds, Catalog};
use activecorr::estimators::EdgeScoreModel;
use activecorr::experiments::synthetic::uniform_catalog;
use activecorr::sampler::Session;
use activecorr::variance::variance_report;
use activecorr::Execution;
use activecorr_server::{router, AppState, EstimatesView, SessionView, Status, StopView};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
    catalog: Catalog,
}

fn fixture(n: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let catalog = uniform_catalog(n, 0.5, Bounds::unit(), 7).unwrap();
    save_catalog(&catalog, dir.path().join("field.csv")).unwrap();
    let app = router(Arc::new(AppState::new(dir.path())));
    Fixture {
        _dir: dir,
        app,
        catalog,
    }
}

fn bins_json() -> Value {
    json!({"theta_min": 0.05, "theta_max": 1.5, "num_bins": 4})
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(app: &Router, seed: u64, options: Value) -> SessionView {
    let (status, v) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"catalog": "field.csv", "bins": bins_json(), "seed": seed, "options": options})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    serde_json::from_value(v).unwrap()
}

async fn label(app: &Router, id: &str, vertex: u32, label: bool) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/sessions/{id}/labels"),
        Some(json!({"vertex": vertex, "label": u8::from(label)})),
    )
    .await
}

#[tokio::test]
async fn create_validates_input() {
    let fx = fixture(40);
    let s = create(&fx.app, 1, json!({})).await;
    assert_eq!(s.status, Status::AwaitingLabel);
    assert!(s.pending.is_some());
    assert_eq!(s.labels_used, 0);

    let missing = json!({"catalog": "nope.csv", "bins": bins_json(), "seed": 1});
    assert_eq!(call(&fx.app, "POST", "/sessions", Some(missing)).await.0, StatusCode::NOT_FOUND);

    let bad_bins = json!({"catalog": "field.csv", "bins": {"edges": [0.3, 0.1]}, "seed": 1});
    let (status, v) = call(&fx.app, "POST", "/sessions", Some(bad_bins)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "bins");

    let escape = json!({"catalog": "../field.csv", "bins": bins_json(), "seed": 1});
    assert_eq!(call(&fx.app, "POST", "/sessions", Some(escape)).await.0, StatusCode::BAD_REQUEST);

    let malformed = json!({"catalog": "field.csv", "seed": "x"});
    assert_eq!(call(&fx.app, "POST", "/sessions", Some(malformed)).await.0, StatusCode::BAD_REQUEST);

    let bad_level = json!({"catalog": "field.csv", "bins": bins_json(), "seed": 1, "options": {"level": 2.0}});
    let (status, v) = call(&fx.app, "POST", "/sessions", Some(bad_level)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "options.level");

    assert_eq!(call(&fx.app, "GET", "/sessions/zzz", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&fx.app, "GET", "/sessions/zzz/estimates", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(label(&fx.app, "zzz", 0, true).await.0, StatusCode::NOT_FOUND);

    let (status, v) = call(&fx.app, "GET", "/catalogs", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!(["field.csv"]));
}

#[tokio::test]
async fn full_run_labels_each_source_once_and_reaches_truth() {
    let fx = fixture(40);
    let truth = fx.catalog.labels().unwrap();
    let s = create(&fx.app, 3, json!({})).await;
    let id = s.id.clone();
    let mut asked = Vec::new();
    let mut pending = s.pending;
    let mut history_len = 0;
    while let Some(p) = pending {
        asked.push(p.id);
        let wrong = (p.id + 1) % 40;
        if wrong != p.id {
            assert_eq!(label(&fx.app, &id, wrong, true).await.0, StatusCode::CONFLICT);
        }
        let (status, v) = label(&fx.app, &id, p.id, truth[p.id as usize]).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        // resubmitting the same label is a conflict
        assert_eq!(label(&fx.app, &id, p.id, truth[p.id as usize]).await.0, StatusCode::CONFLICT);
        let view: SessionView = serde_json::from_value(v).unwrap();
        pending = view.pending;

        let (_, e) = call(&fx.app, "GET", &format!("/sessions/{id}/estimates"), None).await;
        let e: EstimatesView = serde_json::from_value(e).unwrap();
        let len: usize = e.bins.iter().map(|b| b.points.len()).sum();
        assert!(len >= history_len);
        history_len = len;
    }
    let mut sorted = asked.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), asked.len());

    let (_, v) = call(&fx.app, "GET", &format!("/sessions/{id}"), None).await;
    let view: SessionView = serde_json::from_value(v).unwrap();
    assert_eq!(view.status, Status::Complete);
    assert_eq!(view.labels_used, 40);
    let graph = build_pair_graph(&fx.catalog, &make_log_bins(0.05, 1.5, 4).unwrap(), Execution::Sequential).unwrap();
    let want = true_edge_counts(&graph, &truth);
    for b in &view.bins {
        assert_eq!(b.estimate, Some(want[b.bin] as f64));
    }
    assert_eq!(label(&fx.app, &id, 0, true).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn api_replay_matches_library_session() {
    let fx = fixture(50);
    let truth = fx.catalog.labels().unwrap();
    let bins = make_log_bins(0.05, 1.5, 4).unwrap();
    let graph = Arc::new(build_pair_graph(&fx.catalog, &bins, Execution::Sequential).unwrap());
    let model = Arc::new(EdgeScoreModel::product(&graph, fx.catalog.probs()).unwrap());
    let mut lib = Session::new(graph.clone(), model.clone(), 11).unwrap();
    let mut intervals = Vec::new();
    while lib.step_with(|v| truth[v as usize]).unwrap() {
        if lib.labels_used() % 5 == 0 {
            for t in lib.tracks().iter().filter(|t| t.state.k() >= 4) {
                let r = variance_report(&t.state, lib.labels(), &graph, &model, lib.labels_used(), 0.9, Execution::Sequential)
                    .unwrap();
                intervals.push((t.bin, lib.labels_used(), t.state.k(), r.ci_low, r.ci_high));
            }
        }
    }

    let s = create(&fx.app, 11, json!({"ci_every": 5, "level": 0.9})).await;
    let mut pending = s.pending;
    while let Some(p) = pending {
        let (status, v) = label(&fx.app, &s.id, p.id, truth[p.id as usize]).await;
        assert_eq!(status, StatusCode::OK);
        pending = serde_json::from_value::<SessionView>(v).unwrap().pending;
    }
    let (_, e) = call(&fx.app, "GET", &format!("/sessions/{}/estimates", s.id), None).await;
    let e: EstimatesView = serde_json::from_value(e).unwrap();
    assert_eq!(e.steps, lib.events().len());

    let mut from_lib = Vec::new();
    for ev in lib.events() {
        for u in &ev.bins {
            from_lib.push((u.bin, ev.step, u.k, u.estimate.to_bits()));
        }
    }
    let mut from_api: Vec<_> = e
        .bins
        .iter()
        .flat_map(|b| b.points.iter().map(move |p| (b.bin, p.step, p.k, p.estimate.to_bits())))
        .collect();
    from_lib.sort_unstable();
    from_api.sort_unstable();
    assert_eq!(from_lib, from_api);

    // intervals are attached to the last point of each bin at a checkpoint
    let mut api_intervals = Vec::new();
    for b in &e.bins {
        for p in &b.points {
            if let (Some(lo), Some(hi)) = (p.ci_low, p.ci_high) {
                api_intervals.push((b.bin, p.labels_used, p.k, lo, hi));
            }
        }
    }
    let key = |x: &(usize, usize, usize, f64, f64)| (x.1, x.0);
    api_intervals.sort_by_key(key);
    intervals.sort_by_key(key);
    assert!(!intervals.is_empty());
    assert_eq!(api_intervals.len(), intervals.len());
    for (a, b) in api_intervals.iter().zip(&intervals) {
        assert_eq!((a.0, a.1, a.2), (b.0, b.1, b.2));
        assert_eq!(a.3.to_bits(), b.3.to_bits());
        assert_eq!(a.4.to_bits(), b.4.to_bits());
    }
}

#[tokio::test]
async fn same_seed_same_requests() {
    let fx = fixture(30);
    let truth = fx.catalog.labels().unwrap();
    let a = create(&fx.app, 5, json!({"estimator": "MC"})).await;
    let b = create(&fx.app, 5, json!({"estimator": "MC"})).await;
    assert_ne!(a.id, b.id);
    let (mut pa, mut pb) = (a.pending, b.pending);
    while let (Some(x), Some(y)) = (pa.clone(), pb.clone()) {
        assert_eq!(x, y);
        let (_, va) = label(&fx.app, &a.id, x.id, truth[x.id as usize]).await;
        let (_, vb) = label(&fx.app, &b.id, y.id, truth[y.id as usize]).await;
        let va: SessionView = serde_json::from_value(va).unwrap();
        let vb: SessionView = serde_json::from_value(vb).unwrap();
        assert_eq!(va.bins, vb.bins);
        pa = va.pending;
        pb = vb.pending;
    }
    assert!(pa.is_none() && pb.is_none());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_apply_once() {
    let fx = fixture(40);
    let s = create(&fx.app, 9, json!({})).await;
    let v = s.pending.unwrap().id;
    let mut tasks = Vec::new();
    for _ in 0..8 {
        let app = fx.app.clone();
        let id = s.id.clone();
        tasks.push(tokio::spawn(async move { label(&app, &id, v, true).await.0 }));
    }
    let mut ok = 0;
    let mut conflict = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => conflict += 1,
            other => panic!("{other}"),
        }
    }
    assert_eq!((ok, conflict), (1, 7));
    let (_, v) = call(&fx.app, "GET", &format!("/sessions/{}", s.id), None).await;
    assert_eq!(v["labels_used"], 1);
}

#[tokio::test]
async fn history_pages_and_stop() {
    let fx = fixture(40);
    let truth = fx.catalog.labels().unwrap();
    let s = create(&fx.app, 2, json!({})).await;
    let (_, e) = call(&fx.app, "GET", &format!("/sessions/{}/estimates", s.id), None).await;
    let e: EstimatesView = serde_json::from_value(e).unwrap();
    assert_eq!(e.steps, 0);
    assert!(e.bins.iter().all(|b| b.points.is_empty()));

    let mut pending = s.pending;
    for _ in 0..20 {
        let p = pending.unwrap();
        let (_, v) = label(&fx.app, &s.id, p.id, truth[p.id as usize]).await;
        pending = serde_json::from_value::<SessionView>(v).unwrap().pending;
    }
    let (_, all) = call(&fx.app, "GET", &format!("/sessions/{}/estimates", s.id), None).await;
    let all: EstimatesView = serde_json::from_value(all).unwrap();
    let (_, page) = call(&fx.app, "GET", &format!("/sessions/{}/estimates?from=3&limit=5", s.id), None).await;
    let page: EstimatesView = serde_json::from_value(page).unwrap();
    assert_eq!((page.from, page.to), (3, 8));
    for (pb, ab) in page.bins.iter().zip(&all.bins) {
        let want: Vec<_> = ab.points.iter().filter(|p| (3..8).contains(&p.step)).cloned().collect();
        assert_eq!(pb.points, want);
    }

    let (status, v) = call(&fx.app, "POST", &format!("/sessions/{}/stop", s.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let stop: StopView = serde_json::from_value(v).unwrap();
    assert_eq!(stop.session.status, Status::Stopped);
    assert!(stop.session.pending.is_none());
    assert!(stop.reports.iter().all(|r| r.ci_low <= r.estimate && r.estimate <= r.ci_high));
    let p = pending.unwrap();
    assert_eq!(label(&fx.app, &s.id, p.id, true).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&fx.app, "POST", "/sessions/zzz/stop", None).await.0, StatusCode::NOT_FOUND);
}
