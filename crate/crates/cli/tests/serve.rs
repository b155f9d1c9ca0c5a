use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use kanjidist::engine::Engine;
use kanjidist::store::Store;
use kanjidist_cli::serve::router;
use tower::ServiceExt;

fn engine() -> Arc<Engine> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kanjivg");
    let mut store = Store::default();
    for cp in "粋枠酔酢砕九十顔須".chars() {
        let svg = std::fs::read_to_string(format!("{dir}/{:05x}.svg", cp as u32)).unwrap();
        let tree = kanjidist::kanjivg::parse_kanjivg(&svg).unwrap();
        store.kanji.insert(cp, kanjidist::decomposition::build_decomposition(&tree, 3).unwrap());
    }
    Arc::new(Engine::with_defaults(store).unwrap())
}

async fn get(app: &axum::Router, uri: &str) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let req = Request::builder().uri(uri).header(header::ORIGIN, "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    (status, headers, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json(app: &axum::Router, uri: &str) -> (StatusCode, serde_json::Value) {
    let (status, _, body) = get(app, uri).await;
    (status, serde_json::from_slice(&body).unwrap())
}

#[tokio::test]
async fn neighbors_are_ascending_and_versioned() {
    let app = router(engine());
    for prefix in ["", "/v1"] {
        let (status, json) = get_json(&app, &format!("{prefix}/kanji/7c8b/neighbors?k=3")).await;
        assert_eq!(status, StatusCode::OK);
        let list = json["neighbors"].as_array().unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list[0]["cp"], "枠");
        let d: Vec<f64> = list.iter().map(|n| n["distance"].as_f64().unwrap()).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }
    let (status, json) = get_json(&app, "/kanji/粋/neighbors?k=100").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json["neighbors"].as_array().unwrap().len(), 8);
}

#[tokio::test]
async fn explain_reports_distance_and_strokes() {
    let app = router(engine());
    let (status, json) = get_json(&app, "/v1/pair/7c8b/67a0/explain").await;
    assert_eq!(status, StatusCode::OK);
    let d = json["distance"].as_f64().unwrap();
    assert!((d - 0.0596).abs() <= 0.02, "{d}");
    let (_, json) = get_json(&app, "/pair/顔/須/explain").await;
    let labels: Vec<&str> = json["pairs"].as_array().unwrap().iter().map(|p| p["labels"][0].as_str().unwrap()).collect();
    assert!(labels.contains(&"頁") && labels.contains(&"彡"), "{labels:?}");
    assert!(json["pairs"][0]["from_strokes"].is_array());
}

#[tokio::test]
async fn focused_layout_has_rings_and_exact_radii() {
    let app = router(engine());
    let (status, json) = get_json(&app, "/kanji/7c8b/focused?k=4").await;
    assert_eq!(status, StatusCode::OK);
    let points = json["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    assert_eq!(points[0]["cp"], "枠");
    assert_eq!(points[0]["r"], points[0]["distance"]);
    let rings = json["rings"].as_array().unwrap();
    assert!((rings[0].as_f64().unwrap() - 0.05).abs() < 1e-15);
}

#[tokio::test]
async fn render_json_and_png() {
    let app = router(engine());
    let (status, json) = get_json(&app, "/render/7c8b/1").await;
    assert_eq!(status, StatusCode::OK);
    let comps = json["components"].as_array().unwrap();
    assert_eq!(comps.len(), 2);
    assert_eq!(comps[0]["cells"].as_array().unwrap().len(), 32 * 32);
    let (status, headers, body) = get(&app, "/render/7c8b/1?format=png&component=2").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers[header::CONTENT_TYPE], "image/png");
    assert_eq!(&body[1..4], b"PNG");
    let (status, _) = get_json(&app, "/render/7c8b/1?format=png").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get_json(&app, "/render/7c8b/9").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn errors_are_json_and_cors_is_enabled() {
    let app = router(engine());
    let (status, json) = get_json(&app, "/kanji/6728/neighbors?k=3").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(json["error"].as_str().unwrap().contains("unknown kanji"));
    let (status, json) = get_json(&app, "/nothing/here").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(json["error"].is_string());
    let (status, _) = get_json(&app, "/kanji/7c8b/neighbors?k=100000").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, headers, _) = get(&app, "/kanji/7c8b/neighbors?k=1").await;
    assert!(headers.contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
}
