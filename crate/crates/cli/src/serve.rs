//! Local HTTP JSON API. Every route is served both at the root and under `/v1`.
//!
//! - `GET /kanji/{cp}/neighbors?k=`
//! - `GET /kanji/{cp}/focused?k=`
//! - `GET /pair/{cp1}/{cp2}/explain`
//! - `GET /render/{cp}/{level}?format=json|png&component=`
//!
//! Kanji are given literally or as hex codepoints (`7c8b`).

use std::io::Cursor;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use kanjidist::analysis::{bracket, focused_mds, DistanceMatrix};
use kanjidist::decomposition::ComponentKey;
use kanjidist::engine::{Engine, Neighbor};
use kanjidist::metric::ComponentShape;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::app::{hex_codepoint, parse_kanji, ServeError};

pub const DEFAULT_K: usize = 16;
pub const MAX_K: usize = 256;
const RING_STEP: f64 = 0.05;

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<kanjidist::Error> for ApiError {
    fn from(e: kanjidist::Error) -> Self {
        let status = match e {
            kanjidist::Error::UnknownKanji(_) => StatusCode::NOT_FOUND,
            kanjidist::Error::InvalidParameter(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError { status, message: e.to_string() }
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError { status: StatusCode::BAD_REQUEST, message: message.into() }
}

type ApiResult<T> = Result<T, ApiError>;

fn kanji_arg(engine: &Engine, s: &str) -> ApiResult<char> {
    let c = parse_kanji(s)?;
    engine.decomposition(c)?;
    Ok(c)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })?
}

#[derive(Deserialize)]
struct KQuery {
    k: Option<usize>,
}

impl KQuery {
    fn k(&self) -> ApiResult<usize> {
        let k = self.k.unwrap_or(DEFAULT_K);
        if k > MAX_K {
            return Err(bad_request(format!("k = {k} exceeds {MAX_K}")));
        }
        Ok(k)
    }
}

#[derive(Serialize)]
struct NeighborJson {
    cp: String,
    hex: String,
    distance: f64,
    bracket: usize,
    color: &'static str,
}

impl From<&Neighbor> for NeighborJson {
    fn from(n: &Neighbor) -> Self {
        let b = bracket(n.distance);
        NeighborJson {
            cp: n.codepoint.to_string(),
            hex: hex_codepoint(n.codepoint),
            distance: n.distance,
            bracket: b.index,
            color: b.color,
        }
    }
}

async fn neighbors(State(engine): State<Arc<Engine>>, Path(cp): Path<String>, Query(q): Query<KQuery>) -> ApiResult<Response> {
    let k = q.k()?;
    let c = kanji_arg(&engine, &cp)?;
    let list = blocking(move || Ok(engine.knn(c, k, None)?)).await?;
    let body = json!({
        "query": c.to_string(),
        "hex": hex_codepoint(c),
        "k": k,
        "neighbors": list.iter().map(NeighborJson::from).collect::<Vec<_>>(),
    });
    Ok(Json(body).into_response())
}

async fn focused(State(engine): State<Arc<Engine>>, Path(cp): Path<String>, Query(q): Query<KQuery>) -> ApiResult<Response> {
    let k = q.k()?;
    let c = kanji_arg(&engine, &cp)?;
    let body = blocking(move || {
        let list = engine.knn(c, k, None)?;
        let mut set = vec![c];
        set.extend(list.iter().map(|n| n.codepoint));
        let layout = focused_mds(&DistanceMatrix::compute(&engine, &set)?, c)?;
        let max_r = layout.points.iter().map(|p| p.r).fold(0.0, f64::max);
        let rings: Vec<f64> = (1..=((max_r / RING_STEP).ceil() as usize).max(1)).map(|i| i as f64 * RING_STEP).collect();
        let points: Vec<_> = layout
            .points
            .iter()
            .map(|p| {
                let b = bracket(p.r);
                json!({
                    "cp": p.cp.to_string(),
                    "hex": hex_codepoint(p.cp),
                    "r": p.r,
                    "theta": p.theta,
                    "distance": p.r,
                    "bracket": b.index,
                    "color": b.color,
                })
            })
            .collect();
        Ok(json!({ "center": c.to_string(), "hex": hex_codepoint(c), "rings": rings, "points": points }))
    })
    .await?;
    Ok(Json(body).into_response())
}

async fn explain(State(engine): State<Arc<Engine>>, Path((cp1, cp2)): Path<(String, String)>) -> ApiResult<Response> {
    let (c1, c2) = (kanji_arg(&engine, &cp1)?, kanji_arg(&engine, &cp2)?);
    let body = blocking(move || {
        let result = engine.explain(c1, c2)?;
        let (d1, d2) = (engine.decomposition(c1)?, engine.decomposition(c2)?);
        let mut value = result.to_json_value();
        value["kanji"] = json!([c1.to_string(), c2.to_string()]);
        if let Some(pairs) = value["pairs"].as_array_mut() {
            for (j, p) in pairs.iter_mut().zip(&result.pairs) {
                j["from_strokes"] = json!(d1.component(p.from).strokes);
                j["to_strokes"] = json!(d2.component(p.to).strokes);
            }
        }
        Ok(value)
    })
    .await?;
    Ok(Json(body).into_response())
}

#[derive(Deserialize)]
struct RenderQuery {
    format: Option<String>,
    /// 1-based component index; required for PNG.
    component: Option<usize>,
}

fn png(shape: &ComponentShape) -> ApiResult<Vec<u8>> {
    let img = &shape.image;
    let max = img.cells.iter().copied().fold(0.0, f64::max);
    let n = img.n as u32;
    let gray = image::GrayImage::from_fn(n, n, |s, r| {
        let v = if max > 0.0 { img.get(r as usize, s as usize) / max } else { 0.0 };
        image::Luma([(255.0 * (1.0 - v)).round() as u8])
    });
    let mut bytes = Cursor::new(Vec::new());
    gray.write_to(&mut bytes, image::ImageFormat::Png)
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })?;
    Ok(bytes.into_inner())
}

async fn render(
    State(engine): State<Arc<Engine>>,
    Path((cp, level)): Path<(String, usize)>,
    Query(q): Query<RenderQuery>,
) -> ApiResult<Response> {
    let c = kanji_arg(&engine, &cp)?;
    let d = engine.decomposition(c)?;
    if level >= d.levels.len() {
        return Err(bad_request(format!("{c} has levels 0..{}", d.levels.len() - 1)));
    }
    let n = engine.resolution();
    let count = d.levels[level].len();
    match q.format.as_deref().unwrap_or("json") {
        "json" => {
            let mut components = Vec::new();
            for index in 0..count {
                if q.component.is_some_and(|i| i != index + 1) {
                    continue;
                }
                let shape = ComponentShape::new(d, ComponentKey { level, index }, n)?;
                components.push(json!({
                    "index": index + 1,
                    "strokes": d.levels[level][index].strokes,
                    "label": shape.label,
                    "bbox": shape.bbox,
                    "mass": shape.image.total(),
                    "cells": shape.image.cells,
                }));
            }
            Ok(Json(json!({ "cp": c.to_string(), "hex": hex_codepoint(c), "level": level, "resolution": n, "components": components }))
                .into_response())
        }
        "png" => {
            let Some(i) = q.component.filter(|i| (1..=count).contains(i)) else {
                return Err(bad_request(format!("png needs component=1..{count}")));
            };
            let shape = ComponentShape::new(d, ComponentKey { level, index: i - 1 }, n)?;
            Ok(([(header::CONTENT_TYPE, "image/png")], png(&shape)?).into_response())
        }
        other => Err(bad_request(format!("unknown format {other:?}"))),
    }
}

async fn not_found() -> ApiError {
    ApiError { status: StatusCode::NOT_FOUND, message: "no such route".into() }
}

fn routes() -> Router<Arc<Engine>> {
    Router::new()
        .route("/kanji/{cp}/neighbors", get(neighbors))
        .route("/kanji/{cp}/focused", get(focused))
        .route("/pair/{cp1}/{cp2}/explain", get(explain))
        .route("/render/{cp}/{level}", get(render))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .merge(routes())
        .nest("/v1", routes())
        .fallback(not_found)
        .layer(CorsLayer::permissive())
        .with_state(engine)
}

pub async fn serve(engine: Engine, host: &str, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| ServeError(format!("cannot listen on {host}:{port}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| ServeError(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, router(Arc::new(engine))).await.map_err(|e| ServeError(e.to_string()))?;
    Ok(())
}
