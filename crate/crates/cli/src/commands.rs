//! Command bodies. Each returns what it would print so tests can call them
//! directly.

use std::fmt::Write;
use std::path::Path;

use anyhow::{bail, Context};
use kanjidist::analysis::{bracket, focused_mds, metric_mds, DistanceMatrix};
use kanjidist::config::EngineConfig;
use kanjidist::engine::Engine;
use kanjidist::fit::{fit_lambdas, fit_psi, read_judgments_csv};
use kanjidist::store::{IngestFailure, Store};
use serde::Serialize;

use crate::app::hex_codepoint;
use crate::svg::{focused_svg, global_svg};

#[derive(Debug)]
pub struct IngestReport {
    pub count: usize,
    pub failures: Vec<IngestFailure>,
}

pub fn ingest(svg_dir: &Path, out: &Path, max_level: usize) -> anyhow::Result<IngestReport> {
    let (store, failures) =
        Store::ingest_dir(svg_dir, max_level).with_context(|| format!("reading {}", svg_dir.display()))?;
    store.save(out).with_context(|| format!("writing {}", out.display()))?;
    Ok(IngestReport { count: store.len(), failures })
}

pub fn dist(engine: &Engine, c1: char, c2: char, explain: bool) -> anyhow::Result<String> {
    let result = engine.explain(c1, c2)?;
    if !explain {
        return Ok(format!("{:.6}\n", result.distance));
    }
    let mut value = result.to_json_value();
    let (d1, d2) = (engine.decomposition(c1)?, engine.decomposition(c2)?);
    value["kanji"] = serde_json::json!([c1.to_string(), c2.to_string()]);
    if let Some(pairs) = value["pairs"].as_array_mut() {
        for (json, pair) in pairs.iter_mut().zip(&result.pairs) {
            json["from_strokes"] = serde_json::json!(d1.component(pair.from).strokes);
            json["to_strokes"] = serde_json::json!(d2.component(pair.to).strokes);
        }
    }
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

pub fn knn(engine: &Engine, query: char, k: usize, brackets: bool) -> anyhow::Result<String> {
    let neighbors = engine.knn(query, k, None)?;
    let mut out = String::new();
    for (rank, n) in neighbors.iter().enumerate() {
        let _ = write!(out, "{}\t{}\tU+{:04X}\t{:.6}", rank + 1, n.codepoint, n.codepoint as u32, n.distance);
        if brackets {
            let b = bracket(n.distance);
            let _ = write!(out, "\t{}\t{}", b.index, b.label());
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MapMode {
    Focused,
    Global,
}

pub struct MapOutput {
    pub json: String,
    pub svg: String,
}

#[derive(Serialize)]
struct GlobalLayout {
    stress: f64,
    points: Vec<kanjidist::analysis::GlobalPoint>,
}

pub fn map(engine: &Engine, set: &[char], mode: MapMode, center: Option<char>) -> anyhow::Result<MapOutput> {
    if set.is_empty() {
        bail!("the kanji set is empty");
    }
    match mode {
        MapMode::Focused => {
            let Some(center) = center else { bail!("focused mode needs --center") };
            if !set.contains(&center) {
                bail!("center {center} is not in the set");
            }
            let matrix = DistanceMatrix::compute(engine, set)?;
            let layout = focused_mds(&matrix, center)?;
            Ok(MapOutput { json: layout.to_json()? + "\n", svg: focused_svg(&layout) })
        }
        MapMode::Global => {
            let matrix = DistanceMatrix::compute(engine, set)?;
            let mds = metric_mds(&matrix, 2)?;
            let layout = GlobalLayout { stress: mds.stress(), points: mds.points(&matrix.codepoints) };
            let svg = global_svg(&layout.points);
            Ok(MapOutput { json: serde_json::to_string_pretty(&layout)? + "\n", svg })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

/// Computes and writes the distance matrix of `set`.
pub fn matrix(engine: &Engine, set: &[char], out: &Path, format: MatrixFormat) -> anyhow::Result<String> {
    let m = DistanceMatrix::compute(engine, set)?;
    match format {
        MatrixFormat::Csv => std::fs::write(out, m.to_csv()?).with_context(|| format!("writing {}", out.display()))?,
        MatrixFormat::Binary => m.save_binary(out).with_context(|| format!("writing {}", out.display()))?,
    }
    Ok(format!("{} kanji, fingerprint {}\n", m.len(), m.fingerprint))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Feature {
    Ubw,
    Tau,
    Sigma,
    Chi,
}

/// Fits `ψ` for one feature, or all four `λ` with the configured `ψ`, and
/// returns the config with the fitted values in place.
pub fn fit(config: &EngineConfig, csv: &Path, psi_feature: Option<Feature>) -> anyhow::Result<(EngineConfig, String)> {
    let text = std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let records = read_judgments_csv(&text)?;
    let mut updated = config.clone();
    let summary = match psi_feature {
        Some(f) => {
            let i = f as usize;
            let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.features[i], r.y)).collect();
            let psi = fit_psi(&pairs)?;
            updated.params.rho.psi[i] = psi;
            format!("psi{i}: alpha = {}, x0 = {}\n", psi.alpha, psi.x0)
        }
        None => {
            let fit = fit_lambdas(&records, &config.params.rho.psi)?;
            updated.params.rho.lambdas = fit.lambdas;
            // the projection can leave the sum a rounding error away from 1
            let total: f64 = updated.params.rho.lambdas.iter().sum();
            updated.params.rho.lambdas.iter_mut().for_each(|l| *l /= total);
            format!("lambdas: {:?}, residual {:.6e}\n", updated.params.rho.lambdas, fit.residual)
        }
    };
    updated.params.validate()?;
    Ok((updated, summary))
}

/// File name stem used for map outputs when none is given.
pub fn default_map_stem(mode: MapMode, center: Option<char>) -> String {
    match (mode, center) {
        (MapMode::Focused, Some(c)) => format!("map-focused-{}", hex_codepoint(c)),
        _ => "map-global".into(),
    }
}
