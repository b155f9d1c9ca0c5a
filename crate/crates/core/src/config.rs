//! Engine configuration as a flat TOML file.
//!
//! ```toml
//! store = "store.json"
//! corpus = "data/joyo.txt"
//! resolution = 32
//! p = 1.0
//! b = 0.4
//! ubw_divisor = 0.2
//! lambda0 = 0.8
//! psi0 = { alpha = 2.0, x0 = 0.4 }
//! psi1 = "identity"
//! a = 0.25
//! mu = "min"
//! ```
//!
//! Missing keys take their default values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{MatchParams, MuKind};
use crate::metric::{PsiParams, RhoParams};
use crate::ot::UbwParams;
use crate::raster::DEFAULT_RESOLUTION;

pub const DEFAULT_MAX_LEVEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub store: PathBuf,
    /// Optional list of kanji to restrict every query to.
    pub corpus: Option<PathBuf>,
    pub resolution: usize,
    pub max_level: usize,
    pub params: MatchParams,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            store: PathBuf::from("store.json"),
            corpus: None,
            resolution: DEFAULT_RESOLUTION,
            max_level: DEFAULT_MAX_LEVEL,
            params: MatchParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum PsiEntry {
    Named(String),
    Params { alpha: f64, x0: f64 },
}

impl From<PsiParams> for PsiEntry {
    fn from(p: PsiParams) -> Self {
        if p.is_identity() {
            PsiEntry::Named("identity".into())
        } else {
            PsiEntry::Params { alpha: p.alpha, x0: p.x0 }
        }
    }
}

impl TryFrom<PsiEntry> for PsiParams {
    type Error = Error;

    fn try_from(e: PsiEntry) -> Result<Self> {
        match e {
            PsiEntry::Named(s) if s == "identity" => Ok(PsiParams::IDENTITY),
            PsiEntry::Named(s) => Err(Error::Config(format!("unknown psi {s:?}"))),
            PsiEntry::Params { alpha, x0 } => PsiParams::new(alpha, x0),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatConfig {
    store: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    corpus: Option<PathBuf>,
    resolution: usize,
    max_level: usize,
    p: f64,
    b: f64,
    /// A number, or "b" to divide by `b` itself.
    ubw_divisor: toml::Value,
    lambda0: f64,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    psi0: PsiEntry,
    psi1: PsiEntry,
    psi2: PsiEntry,
    psi3: PsiEntry,
    label_override: bool,
    a: f64,
    epsilon: f64,
    mu: String,
    min_strokes: usize,
    include_root: bool,
}

impl From<&EngineConfig> for FlatConfig {
    fn from(c: &EngineConfig) -> Self {
        let m = &c.params;
        let r = &m.rho;
        FlatConfig {
            store: c.store.clone(),
            corpus: c.corpus.clone(),
            resolution: c.resolution,
            max_level: c.max_level,
            p: r.ubw.p,
            b: r.ubw.b,
            ubw_divisor: match r.ubw_divisor {
                Some(d) => toml::Value::Float(d),
                None => toml::Value::String("b".into()),
            },
            lambda0: r.lambdas[0],
            lambda1: r.lambdas[1],
            lambda2: r.lambdas[2],
            lambda3: r.lambdas[3],
            psi0: r.psi[0].into(),
            psi1: r.psi[1].into(),
            psi2: r.psi[2].into(),
            psi3: r.psi[3].into(),
            label_override: r.label_override,
            a: m.a,
            epsilon: m.epsilon,
            mu: m.mu.to_string(),
            min_strokes: m.min_strokes,
            include_root: m.include_root,
        }
    }
}

impl TryFrom<FlatConfig> for EngineConfig {
    type Error = Error;

    fn try_from(f: FlatConfig) -> Result<Self> {
        let ubw_divisor = match f.ubw_divisor {
            toml::Value::Float(d) => Some(d),
            toml::Value::Integer(d) => Some(d as f64),
            toml::Value::String(s) if s == "b" => None,
            other => return Err(Error::Config(format!("ubw_divisor must be a number or \"b\", got {other}"))),
        };
        let rho = RhoParams {
            lambdas: [f.lambda0, f.lambda1, f.lambda2, f.lambda3],
            psi: [f.psi0.try_into()?, f.psi1.try_into()?, f.psi2.try_into()?, f.psi3.try_into()?],
            ubw: UbwParams { p: f.p, b: f.b },
            ubw_divisor,
            label_override: f.label_override,
        };
        let params = MatchParams {
            a: f.a,
            mu: f.mu.parse::<MuKind>()?,
            epsilon: f.epsilon,
            min_strokes: f.min_strokes,
            include_root: f.include_root,
            rho,
        };
        params.validate()?;
        if f.resolution < crate::raster::MIN_RESOLUTION {
            return Err(Error::ResolutionTooCoarse(f.resolution));
        }
        Ok(EngineConfig { store: f.store, corpus: f.corpus, resolution: f.resolution, max_level: f.max_level, params })
    }
}

impl EngineConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&FlatConfig::from(self)).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config; keys that are absent keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let defaults: toml::Table = toml::from_str(&Self::default().to_toml()?).expect("defaults serialize");
        for (k, v) in defaults {
            table.entry(k).or_insert(v);
        }
        let flat: FlatConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        flat.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}
