//! Distance `ρ` between two components: relative ink transport between their
//! normalized renderings plus penalties for position, size and aspect ratio.

use serde::{Deserialize, Serialize};

use crate::decomposition::{ComponentKey, KanjiDecomposition};
use crate::error::{Error, Result};
use crate::geometry::{bounding_box, normalize_component, BBox, SOURCE_CANVAS};
use crate::ot::{ubw_distance, UbwParams};
use crate::raster::{default_line_width, rasterize, PixelImage};

/// Box sides shorter than one source grid unit are treated as that long.
pub const MIN_SIDE: f64 = 1.0 / SOURCE_CANVAS;

/// Logit-linear transform `ψ` of `[0, 1]` with `ψ(x0) = ½`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiParams {
    pub alpha: f64,
    pub x0: f64,
}

impl PsiParams {
    pub const IDENTITY: PsiParams = PsiParams { alpha: 1.0, x0: 0.5 };

    pub fn new(alpha: f64, x0: f64) -> Result<Self> {
        let p = Self { alpha, x0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("psi alpha = {} (need >= 1)", self.alpha)));
        }
        if !(self.x0 > 0.0 && self.x0 < 1.0) {
            return Err(Error::InvalidParameter(format!("psi x0 = {} (need 0 < x0 < 1)", self.x0)));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    fn odds(&self) -> f64 {
        self.x0 / (1.0 - self.x0)
    }

    pub fn apply(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        if self.is_identity() {
            return x;
        }
        1.0 / (1.0 + (self.odds() * (1.0 - x) / x).powf(self.alpha))
    }

    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        let t = ((1.0 - y) / y).powf(1.0 / self.alpha) / self.odds();
        1.0 / (1.0 + t)
    }
}

pub fn psi(params: &PsiParams, x: f64) -> f64 {
    params.apply(x)
}

/// Translation, log-scale and log-distortion differences of two boxes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Penalties {
    pub tau: f64,
    pub sigma: f64,
    pub chi: f64,
}

impl Penalties {
    pub fn clamped(&self) -> Penalties {
        Penalties {
            tau: self.tau.clamp(0.0, 1.0),
            sigma: self.sigma.clamp(0.0, 1.0),
            chi: self.chi.clamp(0.0, 1.0),
        }
    }
}

pub fn registration_penalties(a: &BBox, b: &BBox) -> Penalties {
    let sides = |x: &BBox| (x.width().max(MIN_SIDE), x.height().max(MIN_SIDE));
    let (wa, ha) = sides(a);
    let (wb, hb) = sides(b);
    Penalties {
        tau: a.center().dist(b.center()),
        sigma: ((wa * ha).sqrt() / (wb * hb).sqrt()).ln().abs(),
        chi: ((wa / ha) / (wb / hb)).ln().abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoParams {
    pub lambdas: [f64; 4],
    pub psi: [PsiParams; 4],
    pub ubw: UbwParams,
    /// The transport distance is divided by `ubw_divisor · max(‖C‖₁, ‖C′‖₁)`;
    /// `None` divides by `b`.
    pub ubw_divisor: Option<f64>,
    pub label_override: bool,
}

impl Default for RhoParams {
    fn default() -> Self {
        Self {
            lambdas: [0.8, 0.1, 0.05, 0.05],
            psi: [PsiParams { alpha: 2.0, x0: 0.4 }, PsiParams::IDENTITY, PsiParams::IDENTITY, PsiParams::IDENTITY],
            ubw: UbwParams::default(),
            ubw_divisor: Some(0.2),
            label_override: true,
        }
    }
}

impl RhoParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.iter().any(|l| !(*l >= 0.0)) || (self.lambdas.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "lambdas {:?} must be nonnegative and sum to 1",
                self.lambdas
            )));
        }
        for p in &self.psi {
            p.validate()?;
        }
        if let Some(div) = self.ubw_divisor {
            if !(div > 0.0) {
                return Err(Error::InvalidParameter(format!("ubw divisor = {div}")));
            }
        }
        self.ubw.validate()
    }

    /// Transport distance made relative to the larger ink mass.
    pub fn relative(&self, d: f64, max_mass: f64) -> f64 {
        let divisor = self.ubw_divisor.unwrap_or(self.ubw.b);
        (d / (divisor * max_mass.powf(1.0 / self.ubw.p))).clamp(0.0, 1.0)
    }

    /// `ρ` from its ingredients; `ubw` is the relative transport distance.
    pub fn combine(&self, ubw: f64, penalties: &Penalties) -> f64 {
        let pen = penalties.clamped();
        let terms = [ubw, pen.tau, pen.sigma, pen.chi];
        let value: f64 = self.lambdas.iter().zip(&self.psi).zip(terms).map(|((l, p), x)| l * p.apply(x)).sum();
        value.clamp(0.0, 1.0)
    }
}

/// What `ρ` needs to know about one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentShape {
    pub label: Option<String>,
    /// Bounding box on the unit canvas, before normalization.
    pub bbox: BBox,
    /// Rendering of the normalized component.
    pub image: PixelImage,
}

impl ComponentShape {
    pub fn new(d: &KanjiDecomposition, key: ComponentKey, resolution: usize) -> Result<Self> {
        let comp = d.component(key);
        let paths: Vec<_> = comp.strokes.iter().map(|s| d.stroke(*s).unit_path()).collect();
        let bbox = bounding_box(paths.iter().map(Vec::as_slice))?;
        let normalized = normalize_component(&paths)?;
        let image = rasterize(&normalized.strokes, resolution, default_line_width(resolution))?;
        Ok(Self { label: comp.label.clone(), bbox, image })
    }

    pub fn labels_match(&self, other: &ComponentShape) -> bool {
        matches!((&self.label, &other.label), (Some(a), Some(b)) if a == b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoBreakdown {
    /// Relative transport distance, 0 when the label override applied.
    pub ubw: f64,
    pub penalties: Penalties,
    pub labels_match: bool,
    pub rho: f64,
}

pub fn rho_breakdown(c: &ComponentShape, c2: &ComponentShape, params: &RhoParams) -> Result<RhoBreakdown> {
    let penalties = registration_penalties(&c.bbox, &c2.bbox);
    let labels_match = c.labels_match(c2);
    let ubw = if params.label_override && labels_match {
        0.0
    } else {
        let (d, plan) = ubw_distance(&c.image, &c2.image, &params.ubw)?;
        params.relative(d, plan.source_total.max(plan.target_total))
    };
    Ok(RhoBreakdown { ubw, penalties, labels_match, rho: params.combine(ubw, &penalties) })
}

pub fn rho(c: &ComponentShape, c2: &ComponentShape, params: &RhoParams) -> Result<f64> {
    Ok(rho_breakdown(c, c2, params)?.rho)
}
