//! Estimating the parameters of `ρ` from similarity judgments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::PsiParams;

/// Responses are clamped into `[Y_CLAMP, 1 − Y_CLAMP]` before any logit.
pub const Y_CLAMP: f64 = 1e-4;
const STATIONARITY_TOL: f64 = 1e-8;
const MAX_GRADIENT_STEPS: usize = 1_000_000;
const RANK_TOL: f64 = 1e-12;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn clamp_response(y: f64) -> f64 {
    y.clamp(Y_CLAMP, 1.0 - Y_CLAMP)
}

/// One judged pair: the four ingredients of `ρ`, optional extra covariates,
/// and the perceived dissimilarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    /// Relative transport distance, `τ`, `σ`, `χ`.
    pub features: [f64; 4],
    pub covariates: Vec<f64>,
    pub y: f64,
}

impl JudgmentRecord {
    pub fn new(features: [f64; 4], covariates: Vec<f64>, y: f64) -> Result<Self> {
        if features.iter().chain(&covariates).any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(Error::InvalidParameter("judgment record has a non-finite value".into()));
        }
        Ok(Self { features, covariates, y: clamp_response(y) })
    }

    /// Features followed by covariates.
    pub fn inputs(&self) -> Vec<f64> {
        self.features.iter().chain(&self.covariates).copied().collect()
    }
}

/// Reads a CSV with columns `ubw, tau, sigma, chi, y`; any further columns
/// are covariates, in file order.
pub fn read_judgments_csv(text: &str) -> Result<Vec<JudgmentRecord>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::Config(format!("csv: {e}")))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Config(format!("csv column {name:?} missing")))
    };
    let fixed = [col("ubw")?, col("tau")?, col("sigma")?, col("chi")?];
    let y_col = col("y")?;
    let extra: Vec<usize> = (0..headers.len()).filter(|i| !fixed.contains(i) && *i != y_col).collect();
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("csv: {e}")))?;
        let num = |i: usize| -> Result<f64> {
            let v = rec.get(i).unwrap_or("");
            v.parse().map_err(|_| Error::Config(format!("csv record {}: bad number {v:?}", line + 1)))
        };
        let features = [num(fixed[0])?, num(fixed[1])?, num(fixed[2])?, num(fixed[3])?];
        let covariates = extra.iter().map(|i| num(*i)).collect::<Result<_>>()?;
        out.push(JudgmentRecord::new(features, covariates, num(y_col)?)?);
    }
    Ok(out)
}

/// Fits `ψ` by least squares of `logit(y)` on `logit(x)`: the slope is `α`
/// and the zero crossing of the fitted line gives `x0`. A slope below 1 is
/// raised to 1.
pub fn fit_psi(pairs: &[(f64, f64)]) -> Result<PsiParams> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} pairs, need at least 3", pairs.len())));
    }
    if pairs.iter().any(|(x, _)| !(*x > 0.0 && *x < 1.0)) {
        return Err(Error::DegenerateFit("x values must lie strictly inside (0, 1)".into()));
    }
    let u: Vec<f64> = pairs.iter().map(|(x, _)| logit(*x)).collect();
    let v: Vec<f64> = pairs.iter().map(|(_, y)| logit(clamp_response(*y))).collect();
    let n = u.len() as f64;
    let (mu, mv) = (u.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
    let suu: f64 = u.iter().map(|a| (a - mu).powi(2)).sum();
    let suv: f64 = u.iter().zip(&v).map(|(a, b)| (a - mu) * (b - mv)).sum();
    if suu <= RANK_TOL * (1.0 + mu * mu) * n {
        return Err(Error::DegenerateFit("all x values are equal".into()));
    }
    let slope = suv / suu;
    let intercept = mv - slope * mu;
    if !(slope > RANK_TOL) {
        return Err(Error::DegenerateFit(format!("slope {slope} gives no increasing psi")));
    }
    let x0 = logistic(-intercept / slope);
    PsiParams::new(slope.max(1.0), x0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaFit {
    pub lambdas: [f64; 4],
    /// Sum of squared residuals.
    pub residual: f64,
    pub iterations: usize,
}

/// Euclidean projection onto `{λ ≥ 0, Σλ = 1}`.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            shift = t;
        }
    }
    v.iter().map(|x| (x - shift).max(0.0)).collect()
}

/// Least squares of `y` on `(ψ₀(ubw), ψ₁(τ), ψ₂(σ), ψ₃(χ))` over the
/// simplex, by accelerated projected gradient with restarts.
pub fn fit_lambdas(records: &[JudgmentRecord], psi: &[PsiParams; 4]) -> Result<LambdaFit> {
    if records.len() < 4 {
        return Err(Error::DegenerateFit(format!("{} records, need at least 4", records.len())));
    }
    let x = DMatrix::from_fn(records.len(), 4, |i, j| psi[j].apply(records[i].features[j].clamp(0.0, 1.0)));
    let y = DVector::from_iterator(records.len(), records.iter().map(|r| r.y));
    let gram = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0) || lo <= RANK_TOL * hi {
        return Err(Error::DegenerateFit("design matrix is rank deficient".into()));
    }
    let step = 1.0 / hi;
    let objective = |l: &DVector<f64>| (&x * l - &y).norm_squared();
    let grad = |l: &DVector<f64>| &gram * l - &xty;
    let project = |v: DVector<f64>| DVector::from_vec(project_to_simplex(v.as_slice()));
    let mut lambda = DVector::from_element(4, 0.25);
    let mut look = lambda.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    while iterations < MAX_GRADIENT_STEPS {
        iterations += 1;
        let next = project(&look - grad(&look) * step);
        if objective(&next) > objective(&lambda) {
            // restart the momentum from the last iterate
            look = lambda.clone();
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        look = &next + (&next - &lambda) * ((t - 1.0) / t_next);
        lambda = next;
        t = t_next;
        let plain = project(&lambda - grad(&lambda) * step);
        if (&lambda - plain).norm() * hi < STATIONARITY_TOL {
            break;
        }
    }
    Ok(LambdaFit {
        lambdas: [lambda[0], lambda[1], lambda[2], lambda[3]],
        residual: objective(&lambda),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// Radial profile at squared scaled distance `q`.
    fn weight(&self, q: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * q).exp(),
            Kernel::Epanechnikov => (1.0 - q).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Scalar(f64),
    /// Diagonal of the bandwidth matrix, one entry per input.
    Diagonal(Vec<f64>),
}

impl Bandwidth {
    fn scales(&self, dims: usize) -> Result<Vec<f64>> {
        let h = match self {
            Bandwidth::Scalar(h) => vec![*h; dims],
            Bandwidth::Diagonal(h) if h.len() == dims => h.clone(),
            Bandwidth::Diagonal(h) => {
                return Err(Error::InvalidParameter(format!("{} bandwidths for {dims} inputs", h.len())))
            }
        };
        if h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("bandwidth {h:?} must be positive")));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NwEstimate {
    pub value: f64,
    /// All kernel weights vanished and the nearest record's response was used.
    pub fallback: bool,
}

/// Kernel-weighted mean of `logit(y)` mapped back through the logistic
/// function. With a diagonal bandwidth the scaled difference is
/// `(x − xᵢ)/h` per input.
pub fn nadaraya_watson(train: &[JudgmentRecord], query: &[f64], bandwidth: &Bandwidth, kernel: Kernel) -> Result<NwEstimate> {
    if train.is_empty() {
        return Err(Error::DegenerateFit("no training records".into()));
    }
    let dims = query.len();
    let h = bandwidth.scales(dims)?;
    let mut scaled = Vec::with_capacity(train.len());
    for r in train {
        let inputs = r.inputs();
        if inputs.len() != dims {
            return Err(Error::InvalidParameter(format!("query has {dims} inputs, record has {}", inputs.len())));
        }
        let q: f64 = inputs.iter().zip(query).zip(&h).map(|((a, b), s)| ((a - b) / s).powi(2)).sum();
        scaled.push(q);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (r, q) in train.iter().zip(&scaled) {
        let w = kernel.weight(*q);
        num += w * logit(r.y);
        den += w;
    }
    if den > 0.0 && den.is_finite() {
        return Ok(NwEstimate { value: logistic(num / den), fallback: false });
    }
    let nearest = (0..train.len()).min_by(|a, b| scaled[*a].total_cmp(&scaled[*b])).expect("nonempty");
    Ok(NwEstimate { value: train[nearest].y, fallback: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_psi_is_recovered() {
        let pairs: Vec<(f64, f64)> = (1..10).map(|i| (i as f64 / 10.0, i as f64 / 10.0)).collect();
        let p = fit_psi(&pairs).unwrap();
        assert_abs_diff_eq!(p.alpha, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.x0, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_response_is_rejected() {
        let pairs: Vec<(f64, f64)> = (1..10).map(|i| (i as f64 / 10.0, 0.3)).collect();
        assert!(matches!(fit_psi(&pairs), Err(Error::DegenerateFit(_))));
        let pairs = vec![(0.3, 0.1), (0.3, 0.2), (0.3, 0.5)];
        assert!(matches!(fit_psi(&pairs), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_to_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_to_simplex(&[2.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
        let p = project_to_simplex(&[0.5, 0.5, -3.0, 0.4]);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn underflow_falls_back_to_nearest() {
        let train = vec![
            JudgmentRecord::new([0.1, 0.0, 0.0, 0.0], vec![], 0.2).unwrap(),
            JudgmentRecord::new([0.9, 0.0, 0.0, 0.0], vec![], 0.7).unwrap(),
        ];
        let est = nadaraya_watson(&train, &[0.8, 0.0, 0.0, 0.0], &Bandwidth::Scalar(1e-4), Kernel::Gaussian).unwrap();
        assert!(est.fallback);
        assert_eq!(est.value, 0.7);
    }
}
