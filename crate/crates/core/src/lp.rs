//! Small dense simplex solver for `max cᵀx` subject to `Ax ≤ b`, `x ≥ 0`
//! with `b ≥ 0`, so the slack basis is feasible from the start.

use crate::error::{Error, Result};

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

/// Solves the packing-type LP. `rows[k]` is the k-th row of `A`.
pub fn maximize(c: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = rows.len();
    if rhs.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("LP dimensions do not agree".into()));
    }
    if rhs.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::InvalidParameter("LP right-hand side must be nonnegative".into()));
    }
    let width = n + m + 1;
    // tableau rows 0..m are constraints, row m is the reduced-cost row
    let mut t = vec![0.0; (m + 1) * width];
    for (k, row) in rows.iter().enumerate() {
        t[k * width..k * width + n].copy_from_slice(row);
        t[k * width + n + k] = 1.0;
        t[k * width + n + m] = rhs[k];
    }
    for j in 0..n {
        t[m * width + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut degenerate_run = 0usize;
    let max_iter = 50 * (n + m) + 1000;
    for _ in 0..max_iter {
        let obj = &t[m * width..m * width + n + m];
        let bland = degenerate_run > 50;
        let entering = if bland {
            obj.iter().position(|v| *v < -EPS)
        } else {
            let (j, v) = obj
                .iter()
                .enumerate()
                .fold((usize::MAX, -EPS), |acc, (j, v)| if *v < acc.1 { (j, *v) } else { acc });
            (v < -EPS).then_some(j)
        };
        let Some(e) = entering else {
            let mut x = vec![0.0; n];
            for (k, &b) in basis.iter().enumerate() {
                if b < n {
                    x[b] = t[k * width + n + m];
                }
            }
            return Ok(LpSolution { objective: t[m * width + n + m], x });
        };
        let mut leave: Option<(usize, f64)> = None;
        for k in 0..m {
            let a = t[k * width + e];
            if a > EPS {
                let ratio = t[k * width + n + m] / a;
                let better = match leave {
                    None => true,
                    Some((lk, lr)) => {
                        ratio < lr - EPS || (ratio <= lr + EPS && basis[k] < basis[lk])
                    }
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
        }
        let Some((r, ratio)) = leave else {
            return Err(Error::InvalidParameter("LP is unbounded".into()));
        };
        degenerate_run = if ratio <= EPS { degenerate_run + 1 } else { 0 };
        let piv = t[r * width + e];
        for j in 0..width {
            t[r * width + j] /= piv;
        }
        let pivot_row: Vec<f64> = t[r * width..(r + 1) * width].to_vec();
        for k in 0..=m {
            if k == r {
                continue;
            }
            let f = t[k * width + e];
            if f.abs() > 0.0 {
                let row = &mut t[k * width..(k + 1) * width];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        basis[r] = e;
    }
    Err(Error::InvalidParameter("simplex iteration limit reached".into()))
}
