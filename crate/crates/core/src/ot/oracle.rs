//! Reference solver for tiny grids: the primal LP over every pixel pair,
//! solved densely.

use super::{check_pair, UbwParams};
use crate::error::{Error, Result};
use crate::lp::maximize;
use crate::raster::PixelImage;

pub const ORACLE_MAX_RESOLUTION: usize = 8;

/// `d_UBW` from the dense LP with `N⁴` transport variables.
///
/// Writing the objective as `(‖C‖₁ + ‖C′‖₁)·bᵖ/2 − Σ (bᵖ − δᵖ)·π` turns the
/// problem into a packing LP with row sums bounded by `C` and column sums by
/// `C′`.
pub fn brute_oracle(c: &PixelImage, c2: &PixelImage, params: &UbwParams) -> Result<f64> {
    check_pair(c, c2, params)?;
    let n = c.n;
    if n > ORACLE_MAX_RESOLUTION {
        return Err(Error::OracleTooLarge(n));
    }
    let cells = n * n;
    let bp = params.b.powf(params.p);
    let mut gain = Vec::with_capacity(cells * cells);
    for i in 0..cells {
        for j in 0..cells {
            let dr = (i / n) as f64 - (j / n) as f64;
            let ds = (i % n) as f64 - (j % n) as f64;
            let delta = dr.hypot(ds) / n as f64;
            gain.push((bp - delta.powf(params.p)).max(0.0));
        }
    }
    let mut rows = Vec::with_capacity(2 * cells);
    let mut rhs = Vec::with_capacity(2 * cells);
    for i in 0..cells {
        let mut row = vec![0.0; cells * cells];
        row[i * cells..(i + 1) * cells].fill(1.0);
        rows.push(row);
        rhs.push(c.cells[i]);
    }
    for j in 0..cells {
        let mut row = vec![0.0; cells * cells];
        for i in 0..cells {
            row[i * cells + j] = 1.0;
        }
        rows.push(row);
        rhs.push(c2.cells[j]);
    }
    let sol = maximize(&gain, &rows, &rhs)?;
    let value = (c.total() + c2.total()) * bp / 2.0 - sol.objective;
    Ok(value.max(0.0).powf(1.0 / params.p))
}
