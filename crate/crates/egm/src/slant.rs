//! Second-moment slant estimation.
//!
//! Moments are taken with x to the right and y pointing up, so a digit whose
//! top leans right has a positive slope `m`.

use crate::error::{Error, Result};
use crate::gabor::GaborParams;
use crate::mnist::Image;

/// Normalized denominators below this are treated as a one-row image.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlantEstimate {
    /// Slope `dx/dy` of the digit's principal lean.
    pub m: f64,
    /// `atan(m)`, in `(-pi/2, pi/2)`.
    pub angle: f64,
}

impl SlantEstimate {
    pub const UPRIGHT: SlantEstimate = SlantEstimate { m: 0.0, angle: 0.0 };

    fn from_moments(cov_xy: f64, var_y: f64) -> Self {
        if var_y < DEGENERATE_DENOMINATOR {
            return SlantEstimate::UPRIGHT;
        }
        let m = cov_xy / var_y;
        SlantEstimate { m, angle: m.atan() }
    }
}

fn total_mass(img: &Image) -> Result<f64> {
    let mass = img.mass();
    if !(mass > 0.0) {
        return Err(Error::Degenerate(
            "slant of an image with no intensity".into(),
        ));
    }
    Ok(mass)
}

/// Central moments in two passes with unnormalized weights; the common
/// 1/mass factor cancels in the ratio.
fn weighted_slant(img: &Image, mass: f64, x_of: impl Fn(usize) -> f64, y_of: impl Fn(usize) -> f64) -> SlantEstimate {
    let (mut sx, mut sy) = (0.0, 0.0);
    for row in 0..img.height() {
        let y = y_of(row);
        for col in 0..img.width() {
            let w = img.get(col, row);
            sx += w * x_of(col);
            sy += w * y;
        }
    }
    let (ex, ey) = (sx / mass, sy / mass);
    let (mut cxy, mut cyy) = (0.0, 0.0);
    for row in 0..img.height() {
        let dy = y_of(row) - ey;
        for col in 0..img.width() {
            let w = img.get(col, row);
            cxy += w * (x_of(col) - ex) * dy;
            cyy += w * dy * dy;
        }
    }
    SlantEstimate::from_moments(cxy / mass, cyy / mass)
}

/// `m = (<xy> - <x><y>) / (<y^2> - <y>^2)` with intensity weights summing to 1,
/// coordinates relative to the image center.
pub fn estimate_slant(img: &Image) -> Result<SlantEstimate> {
    let mass = total_mass(img)?;
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    Ok(weighted_slant(
        img,
        mass,
        |col| col as f64 - cx,
        |row| cy - row as f64,
    ))
}

/// Start of the cyclic unwrapping that gives the smallest weighted variance
/// along one axis. `profile` is the mass per coordinate.
fn tightest_cut(profile: &[f64], mass: f64) -> usize {
    let n = profile.len();
    let mut best = (f64::INFINITY, 0);
    for cut in 0..n {
        let (mut e, mut e2) = (0.0, 0.0);
        for (i, &p) in profile.iter().enumerate() {
            let u = ((i + n - cut) % n) as f64;
            e += p * u;
            e2 += p * u * u;
        }
        let var = e2 / mass - (e / mass).powi(2);
        if var < best.0 {
            best = (var, cut);
        }
    }
    best.1
}

/// Slant of a digit on a periodic canvas.
///
/// Each axis is unwrapped at the cut that keeps the digit's mass most
/// compact, so a digit that wraps around an edge gets the same estimate as
/// the unwrapped digit. Agrees with [`estimate_slant`] whenever the mass does
/// not straddle the image border.
pub fn estimate_slant_periodic(img: &Image) -> Result<SlantEstimate> {
    let mass = total_mass(img)?;
    let (w, h) = (img.width(), img.height());
    let mut cols = vec![0.0; w];
    let mut rows = vec![0.0; h];
    for row in 0..h {
        for col in 0..w {
            let p = img.get(col, row);
            cols[col] += p;
            rows[row] += p;
        }
    }
    let cut_x = tightest_cut(&cols, mass);
    let cut_y = tightest_cut(&rows, mass);
    Ok(weighted_slant(
        img,
        mass,
        |col| ((col + w - cut_x) % w) as f64,
        |row| -(((row + h - cut_y) % h) as f64),
    ))
}

/// Gabor parameters and grid rotation that follow a digit's lean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeslantContext {
    pub slant: SlantEstimate,
    /// Input params with `slant_angle = -angle`.
    pub params: GaborParams,
    /// Grid rotation in pixel coordinates (y down); positive turns the grid
    /// clockwise on screen.
    pub grid_rotation: f64,
}

pub fn deslant_context(img: &Image, params: &GaborParams) -> Result<DeslantContext> {
    let slant = estimate_slant_periodic(img)?;
    Ok(DeslantContext {
        slant,
        params: params.with_slant(-slant.angle),
        grid_rotation: slant.angle,
    })
}
