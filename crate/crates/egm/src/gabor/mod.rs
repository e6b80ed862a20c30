//! Gabor kernels, circular convolution magnitudes and normalized jets.
//!
//! Orientation and slant angles are measured counter-clockwise with the
//! y axis pointing up. Image offsets are in pixel coordinates (x = column,
//! y = row, growing downward), so a wave vector at angle `phi` has pixel
//! components `f * (cos phi, -sin phi)`.

pub mod cache;
mod fft;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mnist::Image;

use fft::Fft2;

/// Parameters of the Gabor filter bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    /// Base frequency in cycles per pixel.
    pub f0: f64,
    /// Ratio between neighbouring frequency levels.
    pub mu: f64,
    pub num_levels: usize,
    pub orientations: usize,
    /// Width of the Gaussian envelope in pixels.
    pub sigma: f64,
    /// Rotation added to every wave-vector orientation, radians.
    pub slant_angle: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        GaborParams {
            f0: 0.5,
            mu: 2.0,
            num_levels: 2,
            orientations: 4,
            sigma: 2.0,
            slant_angle: 0.0,
        }
    }
}

impl GaborParams {
    pub fn with_bank(mu: f64, orientations: usize) -> Self {
        GaborParams {
            mu,
            orientations,
            ..GaborParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) || !(self.mu > 1.0) || !(self.sigma > 0.0) {
            return Err(Error::Argument(format!(
                "need f0 > 0, mu > 1, sigma > 0; got f0={}, mu={}, sigma={}",
                self.f0, self.mu, self.sigma
            )));
        }
        if self.orientations == 0 || self.num_levels == 0 {
            return Err(Error::Argument(
                "need at least one orientation and one level".into(),
            ));
        }
        if !self.slant_angle.is_finite() {
            return Err(Error::Argument("slant angle must be finite".into()));
        }
        Ok(())
    }

    /// Jet length: levels times orientations.
    pub fn jet_len(&self) -> usize {
        self.num_levels * self.orientations
    }

    /// `f_v = f0 * mu^-v` for `v` in `1..=num_levels`.
    pub fn frequency(&self, v: usize) -> f64 {
        self.f0 * self.mu.powi(-(v as i32))
    }

    /// `theta_k = k * pi / N_d`.
    pub fn orientation(&self, k: usize) -> f64 {
        k as f64 * PI / self.orientations as f64
    }

    pub fn with_slant(&self, slant_angle: f64) -> Self {
        GaborParams {
            slant_angle,
            ..*self
        }
    }
}

/// Complex kernel stored on a periodic offset lattice: entry `(x, y)` holds
/// the kernel at the signed offset `(x, y)` reduced into `[-w/2, w/2)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    width: usize,
    height: usize,
    values: Vec<Complex64>,
}

impl Kernel {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value at a signed offset, taken modulo the lattice.
    pub fn at(&self, dx: i64, dy: i64) -> Complex64 {
        let x = dx.rem_euclid(self.width as i64) as usize;
        let y = dy.rem_euclid(self.height as i64) as usize;
        self.values[y * self.width + x]
    }
}

fn signed_offset(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Kernel for level `v` and orientation `theta` on a 28x28 lattice.
pub fn make_kernel(params: &GaborParams, v: usize, theta: f64) -> Result<Kernel> {
    make_kernel_sized(params, v, theta, crate::mnist::CANVAS, crate::mnist::CANVAS)
}

pub fn make_kernel_sized(
    params: &GaborParams,
    v: usize,
    theta: f64,
    width: usize,
    height: usize,
) -> Result<Kernel> {
    params.validate()?;
    if v == 0 || v > params.num_levels {
        return Err(Error::Argument(format!(
            "frequency level {v} outside 1..={}",
            params.num_levels
        )));
    }
    let f = params.frequency(v);
    let phi = theta + params.slant_angle;
    let (fx, fy) = (f * phi.cos(), -f * phi.sin());
    let s2 = params.sigma * params.sigma;
    let norm = 1.0 / (2.0 * PI * s2);
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        let oy = signed_offset(y, height);
        for x in 0..width {
            let ox = signed_offset(x, width);
            let envelope = norm * (-(ox * ox + oy * oy) / (2.0 * s2)).exp();
            let phase = 2.0 * PI * (fx * ox + fy * oy);
            values.push(Complex64::from_polar(envelope, phase));
        }
    }
    Ok(Kernel {
        width,
        height,
        values,
    })
}

/// Per-pixel unit-norm feature vectors, stored pixel-major.
///
/// Components are ordered by level (outer) then orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct JetField {
    width: usize,
    height: usize,
    dim: usize,
    data: Vec<f64>,
}

impl JetField {
    pub fn from_raw(width: usize, height: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * dim {
            return Err(Error::Argument(format!(
                "jet field {width}x{height}x{dim} needs {} values, got {}",
                width * height * dim,
                data.len()
            )));
        }
        Ok(JetField {
            width,
            height,
            dim,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn jet(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Jet at an integer position, wrapped onto the lattice.
    pub fn jet_wrapped(&self, x: i64, y: i64) -> &[f64] {
        self.jet(
            x.rem_euclid(self.width as i64) as usize,
            y.rem_euclid(self.height as i64) as usize,
        )
    }

    /// Cyclically shifted copy: jet (x, y) of the result is jet (x - dx, y - dy).
    pub fn shifted(&self, dx: i64, dy: i64) -> JetField {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                data.extend_from_slice(self.jet_wrapped(x - dx, y - dy));
            }
        }
        JetField { data, ..*self }
    }
}

/// Reusable extractor holding FFT plans for one image size.
pub struct JetExtractor {
    width: usize,
    height: usize,
    fft: Fft2,
}

impl JetExtractor {
    pub fn new(width: usize, height: usize) -> Self {
        JetExtractor {
            width,
            height,
            fft: Fft2::new(width, height),
        }
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::Argument(format!(
                "extractor built for {}x{}, image is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    fn spectrum(&self, img: &Image) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = img
            .pixels()
            .iter()
            .map(|&p| Complex64::new(p, 0.0))
            .collect();
        self.fft.forward(&mut buf);
        buf
    }

    fn magnitude_from_spectrum(&self, image_spec: &[Complex64], kernel: &Kernel) -> Vec<f64> {
        let mut k = kernel.values.clone();
        self.fft.forward(&mut k);
        for (a, b) in k.iter_mut().zip(image_spec) {
            *a *= *b;
        }
        self.fft.inverse(&mut k);
        k.iter().map(|c| c.norm()).collect()
    }

    /// `|sum_x' psi(x - x') I(x')|` with circular indexing.
    pub fn convolve_magnitude(
        &self,
        img: &Image,
        params: &GaborParams,
        v: usize,
        theta: f64,
    ) -> Result<Vec<f64>> {
        self.check(img)?;
        let kernel = make_kernel_sized(params, v, theta, self.width, self.height)?;
        Ok(self.magnitude_from_spectrum(&self.spectrum(img), &kernel))
    }

    pub fn extract(&self, img: &Image, params: &GaborParams) -> Result<JetField> {
        self.check(img)?;
        params.validate()?;
        let dim = params.jet_len();
        let n = self.width * self.height;
        let spec = self.spectrum(img);
        let mut data = vec![0.0; n * dim];
        for v in 1..=params.num_levels {
            for k in 0..params.orientations {
                let kernel =
                    make_kernel_sized(params, v, params.orientation(k), self.width, self.height)?;
                let mags = self.magnitude_from_spectrum(&spec, &kernel);
                let c = (v - 1) * params.orientations + k;
                for (p, m) in mags.into_iter().enumerate() {
                    data[p * dim + c] = m;
                }
            }
        }
        let norms: Vec<f64> = data.chunks_exact(dim).map(|j| j.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let floor = JET_FLOOR * norms.iter().cloned().fold(0.0, f64::max);
        for (jet, &norm) in data.chunks_exact_mut(dim).zip(&norms) {
            if norm <= floor {
                jet.fill(0.0);
            } else {
                normalize(jet);
            }
        }
        JetField::from_raw(self.width, self.height, dim, data)
    }
}

/// Jets whose norm is at most this fraction of the image's largest jet norm are
/// set to zero. Far from any ink the responses approach FFT round-off and their
/// directions are not reproducible.
pub const JET_FLOOR: f64 = 1e-6;

/// Scales to unit Euclidean norm; an all-zero vector is left as is.
pub fn normalize(jet: &mut [f64]) {
    let norm = jet.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in jet.iter_mut() {
            *x /= norm;
        }
    }
}

pub fn convolve_magnitude(img: &Image, params: &GaborParams, v: usize, theta: f64) -> Result<Vec<f64>> {
    JetExtractor::new(img.width(), img.height()).convolve_magnitude(img, params, v, theta)
}

pub fn extract_jets(img: &Image, params: &GaborParams) -> Result<JetField> {
    JetExtractor::new(img.width(), img.height()).extract(img, params)
}
