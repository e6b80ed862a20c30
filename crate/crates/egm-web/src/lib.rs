//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Images cross the boundary as 784 grey bytes, row-major, 0 = background.

use egm::gabor::JetExtractor;
use egm::graph::{GridGeometry, GridSpec};
use egm::matcher::{image_graph, match_prepared, CostParams, PreparedTest};
use egm::mnist::CANVAS;
use egm::slant::estimate_slant_periodic;
use egm::{GaborParams, Image};
use wasm_bindgen::prelude::*;

fn image(pixels: &[u8]) -> egm::Result<Image> {
    Image::from_bytes(CANVAS, CANVAS, pixels)
}

fn js(e: egm::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn gabor(mu: f64, orientations: usize, sigma: f64) -> egm::Result<GaborParams> {
    let p = GaborParams {
        sigma,
        ..GaborParams::with_bank(mu, orientations)
    };
    p.validate()?;
    Ok(p)
}

/// Magnitude response for level `v` (1 or 2) and orientation index `k`,
/// scaled so the largest value is 1.
#[wasm_bindgen]
pub fn gabor_response(pixels: &[u8], v: usize, k: usize, orientations: usize, mu: f64, sigma: f64) -> Result<Vec<f64>, JsError> {
    try_gabor_response(pixels, v, k, orientations, mu, sigma).map_err(js)
}

pub fn try_gabor_response(pixels: &[u8], v: usize, k: usize, orientations: usize, mu: f64, sigma: f64) -> egm::Result<Vec<f64>> {
    let img = image(pixels)?;
    let params = gabor(mu, orientations, sigma)?;
    if k >= orientations {
        return Err(egm::Error::Argument(format!("orientation index {k} out of range")));
    }
    let mut out = JetExtractor::new(CANVAS, CANVAS).convolve_magnitude(&img, &params, v, params.orientation(k))?;
    let peak = out.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        out.iter_mut().for_each(|x| *x /= peak);
    }
    Ok(out)
}

/// Estimated slant and the rotated sample grid that deslanting would use.
#[wasm_bindgen]
pub struct SlantView {
    m: f64,
    angle: f64,
    nodes: Vec<f64>,
    links: Vec<u32>,
}

#[wasm_bindgen]
impl SlantView {
    /// Tangent of the stroke orientation from vertical.
    #[wasm_bindgen(getter)]
    pub fn m(&self) -> f64 {
        self.m
    }

    #[wasm_bindgen(getter)]
    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Node positions as `x0, y0, x1, y1, ...` in pixels.
    #[wasm_bindgen(getter)]
    pub fn nodes(&self) -> Vec<f64> {
        self.nodes.clone()
    }

    /// Link endpoints as node index pairs.
    #[wasm_bindgen(getter)]
    pub fn links(&self) -> Vec<u32> {
        self.links.clone()
    }
}

#[wasm_bindgen]
pub fn slant_grid(pixels: &[u8], nodes_per_side: usize) -> Result<SlantView, JsError> {
    try_slant_grid(pixels, nodes_per_side).map_err(js)
}

pub fn try_slant_grid(pixels: &[u8], nodes_per_side: usize) -> egm::Result<SlantView> {
    let img = image(pixels)?;
    let slant = estimate_slant_periodic(&img)?;
    let geometry = GridGeometry::for_spec(&GridSpec::standard(nodes_per_side)?, slant.angle)?;
    Ok(SlantView {
        m: slant.m,
        angle: slant.angle,
        nodes: geometry.positions.iter().flat_map(|p| [p[0], p[1]]).collect(),
        links: flat_links(geometry.topology.links()),
    })
}

fn flat_links(links: &[(usize, usize)]) -> Vec<u32> {
    links.iter().flat_map(|&(i, j)| [i as u32, j as u32]).collect()
}

/// Outcome of matching a drawn test digit against a drawn model digit.
#[wasm_bindgen]
pub struct MatchView {
    total_cost: f64,
    distortion: f64,
    similarity: f64,
    offset: [i32; 2],
    pixels: Vec<u32>,
    model_pixels: Vec<u32>,
    links: Vec<u32>,
}

#[wasm_bindgen]
impl MatchView {
    #[wasm_bindgen(getter)]
    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    #[wasm_bindgen(getter)]
    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    #[wasm_bindgen(getter)]
    pub fn similarity(&self) -> f64 {
        self.similarity
    }

    #[wasm_bindgen(getter)]
    pub fn offset_x(&self) -> i32 {
        self.offset[0]
    }

    #[wasm_bindgen(getter)]
    pub fn offset_y(&self) -> i32 {
        self.offset[1]
    }

    /// Test pixels the matched graph samples, `x0, y0, ...`.
    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<u32> {
        self.pixels.clone()
    }

    /// Model graph pixels, `x0, y0, ...`.
    #[wasm_bindgen(getter)]
    pub fn model_pixels(&self) -> Vec<u32> {
        self.model_pixels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn links(&self) -> Vec<u32> {
        self.links.clone()
    }
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn match_digits(
    test: &[u8],
    model: &[u8],
    nodes_per_side: usize,
    orientations: usize,
    mu: f64,
    sigma: f64,
    lambda: f64,
    deslant: bool,
) -> Result<MatchView, JsError> {
    try_match_digits(test, model, nodes_per_side, orientations, mu, sigma, lambda, deslant).map_err(js)
}

#[allow(clippy::too_many_arguments)]
pub fn try_match_digits(
    test: &[u8],
    model: &[u8],
    nodes_per_side: usize,
    orientations: usize,
    mu: f64,
    sigma: f64,
    lambda: f64,
    deslant: bool,
) -> egm::Result<MatchView> {
    let (test, model) = (image(test)?, image(model)?);
    let params = gabor(mu, orientations, sigma)?;
    let grid = GridSpec::standard(nodes_per_side)?;
    let extractor = JetExtractor::new(CANVAS, CANVAS);
    let (_, model_graph, _) = image_graph(&model, &params, &grid, deslant, &extractor)?;
    let prepared = PreparedTest::new(&test, &params, &grid, deslant, &extractor)?;
    let result = match_prepared(&prepared, &model_graph, CostParams::new(lambda)?, grid.step())?;
    let flat = |v: Vec<[usize; 2]>| v.into_iter().flat_map(|p| [p[0] as u32, p[1] as u32]).collect();
    Ok(MatchView {
        total_cost: result.total_cost,
        distortion: result.distortion,
        similarity: result.similarity,
        offset: result.offset,
        pixels: flat(result.test_pixels(prepared.graph(), CANVAS, CANVAS)),
        model_pixels: flat((0..model_graph.node_count()).map(|i| model_graph.sample_pixel(i)).collect()),
        links: flat_links(model_graph.topology().links()),
    })
}
