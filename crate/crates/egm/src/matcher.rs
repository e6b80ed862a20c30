//! Cost function and the two-phase elastic match (global move, local move).
//!
//! `C = lambda * sum_links |d_T - d_M|^2 - sum_nodes J_T . J_M`; lower is better.

use crate::error::{Error, Result};
use crate::gabor::{GaborParams, JetExtractor, JetField};
use crate::graph::{GridGeometry, GridGraph, GridSpec};
use crate::mnist::Image;
use crate::slant::{deslant_context, SlantEstimate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Weight of the distortion term.
    pub lambda: f64,
}

impl CostParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Argument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(CostParams { lambda })
    }
}

/// Cost decomposition of one test graph against one model graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub total: f64,
    /// Sum of squared link-vector differences, before weighting.
    pub distortion: f64,
    /// Sum of node jet dot products.
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub total_cost: f64,
    pub distortion: f64,
    pub similarity: f64,
    /// Rigid offset chosen by the global move, each component in `[0, 28)`.
    pub offset: [i32; 2],
    /// Per-node displacement added by the local move.
    pub displacements: Vec<[i32; 2]>,
}

impl MatchResult {
    /// Canvas pixels the matched test graph samples, node order.
    pub fn test_pixels(&self, test: &GridGraph, width: usize, height: usize) -> Vec<[usize; 2]> {
        (0..test.node_count())
            .map(|i| {
                let b = test.base_pixel(i);
                let d = self.displacements.get(i).copied().unwrap_or([0, 0]);
                let x = (b[0] + self.offset[0] + d[0]).rem_euclid(width as i32);
                let y = (b[1] + self.offset[1] + d[1]).rem_euclid(height as i32);
                [x as usize, y as usize]
            })
            .collect()
    }
}

/// `|d_T - d_M|^2`.
pub fn link_distortion(delta_test: [f64; 2], delta_model: [f64; 2]) -> f64 {
    let dx = delta_test[0] - delta_model[0];
    let dy = delta_test[1] - delta_model[1];
    dx * dx + dy * dy
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |s, (x, y)| s + x * y)
}

/// Dot product of two jets.
pub fn jet_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "jet lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dot(a, b))
}

fn check_compatible(test: &GridGraph, model: &GridGraph) -> Result<()> {
    if test.topology() != model.topology() {
        return Err(Error::Argument("test and model grids differ in structure".into()));
    }
    if test.dim() != model.dim() {
        return Err(Error::Argument(format!(
            "test jets have {} components, model jets {}",
            test.dim(),
            model.dim()
        )));
    }
    Ok(())
}

fn distortion_of(test: &GridGraph, model: &GridGraph) -> f64 {
    (0..test.topology().links().len())
        .fold(0.0, |s, k| s + link_distortion(test.delta(k), model.delta(k)))
}

/// Full cost of `test` against `model`, summed link by link and node by node.
pub fn evaluate_cost(test: &GridGraph, model: &GridGraph, params: CostParams) -> Result<CostTerms> {
    check_compatible(test, model)?;
    let distortion = distortion_of(test, model);
    let similarity = (0..test.node_count()).fold(0.0, |s, i| s + dot(test.jet(i), model.jet(i)));
    Ok(CostTerms {
        total: params.lambda * distortion - similarity,
        distortion,
        similarity,
    })
}

/// A test image after jet extraction, with its rigid grid and a padded
/// channel-major copy of the field used by the global move.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    field: JetField,
    graph: GridGraph,
    slant: SlantEstimate,
    padded: Vec<f64>,
}

/// Jet field, undeformed grid graph and slant for one image.
pub fn image_graph(
    img: &Image,
    gabor: &GaborParams,
    grid: &GridSpec,
    deslant: bool,
    extractor: &JetExtractor,
) -> Result<(JetField, GridGraph, SlantEstimate)> {
    let (params, rotation, slant) = if deslant {
        let ctx = deslant_context(img, gabor)?;
        (ctx.params, ctx.grid_rotation, ctx.slant)
    } else {
        (*gabor, 0.0, SlantEstimate::UPRIGHT)
    };
    let field = extractor.extract(img, &params)?;
    let geometry = GridGeometry::for_spec(grid, rotation)?;
    let graph = crate::graph::sample_jets(&geometry, &field);
    Ok((field, graph, slant))
}

impl PreparedTest {
    pub fn new(
        img: &Image,
        gabor: &GaborParams,
        grid: &GridSpec,
        deslant: bool,
        extractor: &JetExtractor,
    ) -> Result<Self> {
        let (field, graph, slant) = image_graph(img, gabor, grid, deslant, extractor)?;
        Ok(PreparedTest::from_parts(field, graph, slant))
    }

    /// `graph` must have been sampled from `field` with zero shifts.
    pub fn from_parts(field: JetField, graph: GridGraph, slant: SlantEstimate) -> Self {
        let (w, h, dim) = (field.width(), field.height(), field.dim());
        let (pw, ph) = (2 * w, 2 * h);
        let mut padded = vec![0.0; dim * pw * ph];
        for d in 0..dim {
            for y in 0..ph {
                for x in 0..pw {
                    padded[(d * ph + y) * pw + x] = field.jet(x % w, y % h)[d];
                }
            }
        }
        PreparedTest {
            field,
            graph,
            slant,
            padded,
        }
    }

    pub fn field(&self) -> &JetField {
        &self.field
    }

    /// Undeformed test graph at offset zero.
    pub fn graph(&self) -> &GridGraph {
        &self.graph
    }

    pub fn slant(&self) -> SlantEstimate {
        self.slant
    }

    /// Node similarity sum for every rigid offset, indexed `oy * width + ox`.
    ///
    /// Each entry is accumulated node by node, and each node term component
    /// by component, in the same order as [`evaluate_cost`].
    pub fn similarity_map(&self, model: &GridGraph) -> Vec<f64> {
        let (w, h) = (self.field.width(), self.field.height());
        let pw = 2 * w;
        let ph = 2 * h;
        let mut acc = vec![0.0; w * h];
        let mut term = vec![0.0; w];
        for i in 0..self.graph.node_count() {
            let [bx, by] = self.graph.sample_pixel(i);
            let mj = model.jet(i);
            for oy in 0..h {
                term.iter_mut().for_each(|t| *t = 0.0);
                let row = by + oy;
                for (d, &m) in mj.iter().enumerate() {
                    let start = (d * ph + row) * pw + bx;
                    let src = &self.padded[start..start + w];
                    for (t, &s) in term.iter_mut().zip(src) {
                        *t += s * m;
                    }
                }
                for (a, &t) in acc[oy * w..(oy + 1) * w].iter_mut().zip(&term) {
                    *a += t;
                }
            }
        }
        acc
    }
}

/// Winner of the rigid scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalPlacement {
    pub offset: [i32; 2],
    pub cost: f64,
    pub similarity: f64,
    pub distortion: f64,
}

fn best_offset(map: &[f64], width: usize, distortion: f64, params: CostParams) -> GlobalPlacement {
    let mut best = GlobalPlacement {
        offset: [0, 0],
        cost: f64::INFINITY,
        similarity: 0.0,
        distortion,
    };
    for (k, &s) in map.iter().enumerate() {
        let cost = params.lambda * distortion - s;
        if cost < best.cost {
            best.cost = cost;
            best.similarity = s;
            best.offset = [(k % width) as i32, (k / width) as i32];
        }
    }
    best
}

/// Rigid translation of the test graph over every pixel offset with
/// wrap-around, keeping the lowest-cost offset. Ties go to the smallest
/// `(row, column)` offset.
pub fn global_move(test: &PreparedTest, model: &GridGraph, params: CostParams) -> Result<GlobalPlacement> {
    check_compatible(&test.graph, model)?;
    let map = test.similarity_map(model);
    let distortion = distortion_of(&test.graph, model);
    Ok(best_offset(&map, test.field.width(), distortion, params))
}

const MOVES: [[i32; 2]; 5] = [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]];

/// Single row-major sweep: each node tries staying or moving one grid step
/// along either axis and keeps the cheapest, given the current positions of
/// all other nodes. Accepted moves take effect immediately.
pub fn local_move(
    test: &PreparedTest,
    placed: &GridGraph,
    model: &GridGraph,
    params: CostParams,
    step: i32,
) -> Result<MatchResult> {
    check_compatible(placed, model)?;
    let field = &test.field;
    let topology = placed.topology().clone();
    let links = topology.links();
    let offset = placed.shifts().first().copied().unwrap_or([0, 0]);
    let mut shifts = placed.shifts().to_vec();

    for i in 0..placed.node_count() {
        let base = placed.base_pixel(i);
        let current = shifts[i];
        let mut best_cost = f64::INFINITY;
        let mut best_shift = current;
        for mv in MOVES {
            let cand = [current[0] + mv[0] * step, current[1] + mv[1] * step];
            let distortion = topology.incident(i).iter().fold(0.0, |s, &k| {
                let (a, b) = links[k];
                let (sa, sb) = if a == i { (cand, shifts[b]) } else { (shifts[a], cand) };
                s + link_distortion(placed.delta_between(a, sa, b, sb), model.delta(k))
            });
            let jet = field.jet_wrapped(i64::from(base[0] + cand[0]), i64::from(base[1] + cand[1]));
            let cost = params.lambda * distortion - dot(jet, model.jet(i));
            if cost < best_cost {
                best_cost = cost;
                best_shift = cand;
            }
        }
        shifts[i] = best_shift;
    }

    let deformed = placed.reshifted(shifts, field);
    let terms = evaluate_cost(&deformed, model, params)?;
    Ok(MatchResult {
        total_cost: terms.total,
        distortion: terms.distortion,
        similarity: terms.similarity,
        offset,
        displacements: deformed
            .shifts()
            .iter()
            .map(|s| [s[0] - offset[0], s[1] - offset[1]])
            .collect(),
    })
}

/// Global then local move of a prepared test against one model graph, for
/// each weight in `params`. The rigid similarity scan is shared.
pub fn match_prepared_multi(
    test: &PreparedTest,
    model: &GridGraph,
    params: &[CostParams],
    step: i32,
) -> Result<Vec<MatchResult>> {
    check_compatible(&test.graph, model)?;
    let map = test.similarity_map(model);
    let distortion = distortion_of(&test.graph, model);
    params
        .iter()
        .map(|&p| {
            let placement = best_offset(&map, test.field.width(), distortion, p);
            let placed = test
                .graph
                .reshifted(vec![placement.offset; test.graph.node_count()], &test.field);
            local_move(test, &placed, model, p, step)
        })
        .collect()
}

pub fn match_prepared(test: &PreparedTest, model: &GridGraph, params: CostParams, step: i32) -> Result<MatchResult> {
    Ok(match_prepared_multi(test, model, &[params], step)?.remove(0))
}

/// Matches a raw test image against a stored model graph: optional deslant,
/// jet extraction, global move, local move.
pub fn match_image(
    test: &Image,
    model: &GridGraph,
    gabor: &GaborParams,
    grid: &GridSpec,
    params: CostParams,
    deslant: bool,
) -> Result<MatchResult> {
    let extractor = JetExtractor::new(test.width(), test.height());
    let prepared = PreparedTest::new(test, gabor, grid, deslant, &extractor)?;
    match_prepared(&prepared, model, params, grid.step())
}
