//! Square grid graphs laid over an image and labelled with jets.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gabor::JetField;
use crate::mnist::CANVAS;

/// Side length of the region a grid is meant to cover.
pub const DIGIT_REGION: f64 = 20.0;

/// Pixels between neighbouring nodes for a supported grid size.
pub fn spacing_for(nodes_per_side: usize) -> Result<f64> {
    match nodes_per_side {
        5 => Ok(4.0),
        10 => Ok(2.0),
        20 => Ok(1.0),
        n => Err(Error::Argument(format!(
            "no standard spacing for a {n}x{n} grid (supported: 5, 10, 20)"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nodes_per_side: usize,
    pub spacing: f64,
}

impl GridSpec {
    pub fn standard(nodes_per_side: usize) -> Result<Self> {
        Ok(GridSpec {
            nodes_per_side,
            spacing: spacing_for(nodes_per_side)?,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side * self.nodes_per_side
    }

    /// Integer step used by the local move.
    pub fn step(&self) -> i32 {
        self.spacing.round().max(1.0) as i32
    }

    /// Grid center on the 28x28 canvas, chosen so that unrotated nodes land
    /// exactly on pixels.
    pub fn center(&self) -> [f64; 2] {
        let half = (self.nodes_per_side - 1) as f64 * self.spacing / 2.0;
        let c = CANVAS as f64 / 2.0 - half.fract();
        [c, c]
    }
}

/// Link structure shared by every grid of the same size.
#[derive(Debug, PartialEq, Eq)]
pub struct Topology {
    nodes_per_side: usize,
    links: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(nodes_per_side: usize) -> Result<Self> {
        if nodes_per_side < 2 {
            return Err(Error::Argument(format!(
                "grid needs at least 2 nodes per side, got {nodes_per_side}"
            )));
        }
        let n = nodes_per_side;
        let mut links = Vec::with_capacity(2 * n * (n - 1));
        for r in 0..n {
            for c in 0..n {
                let i = r * n + c;
                if c + 1 < n {
                    links.push((i, i + 1));
                }
                if r + 1 < n {
                    links.push((i, i + n));
                }
            }
        }
        let mut incident = vec![Vec::new(); n * n];
        for (k, &(i, j)) in links.iter().enumerate() {
            incident[i].push(k);
            incident[j].push(k);
        }
        Ok(Topology {
            nodes_per_side,
            links,
            incident,
        })
    }

    pub fn nodes_per_side(&self) -> usize {
        self.nodes_per_side
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side * self.nodes_per_side
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    /// Indices into [`links`](Self::links) touching `node`.
    pub fn incident(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }
}

/// Node positions and links, before any jets are attached.
#[derive(Debug, Clone)]
pub struct GridGeometry {
    pub topology: Arc<Topology>,
    pub spacing: f64,
    pub positions: Vec<[f64; 2]>,
}

/// Lattice of `nodes_per_side`² nodes centered at `center`, rotated by
/// `rotation` radians about it (standard rotation matrix in pixel
/// coordinates). Node 0 is the top-left corner before rotation.
pub fn build_grid(
    nodes_per_side: usize,
    spacing: f64,
    center: [f64; 2],
    rotation: f64,
) -> Result<GridGeometry> {
    let topology = Arc::new(Topology::new(nodes_per_side)?);
    build_grid_with(topology, spacing, center, rotation)
}

pub fn build_grid_with(
    topology: Arc<Topology>,
    spacing: f64,
    center: [f64; 2],
    rotation: f64,
) -> Result<GridGeometry> {
    if !(spacing > 0.0) {
        return Err(Error::Argument(format!("spacing must be positive, got {spacing}")));
    }
    let n = topology.nodes_per_side();
    let half = (n - 1) as f64 * spacing / 2.0;
    let (sin, cos) = rotation.sin_cos();
    let mut positions = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let a = c as f64 * spacing - half;
            let b = r as f64 * spacing - half;
            positions.push([center[0] + cos * a - sin * b, center[1] + sin * a + cos * b]);
        }
    }
    Ok(GridGeometry {
        topology,
        spacing,
        positions,
    })
}

impl GridGeometry {
    pub fn for_spec(spec: &GridSpec, rotation: f64) -> Result<Self> {
        build_grid(spec.nodes_per_side, spec.spacing, spec.center(), rotation)
    }

    /// Pixel a real position samples: nearest integer, wrapped onto the canvas.
    pub fn pixel_of(position: [f64; 2]) -> [i32; 2] {
        [
            position[0].round() as i32,
            position[1].round() as i32,
        ]
    }
}

fn wrap(v: i32) -> usize {
    v.rem_euclid(CANVAS as i32) as usize
}

/// A grid whose nodes carry jets.
///
/// Each node has an ideal real-valued position and an integer shift (global
/// offset plus local displacement). A node samples the pixel
/// `round(position) + shift`, wrapped onto the canvas, and link vectors are
/// `(position_i + shift_i) - (position_j + shift_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGraph {
    topology: Arc<Topology>,
    positions: Vec<[f64; 2]>,
    base_pixels: Vec<[i32; 2]>,
    shifts: Vec<[i32; 2]>,
    dim: usize,
    jets: Vec<f64>,
}

/// Attaches jets sampled at the geometry's (rounded, wrapped) node positions.
pub fn sample_jets(geometry: &GridGeometry, field: &JetField) -> GridGraph {
    let n = geometry.positions.len();
    GridGraph::sample(
        geometry.topology.clone(),
        geometry.positions.clone(),
        vec![[0, 0]; n],
        field,
    )
}

impl GridGraph {
    pub(crate) fn sample(
        topology: Arc<Topology>,
        positions: Vec<[f64; 2]>,
        shifts: Vec<[i32; 2]>,
        field: &JetField,
    ) -> GridGraph {
        let base_pixels: Vec<[i32; 2]> = positions.iter().map(|&p| GridGeometry::pixel_of(p)).collect();
        let dim = field.dim();
        let mut jets = Vec::with_capacity(positions.len() * dim);
        for (b, s) in base_pixels.iter().zip(&shifts) {
            jets.extend_from_slice(field.jet(wrap(b[0] + s[0]), wrap(b[1] + s[1])));
        }
        GridGraph {
            topology,
            positions,
            base_pixels,
            shifts,
            dim,
            jets,
        }
    }

    /// Same ideal geometry with new per-node shifts, resampled from `field`.
    pub fn reshifted(&self, shifts: Vec<[i32; 2]>, field: &JetField) -> GridGraph {
        GridGraph::sample(self.topology.clone(), self.positions.clone(), shifts, field)
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jet(&self, node: usize) -> &[f64] {
        &self.jets[node * self.dim..(node + 1) * self.dim]
    }

    pub fn jets(&self) -> &[f64] {
        &self.jets
    }

    pub fn ideal_positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn shifts(&self) -> &[[i32; 2]] {
        &self.shifts
    }

    /// Rounded ideal position, before shifts and wrapping.
    pub fn base_pixel(&self, node: usize) -> [i32; 2] {
        self.base_pixels[node]
    }

    /// Canvas pixel (x, y) this node currently samples.
    pub fn sample_pixel(&self, node: usize) -> [usize; 2] {
        let b = self.base_pixels[node];
        let s = self.shifts[node];
        [wrap(b[0] + s[0]), wrap(b[1] + s[1])]
    }

    /// Real position including shifts, not wrapped.
    pub fn position(&self, node: usize) -> [f64; 2] {
        let p = self.positions[node];
        let s = self.shifts[node];
        [p[0] + f64::from(s[0]), p[1] + f64::from(s[1])]
    }

    /// Link vector `x_i - x_j` for link index `k`.
    pub fn delta(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.topology.links()[k];
        self.delta_between(i, self.shifts[i], j, self.shifts[j])
    }

    pub(crate) fn delta_between(&self, i: usize, si: [i32; 2], j: usize, sj: [i32; 2]) -> [f64; 2] {
        let (pi, pj) = (self.positions[i], self.positions[j]);
        [
            (pi[0] - pj[0]) + f64::from(si[0] - sj[0]),
            (pi[1] - pj[1]) + f64::from(si[1] - sj[1]),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_field(seed: u64, dim: usize) -> JetField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..CANVAS * CANVAS * dim).map(|_| rng.gen()).collect();
        JetField::from_raw(CANVAS, CANVAS, dim, data).unwrap()
    }

    #[test]
    fn standard_spacings() {
        assert_eq!(spacing_for(10).unwrap(), 2.0);
        assert_eq!(spacing_for(5).unwrap(), 4.0);
        assert_eq!(spacing_for(20).unwrap(), 1.0);
        assert!(spacing_for(7).is_err());
    }

    #[test]
    fn ten_by_ten_grid() {
        let spec = GridSpec::standard(10).unwrap();
        let g = GridGeometry::for_spec(&spec, 0.0).unwrap();
        assert_eq!(g.positions.len(), 100);
        assert_eq!(g.topology.links().len(), 180);
        let xs: Vec<f64> = g.positions.iter().map(|p| p[0]).collect();
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max - min, 18.0);
        assert_eq!((min, max), (5.0, 23.0));
    }

    #[test]
    fn unrotated_standard_grids_sit_on_pixels() {
        for n in [5, 10, 20] {
            let g = GridGeometry::for_spec(&GridSpec::standard(n).unwrap(), 0.0).unwrap();
            assert!(g.positions.iter().all(|p| p[0].fract() == 0.0 && p[1].fract() == 0.0));
            assert!(g.positions.iter().all(|p| (4.0..=23.0).contains(&p[0])));
        }
    }

    #[test]
    fn degree_structure() {
        let t = Topology::new(4).unwrap();
        assert_eq!(t.links().len(), 2 * 4 * 3);
        let degree = |i| t.incident(i).len();
        assert_eq!(degree(0), 2);
        assert_eq!(degree(15), 2);
        assert_eq!(degree(1), 3);
        assert_eq!(degree(5), 4);
        assert!(t.links().iter().all(|&(i, j)| i < j));
        let mut sorted = t.links().to_vec();
        sorted.dedup();
        assert_eq!(sorted.len(), t.links().len());
        assert!(Topology::new(1).is_err());
    }

    #[test]
    fn quarter_turn() {
        let c = [14.0, 14.0];
        let g0 = build_grid(3, 2.0, c, 0.0).unwrap();
        let g1 = build_grid(3, 2.0, c, FRAC_PI_2).unwrap();
        for (p, q) in g0.positions.iter().zip(&g1.positions) {
            let (a, b) = (p[0] - c[0], p[1] - c[1]);
            assert!((q[0] - c[0] + b).abs() < 1e-12);
            assert!((q[1] - c[1] - a).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_preserves_link_lengths_and_distances() {
        let field = random_field(0, 2);
        for rot in [0.0, 0.3, -1.1, 2.0] {
            let g = build_grid(10, 2.0, [14.0, 14.0], rot).unwrap();
            let graph = sample_jets(&g, &field);
            for k in 0..g.topology.links().len() {
                let d = graph.delta(k);
                assert!(((d[0] * d[0] + d[1] * d[1]).sqrt() - 2.0).abs() < 1e-12);
            }
            let base = build_grid(10, 2.0, [14.0, 14.0], 0.0).unwrap();
            let dist = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            for i in (0..100).step_by(7) {
                for j in (0..100).step_by(11) {
                    let a = dist(g.positions[i], g.positions[j]);
                    let b = dist(base.positions[i], base.positions[j]);
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn axis_aligned_deltas() {
        let g = build_grid(3, 2.0, [14.0, 14.0], 0.0).unwrap();
        let graph = sample_jets(&g, &random_field(1, 1));
        for k in 0..g.topology.links().len() {
            let d = graph.delta(k);
            assert!((d[0] == 0.0 && d[1] == -2.0) || (d[1] == 0.0 && d[0] == -2.0));
        }
    }

    #[test]
    fn sampling_rounds_and_wraps() {
        let field = random_field(2, 3);
        let topo = Arc::new(Topology::new(2).unwrap());
        let geom = GridGeometry {
            topology: topo,
            spacing: 1.0,
            positions: vec![[28.0, 5.0], [3.49, 3.51], [-1.0, 27.6], [0.0, 0.0]],
        };
        let g = sample_jets(&geom, &field);
        assert_eq!(g.sample_pixel(0), [0, 5]);
        assert_eq!(g.jet(0), field.jet(0, 5));
        assert_eq!(g.sample_pixel(1), [3, 4]);
        assert_eq!(g.jet(2), field.jet(27, 0));
    }

    #[test]
    fn period_shift_samples_identically() {
        let field = random_field(3, 4);
        let g = build_grid(10, 2.0, [14.0, 14.0], 0.37).unwrap();
        let mut far = g.clone();
        for p in far.positions.iter_mut() {
            p[0] += 28.0;
            p[1] += 28.0;
        }
        assert_eq!(sample_jets(&g, &field).jets(), sample_jets(&far, &field).jets());
    }

    #[test]
    fn moving_field_and_grid_together() {
        let field = random_field(4, 4);
        let g = build_grid(10, 2.0, [14.0, 14.0], 0.0).unwrap();
        let base = sample_jets(&g, &field);
        for (dx, dy) in [(3, 5), (-7, 12), (27, -27)] {
            let moved = field.shifted(dx, dy);
            let mut geom = g.clone();
            for p in geom.positions.iter_mut() {
                p[0] += dx as f64;
                p[1] += dy as f64;
            }
            assert_eq!(sample_jets(&geom, &moved).jets(), base.jets());
            let via_shift = base.reshifted(vec![[dx as i32, dy as i32]; 100], &moved);
            assert_eq!(via_shift.jets(), base.jets());
        }
    }
}
