//! Node layout and connectivity for Cartesian and polar planar networks.
//!
//! Every node `j` receives edges from the nodes inside its open neighbourhood
//! ball. Cartesian neighbourhoods are truncated at the grid edges; polar
//! neighbourhoods wrap around the wedge axis but not radially.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node position. For polar topologies `row` is the ring (innermost = 0)
/// and `col` is the wedge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPosition {
    pub row: usize,
    pub col: usize,
}

impl GridPosition {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Cartesian,
    Polar,
}

/// Neighbourhood radius in grid-index units. With `dynamic` set (polar only)
/// the radius is a base value rescaled per ring by the square root of the
/// ring's relative mid-radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub radius: f64,
    #[serde(default)]
    pub dynamic: bool,
}

impl NeighborhoodSpec {
    pub fn fixed(radius: f64) -> Self {
        Self {
            radius,
            dynamic: false,
        }
    }

    pub fn dynamic(base_radius: f64) -> Self {
        Self {
            radius: base_radius,
            dynamic: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!(
                "neighbourhood radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Ring/wedge layout of a polar picture cut from a square source image.
///
/// Boundaries shrink geometrically from the outer radius `source_size / 2`
/// so that every sector is roughly square: its radial width matches the arc
/// length at its mid-radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGeometry {
    pub source_size: usize,
    pub rings: usize,
    pub wedges: usize,
    pub ratio: f64,
    /// `rings + 1` radii in pixels, strictly decreasing from `source_size / 2`.
    pub boundaries: Vec<f64>,
}

/// Blind spots narrower than this would hold sub-pixel sectors.
const MIN_BLIND_SPOT: f64 = 0.5;

impl PolarGeometry {
    pub fn new(source_size: usize, rings: usize, wedges: usize) -> Result<Self> {
        if source_size < 4 || source_size % 2 != 0 {
            return Err(Error::invalid(format!(
                "polar source size must be even and at least 4, got {source_size}"
            )));
        }
        if rings < 1 {
            return Err(Error::invalid("polar geometry needs at least one ring"));
        }
        if wedges < 3 {
            return Err(Error::invalid(format!(
                "polar geometry needs at least 3 wedges, got {wedges}"
            )));
        }
        let step = PI / wedges as f64;
        let ratio = (1.0 - step) / (1.0 + step);
        let outer = source_size as f64 / 2.0;
        let boundaries: Vec<f64> = (0..=rings).map(|j| outer * ratio.powi(j as i32)).collect();
        let blind = boundaries[rings];
        if blind < MIN_BLIND_SPOT {
            return Err(Error::invalid(format!(
                "{rings} rings leave a blind spot of {blind:.3} px (minimum {MIN_BLIND_SPOT})"
            )));
        }
        Ok(Self {
            source_size,
            rings,
            wedges,
            ratio,
            boundaries,
        })
    }

    pub fn blind_spot_radius(&self) -> f64 {
        self.boundaries[self.rings]
    }

    pub fn outer_radius(&self) -> f64 {
        self.boundaries[0]
    }

    /// Inner and outer radius of ring `k` (innermost ring is 0).
    pub fn ring_bounds(&self, ring: usize) -> (f64, f64) {
        let inner = self.boundaries[self.rings - ring];
        let outer = self.boundaries[self.rings - ring - 1];
        (inner, outer)
    }

    pub fn ring_mid_radius(&self, ring: usize) -> f64 {
        let (inner, outer) = self.ring_bounds(ring);
        0.5 * (inner + outer)
    }

    pub fn ring_width(&self, ring: usize) -> f64 {
        let (inner, outer) = self.ring_bounds(ring);
        outer - inner
    }

    pub fn wedge_angle(&self) -> f64 {
        2.0 * PI / self.wedges as f64
    }

    /// Ring containing radius `r`, or `None` inside the blind spot or beyond
    /// the outer boundary.
    pub fn ring_of_radius(&self, r: f64) -> Option<usize> {
        if r < self.blind_spot_radius() || r >= self.outer_radius() {
            return None;
        }
        (0..self.rings).find(|&k| {
            let (inner, outer) = self.ring_bounds(k);
            r >= inner && r < outer
        })
    }

    /// Wedge containing the counter-clockwise angle `theta` (radians).
    pub fn wedge_of_angle(&self, theta: f64) -> usize {
        let turns = theta.rem_euclid(2.0 * PI) / self.wedge_angle();
        (turns.floor() as usize).min(self.wedges - 1)
    }

    /// Neighbourhood radius of ring `k` for a dynamic spec with `base_radius`.
    pub fn dynamic_radius(&self, ring: usize, base_radius: f64) -> f64 {
        let outermost = self.ring_mid_radius(self.rings - 1);
        base_radius * (self.ring_mid_radius(ring) / outermost).sqrt()
    }

    /// Centre of sector (ring, wedge) in source-pixel coordinates relative to
    /// the picture centre, `y` pointing up.
    pub fn sector_centroid(&self, ring: usize, wedge: usize) -> (f64, f64) {
        let r = self.ring_mid_radius(ring);
        let theta = (wedge as f64 + 0.5) * self.wedge_angle();
        (r * theta.cos(), r * theta.sin())
    }
}

/// All in-bounds positions strictly closer than `radius` to `center`,
/// row-major. The centre itself is included.
pub fn cartesian_neighborhood(
    center: GridPosition,
    radius: f64,
    height: usize,
    width: usize,
) -> Result<Vec<GridPosition>> {
    if center.row >= height || center.col >= width {
        return Err(Error::invalid(format!(
            "centre ({}, {}) outside {height}x{width} grid",
            center.row, center.col
        )));
    }
    NeighborhoodSpec::fixed(radius).validate()?;
    let reach = radius.ceil() as usize;
    let rows = center.row.saturating_sub(reach)..(center.row + reach + 1).min(height);
    let mut out = Vec::new();
    for row in rows {
        let cols = center.col.saturating_sub(reach)..(center.col + reach + 1).min(width);
        for col in cols {
            let dr = row as f64 - center.row as f64;
            let dc = col as f64 - center.col as f64;
            if (dr * dr + dc * dc).sqrt() < radius {
                out.push(GridPosition::new(row, col));
            }
        }
    }
    Ok(out)
}

/// Shortest wedge-index distance on a ring of `wedges` sectors.
fn wedge_gap(a: usize, b: usize, wedges: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(wedges - d)
}

/// Sectors within the (possibly ring-dependent) radius of `sector`,
/// measured in (ring, wedge) index units with wedge wraparound. Ring-major.
pub fn polar_neighborhood(
    sector: GridPosition,
    geometry: &PolarGeometry,
    spec: NeighborhoodSpec,
) -> Result<Vec<GridPosition>> {
    if sector.row >= geometry.rings || sector.col >= geometry.wedges {
        return Err(Error::invalid(format!(
            "sector ({}, {}) outside {}x{} polar grid",
            sector.row, sector.col, geometry.rings, geometry.wedges
        )));
    }
    spec.validate()?;
    let radius = if spec.dynamic {
        geometry.dynamic_radius(sector.row, spec.radius)
    } else {
        spec.radius
    };
    let mut out = Vec::new();
    for ring in 0..geometry.rings {
        let dr = ring as f64 - sector.row as f64;
        if dr.abs() >= radius {
            continue;
        }
        for wedge in 0..geometry.wedges {
            let dw = wedge_gap(wedge, sector.col, geometry.wedges) as f64;
            if (dr * dr + dw * dw).sqrt() < radius {
                out.push(GridPosition::new(ring, wedge));
            }
        }
    }
    Ok(out)
}

/// A node grid with per-node incoming neighbourhoods, stored as row-major
/// node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub kind: TopologyKind,
    pub height: usize,
    pub width: usize,
    pub neighborhood: NeighborhoodSpec,
    pub polar_geometry: Option<PolarGeometry>,
    neighborhoods: Vec<Vec<usize>>,
}

impl Topology {
    pub fn cartesian(height: usize, width: usize, radius: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("Cartesian topology needs non-zero dimensions"));
        }
        let mut neighborhoods = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                let nb = cartesian_neighborhood(GridPosition::new(row, col), radius, height, width)?;
                neighborhoods.push(nb.iter().map(|p| p.row * width + p.col).collect());
            }
        }
        Ok(Self {
            kind: TopologyKind::Cartesian,
            height,
            width,
            neighborhood: NeighborhoodSpec::fixed(radius),
            polar_geometry: None,
            neighborhoods,
        })
    }

    pub fn polar(geometry: PolarGeometry, spec: NeighborhoodSpec) -> Result<Self> {
        let (height, width) = (geometry.rings, geometry.wedges);
        let mut neighborhoods = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                let nb = polar_neighborhood(GridPosition::new(row, col), &geometry, spec)?;
                neighborhoods.push(nb.iter().map(|p| p.row * width + p.col).collect());
            }
        }
        Ok(Self {
            kind: TopologyKind::Polar,
            height,
            width,
            neighborhood: spec,
            polar_geometry: Some(geometry),
            neighborhoods,
        })
    }

    pub fn node_count(&self) -> usize {
        self.height * self.width
    }

    pub fn position(&self, node: usize) -> GridPosition {
        GridPosition::new(node / self.width, node % self.width)
    }

    pub fn node_index(&self, pos: GridPosition) -> usize {
        pos.row * self.width + pos.col
    }

    /// Incoming node indices of `node`, in deterministic row-major order.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighborhoods[node]
    }

    pub fn neighbor_positions(&self, node: usize) -> Vec<GridPosition> {
        self.neighborhoods[node]
            .iter()
            .map(|&i| self.position(i))
            .collect()
    }

    /// Total incoming edges over all nodes.
    pub fn edge_count(&self) -> usize {
        self.neighborhoods.iter().map(Vec::len).sum()
    }

    /// Same node layout and neighbourhoods.
    pub fn is_compatible(&self, other: &Topology) -> bool {
        self.kind == other.kind
            && self.height == other.height
            && self.width == other.width
            && self.neighborhoods == other.neighborhoods
    }
}

/// Serializable recipe for a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TopologySpec {
    Cartesian {
        height: usize,
        width: usize,
        radius: f64,
    },
    Polar {
        source_size: usize,
        rings: usize,
        wedges: usize,
        base_radius: f64,
        #[serde(default = "default_true")]
        dynamic: bool,
    },
}

fn default_true() -> bool {
    true
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec::Cartesian {
            height: 16,
            width: 16,
            radius: 2.0,
        }
    }
}

impl TopologySpec {
    /// The 7-ring, 36-wedge picture cut from a 36x36 image.
    pub fn default_polar() -> Self {
        TopologySpec::Polar {
            source_size: 36,
            rings: 7,
            wedges: 36,
            base_radius: 2.0,
            dynamic: true,
        }
    }

    pub fn kind(&self) -> TopologyKind {
        match self {
            TopologySpec::Cartesian { .. } => TopologyKind::Cartesian,
            TopologySpec::Polar { .. } => TopologyKind::Polar,
        }
    }

    pub fn build(&self) -> Result<Topology> {
        match *self {
            TopologySpec::Cartesian {
                height,
                width,
                radius,
            } => Topology::cartesian(height, width, radius),
            TopologySpec::Polar {
                source_size,
                rings,
                wedges,
                base_radius,
                dynamic,
            } => Topology::polar(
                PolarGeometry::new(source_size, rings, wedges)?,
                NeighborhoodSpec {
                    radius: base_radius,
                    dynamic,
                },
            ),
        }
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        match *self {
            TopologySpec::Cartesian { height, width, .. } => TopologySpec::Cartesian {
                height,
                width,
                radius,
            },
            TopologySpec::Polar {
                source_size,
                rings,
                wedges,
                dynamic,
                ..
            } => TopologySpec::Polar {
                source_size,
                rings,
                wedges,
                base_radius: radius,
                dynamic,
            },
        }
    }
}

impl Topology {
    /// The recipe that rebuilds this topology.
    pub fn spec(&self) -> TopologySpec {
        match &self.polar_geometry {
            None => TopologySpec::Cartesian {
                height: self.height,
                width: self.width,
                radius: self.neighborhood.radius,
            },
            Some(g) => TopologySpec::Polar {
                source_size: g.source_size,
                rings: g.rings,
                wedges: g.wedges,
                base_radius: self.neighborhood.radius,
                dynamic: self.neighborhood.dynamic,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_ball(center: (i64, i64), radius: f64, h: i64, w: i64) -> Vec<GridPosition> {
        let mut out = Vec::new();
        for r in 0..h {
            for c in 0..w {
                let d = (((r - center.0).pow(2) + (c - center.1).pow(2)) as f64).sqrt();
                if d < radius {
                    out.push(GridPosition::new(r as usize, c as usize));
                }
            }
        }
        out
    }

    #[test]
    fn interior_sizes_follow_the_radius_table() {
        // The table's radii are rounded square roots.
        let radii = [1.0, 2f64.sqrt(), 2.0, 5f64.sqrt(), 8f64.sqrt(), 3.0];
        let sizes = [1, 5, 9, 13, 21, 25];
        for (r, n) in radii.iter().zip(sizes) {
            let nb = cartesian_neighborhood(GridPosition::new(8, 8), *r, 16, 16).unwrap();
            assert_eq!(nb.len(), n, "radius {r}");
            let oracle = brute_force_ball((8, 8), *r, 16, 16);
            assert_eq!(nb, oracle);
        }
        // Taken literally, 2.24 > sqrt(5) and the strict ball gains the knight moves.
        let literal = cartesian_neighborhood(GridPosition::new(8, 8), 2.24, 16, 16).unwrap();
        assert_eq!(literal.len(), 21);
    }

    #[test]
    fn corner_is_truncated() {
        let nb = cartesian_neighborhood(GridPosition::new(0, 0), 2.0, 16, 16).unwrap();
        assert_eq!(
            nb,
            vec![
                GridPosition::new(0, 0),
                GridPosition::new(0, 1),
                GridPosition::new(1, 0),
                GridPosition::new(1, 1)
            ]
        );
        assert_eq!(nb, brute_force_ball((0, 0), 2.0, 16, 16));
    }

    #[test]
    fn out_of_bounds_centre_is_rejected() {
        assert!(cartesian_neighborhood(GridPosition::new(16, 0), 2.0, 16, 16).is_err());
        assert!(cartesian_neighborhood(GridPosition::new(0, 0), 0.0, 16, 16).is_err());
    }

    #[test]
    fn default_grid_has_2116_edges() {
        let topo = Topology::cartesian(16, 16, 2.0).unwrap();
        let brute: usize = (0..16)
            .flat_map(|r| (0..16).map(move |c| (r, c)))
            .map(|(r, c)| brute_force_ball((r, c), 2.0, 16, 16).len())
            .sum();
        assert_eq!(brute, 2116);
        assert_eq!(topo.edge_count(), 2116);
    }

    #[test]
    fn polar_ratio_and_sector_sizes() {
        let g = PolarGeometry::new(36, 7, 36).unwrap();
        assert!((g.ratio - 0.8394).abs() < 5e-4, "ratio {}", g.ratio);
        let innermost = 18.0 * g.ratio.powi(6) * (1.0 - g.ratio);
        assert!((g.ring_width(0) - innermost).abs() < 1e-12);
        assert!((g.ring_width(0) - 1.01).abs() < 0.01, "width {}", g.ring_width(0));
        assert!((g.blind_spot_radius() - 18.0 * g.ratio.powi(7)).abs() < 1e-12);
        assert!((g.blind_spot_radius() - 5.288).abs() < 1e-3);
        assert_eq!(g.boundaries[0], 18.0);
        for pair in g.boundaries.windows(2) {
            assert!(pair[1] < pair[0] && pair[1] > 0.0);
            assert!((pair[1] / pair[0] - g.ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn four_wedge_ratio() {
        let g = PolarGeometry::new(36, 1, 4).unwrap();
        let expected = (1.0 - PI / 4.0) / (1.0 + PI / 4.0);
        assert!((g.ratio - expected).abs() < 1e-15);
        assert!((g.ratio - 0.1202).abs() < 1e-4);
    }

    #[test]
    fn polar_rejects_bad_configs() {
        assert!(PolarGeometry::new(35, 7, 36).is_err());
        assert!(PolarGeometry::new(36, 0, 36).is_err());
        assert!(PolarGeometry::new(36, 7, 2).is_err());
        // 18 * 0.8394^k < 0.5 once k >= 21
        assert!(PolarGeometry::new(36, 25, 36).is_err());
    }

    #[test]
    fn ring_lookup_matches_bounds() {
        let g = PolarGeometry::new(36, 7, 36).unwrap();
        assert_eq!(g.ring_of_radius(1.0), None);
        assert_eq!(g.ring_of_radius(18.0), None);
        assert_eq!(g.ring_of_radius(17.9), Some(6));
        assert_eq!(g.ring_of_radius(g.blind_spot_radius()), Some(0));
        assert_eq!(g.wedge_of_angle(-1e-9), 35);
        assert_eq!(g.wedge_of_angle(0.0), 0);
    }

    fn stencil_oracle(ring: i64, rings: i64, radius: f64) -> usize {
        // Offsets within the radius, dropped when they fall off the ring axis.
        let reach = radius.ceil() as i64;
        let mut n = 0;
        for dr in -reach..=reach {
            for dw in -reach..=reach {
                let inside = ((dr * dr + dw * dw) as f64).sqrt() < radius;
                if inside && (0..rings).contains(&(ring + dr)) {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn outermost_ring_uses_truncated_stencil() {
        let g = PolarGeometry::new(36, 7, 36).unwrap();
        let spec = NeighborhoodSpec::dynamic(2.0);
        assert!((g.dynamic_radius(6, 2.0) - 2.0).abs() < 1e-12);
        let nb = polar_neighborhood(GridPosition::new(6, 10), &g, spec).unwrap();
        assert_eq!(nb.len(), stencil_oracle(6, 7, 2.0));
        assert_eq!(nb.len(), 6);
        for ring in 0..7 {
            let nb = polar_neighborhood(GridPosition::new(ring, 3), &g, spec).unwrap();
            let rho = g.dynamic_radius(ring, 2.0);
            assert_eq!(nb.len(), stencil_oracle(ring as i64, 7, rho), "ring {ring}");
        }
    }

    #[test]
    fn polar_wedges_wrap_and_are_rotation_symmetric() {
        let g = PolarGeometry::new(36, 7, 36).unwrap();
        let spec = NeighborhoodSpec::dynamic(2.0);
        for ring in 0..7 {
            let base = polar_neighborhood(GridPosition::new(ring, 0), &g, spec).unwrap();
            let has_next = base.contains(&GridPosition::new(ring, 1));
            let has_prev = base.contains(&GridPosition::new(ring, 35));
            assert_eq!(has_next, has_prev);
            let mut base_rotated: Vec<_> = base
                .iter()
                .map(|p| GridPosition::new(p.row, (p.col + 7) % 36))
                .collect();
            base_rotated.sort();
            let shifted = polar_neighborhood(GridPosition::new(ring, 7), &g, spec).unwrap();
            assert_eq!(base_rotated, shifted);
        }
    }

    #[test]
    fn polar_connection_count_is_bounded() {
        let g = PolarGeometry::new(36, 7, 36).unwrap();
        let topo = Topology::polar(g, NeighborhoodSpec::dynamic(2.0)).unwrap();
        let n = topo.edge_count();
        assert!((1500..=2116).contains(&n), "{n}");
        assert_eq!(n % 36, 0);
    }
}
