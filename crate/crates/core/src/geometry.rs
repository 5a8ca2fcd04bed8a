//! Masked uniform lattices for the exterior region Ω, the obstacle K and
//! the full truncated region.
//!
//! A node with integer coordinates `i` sits at `h * i`. The truncation
//! region is open (nodes on its boundary are Dirichlet and excluded), the
//! obstacle is closed (a node at distance exactly `radius` belongs to K).
//! Every node of the truncated region is tagged either [`RegionTag::Omega`]
//! or [`RegionTag::Obstacle`], so Ω, K and the full grid share one index set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack for lattice-point classification against region boundaries.
const EDGE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("obstacle {what} has {got} components, expected {expected}")]
    ComponentCount {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("mesh too coarse: obstacle width {width} is thinner than two cells (h = {h})")]
    TooCoarse { width: f64, h: f64 },
    #[error("obstacle reaches within two cells of the truncation boundary (extent {extent}, limit {limit})")]
    ObstacleTouchesBoundary { extent: f64, limit: f64 },
    #[error("obstacle contains no lattice nodes at h = {0}")]
    EmptyObstacle(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    None,
    Disk { center: Vec<f64>, radius: f64 },
    Box { center: Vec<f64>, half_widths: Vec<f64> },
}

impl Obstacle {
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Obstacle::None => false,
            Obstacle::Disk { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 <= radius * radius * (1.0 + EDGE_EPS)
            }
            Obstacle::Box { center, half_widths } => x
                .iter()
                .zip(center)
                .zip(half_widths)
                .all(|((a, c), w)| (a - c).abs() <= w * (1.0 + EDGE_EPS)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationShape {
    Box,
    Disk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dimension: usize,
    pub obstacle: Obstacle,
    pub truncation_radius: f64,
    pub truncation_shape: TruncationShape,
}

impl DomainSpec {
    pub fn free(dimension: usize, truncation_radius: f64, truncation_shape: TruncationShape) -> Self {
        DomainSpec {
            dimension,
            obstacle: Obstacle::None,
            truncation_radius,
            truncation_shape,
        }
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacle = obstacle;
        self
    }

    pub fn with_radius(mut self, truncation_radius: f64) -> Self {
        self.truncation_radius = truncation_radius;
        self
    }

    fn inside_truncation(&self, x: &[f64]) -> bool {
        let r = self.truncation_radius;
        match self.truncation_shape {
            TruncationShape::Box => x.iter().all(|a| a.abs() < r * (1.0 - EDGE_EPS)),
            TruncationShape::Disk => {
                x.iter().map(|a| a * a).sum::<f64>() < r * r * (1.0 - EDGE_EPS)
            }
        }
    }

    fn validate(&self, h: f64) -> Result<(), GeometryError> {
        let d = self.dimension;
        if d != 2 && d != 3 {
            return Err(GeometryError::Dimension(d));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GeometryError::NonPositive("h"));
        }
        if !(self.truncation_radius > 0.0 && self.truncation_radius.is_finite()) {
            return Err(GeometryError::NonPositive("truncation_radius"));
        }
        let check_len = |what, v: &Vec<f64>| {
            if v.len() != d {
                Err(GeometryError::ComponentCount {
                    what,
                    got: v.len(),
                    expected: d,
                })
            } else {
                Ok(())
            }
        };
        // Farthest reach of the obstacle, measured in the truncation's own norm.
        let extent = match &self.obstacle {
            Obstacle::None => return Ok(()),
            Obstacle::Disk { center, radius } => {
                check_len("center", center)?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::NonPositive("obstacle radius"));
                }
                if 2.0 * radius < 2.0 * h {
                    return Err(GeometryError::TooCoarse { width: 2.0 * radius, h });
                }
                match self.truncation_shape {
                    TruncationShape::Box => center
                        .iter()
                        .map(|c| c.abs() + radius)
                        .fold(0.0, f64::max),
                    TruncationShape::Disk => center.iter().map(|c| c * c).sum::<f64>().sqrt() + radius,
                }
            }
            Obstacle::Box { center, half_widths } => {
                check_len("center", center)?;
                check_len("half_widths", half_widths)?;
                if half_widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(GeometryError::NonPositive("obstacle half-width"));
                }
                let thinnest = half_widths.iter().cloned().fold(f64::INFINITY, f64::min);
                if 2.0 * thinnest < 2.0 * h {
                    return Err(GeometryError::TooCoarse { width: 2.0 * thinnest, h });
                }
                let far = center.iter().zip(half_widths).map(|(c, w)| c.abs() + w);
                match self.truncation_shape {
                    TruncationShape::Box => far.fold(0.0, f64::max),
                    TruncationShape::Disk => far.map(|a| a * a).sum::<f64>().sqrt(),
                }
            }
        };
        let limit = self.truncation_radius - 2.0 * h;
        if extent > limit {
            return Err(GeometryError::ObstacleTouchesBoundary { extent, limit });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    Omega,
    Obstacle,
}

/// A lattice face: the half-edge leaving `node` along `axis` in `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub node: usize,
    pub axis: usize,
    /// +1 or -1.
    pub direction: i8,
    /// For inner faces, the obstacle node across Γ. `None` on the outer boundary.
    pub neighbor: Option<usize>,
}

impl Face {
    /// Unit normal; on inner faces it points from Ω into K.
    pub fn normal(&self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis] = self.direction as f64;
        n
    }
}

#[derive(Debug, Clone)]
struct Lookup {
    min: [i32; 3],
    size: [usize; 3],
    index: Vec<u32>,
}

impl Lookup {
    fn slot(&self, c: [i32; 3]) -> Option<usize> {
        let mut s = 0usize;
        for a in 0..3 {
            let off = c[a] - self.min[a];
            if off < 0 || off as usize >= self.size[a] {
                return None;
            }
            s = s * self.size[a] + off as usize;
        }
        Some(s)
    }
}

#[derive(Debug, Clone)]
pub struct MaskedGrid {
    spec: DomainSpec,
    h: f64,
    coords: Vec<[i32; 3]>,
    tags: Vec<RegionTag>,
    inner_faces: Vec<Face>,
    outer_faces: Vec<Face>,
    lookup: Lookup,
}

impl MaskedGrid {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Integer lattice coordinates (unused trailing axes are zero).
    pub fn coords(&self, node: usize) -> [i32; 3] {
        self.coords[node]
    }

    pub fn position(&self, node: usize) -> [f64; 3] {
        let c = self.coords[node];
        let mut x = [0.0; 3];
        for a in 0..self.spec.dimension {
            x[a] = lattice_point(c[a], self.h, self.spec.truncation_radius);
        }
        x
    }

    pub fn tag(&self, node: usize) -> RegionTag {
        self.tags[node]
    }

    pub fn tags(&self) -> &[RegionTag] {
        &self.tags
    }

    pub fn count(&self, tag: RegionTag) -> usize {
        self.tags.iter().filter(|&&t| t == tag).count()
    }

    pub fn inner_faces(&self) -> &[Face] {
        &self.inner_faces
    }

    pub fn outer_faces(&self) -> &[Face] {
        &self.outer_faces
    }

    pub fn node_at(&self, c: [i32; 3]) -> Option<usize> {
        let s = self.lookup.slot(c)?;
        let idx = self.lookup.index[s];
        (idx != u32::MAX).then_some(idx as usize)
    }

    /// Grid neighbour of `node` one step along `axis` in `direction`.
    pub fn neighbor(&self, node: usize, axis: usize, direction: i8) -> Option<usize> {
        let mut c = self.coords[node];
        c[axis] += direction as i32;
        self.node_at(c)
    }

    /// Both grids come from identical specs and spacing.
    pub fn same_lattice(&self, other: &MaskedGrid) -> bool {
        self.h == other.h && self.spec == other.spec && self.len() == other.len()
    }
}

/// Coordinate of lattice index `c` along one axis: the lattice is anchored
/// at `-R`, so a box holds `N` nodes per axis when `h = 2R/(N+1)`.
#[inline]
fn lattice_point(c: i32, h: f64, radius: f64) -> f64 {
    c as f64 * h - radius
}

/// Build the masked lattice for `spec` at spacing `h`.
///
/// Nodes sit at `-R + k h` per axis and are ordered lexicographically by
/// integer coordinates, last axis fastest.
pub fn build_grid(spec: &DomainSpec, h: f64) -> Result<MaskedGrid, GeometryError> {
    spec.validate(h)?;
    let d = spec.dimension;
    let radius = spec.truncation_radius;
    let span = (2.0 * radius / h).ceil() as usize + 2;
    let min = [0i32; 3];
    let mut size = [1usize; 3];
    for s in size.iter_mut().take(d) {
        *s = span;
    }
    let total: usize = size.iter().product();
    let mut index = vec![u32::MAX; total];
    let mut coords = Vec::new();
    let mut tags = Vec::new();

    let mut x = [0.0f64; 3];
    for s in 0..total {
        let mut rem = s;
        let mut c = [0i32; 3];
        for a in (0..3).rev() {
            c[a] = min[a] + (rem % size[a]) as i32;
            rem /= size[a];
        }
        for a in 0..3 {
            x[a] = if a < d { lattice_point(c[a], h, radius) } else { 0.0 };
        }
        if !spec.inside_truncation(&x[..d]) {
            continue;
        }
        index[s] = coords.len() as u32;
        coords.push(c);
        tags.push(if spec.obstacle.contains(&x[..d]) {
            RegionTag::Obstacle
        } else {
            RegionTag::Omega
        });
    }

    let lookup = Lookup { min, size, index };
    let mut grid = MaskedGrid {
        spec: spec.clone(),
        h,
        coords,
        tags,
        inner_faces: Vec::new(),
        outer_faces: Vec::new(),
        lookup,
    };

    if !matches!(spec.obstacle, Obstacle::None) && grid.count(RegionTag::Obstacle) == 0 {
        return Err(GeometryError::EmptyObstacle(h));
    }

    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for node in 0..grid.len() {
        for axis in 0..d {
            for direction in [-1i8, 1] {
                match grid.neighbor(node, axis, direction) {
                    None => outer.push(Face {
                        node,
                        axis,
                        direction,
                        neighbor: None,
                    }),
                    Some(j) => {
                        if grid.tags[node] == RegionTag::Omega && grid.tags[j] == RegionTag::Obstacle {
                            inner.push(Face {
                                node,
                                axis,
                                direction,
                                neighbor: Some(j),
                            });
                        }
                    }
                }
            }
        }
    }
    if outer.iter().any(|f| grid.tags[f.node] == RegionTag::Obstacle) {
        return Err(GeometryError::ObstacleTouchesBoundary {
            extent: f64::NAN,
            limit: spec.truncation_radius - 2.0 * h,
        });
    }
    grid.inner_faces = inner;
    grid.outer_faces = outer;
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Inner,
    Outer,
}

/// Discrete surface measure: face count times `h^(d-1)`.
pub fn boundary_measure(grid: &MaskedGrid, which: Boundary) -> f64 {
    let faces = match which {
        Boundary::Inner => grid.inner_faces.len(),
        Boundary::Outer => grid.outer_faces.len(),
    };
    faces as f64 * grid.h.powi(grid.dimension() as i32 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(center: &[f64], radius: f64) -> Obstacle {
        Obstacle::Disk {
            center: center.to_vec(),
            radius,
        }
    }

    #[test]
    fn free_box_three_by_three() {
        let spec = DomainSpec::free(2, 1.0, TruncationShape::Box);
        let g = build_grid(&spec, 0.5).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.count(RegionTag::Omega), 9);
        let xs: Vec<f64> = (0..9).map(|i| g.position(i)[0]).collect();
        assert_eq!(xs[0], -0.5);
        assert_eq!(xs[8], 0.5);
        assert_eq!(g.coords(0), [1, 1, 0]);
        assert_eq!(g.coords(1), [1, 2, 0]);
        assert!(g.inner_faces().is_empty());
        assert_eq!(boundary_measure(&g, Boundary::Inner), 0.0);
        // 3 nodes per side, 4 sides.
        assert_eq!(g.outer_faces().len(), 12);
    }

    #[test]
    fn disk_obstacle_membership() {
        let spec = DomainSpec::free(2, 2.0, TruncationShape::Box).with_obstacle(disk(&[0.0, 0.0], 0.6));
        let g = build_grid(&spec, 0.25).unwrap();
        let origin = g.node_at([8, 8, 0]).unwrap();
        assert_eq!(g.position(origin), [0.0, 0.0, 0.0]);
        assert_eq!(g.tag(origin), RegionTag::Obstacle);
        let one = g.node_at([12, 8, 0]).unwrap();
        assert_eq!(g.position(one)[0], 1.0);
        assert_eq!(g.tag(one), RegionTag::Omega);
    }

    #[test]
    fn closed_obstacle_tie_break() {
        // Node (0.5, 0) sits exactly on the circle of radius 0.5.
        let spec = DomainSpec::free(2, 2.0, TruncationShape::Box).with_obstacle(disk(&[0.0, 0.0], 0.5));
        let g = build_grid(&spec, 0.25).unwrap();
        let on_circle = g.node_at([10, 8, 0]).unwrap();
        assert_eq!(g.tag(on_circle), RegionTag::Obstacle);
    }

    #[test]
    fn inner_faces_separate_regions_and_point_into_obstacle() {
        let spec = DomainSpec::free(2, 2.0, TruncationShape::Disk).with_obstacle(disk(&[0.1, -0.2], 0.7));
        let g = build_grid(&spec, 0.2).unwrap();
        assert!(!g.inner_faces().is_empty());
        for f in g.inner_faces() {
            let j = f.neighbor.unwrap();
            assert_eq!(g.tag(f.node), RegionTag::Omega);
            assert_eq!(g.tag(j), RegionTag::Obstacle);
            let (pi, pj) = (g.position(f.node), g.position(j));
            let n = f.normal();
            let step: f64 = (0..2).map(|a| (pj[a] - pi[a]) * n[a]).sum();
            assert!((step - g.h()).abs() < 1e-12);
        }
        for f in g.outer_faces() {
            assert!(f.neighbor.is_none());
            assert!(g.neighbor(f.node, f.axis, f.direction).is_none());
        }
    }

    #[test]
    fn axis_aligned_square_has_exact_measure() {
        for h in [0.5, 0.25, 0.125] {
            // Cell-aligned square of side 1: its nodes' cells tile it exactly.
            let spec = DomainSpec::free(2, 3.0, TruncationShape::Box).with_obstacle(Obstacle::Box {
                center: vec![h / 2.0, h / 2.0],
                half_widths: vec![0.5, 0.5],
            });
            let g = build_grid(&spec, h).unwrap();
            assert_eq!(boundary_measure(&g, Boundary::Inner), 4.0, "h = {h}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let base = DomainSpec::free(2, 2.0, TruncationShape::Box);
        assert!(matches!(build_grid(&base, 0.0), Err(GeometryError::NonPositive(_))));
        assert!(matches!(
            build_grid(&DomainSpec::free(4, 2.0, TruncationShape::Box), 0.1),
            Err(GeometryError::Dimension(4))
        ));
        let thin = base.clone().with_obstacle(disk(&[0.0, 0.0], 0.1));
        assert!(matches!(build_grid(&thin, 0.25), Err(GeometryError::TooCoarse { .. })));
        let touching = base.clone().with_obstacle(disk(&[1.0, 0.0], 0.85));
        assert!(matches!(
            build_grid(&touching, 0.1),
            Err(GeometryError::ObstacleTouchesBoundary { .. })
        ));
        let wrong = base.with_obstacle(disk(&[0.0], 0.5));
        assert!(matches!(build_grid(&wrong, 0.1), Err(GeometryError::ComponentCount { .. })));
    }

    #[test]
    fn three_dimensional_ball() {
        let spec = DomainSpec::free(3, 1.0, TruncationShape::Disk).with_obstacle(disk(&[0.0, 0.0, 0.0], 0.3));
        let g = build_grid(&spec, 0.125).unwrap();
        assert_eq!(g.count(RegionTag::Omega) + g.count(RegionTag::Obstacle), g.len());
        // Faces in 3D carry h^2 of area.
        let m = boundary_measure(&g, Boundary::Inner);
        assert_eq!(m, g.inner_faces().len() as f64 * 0.125 * 0.125);
    }

    #[test]
    fn inner_faces_match_flood_fill_perimeter() {
        let (r, h, radius) = (2.0, 0.25, 0.6);
        let spec = DomainSpec::free(2, r, TruncationShape::Box).with_obstacle(disk(&[0.0, 0.0], radius));
        let g = build_grid(&spec, h).unwrap();
        // Independent membership on the raw index lattice x = -R + k h.
        let n = (2.0 * r / h).round() as i32;
        let inside = |i: i32, j: i32| {
            let (x, y) = (-r + i as f64 * h, -r + j as f64 * h);
            (1..n).contains(&i) && (1..n).contains(&j) && x * x + y * y <= radius * radius * (1.0 + 1e-12)
        };
        let start = (n / 2, n / 2);
        assert!(inside(start.0, start.1));
        let mut seen = std::collections::HashSet::from([start]);
        let mut queue = std::collections::VecDeque::from([start]);
        let mut perimeter = 0;
        while let Some((i, j)) = queue.pop_front() {
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let next = (i + di, j + dj);
                if !inside(next.0, next.1) {
                    perimeter += 1;
                } else if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        assert_eq!(seen.len(), g.count(RegionTag::Obstacle));
        assert_eq!(g.inner_faces().len(), perimeter);
        assert_eq!(boundary_measure(&g, Boundary::Inner), perimeter as f64 * h);
    }

    #[test]
    fn disk_measure_tends_to_staircase_limit() {
        // The cells of a digitised disk form an orthogonally convex set, so
        // the measure is the bounding-box perimeter: 8r up to O(h), not 2πr.
        let radius = 1.0;
        let spec = DomainSpec::free(2, 2.0, TruncationShape::Box).with_obstacle(disk(&[0.013, -0.007], radius));
        let measures: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let m = boundary_measure(&build_grid(&spec, h).unwrap(), Boundary::Inner);
                assert!((m - 8.0 * radius).abs() <= 8.0 * h, "h = {h}: {m}");
                m
            })
            .collect();
        let extrapolated = 2.0 * measures[2] - measures[1];
        assert!((extrapolated - 8.0 * radius).abs() < 0.1, "{measures:?}");
        assert!((measures[2] - 2.0 * std::f64::consts::PI * radius).abs() > 1.5);
    }

    #[test]
    fn builds_are_deterministic_and_partition_nodes() {
        let spec = DomainSpec::free(2, 3.0, TruncationShape::Disk).with_obstacle(Obstacle::Box {
            center: vec![0.3, 0.1],
            half_widths: vec![0.8, 0.5],
        });
        let (a, b) = (build_grid(&spec, 0.15).unwrap(), build_grid(&spec, 0.15).unwrap());
        assert_eq!(a.tags(), b.tags());
        assert_eq!(a.inner_faces(), b.inner_faces());
        assert_eq!(a.outer_faces(), b.outer_faces());
        assert_eq!(a.count(RegionTag::Omega) + a.count(RegionTag::Obstacle), a.len());
        let coords: Vec<[i32; 3]> = (0..a.len()).map(|i| a.coords(i)).collect();
        assert!(coords.windows(2).all(|w| w[0] < w[1]));
    }
}
