//! Sparse Hermitian matrices of the discrete magnetic quadratic form.
//!
//! For a region `R` the form is
//!
//! ```text
//! q(u) = Σ_{edges i→j in R} |u_j e^{-iθ_ij} - u_i|² h^(d-2)
//!      + Σ_{truncation faces} |u_i|² h^(d-2)                  (Dirichlet)
//!      + Σ_{inner faces} γ_eff |u_i|² h^(d-1)                   (Robin)
//! ```
//!
//! and the assembled matrix `H` satisfies `q(u) = h^d ⟨u, H u⟩`, i.e. `H`
//! approximates the operator itself. Edges crossing Γ are dropped on both
//! sides, so the Robin condition enters only through the face term
//! (`γ_eff = γ` on Ω, `-γ` on K). The Dirichlet variant treats Γ like the
//! truncation boundary.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldSpec, LinkPhases};
use crate::geometry::{DomainSpec, MaskedGrid, RegionTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("link phases were computed on a different lattice")]
    LatticeMismatch,
    #[error("region {0:?} has no nodes")]
    EmptyRegion(Region),
    #[error("region {0:?} needs an inner boundary condition")]
    MissingBoundary(Region),
    #[error("the full-region operator has no inner boundary term")]
    FullWithBoundary,
    #[error("Robin coefficient must be finite, got {0}")]
    NonFiniteGamma(f64),
    #[error("cannot assemble region {0:?} directly")]
    UnsupportedRegion(Region),
    #[error("direct sum operands {0}")]
    DirectSum(&'static str),
    #[error("vector length {got} does not match operator dimension {expected}")]
    Dimension { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Omega,
    Obstacle,
    Full,
    DirectSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerBoundary {
    Robin { gamma: f64 },
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorMeta {
    pub region: Region,
    pub h: f64,
    pub dimension: usize,
    pub boundary: Option<InnerBoundary>,
    pub field: Option<FieldSpec>,
    pub domain: Option<DomainSpec>,
}

/// Sparse Hermitian matrix in CSR form with both triangles stored. Each
/// unordered off-diagonal pair is computed once and mirrored with an exact
/// conjugate.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<Complex64>,
    /// Row → grid node.
    nodes: Vec<usize>,
    /// Grid node → row, `u32::MAX` when the node is not in this operator.
    rows_of_nodes: Vec<u32>,
    meta: OperatorMeta,
}

impl HermitianOperator {
    /// Build from per-row `(col, value)` lists; columns need not be sorted.
    pub fn from_rows(
        rows: Vec<Vec<(usize, Complex64)>>,
        nodes: Vec<usize>,
        universe: usize,
        meta: OperatorMeta,
    ) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c as u32);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        let mut rows_of_nodes = vec![u32::MAX; universe];
        for (r, &node) in nodes.iter().enumerate() {
            rows_of_nodes[node] = r as u32;
        }
        HermitianOperator {
            row_ptr,
            cols,
            values,
            nodes,
            rows_of_nodes,
            meta,
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn region(&self) -> Region {
        self.meta.region
    }

    pub fn meta(&self) -> &OperatorMeta {
        &self.meta
    }

    /// Grid node of each row.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Number of nodes in the grid this operator was built on.
    pub fn universe(&self) -> usize {
        self.rows_of_nodes.len()
    }

    pub fn row_of_node(&self, node: usize) -> Option<usize> {
        let r = *self.rows_of_nodes.get(node)?;
        (r != u32::MAX).then_some(r as usize)
    }

    /// `(col, value)` pairs of one row, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.values[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entry(i, i).re).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim())
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// Lower bound on the spectrum from Gershgorin discs.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let mut centre = 0.0;
                let mut radius = 0.0;
                for (j, v) in self.row(i) {
                    if j == i {
                        centre = v.re;
                    } else {
                        radius += v.norm();
                    }
                }
                centre - radius
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper bound on the spectrum from Gershgorin discs.
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.row(i).map(|(j, v)| if j == i { v.re } else { v.norm() }).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entry `(i,j)` is the bitwise conjugate of `(j,i)` and the diagonal is real.
    pub fn is_hermitian_bitwise(&self) -> bool {
        (0..self.dim()).all(|i| {
            self.row(i).all(|(j, v)| {
                let w = self.entry(j, i);
                v.re.to_bits() == w.re.to_bits() && v.im.to_bits() == (-w.im).to_bits()
                    || (i == j && v.im == 0.0)
            })
        })
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        crate::exec::fill(y, |i| self.row_dot(i, x));
    }

    pub fn matvec_seq(&self, x: &[Complex64], y: &mut [Complex64]) {
        crate::exec::fill_seq(y, |i| self.row_dot(i, x));
    }

    #[cfg(feature = "parallel")]
    pub fn matvec_par(&self, x: &[Complex64], y: &mut [Complex64]) {
        crate::exec::fill_par(y, |i| self.row_dot(i, x));
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            acc += self.values[k] * x[self.cols[k] as usize];
        }
        acc
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.matvec(x, &mut y);
        y
    }

    /// `H + c I` with identical pattern and metadata.
    pub fn shifted(&self, c: f64) -> HermitianOperator {
        let mut out = self.clone();
        for i in 0..out.dim() {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.cols[k] as usize == i {
                    out.values[k].re += c;
                }
            }
        }
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.dim();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                a[i * n + j] = v;
            }
        }
        a
    }

    /// Lower triangle in coordinate text: header, `n n nnz`, then
    /// `row col re im` per line, 0-based.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.dim();
        let lower: usize = (0..n).map(|i| self.row(i).filter(|&(j, _)| j <= i).count()).sum();
        writeln!(w, "%%MatrixMarket-compatible coordinate complex hermitian")?;
        writeln!(w, "{n} {n} {lower}")?;
        for i in 0..n {
            for (j, v) in self.row(i).filter(|&(j, _)| j <= i) {
                writeln!(w, "{i} {j} {:e} {:e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Off-diagonal entry for the forward edge with phase `theta`.
#[inline]
fn hop(theta: f64, inv_h2: f64) -> Complex64 {
    -Complex64::from_polar(1.0, -theta) * inv_h2
}

fn in_region(tag: RegionTag, region: Region) -> bool {
    match region {
        Region::Full => true,
        Region::Omega => tag == RegionTag::Omega,
        Region::Obstacle => tag == RegionTag::Obstacle,
        Region::DirectSum => false,
    }
}

/// Assemble the operator of `region`. `inner` selects the condition on Γ and
/// must be `None` exactly when `region` is [`Region::Full`].
pub fn assemble(
    grid: &MaskedGrid,
    phases: &LinkPhases,
    region: Region,
    inner: Option<InnerBoundary>,
) -> Result<HermitianOperator, AssemblyError> {
    if phases.len() != grid.len() || phases.h() != grid.h() || phases.dimension() != grid.dimension() {
        return Err(AssemblyError::LatticeMismatch);
    }
    match (region, inner) {
        (Region::DirectSum, _) => return Err(AssemblyError::UnsupportedRegion(region)),
        (Region::Full, Some(_)) => return Err(AssemblyError::FullWithBoundary),
        (Region::Omega | Region::Obstacle, None) => return Err(AssemblyError::MissingBoundary(region)),
        (_, Some(InnerBoundary::Robin { gamma })) if !gamma.is_finite() => {
            return Err(AssemblyError::NonFiniteGamma(gamma))
        }
        _ => {}
    }
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| in_region(grid.tag(i), region)).collect();
    if nodes.is_empty() {
        return Err(AssemblyError::EmptyRegion(region));
    }
    let mut row_of = vec![u32::MAX; grid.len()];
    for (r, &node) in nodes.iter().enumerate() {
        row_of[node] = r as u32;
    }

    let d = grid.dimension();
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let face_term = match (region, inner) {
        (Region::Omega, Some(InnerBoundary::Robin { gamma })) => gamma / h,
        (Region::Obstacle, Some(InnerBoundary::Robin { gamma })) => -gamma / h,
        (_, Some(InnerBoundary::Dirichlet)) => inv_h2,
        _ => 0.0,
    };

    let rows: Vec<Vec<(usize, Complex64)>> = crate::exec::map(&nodes, |&i| {
        let mut diag = 0.0;
        let mut row = Vec::with_capacity(2 * d + 1);
        for axis in 0..d {
            for direction in [-1i8, 1] {
                match grid.neighbor(i, axis, direction) {
                    // Truncation boundary: Dirichlet, missing neighbour is zero.
                    None => diag += inv_h2,
                    Some(j) if row_of[j] != u32::MAX => {
                        diag += inv_h2;
                        let v = if direction > 0 {
                            hop(phases.forward(i, axis), inv_h2)
                        } else {
                            hop(phases.forward(j, axis), inv_h2).conj()
                        };
                        row.push((row_of[j] as usize, v));
                    }
                    // Across Γ.
                    Some(_) => diag += face_term,
                }
            }
        }
        row.push((row_of[i] as usize, Complex64::new(diag, 0.0)));
        row
    });

    let meta = OperatorMeta {
        region,
        h,
        dimension: d,
        boundary: inner,
        field: None,
        domain: Some(grid.spec().clone()),
    };
    Ok(HermitianOperator::from_rows(rows, nodes, grid.len(), meta))
}

/// Attach the field model to an operator's metadata.
pub fn with_field(mut op: HermitianOperator, field: FieldSpec) -> HermitianOperator {
    op.meta.field = Some(field);
    op
}

/// Block-diagonal `H_Ω ⊕ H_K` on the full node set, rows in grid order.
pub fn direct_sum(omega: &HermitianOperator, obstacle: &HermitianOperator) -> Result<HermitianOperator, AssemblyError> {
    let universe = omega.universe();
    if obstacle.universe() != universe || omega.meta.h != obstacle.meta.h {
        return Err(AssemblyError::DirectSum("live on different grids"));
    }
    let mut owner: Vec<Option<(bool, usize)>> = vec![None; universe];
    for (r, &node) in omega.nodes.iter().enumerate() {
        owner[node] = Some((true, r));
    }
    for (r, &node) in obstacle.nodes.iter().enumerate() {
        if owner[node].is_some() {
            return Err(AssemblyError::DirectSum("overlap"));
        }
        owner[node] = Some((false, r));
    }
    if owner.iter().any(Option::is_none) {
        return Err(AssemblyError::DirectSum("do not cover the grid"));
    }
    // With a full cover, new row index == grid node index.
    let rows: Vec<Vec<(usize, Complex64)>> = owner
        .iter()
        .map(|o| {
            let (is_omega, r) = o.expect("covered");
            let src = if is_omega { omega } else { obstacle };
            src.row(r).map(|(c, v)| (src.nodes[c], v)).collect()
        })
        .collect();
    let mut meta = omega.meta.clone();
    meta.region = Region::DirectSum;
    Ok(HermitianOperator::from_rows(rows, (0..universe).collect(), universe, meta))
}

/// `q(u) = h^d Re⟨u, H u⟩`, the discrete quadratic form with its measure.
pub fn apply_form(op: &HermitianOperator, u: &[Complex64]) -> Result<f64, AssemblyError> {
    if u.len() != op.dim() {
        return Err(AssemblyError::Dimension {
            got: u.len(),
            expected: op.dim(),
        });
    }
    let hu = op.apply(u);
    let s: f64 = u.iter().zip(&hu).map(|(a, b)| (a.conj() * b).re).sum();
    Ok(s * op.meta.h.powi(op.meta.dimension as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec, Obstacle, TruncationShape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn obstacle_grid(h: f64) -> MaskedGrid {
        let spec = DomainSpec::free(2, 1.5, TruncationShape::Box).with_obstacle(Obstacle::Disk {
            center: vec![0.1, 0.0],
            radius: 0.5,
        });
        build_grid(&spec, h).unwrap()
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matvec_is_bitwise_sequential() {
        let grid = obstacle_grid(0.1);
        let phases = LinkPhases::compute(&grid, &crate::field::FieldSpec::constant(1.3, 2));
        let op = assemble(&grid, &phases, Region::Omega, Some(InnerBoundary::Robin { gamma: 0.5 })).unwrap();
        let x = random_vec(op.dim(), &mut ChaCha8Rng::seed_from_u64(9));
        let (mut a, mut b) = (vec![c(0.0, 0.0); op.dim()], vec![c(0.0, 0.0); op.dim()]);
        op.matvec_seq(&x, &mut a);
        op.matvec_par(&x, &mut b);
        assert_eq!(a, b);
    }

    /// Direct summation of the discrete form, independent of the matrix.
    fn form_oracle(
        grid: &MaskedGrid,
        phases: &LinkPhases,
        region: Region,
        inner: Option<InnerBoundary>,
        op: &HermitianOperator,
        u: &[Complex64],
    ) -> f64 {
        let d = grid.dimension();
        let h = grid.h();
        let val = |node: usize| op.row_of_node(node).map(|r| u[r]);
        let mut q = 0.0;
        for i in 0..grid.len() {
            let Some(ui) = val(i) else { continue };
            for axis in 0..d {
                for dir in [-1i8, 1] {
                    match grid.neighbor(i, axis, dir) {
                        None => q += ui.norm_sqr() * h.powi(d as i32 - 2),
                        Some(j) => match val(j) {
                            Some(uj) if dir > 0 => {
                                let t = Complex64::from_polar(1.0, -phases.forward(i, axis));
                                q += (uj * t - ui).norm_sqr() * h.powi(d as i32 - 2);
                            }
                            Some(_) => {}
                            None => match inner {
                                Some(InnerBoundary::Robin { gamma }) => {
                                    let g = if region == Region::Obstacle { -gamma } else { gamma };
                                    q += g * ui.norm_sqr() * h.powi(d as i32 - 1);
                                }
                                Some(InnerBoundary::Dirichlet) => q += ui.norm_sqr() * h.powi(d as i32 - 2),
                                None => unreachable!(),
                            },
                        },
                    }
                }
            }
        }
        q
    }

    #[test]
    fn single_node_is_four_over_h2() {
        let spec = DomainSpec::free(2, 1.0, TruncationShape::Box);
        let grid = build_grid(&spec, 0.5).unwrap();
        assert_eq!(grid.len(), 9);
        let spec1 = DomainSpec::free(2, 0.4, TruncationShape::Box);
        let g1 = build_grid(&spec1, 0.5).unwrap();
        assert_eq!(g1.len(), 1);
        let phases = LinkPhases::compute(&g1, &FieldSpec::constant(0.0, 2));
        let op = assemble(&g1, &phases, Region::Full, None).unwrap();
        assert_eq!(op.dim(), 1);
        assert_eq!(op.entry(0, 0), c(16.0, 0.0));
    }

    #[test]
    fn assembled_operators_are_bitwise_hermitian() {
        let grid = obstacle_grid(0.1);
        let phases = LinkPhases::compute(&grid, &FieldSpec::radial_decay(1.0, 2.0, 2));
        let robin = Some(InnerBoundary::Robin { gamma: 0.7 });
        for (region, inner) in [
            (Region::Full, None),
            (Region::Omega, robin),
            (Region::Obstacle, robin),
            (Region::Omega, Some(InnerBoundary::Dirichlet)),
        ] {
            let op = assemble(&grid, &phases, region, inner).unwrap();
            assert!(op.is_hermitian_bitwise(), "{region:?}");
            assert!(op.diagonal().iter().all(|d| d.is_finite()));
        }
    }

    #[test]
    fn zero_field_is_real_laplacian() {
        let grid = obstacle_grid(0.125);
        let phases = LinkPhases::compute(&grid, &FieldSpec::constant(0.0, 2));
        let op = assemble(&grid, &phases, Region::Full, None).unwrap();
        let inv_h2 = 64.0;
        for i in 0..op.dim() {
            for (j, v) in op.row(i) {
                assert_eq!(v.im, 0.0);
                if i == j {
                    assert_eq!(v.re, 4.0 * inv_h2);
                } else {
                    assert_eq!(v.re, -inv_h2);
                }
            }
        }
    }

    #[test]
    fn form_matches_direct_summation() {
        // 12×12 box with an obstacle, γ = 0.7.
        let spec = DomainSpec::free(2, 1.3, TruncationShape::Box).with_obstacle(Obstacle::Disk {
            center: vec![0.0, 0.0],
            radius: 0.45,
        });
        let grid = build_grid(&spec, 0.2).unwrap();
        assert_eq!(grid.len(), 144);
        let phases = LinkPhases::compute(&grid, &FieldSpec::radial_growth(1.0, 2.0, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let robin = Some(InnerBoundary::Robin { gamma: 0.7 });
        for (region, inner) in [(Region::Full, None), (Region::Omega, robin), (Region::Obstacle, robin)] {
            let op = assemble(&grid, &phases, region, inner).unwrap();
            for _ in 0..5 {
                let u = random_vec(op.dim(), &mut rng);
                let q = apply_form(&op, &u).unwrap();
                let oracle = form_oracle(&grid, &phases, region, inner, &op, &u);
                assert!((q - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "{region:?}: {q} vs {oracle}");
            }
        }
    }

    #[test]
    fn form_edge_cases() {
        let grid = obstacle_grid(0.25);
        let phases = LinkPhases::compute(&grid, &FieldSpec::constant(0.0, 2));
        let op = assemble(&grid, &phases, Region::Full, None).unwrap();
        let zero = vec![c(0.0, 0.0); op.dim()];
        assert_eq!(apply_form(&op, &zero).unwrap(), 0.0);
        let mut e = zero.clone();
        e[op.dim() / 2] = c(1.0, 0.0);
        let h = grid.h();
        assert!((apply_form(&op, &e).unwrap() - 4.0 / (h * h) * h * h).abs() < 1e-14);
        assert!(matches!(apply_form(&op, &zero[1..]), Err(AssemblyError::Dimension { .. })));
    }

    #[test]
    fn nonnegative_form_for_zero_gamma() {
        let grid = obstacle_grid(0.1);
        let phases = LinkPhases::compute(&grid, &FieldSpec::constant(1.0, 2));
        let op = assemble(&grid, &phases, Region::Omega, Some(InnerBoundary::Robin { gamma: 0.0 })).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let u = random_vec(op.dim(), &mut rng);
            assert!(apply_form(&op, &u).unwrap() >= 0.0);
        }
    }

    #[test]
    fn direct_sum_structure() {
        let grid = obstacle_grid(0.125);
        let phases = LinkPhases::compute(&grid, &FieldSpec::constant(1.0, 2));
        let robin = Some(InnerBoundary::Robin { gamma: 0.5 });
        let om = assemble(&grid, &phases, Region::Omega, robin).unwrap();
        let ob = assemble(&grid, &phases, Region::Obstacle, robin).unwrap();
        let full = assemble(&grid, &phases, Region::Full, None).unwrap();
        let ds = direct_sum(&om, &ob).unwrap();
        assert_eq!(ds.dim(), om.dim() + ob.dim());
        assert_eq!(ds.dim(), full.dim());
        assert_eq!(ds.region(), Region::DirectSum);
        assert!(ds.is_hermitian_bitwise());
        for i in 0..ds.dim() {
            for (j, _) in ds.row(i) {
                assert_eq!(grid.tag(i), grid.tag(j));
            }
        }
        assert!(direct_sum(&om, &om).is_err());
        assert!(direct_sum(&ob, &ob).is_err());
    }

    #[test]
    fn direct_sum_is_full_minus_cut_plus_robin() {
        // 16×16 grid.
        let spec = DomainSpec::free(2, 1.7, TruncationShape::Box).with_obstacle(Obstacle::Disk {
            center: vec![0.0, 0.0],
            radius: 0.6,
        });
        let grid = build_grid(&spec, 0.2).unwrap();
        assert_eq!(grid.len(), 256);
        let gamma = 0.5;
        let phases = LinkPhases::compute(&grid, &FieldSpec::constant(1.0, 2));
        let robin = Some(InnerBoundary::Robin { gamma });
        let full = assemble(&grid, &phases, Region::Full, None).unwrap();
        let ds = direct_sum(
            &assemble(&grid, &phases, Region::Omega, robin).unwrap(),
            &assemble(&grid, &phases, Region::Obstacle, robin).unwrap(),
        )
        .unwrap();
        let h = grid.h();
        let n = grid.len();
        let mut expected = full.to_dense();
        for f in grid.inner_faces() {
            let (i, j) = (f.node, f.neighbor.unwrap());
            // Remove the cut edge's whole form contribution, add the Robin faces.
            expected[i * n + j] = c(0.0, 0.0);
            expected[j * n + i] = c(0.0, 0.0);
            expected[i * n + i] += c(-1.0 / (h * h) + gamma / h, 0.0);
            expected[j * n + j] += c(-1.0 / (h * h) - gamma / h, 0.0);
        }
        let got = ds.to_dense();
        for k in 0..n * n {
            assert!((got[k] - expected[k]).norm() < 1e-12, "entry {k}");
        }
    }

    #[test]
    fn assembly_errors() {
        let grid = obstacle_grid(0.25);
        let phases = LinkPhases::compute(&grid, &FieldSpec::constant(1.0, 2));
        let robin = Some(InnerBoundary::Robin { gamma: 0.5 });
        assert_eq!(
            assemble(&grid, &phases, Region::Full, robin).unwrap_err(),
            AssemblyError::FullWithBoundary
        );
        assert!(matches!(
            assemble(&grid, &phases, Region::Omega, Some(InnerBoundary::Robin { gamma: f64::NAN })),
            Err(AssemblyError::NonFiniteGamma(_))
        ));
        assert_eq!(
            assemble(&grid, &phases, Region::Omega, None).unwrap_err(),
            AssemblyError::MissingBoundary(Region::Omega)
        );
        let other = build_grid(&DomainSpec::free(2, 1.25, TruncationShape::Box), 0.25).unwrap();
        assert_eq!(
            assemble(&other, &phases, Region::Full, None).unwrap_err(),
            AssemblyError::LatticeMismatch
        );
        let free = build_grid(&DomainSpec::free(2, 1.5, TruncationShape::Box), 0.3).unwrap();
        let ph = LinkPhases::compute(&free, &FieldSpec::constant(1.0, 2));
        assert_eq!(
            assemble(&free, &ph, Region::Obstacle, robin).unwrap_err(),
            AssemblyError::EmptyRegion(Region::Obstacle)
        );
    }

    #[test]
    fn coordinate_export() {
        let spec = DomainSpec::free(2, 1.0, TruncationShape::Box);
        let grid = build_grid(&spec, 0.5).unwrap();
        let phases = LinkPhases::compute(&grid, &FieldSpec::constant(1.0, 2));
        let op = assemble(&grid, &phases, Region::Full, None).unwrap();
        let mut buf = Vec::new();
        op.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "%%MatrixMarket-compatible coordinate complex hermitian");
        assert_eq!(lines.next().unwrap(), "9 9 21");
        let entries: Vec<_> = lines.collect();
        assert_eq!(entries.len(), 21);
        for line in entries {
            let f: Vec<&str> = line.split(' ').collect();
            let (i, j): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
            assert!(j <= i);
            let re: f64 = f[2].parse().unwrap();
            let im: f64 = f[3].parse().unwrap();
            assert_eq!(c(re, im), op.entry(i, j));
        }
    }
}
