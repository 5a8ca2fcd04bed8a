//! Magnetic field models, their vector potentials and Peierls link phases.
//!
//! All fields point along the third axis and depend on the in-plane radius
//! `ρ = |(x₁, x₂)|` (in 2D that is `|x|`). The potential is always of the
//! form `A = g(ρ) (-x₂, x₁, 0)` with `2g + ρ g' = B`. For a constant field
//! this is the symmetric gauge `g = b/2`; for radial fields it is the
//! Poincaré gauge `g(ρ) = ρ⁻² ∫₀^ρ t B(t) dt`.
//!
//! Sign convention: the scalar strength `B` is the flux per unit area through
//! a positively oriented `(x₁, x₂)` plaquette, `B = ∂₁a₂ - ∂₂a₁`, so that the
//! strength matrix `b_{k,j} = ∂_j a_k - ∂_k a_j` has `b_{1,2} = -B`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::MaskedGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("field parameter {0} is invalid")]
    Parameter(&'static str),
    #[error("gauge function has {got} entries, grid has {expected} nodes")]
    GaugeLength { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Constant { b: f64 },
    /// `b0 (1 + ρ²)^(-p/2)`.
    RadialDecay { b0: f64, power: f64 },
    /// `b0 (1 + ρ²)^(p/2)`.
    RadialGrowth { b0: f64, power: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub dimension: usize,
}

impl FieldSpec {
    pub fn constant(b: f64, dimension: usize) -> Self {
        FieldSpec {
            kind: FieldKind::Constant { b },
            dimension,
        }
    }

    pub fn radial_decay(b0: f64, power: f64, dimension: usize) -> Self {
        FieldSpec {
            kind: FieldKind::RadialDecay { b0, power },
            dimension,
        }
    }

    pub fn radial_growth(b0: f64, power: f64, dimension: usize) -> Self {
        FieldSpec {
            kind: FieldKind::RadialGrowth { b0, power },
            dimension,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.dimension != 2 && self.dimension != 3 {
            return Err(FieldError::Dimension(self.dimension));
        }
        match self.kind {
            FieldKind::Constant { b } => {
                if !b.is_finite() {
                    return Err(FieldError::Parameter("b"));
                }
            }
            FieldKind::RadialDecay { b0, power } | FieldKind::RadialGrowth { b0, power } => {
                if !(b0 >= 0.0 && b0.is_finite()) {
                    return Err(FieldError::Parameter("b0"));
                }
                if !(power > 0.0 && power.is_finite()) {
                    return Err(FieldError::Parameter("power"));
                }
            }
        }
        Ok(())
    }

    /// Scalar field strength `B(x)`.
    pub fn strength(&self, x: &[f64]) -> f64 {
        let rho2 = x[0] * x[0] + x[1] * x[1];
        match self.kind {
            FieldKind::Constant { b } => b,
            FieldKind::RadialDecay { b0, power } => b0 * (1.0 + rho2).powf(-power / 2.0),
            FieldKind::RadialGrowth { b0, power } => b0 * (1.0 + rho2).powf(power / 2.0),
        }
    }

    /// Limit of `|B(x)|` as `|x| → ∞`, or `None` when it diverges.
    pub fn strength_at_infinity(&self) -> Option<f64> {
        match self.kind {
            FieldKind::Constant { b } => Some(b.abs()),
            FieldKind::RadialDecay { .. } => Some(0.0),
            FieldKind::RadialGrowth { b0, .. } if b0 == 0.0 => Some(0.0),
            FieldKind::RadialGrowth { .. } => None,
        }
    }

    /// `g(ρ)` in `A = g(ρ)(-x₂, x₁)`.
    fn gauge_factor(&self, rho2: f64) -> f64 {
        // ∫₀^ρ t (1+t²)^e dt = ((1+ρ²)^(e+1) - 1) / (2(e+1)); expm1/ln1p keep
        // the small-ρ limit g → b0/2 accurate.
        let poincare = |b0: f64, e: f64| {
            if rho2 == 0.0 {
                return b0 / 2.0;
            }
            let a = e + 1.0;
            let l = rho2.ln_1p();
            let integral = if a.abs() < 1e-14 {
                l / 2.0
            } else {
                (a * l).exp_m1() / (2.0 * a)
            };
            b0 * integral / rho2
        };
        match self.kind {
            FieldKind::Constant { b } => b / 2.0,
            FieldKind::RadialDecay { b0, power } => poincare(b0, -power / 2.0),
            FieldKind::RadialGrowth { b0, power } => poincare(b0, power / 2.0),
        }
    }
}

/// Vector potential `A(x)`; unused trailing components are zero.
pub fn vector_potential(field: &FieldSpec, x: &[f64]) -> [f64; 3] {
    let g = field.gauge_factor(x[0] * x[0] + x[1] * x[1]);
    [-g * x[1], g * x[0], 0.0]
}

/// Field-strength matrix `b_{k,j}(x) = ∂_j a_k - ∂_k a_j`; entries beyond
/// `field.dimension` are zero.
pub fn field_matrix(field: &FieldSpec, x: &[f64]) -> [[f64; 3]; 3] {
    let b = field.strength(x);
    let mut m = [[0.0; 3]; 3];
    m[0][1] = -b;
    m[1][0] = b;
    m
}

const GAUSS4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_2,
    0.652_145_154_862_546_2,
    0.347_854_845_137_453_8,
];

/// Phase `θ = ∫ A·dl` along the edge from `start` to `start + h e_axis`.
pub fn link_phase(field: &FieldSpec, start: &[f64], axis: usize, h: f64) -> f64 {
    if axis >= 2 {
        return 0.0;
    }
    let mut p = [0.0; 3];
    p[..start.len().min(3)].copy_from_slice(&start[..start.len().min(3)]);
    if let FieldKind::Constant { .. } = field.kind {
        // Linear integrand: the midpoint rule is exact.
        p[axis] += h / 2.0;
        return vector_potential(field, &p)[axis] * h;
    }
    let mid = p[axis] + h / 2.0;
    let mut acc = 0.0;
    for (t, w) in GAUSS4_NODES.iter().zip(GAUSS4_WEIGHTS) {
        p[axis] = mid + t * h / 2.0;
        acc += w * vector_potential(field, &p)[axis];
    }
    acc * h / 2.0
}

/// Phases of all forward edges `node → node + e_axis` of a grid. Edges whose
/// far end lies outside the truncation region are stored too but never used.
#[derive(Debug, Clone)]
pub struct LinkPhases {
    dimension: usize,
    len: usize,
    h: f64,
    theta: Vec<f64>,
}

impl LinkPhases {
    pub fn compute(grid: &MaskedGrid, field: &FieldSpec) -> Self {
        let d = grid.dimension();
        let mut theta = vec![0.0; grid.len() * d];
        crate::exec::fill(&mut theta, |k| {
            let (node, axis) = (k / d, k % d);
            link_phase(field, &grid.position(node)[..d], axis, grid.h())
        });
        LinkPhases {
            dimension: d,
            len: grid.len(),
            h: grid.h(),
            theta,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Phase of the forward edge leaving `node` along `axis`.
    pub fn forward(&self, node: usize, axis: usize) -> f64 {
        self.theta[node * self.dimension + axis]
    }

    /// Phase of the oriented edge `node → neighbour(node, axis, direction)`.
    pub fn oriented(&self, grid: &MaskedGrid, node: usize, axis: usize, direction: i8) -> Option<f64> {
        let j = grid.neighbor(node, axis, direction)?;
        Some(if direction > 0 {
            self.forward(node, axis)
        } else {
            -self.forward(j, axis)
        })
    }

    /// Apply the discrete gauge transform `θ_{i→j} += χ_j - χ_i` on every
    /// edge inside the grid.
    pub fn with_gauge(&self, grid: &MaskedGrid, chi: &[f64]) -> Result<LinkPhases, FieldError> {
        if chi.len() != grid.len() {
            return Err(FieldError::GaugeLength {
                got: chi.len(),
                expected: grid.len(),
            });
        }
        let mut out = self.clone();
        for node in 0..grid.len() {
            for axis in 0..self.dimension {
                if let Some(j) = grid.neighbor(node, axis, 1) {
                    out.theta[node * self.dimension + axis] += chi[j] - chi[node];
                }
            }
        }
        Ok(out)
    }

    /// Circulation around the positively oriented plaquette spanned by
    /// `axes` at `node`, or `None` if a corner is missing.
    pub fn plaquette_sum(&self, grid: &MaskedGrid, node: usize, axes: (usize, usize)) -> Option<f64> {
        let (a, b) = axes;
        let right = grid.neighbor(node, a, 1)?;
        let up = grid.neighbor(node, b, 1)?;
        grid.neighbor(right, b, 1)?;
        Some(self.forward(node, a) + self.forward(right, b) - self.forward(up, a) - self.forward(node, b))
    }
}
