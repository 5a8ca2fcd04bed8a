//! Banded `LDLᴴ` factorization of `H - σI` without pivoting.
//!
//! With lexicographic node ordering the magnetic Laplacian has half
//! bandwidth equal to one lattice row (2D) or slab (3D), so the factor fits
//! in `n (w + 1)` complex numbers. `D` is real; by Sylvester's law its
//! negative entries count the eigenvalues of `H` below `σ`.

use num_complex::Complex64;

use crate::assembly::HermitianOperator;

use super::vecops::ZERO;

#[derive(Debug, Clone, PartialEq)]
pub enum FactorError {
    /// Pivot `index` vanished to working precision; retry at a nearby shift.
    TinyPivot { index: usize, shift: f64 },
}

#[derive(Debug, Clone)]
pub struct BandLdl {
    n: usize,
    width: usize,
    shift: f64,
    /// Column-major band: `band[j (w+1) + k] = L[j+k, j]` for `1 ≤ k ≤ w`.
    band: Vec<Complex64>,
    pivots: Vec<f64>,
    negatives: usize,
}

impl BandLdl {
    pub fn bytes_for(n: usize, width: usize) -> usize {
        n * (width + 1) * std::mem::size_of::<Complex64>()
    }

    pub fn factor(op: &HermitianOperator, shift: f64) -> Result<Self, FactorError> {
        let n = op.dim();
        let w = op.bandwidth();
        let stride = w + 1;
        let mut band = vec![ZERO; n * stride];
        let mut scale = 0.0f64;
        for i in 0..n {
            for (j, v) in op.row(i) {
                if j <= i {
                    band[j * stride + (i - j)] = v;
                }
            }
            band[i * stride].re -= shift;
            band[i * stride].im = 0.0;
            scale = scale.max(band[i * stride].re.abs());
        }
        let tiny = scale.max(1.0) * 1e-13;

        let mut pivots = vec![0.0; n];
        let mut negatives = 0;
        let mut col = vec![ZERO; w];
        for j in 0..n {
            let d = band[j * stride].re;
            if d.abs() <= tiny || !d.is_finite() {
                return Err(FactorError::TinyPivot { index: j, shift });
            }
            pivots[j] = d;
            if d < 0.0 {
                negatives += 1;
            }
            let len = w.min(n - 1 - j);
            col[..len].copy_from_slice(&band[j * stride + 1..j * stride + 1 + len]);
            let inv_d = 1.0 / d;
            for kk in 0..len {
                let ck = col[kk].conj() * inv_d;
                let k = j + 1 + kk;
                let dst = &mut band[k * stride..k * stride + (len - kk)];
                for (a, l) in dst.iter_mut().zip(&col[kk..len]) {
                    *a -= l * ck;
                }
            }
            for v in &mut band[j * stride + 1..j * stride + 1 + len] {
                *v *= inv_d;
            }
        }
        Ok(BandLdl {
            n,
            width: w,
            shift,
            band,
            pivots,
            negatives,
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of eigenvalues of `H` strictly below the shift.
    pub fn negatives(&self) -> usize {
        self.negatives
    }

    /// `x ← (H - σI)⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let stride = self.width + 1;
        let n = self.n;
        for j in 0..n {
            let xj = x[j];
            let len = self.width.min(n - 1 - j);
            if xj != ZERO {
                let l = &self.band[j * stride + 1..j * stride + 1 + len];
                for (xi, lij) in x[j + 1..j + 1 + len].iter_mut().zip(l) {
                    *xi -= lij * xj;
                }
            }
        }
        for (xj, d) in x.iter_mut().zip(&self.pivots) {
            *xj /= *d;
        }
        for j in (0..n).rev() {
            let len = self.width.min(n - 1 - j);
            let l = &self.band[j * stride + 1..j * stride + 1 + len];
            let mut re = 0.0;
            let mut im = 0.0;
            for (lij, xi) in l.iter().zip(&x[j + 1..j + 1 + len]) {
                // conj(l) * x
                re += lij.re * xi.re + lij.im * xi.im;
                im += lij.re * xi.im - lij.im * xi.re;
            }
            x[j] -= Complex64::new(re, im);
        }
    }

    /// Each column of `x` (column-major, `m` columns) ← `(H - σI)⁻¹` applied
    /// to it. The band is streamed once for all columns.
    pub fn solve_columns(&self, x: &mut [Complex64], m: usize) {
        let n = self.n;
        let stride = self.width + 1;
        // Row-major copy: one band entry updates m contiguous values.
        let mut y = vec![ZERO; n * m];
        for c in 0..m {
            for i in 0..n {
                y[i * m + c] = x[c * n + i];
            }
        }
        for j in 0..n {
            let len = self.width.min(n - 1 - j);
            let l = &self.band[j * stride + 1..j * stride + 1 + len];
            let (head, tail) = y.split_at_mut((j + 1) * m);
            let yj = &head[j * m..];
            for (ii, lij) in l.iter().enumerate() {
                for (r, v) in tail[ii * m..(ii + 1) * m].iter_mut().zip(yj) {
                    *r -= lij * v;
                }
            }
        }
        for (i, d) in self.pivots.iter().enumerate() {
            let inv = 1.0 / d;
            for v in &mut y[i * m..(i + 1) * m] {
                *v *= inv;
            }
        }
        for j in (0..n).rev() {
            let len = self.width.min(n - 1 - j);
            let l = &self.band[j * stride + 1..j * stride + 1 + len];
            let (head, tail) = y.split_at_mut((j + 1) * m);
            let yj = &mut head[j * m..];
            for (ii, lij) in l.iter().enumerate() {
                let lc = lij.conj();
                for (a, r) in yj.iter_mut().zip(&tail[ii * m..(ii + 1) * m]) {
                    *a -= lc * r;
                }
            }
        }
        for c in 0..m {
            for i in 0..n {
                x[c * n + i] = y[i * m + c];
            }
        }
    }
}

/// Factor at `x`, nudging the shift away from a vanishing pivot.
pub fn factor_near(op: &HermitianOperator, x: f64) -> Result<BandLdl, FactorError> {
    let mut shift = x;
    let step = 1e-9 * x.abs().max(1.0);
    let mut last = None;
    for attempt in 0..6 {
        match BandLdl::factor(op, shift) {
            Ok(f) => return Ok(f),
            Err(e) => last = Some(e),
        }
        let k = (attempt + 1) as f64;
        shift = x + if attempt % 2 == 0 { k * step } else { -k * step };
    }
    Err(last.expect("at least one attempt"))
}
