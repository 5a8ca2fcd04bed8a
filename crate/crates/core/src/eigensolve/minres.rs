//! MINRES for `(H - σI) x = b` with `H` Hermitian and `σ` real, so the
//! shifted system may be indefinite. Used for shift-invert when a banded
//! factor would not fit in memory.

use num_complex::Complex64;

use crate::assembly::HermitianOperator;

use super::vecops::{axpy, dot, norm, ZERO};

pub(crate) struct MinresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub(crate) fn minres(
    op: &HermitianOperator,
    sigma: f64,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> (Vec<Complex64>, MinresOutcome) {
    let n = b.len();
    let mut x = vec![ZERO; n];
    let beta1 = norm(b);
    if beta1 == 0.0 {
        return (
            x,
            MinresOutcome {
                iterations: 0,
                relative_residual: 0.0,
            },
        );
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut w = vec![ZERO; n];
    let mut w1;
    let mut w2 = vec![ZERO; n];
    let mut v = vec![ZERO; n];

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut rnorm = beta1;
    let mut it = 0;

    while it < max_iter {
        it += 1;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = yi * s;
        }
        op.matvec(&v, &mut y);
        axpy(Complex64::new(-sigma, 0.0), &v, &mut y);
        if it >= 2 {
            axpy(Complex64::new(-beta / oldb, 0.0), &r1, &mut y);
        }
        let alfa = dot(&v, &y).re;
        axpy(Complex64::new(-alfa / beta, 0.0), &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm(&r2);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        w1 = std::mem::take(&mut w2);
        w2 = std::mem::take(&mut w);
        w = v
            .iter()
            .zip(&w1)
            .zip(&w2)
            .map(|((vi, a), b)| (vi - a * oldeps - b * delta) / gamma)
            .collect();
        axpy(Complex64::new(phi, 0.0), &w, &mut x);

        rnorm = phibar;
        if rnorm <= tol * beta1 || beta == 0.0 {
            break;
        }
    }
    (
        x,
        MinresOutcome {
            iterations: it,
            relative_residual: rnorm / beta1,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, Region};
    use crate::field::{FieldSpec, LinkPhases};
    use crate::geometry::{build_grid, DomainSpec, TruncationShape};

    #[test]
    fn solves_indefinite_shifted_system() {
        let grid = build_grid(&DomainSpec::free(2, 1.5, TruncationShape::Box), 0.25).unwrap();
        let phases = LinkPhases::compute(&grid, &FieldSpec::constant(1.0, 2));
        let op = assemble(&grid, &phases, Region::Full, None).unwrap();
        let n = op.dim();
        let x0: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0, i as f64 * 0.1)).collect();
        let sigma = 20.3;
        let mut b = op.apply(&x0);
        axpy(Complex64::new(-sigma, 0.0), &x0, &mut b);
        let (x, out) = minres(&op, sigma, &b, 1e-12, 10 * n);
        assert!(out.relative_residual < 1e-10);
        let err: f64 = x.iter().zip(&x0).map(|(a, c)| (a - c).norm()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }
}
