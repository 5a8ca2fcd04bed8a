use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatMut, MatRef, Par};
use num_complex::Complex64;
use rand::Rng;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `a^H b`.
#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

#[inline]
pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha x`.
#[inline]
pub(crate) fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scale(alpha: f64, x: &mut [Complex64]) {
    for v in x.iter_mut() {
        *v *= alpha;
    }
}

pub(crate) fn random_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Neumaier-compensated accumulator.
#[derive(Default, Clone, Copy)]
pub(crate) struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Column-major block of vectors of common length `n`, contiguous so that
/// projections run as matrix products.
#[derive(Debug, Clone, Default)]
pub(crate) struct Cols {
    n: usize,
    data: Vec<Complex64>,
}

impl Cols {
    pub(crate) fn new(n: usize) -> Self {
        Cols { n, data: Vec::new() }
    }

    pub(crate) fn zeros(n: usize, m: usize) -> Self {
        Cols {
            n,
            data: vec![ZERO; n * m],
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    pub(crate) fn len(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.data.len() / self.n
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn col(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn col_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn push(&mut self, v: &[Complex64]) {
        debug_assert_eq!(v.len(), self.n);
        self.data.extend_from_slice(v);
    }

    pub(crate) fn extend(&mut self, other: &Cols) {
        self.data.extend_from_slice(&other.data);
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub(crate) fn range(&self, a: usize, b: usize) -> MatRef<'_, c64> {
        MatRef::from_column_major_slice(&self.data[a * self.n..b * self.n], self.n, b - a)
    }

    pub(crate) fn mat(&self) -> MatRef<'_, c64> {
        self.range(0, self.len())
    }

    pub(crate) fn mat_mut(&mut self) -> MatMut<'_, c64> {
        let m = self.len();
        MatMut::from_column_major_slice_mut(&mut self.data, self.n, m)
    }

    /// `self[:, a..b] · coef`, with `coef` column-major `(b-a) × m`.
    pub(crate) fn combine(&self, a: usize, b: usize, coef: &[Complex64], m: usize) -> Cols {
        let mut out = Cols::zeros(self.n, m);
        if b > a && m > 0 {
            let c = MatRef::from_column_major_slice(coef, b - a, m);
            matmul(out.mat_mut(), Accum::Replace, self.range(a, b), c, c64::new(1.0, 0.0), Par::Seq);
        }
        out
    }
}

/// Two passes of block classical Gram-Schmidt of `w` against the
/// orthonormal columns of `basis`; returns the summed coefficients
/// `basis^H w`, column-major `basis.len() × w.len()`.
pub(crate) fn project_out(basis: &Cols, w: &mut Cols) -> Vec<Complex64> {
    let (k, m) = (basis.len(), w.len());
    let mut total = vec![ZERO; k * m];
    if k == 0 || m == 0 {
        return total;
    }
    for _ in 0..2 {
        let mut c = Mat::<c64>::zeros(k, m);
        matmul(c.as_mut(), Accum::Replace, basis.mat().adjoint(), w.mat(), c64::new(1.0, 0.0), Par::Seq);
        matmul(w.mat_mut(), Accum::Add, basis.mat(), c.as_ref(), c64::new(-1.0, 0.0), Par::Seq);
        for j in 0..m {
            for i in 0..k {
                total[j * k + i] += c[(i, j)];
            }
        }
    }
    total
}

/// `a^H b`, column-major `a.len() × b.len()`.
pub(crate) fn adjoint_product(a: &Cols, b: &Cols) -> Vec<Complex64> {
    let (k, m) = (a.len(), b.len());
    let mut out = vec![ZERO; k * m];
    if k > 0 && m > 0 {
        let dst = MatMut::from_column_major_slice_mut(&mut out, k, m);
        matmul(dst, Accum::Replace, a.mat().adjoint(), b.mat(), c64::new(1.0, 0.0), Par::Seq);
    }
    out
}
