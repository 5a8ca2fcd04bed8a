//! Lowest-k and window eigenvalue solvers with residual certificates.
//!
//! Small operators go through a dense Hermitian eigen decomposition. Large
//! ones use spectrum slicing: the eigenvalue count below any shift `x` is
//! read off the inertia of a banded `LDLᴴ` factor of `H - xI`, the window is
//! bisected until each slice holds a bounded number of eigenvalues, and each
//! slice is solved by block shift-invert Lanczos. A slice is accepted only
//! when the number of converged pairs equals its inertia count.
//!
//! Windows are half-open, `[a, b)`, matching the inertia count convention.

pub mod band;
pub(crate) mod dense;
mod lanczos;
mod minres;
pub(crate) mod vecops;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{HermitianOperator, OperatorMeta};

use band::{factor_near, BandLdl};
use lanczos::{Pairs, Slice};
use vecops::{Cols, Compensated};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    /// Full diagonalization.
    Exact,
    /// Pair count matched against `LDLᴴ` inertia.
    Inertia,
    Uncertified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverInfo {
    pub method: Method,
    pub iterations: usize,
    pub tolerance: f64,
    pub certification: Certification,
    pub slices: usize,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
    pub residuals: Vec<f64>,
    pub info: SolverInfo,
    pub meta: OperatorMeta,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn certified(&self) -> bool {
        self.info.certification != Certification::Uncertified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on `‖Hv − λv‖` for every reported unit eigenvector.
    pub tol: f64,
    /// Largest dimension handled by dense diagonalization under `Auto`.
    pub dense_max: usize,
    pub want_vectors: bool,
    pub seed: u64,
    pub method: MethodChoice,
    /// Target number of eigenvalues per slice.
    pub slice_max: usize,
    /// Memory budget for one banded factor; above it inner solves fall back
    /// to MINRES and windows become uncertified.
    pub band_memory_limit: usize,
    pub max_restarts: usize,
    pub basis_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            dense_max: 6000,
            want_vectors: false,
            seed: 0,
            method: MethodChoice::Auto,
            slice_max: 40,
            band_memory_limit: 1 << 31,
            max_restarts: 40,
            basis_cap: 400,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not converged: {reason} ({} pairs converged)", partial.eigenvalues.len())]
    NotConverged {
        reason: String,
        partial: Box<SpectrumResult>,
    },
    #[error("window holds {} eigenvalues, cap is {cap}", total.map_or("more".to_string(), |t| t.to_string()))]
    CapExceeded {
        cap: usize,
        total: Option<usize>,
        partial: Box<SpectrumResult>,
    },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("inner solver breakdown: {0}")]
    Breakdown(String),
    #[error("dense eigensolver failed: {0}")]
    Dense(String),
    #[error("zero vector has no residual")]
    ZeroVector,
}

impl SolveError {
    /// Partial results carried by a non-convergence or cap diagnostic.
    pub fn partial(&self) -> Option<&SpectrumResult> {
        match self {
            SolveError::NotConverged { partial, .. } | SolveError::CapExceeded { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

fn factor_error(e: band::FactorError) -> SolveError {
    SolveError::Factorization(format!("{e:?}"))
}

/// `‖Hv − λv‖ / ‖v‖` in one pass with compensated accumulation.
pub fn residual(op: &HermitianOperator, lambda: f64, v: &[Complex64]) -> Result<f64, SolveError> {
    if v.len() != op.dim() {
        return Err(SolveError::InvalidArgument(format!(
            "vector length {} does not match dimension {}",
            v.len(),
            op.dim()
        )));
    }
    let mut rr = Compensated::default();
    let mut vv = Compensated::default();
    for (i, vi) in v.iter().enumerate() {
        let mut re = Compensated::default();
        let mut im = Compensated::default();
        for (j, a) in op.row(i) {
            let p = a * v[j];
            re.add(p.re);
            im.add(p.im);
        }
        re.add(-lambda * vi.re);
        im.add(-lambda * vi.im);
        let (r, m) = (re.value(), im.value());
        rr.add(r * r + m * m);
        vv.add(vi.norm_sqr());
    }
    let vv = vv.value();
    if vv == 0.0 {
        return Err(SolveError::ZeroVector);
    }
    Ok((rr.value() / vv).sqrt())
}

fn check_tol(opts: &SolverOptions) -> Result<(), SolveError> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(SolveError::InvalidArgument("tol must be positive".into()));
    }
    Ok(())
}

fn use_dense(op: &HermitianOperator, opts: &SolverOptions) -> bool {
    match opts.method {
        MethodChoice::Dense => true,
        MethodChoice::Lanczos => false,
        MethodChoice::Auto => op.dim() <= opts.dense_max,
    }
}

fn band_feasible(op: &HermitianOperator, opts: &SolverOptions) -> bool {
    BandLdl::bytes_for(op.dim(), op.bandwidth()) <= opts.band_memory_limit
}

fn result(
    op: &HermitianOperator,
    pairs: Pairs,
    method: Method,
    certification: Certification,
    slices: usize,
    opts: &SolverOptions,
) -> SpectrumResult {
    SpectrumResult {
        eigenvalues: pairs.values,
        eigenvectors: opts.want_vectors.then_some(pairs.vectors),
        residuals: pairs.residuals,
        info: SolverInfo {
            method,
            iterations: pairs.iterations,
            tolerance: opts.tol,
            certification,
            slices,
        },
        meta: op.meta().clone(),
    }
}

fn dense_pairs(op: &HermitianOperator, keep: impl Fn(usize, f64) -> bool) -> Result<Pairs, SolveError> {
    let n = op.dim();
    let (values, vectors) = dense::hermitian_eigh(&op.to_dense(), n).map_err(SolveError::Dense)?;
    let mut out = Pairs {
        values: vec![],
        vectors: vec![],
        residuals: vec![],
        iterations: 0,
        converged: true,
    };
    for (i, (l, v)) in values.into_iter().zip(vectors).enumerate() {
        if keep(i, l) {
            out.residuals.push(residual(op, l, &v)?);
            out.values.push(l);
            out.vectors.push(v);
        }
    }
    Ok(out)
}

fn truncate(pairs: &mut Pairs, k: usize) {
    pairs.values.truncate(k);
    pairs.vectors.truncate(k);
    pairs.residuals.truncate(k);
}

/// The `k` smallest eigenvalues.
pub fn eigs_lowest(op: &HermitianOperator, k: usize, opts: &SolverOptions) -> Result<SpectrumResult, SolveError> {
    check_tol(opts)?;
    let n = op.dim();
    if k == 0 || k > n {
        return Err(SolveError::InvalidArgument(format!("k = {k} must lie in 1..={n}")));
    }
    if use_dense(op, opts) {
        let pairs = dense_pairs(op, |i, _| i < k)?;
        return Ok(result(op, pairs, Method::Dense, Certification::Exact, 0, opts));
    }
    if !band_feasible(op, opts) {
        let pairs = lanczos::plain_lowest(op, k, opts.tol, opts.max_restarts * 5, opts.seed).map_err(SolveError::Breakdown)?;
        let converged = pairs.converged;
        let res = result(op, pairs, Method::Lanczos, Certification::Uncertified, 0, opts);
        return if converged {
            Ok(res)
        } else {
            Err(SolveError::NotConverged {
                reason: "restart cap reached".into(),
                partial: Box::new(res),
            })
        };
    }

    // Bracket the k lowest: nothing lies below the Gershgorin bound, and
    // the k-th Ritz value of a short Krylov run bounds λ_k from above.
    let g_lo = op.gershgorin_lower();
    let g_hi = op.gershgorin_upper();
    let span = (g_hi - g_lo).max(1.0);
    let a = g_lo - 1e-3 * span;
    let fa = factor_near(op, a).map_err(factor_error)?;
    let steps = (2 * k + 40).max(60);
    let mut b = lanczos::ritz_upper_bound(op, k, steps, opts.seed).map_err(SolveError::Dense)? + 1e-6 * span;
    let mut fb = factor_near(op, b).map_err(factor_error)?;
    while fb.negatives() < k {
        b = if b >= g_hi { b + span } else { (b + 0.25 * span).min(g_hi + 1e-3 * span) };
        fb = factor_near(op, b).map_err(factor_error)?;
    }
    let slack = (k / 2).max(8);
    let mut below = (fa.shift(), fa.negatives());
    let mut above = (fb.shift(), fb.negatives());
    drop(fb);
    for _ in 0..60 {
        if above.1 <= k + slack || above.0 - below.0 <= 1e-12 * span {
            break;
        }
        let f = factor_near(op, 0.5 * (below.0 + above.0)).map_err(factor_error)?;
        if f.negatives() >= k {
            above = (f.shift(), f.negatives());
        } else {
            below = (f.shift(), f.negatives());
        }
    }
    let window = sliced(op, (fa.shift(), fa.negatives()), above, opts)?;
    let mut pairs = window.pairs;
    truncate(&mut pairs, k);
    let res = result(op, pairs, Method::Lanczos, Certification::Inertia, window.slices, opts);
    if window.complete && res.len() == k {
        Ok(res)
    } else {
        Err(SolveError::NotConverged {
            reason: "slice pair counts did not match inertia".into(),
            partial: Box::new(uncertify(res)),
        })
    }
}

fn uncertify(mut r: SpectrumResult) -> SpectrumResult {
    r.info.certification = Certification::Uncertified;
    r
}

/// All eigenvalues in `[a, b)`, at most `cap` of them.
pub fn eigs_window(
    op: &HermitianOperator,
    a: f64,
    b: f64,
    cap: usize,
    opts: &SolverOptions,
) -> Result<SpectrumResult, SolveError> {
    check_tol(opts)?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(SolveError::InvalidArgument(format!("window [{a}, {b}) is empty or not finite")));
    }
    if cap == 0 {
        return Err(SolveError::InvalidArgument("cap must be at least 1".into()));
    }
    if use_dense(op, opts) {
        let mut pairs = dense_pairs(op, |_, l| l >= a && l < b)?;
        let total = pairs.values.len();
        if total > cap {
            truncate(&mut pairs, cap);
            return Err(SolveError::CapExceeded {
                cap,
                total: Some(total),
                partial: Box::new(result(op, pairs, Method::Dense, Certification::Exact, 0, opts)),
            });
        }
        return Ok(result(op, pairs, Method::Dense, Certification::Exact, 0, opts));
    }
    if !band_feasible(op, opts) {
        return window_uncertified(op, a, b, cap, opts);
    }

    let fa = factor_near(op, a).map_err(factor_error)?;
    let fb = factor_near(op, b).map_err(factor_error)?;
    let lo = (fa.shift(), fa.negatives());
    let mut hi = (fb.shift(), fb.negatives());
    drop((fa, fb));
    let total = hi.1.saturating_sub(lo.1);
    let capped = total > cap;
    if capped {
        // Largest sub-window [a, b') holding at most `cap` eigenvalues.
        let mut inner = lo;
        for _ in 0..60 {
            if hi.1 - lo.1 <= cap {
                break;
            }
            let f = factor_near(op, 0.5 * (inner.0 + hi.0)).map_err(factor_error)?;
            let m = (f.shift(), f.negatives());
            if m.1 - lo.1 <= cap {
                inner = m;
            } else {
                hi = m;
            }
            if hi.0 - inner.0 <= 1e-12 * (hi.0.abs() + 1.0) {
                break;
            }
        }
        hi = inner;
    }
    let window = sliced(op, lo, hi, opts)?;
    let res = result(op, window.pairs, Method::Lanczos, Certification::Inertia, window.slices, opts);
    if capped {
        return Err(SolveError::CapExceeded {
            cap,
            total: Some(total),
            partial: Box::new(res),
        });
    }
    if window.complete {
        Ok(res)
    } else {
        Err(SolveError::NotConverged {
            reason: "slice pair counts did not match inertia".into(),
            partial: Box::new(uncertify(res)),
        })
    }
}

fn window_uncertified(
    op: &HermitianOperator,
    a: f64,
    b: f64,
    cap: usize,
    opts: &SolverOptions,
) -> Result<SpectrumResult, SolveError> {
    let sigma = 0.5 * (a + b);
    let inner_tol = opts.tol / 10.0 / (op.gershgorin_upper() - op.gershgorin_lower()).max(1.0);
    let max_iter = 20 * op.dim();
    let solve = |x: &mut Cols| -> Result<(), String> {
        for c in 0..x.len() {
            let (y, out) = minres::minres(op, sigma, x.col(c), inner_tol, max_iter);
            if out.relative_residual > 10.0 * inner_tol {
                return Err(format!(
                    "MINRES stalled at relative residual {:.3e} after {} iterations",
                    out.relative_residual, out.iterations
                ));
            }
            x.col_mut(c).copy_from_slice(&y);
        }
        Ok(())
    };
    let slice = Slice {
        lo: a,
        hi: b,
        sigma,
        count: None,
    };
    let mut pairs =
        lanczos::shift_invert_slice(op, solve, slice, opts.tol, 1, opts.basis_cap, opts.seed).map_err(SolveError::Breakdown)?;
    let found = pairs.values.len();
    if found > cap {
        truncate(&mut pairs, cap);
        return Err(SolveError::CapExceeded {
            cap,
            total: None,
            partial: Box::new(result(op, pairs, Method::Lanczos, Certification::Uncertified, 1, opts)),
        });
    }
    Ok(result(op, pairs, Method::Lanczos, Certification::Uncertified, 1, opts))
}

struct Sliced {
    pairs: Pairs,
    slices: usize,
    complete: bool,
}

/// Split `[lo, hi)` (given with inertia counts) into slices of bounded
/// population.
fn plan_slices(
    op: &HermitianOperator,
    lo: (f64, usize),
    hi: (f64, usize),
    slice_max: usize,
    known: &mut Vec<(f64, usize)>,
    out: &mut Vec<Slice>,
) -> Result<(), SolveError> {
    let count = hi.1.saturating_sub(lo.1);
    if count == 0 {
        return Ok(());
    }
    let whole = Slice {
        lo: lo.0,
        hi: hi.0,
        sigma: 0.5 * (lo.0 + hi.0),
        count: Some(count),
    };
    // A cluster tighter than this is solved as one slice whatever its size.
    let narrow = hi.0 - lo.0 <= 1e-6 * (lo.0.abs().max(hi.0.abs()).max(1.0));
    if count <= slice_max || narrow {
        out.push(whole);
        return Ok(());
    }
    let mid = split_point(op, lo, hi, known)?;
    if !(mid.0 > lo.0 && mid.0 < hi.0) || mid.1 < lo.1 || mid.1 > hi.1 {
        out.push(whole);
        return Ok(());
    }
    plan_slices(op, lo, mid, slice_max, known, out)?;
    plan_slices(op, mid, hi, slice_max, known, out)
}

/// Split point for `[lo, hi)`: cut in the sparsest interval between known
/// inertia points whose cumulative count is near the median, so slice edges
/// avoid eigenvalue clusters. Probes are added until the interval holds at
/// least `PROBES` interior points; all of them are cached in `known`.
fn split_point(
    op: &HermitianOperator,
    lo: (f64, usize),
    hi: (f64, usize),
    known: &mut Vec<(f64, usize)>,
) -> Result<(f64, usize), SolveError> {
    const PROBES: usize = 5;
    let interior = |known: &Vec<(f64, usize)>| -> Vec<(f64, usize)> {
        known.iter().copied().filter(|p| p.0 > lo.0 && p.0 < hi.0).collect()
    };
    if interior(known).len() < PROBES {
        for i in 1..=PROBES {
            let x = lo.0 + (hi.0 - lo.0) * i as f64 / (PROBES + 1) as f64;
            let gap = (hi.0 - lo.0) / (2 * (PROBES + 1)) as f64;
            if known.iter().all(|p| (p.0 - x).abs() > gap) {
                known.push(probe(op, x)?);
            }
        }
    }
    let mut pts = vec![lo];
    pts.extend(interior(known));
    pts.push(hi);
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = (hi.1 - lo.1) as f64;
    let mut best: Option<f64> = None;
    let mut best_score = f64::INFINITY;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let centre = 0.5 * (a.1 + b.1) as f64 - lo.1 as f64;
        let balance = (centre / total - 0.5).abs();
        if balance > 0.3 {
            continue;
        }
        let density = (b.1 - a.1) as f64 / total;
        let score = density + 0.5 * balance;
        if score < best_score {
            best_score = score;
            best = Some(0.5 * (a.0 + b.0));
        }
    }
    let mid = probe(op, best.unwrap_or(0.5 * (lo.0 + hi.0)))?;
    known.push(mid);
    Ok(mid)
}

/// Actual shift used and the eigenvalue count below it.
fn probe(op: &HermitianOperator, x: f64) -> Result<(f64, usize), SolveError> {
    let f = factor_near(op, x).map_err(factor_error)?;
    Ok((f.shift(), f.negatives()))
}

fn solve_slice(op: &HermitianOperator, s: Slice, opts: &SolverOptions, seed: u64) -> Result<Pairs, SolveError> {
    let f = factor_near(op, s.sigma).map_err(factor_error)?;
    let s = Slice { sigma: f.shift(), ..s };
    let solve = |x: &mut Cols| -> Result<(), String> {
        let m = x.len();
        f.solve_columns(x.data_mut(), m);
        Ok(())
    };
    lanczos::shift_invert_slice(op, solve, s, opts.tol, opts.max_restarts, opts.basis_cap, seed).map_err(SolveError::Breakdown)
}

fn sliced(op: &HermitianOperator, lo: (f64, usize), hi: (f64, usize), opts: &SolverOptions) -> Result<Sliced, SolveError> {
    let mut slices = Vec::new();
    plan_slices(op, lo, hi, opts.slice_max.max(1), &mut Vec::new(), &mut slices)?;
    let seed_of = |i: usize| opts.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let indexed: Vec<(usize, Slice)> = slices.iter().copied().enumerate().collect();
    let solved = crate::exec::map(&indexed, |&(i, s)| solve_slice(op, s, opts, seed_of(i)));

    // (first slice, last slice, pairs); consecutive parts tile the window.
    let mut parts = Vec::with_capacity(slices.len());
    for (i, p) in solved.into_iter().enumerate() {
        parts.push((i, i, p?));
    }
    // A cluster straddling a slice edge can stall the slice that holds only
    // its tail. Solving the union with the neighbours puts the whole
    // cluster inside one slice; each failure gets one such retry.
    let mut k = 0;
    while k < parts.len() {
        let (a, b) = (k.saturating_sub(1), (k + 1).min(parts.len() - 1));
        if parts[k].2.converged || a == b {
            k += 1;
            continue;
        }
        let (first, last) = (parts[a].0, parts[b].1);
        let count = slices[first..=last].iter().map(|s| s.count.unwrap_or(0)).sum();
        let (lo, hi) = (slices[first].lo, slices[last].hi);
        let merged = Slice {
            lo,
            hi,
            sigma: 0.5 * (lo + hi),
            count: Some(count),
        };
        let p = solve_slice(op, merged, opts, seed_of(slices.len() + first))?;
        if p.converged {
            parts.splice(a..=b, [(first, last, p)]);
            k = a + 1;
        } else {
            k += 1;
        }
    }

    let mut values = Vec::new();
    let mut vectors = Vec::new();
    let mut residuals = Vec::new();
    let mut origin = Vec::new();
    let mut iterations = 0;
    let mut complete = true;
    for (i, (_, _, p)) in parts.into_iter().enumerate() {
        complete &= p.converged;
        iterations += p.iterations;
        origin.extend(std::iter::repeat_n(i, p.values.len()));
        values.extend(p.values);
        vectors.extend(p.vectors);
        residuals.extend(p.residuals);
    }
    let mut pairs = Pairs {
        values,
        vectors,
        residuals,
        iterations,
        converged: complete,
    };
    repair_slice_seams(op, &mut pairs, &origin, opts.tol)?;
    Ok(Sliced {
        pairs,
        slices: slices.len(),
        complete,
    })
}

/// Pairs from different slices are orthogonal only up to `residual / gap`;
/// near-degenerate runs straddling a slice boundary are re-orthogonalized
/// and rotated jointly.
fn repair_slice_seams(op: &HermitianOperator, pairs: &mut Pairs, origin: &[usize], tol: f64) -> Result<(), SolveError> {
    let n = pairs.values.len();
    if n < 2 {
        return Ok(());
    }
    let close = |a: f64, b: f64| (b - a).abs() <= (1e3 * tol).max(1e-8 * a.abs().max(1.0));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && close(pairs.values[end - 1], pairs.values[end]) {
            end += 1;
        }
        if end - start > 1 && origin[start] != origin[end - 1] {
            let group: Vec<Vec<Complex64>> = pairs.vectors[start..end].to_vec();
            let fixed = lanczos::polish_vectors(op, &group).map_err(SolveError::Dense)?;
            if fixed.values.len() == end - start {
                pairs.values[start..end].copy_from_slice(&fixed.values);
                pairs.residuals[start..end].copy_from_slice(&fixed.residuals);
                for (dst, src) in pairs.vectors[start..end].iter_mut().zip(fixed.vectors) {
                    *dst = src;
                }
            }
        }
        start = end;
    }
    Ok(())
}

/// Number of eigenvalues strictly below `x` (nudged off an exact pivot
/// breakdown if necessary).
pub fn count_below(op: &HermitianOperator, x: f64) -> Result<usize, SolveError> {
    Ok(factor_near(op, x).map_err(factor_error)?.negatives())
}
