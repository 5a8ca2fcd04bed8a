//! Krylov eigensolvers with full reorthogonalization.
//!
//! `plain_lowest` runs single-vector Lanczos on `H` itself with explicit
//! restarts and locking. `shift_invert_slice` runs block Lanczos on
//! `(H - σI)⁻¹` for one spectral slice; the block size follows the number of
//! missing eigenvalues so that near-degenerate Landau clusters are resolved
//! without relying on rounding to break symmetry.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::HermitianOperator;

use super::dense;
use super::vecops::{adjoint_product, axpy, dot, norm, project_out, random_vector, scale, Cols, ZERO};

/// Ritz pairs whose residual estimate is within this factor of the strict
/// screen are verified directly.
const LOOSE: f64 = 1e3;

pub(crate) struct Pairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Rayleigh quotient and residual norm of a unit vector.
pub(crate) fn rayleigh(op: &HermitianOperator, y: &[Complex64]) -> (f64, f64) {
    let hy = op.apply(y);
    let lambda = dot(y, &hy).re;
    let r: f64 = hy
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (lambda, r)
}

/// Orthonormalize the columns of `w` against `basis`, `extra` and each
/// other, appending the survivors to `basis`; numerically dependent columns
/// are dropped. Returns, per input column, its coefficients on the old
/// basis, then on the survivors accepted before it, then its own norm when
/// it survives.
fn extend_orthonormal(basis: &mut Cols, extra: &Cols, mut w: Cols) -> Vec<Vec<Complex64>> {
    let k = basis.len();
    let m = w.len();
    let before: Vec<f64> = (0..m).map(|j| norm(w.col(j))).collect();
    let coef = project_out(basis, &mut w);
    project_out(extra, &mut w);
    let mut accepted = Cols::new(basis.dim());
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let mut col = coef[j * k..(j + 1) * k].to_vec();
        let v = w.col_mut(j);
        let mut local = vec![ZERO; accepted.len()];
        for _ in 0..2 {
            for (i, c) in local.iter_mut().enumerate() {
                let d = dot(accepted.col(i), v);
                axpy(-d, accepted.col(i), v);
                *c += d;
            }
        }
        col.extend(local);
        let nv = norm(v);
        if before[j] > 0.0 && nv > 1e-10 * before[j] {
            scale(1.0 / nv, v);
            accepted.push(v);
            col.push(Complex64::new(nv, 0.0));
        }
        out.push(col);
    }
    basis.extend(&accepted);
    out
}

fn single(v: &[Complex64]) -> Cols {
    let mut c = Cols::new(v.len());
    c.push(v);
    c
}

/// Rayleigh-Ritz on `span(vectors)`: orthonormalize, project, rotate.
/// Returns ascending values, vectors and true residual norms.
pub(crate) fn polish(op: &HermitianOperator, vectors: &Cols) -> Result<Pairs, String> {
    let n = op.dim();
    let none = Cols::new(n);
    let mut basis = Cols::new(n);
    for a in (0..vectors.len()).step_by(32) {
        let b = (a + 32).min(vectors.len());
        let mut chunk = Cols::new(n);
        for c in a..b {
            chunk.push(vectors.col(c));
        }
        extend_orthonormal(&mut basis, &none, chunk);
    }
    let m = basis.len();
    let mut hq = Cols::new(n);
    for i in 0..m {
        hq.push(&op.apply(basis.col(i)));
    }
    let (_, s) = dense::small_hermitian(&adjoint_product(&basis, &hq), m)?;
    let y = basis.combine(0, m, &s, m);
    let mut values = Vec::with_capacity(m);
    let mut out = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    for j in 0..m {
        let (lambda, r) = rayleigh(op, y.col(j));
        values.push(lambda);
        residuals.push(r);
        out.push(y.col(j).to_vec());
    }
    sort_pairs(&mut values, &mut out, &mut residuals);
    Ok(Pairs {
        values,
        vectors: out,
        residuals,
        iterations: 0,
        converged: true,
    })
}

pub(crate) fn polish_vectors(op: &HermitianOperator, vectors: &[Vec<Complex64>]) -> Result<Pairs, String> {
    let mut c = Cols::new(op.dim());
    for v in vectors {
        c.push(v);
    }
    polish(op, &c)
}

pub(crate) fn sort_pairs(values: &mut Vec<f64>, vectors: &mut Vec<Vec<Complex64>>, residuals: &mut Vec<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *values = idx.iter().map(|&i| values[i]).collect();
    *residuals = idx.iter().map(|&i| residuals[i]).collect();
    let mut taken: Vec<Option<Vec<Complex64>>> = std::mem::take(vectors).into_iter().map(Some).collect();
    *vectors = idx.iter().map(|&i| taken[i].take().expect("permutation")).collect();
}

/// Upper bound on the `k`-th smallest eigenvalue: by Cauchy interlacing the
/// `k`-th Ritz value of any orthonormal Krylov basis dominates `λ_k`.
pub(crate) fn ritz_upper_bound(op: &HermitianOperator, k: usize, steps: usize, seed: u64) -> Result<f64, String> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = steps.min(n);
    let none = Cols::new(n);
    let mut q = Cols::new(n);
    extend_orthonormal(&mut q, &none, single(&random_vector(n, &mut rng)));
    while !q.is_empty() && q.len() < steps {
        let w = op.apply(q.col(q.len() - 1));
        let before = q.len();
        extend_orthonormal(&mut q, &none, single(&w));
        if q.len() == before {
            break;
        }
    }
    let m = q.len();
    if m < k {
        return Ok(op.gershgorin_upper());
    }
    let mut hq = Cols::new(n);
    for i in 0..m {
        hq.push(&op.apply(q.col(i)));
    }
    let (vals, _) = dense::small_hermitian(&adjoint_product(&q, &hq), m)?;
    Ok(vals[k - 1])
}

/// Lowest `k` eigenpairs by restarted Lanczos on `H`.
pub(crate) fn plain_lowest(
    op: &HermitianOperator,
    k: usize,
    tol: f64,
    max_restarts: usize,
    seed: u64,
) -> Result<Pairs, String> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_basis = n.min((3 * k + 60).max(160));
    let spread = (op.gershgorin_upper() - op.gershgorin_lower()).max(1.0);
    let none = Cols::new(n);
    let mut locked = Cols::new(n);
    let mut start: Option<Vec<Complex64>> = None;
    let mut iterations = 0;

    for _ in 0..max_restarts {
        if locked.len() >= k {
            break;
        }
        let need = k - locked.len();
        let cap = max_basis.min(n - locked.len());
        let mut q = Cols::new(n);
        let first = start.take().unwrap_or_else(|| random_vector(n, &mut rng));
        extend_orthonormal(&mut q, &locked, single(&first));
        if q.is_empty() {
            extend_orthonormal(&mut q, &locked, single(&random_vector(n, &mut rng)));
            if q.is_empty() {
                break;
            }
        }
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let (invariant, s) = loop {
            let j = q.len() - 1;
            let w = op.apply(q.col(j));
            iterations += 1;
            alpha.push(dot(q.col(j), &w).re);
            let coef = extend_orthonormal(&mut q, &locked, single(&w));
            let grew = q.len() > j + 1;
            let b = if grew { coef[0][j + 1].re } else { 0.0 };
            let m = alpha.len();
            let invariant = !grew || b <= 1e-13 * spread;
            let full = m >= cap;
            if invariant || full || (m >= need && m % 10 == 0) {
                let (_, s) = dense::tridiagonal(&alpha, &beta)?;
                let done = (0..need.min(m)).all(|i| (b * s[i * m + m - 1]).abs() <= 0.1 * tol);
                if done || invariant || full {
                    break (invariant, s);
                }
            }
            beta.push(b);
        };
        let m = alpha.len();
        let r = need.min(m);
        let coef: Vec<Complex64> = s[..r * m].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let ritz = q.combine(0, m, &coef, r);
        let mut restart_vec = vec![ZERO; n];
        for i in 0..r {
            let y = ritz.col(i);
            let (_, res) = rayleigh(op, y);
            if res <= tol {
                extend_orthonormal(&mut locked, &none, single(y));
            } else {
                axpy(Complex64::new(1.0, 0.0), y, &mut restart_vec);
            }
        }
        start = if invariant || norm(&restart_vec) == 0.0 {
            None
        } else {
            Some(restart_vec)
        };
    }

    let converged = locked.len() >= k;
    let mut pairs = polish(op, &locked)?;
    pairs.values.truncate(k);
    pairs.vectors.truncate(k);
    pairs.residuals.truncate(k);
    pairs.iterations = iterations;
    pairs.converged = converged && pairs.residuals.iter().all(|&r| r <= tol);
    Ok(pairs)
}

/// One spectral slice `[lo, hi)` around `sigma`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Slice {
    pub lo: f64,
    pub hi: f64,
    pub sigma: f64,
    /// Certified eigenvalue count in the slice, when known.
    pub count: Option<usize>,
}

/// Block shift-invert Lanczos for the eigenvalues in one slice. `solve`
/// overwrites each column of its argument with `(H - σI)⁻¹` applied to it.
///
/// Restarts are thick: the Ritz vectors nearest `σ` are kept together with
/// their exact coupling to the residual block, converged pairs are locked,
/// and a fresh random block joins every restart so that exactly degenerate
/// eigenspaces keep gaining directions.
pub(crate) fn shift_invert_slice<F>(
    op: &HermitianOperator,
    solve: F,
    slice: Slice,
    tol: f64,
    max_restarts: usize,
    basis_cap: usize,
    seed: u64,
) -> Result<Pairs, String>
where
    F: Fn(&mut Cols) -> Result<(), String>,
{
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = (op.gershgorin_upper() - slice.sigma)
        .abs()
        .max((op.gershgorin_lower() - slice.sigma).abs())
        .max(1.0);
    let mut screen = tol / spread;
    let none = Cols::new(n);
    let mut locked = Cols::new(n);
    let mut found = 0;
    let mut iterations = 0;
    let in_window = |l: f64| l >= slice.lo && l < slice.hi;
    let reach = 2.0 * (slice.sigma - slice.lo).max(slice.hi - slice.sigma);

    // Carried between cycles: the basis and its known T columns; basis
    // columns past the known ones still have to be expanded.
    let mut carry: Option<(Cols, Vec<Vec<Complex64>>)> = None;
    let mut stagnant = false;

    for _ in 0..max_restarts {
        let missing = match slice.count {
            Some(c) if found >= c => break,
            Some(c) => c - found,
            None => 8,
        };
        let avail = n - locked.len();
        if avail == 0 {
            break;
        }
        let p = missing.clamp(2, 16).min(avail);
        let base_cap = match slice.count {
            Some(_) => (3 * missing + 4 * p).max(48).min(basis_cap.max(4 * p)).min(avail),
            None => basis_cap.max(p).min(avail),
        };

        let (mut q, mut tcols) = carry.take().unwrap_or_else(|| (Cols::new(n), Vec::new()));
        let expand_from = tcols.len();
        // Top the residual block up to size p; after a stagnant cycle add a
        // few random directions regardless, bounded so blocks cannot grow.
        let carried = q.len() - expand_from;
        let mut fresh = p.saturating_sub(carried);
        if stagnant {
            fresh = fresh.max((p / 4).max(1)).min(32usize.saturating_sub(carried));
        }
        let fresh = fresh.min(avail.saturating_sub(q.len()));
        if fresh > 0 {
            let mut z = Cols::new(n);
            for _ in 0..fresh {
                z.push(&random_vector(n, &mut rng));
            }
            extend_orthonormal(&mut q, &locked, z);
        }
        if q.len() == expand_from {
            break;
        }
        // Room for at least two expansions of the current block.
        let cap = base_cap.max(q.len() + 2 * (q.len() - expand_from)).min(avail);
        let found_before = found;

        // Uncertified windows stop once the in-window Ritz set has been
        // stable and converged for several consecutive blocks.
        let mut stable = 0;
        let mut last_cand = usize::MAX;
        let mut block = (expand_from, q.len());
        loop {
            let (s, e) = block;
            let mut w = Cols::new(n);
            for c in s..e {
                w.push(q.col(c));
            }
            solve(&mut w)?;
            iterations += e - s;
            tcols.extend(extend_orthonormal(&mut q, &locked, w));
            let p_new = q.len() - e;
            let exhausted = p_new == 0;

            // Rayleigh-Ritz on the leading e×e block; rows e.. of the last
            // block's columns couple the basis to the new directions.
            let mut t = vec![ZERO; e * e];
            for (c, col) in tcols.iter().enumerate() {
                for (i, v) in col.iter().enumerate().take(e) {
                    t[c * e + i] = *v;
                }
            }
            let (theta, svec) = dense::small_hermitian(&t, e)?;
            let coupling = |j: usize| -> Vec<Complex64> {
                let sj = &svec[j * e..(j + 1) * e];
                (0..p_new)
                    .map(|k| {
                        let mut acc = ZERO;
                        for (c, col) in tcols.iter().enumerate().skip(s) {
                            if let Some(r) = col.get(e + k) {
                                acc += r * sj[c];
                            }
                        }
                        acc
                    })
                    .collect()
            };
            let mut cand: Vec<usize> = Vec::new();
            let mut neighbours: Vec<usize> = Vec::new();
            // Screened by a pessimistic bound; these are worth a true
            // residual check when the cycle ends.
            let mut loose: Vec<usize> = Vec::new();
            let mut pending = 0;
            for j in 0..e {
                if theta[j] == 0.0 {
                    continue;
                }
                let lambda = slice.sigma + 1.0 / theta[j];
                let inside = in_window(lambda);
                if !inside && (slice.count.is_none() || (lambda - slice.sigma).abs() > reach) {
                    continue;
                }
                let est = norm(&coupling(j)) / theta[j].abs();
                if est <= screen || (inside && exhausted) {
                    if inside {
                        cand.push(j);
                    } else {
                        neighbours.push(j);
                    }
                } else if inside {
                    pending += 1;
                    if est <= LOOSE * screen {
                        loose.push(j);
                    }
                }
            }

            let full = e + p_new > cap;
            let finished = match slice.count {
                Some(_) => cand.len() >= missing || full || exhausted,
                None => {
                    if pending == 0 && cand.len() == last_cand {
                        stable += 1;
                    } else {
                        stable = 0;
                    }
                    last_cand = cand.len();
                    (stable >= 3 && e >= 3 * cand.len() + 40) || full || exhausted
                }
            };
            if !finished {
                block = (e, e + p_new);
                continue;
            }

            // Lock verified pairs. Converged neighbours just outside the
            // window are deflated too, so a dense cluster beyond an edge
            // cannot crowd the basis.
            let mut taken = vec![false; e];
            for (inside, strict, set) in [(true, true, &cand), (true, false, &loose), (false, false, &neighbours)] {
                let coef: Vec<Complex64> = set.iter().flat_map(|&j| svec[j * e..(j + 1) * e].iter().copied()).collect();
                let ys = q.combine(0, e, &coef, set.len());
                let mut good = Cols::new(n);
                for (slot, &j) in set.iter().enumerate() {
                    let (_, r) = rayleigh(op, ys.col(slot));
                    if r <= tol {
                        good.push(ys.col(slot));
                        taken[j] = true;
                    } else if strict {
                        screen *= 0.01;
                    }
                }
                let before = locked.len();
                extend_orthonormal(&mut locked, &none, good);
                if inside {
                    found += locked.len() - before;
                }
            }

            // Thick restart from the unlocked Ritz vectors nearest σ.
            let still_missing = slice.count.map_or(0, |c| c.saturating_sub(found));
            let mut order: Vec<usize> = (0..e).filter(|&j| !taken[j] && theta[j] != 0.0).collect();
            order.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
            let want = still_missing + p + still_missing / 2;
            let room = cap.saturating_sub(p_new + 3 * p).max(still_missing + p);
            let keep = order.len().min(room).min(want);
            let mut coef = Vec::with_capacity(keep * e);
            let mut kept_t = Vec::with_capacity(keep);
            for (slot, &j) in order[..keep].iter().enumerate() {
                coef.extend_from_slice(&svec[j * e..(j + 1) * e]);
                let mut col = vec![ZERO; keep];
                col[slot] = Complex64::new(theta[j], 0.0);
                col.extend(coupling(j));
                kept_t.push(col);
            }
            let mut kept_q = q.combine(0, e, &coef, keep);
            for c in e..e + p_new {
                kept_q.push(q.col(c));
            }
            carry = Some((kept_q, kept_t));
            break;
        }
        stagnant = found == found_before;
        if slice.count.is_none() {
            break;
        }
    }

    let mut pairs = polish(op, &locked)?;
    // Keep only window members; polishing may nudge values across an edge
    // by at most the residual.
    let mut keep: Vec<usize> = (0..pairs.values.len())
        .filter(|&i| pairs.values[i] >= slice.lo - tol && pairs.values[i] < slice.hi + tol)
        .collect();
    if let Some(c) = slice.count {
        if keep.len() > c {
            keep.sort_by(|&a, &b| {
                (pairs.values[a] - slice.sigma)
                    .abs()
                    .total_cmp(&(pairs.values[b] - slice.sigma).abs())
            });
            keep.truncate(c);
            keep.sort_unstable();
        }
    }
    let values: Vec<f64> = keep.iter().map(|&i| pairs.values[i]).collect();
    let residuals: Vec<f64> = keep.iter().map(|&i| pairs.residuals[i]).collect();
    let mut taken: Vec<Option<Vec<Complex64>>> = std::mem::take(&mut pairs.vectors).into_iter().map(Some).collect();
    let vectors: Vec<Vec<Complex64>> = keep.iter().map(|&i| taken[i].take().expect("unique")).collect();
    let converged = match slice.count {
        Some(c) => values.len() == c && residuals.iter().all(|&r| r <= tol),
        None => residuals.iter().all(|&r| r <= tol),
    };
    Ok(Pairs {
        values,
        vectors,
        residuals,
        iterations,
        converged,
    })
}
