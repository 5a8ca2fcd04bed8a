//! Landau-level oracle, eigenvalue-cluster bookkeeping, truncation ladders
//! and the resolvent-difference probe.
//!
//! Essential spectrum has no meaning for a finite matrix. Its surrogate here
//! is ladder persistence: a level is essential-like when its cluster count
//! is positive at every truncation radius, never decreases along the ladder
//! and ends strictly higher than it started.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{assemble, direct_sum, AssemblyError, HermitianOperator, InnerBoundary, Region};
use crate::eigensolve::band::BandLdl;
use crate::eigensolve::{dense, eigs_lowest, eigs_window, SolveError, SolverOptions, SpectrumResult};
use crate::field::{FieldError, FieldSpec, LinkPhases};
use crate::geometry::{build_grid, DomainSpec, GeometryError, MaskedGrid, Obstacle};

/// Largest operator handled by the dense resolvent probes.
pub const DENSE_PROBE_MAX: usize = 4000;

/// Largest per-level count difference between two ladders that still counts
/// as bounded.
pub const DIFFERENCE_BOUND: usize = 10;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("operator dimension {0} exceeds the dense probe limit {DENSE_PROBE_MAX}")]
    TooLarge(usize),
    #[error("factorization of the shifted operator failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EssentialSpectrumModel {
    /// `(2n-1) b` for `n = 1, 2, …` up to a cutoff.
    LandauSet { levels: Vec<f64> },
    /// `[threshold, ∞)`.
    HalfLine { threshold: f64 },
    /// Compact resolvent.
    Empty,
}

impl EssentialSpectrumModel {
    /// Levels that cluster counts are reported for.
    pub fn levels(&self) -> Vec<f64> {
        match self {
            EssentialSpectrumModel::LandauSet { levels } => levels.clone(),
            EssentialSpectrumModel::HalfLine { threshold } => vec![*threshold],
            EssentialSpectrumModel::Empty => vec![],
        }
    }
}

/// Essential spectrum of the constant-field whole-space operator.
pub fn landau_levels(b: f64, d: usize, energy_cutoff: f64) -> Result<EssentialSpectrumModel, SpectraError> {
    if !b.is_finite() || b < 0.0 {
        return Err(SpectraError::InvalidArgument(format!("field strength must be finite and non-negative, got {b}")));
    }
    if !energy_cutoff.is_finite() {
        return Err(SpectraError::InvalidArgument("energy cutoff must be finite".into()));
    }
    match d {
        2 if b > 0.0 => {
            let levels = (1..)
                .map(|n: u32| f64::from(2 * n - 1) * b)
                .take_while(|&l| l <= energy_cutoff)
                .collect();
            Ok(EssentialSpectrumModel::LandauSet { levels })
        }
        2 => Ok(EssentialSpectrumModel::HalfLine { threshold: 0.0 }),
        3 => Ok(EssentialSpectrumModel::HalfLine { threshold: b }),
        _ => Err(SpectraError::InvalidArgument(format!("dimension must be 2 or 3, got {d}"))),
    }
}

/// Model predicted by the field's limit at infinity; a field that grows
/// without bound gives a compact resolvent.
pub fn model_for_field(field: &FieldSpec, energy_cutoff: f64) -> Result<EssentialSpectrumModel, SpectraError> {
    match field.strength_at_infinity() {
        Some(b) => landau_levels(b, field.dimension, energy_cutoff),
        None => Ok(EssentialSpectrumModel::Empty),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCount {
    pub level: f64,
    /// Eigenvalues within `δ` of this level.
    pub count: usize,
    /// Off-cluster eigenvalues whose nearest level is this one.
    pub gap_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub model: EssentialSpectrumModel,
    pub delta: f64,
    pub window: [f64; 2],
    pub levels: Vec<LevelCount>,
    pub off_cluster: usize,
    pub total: usize,
    pub off_cluster_fraction: f64,
    /// False when the window's completeness was not certified by inertia.
    pub certified: bool,
}

impl ClusterReport {
    pub fn count_at(&self, level: f64) -> Option<usize> {
        self.levels.iter().find(|l| same_level(l.level, level)).map(|l| l.count)
    }
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Bucket the eigenvalues of `evs` that lie in the closed `window`.
pub fn cluster_report(
    evs: &SpectrumResult,
    model: &EssentialSpectrumModel,
    delta: f64,
    window: [f64; 2],
) -> Result<ClusterReport, SpectraError> {
    cluster_report_values(&evs.eigenvalues, evs.certified(), model, delta, window)
}

/// [`cluster_report`] on a bare list of eigenvalues.
pub fn cluster_report_values(
    values: &[f64],
    certified: bool,
    model: &EssentialSpectrumModel,
    delta: f64,
    window: [f64; 2],
) -> Result<ClusterReport, SpectraError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(SpectraError::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if !(window[0].is_finite() && window[1].is_finite() && window[0] <= window[1]) {
        return Err(SpectraError::InvalidArgument(format!("bad window [{}, {}]", window[0], window[1])));
    }
    if let EssentialSpectrumModel::LandauSet { levels } = model {
        let min_gap = levels.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if delta >= 0.5 * min_gap {
            return Err(SpectraError::InvalidArgument(format!(
                "delta {delta} must be below half the minimum level gap {min_gap}"
            )));
        }
    }
    let levels = model.levels();
    let mut counts: Vec<LevelCount> = levels
        .iter()
        .map(|&level| LevelCount {
            level,
            count: 0,
            gap_count: 0,
        })
        .collect();
    let mut off = 0;
    let mut total = 0;
    for &x in values.iter().filter(|&&x| x >= window[0] && x <= window[1]) {
        total += 1;
        match model {
            EssentialSpectrumModel::LandauSet { .. } => {
                // Nearest level; ties go to the lower one.
                let nearest = (0..levels.len()).min_by(|&a, &b| (x - levels[a]).abs().total_cmp(&(x - levels[b]).abs()));
                match nearest {
                    Some(i) if (x - levels[i]).abs() <= delta => counts[i].count += 1,
                    Some(i) => {
                        counts[i].gap_count += 1;
                        off += 1;
                    }
                    None => off += 1,
                }
            }
            EssentialSpectrumModel::HalfLine { threshold } => {
                if x >= threshold - delta {
                    counts[0].count += 1;
                } else {
                    off += 1;
                }
            }
            EssentialSpectrumModel::Empty => off += 1,
        }
    }
    Ok(ClusterReport {
        model: model.clone(),
        delta,
        window,
        levels: counts,
        off_cluster: off,
        total,
        off_cluster_fraction: if total == 0 { 0.0 } else { off as f64 / total as f64 },
        certified,
    })
}

/// Levels that are positive at every rung, non-decreasing along the ladder
/// and strictly higher at the last rung than at the first. A one-rung
/// ladder only needs a positive count.
pub fn persistent_levels(reports: &[ClusterReport]) -> Vec<f64> {
    let Some(first) = reports.first() else {
        return vec![];
    };
    first
        .levels
        .iter()
        .map(|l| l.level)
        .filter(|&level| {
            let counts: Vec<usize> = reports.iter().map(|r| r.count_at(level).unwrap_or(0)).collect();
            let positive = counts.iter().all(|&c| c > 0);
            let monotone = counts.windows(2).all(|w| w[0] <= w[1]);
            let grows = counts.len() == 1 || counts[counts.len() - 1] > counts[0];
            positive && monotone && grows
        })
        .collect()
}

/// One spectral experiment, parameterised by the truncation radius.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub domain: DomainSpec,
    pub field: FieldSpec,
    /// Condition on Γ; ignored without an obstacle.
    pub boundary: InnerBoundary,
    pub h: f64,
    /// Closed analysis window; the solver is asked for `[a, b)` nudged up
    /// by a relative `1e-12` so that `b` itself is included.
    pub window: [f64; 2],
    pub cap: usize,
    pub delta: f64,
    pub solver: SolverOptions,
}

/// The exterior operator when there is an obstacle, the whole-space one
/// otherwise.
pub fn build_operator(domain: &DomainSpec, field: &FieldSpec, boundary: InnerBoundary, h: f64) -> Result<HermitianOperator, SpectraError> {
    field.validate()?;
    let grid = build_grid(domain, h)?;
    let phases = LinkPhases::compute(&grid, field);
    let op = match domain.obstacle {
        Obstacle::None => assemble(&grid, &phases, Region::Full, None)?,
        _ => assemble(&grid, &phases, Region::Omega, Some(boundary))?,
    };
    Ok(crate::assembly::with_field(op, *field))
}

/// Solve the window at one radius. A solver that stops short of its
/// certificate yields its partial spectrum marked uncertified.
pub fn run_window(cfg: &PipelineConfig, radius: f64) -> Result<SpectrumResult, SpectraError> {
    let domain = cfg.domain.clone().with_radius(radius);
    let op = build_operator(&domain, &cfg.field, cfg.boundary, cfg.h)?;
    let hi = cfg.window[1] + 1e-12 * cfg.window[1].abs().max(1.0);
    match eigs_window(&op, cfg.window[0], hi, cfg.cap, &cfg.solver) {
        Ok(r) => Ok(r),
        Err(e @ (SolveError::NotConverged { .. } | SolveError::CapExceeded { .. })) => {
            let mut partial = e.partial().expect("carries partial results").clone();
            partial.info.certification = crate::eigensolve::Certification::Uncertified;
            Ok(partial)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Rung {
    pub radius: f64,
    pub dimension: usize,
    pub report: ClusterReport,
    #[serde(skip)]
    pub spectrum: SpectrumResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ladder {
    pub rungs: Vec<Rung>,
    pub persistent_levels: Vec<f64>,
    pub certified: bool,
}

/// Run `cfg` at every radius (in parallel) and bucket each spectrum
/// against `model`.
pub fn run_ladder(cfg: &PipelineConfig, radii: &[f64], model: &EssentialSpectrumModel) -> Result<Ladder, SpectraError> {
    check_radii(radii)?;
    let runs = crate::exec::map(radii, |&r| run_window(cfg, r));
    let mut rungs = Vec::with_capacity(radii.len());
    for (&radius, run) in radii.iter().zip(runs) {
        let spectrum = run?;
        let report = cluster_report(&spectrum, model, cfg.delta, cfg.window)?;
        rungs.push(Rung {
            radius,
            dimension: spectrum.meta.dimension,
            report,
            spectrum,
        });
    }
    let reports: Vec<ClusterReport> = rungs.iter().map(|r| r.report.clone()).collect();
    Ok(Ladder {
        certified: reports.iter().all(|r| r.certified),
        persistent_levels: persistent_levels(&reports),
        rungs,
    })
}

fn check_radii(radii: &[f64]) -> Result<(), SpectraError> {
    if radii.is_empty() {
        return Err(SpectraError::InvalidArgument("ladder needs at least one radius".into()));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectraError::InvalidArgument("radii must be positive and strictly ascending".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub model: EssentialSpectrumModel,
    pub reference: Ladder,
    pub test: Ladder,
    /// Per persistent reference level, the largest `|count_test - count_ref|`
    /// over the ladder.
    pub max_differences: Vec<(f64, usize)>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

/// Compare two ladders bucketed against the reference configuration's
/// model. PASS needs equal persistent-level sets and per-level count
/// differences of at most [`DIFFERENCE_BOUND`] at every radius; any
/// uncertified window makes the result inconclusive.
pub fn ladder_compare(
    reference: &PipelineConfig,
    test: &PipelineConfig,
    radii: &[f64],
    energy_cutoff: f64,
) -> Result<Comparison, SpectraError> {
    check_radii(radii)?;
    if reference.domain.dimension != test.domain.dimension
        || reference.domain.truncation_shape != test.domain.truncation_shape
        || reference.h != test.h
        || reference.window != test.window
        || reference.delta != test.delta
    {
        return Err(SpectraError::InvalidArgument(
            "compared configurations must share dimension, truncation shape, h, window and delta".into(),
        ));
    }
    let model = model_for_field(&reference.field, energy_cutoff)?;
    let ref_ladder = run_ladder(reference, radii, &model)?;
    let test_ladder = run_ladder(test, radii, &model)?;
    Ok(judge(model, ref_ladder, test_ladder))
}

fn judge(model: EssentialSpectrumModel, reference: Ladder, test: Ladder) -> Comparison {
    let mut reasons = Vec::new();
    let mut max_differences = Vec::new();
    for &level in &reference.persistent_levels {
        let worst = reference
            .rungs
            .iter()
            .zip(&test.rungs)
            .map(|(a, b)| {
                let (x, y) = (a.report.count_at(level).unwrap_or(0), b.report.count_at(level).unwrap_or(0));
                x.abs_diff(y)
            })
            .max()
            .unwrap_or(0);
        max_differences.push((level, worst));
        if worst > DIFFERENCE_BOUND {
            reasons.push(format!("level {level}: count difference {worst} exceeds {DIFFERENCE_BOUND}"));
        }
    }
    let same_set = reference.persistent_levels.len() == test.persistent_levels.len()
        && reference
            .persistent_levels
            .iter()
            .zip(&test.persistent_levels)
            .all(|(a, b)| same_level(*a, *b));
    if !same_set {
        reasons.push(format!(
            "persistent levels differ: reference {:?}, test {:?}",
            reference.persistent_levels, test.persistent_levels
        ));
    }
    let verdict = if !(reference.certified && test.certified) {
        reasons.push("a window was not certified by inertia".into());
        Verdict::Inconclusive
    } else if reasons.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Comparison {
        model,
        reference,
        test,
        max_differences,
        verdict,
        reasons,
    }
}

/// Operators for the resolvent-difference probe on one grid: the
/// whole-space operator and the direct sum `H_Ω^γ ⊕ H_K^{-γ}`, both indexed
/// by grid node. Without an obstacle the two coincide.
pub struct ProbeOperators {
    pub grid: MaskedGrid,
    pub phases: LinkPhases,
    pub full: HermitianOperator,
    pub tilde: HermitianOperator,
    pub gamma: f64,
}

impl ProbeOperators {
    pub fn build(domain: &DomainSpec, field: &FieldSpec, gamma: f64, h: f64) -> Result<Self, SpectraError> {
        field.validate()?;
        let grid = build_grid(domain, h)?;
        let phases = LinkPhases::compute(&grid, field);
        let full = assemble(&grid, &phases, Region::Full, None)?;
        if matches!(domain.obstacle, Obstacle::None) {
            // Nothing to split: the two operators coincide.
            let tilde = full.clone();
            return Ok(ProbeOperators { grid, phases, full, tilde, gamma });
        }
        let robin = Some(InnerBoundary::Robin { gamma });
        let omega = assemble(&grid, &phases, Region::Omega, robin)?;
        let obstacle = assemble(&grid, &phases, Region::Obstacle, robin)?;
        let tilde = direct_sum(&omega, &obstacle)?;
        Ok(ProbeOperators {
            grid,
            phases,
            full,
            tilde,
            gamma,
        })
    }
}

/// Shift `c` making every operator in `ops` positive definite after adding
/// `cI`: one unit above the most negative lowest eigenvalue, and `1` when
/// all are already non-negative. Computed once and reused across a
/// comparison so that both resolvents carry the same shift.
pub fn h1_shift(ops: &[&HermitianOperator]) -> Result<f64, SpectraError> {
    let mut lowest = 0.0f64;
    for op in ops {
        let r = eigs_lowest(op, 1, &SolverOptions::default())?;
        lowest = lowest.min(r.eigenvalues[0]);
    }
    Ok(1.0 - lowest)
}

fn check_probe_pair(full: &HermitianOperator, tilde: &HermitianOperator) -> Result<(), SpectraError> {
    if full.nodes() != tilde.nodes() {
        return Err(SpectraError::InvalidArgument("operators live on different index sets".into()));
    }
    if full.dim() > DENSE_PROBE_MAX {
        return Err(SpectraError::TooLarge(full.dim()));
    }
    Ok(())
}

fn shifted_dense(op: &HermitianOperator, c: f64) -> Vec<Complex64> {
    let n = op.dim();
    let mut a = op.to_dense();
    for i in 0..n {
        a[i * n + i] += c;
    }
    a
}

/// Top `k` singular values of `V = (H̃ + cI)⁻¹ - (H + cI)⁻¹`.
pub fn resolvent_difference_svd(
    full: &HermitianOperator,
    tilde: &HermitianOperator,
    shift: f64,
    k: usize,
) -> Result<Vec<f64>, SpectraError> {
    check_probe_pair(full, tilde)?;
    if !shift.is_finite() {
        return Err(SpectraError::InvalidArgument("shift must be finite".into()));
    }
    let n = full.dim();
    let a = dense::inverse(&shifted_dense(tilde, shift), n);
    let b = dense::inverse(&shifted_dense(full, shift), n);
    if a.iter().chain(&b).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SpectraError::Factorization(format!("shifted operator singular at c = {shift}")));
    }
    let v: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mut s = dense::singular_values(&v, n).map_err(SpectraError::Factorization)?;
    s.truncate(k);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryIdentity {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub gap: f64,
}

/// Both sides of the boundary representation of `⟨f, Vg⟩`, with
/// `u = (H + cI)⁻¹ f`, `v = (H̃ + cI)⁻¹ g` and the `h^d`-weighted inner
/// product:
///
/// ```text
/// lhs = ⟨f, Vg⟩
/// rhs = -Σ_{faces a→b across Γ} h^(d-1) (∂_Γ u)_a conj(v_a - v_b e^{-iθ_ab})
/// (∂_Γ u)_a = (u_b e^{-iθ_ab} - u_a)/h + γ u_a
/// ```
///
/// with `a ∈ Ω`, `b ∈ K` and the face normal pointing into K. The two agree
/// up to `γ h^d Σ conj(v_b e^{-iθ}) (u_b e^{-iθ} - u_a)/h`, which is first
/// order in `h` for smooth data.
pub fn boundary_identity_check(
    f: &[Complex64],
    g: &[Complex64],
    probe: &ProbeOperators,
    shift: f64,
) -> Result<BoundaryIdentity, SpectraError> {
    let (full, tilde) = (&probe.full, &probe.tilde);
    check_probe_pair(full, tilde)?;
    let n = full.dim();
    if f.len() != n || g.len() != n {
        return Err(SpectraError::InvalidArgument(format!("vectors must have length {n}")));
    }
    let solve = |op: &HermitianOperator, x: &[Complex64]| -> Result<Vec<Complex64>, SpectraError> {
        let ldl = BandLdl::factor(op, -shift).map_err(|e| SpectraError::Factorization(format!("{e:?}")))?;
        let mut y = x.to_vec();
        ldl.solve_in_place(&mut y);
        Ok(y)
    };
    let u = solve(full, f)?;
    let v = solve(tilde, g)?;
    let w = solve(full, g)?;

    let h = probe.grid.h();
    let d = probe.grid.dimension() as i32;
    let lhs: Complex64 = f.iter().zip(v.iter().zip(&w)).map(|(fi, (vi, wi))| fi * (vi - wi).conj()).sum::<Complex64>() * h.powi(d);

    // Rows are grid nodes for both operators.
    let mut rhs = Complex64::new(0.0, 0.0);
    for face in probe.grid.inner_faces() {
        let (a, b) = (face.node, face.neighbor.expect("inner faces cross Γ"));
        let theta = probe
            .phases
            .oriented(&probe.grid, a, face.axis, face.direction)
            .expect("inner face has a lattice edge");
        let t = Complex64::from_polar(1.0, -theta);
        let normal = (u[b] * t - u[a]) / h + u[a] * probe.gamma;
        rhs -= normal * (v[a] - v[b] * t).conj();
    }
    rhs *= h.powi(d - 1);

    let scale = lhs.norm().max(f64::MIN_POSITIVE);
    Ok(BoundaryIdentity {
        lhs,
        rhs,
        gap: (lhs - rhs).norm() / scale,
    })
}

/// A smooth complex function on the grid: a sum of Gaussian bumps with
/// seeded centres, widths and amplitudes. The same seed gives samples of
/// the same continuum function on every lattice, so it can serve as
/// refinement-consistent test data.
pub fn smooth_probe_vector(grid: &MaskedGrid, seed: u64, bumps: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dimension();
    let radius = grid.spec().truncation_radius;
    let params: Vec<([f64; 3], f64, Complex64)> = (0..bumps)
        .map(|_| {
            let mut c = [0.0; 3];
            for x in c.iter_mut().take(d) {
                *x = rng.random_range(-0.6..0.6) * radius;
            }
            let width = rng.random_range(0.15..0.35) * radius;
            let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (c, width, amp)
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            params
                .iter()
                .map(|(c, w, a)| {
                    let r2: f64 = (0..d).map(|k| (x[k] - c[k]).powi(2)).sum();
                    a * (-r2 / (2.0 * w * w)).exp()
                })
                .sum()
        })
        .collect()
}

/// Largest `σ_k/σ_1` accepted as resolvent-difference decay.
pub const DECAY_MAX: f64 = 0.1;
/// Largest relative change of the leading singular values under refinement.
pub const AGREEMENT_MAX: f64 = 0.25;
/// Smallest factor by which the boundary-identity gap must shrink when `h`
/// halves.
pub const GAP_SHRINK_MIN: f64 = 1.5;
/// Singular values compared across resolutions.
pub const LEADING: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct ProbeLevel {
    pub h: f64,
    pub dimension: usize,
    pub singular_values: Vec<f64>,
    pub identities: Vec<BoundaryIdentity>,
    pub mean_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSummary {
    pub shift: f64,
    pub coarse: ProbeLevel,
    pub fine: Option<ProbeLevel>,
    /// `σ_k/σ_1` on the coarse grid; zero when `V` vanishes.
    pub decay_ratio: f64,
    /// Largest relative difference among the leading singular values.
    pub leading_agreement: Option<f64>,
    pub gap_ratio: Option<f64>,
}

impl ProbeSummary {
    pub fn verdict(&self) -> Verdict {
        let vanishing = self.coarse.singular_values.first().is_none_or(|&s| s == 0.0);
        let decays = self.decay_ratio <= DECAY_MAX;
        let agrees = self.leading_agreement.is_none_or(|a| a <= AGREEMENT_MAX);
        let converges = vanishing || self.gap_ratio.is_none_or(|r| r >= GAP_SHRINK_MIN);
        if decays && agrees && converges {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Resolvent-difference probe at `h` and, with `refine`, at `h/2`, using the
/// shift of the coarse operators on both grids. Each seed `s` contributes one
/// boundary-identity check with `f`, `g` drawn from seeds `2s` and `2s + 1`.
pub fn run_probe(
    domain: &DomainSpec,
    field: &FieldSpec,
    gamma: f64,
    h: f64,
    k: usize,
    refine: bool,
    seeds: &[u64],
) -> Result<ProbeSummary, SpectraError> {
    if k == 0 || seeds.is_empty() {
        return Err(SpectraError::InvalidArgument("probe needs k ≥ 1 and at least one seed".into()));
    }
    let coarse_ops = ProbeOperators::build(domain, field, gamma, h)?;
    let shift = h1_shift(&[&coarse_ops.full, &coarse_ops.tilde])?;
    let level = |ops: &ProbeOperators| -> Result<ProbeLevel, SpectraError> {
        let singular_values = resolvent_difference_svd(&ops.full, &ops.tilde, shift, k)?;
        let identities = seeds
            .iter()
            .map(|&s| {
                let f = smooth_probe_vector(&ops.grid, 2 * s, 4);
                let g = smooth_probe_vector(&ops.grid, 2 * s + 1, 4);
                boundary_identity_check(&f, &g, ops, shift)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mean_gap = identities.iter().map(|i| i.gap).sum::<f64>() / identities.len() as f64;
        Ok(ProbeLevel {
            h: ops.grid.h(),
            dimension: ops.full.dim(),
            singular_values,
            identities,
            mean_gap,
        })
    };
    let coarse = level(&coarse_ops)?;
    drop(coarse_ops);
    let fine = if refine {
        Some(level(&ProbeOperators::build(domain, field, gamma, 0.5 * h)?)?)
    } else {
        None
    };
    let s = &coarse.singular_values;
    let decay_ratio = if s[0] > 0.0 { s[s.len() - 1] / s[0] } else { 0.0 };
    let leading_agreement = fine.as_ref().map(|f| {
        s.iter()
            .zip(&f.singular_values)
            .take(LEADING)
            .map(|(a, b)| if a.max(*b) > 0.0 { (a - b).abs() / a.max(*b) } else { 0.0 })
            .fold(0.0, f64::max)
    });
    let gap_ratio = fine.as_ref().map(|f| coarse.mean_gap / f.mean_gap);
    Ok(ProbeSummary {
        shift,
        coarse,
        fine,
        decay_ratio,
        leading_agreement,
        gap_ratio,
    })
}
