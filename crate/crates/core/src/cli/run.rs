//! Experiment orchestration and result files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use crate::eigensolve::{eigs_lowest, Certification, SolveError, SolverInfo, SolverOptions};
use crate::geometry::Obstacle;
use crate::spectra::{
    build_operator, cluster_report, landau_levels, ladder_compare, model_for_field, run_ladder, run_probe, run_window,
    ClusterReport, EssentialSpectrumModel, Ladder, PipelineConfig, ProbeSummary, SpectraError, Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success | Outcome::Pass => 0,
            Outcome::Fail => 2,
            Outcome::Inconclusive => 3,
        }
    }
}

impl From<Verdict> for Outcome {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Outcome::Pass,
            Verdict::Fail => Outcome::Fail,
            Verdict::Inconclusive => Outcome::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub radius: f64,
    pub dimension: usize,
    pub certified: bool,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub report: Option<ClusterReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderRecord {
    pub runs: Vec<RunRecord>,
    pub persistent_levels: Vec<f64>,
    pub certified: bool,
}

impl From<&Ladder> for LadderRecord {
    fn from(l: &Ladder) -> Self {
        LadderRecord {
            runs: l
                .rungs
                .iter()
                .map(|r| RunRecord {
                    radius: r.radius,
                    dimension: r.dimension,
                    certified: r.report.certified,
                    eigenvalues: r.spectrum.eigenvalues.clone(),
                    residuals: r.spectrum.residuals.clone(),
                    report: Some(r.report.clone()),
                })
                .collect(),
            persistent_levels: l.persistent_levels.clone(),
            certified: l.certified,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRecord {
    pub reference: LadderRecord,
    pub test: LadderRecord,
    pub max_differences: Vec<(f64, usize)>,
    pub reasons: Vec<String>,
}

/// Contents of `results.json`. `eigenvalues` and `residuals` belong to the
/// primary run: the only run of a spectrum experiment, the largest radius
/// of a ladder, the test side of a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Results {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub verdict: Outcome,
    pub model: Option<EssentialSpectrumModel>,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub solver: Option<SolverInfo>,
    pub cluster_report: Option<ClusterReport>,
    pub ladder: Option<LadderRecord>,
    pub comparison: Option<ComparisonRecord>,
    pub probe: Option<ProbeSummary>,
}

impl Results {
    fn empty(cfg: &ExperimentConfig, verdict: Outcome) -> Self {
        Results {
            experiment: cfg.experiment,
            config: cfg.clone(),
            verdict,
            model: None,
            eigenvalues: vec![],
            residuals: vec![],
            solver: None,
            cluster_report: None,
            ladder: None,
            comparison: None,
            probe: None,
        }
    }
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions {
        tol: cfg.solver.tol,
        method: cfg.solver.method,
        seed: cfg.seed,
        ..SolverOptions::default()
    }
}

fn pipeline(cfg: &ExperimentConfig) -> PipelineConfig {
    PipelineConfig {
        domain: cfg.domain.clone(),
        field: cfg.field,
        boundary: cfg.boundary,
        h: cfg.h,
        window: cfg.solver.window,
        cap: cfg.solver.cap,
        delta: cfg.delta,
        solver: solver_options(cfg),
    }
}

/// Run the experiment and write its files into `cfg.output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Results, SpectraError> {
    let results = compute(cfg)?;
    write_outputs(&cfg.output.dir, &results).map_err(|e| SpectraError::InvalidArgument(format!("writing results: {e}")))?;
    Ok(results)
}

/// The experiment without touching the filesystem, except for the optional
/// matrix export.
pub fn compute(cfg: &ExperimentConfig) -> Result<Results, SpectraError> {
    match cfg.experiment {
        Experiment::Landau => {
            let b = cfg.field.strength_at_infinity().ok_or_else(|| {
                SpectraError::InvalidArgument("landau experiments need a field with a limit at infinity".into())
            })?;
            let mut r = Results::empty(cfg, Outcome::Success);
            r.model = Some(landau_levels(b, cfg.domain.dimension, cfg.cutoff)?);
            Ok(r)
        }
        Experiment::Spectrum => spectrum(cfg),
        Experiment::Ladder => {
            let model = model_for_field(&cfg.field, cfg.cutoff)?;
            let ladder = run_ladder(&pipeline(cfg), &cfg.ladder_radii, &model)?;
            let last = ladder.rungs.last().expect("non-empty ladder");
            let mut r = Results::empty(cfg, if ladder.certified { Outcome::Success } else { Outcome::Inconclusive });
            r.eigenvalues = last.spectrum.eigenvalues.clone();
            r.residuals = last.spectrum.residuals.clone();
            r.solver = Some(last.spectrum.info.clone());
            r.cluster_report = Some(last.report.clone());
            r.ladder = Some(LadderRecord::from(&ladder));
            r.model = Some(model);
            Ok(r)
        }
        Experiment::Compare => {
            let test = pipeline(cfg);
            let mut reference = test.clone();
            reference.domain.obstacle = Obstacle::None;
            reference.field = cfg.reference_field;
            let c = ladder_compare(&reference, &test, &cfg.ladder_radii, cfg.cutoff)?;
            let last = c.test.rungs.last().expect("non-empty ladder");
            let mut r = Results::empty(cfg, c.verdict.into());
            r.eigenvalues = last.spectrum.eigenvalues.clone();
            r.residuals = last.spectrum.residuals.clone();
            r.solver = Some(last.spectrum.info.clone());
            r.cluster_report = Some(last.report.clone());
            r.model = Some(c.model.clone());
            r.comparison = Some(ComparisonRecord {
                reference: LadderRecord::from(&c.reference),
                test: LadderRecord::from(&c.test),
                max_differences: c.max_differences,
                reasons: c.reasons,
            });
            Ok(r)
        }
        Experiment::Probe => {
            let seeds: Vec<u64> = (0..cfg.probe.seeds as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
            let gamma = match cfg.boundary {
                crate::assembly::InnerBoundary::Robin { gamma } => gamma,
                crate::assembly::InnerBoundary::Dirichlet => {
                    return Err(SpectraError::InvalidArgument("the probe needs a robin boundary".into()))
                }
            };
            let p = run_probe(&cfg.domain, &cfg.field, gamma, cfg.h, cfg.probe.k, cfg.probe.refine, &seeds)?;
            let mut r = Results::empty(cfg, p.verdict().into());
            r.probe = Some(p);
            Ok(r)
        }
    }
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Results, SpectraError> {
    let model = model_for_field(&cfg.field, cfg.cutoff)?;
    let (spectrum, report) = if cfg.solver.window_given {
        let s = run_window(&pipeline(cfg), cfg.domain.truncation_radius)?;
        let report = cluster_report(&s, &model, cfg.delta, cfg.solver.window)?;
        (s, Some(report))
    } else {
        let op = build_operator(&cfg.domain, &cfg.field, cfg.boundary, cfg.h)?;
        let s = match eigs_lowest(&op, cfg.solver.k.min(op.dim()), &solver_options(cfg)) {
            Ok(s) => s,
            Err(e @ SolveError::NotConverged { .. }) => {
                let mut s = e.partial().expect("carries partial results").clone();
                s.info.certification = Certification::Uncertified;
                s
            }
            Err(e) => return Err(e.into()),
        };
        (s, None)
    };
    if cfg.output.matrix {
        export_matrix(cfg)?;
    }
    let outcome = if spectrum.certified() { Outcome::Success } else { Outcome::Inconclusive };
    let mut r = Results::empty(cfg, outcome);
    r.model = Some(model);
    r.eigenvalues = spectrum.eigenvalues.clone();
    r.residuals = spectrum.residuals.clone();
    r.solver = Some(spectrum.info.clone());
    r.cluster_report = report;
    Ok(r)
}

fn export_matrix(cfg: &ExperimentConfig) -> Result<(), SpectraError> {
    let op = build_operator(&cfg.domain, &cfg.field, cfg.boundary, cfg.h)?;
    let io = |e: std::io::Error| SpectraError::InvalidArgument(format!("matrix export: {e}"));
    fs::create_dir_all(&cfg.output.dir).map_err(io)?;
    let file = fs::File::create(cfg.output.dir.join("matrix.mtx")).map_err(io)?;
    op.write_coordinate(std::io::BufWriter::new(file)).map_err(io)
}

pub fn write_outputs(dir: &Path, r: &Results) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(r).map_err(std::io::Error::other)?;
    json.push('\n');
    fs::File::create(dir.join("results.json"))?.write_all(json.as_bytes())?;

    let mut w = csv::Writer::from_path(dir.join("eigenvalues.csv"))?;
    w.write_record(["index", "value", "residual"])?;
    for (i, (v, res)) in r.eigenvalues.iter().zip(&r.residuals).enumerate() {
        w.write_record([i.to_string(), fmt(*v), fmt(*res)])?;
    }
    w.flush()?;

    let series: Vec<(&str, &LadderRecord)> = match (&r.ladder, &r.comparison) {
        (Some(l), _) => vec![("test", l)],
        (None, Some(c)) => vec![("reference", &c.reference), ("test", &c.test)],
        _ => vec![],
    };
    if !series.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("ladder.csv"))?;
        w.write_record(["series", "radius", "level", "count", "off_cluster_fraction"])?;
        for (name, ladder) in series {
            for run in &ladder.runs {
                let Some(report) = &run.report else { continue };
                for l in &report.levels {
                    w.write_record([
                        name.to_string(),
                        fmt(run.radius),
                        fmt(l.level),
                        l.count.to_string(),
                        fmt(report.off_cluster_fraction),
                    ])?;
                }
            }
        }
        w.flush()?;
    }
    Ok(())
}

/// Same text as the JSON output: the shortest representation that parses
/// back to the same `f64`.
fn fmt(x: f64) -> String {
    serde_json::to_string(&x).expect("f64 always serializes")
}
