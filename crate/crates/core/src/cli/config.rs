//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use crate::assembly::InnerBoundary;
use crate::eigensolve::MethodChoice;
use crate::field::{FieldKind, FieldSpec};
use crate::geometry::{DomainSpec, Obstacle, TruncationShape};

/// Every accepted key with its default, as shown by `--help`.
pub const KEYS: &str = "\
Configuration keys (one `key = value` per line, `#` starts a comment):
  experiment                 spectrum | compare | ladder | probe | landau   [spectrum]
  domain.dimension           2 | 3                                          [2]
  domain.shape               disk | box (truncation)                        [disk]
  domain.radius              truncation radius R                            [8]
  domain.obstacle            none | disk | box                              [none]
  domain.obstacle.center     comma-separated coordinates                    [origin]
  domain.obstacle.radius     disk obstacle radius                           [1]
  domain.obstacle.half_widths  comma-separated box half widths              [1, ...]
  field.kind                 constant | radial_decay | radial_growth        [constant]
  field.b                    constant field strength                        [1]
  field.b0, field.power      radial field parameters                        [1, 2]
  reference.field.*          compare only: field of the reference run       [field.*]
  gamma                      Robin parameter on the obstacle boundary       [0]
  boundary                   robin | dirichlet                              [robin]
  grid.h                     lattice spacing                                [0.2]
  solver.k                   eigenvalues when no window is given            [10]
  solver.tol                 residual tolerance                             [1e-8]
  solver.window              a, b (closed analysis window)                  [0, 6b]
  solver.cap                 most eigenvalues accepted in a window          [5000]
  solver.method              auto | dense | lanczos                         [auto]
  ladder.radii               ascending truncation radii                     [domain.radius]
  analysis.delta             cluster half width                             [0.15b]
  analysis.cutoff            highest Landau level reported                  [window end]
  probe.k                    singular values of the resolvent difference    [10]
  probe.refine               also run at h/2                                [true]
  probe.seeds                number of random boundary-identity checks      [3]
  output.dir                 output directory                               [results]
  output.matrix              write the operator as matrix.mtx (spectrum)    [false]
  seed                       random seed                                    [0]
Here b is the field's reference strength: b, or b0 for radial fields, or 1 if zero.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Spectrum,
    Compare,
    Ladder,
    Probe,
    Landau,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub k: usize,
    pub tol: f64,
    pub window: [f64; 2],
    /// False when the window is the default rather than configured.
    pub window_given: bool,
    pub cap: usize,
    pub method: MethodChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub k: usize,
    pub refine: bool,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub matrix: bool,
}

/// A validated experiment. Serialized verbatim as the config echo in
/// `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub domain: DomainSpec,
    pub field: FieldSpec,
    pub reference_field: FieldSpec,
    pub gamma: f64,
    pub boundary: InnerBoundary,
    pub h: f64,
    pub solver: SolverConfig,
    pub ladder_radii: Vec<f64>,
    pub delta: f64,
    pub cutoff: f64,
    pub probe: ProbeConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

/// Strength that sets the default window and cluster width.
pub fn reference_strength(field: &FieldSpec) -> f64 {
    let b = match field.kind {
        FieldKind::Constant { b } => b,
        FieldKind::RadialDecay { b0, .. } | FieldKind::RadialGrowth { b0, .. } => b0,
    }
    .abs();
    if b > 0.0 {
        b
    } else {
        1.0
    }
}

const KNOWN: &[&str] = &[
    "experiment",
    "domain.dimension",
    "domain.shape",
    "domain.radius",
    "domain.obstacle",
    "domain.obstacle.center",
    "domain.obstacle.radius",
    "domain.obstacle.half_widths",
    "field.kind",
    "field.b",
    "field.b0",
    "field.power",
    "reference.field.kind",
    "reference.field.b",
    "reference.field.b0",
    "reference.field.power",
    "gamma",
    "boundary",
    "grid.h",
    "solver.k",
    "solver.tol",
    "solver.window",
    "solver.cap",
    "solver.method",
    "ladder.radii",
    "analysis.delta",
    "analysis.cutoff",
    "probe.k",
    "probe.refine",
    "probe.seeds",
    "output.dir",
    "output.matrix",
    "seed",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.map.get(key).map(|(l, _)| *l),
            message: message.into(),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(key, format!("{key} must be {what}, got `{v}`"))),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.parse::<f64>(key, "a real number")? {
            Some(x) if !x.is_finite() => Err(self.err(key, format!("{key} must be finite"))),
            x => Ok(x),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.real(key)? {
            Some(x) if x <= 0.0 => Err(self.err(key, format!("{key} must be positive"))),
            x => Ok(x),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.parse::<usize>(key, "a non-negative integer")? {
            Some(0) => Err(self.err(key, format!("{key} must be at least 1"))),
            x => Ok(x),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|t| match t.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(self.err(key, format!("{key} must be a comma-separated list of finite reals, got `{v}`"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn choice<'a>(&self, key: &str, options: &[&'a str]) -> Result<Option<&'a str>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => options
                .iter()
                .find(|o| **o == v)
                .copied()
                .map(Some)
                .ok_or_else(|| self.err(key, format!("{key} must be one of {}, got `{v}`", options.join(" | ")))),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        Ok(self.choice(key, &["true", "false"])?.map(|v| v == "true"))
    }

    fn field(&self, prefix: &str, dimension: usize, fallback: Option<FieldSpec>) -> Result<FieldSpec, ConfigError> {
        let key = |k: &str| format!("{prefix}.{k}");
        let given = ["kind", "b", "b0", "power"].iter().any(|k| self.has(&key(k)));
        if let (false, Some(f)) = (given, fallback) {
            return Ok(f);
        }
        let kind = self.choice(&key("kind"), &["constant", "radial_decay", "radial_growth"])?.unwrap_or("constant");
        let reject = |k: &str| -> Result<(), ConfigError> {
            if self.has(&key(k)) {
                Err(self.err(&key(k), format!("{} does not apply to {kind} fields", key(k))))
            } else {
                Ok(())
            }
        };
        let spec = if kind == "constant" {
            reject("b0")?;
            reject("power")?;
            FieldSpec::constant(self.real(&key("b"))?.unwrap_or(1.0), dimension)
        } else {
            reject("b")?;
            let b0 = self.real(&key("b0"))?.unwrap_or(1.0);
            let power = self.real(&key("power"))?.unwrap_or(2.0);
            if kind == "radial_decay" {
                FieldSpec::radial_decay(b0, power, dimension)
            } else {
                FieldSpec::radial_growth(b0, power, dimension)
            }
        };
        spec.validate().map_err(|e| self.err(&key("kind"), e.to_string()))?;
        Ok(spec)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fail = |message: String| ConfigError {
            line: Some(line),
            message,
        };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| fail(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN.contains(&key) {
            return Err(fail(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(fail(format!("{key} has no value")));
        }
        if let Some((first, _)) = map.insert(key.to_string(), (line, value.to_string())) {
            return Err(fail(format!("{key} already set on line {first}")));
        }
    }
    build(&Entries { map })
}

fn build(e: &Entries) -> Result<ExperimentConfig, ConfigError> {
    let experiment = match e.choice("experiment", &["spectrum", "compare", "ladder", "probe", "landau"])? {
        None | Some("spectrum") => Experiment::Spectrum,
        Some("compare") => Experiment::Compare,
        Some("ladder") => Experiment::Ladder,
        Some("probe") => Experiment::Probe,
        Some(_) => Experiment::Landau,
    };
    let dimension = e.parse::<usize>("domain.dimension", "2 or 3")?.unwrap_or(2);
    if !(2..=3).contains(&dimension) {
        return Err(e.err("domain.dimension", "domain.dimension must be 2 or 3"));
    }
    let shape = match e.choice("domain.shape", &["disk", "box"])? {
        Some("box") => TruncationShape::Box,
        _ => TruncationShape::Disk,
    };
    let radius = e.positive("domain.radius")?.unwrap_or(8.0);

    let kind = e.choice("domain.obstacle", &["none", "disk", "box"])?.unwrap_or("none");
    let center = e.list("domain.obstacle.center")?.unwrap_or_else(|| vec![0.0; dimension]);
    if center.len() != dimension {
        return Err(e.err("domain.obstacle.center", format!("domain.obstacle.center needs {dimension} coordinates")));
    }
    let only_for = |key: &str, wanted: &str| -> Result<(), ConfigError> {
        if e.has(key) && kind != wanted {
            Err(e.err(key, format!("{key} requires domain.obstacle = {wanted}")))
        } else {
            Ok(())
        }
    };
    only_for("domain.obstacle.radius", "disk")?;
    only_for("domain.obstacle.half_widths", "box")?;
    if kind == "none" && e.has("domain.obstacle.center") {
        return Err(e.err("domain.obstacle.center", "domain.obstacle.center requires an obstacle"));
    }
    let obstacle = match kind {
        "disk" => Obstacle::Disk {
            center,
            radius: e.positive("domain.obstacle.radius")?.unwrap_or(1.0),
        },
        "box" => {
            let half_widths = e.list("domain.obstacle.half_widths")?.unwrap_or_else(|| vec![1.0; dimension]);
            if half_widths.len() != dimension || half_widths.iter().any(|&w| w <= 0.0) {
                return Err(e.err(
                    "domain.obstacle.half_widths",
                    format!("domain.obstacle.half_widths needs {dimension} positive values"),
                ));
            }
            Obstacle::Box { center, half_widths }
        }
        _ => Obstacle::None,
    };
    let domain = DomainSpec::free(dimension, radius, shape).with_obstacle(obstacle);

    let field = e.field("field", dimension, None)?;
    let reference_field = e.field("reference.field", dimension, Some(field))?;
    if experiment != Experiment::Compare {
        if let Some(k) = ["kind", "b", "b0", "power"].iter().map(|k| format!("reference.field.{k}")).find(|k| e.has(k)) {
            return Err(e.err(&k, format!("{k} only applies to compare experiments")));
        }
    }

    let gamma = e.real("gamma")?.unwrap_or(0.0);
    let boundary = match e.choice("boundary", &["robin", "dirichlet"])? {
        Some("dirichlet") => {
            if e.has("gamma") {
                return Err(e.err("gamma", "gamma does not apply to a dirichlet boundary"));
            }
            InnerBoundary::Dirichlet
        }
        _ => InnerBoundary::Robin { gamma },
    };
    let h = e.positive("grid.h")?.unwrap_or(0.2);

    let b = reference_strength(&reference_field);
    let window = match e.list("solver.window")? {
        Some(w) if w.len() == 2 && w[0] < w[1] => [w[0], w[1]],
        Some(_) => return Err(e.err("solver.window", "solver.window must be two ascending values `a, b`")),
        None => [0.0, 6.0 * b],
    };
    let tol = e.positive("solver.tol")?.unwrap_or(1e-8);
    let method = match e.choice("solver.method", &["auto", "dense", "lanczos"])? {
        Some("dense") => MethodChoice::Dense,
        Some("lanczos") => MethodChoice::Lanczos,
        _ => MethodChoice::Auto,
    };
    let solver = SolverConfig {
        k: e.count("solver.k")?.unwrap_or(10),
        tol,
        window,
        window_given: e.has("solver.window"),
        cap: e.count("solver.cap")?.unwrap_or(5000),
        method,
    };

    let ladder_radii = e.list("ladder.radii")?.unwrap_or_else(|| vec![radius]);
    if ladder_radii.iter().any(|&r| r <= 0.0) || ladder_radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(e.err("ladder.radii", "ladder.radii must be positive and strictly ascending"));
    }
    let delta = e.positive("analysis.delta")?.unwrap_or(0.15 * b);
    let cutoff = e.real("analysis.cutoff")?.unwrap_or(window[1]);

    let probe = ProbeConfig {
        k: e.count("probe.k")?.unwrap_or(10),
        refine: e.boolean("probe.refine")?.unwrap_or(true),
        seeds: e.count("probe.seeds")?.unwrap_or(3),
    };
    let output = OutputConfig {
        dir: PathBuf::from(e.raw("output.dir").unwrap_or("results")),
        matrix: e.boolean("output.matrix")?.unwrap_or(false),
    };
    let seed = e.parse::<u64>("seed", "a non-negative integer")?.unwrap_or(0);

    Ok(ExperimentConfig {
        experiment,
        domain,
        field,
        reference_field,
        gamma,
        boundary,
        h,
        solver,
        ladder_radii,
        delta,
        cutoff,
        probe,
        output,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landau_example_uses_defaults() {
        let c = parse_config("experiment = landau\nfield.b = 1\ndomain.dimension = 2").unwrap();
        assert_eq!(c.experiment, Experiment::Landau);
        assert_eq!(c.field, FieldSpec::constant(1.0, 2));
        assert_eq!(c.solver.window, [0.0, 6.0]);
        assert_eq!(c.delta, 0.15);
        assert_eq!(c.domain.obstacle, Obstacle::None);
    }

    #[test]
    fn negative_spacing_names_its_line() {
        let err = parse_config("# spacing\n\ngrid.h = -0.1").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(err.to_string(), "line 3: grid.h must be positive");
    }

    #[test]
    fn radii_list() {
        let c = parse_config("ladder.radii = 8, 10, 12").unwrap();
        assert_eq!(c.ladder_radii, vec![8.0, 10.0, 12.0]);
        assert!(parse_config("ladder.radii = 8, 8").is_err());
    }

    #[test]
    fn rejects_typos_duplicates_and_mismatches() {
        let line = |text: &str| parse_config(text).unwrap_err().line;
        assert_eq!(line("grid.h = 0.1\ngird.h = 0.2"), Some(2));
        assert_eq!(line("seed = 1\nseed = 2"), Some(2));
        assert_eq!(line("field.kind = radial_decay\nfield.b = 2"), Some(2));
        assert_eq!(line("domain.obstacle.radius = 2"), Some(1));
        assert_eq!(line("solver.tol = 0"), Some(1));
        assert_eq!(line("solver.k = ten"), Some(1));
        assert_eq!(line("gamma = nan"), Some(1));
        assert_eq!(line("reference.field.b = 2"), Some(1));
        assert_eq!(line("just text"), Some(1));
        assert_eq!(line("domain.dimension = 4"), Some(1));
    }

    #[test]
    fn full_compare_config() {
        let text = "
            experiment = compare   # obstacle vs free
            domain.obstacle = disk
            domain.obstacle.radius = 2
            field.kind = radial_growth
            reference.field.kind = constant
            reference.field.b = 2
            gamma = 0.5
            ladder.radii = 4, 6
            output.dir = out/run1
        ";
        let c = parse_config(text).unwrap();
        assert_eq!(c.field, FieldSpec::radial_growth(1.0, 2.0, 2));
        assert_eq!(c.reference_field, FieldSpec::constant(2.0, 2));
        // Window and width follow the reference field.
        assert_eq!(c.solver.window, [0.0, 12.0]);
        assert_eq!(c.boundary, InnerBoundary::Robin { gamma: 0.5 });
        assert_eq!(c.output.dir, PathBuf::from("out/run1"));
        assert_eq!(
            c.domain.obstacle,
            Obstacle::Disk {
                center: vec![0.0, 0.0],
                radius: 2.0
            }
        );
    }
}
