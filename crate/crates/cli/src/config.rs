//! Run configuration: a flat TOML file with `[problem]`, `[grid]`,
//! `[integrator]` and `[output]` sections. Expressions are quoted strings.
//! See `docs/config.md` for the full schema.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use pide_core::lift::SmoothFunction;
use pide_core::model::{
    self, BoundaryConditions, InitialState, InputSignal, Kernel, PiecewiseFunction, ProblemSpec,
};
use pide_core::ode::IntegratorConfig;

use crate::CliError;

pub const DEFAULT_STEP_COUNT: usize = 4000;
pub const DEFAULT_SAMPLE_COUNT: usize = 101;

// Default consistency-test function: cos(pi x) satisfies the homogeneous
// Neumann-type left boundary condition of the built-in examples.
const DEFAULT_XI: [&str; 3] = ["cos(pi*x)", "-pi*sin(pi*x)", "-pi^2*cos(pi*x)"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: ProblemSection,
    grid: GridSection,
    #[serde(default)]
    integrator: IntegratorSection,
    output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    builtin: Option<String>,
    theta: Option<PiecewiseSection>,
    sigma: Option<PiecewiseSection>,
    lambda: Option<PiecewiseSection>,
    phi: Option<String>,
    alpha0: Option<f64>,
    beta0: Option<f64>,
    alpha1: Option<f64>,
    beta1: Option<f64>,
    input: Option<String>,
    #[serde(default)]
    input_scale_with_n: bool,
    #[serde(default)]
    input_exact_zeros: Vec<f64>,
    initial: Option<PiecewiseSection>,
    #[serde(default)]
    initial_point_values: Vec<[f64; 2]>,
    xi: Option<String>,
    xi_d1: Option<String>,
    xi_d2: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PiecewiseSection {
    breakpoints: Vec<f64>,
    pieces: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    sweep: Vec<usize>,
    reference_n: usize,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct IntegratorSection {
    #[serde(rename = "T")]
    t_final: Option<f64>,
    step_count: Option<usize>,
    sample_count: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: PathBuf,
}

/// A fully resolved run: problem data plus experiment parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem_name: String,
    pub spec: ProblemSpec,
    pub initial: InitialState,
    pub input: InputSignal,
    /// User-specified consistency-test function (`xi` keys in `[problem]`).
    pub xi: SmoothFunction,
    pub sweep: Vec<usize>,
    pub reference_n: usize,
    pub t_final: f64,
    pub integrator: IntegratorConfig,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Loads and validates a TOML config file.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let raw: RawConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_raw(raw)
    }

    /// A built-in problem (`example1` or `example2`) with the default
    /// experiment parameters: sweep 10..=100 step 10, reference 200, T = 1.
    pub fn builtin(name: &str) -> Result<RunConfig, CliError> {
        let (spec, initial, input) = resolve_builtin(name)?;
        let xi = SmoothFunction::parse(DEFAULT_XI[0], DEFAULT_XI[1], DEFAULT_XI[2])
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(RunConfig {
            problem_name: name.to_owned(),
            spec,
            initial,
            input,
            xi,
            sweep: (10..=100).step_by(10).collect(),
            reference_n: 200,
            t_final: 1.0,
            integrator: IntegratorConfig::new(DEFAULT_STEP_COUNT, DEFAULT_SAMPLE_COUNT)
                .expect("default integrator config is valid"),
            out_dir: PathBuf::from("."),
        })
    }

    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = dir.into();
        self
    }

    fn from_raw(raw: RawConfig) -> Result<RunConfig, CliError> {
        let cfg = config_err(build_problem(&raw.problem))?;
        let (problem_name, spec, initial, input) = cfg;
        let xi = config_err(build_xi(&raw.problem))?;

        let sweep = raw.grid.sweep;
        if sweep.is_empty() {
            return Err(CliError::Config("[grid] sweep must be non-empty".into()));
        }
        if sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config(
                "[grid] sweep must be strictly increasing".into(),
            ));
        }
        let reference_n = raw.grid.reference_n;
        if reference_n <= *sweep.last().unwrap() {
            return Err(CliError::Config(format!(
                "[grid] reference_n = {reference_n} must exceed every sweep entry"
            )));
        }

        let t_final = raw.integrator.t_final.unwrap_or(1.0);
        if t_final.is_nan() || t_final <= 0.0 {
            return Err(CliError::Config(format!(
                "[integrator] T = {t_final} must be positive"
            )));
        }
        let integrator = config_err(IntegratorConfig::new(
            raw.integrator.step_count.unwrap_or(DEFAULT_STEP_COUNT),
            raw.integrator.sample_count.unwrap_or(DEFAULT_SAMPLE_COUNT),
        ))?;

        Ok(RunConfig {
            problem_name,
            spec,
            initial,
            input,
            xi,
            sweep,
            reference_n,
            t_final,
            integrator,
            out_dir: raw.output.dir,
        })
    }
}

fn config_err<T>(r: pide_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn resolve_builtin(
    name: &str,
) -> Result<(ProblemSpec, InitialState, InputSignal), CliError> {
    match name {
        "example1" => config_err(model::make_example1()),
        "example2" => config_err(model::make_example2()),
        other => Err(CliError::Config(format!(
            "unknown builtin problem `{other}` (expected `example1` or `example2`)"
        ))),
    }
}

type Problem = (String, ProblemSpec, InitialState, InputSignal);

fn build_problem(section: &ProblemSection) -> pide_core::Result<Problem> {
    if let Some(name) = &section.builtin {
        let inline_given = section.theta.is_some()
            || section.sigma.is_some()
            || section.lambda.is_some()
            || section.phi.is_some()
            || section.input.is_some()
            || section.initial.is_some();
        if inline_given {
            return Err(pide_core::Error::Invalid {
                what: "problem section",
                why: "give either `builtin` or an inline problem, not both".into(),
            });
        }
        let (spec, initial, input) = match name.as_str() {
            "example1" => model::make_example1()?,
            "example2" => model::make_example2()?,
            other => {
                return Err(pide_core::Error::Invalid {
                    what: "problem section",
                    why: format!("unknown builtin `{other}`"),
                })
            }
        };
        return Ok((name.clone(), spec, initial, input));
    }

    let piecewise = |s: Option<&PiecewiseSection>, key: &'static str| {
        let s = s.ok_or(pide_core::Error::Invalid {
            what: "problem section",
            why: format!("inline problems need `{key}`"),
        })?;
        let pieces: Vec<&str> = s.pieces.iter().map(String::as_str).collect();
        PiecewiseFunction::from_strs(&s.breakpoints, &pieces)
    };
    let theta = piecewise(section.theta.as_ref(), "theta")?;
    let sigma = piecewise(section.sigma.as_ref(), "sigma")?;
    let lambda = piecewise(section.lambda.as_ref(), "lambda")?;
    let phi = Kernel::parse(section.phi.as_deref().unwrap_or("0"))?;
    let bc = BoundaryConditions::new(
        section.alpha0.unwrap_or(0.0),
        section.beta0.unwrap_or(0.0),
        section.alpha1.unwrap_or(0.0),
        section.beta1.unwrap_or(0.0),
    )?;
    let spec = ProblemSpec::new(theta, sigma, lambda, phi, bc)?;

    let mut input = InputSignal::parse(section.input.as_deref().unwrap_or("0"))?;
    if section.input_scale_with_n {
        input = input.scaled_with_n();
    }
    if !section.input_exact_zeros.is_empty() {
        input = input.with_exact_zeros(&section.input_exact_zeros);
    }

    let mut initial = match &section.initial {
        Some(_) => InitialState::new(piecewise(section.initial.as_ref(), "initial")?),
        None => InitialState::zero(),
    };
    for [x, v] in &section.initial_point_values {
        initial = initial.with_point_value(*x, *v);
    }

    Ok(("inline".to_owned(), spec, initial, input))
}

fn build_xi(section: &ProblemSection) -> pide_core::Result<SmoothFunction> {
    match (&section.xi, &section.xi_d1, &section.xi_d2) {
        (None, None, None) => SmoothFunction::parse(DEFAULT_XI[0], DEFAULT_XI[1], DEFAULT_XI[2]),
        (Some(xi), Some(d1), Some(d2)) => SmoothFunction::parse(xi, d1, d2),
        _ => Err(pide_core::Error::Invalid {
            what: "problem section",
            why: "`xi`, `xi_d1` and `xi_d2` must be given together".into(),
        }),
    }
}
