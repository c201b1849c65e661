//! The three experiment commands: grid-refinement convergence studies,
//! property-certification sweeps and single simulations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DVector;

use pide_core::analysis::{
    self, accuracy_residual, analyticity_constant, growth_fit, log_spaced, sobolev_sweep_stat,
    write_properties_csv, PropertyReport, ACCURACY_SLOPE_MIN, SOBOLEV_UNIFORMITY_FACTOR,
    UNIFORMITY_RATIO_MAX,
};
use pide_core::disc::{assemble, Discretization, Grid};
use pide_core::gridops::{extend_eval, l2_diff_cross_grid, norm_inf, restrict, GridFunction};
use pide_core::lift::build_nu;
use pide_core::ode::{simulate, Trajectory};

use crate::config::RunConfig;
use crate::plot;
use crate::CliError;

/// Which error the convergence study measures against the reference grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// `sup_t || S_ref v_ref(t) - S_n v_n(t) ||_{L^2(0,1)}`
    L2,
    /// `sup_t || R_n(S_ref v_ref(t)) - v_n(t) ||_inf`
    Inf,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::L2 => "l2",
            ErrorKind::Inf => "inf",
        }
    }
}

/// Per-n errors against the reference-grid solution, plus the sampling
/// metadata needed to reproduce them.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub kind: ErrorKind,
    pub reference_n: usize,
    pub rows: Vec<(usize, f64)>,
    pub sample_count: usize,
    pub step_count: usize,
    pub t_final: f64,
}

fn simulate_problem(config: &RunConfig, n: usize) -> pide_core::Result<(Discretization, Trajectory)> {
    let grid = Grid::new(n)?;
    let d = assemble(&config.spec, &grid)?;
    let v0 = restrict(|x| config.initial.eval(x), &grid)?;
    let traj = simulate(&d, &v0, &config.input, config.t_final, &config.integrator)?;
    Ok((d, traj))
}

/// Simulates the configured problem on a single grid without writing files.
pub fn simulate_grid(config: &RunConfig, n: usize) -> Result<Trajectory, CliError> {
    let (_, traj) = numerical(simulate_problem(config, n), &format!("simulate n = {n}"))?;
    Ok(traj)
}

/// Sweep-level parallelism cap: `PIDE_LAB_THREADS`, defaulting to the
/// available hardware parallelism.
fn sweep_threads(task_count: usize) -> usize {
    let cap = std::env::var("PIDE_LAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|v| v.get())
                .unwrap_or(1)
        });
    cap.min(task_count).max(1)
}

/// Runs `f` over `items` on a capped pool; results come back in input order.
fn run_parallel<T, F>(items: &[usize], f: F) -> Vec<pide_core::Result<T>>
where
    T: Send,
    F: Fn(usize) -> pide_core::Result<T> + Sync,
{
    let slots: Vec<Mutex<Option<pide_core::Result<T>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let workers = sweep_threads(items.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = cursor.fetch_add(1, Ordering::Relaxed);
                if idx >= items.len() {
                    break;
                }
                let result = f(items[idx]);
                *slots[idx].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

fn numerical<T>(r: pide_core::Result<T>, context: &str) -> Result<T, CliError> {
    r.map_err(|e| CliError::Numerical(format!("{context}: {e}")))
}

fn open_out(dir: &PathBuf, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = File::create(&path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// Simulates the reference grid once and every sweep grid, measures the
/// requested error at each sample time, and writes `converge.csv` and
/// `converge.svg` into the output directory.
pub fn cmd_converge(config: &RunConfig, kind: ErrorKind) -> Result<ConvergenceReport, CliError> {
    let (_, reference) = numerical(
        simulate_problem(config, config.reference_n),
        &format!("reference n = {}", config.reference_n),
    )?;

    let results = run_parallel(&config.sweep, |n| {
        let (_, traj) = simulate_problem(config, n)?;
        let mut err = 0.0f64;
        for (k, state) in traj.states.iter().enumerate() {
            let vref = GridFunction::new(reference.grid, reference.states[k].clone())?;
            let e = match kind {
                ErrorKind::L2 => {
                    let vn = GridFunction::new(traj.grid, state.clone())?;
                    l2_diff_cross_grid(&vref, &vn)
                }
                ErrorKind::Inf => {
                    let restricted = restrict(|x| Ok(extend_eval(&vref, x)), &traj.grid)?;
                    norm_inf(&(restricted - state))
                }
            };
            err = err.max(e);
        }
        Ok(err)
    });

    let mut rows = Vec::with_capacity(config.sweep.len());
    for (&n, result) in config.sweep.iter().zip(results) {
        rows.push((n, numerical(result, &format!("sweep n = {n}"))?));
    }

    let report = ConvergenceReport {
        kind,
        reference_n: config.reference_n,
        rows,
        sample_count: config.integrator.sample_count,
        step_count: config.integrator.step_count,
        t_final: config.t_final,
    };

    let mut csv = open_out(&config.out_dir, "converge.csv")?;
    write_converge_csv(&mut csv, &report).map_err(io_err)?;
    csv.flush().map_err(io_err)?;

    let svg = open_out(&config.out_dir, "converge.svg")?;
    let (ns, errs): (Vec<usize>, Vec<f64>) = report.rows.iter().cloned().unzip();
    plot::write_loglog_svg(
        svg,
        &format!(
            "{} error vs reference n = {}",
            report.kind.name(),
            report.reference_n
        ),
        "n",
        "error",
        &ns,
        &errs,
    )
    .map_err(io_err)?;

    Ok(report)
}

fn write_converge_csv<W: Write>(w: &mut W, report: &ConvergenceReport) -> std::io::Result<()> {
    writeln!(w, "n,error")?;
    for (n, err) in &report.rows {
        writeln!(w, "{n},{err:.16e}")?;
    }
    writeln!(
        w,
        "# kind={} reference_n={} T={} step_count={} sample_count={} sup_over=sampled_output_times",
        report.kind.name(),
        report.reference_n,
        report.t_final,
        report.step_count,
        report.sample_count
    )
}

fn uniformity_pass(values: &[f64]) -> (f64, bool) {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    (ratio, ratio <= UNIFORMITY_RATIO_MAX)
}

/// Runs the full property-certification sweep and writes `properties.csv`.
///
/// Properties: consistency residual decay for `xi = nu` and the
/// user-specified `xi`, analyticity constants for k = 0 and 1, the growth
/// bound fit, and the Sobolev ratio statistic.
pub fn cmd_properties(config: &RunConfig) -> Result<Vec<PropertyReport>, CliError> {
    numerical(
        analysis::check_sweep_guard(&config.sweep),
        "property sweep",
    )?;
    let sweep = config.sweep.clone();

    let discs: Vec<Discretization> = {
        let results = run_parallel(&sweep, |n| assemble(&config.spec, &Grid::new(n)?));
        let mut discs = Vec::with_capacity(sweep.len());
        for (&n, r) in sweep.iter().zip(results) {
            discs.push(numerical(r, &format!("assembly n = {n}"))?);
        }
        discs
    };
    let hs: Vec<f64> = discs.iter().map(|d| d.grid().h()).collect();
    let mut reports = Vec::new();

    // consistency residuals for nu and the user xi
    let nu = numerical(
        build_nu(&config.spec.bc, 3.0).and_then(|nu| nu.as_smooth()),
        "lift construction",
    )?;
    for (name, xi) in [("accuracy_nu", &nu), ("accuracy_xi", &config.xi)] {
        let mut values = Vec::with_capacity(discs.len());
        for d in &discs {
            values.push(numerical(
                accuracy_residual(&config.spec, d, xi),
                name,
            )?);
        }
        let slope = analysis::log_log_slope(&hs, &values);
        let report = PropertyReport::new(
            name,
            sweep.clone(),
            values,
            vec![("slope".into(), slope)],
            slope >= ACCURACY_SLOPE_MIN,
        );
        reports.push(numerical(report, name)?);
    }

    // analyticity constants over a log-spaced time grid
    let tgrid = log_spaced(1e-3, config.t_final, 40);
    let pns: Vec<_> = discs.iter().map(|d| d.pn_dense()).collect();
    for k in [0usize, 1] {
        let name = format!("analyticity_k{k}");
        let results = run_parallel(&sweep, |n| {
            let idx = sweep.iter().position(|&m| m == n).unwrap();
            analyticity_constant(&pns[idx], k, &tgrid)
        });
        let mut values = Vec::with_capacity(discs.len());
        for (&n, r) in sweep.iter().zip(results) {
            values.push(numerical(r, &format!("{name} at n = {n}"))?);
        }
        let (ratio, pass) = uniformity_pass(&values);
        let mt_estimate = values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            .powf(1.0 / (k as f64 + 1.0));
        let report = PropertyReport::new(
            name.clone(),
            sweep.clone(),
            values,
            vec![("max_min_ratio".into(), ratio), ("MT_est".into(), mt_estimate)],
            pass,
        );
        reports.push(numerical(report, &name)?);
    }

    // uniform growth bound over the whole sweep
    let mut growth_times = vec![0.0];
    growth_times.extend_from_slice(&tgrid);
    let fit = numerical(growth_fit(&pns, &growth_times), "growth_fit")?;
    let report = PropertyReport::new(
        "growth",
        sweep.clone(),
        fit.sup_norms.clone(),
        vec![("M".into(), fit.m), ("omega".into(), fit.omega)],
        true,
    );
    reports.push(numerical(report, "growth")?);

    // Sobolev ratio statistic over seeded random unit vectors
    let results = run_parallel(&sweep, |n| {
        let idx = sweep.iter().position(|&m| m == n).unwrap();
        sobolev_sweep_stat(&discs[idx], 200, 0xb0b0 + n as u64)
    });
    let mut values = Vec::with_capacity(discs.len());
    for (&n, r) in sweep.iter().zip(results) {
        values.push(numerical(r, &format!("sobolev at n = {n}"))?);
    }
    let pass = *values.last().unwrap() <= SOBOLEV_UNIFORMITY_FACTOR * values[0];
    let factor = values.last().unwrap() / values[0];
    let report = PropertyReport::new(
        "sobolev",
        sweep.clone(),
        values,
        vec![("growth_factor".into(), factor)],
        pass,
    );
    reports.push(numerical(report, "sobolev")?);

    let mut csv = open_out(&config.out_dir, "properties.csv")?;
    write_properties_csv(&mut csv, &reports).map_err(io_err)?;
    csv.flush().map_err(io_err)?;

    Ok(reports)
}

/// Simulates one grid size and writes `trajectory_n<k>.csv` and
/// `surface_n<k>.svg`.
pub fn cmd_simulate(config: &RunConfig, n: usize) -> Result<Trajectory, CliError> {
    let (_, traj) = numerical(simulate_problem(config, n), &format!("simulate n = {n}"))?;

    let mut csv = open_out(&config.out_dir, &format!("trajectory_n{n}.csv"))?;
    traj.write_csv(&mut csv).map_err(io_err)?;
    csv.flush().map_err(io_err)?;

    let svg = open_out(&config.out_dir, &format!("surface_n{n}.svg"))?;
    plot::write_heatmap_svg(
        svg,
        &format!("S_n v_n over (x, t), n = {n}, {}", config.problem_name),
        &traj,
    )
    .map_err(io_err)?;

    Ok(traj)
}

/// Max over sample times of the first-component gap between a reference
/// trajectory and a coarse one: the discrete proxy for the boundary value
/// `u(0, t)`.
pub fn boundary_gap(reference: &Trajectory, coarse: &Trajectory) -> f64 {
    reference
        .states
        .iter()
        .zip(coarse.states.iter())
        .map(|(r, c)| (r[0] - c[0]).abs())
        .fold(0.0, f64::max)
}

/// First state vector of a freshly simulated grid, exposed for tests.
pub fn initial_vector(config: &RunConfig, n: usize) -> Result<DVector<f64>, CliError> {
    let grid = numerical(Grid::new(n), "grid")?;
    numerical(restrict(|x| config.initial.eval(x), &grid), "initial state")
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("i/o failure: {e}"))
}
