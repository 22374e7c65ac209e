//! Subcommand implementations. Every command builds its report in memory;
//! `dispatch` only adds file and stdout plumbing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use perisys::bounds::{theorem_verdicts, BoundsOptions, BoundsReport, TheoremId};
use perisys::eigen::{first_eigenpair, EigenPair};
use perisys::evolution::{run_transient, ClampStats, Scheme, StepperConfig};
use perisys::grid::{read_csv, write_csv, Component, Field, Grid, Trajectory};
use perisys::model::ProblemSpec;
use perisys::periodic::{
    epsilon_continuation, solve_periodic, Classification, PeriodicError, SigmaRamp,
};
use perisys::verify::{
    apriori_compliance, holder_spotcheck, picone_check, weak_residual, VerificationReport,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{load_config, RunConfig};
use crate::{json, presets, CliError, Command, Source};

const EIGEN_TOL: f64 = 1e-10;
/// Lower-bound sanity slack applied to `lambda0`.
const LOWER_BOUND_SLACK: f64 = 0.1;
pub const WEAK_TEST_FUNCTIONS: usize = 12;
pub const HOLDER_PAIRS: usize = 2000;
pub const PICONE_SAMPLES: usize = 10_000;

pub fn source_config(source: &Source) -> Result<RunConfig, CliError> {
    match (&source.config, &source.preset) {
        (Some(p), None) => load_config(p),
        (None, Some(n)) => presets::load(n),
        _ => Err(CliError::Config(vec![
            "give exactly one of --config or --preset".into(),
        ])),
    }
}

/// First eigenpairs for `p` and `q` on the problem grid.
pub fn eigenpairs(spec: &ProblemSpec) -> Result<(EigenPair, EigenPair), CliError> {
    let solve = |r: f64| {
        first_eigenpair(&spec.grid, r, EIGEN_TOL).map_err(|e| CliError::Solver(e.to_string()))
    };
    let ep = solve(spec.p)?;
    let eq = if spec.q == spec.p {
        ep.clone()
    } else {
        solve(spec.q)?
    };
    Ok((ep, eq))
}

fn bounds_options(cfg: &RunConfig, only: Option<TheoremId>, r_proxy: Option<f64>) -> BoundsOptions {
    let b = cfg.bounds.unwrap_or_default();
    BoundsOptions {
        eps0: b.eps0,
        s: b.s,
        r_proxy: r_proxy.or(b.r_proxy),
        only,
    }
}

/// Sup-norm stand-in from one period of the transient started at the
/// initial bump, times 2.
pub fn transient_r_proxy(cfg: &RunConfig, spec: &ProblemSpec) -> Result<f64, CliError> {
    let u0 = Field::sine_bump(&spec.grid, cfg.numerics.initial_amplitude);
    let run = run_transient(spec, &cfg.stepper(spec), &u0, &u0, spec.steps)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let sup = run
        .trajectory
        .sup(Component::U)
        .max(run.trajectory.sup(Component::V));
    Ok(2.0 * sup)
}

pub fn check(
    cfg: &RunConfig,
    theorem: Option<TheoremId>,
    r_proxy: Option<f64>,
) -> Result<BoundsReport, CliError> {
    let spec = cfg.spec()?;
    let (ep, eq) = eigenpairs(&spec)?;
    let r = match r_proxy.or(cfg.bounds.and_then(|b| b.r_proxy)) {
        Some(r) => r,
        None => transient_r_proxy(cfg, &spec)?,
    };
    Ok(theorem_verdicts(
        &spec,
        &ep,
        &eq,
        &bounds_options(cfg, theorem, Some(r)),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub lambda0: f64,
    pub sup: f64,
    /// `sup >= 0.1 lambda0`; a warning only.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicReport {
    pub config: RunConfig,
    pub classification: Classification,
    pub converged: bool,
    pub epsilon: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub map_residual: f64,
    pub outer_residual: f64,
    pub outer_residuals: Vec<f64>,
    pub sup_u: f64,
    pub sup_v: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub l2_squared_u: f64,
    pub l2_squared_v: f64,
    pub clamp: ClampStats,
    pub linf_proxy: Option<f64>,
    pub bounds: BoundsReport,
    pub compliance: VerificationReport,
    pub lower_bound: Option<LowerBoundCheck>,
    pub error: Option<String>,
}

pub struct PeriodicOutcome {
    pub report: PeriodicReport,
    pub trajectory: Option<Trajectory>,
}

impl PeriodicOutcome {
    pub fn failed(&self) -> bool {
        self.report.error.is_some()
    }
}

/// `max_i (C_i / |Q_T|)^(1 / e)` for the selected theorem's bounds on
/// `||.||^e_{L^e}`: the constant level compatible with the bound.
pub fn linf_proxy(report: &BoundsReport, spec: &ProblemSpec) -> Option<f64> {
    let (c1, c2, e) = report.selected_bounds()?;
    let q = spec.q_measure();
    Some((c1 / q).powf(1.0 / e).max((c2 / q).powf(1.0 / e)))
}

fn summarize(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    pre: &BoundsReport,
    eig: &(EigenPair, EigenPair),
    proxy: Option<f64>,
    result: Result<perisys::PeriodicResult, PeriodicError>,
) -> Result<PeriodicOutcome, CliError> {
    let resolved = cfg.resolved()?;
    let (r, error) = match result {
        Ok(r) => (Some(r), None),
        Err(e) => {
            let msg = e.to_string();
            (e.best_iterate().cloned(), Some(msg))
        }
    };
    let Some(r) = r else {
        let report = PeriodicReport {
            config: resolved,
            classification: Classification::Trivial,
            converged: false,
            epsilon: spec.epsilon,
            outer_iterations: 0,
            inner_iterations: 0,
            map_residual: f64::NAN,
            outer_residual: f64::NAN,
            outer_residuals: Vec::new(),
            sup_u: f64::NAN,
            sup_v: f64::NAN,
            min_u: f64::NAN,
            min_v: f64::NAN,
            l2_squared_u: f64::NAN,
            l2_squared_v: f64::NAN,
            clamp: ClampStats::default(),
            linf_proxy: proxy,
            bounds: pre.clone(),
            compliance: VerificationReport::default(),
            lower_bound: None,
            error,
        };
        return Ok(PeriodicOutcome {
            report,
            trajectory: None,
        });
    };
    let tr = r.trajectory;
    let sup = r.sup_u.max(r.sup_v);
    let r_proxy = cfg.bounds.and_then(|b| b.r_proxy).unwrap_or(2.0 * sup);
    let bounds = if r_proxy > 0.0 {
        theorem_verdicts(
            spec,
            &eig.0,
            &eig.1,
            &bounds_options(cfg, None, Some(r_proxy)),
        )
    } else {
        pre.clone()
    };
    let compliance = apriori_compliance(&tr, &bounds);
    let lower_bound = match (r.classification, bounds.lower) {
        (Classification::Coexistence, Some(l)) => {
            let holds = r.sup_u.min(r.sup_v) >= LOWER_BOUND_SLACK * l.lambda0;
            if !holds {
                log::warn!(
                    "orbit sup {sup:e} below {LOWER_BOUND_SLACK} lambda0 = {:e}",
                    l.lambda0
                );
            }
            Some(LowerBoundCheck {
                lambda0: l.lambda0,
                sup: r.sup_u.min(r.sup_v),
                holds,
            })
        }
        _ => None,
    };
    let report = PeriodicReport {
        config: resolved,
        classification: r.classification,
        converged: r.converged,
        epsilon: r.epsilon,
        outer_iterations: r.outer_iterations,
        inner_iterations: r.inner_iterations,
        map_residual: r.map_residual,
        outer_residual: r.outer_residual,
        outer_residuals: r.outer_residuals,
        sup_u: r.sup_u,
        sup_v: r.sup_v,
        min_u: tr.min(Component::U),
        min_v: tr.min(Component::V),
        l2_squared_u: tr.power_integral(Component::U, 2.0),
        l2_squared_v: tr.power_integral(Component::V, 2.0),
        clamp: r.clamp,
        linf_proxy: proxy,
        bounds,
        compliance,
        lower_bound,
        error,
    };
    Ok(PeriodicOutcome {
        report,
        trajectory: Some(tr),
    })
}

/// Solves for a periodic orbit from the initial bump and assembles the
/// report. Solver failures are recorded in the report, not returned.
pub fn periodic(cfg: &RunConfig) -> Result<PeriodicOutcome, CliError> {
    let spec = cfg.spec()?;
    let eig = eigenpairs(&spec)?;
    let pre = theorem_verdicts(&spec, &eig.0, &eig.1, &bounds_options(cfg, None, None));
    let proxy = linf_proxy(&pre, &spec);
    let mut pc = cfg.periodic(&spec);
    pc.linf_proxy = proxy;
    let u0 = Field::sine_bump(&spec.grid, cfg.numerics.initial_amplitude);
    let result = solve_periodic(&spec, &pc, (u0.clone(), u0));
    summarize(cfg, &spec, &pre, &eig, proxy, result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub cells: usize,
    pub steps: usize,
    /// `max |orbit - previous orbit|` along a continuation.
    pub sup_difference: Option<f64>,
    pub report: PeriodicReport,
}

fn at_resolution(cfg: &RunConfig, cells: usize, steps: usize) -> RunConfig {
    let mut c = cfg.clone();
    c.numerics.cells = cells;
    if c.numerics.cells_y.is_some() {
        c.numerics.cells_y = Some(cells);
    }
    c.numerics.steps = steps;
    c.numerics.dt = None;
    c
}

fn continuation_run(cfg: &RunConfig, schedule: &[f64]) -> Result<Vec<SweepEntry>, CliError> {
    let spec = cfg.spec()?;
    let eig = eigenpairs(&spec)?;
    let pc = cfg.periodic(&spec);
    let u0 = Field::sine_bump(&spec.grid, cfg.numerics.initial_amplitude);
    let steps = epsilon_continuation(&spec, &pc, schedule, (u0.clone(), u0));
    steps
        .into_iter()
        .map(|st| {
            let mut c = cfg.clone();
            c.problem.epsilon = Some(st.epsilon);
            let s = spec.with_epsilon(st.epsilon);
            let pre = theorem_verdicts(&s, &eig.0, &eig.1, &bounds_options(&c, None, None));
            let out = summarize(&c, &s, &pre, &eig, None, st.outcome)?;
            Ok(SweepEntry {
                epsilon: st.epsilon,
                cells: c.numerics.cells,
                steps: c.numerics.steps,
                sup_difference: st.sup_difference,
                report: out.report,
            })
        })
        .collect()
}

/// Runs every (epsilon, resolution) scenario; results are ordered by
/// resolution, then by epsilon as listed.
pub fn sweep(
    cfg: &RunConfig,
    epsilons: &[f64],
    continuation: bool,
    threads: usize,
) -> Result<Vec<SweepEntry>, CliError> {
    let base_eps = cfg.problem_config()?.epsilon;
    let eps: Vec<f64> = if epsilons.is_empty() {
        vec![base_eps]
    } else {
        epsilons.to_vec()
    };
    if continuation && !perisys::periodic::is_valid_schedule(&eps) {
        return Err(CliError::Config(vec![
            "continuation needs a strictly decreasing epsilon schedule".into(),
        ]));
    }
    let resolutions = match cfg.sweep.as_ref().map(|s| s.resolutions.clone()) {
        Some(r) if !r.is_empty() => r,
        _ => vec![[cfg.numerics.cells, cfg.numerics.steps]],
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Solver(e.to_string()))?;
    pool.install(|| {
        if continuation {
            let runs: Vec<Result<Vec<SweepEntry>, CliError>> = resolutions
                .par_iter()
                .map(|[n, s]| continuation_run(&at_resolution(cfg, *n, *s), &eps))
                .collect();
            let mut out = Vec::new();
            for r in runs {
                out.extend(r?);
            }
            Ok(out)
        } else {
            let scenarios: Vec<(f64, usize, usize)> = resolutions
                .iter()
                .flat_map(|[n, s]| eps.iter().map(move |e| (*e, *n, *s)))
                .collect();
            scenarios
                .par_iter()
                .map(|&(e, n, s)| {
                    let mut c = at_resolution(cfg, n, s);
                    c.problem.epsilon = Some(e);
                    let out = periodic(&c)?;
                    Ok(SweepEntry {
                        epsilon: e,
                        cells: n,
                        steps: s,
                        sup_difference: None,
                        report: out.report,
                    })
                })
                .collect()
        }
    })
}

/// Worker count: the flag, else the available parallelism, capped by
/// `PERISYS_THREADS` when set.
pub fn thread_count(flag: Option<usize>) -> usize {
    let cap = std::env::var("PERISYS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let want = flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match cap {
        Some(c) if c > 0 => want.min(c),
        _ => want,
    }
}

/// Transient run of `steps` steps with step `dt`, which must divide the
/// period.
pub fn transient(
    cfg: &RunConfig,
    steps: Option<usize>,
    dt: Option<f64>,
    scheme: Option<Scheme>,
) -> Result<Trajectory, CliError> {
    let mut c = cfg.clone();
    let period = cfg.problem_config()?.period;
    if let Some(dt) = dt {
        let per = period / dt;
        let rounded = per.round();
        if !(dt > 0.0) || rounded < 1.0 || (per - rounded).abs() > 1e-9 * per {
            return Err(CliError::Config(vec![format!(
                "--dt {dt} must divide the period {period}"
            )]));
        }
        c.numerics.steps = rounded as usize;
        c.numerics.dt = None;
    }
    if let Some(s) = scheme {
        c.numerics.scheme = s;
    }
    let spec = c.spec()?;
    let stepper: StepperConfig = c.stepper(&spec);
    let u0 = Field::sine_bump(&spec.grid, c.numerics.initial_amplitude);
    let total = steps.unwrap_or(spec.steps);
    run_transient(&spec, &stepper, &u0, &u0, total)
        .map(|r| r.trajectory)
        .map_err(|e| CliError::Solver(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredReport {
    config: RunConfig,
    bounds: BoundsReport,
}

/// Weak residual, bound compliance, Hölder spot check and the pointwise
/// Picone check for the problem exponents.
pub fn verify(
    tr: &Trajectory,
    report_json: &str,
    seed: Option<u64>,
) -> Result<VerificationReport, CliError> {
    let stored: StoredReport = {
        let de = &mut serde_json::Deserializer::from_str(report_json);
        serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(vec![format!("report {}: {}", e.path(), e.inner())]))?
    };
    stored.config.validate()?;
    let spec = stored.config.spec()?;
    if *tr.grid() != spec.grid || tr.steps() != spec.steps {
        return Err(CliError::Config(vec![
            "trajectory grid or step count does not match the report configuration".into(),
        ]));
    }
    let seed = seed.unwrap_or(stored.config.numerics.seed);
    let mut tr = tr.clone();
    tr.mark_periodic();
    let mut out = VerificationReport {
        seed: Some(seed),
        checks: Vec::new(),
    };
    out.merge(weak_residual(&tr, &spec, WEAK_TEST_FUNCTIONS, seed));
    out.merge(apriori_compliance(&tr, &stored.bounds));
    out.merge(holder_spotcheck(&tr, HOLDER_PAIRS, seed, 0.5, spec.p));
    out.merge(picone_check(spec.p, PICONE_SAMPLES, seed));
    if spec.q != spec.p {
        out.merge(picone_check(spec.q, PICONE_SAMPLES, seed));
    }
    out.seed = Some(seed);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct EigenReport<'a> {
    r: f64,
    cells: usize,
    lengths: (f64, f64),
    pair: &'a EigenPair,
}

pub fn eigen(
    r: f64,
    length: f64,
    width: Option<f64>,
    cells: usize,
    tol: f64,
) -> Result<(Grid, EigenPair), CliError> {
    let grid = match width {
        Some(w) => Grid::rectangle(length, w, cells, cells),
        None => Grid::interval(length, cells),
    }
    .map_err(|e| CliError::Config(vec![e.to_string()]))?;
    let ep = first_eigenpair(&grid, r, tol).map_err(|e| match e {
        perisys::eigen::EigenError::Linalg(_) => CliError::Solver(e.to_string()),
        _ => CliError::Config(vec![e.to_string()]),
    })?;
    Ok((grid, ep))
}

fn eigen_csv(grid: &Grid, ep: &EigenPair) -> String {
    let mut s = String::from(if grid.dim() == 1 { "x,e\n" } else { "x,y,e\n" });
    for (n, v) in ep.e.values().iter().enumerate() {
        let [x, y] = grid.coords(n);
        if grid.dim() == 1 {
            s.push_str(&format!("{x},{v}\n"));
        } else {
            s.push_str(&format!("{x},{y},{v}\n"));
        }
    }
    s
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn write_trajectory(path: Option<&PathBuf>, tr: &Trajectory) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(p, e))?;
            write_csv(tr, BufWriter::new(f)).map_err(|e| CliError::Solver(e.to_string()))
        }
        None => write_csv(tr, BufWriter::new(std::io::stdout().lock()))
            .map_err(|e| CliError::Solver(e.to_string())),
    }
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let f =
        File::open(path).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    read_csv(BufReader::new(f))
        .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))
}

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Check {
            source,
            theorem,
            r_proxy,
            out,
        } => {
            let cfg = source_config(&source)?;
            let only = theorem
                .map(|t| t.parse::<TheoremId>())
                .transpose()
                .map_err(|e| CliError::Config(vec![e]))?;
            let report = check(&cfg, only, r_proxy)?;
            emit(out.as_deref(), &json::to_string(&report)?)
        }
        Command::Eig {
            r,
            length,
            width,
            cells,
            tol,
            out_json,
            out_csv,
        } => {
            let (grid, ep) = eigen(r, length, width, cells, tol)?;
            let report = EigenReport {
                r,
                cells,
                lengths: grid.lengths(),
                pair: &ep,
            };
            if let Some(p) = out_csv {
                emit(Some(&p), &eigen_csv(&grid, &ep))?;
            }
            emit(out_json.as_deref(), &json::to_string(&report)?)
        }
        Command::Run {
            source,
            steps,
            dt,
            scheme,
            out,
        } => {
            let cfg = source_config(&source)?;
            let scheme = scheme.map(|s| {
                if s == "explicit" {
                    Scheme::Explicit
                } else {
                    Scheme::ImexLagged
                }
            });
            let tr = transient(&cfg, steps, dt, scheme)?;
            write_trajectory(out.as_ref(), &tr)
        }
        Command::Periodic {
            source,
            eps,
            tol_outer,
            tol_map,
            sigma_ramp,
            ramp_iterations,
            out_traj,
            out_report,
        } => {
            let mut cfg = source_config(&source)?;
            if let Some(e) = eps {
                cfg.problem.epsilon = Some(e);
            }
            if let Some(t) = tol_outer {
                cfg.numerics.tol_outer = t;
            }
            if let Some(t) = tol_map {
                cfg.numerics.tol_map = t;
            }
            if let Some(start) = sigma_ramp {
                cfg.numerics.sigma_ramp = Some(SigmaRamp {
                    start,
                    outer_iterations: ramp_iterations,
                });
            }
            cfg.validate()?;
            let out = periodic(&cfg)?;
            let traj_path = out_traj.or_else(|| cfg.outputs.trajectory.clone());
            if let (Some(p), Some(tr)) = (traj_path, &out.trajectory) {
                write_trajectory(Some(&p), tr)?;
            }
            let report_path = out_report.or_else(|| cfg.outputs.report.clone());
            emit(report_path.as_deref(), &json::to_string(&out.report)?)?;
            match &out.report.error {
                Some(e) => Err(CliError::Solver(e.clone())),
                None => Ok(()),
            }
        }
        Command::Sweep {
            source,
            eps,
            continuation,
            threads,
            out,
        } => {
            let cfg = source_config(&source)?;
            let sweep_cfg = cfg.sweep.clone().unwrap_or_default();
            let eps = eps.unwrap_or(sweep_cfg.epsilons);
            let entries = sweep(
                &cfg,
                &eps,
                continuation || sweep_cfg.continuation,
                thread_count(threads),
            )?;
            emit(out.as_deref(), &json::to_string(&entries)?)?;
            match entries.iter().find_map(|e| e.report.error.clone()) {
                Some(e) => Err(CliError::Solver(e)),
                None => Ok(()),
            }
        }
        Command::Verify {
            traj,
            report,
            seed,
            out,
        } => {
            let tr = read_trajectory(&traj)?;
            let text = std::fs::read_to_string(&report)
                .map_err(|e| CliError::Config(vec![format!("{}: {e}", report.display())]))?;
            let v = verify(&tr, &text, seed)?;
            emit(out.as_deref(), &json::to_string(&v)?)?;
            if v.passed() {
                Ok(())
            } else {
                Err(CliError::Solver("verification checks failed".into()))
            }
        }
    }
}
