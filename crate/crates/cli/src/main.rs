//! `partial-control`: safe sets, controlled trajectories and bifurcation
//! scans for one-dimensional piecewise-linear maps.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use partial_control::bifurcation::{
    right_grid, scan_line, sweep, trace_boundaries, u_min, CellStatus, SweepOptions, TraceOptions,
};
use partial_control::map_model::MapDefinition;
use partial_control::{
    maximal_safe_set, simulate_controlled, simulate_perturbed, simulate_uncontrolled,
    ControlParams, DisturbanceStrategy, Interval, IntervalSet, PiecewiseLinearMap, SimError,
    SolverOptions, TrajectoryRecord,
};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "partial-control", version, about = "Partial control of piecewise-linear maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximal safe set at one (U, beta) as JSON.
    Safeset {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bounds: Bounds,
    },
    /// Uncontrolled, perturbed or controlled trajectory.
    Simulate(SimulateArgs),
    /// Safe-set existence, measure and component count over a (U, beta) grid as CSV.
    Sweep(SweepArgs),
    /// Smallest control bound with a nonempty safe set, as JSON.
    Umin {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: f64,
        /// Bisection tolerance in U.
        #[arg(long = "umin-tol", default_value_t = 1e-10)]
        umin_tol: f64,
    },
    /// Component-count changes along a line of fixed beta, as a JSON array of events.
    Bifurcate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: f64,
        /// U range as LO HI.
        #[arg(long = "u-range", num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.035, 0.06])]
        u_range: Vec<f64>,
        #[arg(long, default_value_t = 2e-4)]
        du: f64,
    },
    /// Boundary continuation in U at fixed beta, as JSON.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: f64,
        #[arg(long = "u-from")]
        u_from: f64,
        #[arg(long = "u-to")]
        u_to: f64,
        #[arg(long, default_value_t = 1e-4)]
        du: f64,
        /// Recompute from scratch every this many continued steps.
        #[arg(long = "validate-every", default_value_t = 10)]
        validate_every: usize,
        #[arg(long = "stop-at-first-event")]
        stop_at_first_event: bool,
        /// Matching tolerance when classifying boundary equations.
        #[arg(long = "classify-tol", default_value_t = 1e-9)]
        classify_tol: f64,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Builtin map name or path to a JSON map file.
    #[arg(long, default_value = "asymmetric-tent")]
    map: String,
    /// Target interval Q as LO HI.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.5, 1.0])]
    q: Vec<f64>,
    /// Hausdorff tolerance between sculpting iterates.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 100_000)]
    max_iter: usize,
    /// Skip the boundary-equation polish after convergence.
    #[arg(long = "no-polish")]
    no_polish: bool,
    /// Accept maps with a piece of slope at most 1 in magnitude.
    #[arg(long = "allow-non-expanding")]
    allow_non_expanding: bool,
    /// Write here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Bounds {
    /// Control bound U.
    #[arg(long)]
    u: f64,
    /// Disturbance bound beta.
    #[arg(long)]
    beta: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Uncontrolled,
    Perturbed,
    Controlled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Strategy {
    /// xi uniform on [-beta, beta].
    Uniform,
    /// xi = +-beta with a random sign.
    Extremal,
    /// xi = +-beta chosen to push the trajectory down.
    Adversarial,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "controlled")]
    mode: Mode,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.6)]
    x0: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to the lower end of Q.
    #[arg(long = "crash-threshold")]
    crash_threshold: Option<f64>,
    /// Interval-set JSON to use as the safe set instead of computing it.
    #[arg(long = "safe-set")]
    safe_set: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// U grid as LO HI N; cells are LO + i(HI - LO)/N for i = 1..=N.
    #[arg(long = "u-range", num_args = 3, value_names = ["LO", "HI", "N"], default_values = ["0", "0.2", "200"])]
    u_range: Vec<String>,
    /// Beta grid as LO HI N, same convention.
    #[arg(long = "beta-range", num_args = 3, value_names = ["LO", "HI", "N"], default_values = ["0", "0.2", "200"])]
    beta_range: Vec<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Also compute cells with U >= beta.
    #[arg(long = "include-outside-regime")]
    include_outside_regime: bool,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

const USAGE: u8 = 1;
const SYSTEMIC: u8 = 2;
const BREACH: u8 = 3;

fn usage(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: USAGE,
        err: err.into(),
    }
}

fn systemic(err: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: SYSTEMIC,
        err: err.into(),
    }
}

type Outcome = Result<u8, Failure>;

impl Common {
    fn map(&self) -> Result<PiecewiseLinearMap, Failure> {
        if let Ok(m) = PiecewiseLinearMap::builtin(&self.map) {
            return Ok(m);
        }
        let text = std::fs::read_to_string(&self.map)
            .with_context(|| format!("{:?} is neither a builtin map nor a readable file", self.map))
            .map_err(usage)?;
        let def: MapDefinition = serde_json::from_str(&text)
            .with_context(|| format!("invalid map file {}", self.map))
            .map_err(usage)?;
        PiecewiseLinearMap::from_definition(def).map_err(usage)
    }

    fn q(&self) -> Result<Interval, Failure> {
        let (lo, hi) = (self.q[0], self.q[1]);
        if !(lo < hi) {
            return Err(usage(anyhow!("--q needs LO < HI, got {lo} {hi}")));
        }
        Interval::new(lo, hi).map_err(usage)
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            allow_non_expanding: self.allow_non_expanding,
            polish: !self.no_polish,
        }
    }

    fn params(&self, u: f64, beta: f64) -> Result<ControlParams, Failure> {
        let q = self.q()?;
        ControlParams::new(u, beta, q.lo(), q.hi()).map_err(usage)
    }

    fn writer(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.output {
            Some(path) => Box::new(BufWriter::new(
                File::create(path)
                    .with_context(|| format!("cannot create {}", path.display()))
                    .map_err(usage)?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn write_json<V: Serialize>(&self, value: &V) -> Result<(), Failure> {
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value).map_err(systemic)?;
        writeln!(w).map_err(systemic)?;
        w.flush().map_err(systemic)
    }
}

#[derive(Serialize)]
struct SafeSetOutput {
    components: IntervalSet,
    measure: f64,
    iterations: usize,
    converged: bool,
    residual: f64,
    maximality_residual: Option<f64>,
    polished: bool,
    point_components: Vec<usize>,
    regime: partial_control::safeset::Regime,
}

fn cmd_safeset(common: &Common, bounds: &Bounds) -> Outcome {
    let f = common.map()?;
    let p = common.params(bounds.u, bounds.beta)?;
    let r = maximal_safe_set(&f, &p, &common.solver()).map_err(usage)?;
    common.write_json(&SafeSetOutput {
        measure: r.safe_set.measure(),
        components: r.safe_set,
        iterations: r.iterations,
        converged: r.converged,
        residual: r.residual,
        maximality_residual: r.maximality_residual,
        polished: r.polished,
        point_components: r.point_components,
        regime: r.regime,
    })?;
    if r.converged {
        Ok(0)
    } else {
        eprintln!("sculpting did not converge in {} iterations", r.iterations);
        Ok(SYSTEMIC)
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    n: usize,
    x: f64,
    xi: f64,
    u: f64,
    crash: bool,
}

/// Row `n` holds `x_n` with the disturbance and control that produced it.
fn write_trajectory(common: &Common, rec: &TrajectoryRecord, format: Format) -> Result<(), Failure> {
    match format {
        Format::Json => common.write_json(rec),
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(common.writer()?);
            w.write_record(["n", "x", "xi", "u", "crash"]).map_err(systemic)?;
            for n in 1..rec.states.len() {
                w.serialize(TrajectoryRow {
                    n,
                    x: rec.states[n],
                    xi: rec.disturbances[n - 1],
                    u: rec.controls[n - 1],
                    crash: rec.crash_flags[n],
                })
                .map_err(systemic)?;
            }
            w.flush().map_err(systemic)
        }
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Outcome {
    let f = a.common.map()?;
    let q = a.common.q()?;
    let threshold = a.crash_threshold.unwrap_or(q.lo());
    let strategy = match a.strategy {
        Strategy::Uniform => DisturbanceStrategy::UniformRandom(a.seed),
        Strategy::Extremal => DisturbanceStrategy::ExtremalRandom(a.seed),
        Strategy::Adversarial => DisturbanceStrategy::AdversarialGreedy,
    };
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| usage(anyhow!("--{flag} is required in this mode")))
    };
    let result = match a.mode {
        Mode::Uncontrolled => simulate_uncontrolled(&f, a.x0, a.n, threshold),
        Mode::Perturbed => simulate_perturbed(&f, a.x0, a.n, need(a.beta, "beta")?, &strategy, threshold),
        Mode::Controlled => {
            let p = a.common.params(need(a.u, "u")?, need(a.beta, "beta")?)?;
            let s = match &a.safe_set {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("cannot read {}", path.display()))
                        .map_err(usage)?;
                    serde_json::from_str::<IntervalSet>(&text)
                        .with_context(|| format!("invalid interval-set file {}", path.display()))
                        .map_err(usage)?
                }
                None => {
                    let r = maximal_safe_set(&f, &p, &a.common.solver()).map_err(usage)?;
                    if !r.converged {
                        return Err(systemic(anyhow!("safe set did not converge")));
                    }
                    r.safe_set
                }
            };
            if s.is_empty() {
                return Err(usage(anyhow!("no safe set at U = {}, beta = {}", p.u_bound, p.beta)));
            }
            simulate_controlled(&f, a.x0, a.n, &p, &s, &strategy)
        }
    };
    match result {
        Ok(rec) => {
            write_trajectory(&a.common, &rec, a.format)?;
            Ok(0)
        }
        Err(SimError::DomainExit { step, x, partial }) => {
            write_trajectory(&a.common, &partial, a.format)?;
            Err(systemic(anyhow!("state {x} left the map domain at step {step}")))
        }
        Err(e @ SimError::SafetyBreach { .. }) => Err(Failure {
            code: BREACH,
            err: e.into(),
        }),
        Err(e) => Err(usage(e)),
    }
}

fn grid(spec: &[String], flag: &str) -> Result<Vec<f64>, Failure> {
    let bad = || usage(anyhow!("--{flag} expects LO HI N with 0 <= LO < HI and N >= 1"));
    let lo: f64 = spec[0].parse().map_err(|_| bad())?;
    let hi: f64 = spec[1].parse().map_err(|_| bad())?;
    let n: usize = spec[2].parse().map_err(|_| bad())?;
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) || n == 0 {
        return Err(bad());
    }
    Ok(right_grid(lo, hi, n))
}

fn cmd_sweep(a: &SweepArgs) -> Outcome {
    let f = a.common.map()?;
    let q = a.common.q()?;
    let us = grid(&a.u_range, "u-range")?;
    let betas = grid(&a.beta_range, "beta-range")?;
    a.common.params(us[0], betas[0])?;
    let opts = SweepOptions {
        include_outside_regime: a.include_outside_regime,
        solver: a.common.solver(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(systemic)?;
    let cells = pool.install(|| sweep(&f, q, &us, &betas, &opts));

    let mut w = csv::Writer::from_writer(a.common.writer()?);
    for c in &cells {
        w.serialize(c).map_err(systemic)?;
    }
    w.flush().map_err(systemic)?;

    let attempted = cells.iter().filter(|c| c.status != CellStatus::OutsideRegime).count();
    let failed = cells.iter().filter(|c| c.status == CellStatus::Failed).count();
    if attempted > 0 && failed == attempted {
        return Err(systemic(anyhow!("every cell failed")));
    }
    if failed > 0 {
        eprintln!("{failed} of {attempted} cells failed");
    }
    Ok(0)
}

fn cmd_umin(common: &Common, beta: f64, tol: f64) -> Outcome {
    let f = common.map()?;
    let q = common.q()?;
    common.params(beta, beta)?;
    let m = u_min(&f, q, beta, tol, &common.solver()).map_err(usage)?;
    common.write_json(&m)?;
    Ok(0)
}

fn cmd_bifurcate(common: &Common, beta: f64, range: &[f64], du: f64) -> Outcome {
    let f = common.map()?;
    let q = common.q()?;
    common.params(range[0], beta)?;
    let scan = scan_line(&f, q, beta, range[0], range[1], du, &common.solver()).map_err(usage)?;
    common.write_json(&scan.events)?;
    Ok(0)
}

fn cmd_trace(common: &Common, beta: f64, from: f64, to: f64, opts: TraceOptions) -> Outcome {
    let f = common.map()?;
    let q = common.q()?;
    common.params(from, beta)?;
    common.params(to, beta)?;
    let rec = trace_boundaries(&f, q, beta, from, to, &opts).map_err(systemic)?;
    common.write_json(&rec)?;
    Ok(0)
}

fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Command::Safeset { common, bounds } => cmd_safeset(&common, &bounds),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Umin {
            common,
            beta,
            umin_tol,
        } => cmd_umin(&common, beta, umin_tol),
        Command::Bifurcate {
            common,
            beta,
            u_range,
            du,
        } => cmd_bifurcate(&common, beta, &u_range, du),
        Command::Trace {
            common,
            beta,
            u_from,
            u_to,
            du,
            validate_every,
            stop_at_first_event,
            classify_tol,
        } => {
            let opts = TraceOptions {
                du,
                validate_every,
                stop_at_first_event,
                classify_tol,
                solver: common.solver(),
            };
            cmd_trace(&common, beta, u_from, u_to, opts)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
