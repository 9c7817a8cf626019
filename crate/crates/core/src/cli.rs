//! Command-line front end. The `ecpsim` binary only forwards to [`main`].
//!
//! Exit codes: 0 success, 1 input error or failed check, 2 solver failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::oracles;
use crate::scenario::{self, Scenario};
use crate::stepper::{ModeKind, RunOutput, SimConfig, Simulator};
use crate::trajectory;

/// Environment variable holding the log filter (`error`, `info`, `debug`...).
pub const LOG_ENV: &str = "ECPSIM_LOG";

#[derive(Debug, Parser)]
#[command(name = "ecpsim", version, about = "Rigid-body simulation with planar patch contact")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Overrides {
    /// Time step (s).
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Friction coefficient.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Simulated duration (s).
    #[arg(long, allow_negative_numbers = true)]
    pub duration: Option<f64>,
    /// Retry a failed step as two half steps (at most two levels deep).
    #[arg(long)]
    pub halve_on_failure: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios and write trajectory CSVs.
    Run {
        /// Scenario files, or names of bundled scenarios.
        #[arg(required = true)]
        scenarios: Vec<String>,
        /// Output CSV; a directory when several scenarios are given.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Scenarios simulated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a scenario and check the invariant suite.
    Verify {
        scenario: String,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 1e-10)]
        tol_penetration: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol_hull: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol_complementarity: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol_cone: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol_quaternion: f64,
        /// Relative kinetic energy increase allowed per supported step when
        /// no wrench is applied.
        #[arg(long, default_value_t = 1e-10)]
        tol_energy: f64,
    },
    /// Print the run-length encoded contact mode sequence of a trajectory CSV.
    Modes { trajectory: PathBuf },
    /// Evaluate a reference computation: sliding-block, spinning-patch,
    /// dissipation-grid or closest-point.
    Oracle {
        name: String,
        /// Parameters as `key=value`.
        params: Vec<String>,
    },
}

/// Parses the process arguments, sets up logging and runs the command.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    // Usage errors are input errors; 2 is reserved for solver failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    ExitCode::from(execute(cli.command, &mut std::io::stdout()))
}

/// Runs one command, writing reports to `out`; returns the exit code.
pub fn execute(command: Command, out: &mut dyn Write) -> u8 {
    let result = match command {
        Command::Run { scenarios, out: dest, overrides, jobs } => {
            cmd_run(&scenarios, dest.as_deref(), &overrides, jobs, out)
        }
        Command::Verify {
            scenario,
            overrides,
            tol_penetration,
            tol_hull,
            tol_complementarity,
            tol_cone,
            tol_quaternion,
            tol_energy,
        } => {
            let tol = Tolerances {
                penetration: tol_penetration,
                hull: tol_hull,
                complementarity: tol_complementarity,
                cone: tol_cone,
                quaternion: tol_quaternion,
                energy: tol_energy,
            };
            cmd_verify(&scenario, &overrides, &tol, out)
        }
        Command::Modes { trajectory } => cmd_modes(&trajectory, out),
        Command::Oracle { name, params } => cmd_oracle(&name, &params, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Step(_) | Error::RunAborted { .. } => 2,
        _ => 1,
    }
}

/// Loads a scenario file; a name without a matching file falls back to the
/// bundled scenarios.
pub fn load_scenario(arg: &str, overrides: &Overrides) -> Result<Scenario> {
    let path = Path::new(arg);
    let mut s = if path.exists() {
        Scenario::from_path(path)?
    } else {
        scenario::bundled(arg).map_err(|_| {
            Error::Scenario(format!("{arg}: no such file or bundled scenario"))
        })?
    };
    if let Some(h) = overrides.h {
        s = s.with_step(h)?;
    }
    if let Some(mu) = overrides.mu {
        s = s.with_mu(mu)?;
    }
    if let Some(d) = overrides.duration {
        s = s.with_duration(d)?;
    }
    Ok(s)
}

fn simulate(arg: &str, overrides: &Overrides) -> Result<(Simulator, RunOutput)> {
    let config = SimConfig { halve_on_failure: overrides.halve_on_failure, ..SimConfig::default() };
    let sim = Simulator::with_config(load_scenario(arg, overrides)?, config)?;
    let output = sim.run()?;
    Ok((sim, output))
}

fn stem(arg: &str) -> String {
    Path::new(arg).file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned())
}

fn cmd_run(
    scenarios: &[String],
    dest: Option<&Path>,
    overrides: &Overrides,
    jobs: usize,
    out: &mut dyn Write,
) -> Result<u8> {
    let targets: Vec<Option<PathBuf>> = match (dest, scenarios.len()) {
        (None, _) => vec![None; scenarios.len()],
        (Some(p), 1) => vec![Some(p.to_path_buf())],
        (Some(dir), _) => {
            std::fs::create_dir_all(dir)?;
            scenarios.iter().map(|s| Some(dir.join(format!("{}.csv", stem(s))))).collect()
        }
    };
    // Validate every input before spending time on simulation.
    for s in scenarios {
        load_scenario(s, overrides)?;
    }

    let jobs = jobs.max(1);
    let mut results: Vec<Option<Result<RunOutput>>> = (0..scenarios.len()).map(|_| None).collect();
    for (chunk_idx, chunk) in scenarios.chunks(jobs).enumerate() {
        let outputs: Vec<Result<RunOutput>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|s| scope.spawn(move || simulate(s, overrides).map(|(_, o)| o)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
        });
        for (i, r) in outputs.into_iter().enumerate() {
            results[chunk_idx * jobs + i] = Some(r);
        }
    }

    let mut code = 0;
    for ((name, target), result) in scenarios.iter().zip(&targets).zip(results) {
        match result.expect("every scenario was simulated") {
            Ok(output) => {
                if let Some(path) = target {
                    let file = BufWriter::new(File::create(path)?);
                    trajectory::write_trajectory(&output.records, file)?;
                }
                writeln!(out, "[{name}]")?;
                write!(out, "{}", output.summary.render())?;
            }
            Err(e) => {
                eprintln!("error: {name}: {e}");
                code = code.max(exit_code(&e));
            }
        }
    }
    Ok(code)
}

/// Thresholds of the `verify` suite.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub penetration: f64,
    pub hull: f64,
    pub complementarity: f64,
    pub cone: f64,
    pub quaternion: f64,
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            penetration: 1e-10,
            hull: 1e-10,
            complementarity: 1e-8,
            cone: 1e-8,
            quaternion: 1e-12,
            energy: 1e-10,
        }
    }
}

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}


/// Evaluates the invariant suite on a finished run.
pub fn checks(sim: &Simulator, output: &RunOutput, tol: &Tolerances) -> Vec<Check> {
    let s = &output.summary;
    let mut out = vec![
        Check { name: "non-penetration", value: s.max_penetration, tolerance: tol.penetration },
        Check { name: "contact gap", value: s.max_contact_gap, tolerance: tol.penetration },
        Check { name: "contact point in hull", value: s.max_hull_violation, tolerance: tol.hull },
        Check {
            name: "complementarity",
            value: s.max_complementarity_violation,
            tolerance: tol.complementarity,
        },
        Check { name: "friction cone", value: s.max_cone_violation, tolerance: tol.cone },
        Check { name: "quaternion norm", value: s.max_quaternion_drift, tolerance: tol.quaternion },
    ];
    // Only steps that start and end on the plane: free flight under gravity
    // gains kinetic energy legitimately.
    if sim.scenario.applied.terms.is_empty() {
        let props = &sim.scenario.props;
        let mut worst = 0.0f64;
        for w in output.records.windows(2) {
            if w.iter().any(|r| r.mode.kind == ModeKind::Separated) {
                continue;
            }
            let (before, after) = (w[0].state.kinetic_energy(props), w[1].state.kinetic_energy(props));
            worst = worst.max((after - before) / before.max(1.0));
        }
        out.push(Check { name: "kinetic energy", value: worst, tolerance: tol.energy });
    }
    out
}

fn cmd_verify(arg: &str, overrides: &Overrides, tol: &Tolerances, out: &mut dyn Write) -> Result<u8> {
    let (sim, output) = simulate(arg, overrides)?;
    let checks = checks(&sim, &output, tol);
    writeln!(out, "{:<24} {:>12} {:>12}  result", "check", "value", "tolerance")?;
    for c in &checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        writeln!(out, "{:<24} {:>12.3e} {:>12.3e}  {verdict}", c.name, c.value, c.tolerance)?;
    }
    writeln!(out, "mode sequence:")?;
    for (mode, n) in trajectory::run_length(output.records.iter().map(|r| r.mode.kind)) {
        writeln!(out, "  {mode} x{n}")?;
    }
    Ok(if checks.iter().all(Check::passed) { 0 } else { 1 })
}

fn cmd_modes(path: &Path, out: &mut dyn Write) -> Result<u8> {
    let file = File::open(path)?;
    let rows = trajectory::read_trajectory(BufReader::new(file))?;
    if rows.is_empty() {
        return Err(Error::Scenario(format!("{}: trajectory has no rows", path.display())));
    }
    writeln!(out, "{:<10} {:>12} {:>12} {:>7}", "mode", "start_s", "end_s", "steps")?;
    for (mode, start, end, n) in trajectory::mode_runs(&rows) {
        writeln!(out, "{:<10} {start:>12.4} {end:>12.4} {n:>7}", mode.as_str())?;
    }
    Ok(0)
}

struct Params(Vec<(String, String)>);

impl Params {
    fn parse(raw: &[String]) -> Result<Self> {
        raw.iter()
            .map(|p| {
                p.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{p}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Params)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        self.raw(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| Error::InvalidParameter(format!("{key}: not a number: `{v}`")))
        })
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        self.raw(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| Error::InvalidParameter(format!("{key}: not a count: `{v}`")))
        })
    }
}

/// Evaluates a named oracle with `key=value` parameters.
pub fn run_oracle(name: &str, raw: &[String]) -> Result<oracles::OracleResult> {
    let p = Params::parse(raw)?;
    let (method, values) = match name {
        "sliding-block" => (
            "closed-form Coulomb decay",
            oracles::sliding_block_velocity(
                p.f64("v0", 1.0)?,
                p.f64("mu", 0.3)?,
                p.f64("g", 9.8)?,
                p.f64("h", 0.01)?,
                p.usize("steps", 100)?,
            ),
        ),
        "spinning-patch" => (
            "closed-form spin decay",
            oracles::spinning_patch_rate(
                p.f64("w0", 1.0)?,
                p.f64("mu", 0.22)?,
                p.f64("e_r", 0.1)?,
                p.f64("m", 15.0)?,
                p.f64("g", 9.8)?,
                p.f64("izz", 1.0)?,
                p.f64("h", 0.01)?,
                p.usize("steps", 100)?,
            ),
        ),
        "dissipation-grid" => (
            "grid search over the friction ellipsoid",
            oracles::dissipation_grid_max(
                p.f64("v_t", 1.0)?,
                p.f64("v_o", 0.0)?,
                p.f64("v_r", 0.0)?,
                p.f64("mu", 0.3)?,
                p.f64("p_n", 1.0)?,
                p.f64("e_t", 1.0)?,
                p.f64("e_o", 1.0)?,
                p.f64("e_r", 1.0)?,
                p.usize("grid_n", 200)?,
            )
            .to_vec(),
        ),
        "closest-point" => {
            let s = load_scenario(p.raw("scenario").unwrap_or("resting_cube"), &Overrides {
                h: None,
                mu: None,
                duration: None,
                halve_on_failure: false,
            })?;
            let mut state = s.initial;
            if let Some(z) = p.raw("z") {
                let z: f64 = z
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("z: not a number: `{z}`")))?;
                state.position = Vector3::new(state.position.x, state.position.y, z);
            }
            let poly = crate::geometry::convex_hull(&s.vertices)?;
            let c = oracles::closest_point_bruteforce(&poly, &state, &s.plane);
            let mut v = vec![c.a1.x, c.a1.y, c.a1.z, c.a2.x, c.a2.y, c.a2.z, c.gap];
            v.extend(c.ties.iter().map(|&i| i as f64));
            ("vertex enumeration: a1, a2, gap, tied vertices", v)
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown oracle `{other}` (sliding-block, spinning-patch, dissipation-grid, closest-point)"
            )))
        }
    };
    Ok(oracles::OracleResult { method, values })
}

fn cmd_oracle(name: &str, params: &[String], out: &mut dyn Write) -> Result<u8> {
    let r = run_oracle(name, params)?;
    writeln!(out, "# {}", r.method)?;
    for v in &r.values {
        writeln!(out, "{v:.16e}")?;
    }
    Ok(0)
}
