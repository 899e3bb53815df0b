use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rpi_synth::files::{CertificationSummary, FileError, ProblemFile, SolutionFile};
use rpi_core::certification::{certify_with, Certificate};
use rpi_core::closed_loop::build_grids;
use rpi_core::conditions::CandidateSolution;
use rpi_core::error::Error;
use rpi_core::plant::augment;
use rpi_core::simulation::{export_trajectory, rollout, DisturbanceRule, ScenarioConfig, ScheduleRule};
use rpi_core::synthesis::synthesize;
use rpi_core::{Gains, Mat, Problem};
use rpi_synth::{files, report};

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NO_FEASIBLE: u8 = 3;
const EXIT_NOT_CERTIFIED: u8 = 4;
const EXIT_VIOLATION: u8 = 5;

#[derive(Parser)]
#[command(name = "rpi-synth", version, about = "Invariant-set gain-scheduled controller design")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a design from a problem file.
    Design {
        problem: PathBuf,
        /// Solution file to write.
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        starts: Option<u64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        lr: Option<usize>,
        #[arg(long)]
        sweeps: Option<usize>,
    },
    /// Re-check a solution from scratch.
    Certify {
        problem: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Closed-loop rollouts; writes trajectories, a summary and set outlines.
    Simulate {
        problem: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value = "sim")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        rollouts: u64,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        horizon: u64,
        #[arg(long, value_enum, default_value_t = Scenario::Extreme)]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Skip the per-rollout CSV files.
        #[arg(long)]
        no_trajectories: bool,
    },
    /// Set volumes, projection areas and gains of a solution.
    Report {
        problem: PathBuf,
        solution: PathBuf,
        /// Also write set outlines here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum Scenario {
    /// Vertex-hopping schedule, greedy worst-case disturbance vertices.
    Extreme,
    /// Uniform schedule weights and disturbances.
    Uniform,
    /// Vertex-hopping schedule, uniform disturbances.
    VertexHop,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        let code = match e {
            FileError::Read { .. } => EXIT_OTHER,
            _ => EXIT_USAGE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidProblem(_) | Error::InvalidConfig(_) | Error::InvalidDimension(_) => EXIT_USAGE,
            Error::NoFeasibleStart { .. } => EXIT_NO_FEASIBLE,
            _ => EXIT_OTHER,
        };
        let mut message = e.to_string();
        if let Error::NoFeasibleStart { profile, .. } = &e {
            for (name, v) in profile {
                message.push_str(&format!("\n  {name:<24} {v:.3e}"));
            }
        }
        Self::new(code, message)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("RPI_SYNTH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Ignored if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let res = match cli.cmd {
        Command::Design { problem, out, seed, starts, theta, lr, sweeps } => {
            design(&problem, &out, seed, starts.map(|s| s as usize), theta, lr, sweeps)
        }
        Command::Certify { problem, solution, tol } => certify_cmd(&problem, &solution, tol),
        Command::Simulate { problem, solution, out_dir, rollouts, horizon, scenario, seed, tol, no_trajectories } => {
            simulate(&problem, &solution, &out_dir, rollouts as usize, horizon as usize, scenario, seed, tol, !no_trajectories)
        }
        Command::Report { problem, solution, out_dir } => report_cmd(&problem, &solution, out_dir.as_deref()),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_problem(path: &Path) -> Result<(ProblemFile, Problem), Failure> {
    let file: ProblemFile = files::load(path)?;
    let problem = file.to_problem().map_err(|m| Failure::new(EXIT_USAGE, format!("{}: {m}", path.display())))?;
    Ok((file, problem))
}

fn load_solution(path: &Path) -> Result<(SolutionFile, Gains, Mat), Failure> {
    let file: SolutionFile = files::load(path)?;
    let bad = |m: String| Failure::new(EXIT_USAGE, format!("{}: {m}", path.display()));
    let gains = file.gains().map_err(bad)?;
    let l = file.l().map_err(bad)?;
    Ok((file, gains, l))
}

fn summary_of(cert: &Certificate<f64>) -> CertificationSummary {
    CertificationSummary {
        certified: cert.is_certified(),
        tol: cert.tol,
        lambda_star: cert.lambda_star,
        max_residual: cert.residuals.max(),
        violated: match &cert.verdict {
            rpi_core::certification::Verdict::Certified => None,
            rpi_core::certification::Verdict::Failed { condition, .. } => Some(condition.to_string()),
        },
        k_tilde: cert.k_tilde,
    }
}

fn certificate(problem: &Problem, gains: &Gains, l: &Mat, rho: &[f64], eps1: f64, tol: f64) -> Result<Certificate<f64>, Failure> {
    let aug = augment(problem)?;
    let grids = build_grids(problem, &aug, gains)?;
    Ok(certify_with(&aug, &grids, gains, l, rho, eps1, tol)?)
}

fn design(
    path: &Path,
    out: &Path,
    seed: Option<u64>,
    starts: Option<usize>,
    theta: Option<f64>,
    lr: Option<usize>,
    sweeps: Option<usize>,
) -> Result<u8, Failure> {
    let (file, problem) = load_problem(path)?;
    let mut cfg = file.synthesis_config().map_err(|m| Failure::new(EXIT_USAGE, m))?;
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if let Some(v) = starts {
        cfg.starts = v;
    }
    if let Some(v) = theta {
        cfg.theta = v;
    }
    if let Some(v) = lr {
        cfg.l_r = v;
    }
    if let Some(v) = sweeps {
        cfg.sweeps = v;
    }
    let res = synthesize(&problem, &cfg)?;
    let c = &res.candidate;
    let sol = SolutionFile {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: Some(cfg.seed),
        gains: SolutionFile::gains_section(&c.gains),
        l: c.l.to_rows(),
        rho: c.rho.clone(),
        lambda: Some(c.lambda),
        eps1: c.eps1,
        gammas: c.gammas.clone(),
        psis: c.psis.clone(),
        objective: Some(res.objective),
        certification: Some(summary_of(&res.certificate)),
    };
    write_json(out, &sol)?;
    println!("design: best start {} of {}, written to {}", res.best_start, cfg.starts, out.display());
    report::print_design(&res.candidate, res.objective, res.certificate.lambda_star, cfg.theta)
        .map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    Ok(0)
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::new(EXIT_OTHER, format!("{}: {e}", path.display())))
}

fn certify_cmd(problem_path: &Path, solution_path: &Path, tol: f64) -> Result<u8, Failure> {
    let (_, problem) = load_problem(problem_path)?;
    let (sol, gains, l) = load_solution(solution_path)?;
    let cert = certificate(&problem, &gains, &l, &sol.rho, sol.eps1, tol)?;
    println!("{:<24} {:>12}", "condition", "residual");
    for (name, v) in cert.residuals.entries() {
        let flag = if v > tol { "  VIOLATED" } else { "" };
        println!("{name:<24} {v:>12.3e}{flag}");
    }
    println!("lambda*                  {:.9}", cert.lambda_star);
    println!("ultimate bound excess    {:.3e}", cert.ultimate_excess);
    println!("inclusion margin         {:.3e}", cert.inclusion_margin);
    if let Some(m) = cert.rate_margin {
        println!("rate margin              {m:.3e}");
    }
    match cert.k_tilde {
        Some(k) => println!("steps to ultimate set    {k}"),
        None => println!("steps to ultimate set    n/a"),
    }
    match &cert.verdict {
        rpi_core::certification::Verdict::Certified => {
            println!("verdict: certified at tol {tol:e}");
            Ok(0)
        }
        rpi_core::certification::Verdict::Failed { condition, worst_pair } => {
            println!("verdict: FAILED at tol {tol:e}: {condition} (vertex pair {worst_pair:?})");
            Ok(EXIT_NOT_CERTIFIED)
        }
    }
}

#[derive(serde::Serialize)]
struct SimulationSummary {
    rollouts: usize,
    horizon: usize,
    scenario: Scenario,
    seed: u64,
    certified: bool,
    lambda_star: f64,
    k_tilde: Option<u64>,
    state_violations: usize,
    input_violations: usize,
    rate_violations: usize,
    containment_violations: usize,
    ultimate_violations: usize,
    entered: usize,
    max_entry: Option<usize>,
    all_entered_by_k_tilde: bool,
    max_level: f64,
    max_law_deviation: f64,
    max_state_excess: f64,
    max_input_excess: f64,
    max_rate_excess: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    problem_path: &Path,
    solution_path: &Path,
    out_dir: &Path,
    rollouts: usize,
    horizon: usize,
    scenario: Scenario,
    seed: u64,
    tol: f64,
    trajectories: bool,
) -> Result<u8, Failure> {
    let (_, problem) = load_problem(problem_path)?;
    let (sol, gains, l) = load_solution(solution_path)?;
    let aug = augment(&problem)?;
    let grids = build_grids(&problem, &aug, &gains)?;
    let cert = certify_with(&aug, &grids, &gains, &l, &sol.rho, sol.eps1, tol)?;
    if !cert.is_certified() {
        eprintln!("warning: the solution does not certify at tol {tol:e}; simulating anyway");
    }
    let cand: &CandidateSolution<f64> = &cert.candidate;
    let mut cfg = ScenarioConfig::new(horizon, rollouts);
    cfg.seed = seed;
    // A design certified at `tol` only promises the constraints up to that slack.
    cfg.tol = tol;
    (cfg.schedule, cfg.disturbance) = match scenario {
        Scenario::Extreme => (ScheduleRule::VertexHop, DisturbanceRule::Extreme),
        Scenario::Uniform => (ScheduleRule::Uniform, DisturbanceRule::Uniform),
        Scenario::VertexHop => (ScheduleRule::VertexHop, DisturbanceRule::Uniform),
    };
    let sim = rollout(&problem, &aug, &grids, cand, &cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Failure::new(EXIT_OTHER, format!("{}: {e}", out_dir.display())))?;
    if trajectories {
        for (i, run) in sim.runs.iter().enumerate() {
            export_trajectory(run, aug.dims.n_x, &out_dir.join(format!("rollout_{i:04}.csv")))?;
        }
    }
    let s = &sim.summary;
    let summary = SimulationSummary {
        rollouts,
        horizon,
        scenario,
        seed,
        certified: cert.is_certified(),
        lambda_star: cert.lambda_star,
        k_tilde: cert.k_tilde,
        state_violations: s.state_violations,
        input_violations: s.input_violations,
        rate_violations: s.rate_violations,
        containment_violations: s.containment_violations,
        ultimate_violations: s.ultimate_violations,
        entered: s.entered,
        max_entry: s.max_entry,
        all_entered_by_k_tilde: cert.k_tilde.map_or(false, |k| s.all_entered_by(k)),
        max_level: s.max_level,
        max_law_deviation: s.max_law_deviation,
        max_state_excess: s.max_excess.state,
        max_input_excess: s.max_excess.input,
        max_rate_excess: aug.udelta.as_ref().map(|_| s.max_excess.rate),
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    report::write_outlines(cand, out_dir).map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    println!(
        "{} rollouts x {} steps: violations state {} input {} rate {} containment {} ultimate {}",
        rollouts,
        horizon,
        s.state_violations,
        s.input_violations,
        s.rate_violations,
        s.containment_violations,
        s.ultimate_violations
    );
    println!(
        "entered ultimate set: {}/{} (latest step {}), bound {}",
        s.entered,
        rollouts,
        s.max_entry.map_or("-".to_string(), |k| k.to_string()),
        cert.k_tilde.map_or("n/a".to_string(), |k| k.to_string())
    );
    if cert.is_certified() && s.total_violations() > 0 {
        eprintln!("error: violations under a certified solution");
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn report_cmd(problem_path: &Path, solution_path: &Path, out_dir: Option<&Path>) -> Result<u8, Failure> {
    let (file, problem) = load_problem(problem_path)?;
    let (sol, gains, l) = load_solution(solution_path)?;
    let cert = certificate(&problem, &gains, &l, &sol.rho, sol.eps1, 1e-6)?;
    let theta = file.synthesis.as_ref().map(|s| s.theta);
    let mut cand = cert.candidate.clone();
    cand.gammas = sol.gammas.clone();
    let objective = sol.objective.unwrap_or(f64::NAN);
    report::print_design(&cand, objective, cert.lambda_star, theta.unwrap_or(f64::NAN))
        .map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_OTHER, format!("{}: {e}", dir.display())))?;
        report::write_outlines(&cand, dir).map_err(|e| Failure::new(EXIT_OTHER, e.to_string()))?;
    }
    Ok(0)
}
