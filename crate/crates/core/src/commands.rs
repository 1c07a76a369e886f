//! Command-line front end. The binary only forwards to [`main_with_args`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::chain::{sample_chain_from_rule, Boundary, FullKnowledgeRule};
use crate::dynamics::DynamicsKind;
use crate::error::{Error, Result};
use crate::experiment::{
    format_g6, run_experiment, CellSummary, ExperimentConfig, ExperimentRow, ExperimentTable,
};
use crate::hitting::oracle::ORACLE_MAX_STATE;
use crate::hitting::{
    hitting_times_oracle_all, step_expectations_detailed_balance, step_expectations_recurrence,
    voter_final_step, voter_main_sum, voter_reference_scale,
};
use crate::lowerbound::{
    random_rule_certificates, theorem1_certificate, write_certificates_csv, LowerBoundCertificate,
};
use crate::plot::{plot_csv, render_svg};
use crate::sim::{default_max_rounds, run_trials, TrialConfig};

#[derive(Debug, Parser)]
#[command(
    name = "opinionlab",
    version,
    about = "Hitting times, lower-bound certificates and simulations for opinion dynamics with stubborn sources"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact hitting times of the chain induced by a memoryless rule.
    Analyze(AnalyzeArgs),
    /// Quadratic lower-bound certificates for full-knowledge rules.
    Lowerbound(LowerboundArgs),
    /// Monte Carlo trials of one cell.
    Simulate(SimulateArgs),
    /// Experiment grids.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// SVG of an experiment CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Voter against follow-the-trend over powers of two.
    Figure1(Figure1Args),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// voter, majority:<ell>, mean:<ell> or table:<json>
    #[arg(long, default_value = "voter")]
    pub dynamics: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub z: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub z: usize,
    /// Number of random rules on top of the voter-like one.
    #[arg(long, visible_alias = "trials", default_value_t = 100)]
    pub rules: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// voter, majority:<ell>, mean:<ell>, table:<json>, trend or trend:<ell>
    #[arg(long, default_value = "voter")]
    pub dynamics: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub z: usize,
    #[arg(long, default_value = "adversarial")]
    pub init: String,
    /// Number of opinions; more than two needs the voter rule.
    #[arg(long, default_value_t = 2)]
    pub labels: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub max_parallel_rounds: Option<f64>,
    /// Sample size of the trend rule.
    #[arg(long)]
    pub ell: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Figure1Args {
    /// JSON file with any of the fields below; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub dynamics: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub z: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub init: Option<Vec<String>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_parallel_rounds: Option<f64>,
    #[arg(long)]
    pub ell: Option<usize>,
    /// Run the trend rule up to 2^17.
    #[arg(long)]
    pub full: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Experiment CSV.
    pub csv: PathBuf,
    #[arg(long)]
    pub svg: PathBuf,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    match cli.command {
        Command::Analyze(args) => {
            let report = cmd_analyze(&args.dynamics.parse()?, args.n, args.z)?;
            print_to(stdout.lock(), &report.to_text())?;
            if let Some(path) = &args.out {
                let json = serde_json::to_string_pretty(&report)?;
                std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
            }
            Ok(())
        }
        Command::Lowerbound(args) => {
            let out = Output::new(args.out.as_deref());
            cmd_lowerbound(args.n, args.z, args.rules, args.seed, out)
        }
        Command::Simulate(args) => {
            let mut dynamics: DynamicsKind = args.dynamics.parse()?;
            if let (Some(ell), DynamicsKind::Trend(_)) = (args.ell, &dynamics) {
                dynamics = DynamicsKind::Trend(Some(ell));
            }
            let config = TrialConfig {
                labels: args.labels,
                max_rounds: match args.max_parallel_rounds {
                    Some(cap) if cap > 0.0 => ((cap * args.n as f64).ceil() as u64).max(1),
                    Some(cap) => {
                        return Err(Error::invalid(format!("bad max_parallel_rounds {cap}")))
                    }
                    None => default_max_rounds(args.n),
                },
                ..TrialConfig::new(dynamics, args.n, args.z, args.init.parse()?)
            };
            let rows = cmd_simulate(&config, args.trials, args.seed)?;
            let table = ExperimentTable { rows };
            write_table(&table, args.out.as_deref())?;
            for cell in table.summarize() {
                eprintln!("{}", summary_line(&cell));
            }
            Ok(())
        }
        Command::Experiment(ExperimentCommand::Figure1(args)) => {
            let base = match &args.config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::default(),
            };
            let flags = ExperimentConfig {
                series: None,
                dynamics: args.dynamics,
                n: args.n,
                z: args.z,
                init: args.init,
                trials: args.trials,
                seed: args.seed,
                max_parallel_rounds: args.max_parallel_rounds,
                ell: args.ell,
                full: args.full.then_some(true),
                out: args.out,
                svg: args.svg,
            };
            let spec = base.overridden_by(flags).into_spec()?;
            let table = run_experiment(&spec)?;
            write_table(&table, spec.out.as_deref())?;
            let cells = table.summarize();
            if let Some(svg) = &spec.svg {
                std::fs::write(svg, render_svg(&cells)).map_err(|e| Error::io(svg, e))?;
            }
            for cell in &cells {
                eprintln!("{}", summary_line(cell));
            }
            Ok(())
        }
        Command::Plot(args) => plot_csv(&args.csv, &args.svg),
    }
}

fn print_to<W: Write>(mut w: W, text: &str) -> Result<()> {
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

enum Output {
    Stdout,
    File(PathBuf),
}

impl Output {
    fn new(path: Option<&Path>) -> Self {
        match path {
            Some(p) => Output::File(p.to_path_buf()),
            None => Output::Stdout,
        }
    }
}

fn write_table(table: &ExperimentTable, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => table.write_csv_file(path),
        None => table.write_csv(std::io::stdout().lock()),
    }
}

fn summary_line(cell: &CellSummary) -> String {
    format!(
        "{} n={} init={} trials={} converged={} mean_parallel_rounds={}",
        cell.dynamics,
        cell.n,
        cell.init,
        cell.trials,
        cell.converged,
        format_g6(cell.mean_parallel_rounds)
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub dynamics: String,
    pub n: usize,
    pub z: usize,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    /// `E_k[tau_{k+1}]` for `k = z..n-1`.
    pub steps_recurrence: Vec<f64>,
    pub steps_detailed_balance: Vec<f64>,
    /// From the tridiagonal solve; absent above its size limit.
    pub steps_linear_solve: Option<Vec<f64>>,
    pub detailed_balance_fell_back: bool,
    /// `E_z[tau_n]`.
    pub total: f64,
    pub total_linear_solve: Option<f64>,
    pub voter: Option<VoterSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VoterSummary {
    pub main_sum: f64,
    pub final_step: f64,
    /// `2 n^2 H_{n-1}`.
    pub reference_scale: f64,
    /// `total / reference_scale`.
    pub ratio: f64,
}

impl AnalyzeReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dynamics {}  n {}  z {}", self.dynamics, self.n, self.z);
        let _ = writeln!(
            s,
            "{:>6} {:>12} {:>12} {:>16} {:>16} {:>16}",
            "k", "p_k", "q_k", "recurrence", "detailed", "linear"
        );
        for (idx, k) in (self.z..self.n).enumerate() {
            let lin = self
                .steps_linear_solve
                .as_ref()
                .map_or_else(|| "-".to_string(), |v| format!("{:.10e}", v[idx]));
            let _ = writeln!(
                s,
                "{:>6} {:>12.6e} {:>12.6e} {:>16.10e} {:>16.10e} {:>16}",
                k,
                self.up[idx],
                self.down[idx],
                self.steps_recurrence[idx],
                self.steps_detailed_balance[idx],
                lin
            );
        }
        let _ = writeln!(s, "total E_z[tau_n] = {}", self.total);
        if let Some(t) = self.total_linear_solve {
            let _ = writeln!(s, "linear solve      = {t}");
        }
        if self.detailed_balance_fell_back {
            let _ = writeln!(s, "detailed balance fell back to the recurrence");
        }
        if let Some(v) = &self.voter {
            let _ = writeln!(s, "main sum          = {}", v.main_sum);
            let _ = writeln!(s, "final step        = {}", v.final_step);
            let _ = writeln!(s, "2 n^2 H_(n-1)     = {}", v.reference_scale);
            let _ = writeln!(s, "ratio             = {}", v.ratio);
        }
        s
    }
}

pub fn cmd_analyze(dynamics: &DynamicsKind, n: usize, z: usize) -> Result<AnalyzeReport> {
    let rule = match dynamics.memoryless_rule() {
        Some(rule) => rule?,
        None => return Err(Error::StatefulDynamics),
    };
    let chain = sample_chain_from_rule(&rule, n, z, Boundary::Absorbing)?;
    let rec = step_expectations_recurrence(&chain)?;
    let bal = step_expectations_detailed_balance(&chain)?;
    let linear = if n <= ORACLE_MAX_STATE {
        let all = hitting_times_oracle_all(&chain)?;
        let steps: Vec<f64> = all.windows(2).map(|w| w[0] - w[1]).collect();
        Some((steps, all[0]))
    } else {
        None
    };
    let voter = (matches!(dynamics, DynamicsKind::Voter) && z == 1 && n >= 3).then(|| {
        let reference_scale = voter_reference_scale(n);
        VoterSummary {
            main_sum: voter_main_sum(n),
            final_step: voter_final_step(n),
            reference_scale,
            ratio: rec.total() / reference_scale,
        }
    });
    let states = z..n;
    Ok(AnalyzeReport {
        dynamics: dynamics.to_string(),
        n,
        z,
        up: states.clone().map(|k| chain.up(k)).collect(),
        down: states.map(|k| chain.down(k)).collect(),
        steps_recurrence: rec.per_step().to_vec(),
        steps_detailed_balance: bal.per_step().to_vec(),
        detailed_balance_fell_back: bal.fell_back(),
        total: rec.total(),
        total_linear_solve: linear.as_ref().map(|l| l.1),
        steps_linear_solve: linear.map(|l| l.0),
        voter,
    })
}

/// Certificates for the voter-like rule followed by `rules` random rules.
pub fn certificates(
    n: usize,
    z: usize,
    rules: usize,
    seed: u64,
) -> Result<Vec<Result<LowerBoundCertificate>>> {
    let voter_like = theorem1_certificate(&FullKnowledgeRule::voter_like(n)?, z);
    if let Err(e) = &voter_like {
        if !matches!(e, Error::CertificateFailed(_)) {
            return Err(voter_like.unwrap_err());
        }
    }
    let mut all = vec![voter_like];
    all.extend(random_rule_certificates(n, z, rules, seed));
    Ok(all)
}

fn cmd_lowerbound(n: usize, z: usize, rules: usize, seed: u64, out: Output) -> Result<()> {
    let results = certificates(n, z, rules, seed)?;
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (idx, res) in results.into_iter().enumerate() {
        match res {
            Ok(cert) => ok.push(cert),
            Err(e) => failures.push(format!("rule {idx}: {e}")),
        }
    }
    match out {
        Output::Stdout => write_certificates_csv(std::io::stdout().lock(), &ok)
            .map_err(|e| Error::io(Path::new("<stdout>"), e.into()))?,
        Output::File(path) => {
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_certificates_csv(file, &ok).map_err(|e| Error::io(&path, e.into()))?;
        }
    }
    if failures.is_empty() {
        eprintln!("{} certificates hold", ok.len());
        Ok(())
    } else {
        for f in &failures {
            eprintln!("{f}");
        }
        Err(Error::CertificateFailed(format!(
            "{} of {} certificates failed",
            failures.len(),
            failures.len() + ok.len()
        )))
    }
}

/// Rows for one simulation cell, seeded directly by `seed`.
pub fn cmd_simulate(config: &TrialConfig, trials: usize, seed: u64) -> Result<Vec<ExperimentRow>> {
    let results = run_trials(config, trials, seed)?;
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(trial, r)| ExperimentRow {
            dynamics: config.dynamics.to_string(),
            n: config.n,
            init: r.init,
            trial,
            seed: r.seed,
            rounds: r.rounds,
            parallel_rounds: r.parallel_rounds,
            converged: r.converged,
        })
        .collect())
}
