//! Command-line driver. Every subcommand reads its inputs, calls one library
//! entry point and writes the result.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 for failures
//! while running.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use modbe_core::baselines::holdout_select;
use modbe_core::{fqi, modbe, Fqi, NestedSequence, OfflineDataset, QSequence, ScheduleMode, TabularMdp};

use crate::eval::cb::{run_cb_experiment, CbInstance};
use crate::eval::config::{parse_schedule, schedule_name, ExperimentConfig};
use crate::eval::instances::{rl_instance, MuSpec};
use crate::eval::report::DiagnosticReport;
use crate::eval::results::{format_summary, write_results, ResultRow};
use crate::eval::rl::run_rl_experiment;
use crate::eval::EvalError;
use crate::io::classes::read_classes;
use crate::io::dataset::{read_dataset, write_dataset};
use crate::io::mdp::read_mdp;
use crate::io::trace::{summary_pairs, write_trace};
use crate::io::FormatError;

#[derive(Debug, Parser)]
#[command(name = "modbe", version, about = "Model selection for offline RL by Bellman-error comparison")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an offline dataset from an MDP file.
    GenData(GenData),
    /// Fit one class with fitted Q-iteration.
    RunFqi(RunFqi),
    /// Select a class with the Bellman-error comparison loop.
    RunModbe(RunModbe),
    /// Select a class by summed validation loss.
    RunHoldout(RunHoldout),
    /// Completeness errors, concentrability and the smallest complete class.
    Diagnose(Diagnose),
    /// Run a benchmark sweep described by a config file.
    Bench(Bench),
}

#[derive(Debug, Args)]
pub struct GenData {
    /// MDP file.
    #[arg(long, value_name = "FILE")]
    pub mdp: PathBuf,
    /// Data distribution: uniform-mu, uniform (uniform-policy occupancy) or eps-optimal:<eps>.
    #[arg(long, value_name = "SPEC", value_parser = parse_mu)]
    pub behavior: MuSpec,
    /// Samples per step.
    #[arg(long, value_name = "N")]
    pub n: usize,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output dataset CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Dataset CSV.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Class sequence file.
    #[arg(long, value_name = "FILE")]
    pub classes: PathBuf,
    /// MDP file; when given, the regret of the result is reported.
    #[arg(long, value_name = "FILE")]
    pub mdp: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunFqi {
    #[command(flatten)]
    pub inputs: Inputs,
    /// One-based class index; defaults to the largest class.
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,
    /// Output CSV of the fitted values `h,x,a,q`.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunModbe {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Failure probability in (0, 1/e].
    #[arg(long, value_name = "FLOAT", default_value_t = 0.1, value_parser = parse_delta)]
    pub delta: f64,
    /// Tolerance schedule: theoretical, practical or constant:<tol>.
    #[arg(long, value_name = "MODE", default_value = "practical", value_parser = parse_schedule)]
    pub schedule: ScheduleMode,
    /// Seed of the train/validation split.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output trace file (test events and summary).
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunHoldout {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Failure probability passed to the base algorithm, in (0, 1/e].
    #[arg(long, value_name = "FLOAT", default_value_t = 0.1, value_parser = parse_delta)]
    pub delta: f64,
    /// Seed of the train/validation split.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct Diagnose {
    /// MDP file.
    #[arg(long, value_name = "FILE")]
    pub mdp: PathBuf,
    /// Class sequence file.
    #[arg(long, value_name = "FILE")]
    pub classes: PathBuf,
    /// Data distribution: uniform-mu, uniform or eps-optimal:<eps>.
    #[arg(long, value_name = "SPEC", default_value = "uniform-mu", value_parser = parse_mu)]
    pub mu: MuSpec,
}

#[derive(Debug, Args)]
pub struct Bench {
    /// Sweep config file.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub jobs: usize,
    /// Results CSV; overrides `output` in the config.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn parse_mu(s: &str) -> Result<MuSpec, String> {
    s.parse()
}

fn parse_delta(s: &str) -> Result<f64, String> {
    let d: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if d > 0.0 && d <= (-1.0f64).exp() {
        Ok(d)
    } else {
        Err(format!("{d} is not in (0, 1/e]"))
    }
}

/// Error with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable, malformed or inconsistent input: exit 1.
    Input(String),
    /// Failure while computing or writing results: exit 2.
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => m,
        }
    }
}

fn input(flag: &str) -> impl Fn(FormatError) -> CliError + '_ {
    move |e| CliError::Input(format!("--{flag}: {e}"))
}

fn write_err(e: FormatError) -> CliError {
    CliError::Runtime(e.to_string())
}

fn core_err(e: modbe_core::Error) -> CliError {
    use modbe_core::Error as E;
    match e {
        E::SingularSystem | E::Unsupported(_) => CliError::Runtime(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Core(e) => core_err(e),
        EvalError::Config(m) => CliError::Input(format!("--config: {m}")),
        EvalError::Threads(e) => CliError::Runtime(e.to_string()),
    }
}

struct Loaded {
    data: OfflineDataset,
    classes: NestedSequence,
    mdp: Option<TabularMdp>,
}

fn load(inputs: &Inputs) -> Result<Loaded, CliError> {
    let data = read_dataset(&inputs.data).map_err(input("data"))?;
    let classes = read_classes(&inputs.classes).map_err(input("classes"))?;
    let first = classes.get(0);
    if let Some(t) = data.iter().find(|t| t.state >= first.num_states() || t.action >= first.num_actions() || t.next_state >= first.num_states()) {
        return Err(CliError::Input(format!(
            "--data: transition ({}, {}) -> {} lies outside the {}-state, {}-action class domain",
            t.state,
            t.action,
            t.next_state,
            first.num_states(),
            first.num_actions()
        )));
    }
    let mdp = match &inputs.mdp {
        Some(path) => {
            let mdp = read_mdp(path).map_err(input("mdp"))?;
            data.check_against(&mdp).map_err(|e| CliError::Input(format!("--mdp: {e}")))?;
            Some(mdp)
        }
        None => None,
    };
    Ok(Loaded { data, classes, mdp })
}

fn regret_line(out: &mut String, mdp: Option<&TabularMdp>, f: &QSequence) -> Result<(), CliError> {
    if let Some(mdp) = mdp {
        let regret = mdp.regret(&f.greedy_policy().map_err(core_err)?).map_err(core_err)?;
        writeln!(out, "regret = {regret}").unwrap();
    }
    Ok(())
}

fn write_values(path: &Path, f: &QSequence) -> Result<(), CliError> {
    let mut text = String::from("h,x,a,q\n");
    for (h, q) in f.functions().iter().enumerate() {
        for x in 0..q.num_states() {
            for a in 0..q.num_actions() {
                writeln!(text, "{},{x},{a},{}", h + 1, q.value(x, a)).unwrap();
            }
        }
    }
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn gen_data(args: &GenData) -> Result<String, CliError> {
    let mdp = read_mdp(&args.mdp).map_err(input("mdp"))?;
    if args.n == 0 {
        return Err(CliError::Input("--n: at least one sample per step is required".into()));
    }
    let data = args.behavior.generate(&mdp, args.n, args.seed).map_err(core_err)?;
    write_dataset(&args.out, &data).map_err(write_err)?;
    let c = data.meta().concentrability.unwrap_or(f64::NAN);
    Ok(format!("wrote {} transitions per step over {} steps\nconcentrability = {c}\n", data.n(), data.horizon()))
}

fn run_fqi(args: &RunFqi) -> Result<String, CliError> {
    let loaded = load(&args.inputs)?;
    let m = loaded.classes.len();
    let k = match args.k {
        Some(k) if k == 0 || k > m => return Err(CliError::Input(format!("--k: {k} is not in 1..={m}"))),
        Some(k) => k - 1,
        None => m - 1,
    };
    let f = fqi(&loaded.data, loaded.classes.get(k)).map_err(core_err)?;
    let mut out = format!("class = {}\nsteps = {}\nn = {}\n", k + 1, f.horizon(), loaded.data.n());
    regret_line(&mut out, loaded.mdp.as_ref(), &f)?;
    if let Some(path) = &args.out {
        write_values(path, &f)?;
    }
    Ok(out)
}

fn run_modbe(args: &RunModbe) -> Result<String, CliError> {
    let loaded = load(&args.inputs)?;
    let trace = modbe(&loaded.data, &Fqi, &loaded.classes, args.delta, args.schedule, args.seed).map_err(core_err)?;
    let mut out = format!("schedule = {}\n", schedule_name(args.schedule));
    for (key, value) in summary_pairs(&trace) {
        writeln!(out, "{key} = {value}").unwrap();
    }
    regret_line(&mut out, loaded.mdp.as_ref(), &trace.functions)?;
    if let Some(path) = &args.trace {
        write_trace(path, &trace).map_err(write_err)?;
    }
    Ok(out)
}

fn run_holdout(args: &RunHoldout) -> Result<String, CliError> {
    let loaded = load(&args.inputs)?;
    let sel = holdout_select(&loaded.data, &Fqi, &loaded.classes, args.delta, args.seed).map_err(core_err)?;
    let mut out = format!("selected_k = {}\n", sel.selected + 1);
    for (k, s) in sel.scores.iter().enumerate() {
        writeln!(out, "validation_loss[{}] = {s}", k + 1).unwrap();
    }
    regret_line(&mut out, loaded.mdp.as_ref(), &sel.functions)?;
    Ok(out)
}

fn diagnose(args: &Diagnose) -> Result<String, CliError> {
    let mdp = read_mdp(&args.mdp).map_err(input("mdp"))?;
    let classes = read_classes(&args.classes).map_err(input("classes"))?;
    let first = classes.get(0);
    if (first.num_states(), first.num_actions()) != (mdp.num_states(), mdp.num_actions()) {
        return Err(CliError::Input(format!(
            "--classes: domain {}x{} does not match the MDP's {}x{}",
            first.num_states(),
            first.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    let mu = args.mu.distribution(&mdp).map_err(core_err)?;
    let report = DiagnosticReport::compute(&mdp, &mu, &classes).map_err(eval_err)?;
    Ok(report.to_string())
}

fn bench(args: &Bench) -> Result<String, CliError> {
    let config = ExperimentConfig::read(&args.config).map_err(input("config"))?;
    let (rows, note): (Vec<ResultRow>, String) = if config.instance == "cb" {
        let instance = Arc::new(CbInstance::standard(0));
        let res = run_cb_experiment(&config, &instance, args.jobs).map_err(eval_err)?;
        let worst = res.mc_stderr.iter().copied().fold(0.0, f64::max);
        (res.rows, format!("largest Monte Carlo stderr of a regret = {worst:.6}\n"))
    } else {
        let instance = rl_instance(&config.instance).expect("validated instance name");
        (run_rl_experiment(&config, &instance, args.jobs).map_err(eval_err)?, String::new())
    };
    let output = args.out.as_ref().or(config.output.as_ref());
    if let Some(path) = output {
        write_results(path, &rows).map_err(write_err)?;
    }
    Ok(format!("{}{note}", format_summary(&rows)))
}

/// Runs the command and returns human-readable output.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::RunFqi(a) => run_fqi(a),
        Command::RunModbe(a) => run_modbe(a),
        Command::RunHoldout(a) => run_holdout(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Bench(a) => bench(a),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}
