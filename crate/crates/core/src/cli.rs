//! The `bnselect` command-line tool.
//!
//! [`run`] is the whole program minus process exit, so tests can drive it
//! in-process and inspect the exit code and both output streams.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{sample_network, CategoricalDataset, CsvOptions};
use crate::error::Error;
use crate::formats;
use crate::loss::{LossSpec, NetworkLoss};
use crate::modelspace::{CandidateParents, VariableOrdering, DEFAULT_PARENT_CAP};
use crate::scoring::{family_scores, local_posterior, DirichletPrior, ModelPrior};
use crate::search::{learn, LearnConfig};
use crate::verify::{self, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "bnselect",
    version,
    about = "Loss-aware Bayesian network structure selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Log marginal likelihood of a DAG, with a per-family breakdown.
    Score(ScoreArgs),
    /// Select a DAG by minimizing posterior expected loss.
    Learn(LearnArgs),
    /// Dump one child's posterior over its parent-subset lattice.
    Posterior(PosteriorArgs),
    /// Run the randomized oracle equivalence suites.
    Verify(VerifyArgs),
    /// Draw a CSV sample from a network with known CPTs.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SchemeArg {
    Uniform,
    Fixed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Json,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file of complete categorical cases.
    #[arg(long)]
    data: PathBuf,
    /// The CSV has no header row; variables are named X1..XJ.
    #[arg(long)]
    no_header: bool,
}

#[derive(Debug, Args)]
struct PriorArgs {
    /// Total Dirichlet precision for the uniform scheme.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Uniform)]
    prior_scheme: SchemeArg,
    /// Cell hyperparameter for the fixed scheme (1 gives the K2 prior).
    #[arg(long, default_value_t = 1.0)]
    fixed_cell: f64,
}

impl PriorArgs {
    fn prior(&self) -> Result<DirichletPrior, CliError> {
        let p = match self.prior_scheme {
            SchemeArg::Uniform => DirichletPrior::uniform(self.alpha),
            SchemeArg::Fixed => DirichletPrior::fixed_cell(self.fixed_cell),
        };
        p.validate()
            .map_err(|e| CliError::from_error("--alpha/--fixed-cell", e))?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON DAG: {"variable": ["parent", ...], ...}.
    #[arg(long)]
    dag: PathBuf,
    #[command(flatten)]
    prior: PriorArgs,
    /// Also write score.json and manifest.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LearnArgs {
    #[command(flatten)]
    data: DataArgs,
    /// File holding one comma-separated line of variable names, or the list itself.
    #[arg(long)]
    ordering: String,
    /// Loss spec JSON file, or `zero-one`.
    #[arg(long, default_value = "zero-one")]
    loss: String,
    #[command(flatten)]
    prior: PriorArgs,
    /// Largest number of candidate parents per child.
    #[arg(long, default_value_t = DEFAULT_PARENT_CAP)]
    cap: usize,
    /// Write dag.dot, dag.json, diagnostics.json and manifest.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Format of the DAG printed on stdout.
    #[arg(long, value_enum, default_value_t = FormatArg::Dot)]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct PosteriorArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Child variable name.
    #[arg(long)]
    child: String,
    /// Comma-separated candidate parents; defaults to the child's
    /// predecessors under --ordering, or to every other variable.
    #[arg(long)]
    candidates: Option<String>,
    /// Ordering used to pick default candidates (file or inline list).
    #[arg(long)]
    ordering: Option<String>,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, default_value_t = DEFAULT_PARENT_CAP)]
    cap: usize,
    /// Write posterior.json and manifest.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Trials per suite (per lattice order for the linear-rule suite).
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Largest lattice order for the linear-rule suite.
    #[arg(long, default_value_t = 6)]
    max_q: usize,
    /// Write verify_report.json and manifest.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// CPT JSON: {"variable": {"parents": [...], "table": [[...], ...], "states": [...]}}.
    #[arg(long)]
    cpts: PathBuf,
    /// Optional JSON DAG; must match the parents listed in the CPT file.
    #[arg(long)]
    dag: Option<PathBuf>,
    /// Number of cases.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write data.csv and manifest.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn from_error(context: impl fmt::Display, e: Error) -> Self {
        Self {
            code: e.exit_code(),
            message: format!("{context}: {e}"),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Provenance written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Value,
    pub prior: Option<DirichletPrior>,
    pub loss: Option<Value>,
    pub ordering: Option<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp_unix: u64,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            inputs: json!({}),
            prior: None,
            loss: None,
            ordering: None,
            seed: None,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::validation(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn load_data(args: &DataArgs) -> Result<CategoricalDataset, CliError> {
    let file = fs::File::open(&args.data)
        .map_err(|e| CliError::validation(format!("{}: {e}", args.data.display())))?;
    CategoricalDataset::load_csv(
        std::io::BufReader::new(file),
        CsvOptions {
            has_header: !args.no_header,
        },
    )
    .map_err(|e| CliError::from_error(args.data.display(), e))
}

fn names(data: &CategoricalDataset) -> Vec<&str> {
    data.variables().iter().map(|v| v.name()).collect()
}

/// An existing file is read; anything else is taken as the list itself.
fn load_ordering(arg: &str, data: &CategoricalDataset) -> Result<VariableOrdering, CliError> {
    let path = Path::new(arg);
    let (text, context) = if path.is_file() {
        (read_text(path)?, path.display().to_string())
    } else {
        (arg.to_owned(), "--ordering".to_owned())
    };
    formats::parse_ordering(&text, &names(data)).map_err(|e| CliError::from_error(context, e))
}

fn load_loss(arg: &str, data: &CategoricalDataset) -> Result<(NetworkLoss, Value), CliError> {
    let (spec, context) = if arg == "zero-one" {
        (LossSpec::ZeroOne, "--loss".to_owned())
    } else {
        let path = Path::new(arg);
        let text = read_text(path)?;
        let ctx = path.display().to_string();
        let spec = LossSpec::from_json(&text).map_err(|e| CliError::from_error(&ctx, e))?;
        (spec, ctx)
    };
    let resolved = spec
        .resolve(data)
        .map_err(|e| CliError::from_error(context, e))?;
    Ok((
        resolved,
        serde_json::to_value(&spec).expect("serializable spec"),
    ))
}

fn name_list(list: &str, data: &CategoricalDataset) -> Result<Vec<usize>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|n| {
            data.index_of(n)
                .ok_or_else(|| CliError::validation(format!("unknown variable `{n}`")))
        })
        .collect()
}

fn cmd_score(args: &ScoreArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = load_data(&args.data)?;
    let prior = args.prior.prior()?;
    let text = read_text(&args.dag)?;
    let dag = formats::dag_from_json(&text, &names(&data))
        .map_err(|e| CliError::from_error(args.dag.display(), e))?;
    let scores =
        family_scores(&data, &dag, &prior).map_err(|e| CliError::from_error("score", e))?;
    let report = formats::to_pretty(&formats::score_json(&dag, &scores, &data));
    emit(out, &report)?;
    if let Some(dir) = &args.out_dir {
        write_text(dir, "score.json", &report)?;
        let mut m = RunManifest::new("score");
        m.inputs = json!({"data": args.data.data, "dag": args.dag});
        m.prior = Some(prior);
        write_manifest(dir, &m)?;
    }
    Ok(())
}

fn cmd_learn(args: &LearnArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = load_data(&args.data)?;
    let prior = args.prior.prior()?;
    let ordering = load_ordering(&args.ordering, &data)?;
    let (loss, loss_value) = load_loss(&args.loss, &data)?;
    let mut config = LearnConfig::new(ordering, loss);
    config.prior = prior;
    config.cap = args.cap;
    let outcome = learn(&data, &config).map_err(|e| CliError::from_error("learn", e))?;
    let names = names(&data);
    let dot = formats::dag_to_dot(&outcome.dag, &names);
    let dag_json = formats::to_pretty(&formats::dag_to_json(&outcome.dag, &names));
    match args.format {
        FormatArg::Dot => emit(out, &dot)?,
        FormatArg::Json => emit(out, &dag_json)?,
    }
    if let Some(dir) = &args.out_dir {
        write_text(dir, "dag.dot", &dot)?;
        write_text(dir, "dag.json", &dag_json)?;
        write_text(
            dir,
            "diagnostics.json",
            &formats::to_pretty(&formats::diagnostics_json(&outcome.diagnostics, &data)),
        )?;
        let mut m = RunManifest::new("learn");
        m.inputs = json!({"data": args.data.data, "loss": args.loss});
        m.prior = Some(prior);
        m.loss = Some(loss_value);
        m.ordering = Some(formats::ordering_to_line(&config.ordering, &names));
        write_manifest(dir, &m)?;
    }
    Ok(())
}

fn cmd_posterior(args: &PosteriorArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = load_data(&args.data)?;
    let prior = args.prior.prior()?;
    let child = data
        .index_of(&args.child)
        .ok_or_else(|| CliError::validation(format!("unknown variable `{}`", args.child)))?;
    let ordering = args
        .ordering
        .as_deref()
        .map(|o| load_ordering(o, &data))
        .transpose()?;
    let family = match (&args.candidates, &ordering) {
        (Some(list), Some(o)) => CandidateParents::new(child, name_list(list, &data)?, o, args.cap)
            .map_err(|e| CliError::from_error("--candidates", e))?,
        (Some(list), None) => {
            let cands = name_list(list, &data)?;
            for (m, c) in cands.iter().enumerate() {
                if *c == child || cands[..m].contains(c) {
                    return Err(CliError::validation(
                        "--candidates must be distinct and exclude the child",
                    ));
                }
            }
            CandidateParents::unchecked(child, cands)
        }
        (None, Some(o)) => CandidateParents::from_ordering(child, o, args.cap)
            .map_err(|e| CliError::from_error("--ordering", e))?,
        (None, None) => CandidateParents::unchecked(
            child,
            (0..data.num_variables()).filter(|&v| v != child).collect(),
        ),
    };
    let lp = local_posterior(&data, &family, &prior, &ModelPrior::Uniform, args.cap)
        .map_err(|e| CliError::from_error(format!("posterior of `{}`", args.child), e))?;
    let report = formats::to_pretty(&formats::posterior_json(&lp, &data));
    emit(out, &report)?;
    if let Some(dir) = &args.out_dir {
        write_text(dir, "posterior.json", &report)?;
        let mut m = RunManifest::new("posterior");
        m.inputs =
            json!({"data": args.data.data, "child": args.child, "candidates": args.candidates});
        m.prior = Some(prior);
        m.ordering = args.ordering.clone();
        write_manifest(dir, &m)?;
    }
    Ok(())
}

fn cmd_verify(
    args: &VerifyArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    if args.trials == 0 {
        let _ = writeln!(err, "warning: --trials 0 runs no checks; passing vacuously");
    }
    let options = VerifyOptions {
        trials: args.trials,
        seed: args.seed,
        max_q: args.max_q,
        inject_fault: args.inject_fault,
    };
    let report = verify::run(&options);
    for s in &report.suites {
        let status = if s.failed() == 0 { "PASS" } else { "FAIL" };
        emit(
            out,
            &format!("{status} {}: {}/{} trials\n", s.name, s.passed, s.trials),
        )?;
        for f in &s.failures {
            let _ = writeln!(
                err,
                "{} trial {} (seed {}): {}\nreproduce with: {}",
                s.name,
                f.trial,
                f.trial_seed,
                f.message,
                serde_json::to_string(&f.manifest).expect("json")
            );
        }
    }
    if let Some(dir) = &args.out_dir {
        write_text(
            dir,
            "verify_report.json",
            &formats::to_pretty(&serde_json::to_value(&report).expect("json")),
        )?;
        let mut m = RunManifest::new("verify");
        m.inputs = json!({"trials": args.trials, "max_q": args.max_q});
        m.seed = Some(args.seed);
        write_manifest(dir, &m)?;
    }
    Ok(if report.ok() { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_sample(args: &SampleArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = read_text(&args.cpts)?;
    let (dag, cpts) =
        formats::cpts_from_json(&text).map_err(|e| CliError::from_error(args.cpts.display(), e))?;
    if let Some(path) = &args.dag {
        let names: Vec<&str> = cpts.variables.iter().map(|v| v.name()).collect();
        let given = formats::dag_from_json(&read_text(path)?, &names)
            .map_err(|e| CliError::from_error(path.display(), e))?;
        if given != dag {
            return Err(CliError::validation(format!(
                "{}: DAG does not match the parents listed in {}",
                path.display(),
                args.cpts.display()
            )));
        }
    }
    let data = sample_network(&dag, &cpts, args.n, args.seed)
        .map_err(|e| CliError::from_error(args.cpts.display(), e))?;
    let csv = data.to_csv_string();
    match &args.out {
        Some(path) => fs::write(path, &csv)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?,
        None if args.out_dir.is_none() => emit(out, &csv)?,
        None => {}
    }
    if let Some(dir) = &args.out_dir {
        write_text(dir, "data.csv", &csv)?;
        let mut m = RunManifest::new("sample");
        m.inputs = json!({"cpts": args.cpts, "dag": args.dag, "n": args.n});
        m.seed = Some(args.seed);
        write_manifest(dir, &m)?;
    }
    Ok(())
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::validation(format!("stdout: {e}")))
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), CliError> {
    write_text(
        dir,
        "manifest.json",
        &formats::to_pretty(&serde_json::to_value(m).expect("json")),
    )
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_VALIDATION
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Score(a) => cmd_score(a, out).map(|()| EXIT_OK),
        Command::Learn(a) => cmd_learn(a, out).map(|()| EXIT_OK),
        Command::Posterior(a) => cmd_posterior(a, out).map(|()| EXIT_OK),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Sample(a) => cmd_sample(a, out).map(|()| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
