use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multinorm::amplify::{beta_norm, max_norm_with_decomposition, min_norm, AmplifiedElement};
use multinorm::gtensor::general_norm;
use multinorm::pctensor::pconvex_norm;
use multinorm::search::SearchConfig;
use multinorm::suites::{run_suite, Suite, SuiteOptions, SuiteReport};
use multinorm::{Error, Exponent, NormBracket};
use serde::Serialize;
use serde_json::Value;

mod instance;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(_) => CliError::Usage(e.to_string()),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Precondition(_) => 3,
        }
    }
}

/// Certified brackets for amplified and tensor norms over ℓp.
#[derive(Parser, Debug)]
#[command(name = "multinorm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Norm of an amplified element under a chosen quantization.
    Norm(NormArgs),
    /// The general L-tensor norm of an element of `E ⊗ F`.
    Gnorm(RunArgs),
    /// The p-convex tensor norm of an element of `E ⊗ F`.
    Pnorm(PnormArgs),
    /// Runs a property suite.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Quant {
    Min,
    Max,
    Beta,
    Gnorm,
    Pnorm,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Oracle {
    Search,
    #[value(name = "thm64")]
    LqProduct,
}

#[derive(Args, Debug)]
struct Common {
    /// Base exponent p; overrides the instance's.
    #[arg(long)]
    p: Option<f64>,
    /// Exponent of the factor space when the instance names none.
    #[arg(long)]
    q: Option<f64>,
    /// Term cap for representation searches; 0 keeps canonical representations.
    #[arg(long, default_value_t = 8)]
    budget: usize,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    fn search(&self) -> SearchConfig {
        SearchConfig { term_cap: self.budget, restarts: self.restarts, ..SearchConfig::with_seed(self.seed) }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct NormArgs {
    #[arg(long, value_enum)]
    quant: Quant,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct PnormArgs {
    /// `thm64` requires min-quantized Lq factors with q conjugate to p.
    #[arg(long, value_enum, default_value_t = Oracle::Search)]
    oracle: Oracle,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    suite: String,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    instance_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quant: Option<Quant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<NormBracket>,
    #[serde(skip_serializing_if = "Option::is_none")]
    representation: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    suite: Option<SuiteReport>,
    passed: bool,
}

impl RunReport {
    fn norm(command: &'static str, seed: u64, digest: String, quant: Quant, b: NormBracket) -> Self {
        RunReport {
            command,
            seed,
            instance_digest: Some(digest),
            quant: Some(quant),
            lower: Some(b.lower),
            upper: Some(b.upper),
            oracle: None,
            representation: None,
            suite: None,
            passed: true,
        }
    }

    /// Flat `(key, value)` rows for the table and csv formats.
    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![("command".to_string(), self.command.to_string()), ("seed".into(), self.seed.to_string())];
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                rows.push((k.to_string(), v));
            }
        };
        push("instance_digest", self.instance_digest.clone());
        push("quant", self.quant.map(|q| format!("{q:?}").to_lowercase()));
        push("lower", self.lower.map(|v| format!("{v:.12}")));
        push("upper", self.upper.map(|v| format!("{v:.12}")));
        push("oracle_lower", self.oracle.map(|o| format!("{:.12}", o.lower)));
        push("oracle_upper", self.oracle.map(|o| format!("{:.12}", o.upper)));
        if let Some(s) = &self.suite {
            push("suite", Some(s.suite.to_string()));
            push("trials", Some(s.trials.to_string()));
            push("checks", Some(s.checks.to_string()));
            push("failures", Some(s.failures.to_string()));
            push("max_gap", Some(format!("{:.3e}", s.max_gap)));
        }
        push("passed", Some(self.passed.to_string()));
        rows
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn cmd_norm(quant: Quant, run: &RunArgs, command: &'static str) -> Result<RunReport, CliError> {
    let loaded = instance::load(&run.instance)?;
    let inst = &loaded.instance;
    let c = &run.common;
    let cfg = c.search();
    let u: AmplifiedElement = inst.element_with(c.p)?;
    let report = |b| RunReport::norm(command, c.seed, loaded.digest.clone(), quant, b);
    Ok(match quant {
        Quant::Min => report(min_norm(&u, &inst.single_space(c.q)?, &cfg.opnorm)),
        Quant::Max => {
            let (b, dec) = max_norm_with_decomposition(&u, &inst.single_space(c.q)?, &cfg);
            RunReport { representation: dec.map(|d| to_value(&d)), ..report(b) }
        }
        Quant::Beta => {
            let f = inst.factors()?;
            let r = beta_norm(&u, &f.left.space, &f.right, &cfg)?;
            RunReport { representation: Some(to_value(&r.terms)), ..report(r.bracket) }
        }
        Quant::Gnorm => {
            let g = general_norm(&u, &inst.factors()?, &cfg)?;
            RunReport { representation: Some(to_value(&g.representation)), ..report(g.bracket) }
        }
        Quant::Pnorm => {
            let g = pconvex_norm(&u, &inst.factors()?, &cfg)?;
            RunReport { representation: Some(to_value(&g.representation)), oracle: g.oracle, ..report(g.bracket) }
        }
    })
}

fn cmd_pnorm(args: &PnormArgs) -> Result<RunReport, CliError> {
    let report = cmd_norm(Quant::Pnorm, &args.run, "pnorm")?;
    if matches!(args.oracle, Oracle::LqProduct) && report.oracle.is_none() {
        return Err(CliError::Precondition(
            "the Lq identification needs min-quantized Lq factors with q conjugate to p and 1 < p < ∞".into(),
        ));
    }
    Ok(report)
}

fn cmd_verify(args: &VerifyArgs) -> Result<RunReport, CliError> {
    let suite: Suite = args.suite.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let c = &args.common;
    let opts =
        SuiteOptions { trials: args.trials, seed: c.seed, p: c.p.map(Exponent::new).transpose()?, search: c.search() };
    let s = run_suite(suite, &opts)?;
    Ok(RunReport {
        command: "verify",
        seed: c.seed,
        instance_digest: None,
        quant: None,
        lower: None,
        upper: None,
        oracle: None,
        representation: None,
        passed: s.passed,
        suite: Some(s),
    })
}

fn render(report: &RunReport, format: Format, elapsed: f64) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("serializable") + "\n",
        Format::Table => {
            let mut rows = report.rows();
            rows.push(("wall_time_s".into(), format!("{elapsed:.3}")));
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
        }
        Format::Csv => {
            let rows = report.rows();
            let header: Vec<_> = rows.iter().map(|(k, _)| k.as_str()).collect();
            let values: Vec<_> = rows.iter().map(|(_, v)| v.as_str()).collect();
            format!("{}\n{}\n", header.join(","), values.join(","))
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("MULTINORM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Ignoring the error keeps an already-built pool, which only happens in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn run(cli: &Cli) -> Result<RunReport, CliError> {
    match &cli.command {
        Command::Norm(a) => cmd_norm(a.quant, &a.run, "norm"),
        Command::Gnorm(a) => cmd_norm(Quant::Gnorm, a, "gnorm"),
        Command::Pnorm(a) => cmd_pnorm(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn common(cli: &Cli) -> &Common {
    match &cli.command {
        Command::Norm(a) => &a.run.common,
        Command::Gnorm(a) => &a.common,
        Command::Pnorm(a) => &a.run.common,
        Command::Verify(a) => &a.common,
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let start = Instant::now();
    let c = common(&cli);
    let result = run(&cli).and_then(|report| {
        emit(&render(&report, c.format, start.elapsed().as_secs_f64()), c.out.as_ref())?;
        Ok(report.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
