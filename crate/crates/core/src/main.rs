use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparsedetect::experiment::{self, ExperimentConfig, Report};
use sparsedetect::Error;

#[derive(Parser)]
#[command(name = "sparsedetect", version, about = "Sequential detection of sparse changes in parallel streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate a threshold to a target average run length.
    Calibrate(RunArgs),
    /// Estimate detection delays at a given threshold.
    Delay(RunArgs),
    /// Reproduce a reference table (1 to 6).
    Table {
        id: u32,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Regime classification and asymptotic delay bounds.
    Bounds(BoundsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rule: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta0: Option<String>,
    #[arg(long = "lambda-m", allow_hyphen_values = true)]
    lambda_m: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n_streams: Option<String>,
    #[arg(long)]
    window_k1: Option<String>,
    #[arg(long)]
    window_r: Option<String>,
    #[arg(long)]
    window_cap: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// Defaults to $SPARSEDETECT_SEED.
    #[arg(long)]
    seed: Option<String>,
    /// Comma separated, e.g. 1,3,5,10.
    #[arg(long)]
    subset_sizes: Option<String>,
    /// Write CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rendering on stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    #[arg(long)]
    workers: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    zeta: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    n_streams: usize,
    #[arg(long)]
    subset_size: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

impl RunArgs {
    fn config(&self) -> sparsedetect::Result<ExperimentConfig> {
        let mut config = ExperimentConfig::default();
        if let Ok(seed) = std::env::var("SPARSEDETECT_SEED") {
            config.set("seed", &seed).map_err(|e| Error::Config(format!("SPARSEDETECT_SEED: {e}")))?;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            config.apply_file_contents(&text)?;
        }
        let flags = [
            ("rule", &self.rule),
            ("lambda1", &self.lambda1),
            ("lambda2", &self.lambda2),
            ("epsilon0", &self.epsilon0),
            ("delta0", &self.delta0),
            ("lambda_m", &self.lambda_m),
            ("model", &self.model),
            ("n_streams", &self.n_streams),
            ("window_k1", &self.window_k1),
            ("window_r", &self.window_r),
            ("window_cap", &self.window_cap),
            ("gamma", &self.gamma),
            ("threshold", &self.threshold),
            ("trials", &self.trials),
            ("horizon", &self.horizon),
            ("subset_sizes", &self.subset_sizes),
            ("workers", &self.workers),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        config.out = self.out.clone();
        Ok(config)
    }
}

fn emit(report: &Report, out: Option<&PathBuf>, format: FormatArg) -> sparsedetect::Result<()> {
    if let Some(path) = out {
        std::fs::write(path, report.to_csv())
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    match format {
        FormatArg::Text => print!("{}", report.to_text()),
        FormatArg::Csv => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonBracketing { .. } | Error::Calibration(_) | Error::Censored { .. } => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> sparsedetect::Result<Report> {
    let (report, out, format) = match cli.command {
        Command::Calibrate(args) => (experiment::run_calibrate(&args.config()?)?, args.out, args.format),
        Command::Delay(args) => (experiment::run_delay(&args.config()?)?, args.out, args.format),
        Command::Table { id, run } => (experiment::run_table(id, &run.config()?)?, run.out, run.format),
        Command::Bounds(b) => {
            (experiment::run_bounds(b.beta, b.zeta, b.delta, b.n_streams, b.subset_size)?, b.out, b.format)
        }
    };
    emit(&report, out.as_ref(), format)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) if report.failures() > 0 => {
            for row in report.rows.iter().filter(|r| r.note.is_some()) {
                eprintln!("failed: {} {} {}: {}", row.rule, row.params, row.metric, row.note.as_deref().unwrap_or(""));
            }
            eprintln!("{} cell(s) failed", report.failures());
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
