use clap::{Args, Parser, Subcommand, ValueEnum};
use nor_bench::record::{append_csv, write_csv};
use nor_bench::{run, verify, ExperimentConfig, Suite, VerifyOptions};
use nor_core::datagen::{gen_synthetic, save_libsvm, Decay, SyntheticConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "norbench", version, about = "Randomized-reduction ERM experiments and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset in libsvm format.
    Gen(GenArgs),
    /// Run an experiment grid and write one CSV row per cell.
    Run(RunArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// Like `run`, defaulting to NOR over all operators and m = 5,10,20,40,80.
    Sweep(RunArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 200)]
    d: usize,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Appended noise features.
    #[arg(long, default_value_t = 10)]
    t: usize,
    /// `exp-<τ>` or `poly-<τ>`.
    #[arg(long, default_value = "exp-1")]
    decay: Decay,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// d = 1000, n = 100000.
    #[arg(long)]
    full_scale: bool,
    #[arg(long, short)]
    out: PathBuf,
}

/// Every flag maps onto the config key of the same name.
#[derive(Args)]
struct RunArgs {
    /// `key = value` file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Append rows to this CSV (header written if the file is new); stdout otherwise.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// `synthetic` or a libsvm path.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    libsvm: Option<String>,
    #[arg(long)]
    n_features: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    decay: Option<String>,
    #[arg(long)]
    data_seed: Option<String>,
    #[arg(long)]
    full_scale: bool,
    /// Comma list of Full, NOR, RP, RPDR.
    #[arg(long)]
    methods: Option<String>,
    /// Comma list of RS, RG, SRHT, RH.
    #[arg(long)]
    operators: Option<String>,
    #[arg(long)]
    m_grid: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    master_seed: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Tune λ per cell over this comma list on a holdout split.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// `hinge` or `softmax:K`.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    gap_tol: Option<String>,
    /// `error_rate` or `auprc`.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Write zero timings so reruns produce identical bytes.
    #[arg(long)]
    no_timings: bool,
}

impl RunArgs {
    fn config(&self, base: ExperimentConfig) -> nor_bench::Result<ExperimentConfig> {
        let mut cfg = base;
        if let Some(path) = &self.config {
            cfg.apply_kv_text(&std::fs::read_to_string(path)?)?;
        }
        let flags = [
            ("dataset", &self.dataset),
            ("libsvm", &self.libsvm),
            ("n_features", &self.n_features),
            ("d", &self.d),
            ("n", &self.n),
            ("t", &self.t),
            ("decay", &self.decay),
            ("data_seed", &self.data_seed),
            ("methods", &self.methods),
            ("operators", &self.operators),
            ("m_grid", &self.m_grid),
            ("seeds", &self.seeds),
            ("master_seed", &self.master_seed),
            ("lambda", &self.lambda),
            ("lambda_grid", &self.lambda_grid),
            ("loss", &self.loss),
            ("gap_tol", &self.gap_tol),
            ("metric", &self.metric),
            ("threads", &self.threads),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.full_scale {
            cfg.set("full_scale", "true")?;
        }
        if self.no_timings {
            cfg.record_timings = false;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run (repeatable); all when omitted.
    #[arg(long = "suite", short)]
    suites: Vec<Suite>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = VerifyOptions::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn sweep_defaults() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.set("methods", "NOR").expect("valid");
    cfg.set("operators", "RS, RG, SRHT, RH").expect("valid");
    cfg.set("m_grid", "5, 10, 20, 40, 80").expect("valid");
    cfg
}

fn run_grid(args: &RunArgs, base: ExperimentConfig) -> nor_bench::Result<ExitCode> {
    let cfg = args.config(base)?;
    let records = run(&cfg)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    match &args.out {
        Some(path) => append_csv(path, &records)?,
        None => write_csv(std::io::stdout().lock(), &records, true)?,
    }
    log::info!("{} records, {failed} failed", records.len());
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: &VerifyArgs) -> nor_bench::Result<ExitCode> {
    let opts = VerifyOptions { trials: args.trials, seed: args.seed, threads: args.threads };
    let suites = if args.suites.is_empty() { Suite::ALL.to_vec() } else { args.suites.clone() };
    let mut reports = Vec::new();
    for s in suites {
        log::info!("running suite {s}");
        reports.push(verify(s, &opts));
    }
    let text = match args.format {
        Format::Text => reports.iter().map(|r| r.to_text()).collect::<String>(),
        Format::Json => serde_json::to_string_pretty(&reports)? + "\n",
    };
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(if reports.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run_gen(args: &GenArgs) -> nor_bench::Result<ExitCode> {
    let cfg = if args.full_scale {
        SyntheticConfig::full_scale(args.decay, args.seed)
    } else {
        SyntheticConfig { d: args.d, n: args.n, t: args.t, decay: args.decay, seed: args.seed }
    };
    let ds = gen_synthetic(&cfg)?;
    save_libsvm(&ds, &args.out)?;
    log::info!("wrote {} examples with {} features to {}", ds.n(), ds.dim(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Run(a) => run_grid(a, ExperimentConfig::default()),
        Command::Sweep(a) => run_grid(a, sweep_defaults()),
        Command::Verify(a) => run_verify(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
