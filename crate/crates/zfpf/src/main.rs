//! `zfpf`: estimate zero-free partition functions from JSON model files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zfpf::cli::{parse_complex, parse_region, run, CommandKind, MeasurementSource, RunConfig};
use zfpf::Error;

#[derive(Parser)]
#[command(
    name = "zfpf",
    about = "Deterministic estimation of zero-free quantum and CSP partition functions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model file (Hamiltonian JSON, or CSP JSON for csp-estimate)
    #[arg(long)]
    input: PathBuf,

    /// Measurement JSON file, or the literal `identity`
    #[arg(long, default_value = "identity")]
    measurement: String,

    /// Inverse temperature (or external field for csp-estimate) as RE or RE,IM
    #[arg(long, default_value = "0")]
    beta: String,

    /// Multiplicative error bound in (0,1)
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,

    /// Interpolation margin in (0,1)
    #[arg(long, default_value_t = 0.1)]
    delta: f64,

    /// Zero-freeness bound |log f| <= M on the region (required with an
    /// explicit --region)
    #[arg(long = "M")]
    m_bound: Option<f64>,

    /// Region: auto, disc:RADIUS or strip:RE,IM,DELTA
    #[arg(long, default_value = "auto")]
    region: String,

    /// RNG seed for sample
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Truncation order for coeffs
    #[arg(long)]
    order: Option<usize>,

    /// Worker threads for the coefficient engine (default: all cores)
    #[arg(long)]
    threads: Option<usize>,

    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Z_{H,O}(beta) by Taylor interpolation
    Estimate(Common),
    /// Exact Z_{H,O}(beta) by dense eigendecomposition
    Oracle(Common),
    /// Taylor coefficients of log(Z_{H,O}/Tr O) at the origin
    Coeffs(Common),
    /// Draw one Gibbs measurement sample
    Sample(Common),
    /// Estimate a Boolean CSP partition function with external field
    #[command(name = "csp-estimate")]
    CspEstimate(Common),
}

fn build_config(kind: CommandKind, common: &Common) -> Result<RunConfig, Error> {
    let mut config = RunConfig::new(kind, common.input.clone());
    config.measurement = if common.measurement == "identity" {
        MeasurementSource::Identity
    } else {
        MeasurementSource::File(PathBuf::from(&common.measurement))
    };
    config.beta = parse_complex(&common.beta)?;
    config.epsilon = common.epsilon;
    config.delta = common.delta;
    config.m_bound = common.m_bound;
    config.region = parse_region(&common.region)?;
    config.seed = common.seed;
    config.order = common.order;
    config.apply_env()?;
    Ok(config)
}

fn execute(kind: CommandKind, common: &Common) -> Result<(), Error> {
    if let Some(threads) = common.threads {
        // Ignore the error if a pool already exists (e.g. repeated calls
        // in tests); the first configuration wins.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let config = build_config(kind, common)?;
    let report = run(&config)?;
    match &common.out {
        Some(path) => std::fs::write(path, report.as_bytes())
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))?,
        None => println!("{report}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Estimate(c) => (CommandKind::Estimate, c),
        Command::Oracle(c) => (CommandKind::Oracle, c),
        Command::Coeffs(c) => (CommandKind::Coeffs, c),
        Command::Sample(c) => (CommandKind::Sample, c),
        Command::CspEstimate(c) => (CommandKind::CspEstimate, c),
    };
    match execute(kind, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
