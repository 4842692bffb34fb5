//! Command-line front end for the lacuna synthesis library.
//!
//! Subcommands cover the full experiment pipeline: `inject` masks complete
//! data, `synthesize` runs a budgeted generation method, `amplify` prices a
//! marginal workload against observed missingness, `evaluate` scores
//! synthetic output, `accountant` exposes the RDP calculators, and `bench`
//! sweeps the whole grid. Every run is reproducible: outputs depend only on
//! flags and input bytes, and each output directory receives a manifest with
//! the resolved configuration and input digests.
//!
//! Exit codes: 0 success, 2 argument or validation error, 1 runtime failure.

mod ops;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

fn epsilon_flag(s: &str) -> Result<f64, String> {
    lacuna::jsonio::parse_epsilon(s).map_err(|e| e.to_string())
}

#[derive(Parser)]
#[command(name = "lacuna", version, about = "Differentially private synthesis over incomplete data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mask a complete dataset with a missingness mechanism.
    Inject(InjectArgs),
    /// Synthesize data under a privacy budget.
    Synthesize(SynthesizeArgs),
    /// Price a marginal workload with missingness amplification.
    Amplify(AmplifyArgs),
    /// Score synthetic data against real data.
    Evaluate(EvaluateArgs),
    /// Renyi-DP accounting calculators.
    Accountant {
        #[command(subcommand)]
        sub: AccountantCmd,
    },
    /// Run the full methods x mechanisms x rates x budgets grid.
    Bench(BenchArgs),
}

#[derive(Args, Serialize)]
struct InjectArgs {
    /// Complete input dataset (CSV with header).
    #[arg(long)]
    input: PathBuf,
    /// Schema file (JSON).
    #[arg(long)]
    schema: PathBuf,
    /// One of: mcar, mcar-global, mar, mnar.
    #[arg(long)]
    mechanism: String,
    /// Overall missing rate (mcar-global, mar, mnar).
    #[arg(long)]
    rate: Option<f64>,
    /// Per-column missing probabilities (mcar), comma separated.
    #[arg(long, value_delimiter = ',')]
    phi: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Escalate the MAR rate until at most this many complete rows remain.
    #[arg(long)]
    mar_sr_target: Option<usize>,
    /// Token that marks a missing cell in CSV files.
    #[arg(long, default_value = "?")]
    missing_token: String,
    /// Output directory (created if absent).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct SynthesizeArgs {
    /// Input dataset (CSV with header; may contain missing cells).
    #[arg(long)]
    input: PathBuf,
    /// Schema file (JSON).
    #[arg(long)]
    schema: PathBuf,
    /// Method string: privbayes, privbayese, kamino, kamino-i,
    /// complete-row:<m>, or impute-first:<imputer>:<split>:<m>.
    #[arg(long)]
    method: String,
    /// Privacy budget; accepts "inf".
    #[arg(long, value_parser = epsilon_flag)]
    #[serde(with = "lacuna::jsonio::eps")]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Maximum number of parents per attribute in the fitted network.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Fraction of the budget spent on structure (or first-histogram) fitting.
    #[arg(long, default_value_t = 0.5)]
    structure_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of synthetic rows (default: as many as the input).
    #[arg(long)]
    rows: Option<usize>,
    /// Also write the fitted generation model as model.json.
    #[arg(long, default_value_t = false)]
    emit_model: bool,
    #[arg(long, default_value = "?")]
    missing_token: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct AmplifyArgs {
    /// Marginal workload file: JSON array of {attrs, epsilon}.
    #[arg(long)]
    queries: PathBuf,
    /// Missingness estimate file: JSON {phi: [...], n}.
    #[arg(long)]
    phi_file: Option<PathBuf>,
    /// Estimate phi from a masked CSV instead (requires --schema).
    #[arg(long)]
    from_mask: Option<PathBuf>,
    /// Schema file, required with --from-mask.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Search strategy: exact, greedy, or columnwise.
    #[arg(long, default_value = "exact")]
    search: String,
    /// Cost convention: linear, exact, or both.
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, default_value = "?")]
    missing_token: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// Real dataset (CSV).
    #[arg(long)]
    real: PathBuf,
    /// Synthetic dataset (CSV, same schema).
    #[arg(long)]
    synthetic: PathBuf,
    /// Schema file (JSON).
    #[arg(long)]
    schema: PathBuf,
    /// Marginal orders to report, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    kway: Vec<usize>,
    /// Also run the synthetic-train/real-test F1 protocol.
    #[arg(long, default_value_t = false)]
    f1: bool,
    /// F1 target attributes: "all" or a comma-separated index list.
    #[arg(long, default_value = "all")]
    targets: String,
    /// Per-subset distance: max-cell (default) or tv.
    #[arg(long, default_value = "max-cell")]
    distance: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seeded repetitions aggregated into mean and std.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value = "?")]
    missing_token: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum AccountantCmd {
    /// RDP curve of a single sampled Gaussian release.
    Sgm(SgmArgs),
    /// Full training-run accounting for the interleaved two-model loop.
    Misgan(MisganArgs),
    /// Convert an RDP curve file to an (epsilon, delta) guarantee.
    Convert(ConvertArgs),
    /// Smallest noise multiplier meeting a target budget.
    SigmaSearch(SigmaSearchArgs),
}

#[derive(Args, Serialize)]
struct SgmArgs {
    #[arg(long)]
    sigma: f64,
    /// Subsampling rate in [0, 1].
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 2.0)]
    sensitivity: f64,
    /// Largest RDP order; the curve covers integer orders 2..=alpha-max.
    #[arg(long, default_value_t = 64)]
    alpha_max: u32,
    /// moment or log-moment.
    #[arg(long, default_value = "log-moment")]
    form: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct MisganArgs {
    /// Total training steps T.
    #[arg(long)]
    steps: u64,
    /// Generator update interval T_G.
    #[arg(long)]
    generator_interval: u64,
    /// Batch size B.
    #[arg(long)]
    batch: u64,
    /// Dataset size |D|.
    #[arg(long)]
    data_size: u64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 64)]
    alpha_max: u32,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ConvertArgs {
    /// RDP curve file: JSON with "orders" and "values" arrays.
    #[arg(long)]
    curve_file: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SigmaSearchArgs {
    #[arg(long)]
    target_epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    steps: u64,
    #[arg(long)]
    generator_interval: u64,
    #[arg(long)]
    batch: u64,
    #[arg(long)]
    data_size: u64,
    #[arg(long, default_value_t = 64)]
    alpha_max: u32,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    /// Complete input dataset (CSV); the grid injects its own missingness.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Method strings, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<String>,
    /// Mechanisms, comma separated: mcar, mar, mnar.
    #[arg(long, value_delimiter = ',', default_value = "mcar,mar,mnar")]
    mechanisms: Vec<String>,
    /// Missing rates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.2,0.3")]
    rates: Vec<f64>,
    /// Budgets, comma separated; accepts "inf".
    #[arg(long, value_delimiter = ',', value_parser = epsilon_flag, default_value = "0.5,1,3,5,10,inf")]
    #[serde(with = "lacuna::jsonio::eps_vec")]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Marginal orders to report, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    ks: Vec<usize>,
    /// F1 target attributes, comma separated; omit to skip F1.
    #[arg(long, value_delimiter = ',')]
    f1_targets: Option<Vec<usize>>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "?")]
    missing_token: String,
    #[arg(long)]
    output: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Inject(a) => ops::inject(&a),
        Cmd::Synthesize(a) => ops::synthesize(&a),
        Cmd::Amplify(a) => ops::amplify(&a),
        Cmd::Evaluate(a) => ops::evaluate(&a),
        Cmd::Accountant { sub } => match sub {
            AccountantCmd::Sgm(a) => ops::accountant_sgm(&a),
            AccountantCmd::Misgan(a) => ops::accountant_misgan(&a),
            AccountantCmd::Convert(a) => ops::accountant_convert(&a),
            AccountantCmd::SigmaSearch(a) => ops::accountant_sigma_search(&a),
        },
        Cmd::Bench(a) => ops::bench(&a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(if e.is_validation() { 2 } else { 1 });
    }
}
