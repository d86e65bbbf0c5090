//! `mfres`: builds coefficient caches, evaluates twisted central values and
//! runs resonance experiments and verification suites.

mod cache;
mod commands;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// A verification check failed; the JSON report has been written.
    Check(String),
    Env(String),
    Compute(String),
}

impl From<mfres::Error> for CliError {
    fn from(e: mfres::Error) -> Self {
        match e {
            mfres::Error::Domain(m) => CliError::Usage(m),
            mfres::Error::Io { .. } | mfres::Error::Parse { .. } => CliError::Env(e.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Check(_) | CliError::Compute(_) => 1,
            CliError::Env(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Check(m) | CliError::Env(m) | CliError::Compute(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mfres", version, about = "Plus-space forms, twisted central L-values and resonance experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Working precision in bits.
    #[arg(long, global = true, default_value_t = 128)]
    pub bits: u32,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Cache directory (default: $MFRES_CACHE, then ./cache).
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Worker threads; 0 picks automatically.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenform coefficient caches.
    Forms {
        #[command(subcommand)]
        action: FormsAction,
    },
    /// Plus-space caches.
    Plus {
        #[command(subcommand)]
        action: PlusAction,
    },
    /// Central value L(f, χ_D, k), or a batch over a range of |D|.
    Lvalue(LvalueCmd),
    /// Resonator statistics and the large-value search.
    Resonate(ResonateArgs),
    /// Σ χ_D(u) over the resonance family.
    Charsum(CharsumArgs),
    /// The three evaluations of D_g(s).
    Dseries(DseriesArgs),
    /// Run verification suites; exit 0 iff every check passes.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum FormsAction {
    Build {
        #[arg(long)]
        weight: u32,
        /// Largest prime with a stored coefficient.
        #[arg(long)]
        prec: u64,
    },
}

#[derive(Subcommand, Debug)]
pub enum PlusAction {
    Build {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        prec: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
pub struct LvalueCmd {
    #[command(subcommand)]
    pub batch: Option<LvalueBatch>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long = "D", allow_hyphen_values = true)]
    pub d: Option<i64>,
    /// 1-based eigenform index.
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
}

#[derive(Subcommand, Debug)]
pub enum LvalueBatch {
    /// All fundamental D with (−1)^k D > 0 and from < |D| ≤ to.
    Batch {
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[arg(long)]
        to: u64,
        #[arg(long, default_value_t = 1)]
        nu: usize,
        /// Keep only D ≡ 1 (mod 4).
        #[arg(long)]
        one_mod_four: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ResonateArgs {
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub x: u64,
    /// Prime window `lo:hi`.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub nmax: Option<u64>,
    #[arg(long = "L")]
    pub l: Option<f64>,
    /// Multiplier on r(p) = L/(√p log p).
    #[arg(long)]
    pub strength: Option<f64>,
    /// Number of top discriminants (by R(D)²) to evaluate.
    #[arg(long, default_value_t = 100)]
    pub top: usize,
    /// The constant A in L(f₁) > A Σ_{ν≥2} L(f_ν).
    #[arg(long = "A", default_value_t = 1.0)]
    pub a: f64,
    /// Family members used for global means and the observed shift.
    #[arg(long, default_value_t = 200)]
    pub sample: usize,
    /// Precision of the central values in this run.
    #[arg(long, default_value_t = 32)]
    pub lvalue_bits: u32,
    /// Comma-separated odd u for the character-sum table.
    #[arg(long, default_value = "1,3,9")]
    pub lemma1: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct CharsumArgs {
    #[arg(long)]
    pub u: u64,
    #[arg(long)]
    pub x: u64,
    /// Sets the family sign (−1)^k.
    #[arg(long, default_value_t = 6)]
    pub k: u32,
}

#[derive(Args, Debug, Clone)]
pub struct DseriesArgs {
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub s: f64,
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
    #[arg(long, default_value_t = 20_000)]
    pub terms: u64,
    #[arg(long, default_value_t = 2_000)]
    pub dmax: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Plus,
    Waldspurger,
    Dseries,
    Resonance,
    Charsum,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 6)]
    pub k: u32,
    /// u for the charsum suite.
    #[arg(long, default_value_t = 9)]
    pub u: u64,
    /// X for the charsum and resonance suites.
    #[arg(long, default_value_t = 1_000_000)]
    pub x: u64,
}

pub fn cache_root(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("MFRES_CACHE").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cache"))
}

/// Writes `text` to `out` (atomically) or to standard output.
pub fn emit_text(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, text).map_err(|e| CliError::Env(format!("cannot write {}: {e}", tmp.display())))?;
            std::fs::rename(&tmp, path).map_err(|e| CliError::Env(format!("cannot write {}: {e}", path.display())))
        }
    }
}

pub fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.global.bits < 16 {
        return Err(CliError::Usage(format!("--bits {} is below the minimum of 16", cli.global.bits)));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build_global()
        .map_err(|e| CliError::Env(format!("thread pool: {e}")))?;
    let g = &cli.global;
    match &cli.command {
        Command::Forms {
            action: FormsAction::Build { weight, prec },
        } => commands::forms_build(g, *weight, *prec),
        Command::Plus {
            action: PlusAction::Build { k, prec },
        } => commands::plus_build(g, *k, *prec),
        Command::Lvalue(cmd) => match &cmd.batch {
            Some(LvalueBatch::Batch {
                k,
                from,
                to,
                nu,
                one_mod_four,
                format,
            }) => commands::lvalue_batch(g, *k, *from, *to, *nu, *one_mod_four, *format),
            None => {
                let (Some(k), Some(d)) = (cmd.k, cmd.d) else {
                    return Err(CliError::Usage("lvalue needs --k and --D (or the batch subcommand)".into()));
                };
                commands::lvalue(g, k, d, cmd.nu)
            }
        },
        Command::Resonate(a) => commands::resonate(g, a),
        Command::Charsum(a) => commands::charsum(g, a),
        Command::Dseries(a) => commands::dseries(g, a),
        Command::Verify(a) => verify::run(g, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
