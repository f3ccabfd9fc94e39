use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdre::ansatz::{solve_extension, ExtensionRequest, Model};
use sdre::ksol::{f_sym, k_constant, k_spectral};
use sdre::structure::{acf_constant, acf_spectral, hat_family};
use sdre::suite::{parse_selection, run, KSpec, SuiteOptions, SuiteReport};
use sdre::twist::*;
use sdre::{DynScalar, FamilyName, KTag, Sampler, Symbol, TensorOp, TwistName};

/// println! that tolerates a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "sdre", version, about = "Exact checks of semi-dynamical reflection equation identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an identity suite, or `all`.
    Verify(VerifyArgs),
    /// Print an operator as JSON.
    Dump {
        #[command(subcommand)]
        what: DumpCommand,
    },
    /// Run the spectral-extension solver.
    Solve {
        #[command(subcommand)]
        what: SolveCommand,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name, or `all`.
    suite: String,
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    n: Vec<usize>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',', env = "SDRE_SEED", default_value = "1")]
    seed: Vec<u64>,
    #[arg(long, env = "SDRE_SAMPLES", default_value_t = 20)]
    samples: usize,
    #[arg(long)]
    family: Option<String>,
    /// K to bind, e.g. IIb, IIa-naive, IIb-zero-column, diagonal, khat.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    twist: Option<String>,
    #[arg(long)]
    tag: Option<String>,
    /// Check every identity with γ → 2γ on one side; the run should fail.
    #[arg(long)]
    perturb: bool,
    /// Report file for a single run, or a directory for several.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DumpCommand {
    Matrix(DumpArgs),
}

#[derive(Args)]
struct DumpArgs {
    /// acf-constant, acf-spectral or hat for A, B, C, D; `k` for solutions; omit for twist data.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    tag: Option<String>,
    /// The spectral extension of K.
    #[arg(long)]
    spectral: bool,
}

#[derive(Subcommand)]
enum SolveCommand {
    Extension(ExtensionArgs),
}

#[derive(Args)]
struct ExtensionArgs {
    #[arg(long)]
    base: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    order: u32,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, default_value = "pointwise")]
    model: String,
    #[arg(long, env = "SDRE_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "SDRE_SAMPLES", default_value_t = 4)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A configuration or input problem; exits 2.
struct ConfigError(String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Dump { what: DumpCommand::Matrix(a) } => dump(a).map(|_| true),
        Command::Solve { what: SolveCommand::Extension(a) } => extension(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(ConfigError(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn parse_opt<T: std::str::FromStr>(s: &Option<String>) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    s.as_deref().map(str::parse).transpose().map_err(ConfigError::from)
}

fn verify(a: VerifyArgs) -> Result<bool, ConfigError> {
    let suites = parse_selection(&a.suite)?;
    let family: Option<FamilyName> = parse_opt(&a.family)?;
    let k: Option<KSpec> = parse_opt(&a.k)?;
    let twist: Option<TwistName> = parse_opt(&a.twist)?;
    let tag: Option<KTag> = parse_opt(&a.tag)?;
    if a.n.iter().any(|&n| n < 2) {
        return Err(ConfigError("--n values must be at least 2".into()));
    }
    if a.samples == 0 {
        return Err(ConfigError("--samples must be positive".into()));
    }
    let mut runs: Vec<SuiteReport> = Vec::new();
    for &suite in &suites {
        for &n in &a.n {
            for &seed in &a.seed {
                let mut o = SuiteOptions::new(n, seed, a.samples);
                o.family = family;
                o.k = k;
                o.twist = twist;
                o.tag = tag;
                o.perturb = a.perturb;
                runs.push(run(suite, &o)?);
            }
        }
    }
    print_table(&runs);
    if let Some(out) = &a.out {
        write_reports(out, &runs)?;
    }
    let pass = runs.iter().all(|r| r.pass);
    if let Some(w) = runs.iter().find(|r| !r.pass).and_then(SuiteReport::first_witness) {
        say!("first failure: {w}");
    }
    Ok(pass)
}

fn print_table(runs: &[SuiteReport]) {
    say!("{:<16} {:>2} {:>6} {:>7} {:>7} {:>6}", "suite", "n", "seed", "checks", "failed", "result");
    for r in runs {
        let name = if r.perturbed { format!("{}*", r.suite) } else { r.suite.clone() };
        let result = if r.pass { "PASS" } else { "FAIL" };
        say!("{:<16} {:>2} {:>6} {:>7} {:>7} {:>6}", name, r.n, r.seed, r.reports.len(), r.failed(), result);
    }
}

fn write_reports(out: &Path, runs: &[SuiteReport]) -> Result<(), ConfigError> {
    if let [single] = runs {
        return write_json(out, single);
    }
    fs::create_dir_all(out)?;
    for r in runs {
        write_json(&out.join(format!("{}-n{}-seed{}.json", r.suite, r.n, r.seed)), r)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<(), ConfigError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn f0() -> DynScalar {
    DynScalar::sym(Symbol::F0)
}

fn lookup(a: &DumpArgs) -> Result<TensorOp, ConfigError> {
    let n = a.n;
    let tag: Option<KTag> = parse_opt(&a.tag)?;
    let need_tag = || tag.ok_or_else(|| ConfigError("--tag is required".into()));
    let name = a.name.as_deref();
    match a.family.as_deref() {
        Some("k") => {
            let t = need_tag()?;
            if a.spectral {
                Ok(k_spectral(t, n, &f_sym())?)
            } else {
                Ok(k_constant(t, n, &f_sym()))
            }
        }
        Some(f) => {
            let fam = match f.parse::<FamilyName>()? {
                FamilyName::AcfConstant => acf_constant(n)?,
                FamilyName::AcfSpectral => acf_spectral(n)?,
                FamilyName::Hat => hat_family(n)?,
            };
            let name = name.ok_or_else(|| ConfigError("--name is required".into()))?;
            Ok(fam.get(name)?.clone())
        }
        None => match name {
            Some("b-inf") => Ok(b_constant(n)),
            Some("b") => Ok(b_spectral(n, &f0())),
            Some("b-hat") => Ok(bhat(n)?),
            Some("R-inf") => Ok(r_constant(n)),
            Some("R") => Ok(r_spectral(n, &f0())),
            Some("R0") => Ok(r0_spectral(n)),
            Some("R-hat") => Ok(rhat(n)),
            Some("R-hat-inf") => Ok(rhat_inf(n)),
            Some("Q-inf") => Ok(q_constant(need_tag()?, n, &f_sym())?),
            Some("Q") => Ok(q_spectral_iib(n, &f_sym(), &f0())?),
            Some("Q-mixed") => Ok(mixed_q(&k_constant(KTag::IIb, n, &f_sym()))?),
            Some(other) => Err(ConfigError(format!("unknown matrix {other:?}"))),
            None => Err(ConfigError("--name or --family is required".into())),
        },
    }
}

fn dump(a: DumpArgs) -> Result<(), ConfigError> {
    let op = lookup(&a)?;
    say!("{}", serde_json::to_string_pretty(&op.dump()?)?);
    Ok(())
}

fn extension(a: ExtensionArgs) -> Result<(), ConfigError> {
    let req = ExtensionRequest {
        base: a.base.parse()?,
        n: a.n,
        order: a.order,
        degree: a.degree,
        model: a.model.parse::<Model>()?,
        samples: a.samples,
    };
    let cert = solve_extension(&req, &mut Sampler::new(a.seed))?;
    match &a.out {
        Some(p) => {
            write_json(p, &cert)?;
            say!(
                "{} n={} order={}: {} (rank {}/{}, augmented {})",
                cert.base,
                cert.n,
                cert.order,
                cert.status.as_str(),
                cert.rank,
                cert.unknowns,
                cert.augmented_rank
            );
        }
        None => say!("{}", serde_json::to_string_pretty(&cert)?),
    }
    Ok(())
}
