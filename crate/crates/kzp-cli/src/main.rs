//! `kzp`: command-line front end for the verification suites.
//!
//! A run is described by an optional JSON configuration file with flag
//! overrides. Certificates are written as newline-delimited JSON to `--out`
//! or standard output. The exit status is `0` when every check passed or was
//! not applicable, `1` when some check failed and `2` on configuration or
//! internal errors.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kzp::cert::Certificate;
use kzp::suite::{exit_status, families_json, group, to_ndjson, LevelSpec, LinkageSpec, RunConfig, Suite, CHECK_NAMES};

#[derive(Parser)]
#[command(name = "kzp", version, about = "Exact checks of the KZ connection in characteristic p")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write both p-hypergeometric families as polynomial JSON.
    Gen(RunArgs),
    /// Run the checks in suite order.
    Suite(RunArgs),
    /// Run a single named check.
    Check(RunArgs),
    /// Run the p-curvature checks.
    Pcurv(RunArgs),
    /// Run the formal-solution checks.
    Formal(RunArgs),
    /// Run the steepest-descent spectrum check.
    Spectrum(RunArgs),
    /// Run the curve checks: genus identity and Katz composition.
    Katz(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of points.
    #[arg(long)]
    n: Option<usize>,
    /// Characteristic.
    #[arg(long)]
    p: Option<u64>,
    /// Degree of the coefficient field over F_p.
    #[arg(long = "ext-degree")]
    ext_degree: Option<usize>,
    /// Level: an integer, or comma-separated coefficients in the extension's power basis.
    #[arg(long)]
    h: Option<String>,
    /// Seed for sampled points.
    #[arg(long)]
    seed: Option<u64>,
    /// Sampled points per pointwise check.
    #[arg(long)]
    trials: Option<usize>,
    /// Truncation for formal solutions.
    #[arg(long)]
    depth: Option<u32>,
    /// Auxiliary curve exponent, or `auto` for the smallest admissible one.
    #[arg(long)]
    q: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check group for `suite`: all, hyperg, pcurv, formal, spectrum or katz.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Check name for `check`.
    #[arg(long)]
    check: Option<String>,
    /// Perturb the generated families (self-test of the checks).
    #[arg(long)]
    mutate: bool,
}

fn parse_level(text: &str) -> Result<LevelSpec, String> {
    let parts: Vec<&str> = text.trim_matches(|c| c == '[' || c == ']').split(',').map(str::trim).collect();
    let values = parts.iter().map(|s| s.parse::<u64>()).collect::<Result<Vec<_>, _>>();
    match values {
        Ok(v) if v.len() == 1 && !text.contains(',') && !text.contains('[') => Ok(LevelSpec::Integer(v[0])),
        Ok(v) => Ok(LevelSpec::Coefficients(v)),
        Err(_) => Err(format!("invalid level {text:?}")),
    }
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, String> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                RunConfig::from_json(&text).map_err(|e| e.to_string())?
            }
            None => {
                let (Some(n), Some(p)) = (self.n, self.p) else {
                    return Err("--n and --p are required without --config".into());
                };
                RunConfig::new(n, p, LevelSpec::default())
            }
        };
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(p) = self.p {
            config.p = p;
        }
        if let Some(k) = self.ext_degree {
            config.ext_degree = k;
        }
        if let Some(h) = &self.h {
            config.h = parse_level(h)?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if let Some(depth) = self.depth {
            config.depth = Some(depth);
        }
        if let Some(q) = &self.q {
            config.q = Some(match q.as_str() {
                "auto" => LinkageSpec::Auto(q.clone()),
                _ => LinkageSpec::Exponent(q.parse().map_err(|_| format!("invalid q {q:?}"))?),
            });
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        Ok(config)
    }
}

fn emit(config: &RunConfig, text: &str) -> Result<(), String> {
    match &config.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn run_checks(config: &RunConfig, names: &[&str], mutate: bool) -> Result<Vec<Certificate>, String> {
    let mut suite = Suite::new(config, mutate).map_err(|e| e.to_string())?;
    suite.run(names).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<i32, String> {
    let (args, names): (&RunArgs, Option<Vec<&str>>) = match &cli.command {
        Command::Gen(args) => (args, None),
        Command::Suite(args) => {
            let names = group(&args.suite).ok_or_else(|| format!("unknown suite {:?}", args.suite))?;
            (args, Some(names.to_vec()))
        }
        Command::Check(args) => {
            let name = args.check.as_deref().ok_or("--check is required")?;
            let name = CHECK_NAMES.iter().find(|&&c| c == name).ok_or_else(|| format!("unknown check {name:?}"))?;
            (args, Some(vec![*name]))
        }
        Command::Pcurv(args) => (args, group("pcurv").map(<[_]>::to_vec)),
        Command::Formal(args) => (args, group("formal").map(<[_]>::to_vec)),
        Command::Spectrum(args) => (args, group("spectrum").map(<[_]>::to_vec)),
        Command::Katz(args) => {
            let mut config_args = args.config()?;
            config_args.q.get_or_insert(LinkageSpec::Auto("auto".into()));
            let certs = run_checks(&config_args, group("katz").expect("known group"), args.mutate)?;
            emit(&config_args, &to_ndjson(&certs))?;
            return Ok(exit_status(&certs));
        }
    };
    let config = args.config()?;
    match names {
        None => {
            let ctx = config.context().map_err(|e| e.to_string())?;
            let value = families_json(&ctx).map_err(|e| e.to_string())?;
            emit(&config, &(serde_json::to_string(&value).map_err(|e| e.to_string())? + "\n"))?;
            Ok(0)
        }
        Some(names) => {
            let certs = run_checks(&config, &names, args.mutate)?;
            emit(&config, &to_ndjson(&certs))?;
            Ok(exit_status(&certs))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
