use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use alfeld_core::linalg::par;
use alfeld_core::report::{parse_degrees, parse_split, run, RunConfig, Suite};
use clap::{Args, Parser, Subcommand};

/// Exact verification of finite element complexes on Alfeld splits.
#[derive(Parser)]
#[command(name = "alfeld", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Space dimensions against their closed forms.
    Spaces,
    /// Exactness of the local sequences by rank-nullity.
    Exactness,
    /// Unisolvency of the degree-of-freedom sets.
    Dofs,
    /// Commuting interpolation diagrams.
    Commute,
    /// Pointwise and integral identities, face exactness, the BGG derivation.
    Identities,
    /// Extra smoothness at the split vertices.
    Supersmooth,
    /// Bubble potentials.
    Bubbles,
    /// Global spaces and sequences on small meshes.
    Global,
    /// Every suite.
    All,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::All => "all",
            c => c.suites()[0].name(),
        }
    }

    fn suites(self) -> Vec<Suite> {
        match self {
            Cmd::Spaces => vec![Suite::Spaces],
            Cmd::Exactness => vec![Suite::Exactness],
            Cmd::Dofs => vec![Suite::Dofs],
            Cmd::Commute => vec![Suite::Commute],
            Cmd::Identities => vec![Suite::Identities],
            Cmd::Supersmooth => vec![Suite::Supersmooth],
            Cmd::Bubbles => vec![Suite::Bubbles],
            Cmd::Global => vec![Suite::Global],
            Cmd::All => Suite::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct Common {
    /// Degree parameter range, `a..b` or a single value.
    #[arg(long, global = true)]
    degree: Option<String>,
    /// Split point in barycentric coordinates.
    #[arg(long, global = true, default_value = "1/4,1/4,1/4,1/4")]
    split_point: String,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Repeat each check modulo this many primes.
    #[arg(long, global = true, default_value_t = 1)]
    primes: usize,
    /// Rational arithmetic throughout (slow).
    #[arg(long, global = true)]
    exact: bool,
    /// Builtin mesh name or mesh file, for `global`.
    #[arg(long, global = true)]
    mesh: Option<String>,
    /// Write the JSON document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Restrict to one family or chain (V, Z, U, BGG, elasticity, ...).
    #[arg(long, global = true, visible_alias = "chain")]
    family: Option<String>,
    /// Seeded inputs per randomized check.
    #[arg(long, global = true, default_value_t = 10)]
    count: usize,
}

fn config(c: &Common) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    if let Some(d) = &c.degree {
        cfg.degrees = Some(parse_degrees(d).map_err(|e| e.to_string())?);
    }
    cfg.split = parse_split(&c.split_point).map_err(|e| e.to_string())?;
    cfg.seed = c.seed;
    cfg.primes = c.primes;
    cfg.exact = c.exact;
    cfg.mesh = c.mesh.clone();
    cfg.family = c.family.clone();
    cfg.count = c.count;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("ALFELD_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                par::limit_threads(n);
            }
            _ => {
                eprintln!("error: ALFELD_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cfg = match config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let doc = match run(cli.cmd.name(), &cli.cmd.suites(), &cfg) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let json = doc.to_json();
    match &cli.common.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &json) {
                eprintln!("error: cannot write {}: {e}", p.display());
                return ExitCode::from(2);
            }
            print!("{}", doc.table());
        }
        None => {
            eprint!("{}", doc.table());
            let _ = std::io::stdout().write_all(json.as_bytes());
        }
    }
    if doc.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
