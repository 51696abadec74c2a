//! Command-line driver. Every subcommand returns through [`run`], which maps failures to
//! a single `error:` line on stderr with exit code 2 for usage problems and 1 otherwise.

mod commands;
mod sweep;

pub use commands::{certify_trial, CertifyOutcome, MAX_RANK_ONE_DEGREE, SUCCESS_TOL};
pub use sweep::{
    run_sweep, sweep_rows, write_csv, Count, LambdaProfile, SweepConfig, SweepRow, CSV_HEADER,
};

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::cubature::{
    construct_cubature, read_ensemble, AtomSource, HaarSource, WeightedEnsemble, ATOM_SPECTRUM_TOL,
};
use crate::error::Error;
use crate::symcore::{Spectrum, SymMatrix};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

/// Guard violations are usage errors; everything else is a runtime failure.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpectrum(_)
            | Error::UnsupportedDegree { .. }
            | Error::DegenerateDimension { .. }
            | Error::InvalidParameter(_)
            | Error::ExactModeTooLarge { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Which orbit the measurements live on.
#[derive(Clone, Debug, PartialEq)]
pub enum LambdaArg {
    E1,
    Projector(usize),
    /// Nonzero leading eigenvalues, padded with zeros up to `d`.
    Values(Vec<f64>),
}

impl FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("e1") {
            return Ok(LambdaArg::E1);
        }
        if let Some(k) = s.strip_prefix("projector:") {
            return k
                .trim()
                .parse()
                .map(LambdaArg::Projector)
                .map_err(|e| format!("bad projector rank `{k}`: {e}"));
        }
        let values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format!("bad spectrum `{s}` ({e}); use e1, projector:K or a,b,c"))?;
        Ok(LambdaArg::Values(values))
    }
}

impl fmt::Display for LambdaArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaArg::E1 => f.write_str("e1"),
            LambdaArg::Projector(k) => write!(f, "projector:{k}"),
            LambdaArg::Values(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl LambdaArg {
    /// An explicit value list fixes `d` when `--d` is absent.
    pub fn resolve(&self, d: Option<usize>) -> CliResult<Spectrum> {
        let spectrum = match (self, d) {
            (LambdaArg::Values(v), None) => Spectrum::new(v.clone()),
            (LambdaArg::Values(v), Some(d)) => Spectrum::padded(v, d),
            (LambdaArg::E1, Some(d)) => Spectrum::e1(d),
            (LambdaArg::Projector(k), Some(d)) => Spectrum::projector(d, *k),
            (_, None) => {
                return Err(CliError::Usage(format!(
                    "--d is required with --lambda {self}"
                )))
            }
        };
        spectrum.map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// Where measurement matrices come from.
#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleSource {
    Haar,
    CubatureFile(PathBuf),
    Build {
        t: usize,
        pool: usize,
        residual: f64,
    },
}

impl FromStr for EnsembleSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "haar" {
            return Ok(EnsembleSource::Haar);
        }
        if let Some(p) = s.strip_prefix("cubature-file:") {
            return Ok(EnsembleSource::CubatureFile(PathBuf::from(p.trim())));
        }
        let inner = s
            .strip_prefix("build:")
            .or_else(|| s.strip_prefix("build(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| {
                format!("unknown ensemble source `{s}`; use haar, cubature-file:PATH or build:t,pool,residual")
            })?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("build source needs t,pool,residual, got `{inner}`"));
        }
        let bad = |what: &str, e: &dyn fmt::Display| format!("bad build {what}: {e}");
        Ok(EnsembleSource::Build {
            t: parts[0].parse().map_err(|e| bad("t", &e))?,
            pool: parts[1].parse().map_err(|e| bad("pool", &e))?,
            residual: parts[2].parse().map_err(|e| bad("residual", &e))?,
        })
    }
}

impl EnsembleSource {
    /// Materializes the source for one spectrum. Building consumes `rng`.
    pub fn open<R: Rng + ?Sized>(&self, lambda: &Spectrum, rng: &mut R) -> CliResult<Source> {
        match self {
            EnsembleSource::Haar => Ok(Source::Haar(HaarSource::new(lambda.clone()))),
            EnsembleSource::CubatureFile(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
                let ens = read_ensemble(std::io::BufReader::new(file))?;
                let same = ens.spectrum().dim() == lambda.dim()
                    && ens
                        .spectrum()
                        .values()
                        .iter()
                        .zip(lambda.values())
                        .all(|(a, b)| (a - b).abs() <= ATOM_SPECTRUM_TOL);
                if !same {
                    return Err(CliError::Failure(format!(
                        "{} holds atoms with spectrum {:?}, expected {:?}",
                        path.display(),
                        ens.spectrum().values(),
                        lambda.values()
                    )));
                }
                Ok(Source::Ensemble(ens))
            }
            EnsembleSource::Build { t, pool, residual } => {
                let c = construct_cubature(lambda, *t, *pool, *residual, rng)?;
                Ok(Source::Ensemble(c.ensemble))
            }
        }
    }
}

/// Either the continuous orbit measure or a finite cubature on it.
#[derive(Clone, Debug)]
pub enum Source {
    Haar(HaarSource),
    Ensemble(WeightedEnsemble),
}

impl Source {
    /// Claimed strength of a finite ensemble; 0 for the continuous measure.
    pub fn strength(&self) -> usize {
        match self {
            Source::Haar(_) => 0,
            Source::Ensemble(e) => e.claimed_strength(),
        }
    }
}

impl AtomSource for Source {
    fn spectrum(&self) -> &Spectrum {
        match self {
            Source::Haar(h) => h.spectrum(),
            Source::Ensemble(e) => e.spectrum(),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix {
        match self {
            Source::Haar(h) => h.draw(rng),
            Source::Ensemble(e) => e.draw(rng),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "retrieval",
    version,
    about = "Rank-one recovery from rank-k PSD measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VerifyModeArg {
    Exact,
    Randomized,
    /// Rank-one test matrices only.
    Fusion,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analytic trace moments against Monte Carlo on a fixed probe set.
    Moments {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value = "e1")]
        lambda: LambdaArg,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 200_000)]
        n_mc: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Build a cubature by moment matching and write it to a file.
    Build {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value = "e1")]
        lambda: LambdaArg,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        pool: usize,
        #[arg(long, default_value_t = 1e-8)]
        residual: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Check the moments of an ensemble file.
    Verify {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        t: usize,
        #[arg(long, value_enum, default_value_t = VerifyModeArg::Exact)]
        mode: VerifyModeArg,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        probes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// One recovery of a random unit signal.
    Recover {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        /// Overrides the rank-k projector spectrum.
        #[arg(long)]
        lambda: Option<LambdaArg>,
        #[arg(long, default_value = "haar")]
        source: EnsembleSource,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
    },
    /// Golfing certificate for a random unit signal, with the deterministic guarantee.
    Certify {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 10.0)]
        c0: f64,
        #[arg(long, default_value_t = 1.0)]
        batch_mult: f64,
        #[arg(long, default_value_t = 20)]
        max_repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Phase-transition sweep driven by a `key = value` config, written as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.kind().as_str().unwrap_or("invalid arguments");
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or(msg)
                .trim_start_matches("error: ");
            let _ = writeln!(err, "error: {first}");
            return 2;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Command::Moments {
            d,
            lambda,
            t,
            n_mc,
            seed,
        } => commands::moments(out, d, &lambda, t, n_mc, seed),
        Command::Build {
            d,
            lambda,
            t,
            pool,
            residual,
            out: path,
            seed,
        } => commands::build(out, d, &lambda, t, pool, residual, &path, seed),
        Command::Verify {
            path,
            t,
            mode,
            tol,
            probes,
            seed,
        } => commands::verify(out, &path, t, mode, tol, probes, seed),
        Command::Recover {
            d,
            k,
            n,
            lambda,
            source,
            seed,
            tol,
            max_iter,
        } => commands::recover(out, d, k, n, lambda.as_ref(), &source, seed, tol, max_iter),
        Command::Certify {
            d,
            k,
            c0,
            batch_mult,
            max_repeats,
            seed,
            tol,
        } => commands::certify(out, d, k, c0, batch_mult, max_repeats, seed, tol),
        Command::Sweep { config, out: path } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Failure(format!("{}: {e}", config.display())))?;
            let cfg = SweepConfig::parse(&text)?;
            let file = std::fs::File::create(&path)
                .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
            let rows = run_sweep(&cfg, std::io::BufWriter::new(file))?;
            writeln!(out, "wrote {} rows to {}", rows, path.display())?;
            Ok(0)
        }
    }
}
