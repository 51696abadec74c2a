//! Phase-transition sweeps over `(d, k, n)` grids.
//!
//! Trial `i` of cell `(d, k)` draws its signal and the first `max(n)` measurements from
//! the stream keyed by `(seed, d, k, i)`; every `n` uses a prefix of the same draws, so the
//! success curves share random numbers across `n`.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use super::commands::{BUILD_STREAM, SUCCESS_TOL};
use super::{CliError, CliResult, EnsembleSource};
use crate::cubature::{random_unit_vector, AtomSource};
use crate::recover::{isometry_constants, measure, solve_feasibility};
use crate::rng::{derive_seed, stream};
use crate::symcore::Spectrum;

pub const CSV_HEADER: [&str; 12] = [
    "d",
    "k",
    "n",
    "t",
    "trial",
    "seed",
    "success",
    "residual",
    "iterations",
    "alpha",
    "beta_exact",
    "wall_ms",
];

#[derive(Clone, Debug, PartialEq)]
pub enum LambdaProfile {
    /// `k` ones, then zeros.
    Projector,
    /// Fixed nonzero eigenvalues padded with zeros; `k` is their count.
    Values(Vec<f64>),
}

/// A measurement count, either absolute or a multiple of `d` (written `4d`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Count {
    Fixed(usize),
    PerDim(usize),
}

impl Count {
    pub fn at(self, d: usize) -> usize {
        match self {
            Count::Fixed(n) => n,
            Count::PerDim(m) => m * d,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub d_list: Vec<usize>,
    /// Empty for an explicit profile.
    pub k_list: Vec<usize>,
    pub n_list: Vec<Count>,
    pub lambda_profile: LambdaProfile,
    pub trials: usize,
    pub seed: u64,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub ensemble_source: EnsembleSource,
    pub record_wall_time: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            d_list: Vec::new(),
            k_list: Vec::new(),
            n_list: Vec::new(),
            lambda_profile: LambdaProfile::Projector,
            trials: 50,
            seed: 0,
            solver_tol: 1e-9,
            max_iter: 20_000,
            ensemble_source: EnsembleSource::Haar,
            record_wall_time: false,
        }
    }
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| format!("`{}`: {e}", s.trim()))
        })
        .collect()
}

fn scalar<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

impl SweepConfig {
    /// Flat `key = value` lines; `#` starts a comment and lists are comma-separated.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = SweepConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let usage = |msg: String| CliError::Usage(format!("config line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let set: Result<(), String> = match key {
                "d_list" => list(value).map(|v| cfg.d_list = v),
                "k_list" => list(value).map(|v| cfg.k_list = v),
                "n_list" => value
                    .split(',')
                    .map(|s| {
                        let s = s.trim();
                        match s.strip_suffix('d') {
                            Some(m) => scalar(m.trim()).map(Count::PerDim),
                            None => scalar(s).map(Count::Fixed),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(|v| cfg.n_list = v),
                "lambda_profile" => {
                    if value == "projector" {
                        cfg.lambda_profile = LambdaProfile::Projector;
                        Ok(())
                    } else {
                        list(value).map(|v| cfg.lambda_profile = LambdaProfile::Values(v))
                    }
                }
                "trials" => scalar(value).map(|v| cfg.trials = v),
                "seed" => scalar(value).map(|v| cfg.seed = v),
                "solver_tol" => scalar(value).map(|v| cfg.solver_tol = v),
                "max_iter" => scalar(value).map(|v| cfg.max_iter = v),
                "ensemble_source" => value.parse().map(|v| cfg.ensemble_source = v),
                "record_wall_time" => scalar(value).map(|v| cfg.record_wall_time = v),
                other => Err(format!("unknown key `{other}`")),
            };
            set.map_err(usage)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: &str| Err(CliError::Usage(format!("config: {m}")));
        if self.d_list.is_empty() || self.n_list.is_empty() {
            return usage("d_list and n_list must be nonempty");
        }
        match &self.lambda_profile {
            LambdaProfile::Projector if self.k_list.is_empty() => {
                return usage("k_list must be nonempty for the projector profile")
            }
            LambdaProfile::Values(v)
                if !self.k_list.is_empty()
                    && self.k_list != [v.iter().filter(|&&x| x > 0.0).count()] =>
            {
                return usage("k_list must be omitted or equal the number of nonzero lambda values")
            }
            _ => {}
        }
        if self.trials == 0 {
            return usage("trials must be at least 1");
        }
        if self.n_list.iter().any(|c| c.at(1) == 0) {
            return usage("n entries must be at least 1");
        }
        if !(self.solver_tol > 0.0) || self.max_iter == 0 {
            return usage("solver_tol and max_iter must be positive");
        }
        Ok(())
    }

    fn cells(&self) -> CliResult<Vec<(usize, usize, Spectrum)>> {
        let mut out = Vec::new();
        for &d in &self.d_list {
            match &self.lambda_profile {
                LambdaProfile::Projector => {
                    for &k in &self.k_list {
                        out.push((d, k, Spectrum::projector(d, k)?));
                    }
                }
                LambdaProfile::Values(v) => {
                    let l = Spectrum::padded(v, d)?;
                    out.push((d, l.rank(), l));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    /// Claimed strength of the measurement ensemble, 0 for Haar draws.
    pub t: usize,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub residual: f64,
    pub iterations: usize,
    pub alpha: f64,
    pub beta_exact: f64,
    pub wall_ms: u64,
}

/// Runs every trial and returns rows in `(d, k, n, trial)` order.
pub fn sweep_rows(cfg: &SweepConfig) -> CliResult<Vec<SweepRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (d, k, lambda) in cfg.cells()? {
        let (d64, k64) = (d as u64, k as u64);
        let source = cfg.ensemble_source.open(
            &lambda,
            &mut stream(derive_seed(cfg.seed, &[d64, k64, BUILD_STREAM])),
        )?;
        // `2d` and `8` coincide at d = 4; each count is run once.
        let mut ns: Vec<usize> = Vec::with_capacity(cfg.n_list.len());
        for n in cfg.n_list.iter().map(|c| c.at(d)) {
            if !ns.contains(&n) {
                ns.push(n);
            }
        }
        let n_max = *ns.iter().max().expect("validated nonempty");
        let mut cell: Vec<Vec<SweepRow>> = vec![Vec::with_capacity(cfg.trials); ns.len()];
        for trial in 0..cfg.trials {
            let seed = derive_seed(cfg.seed, &[d64, k64, trial as u64]);
            let mut rng = stream(seed);
            let x = random_unit_vector(d, &mut rng);
            let ps = source.draw_many(n_max, &mut rng);
            for (slot, &n) in ns.iter().enumerate() {
                let start = Instant::now();
                let m = measure(&x, &ps[..n])?;
                let r = solve_feasibility(&m, cfg.solver_tol, cfg.max_iter)?;
                let c = isometry_constants(&ps[..n], &x)?;
                let wall_ms = if cfg.record_wall_time {
                    start.elapsed().as_millis() as u64
                } else {
                    0
                };
                cell[slot].push(SweepRow {
                    d,
                    k,
                    n,
                    t: source.strength(),
                    trial,
                    seed,
                    success: r.relative_error(&x) <= SUCCESS_TOL,
                    residual: r.feasibility_residual,
                    iterations: r.iterations,
                    alpha: c.alpha,
                    beta_exact: c.beta_exact,
                    wall_ms,
                });
            }
        }
        rows.extend(cell.into_iter().flatten());
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::Failure(e.to_string());
    w.write_record(CSV_HEADER).map_err(fail)?;
    for r in rows {
        w.write_record([
            r.d.to_string(),
            r.k.to_string(),
            r.n.to_string(),
            r.t.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            u8::from(r.success).to_string(),
            format!("{:.6e}", r.residual),
            r.iterations.to_string(),
            format!("{:.6e}", r.alpha),
            format!("{:.6e}", r.beta_exact),
            r.wall_ms.to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush()?;
    Ok(())
}

/// [`sweep_rows`] followed by [`write_csv`]; returns the number of rows.
pub fn run_sweep<W: Write>(cfg: &SweepConfig, out: W) -> CliResult<usize> {
    let rows = sweep_rows(cfg)?;
    write_csv(&rows, out)?;
    Ok(rows.len())
}
