use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use super::{CliError, CliResult, EnsembleSource, LambdaArg, VerifyModeArg};
use crate::cubature::{
    construct_cubature, haar_sample, pol_dim_bounds, random_unit_sym, random_unit_vector,
    read_ensemble, verify_strength, verify_tight_fusion, write_ensemble, AtomSource, HaarSource,
    VerificationReport, VerifyMode,
};
use crate::moments::{rank1_general_moment, trace_moment, MomentCoefficients};
use crate::recover::{
    deterministic_guarantee, golfing_certificate, isometry_constants, measure, solve_feasibility,
    GolfingParams, GuaranteeVerdict,
};
use crate::rng::{derive_seed, stream};
use crate::symcore::{spectral_decompose, Spectrum, SymMatrix};
use crate::zonal::MAX_ZONAL_DEGREE;

/// Largest degree handled by the rank-one Dirichlet path.
pub const MAX_RANK_ONE_DEGREE: usize = 8;
/// Seed-path tag for streams that build a cubature, kept apart from trial streams.
pub(crate) const BUILD_STREAM: u64 = u64::MAX;
/// Relative error `|X_hat - xx^T|_F / |x|^2` that counts as exact recovery.
pub const SUCCESS_TOL: f64 = 1e-4;

fn rank_one_projector(l: &Spectrum) -> bool {
    l.rank() == 1 && l.is_projector()
}

fn moment_probes(d: usize, seed: u64) -> Vec<(&'static str, SymMatrix)> {
    let mut rng = stream(derive_seed(seed, &[0]));
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let mut split = vec![0.0; d];
    split[0] = std::f64::consts::FRAC_1_SQRT_2;
    split[1] = -std::f64::consts::FRAC_1_SQRT_2;
    vec![
        ("xx^T, x = e1", SymMatrix::from_diagonal(&e1)),
        ("identity", SymMatrix::identity(d)),
        ("(e1e1^T - e2e2^T)/sqrt2", SymMatrix::from_diagonal(&split)),
        (
            "random rank-one",
            SymMatrix::outer(&random_unit_vector(d, &mut rng)),
        ),
        ("random unit-Frobenius", random_unit_sym(d, &mut rng)),
    ]
}

pub(super) fn moments(
    out: &mut dyn Write,
    d: Option<usize>,
    lambda: &LambdaArg,
    t: usize,
    n_mc: usize,
    seed: u64,
) -> CliResult<i32> {
    let lambda = lambda.resolve(d)?;
    let d = lambda.dim();
    if t == 0 {
        return Err(CliError::Usage("t must be at least 1".into()));
    }
    let rank_one = rank_one_projector(&lambda);
    if t > MAX_RANK_ONE_DEGREE || (t > MAX_ZONAL_DEGREE && !rank_one) {
        return Err(CliError::Usage(format!(
            "degree t = {t} is unsupported (t <= {MAX_ZONAL_DEGREE} in general, t <= {MAX_RANK_ONE_DEGREE} for lambda = e1)"
        )));
    }
    if d < t {
        return Err(CliError::Usage(format!(
            "dimension d = {d} is too small for degree t = {t}"
        )));
    }
    if n_mc < 2 {
        return Err(CliError::Usage("--n-mc must be at least 2".into()));
    }

    let probes = moment_probes(d, seed);
    let mut analytic = Vec::with_capacity(probes.len());
    for (_, x) in &probes {
        analytic.push(if t <= MAX_ZONAL_DEGREE {
            trace_moment(&lambda, t, x)?
        } else {
            rank1_general_moment(d, t, &spectral_decompose(x)?.values)?
        });
    }

    // Welford accumulation of <P, X>^t per probe.
    let mut rng = stream(derive_seed(seed, &[1]));
    let mut mean = vec![0.0; probes.len()];
    let mut m2 = vec![0.0; probes.len()];
    for i in 0..n_mc {
        let p = haar_sample(&lambda, &mut rng);
        for (j, (_, x)) in probes.iter().enumerate() {
            let v = p.as_matrix().dot(x.as_matrix()).powi(t as i32);
            let delta = v - mean[j];
            mean[j] += delta / (i + 1) as f64;
            m2[j] += delta * (v - mean[j]);
        }
    }

    writeln!(
        out,
        "lambda = {:?}, d = {d}, t = {t}, draws = {n_mc}",
        lambda.values()
    )?;
    writeln!(
        out,
        "{:<26} {:>14} {:>14} {:>11} {:>8}  status",
        "probe", "analytic", "monte_carlo", "se", "z"
    )?;
    let mut all_ok = true;
    for (j, (name, _)) in probes.iter().enumerate() {
        let se = (m2[j] / (n_mc - 1) as f64 / n_mc as f64).sqrt();
        let diff = (mean[j] - analytic[j]).abs();
        // Zero-variance probes (the identity) only differ by rounding.
        let slack = 1e-12 * analytic[j].abs().max(1.0);
        let ok = diff <= 3.0 * se + slack;
        all_ok &= ok;
        let z = if diff <= slack { 0.0 } else { diff / se };
        writeln!(
            out,
            "{name:<26} {:>14.8} {:>14.8} {se:>11.3e} {z:>8.3}  {}",
            analytic[j],
            mean[j],
            if ok { "ok" } else { "FAIL" }
        )?;
    }
    if !all_ok {
        return Err(CliError::Failure(
            "Monte Carlo moment outside 3 standard errors".into(),
        ));
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub(super) fn build(
    out: &mut dyn Write,
    d: Option<usize>,
    lambda: &LambdaArg,
    t: usize,
    pool: usize,
    residual: f64,
    path: &Path,
    seed: u64,
) -> CliResult<i32> {
    let lambda = lambda.resolve(d)?;
    let mut rng = stream(derive_seed(seed, &[BUILD_STREAM]));
    let c = construct_cubature(&lambda, t, pool, residual, &mut rng)?;
    let (full, diag) = pol_dim_bounds(lambda.dim(), t)?;
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    write_ensemble(&c.ensemble, std::io::BufWriter::new(file))?;
    writeln!(out, "support = {} of pool {}", c.support(), c.pool_size)?;
    writeln!(
        out,
        "pol_dim_bounds = {full} (matrix entries), {diag} (rank-one forms)"
    )?;
    print_report(out, &c.verification)?;
    writeln!(out, "fit_residual = {:.3e}", c.fit_residual)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(0)
}

fn print_report(out: &mut dyn Write, r: &VerificationReport) -> std::io::Result<()> {
    writeln!(out, "strength = {}", r.claimed_strength)?;
    writeln!(out, "mode = {}", r.mode)?;
    writeln!(out, "probes = {}", r.probes_used)?;
    writeln!(out, "max_residual = {:.3e}", r.max_residual)?;
    writeln!(out, "passed = {}", r.passed)
}

pub(super) fn verify(
    out: &mut dyn Write,
    path: &Path,
    t: usize,
    mode: VerifyModeArg,
    tol: f64,
    probes: usize,
    seed: u64,
) -> CliResult<i32> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    let ens = read_ensemble(std::io::BufReader::new(file))?;
    let mut rng = stream(seed);
    let report = match mode {
        VerifyModeArg::Exact => verify_strength(&ens, t, tol, VerifyMode::Exact, &mut rng)?,
        VerifyModeArg::Randomized => {
            verify_strength(&ens, t, tol, VerifyMode::Randomized { probes }, &mut rng)?
        }
        VerifyModeArg::Fusion => verify_tight_fusion(&ens, t, tol, probes, &mut rng)?,
    };
    writeln!(out, "atoms = {}", ens.len())?;
    print_report(out, &report)?;
    Ok(if report.passed { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
pub(super) fn recover(
    out: &mut dyn Write,
    d: usize,
    k: usize,
    n: usize,
    lambda: Option<&LambdaArg>,
    source: &EnsembleSource,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> CliResult<i32> {
    let lambda = match lambda {
        Some(l) => l.resolve(Some(d))?,
        None => Spectrum::projector(d, k)?,
    };
    if lambda.rank() != k {
        return Err(CliError::Usage(format!(
            "--k {k} disagrees with the rank {} of --lambda",
            lambda.rank()
        )));
    }
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let (d64, k64) = (d as u64, k as u64);
    let src = source.open(
        &lambda,
        &mut stream(derive_seed(seed, &[d64, k64, BUILD_STREAM])),
    )?;
    let mut rng = stream(derive_seed(seed, &[d64, k64, 0]));
    let x = random_unit_vector(d, &mut rng);
    let ps = src.draw_many(n, &mut rng);
    let m = measure(&x, &ps)?;
    let r = solve_feasibility(&m, tol, max_iter)?;
    let c = isometry_constants(&ps, &x)?;
    for (key, value) in r.to_record() {
        writeln!(out, "{key} = {value}")?;
    }
    let err = r.relative_error(&x);
    writeln!(out, "relative_error = {err:.6e}")?;
    writeln!(out, "alpha = {:.6e}", c.alpha)?;
    writeln!(out, "beta_exact = {:.6e}", c.beta_exact)?;
    writeln!(out, "success = {}", err <= SUCCESS_TOL)?;
    Ok(0)
}

/// One golfing run followed by the deterministic check and an independent solve.
#[derive(Clone, Debug)]
pub struct CertifyOutcome {
    pub x: DVector<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub in_span: bool,
    pub alpha: f64,
    pub beta_exact: f64,
    pub verdict: GuaranteeVerdict,
    /// `|X_hat - xx^T|_F` for unit `x`.
    pub recovery_error: f64,
    pub converged: bool,
    pub q_norms: Vec<f64>,
    pub contraction: f64,
    pub depth: usize,
    pub measurements: usize,
}

/// Builds a golfing certificate for a random unit `x` with Haar measurements on the rank-`k`
/// projector orbit, measures `x` with the accepted atoms, and solves the feasibility problem.
pub fn certify_trial(
    d: usize,
    k: usize,
    params: &GolfingParams,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> crate::Result<CertifyOutcome> {
    let lambda = Spectrum::projector(d, k)?;
    let coeffs = MomentCoefficients::new(&lambda)?;
    let mut rng = stream(derive_seed(seed, &[d as u64, k as u64, 0]));
    let x = random_unit_vector(d, &mut rng);
    let report = golfing_certificate(&x, &HaarSource::new(lambda), &coeffs, params, &mut rng)?;
    let c = isometry_constants(&report.atoms, &x)?;
    let verdict = deterministic_guarantee(
        c.alpha,
        c.beta_exact,
        report.gamma_measured,
        report.delta_measured,
    );
    let m = measure(&x, &report.atoms)?;
    let r = solve_feasibility(&m, tol, max_iter)?;
    let recovery_error = r.relative_error(&x);
    Ok(CertifyOutcome {
        gamma: report.gamma_measured,
        delta: report.delta_measured,
        in_span: report.in_span,
        alpha: c.alpha,
        beta_exact: c.beta_exact,
        verdict,
        recovery_error,
        converged: r.converged,
        q_norms: report.q_norms,
        contraction: report.contraction,
        depth: report.depth,
        measurements: report.atoms.len(),
        x,
    })
}

#[allow(clippy::too_many_arguments)]
pub(super) fn certify(
    out: &mut dyn Write,
    d: usize,
    k: usize,
    c0: f64,
    batch_mult: f64,
    max_repeats: usize,
    seed: u64,
    tol: f64,
) -> CliResult<i32> {
    if !(batch_mult > 0.0) {
        return Err(CliError::Usage("--batch-mult must be positive".into()));
    }
    let mut params = GolfingParams::defaults(d, batch_mult);
    params.c0 = c0;
    params.s = c0;
    params.max_repeats = max_repeats;
    let o = certify_trial(d, k, &params, seed, tol, 20_000)?;
    let norms: Vec<String> = o.q_norms.iter().map(|q| format!("{q:.3e}")).collect();
    writeln!(out, "batch_size = {}", params.batch_size)?;
    writeln!(out, "depth = {}", o.depth)?;
    writeln!(out, "contraction = {:.6e}", o.contraction)?;
    writeln!(out, "q_norms = {}", norms.join(";"))?;
    writeln!(out, "measurements = {}", o.measurements)?;
    writeln!(out, "gamma_measured = {:.6e}", o.gamma)?;
    writeln!(out, "delta_measured = {:.6e}", o.delta)?;
    writeln!(out, "in_span = {}", o.in_span)?;
    writeln!(out, "alpha = {:.6e}", o.alpha)?;
    writeln!(out, "beta_exact = {:.6e}", o.beta_exact)?;
    writeln!(out, "guarantee_lhs = {:.6e}", o.verdict.lhs)?;
    writeln!(out, "guarantee_rhs = {:.6e}", o.verdict.rhs)?;
    writeln!(out, "guarantee_holds = {}", o.verdict.holds)?;
    if let Some(reason) = &o.verdict.reason {
        writeln!(out, "guarantee_reason = {reason}")?;
    }
    writeln!(out, "solver_converged = {}", o.converged)?;
    writeln!(out, "recovery_error = {:.6e}", o.recovery_error)?;
    Ok(0)
}
