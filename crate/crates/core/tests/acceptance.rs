//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run a subset by passing criterion numbers, e.g. `cargo test --test acceptance -- 1 4`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use retrieval_core::cli::{
    certify_trial, sweep_rows, CertifyOutcome, Count, SweepConfig, SweepRow,
};
use retrieval_core::cli::{run, EnsembleSource};
use retrieval_core::cubature::{
    construct_cubature, haar_sample, verify_strength, VerifyKind, VerifyMode,
};
use retrieval_core::moments::{
    coefficient_moment, cross_moment, expectation_operator, rank1_projector_moment, s_map,
    second_order_operator, trace_moment,
};
use retrieval_core::recover::GolfingParams;
use retrieval_core::rng::{derive_seed, stream};
use retrieval_core::symcore::hs_inner;
use retrieval_core::zonal::{partitions, zonal_eval};
use retrieval_core::{Error, MomentCoefficients, Spectrum, SymMatrix};

use common::{random_spectrum, random_sym, upper, worst_z, Welford};

const MC_DRAWS: usize = 1_000_000;
const SWEEP_SEED: u64 = 7;
const GOLF_TRIALS: usize = 200;
const GOLF_TOL: f64 = 1e-9;
const C0: f64 = 10.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

#[derive(Default)]
struct Shared {
    haar_rows: Option<Vec<SweepRow>>,
    golf: Option<Vec<std::result::Result<CertifyOutcome, String>>>,
}

fn phase_config(
    d_list: Vec<usize>,
    k_list: Vec<usize>,
    n_list: Vec<Count>,
    source: EnsembleSource,
) -> SweepConfig {
    SweepConfig {
        d_list,
        k_list,
        n_list,
        trials: 50,
        seed: SWEEP_SEED,
        solver_tol: 1e-9,
        max_iter: 20_000,
        ensemble_source: source,
        ..SweepConfig::default()
    }
}

/// Success rate per `(d, k, n)`.
fn rates(rows: &[SweepRow]) -> BTreeMap<(usize, usize, usize), f64> {
    let mut acc: BTreeMap<(usize, usize, usize), (usize, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.d, r.k, r.n)).or_default();
        e.0 += usize::from(r.success);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(key, (s, n))| (key, s as f64 / n as f64))
        .collect()
}

fn c1() -> Verdict {
    let mut rng = stream(101);
    let mut worst = 0.0_f64;
    for t in 1..=3 {
        for i in 0..200 {
            let d = 3 + i % 6;
            let x = random_sym(d, &mut rng);
            let sum: f64 = partitions(t, d)
                .iter()
                .map(|p| zonal_eval(p, &x).unwrap())
                .sum();
            let want = x.trace().powi(t as i32);
            let scale = want.abs().max(x.frobenius_norm().powi(t as i32));
            worst = worst.max((sum - want).abs() / scale);
        }
    }
    verdict(
        worst < 1e-10,
        format!("max relative error {worst:.2e} over 600 cases"),
    )
}

fn c2() -> Verdict {
    let mut rng = stream(102);
    let mut worst = 0.0_f64;
    for i in 0..200 {
        let d = 3 + i % 6;
        let t = 1 + i % 3;
        let l = random_spectrum(d, &mut rng);
        let c = MomentCoefficients::new(&l).unwrap();
        let xs: Vec<SymMatrix> = (0..t).map(|_| random_sym(d, &mut rng)).collect();
        let zonal_path = cross_moment(&l, &xs).unwrap();
        let coeff_path = coefficient_moment(&c, &xs).unwrap();
        let scale: f64 = xs.iter().map(|x| x.frobenius_norm()).product();
        worst = worst.max((zonal_path - coeff_path).abs() / scale.max(zonal_path.abs()));
    }
    verdict(
        worst < 1e-10,
        format!("max relative error {worst:.2e} over 200 cases"),
    )
}

fn c3() -> Verdict {
    let mut e1 = DVector::zeros(3);
    e1[0] = 1.0;
    let xx = SymMatrix::outer(&e1);
    let l3 = Spectrum::e1(3).unwrap();
    let mu2 = trace_moment(&l3, 2, &xx).unwrap();
    let mu3 = trace_moment(&l3, 3, &xx).unwrap();
    // (1/2)_t / (3/2)_t by hand.
    let closed2 = (0.5 * 1.5) / (1.5 * 2.5);
    let closed3 = (0.5 * 1.5 * 2.5) / (1.5 * 2.5 * 3.5);
    // (1/2pi) int cos^4; the midpoint rule is exact for trigonometric polynomials.
    let m = 64;
    let angle: f64 = (0..m)
        .map(|i| {
            (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64)
                .cos()
                .powi(4)
        })
        .sum::<f64>()
        / m as f64;
    let mut x2 = DVector::zeros(2);
    x2[0] = 1.0;
    let mu22 = trace_moment(&Spectrum::e1(2).unwrap(), 2, &SymMatrix::outer(&x2)).unwrap();
    let errs = [
        (mu2 - 0.2).abs(),
        (mu2 - closed2).abs(),
        (mu2 - rank1_projector_moment(1, 3, 2, 1.0).unwrap()).abs(),
        (mu3 - 1.0 / 7.0).abs(),
        (mu3 - closed3).abs(),
        (mu3 - rank1_projector_moment(1, 3, 3, 1.0).unwrap()).abs(),
        (mu22 - 0.375).abs(),
        (mu22 - angle).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    verdict(
        worst < 1e-12,
        format!("mu2 = {mu2:.15}, mu3 = {mu3:.15}, mu2(d=2) = {mu22:.15}; max error {worst:.1e}"),
    )
}

fn c4() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    let spectra = [
        Spectrum::e1(4).unwrap(),
        Spectrum::new(vec![1.0, 0.5, 0.0, 0.0]).unwrap(),
    ];
    for (s, l) in spectra.iter().enumerate() {
        let c = MomentCoefficients::new(l).unwrap();
        let mut rng = stream(derive_seed(104, &[s as u64]));
        let x = random_sym(4, &mut rng);
        let want = upper(&expectation_operator(&c, &x).unwrap());
        let mut w = Welford::new(want.len());
        for _ in 0..MC_DRAWS {
            let p = haar_sample(l, &mut rng);
            w.push(&upper(&p.scaled(hs_inner(&p, &x).unwrap())));
        }
        let z = worst_z(&w, &want, 1e-14);
        pass &= z <= 3.0;
        notes.push(format!("max z {z:.2}"));
    }
    let mut rng = stream(1041);
    let mut round_trip = 0.0_f64;
    for i in 0..100 {
        let c = MomentCoefficients::new(&spectra[i % 2]).unwrap();
        let x = random_sym(4, &mut rng);
        let back = s_map(&c, &expectation_operator(&c, &x).unwrap().scaled(c.a1())).unwrap();
        round_trip = round_trip.max((&back - &x).frobenius_norm());
    }
    pass &= round_trip <= 1e-12;
    let c = MomentCoefficients::new(&spectra[0]).unwrap();
    let exact = (c.a1() - 12.0).abs() <= 1e-12 && (c.a2() - 0.5).abs() <= 1e-15;
    pass &= exact;
    notes.push(format!(
        "S round trip {round_trip:.1e}, a1 = {}, a2 = {}",
        c.a1(),
        c.a2()
    ));
    verdict(pass, notes.join("; "))
}

fn c5() -> Verdict {
    let mut rng = stream(105);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let d = 3 + i % 6;
        let l = random_spectrum(d, &mut rng);
        let c = MomentCoefficients::new(&l).unwrap();
        let xs: Vec<SymMatrix> = (0..3).map(|_| random_sym(d, &mut rng)).collect();
        let op = second_order_operator(&c, &xs[0], &xs[1]).unwrap();
        let weak = hs_inner(&op, &xs[2]).unwrap();
        let strong = cross_moment(&l, &xs).unwrap();
        let scale: f64 = xs.iter().map(|x| x.frobenius_norm()).product();
        worst = worst.max((weak - strong).abs() / scale.max(strong.abs()));
    }
    let mut pass = worst < 1e-10;
    let mut notes = vec![format!("weak form max relative error {worst:.1e}")];

    let mut e1 = DVector::zeros(4);
    e1[0] = 1.0;
    let e11 = SymMatrix::outer(&e1);
    let cases = [
        (Spectrum::e1(4).unwrap(), e11.clone(), e11),
        (
            Spectrum::new(vec![1.0, 0.5, 0.0, 0.0]).unwrap(),
            random_sym(4, &mut rng),
            random_sym(4, &mut rng),
        ),
    ];
    for (l, x1, x2) in &cases {
        let c = MomentCoefficients::new(l).unwrap();
        let want = upper(&second_order_operator(&c, x1, x2).unwrap());
        let mut w = Welford::new(want.len());
        for _ in 0..MC_DRAWS {
            let p = haar_sample(l, &mut rng);
            let f = hs_inner(&p, x1).unwrap() * hs_inner(&p, x2).unwrap();
            w.push(&upper(&p.scaled(f)));
        }
        let z = worst_z(&w, &want, 1e-14);
        pass &= z <= 3.0;
        notes.push(format!("Monte Carlo max z {z:.2}"));
    }
    verdict(pass, notes.join("; "))
}

fn c6() -> Verdict {
    let cases = [
        (Spectrum::e1(3).unwrap(), 3usize),
        (Spectrum::projector(4, 2).unwrap(), 2usize),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (ci, (l, t)) in cases.iter().enumerate() {
        let mut ok = 0;
        let mut downgrade_ok = true;
        let mut worst = 0.0_f64;
        for seed in 0..10u64 {
            let mut rng = stream(derive_seed(106, &[ci as u64, seed]));
            match construct_cubature(l, *t, 1000, 1e-8, &mut rng) {
                Ok(c)
                    if c.verification.mode == VerifyKind::Exact
                        && c.verification.max_residual <= 1e-8 =>
                {
                    ok += 1;
                    worst = worst.max(c.verification.max_residual);
                    for lower in 1..*t {
                        let r =
                            verify_strength(&c.ensemble, lower, 1e-8, VerifyMode::Exact, &mut rng)
                                .unwrap();
                        downgrade_ok &= r.passed;
                    }
                }
                Ok(_) | Err(Error::ResidualNotReached { .. }) => {}
                Err(e) => return verdict(false, format!("unexpected error: {e}")),
            }
        }
        pass &= ok >= 9 && downgrade_ok;
        notes.push(format!(
            "lambda {:?} t={t}: {ok}/10, worst residual {worst:.1e}, downgrade {}",
            l.values(),
            if downgrade_ok { "ok" } else { "FAILED" }
        ));
    }
    verdict(pass, notes.join("; "))
}

fn haar_rows(shared: &mut Shared) -> &[SweepRow] {
    shared.haar_rows.get_or_insert_with(|| {
        let cfg = phase_config(
            vec![4, 6, 8, 10],
            vec![1, 2],
            (1..=8).map(Count::PerDim).collect(),
            EnsembleSource::Haar,
        );
        sweep_rows(&cfg).expect("Haar sweep")
    })
}

fn c7(shared: &mut Shared) -> Verdict {
    let r = rates(haar_rows(shared));
    let mut pass = true;
    let mut notes = Vec::new();
    for d in [4usize, 6, 8, 10] {
        for k in [1usize, 2] {
            let curve: Vec<f64> = (1..=8).map(|m| r[&(d, k, m * d)]).collect();
            let cross = curve.iter().position(|&p| p >= 0.9).map(|i| (i + 1) * d);
            let drops: Vec<f64> = curve
                .windows(2)
                .filter(|w| w[1] < w[0])
                .map(|w| w[0] - w[1])
                .collect();
            let monotone = drops.len() <= 1 && drops.iter().all(|&x| x <= 0.05 + 1e-12);
            pass &= cross.is_some() && monotone;
            notes.push(format!(
                "d={d} k={k} crosses 0.9 at n={}{}",
                cross.map_or("never".to_string(), |n| n.to_string()),
                if monotone { "" } else { " (non-monotone)" }
            ));
        }
    }
    verdict(pass, notes.join(", "))
}

fn c8(shared: &mut Shared) -> Verdict {
    let d = 8;
    let cfg = phase_config(
        vec![d],
        vec![1],
        (4..=8).map(Count::PerDim).collect(),
        EnsembleSource::Build {
            t: 3,
            pool: 5000,
            residual: 1e-8,
        },
    );
    let rows = match sweep_rows(&cfg) {
        Ok(rows) => rows,
        Err(e) => return verdict(false, format!("cubature sweep failed: {e}")),
    };
    if rows.iter().any(|r| r.t != 3) {
        return verdict(false, "sweep did not draw from the strength-3 cubature");
    }
    let cub = rates(&rows);
    let haar = rates(haar_rows(shared));
    let mut pass = true;
    let mut notes = Vec::new();
    for m in 4..=8 {
        let n = m * d;
        let (a, b) = (cub[&(d, 1, n)], haar[&(d, 1, n)]);
        pass &= (a - b).abs() <= 0.1 + 1e-12;
        notes.push(format!("n={n}: {a:.2} vs {b:.2}"));
    }
    verdict(pass, format!("cubature vs Haar {}", notes.join(", ")))
}

fn golf_runs(shared: &mut Shared) -> &[std::result::Result<CertifyOutcome, String>] {
    shared.golf.get_or_insert_with(|| {
        (0..GOLF_TRIALS)
            .map(|i| {
                let d = 8 + i % 9;
                let k = 1 + (i / 9) % 2;
                let mult = 2.0 + ((i / 18) % 3) as f64;
                let mut params = GolfingParams::defaults(d, mult);
                params.c0 = C0;
                params.s = C0;
                certify_trial(
                    d,
                    k,
                    &params,
                    derive_seed(109, &[i as u64]),
                    GOLF_TOL,
                    20_000,
                )
                .map_err(|e| e.to_string())
            })
            .collect()
    })
}

fn c9(shared: &mut Shared) -> Verdict {
    let runs = golf_runs(shared);
    let mut held = 0;
    let mut exhausted = 0;
    let mut counterexamples = Vec::new();
    let mut other = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        match run {
            Ok(o) => {
                if o.verdict.holds && o.in_span {
                    held += 1;
                    if !(o.recovery_error <= 10.0 * GOLF_TOL) {
                        counterexamples.push(format!("trial {i}: error {:.2e}", o.recovery_error));
                    }
                }
            }
            Err(e) if e.contains("golfing stage") => exhausted += 1,
            Err(e) => other.push(format!("trial {i}: {e}")),
        }
    }
    let pass = counterexamples.is_empty() && other.is_empty() && held > 0;
    let mut detail = format!(
        "guarantee held in {held}/{GOLF_TRIALS} trials, {} counterexamples, {exhausted} golfing runs exhausted",
        counterexamples.len()
    );
    for c in counterexamples.iter().chain(&other).take(3) {
        detail += &format!("; {c}");
    }
    verdict(pass, detail)
}

fn c10(shared: &mut Shared) -> Verdict {
    let b = std::f64::consts::SQRT_2 / C0;
    let mut accepted = 0;
    let mut violations = Vec::new();
    for (i, run) in golf_runs(shared).iter().enumerate() {
        let Ok(o) = run else { continue };
        accepted += 1;
        let d = o.x.len() as f64;
        let depth = (d.ln() / (1.0 / b).ln()).ceil() as usize + 2;
        if o.depth != depth || o.q_norms.len() != depth + 1 {
            violations.push(format!("trial {i}: depth {} vs {depth}", o.depth));
        }
        for (s, w) in o.q_norms.windows(2).enumerate() {
            if w[1] > b * w[0] {
                violations.push(format!(
                    "trial {i} stage {}: ratio {:.4}",
                    s + 1,
                    w[1] / w[0]
                ));
            }
        }
    }
    let mut detail = format!("{accepted} accepted runs, {} violations", violations.len());
    for v in violations.iter().take(3) {
        detail += &format!("; {v}");
    }
    verdict(accepted > 0 && violations.is_empty(), detail)
}

fn c11() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        "d_list = 4, 5\nk_list = 1, 2\nn_list = 1d, 3d, 13\ntrials = 4\nseed = 11\n",
        "d_list = 4\nk_list = 1, 2\nn_list = 2d, 4d\ntrials = 3\nseed = 12\nensemble_source = build:2,300,1e-8\n",
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for (ci, text) in configs.iter().enumerate() {
        let cfg_path = dir.path().join(format!("sweep{ci}.cfg"));
        std::fs::write(&cfg_path, text).unwrap();
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let csv = dir.path().join(format!("out{ci}_{rep}.csv"));
            let (mut out, mut err) = (Vec::new(), Vec::new());
            let code = run(
                [
                    "retrieval",
                    "sweep",
                    "--config",
                    cfg_path.to_str().unwrap(),
                    "--out",
                    csv.to_str().unwrap(),
                ],
                &mut out,
                &mut err,
            );
            if code != 0 {
                return verdict(
                    false,
                    format!("sweep exited {code}: {}", String::from_utf8_lossy(&err)),
                );
            }
            outputs.push(std::fs::read(&csv).unwrap());
        }
        let same = outputs[0] == outputs[1];
        pass &= same && !outputs[0].is_empty();
        notes.push(format!(
            "config {}: {} bytes, {}",
            ci + 1,
            outputs[0].len(),
            if same { "identical" } else { "DIFFERENT" }
        ));
    }
    verdict(pass, notes.join("; "))
}

type Criterion = (u8, &'static str, Option<f64>, fn(&mut Shared) -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "zonal identity", Some(1.0), |_| c1()),
        (2, "dual-path moments", Some(5.0), |_| c2()),
        (3, "closed-form anchors", None, |_| c3()),
        (4, "first-order operator and S map", Some(60.0), |_| c4()),
        (5, "second-order operator", None, |_| c5()),
        (6, "cubature construction", Some(300.0), |_| c6()),
        (7, "recovery phase transition", Some(900.0), c7),
        (8, "cubature vs Haar parity", None, c8),
        (9, "certificate soundness", None, c9),
        (10, "golfing decay and depth", None, c10),
        (11, "sweep determinism", None, |_| c11()),
    ];
    let selected: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut shared = Shared::default();
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let mut v = f(&mut shared);
        let secs = start.elapsed().as_secs_f64();
        if let Some(limit) = limit {
            if secs >= limit {
                v.pass = false;
                v.detail += &format!("; runtime {secs:.1}s exceeds {limit}s");
            }
        }
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {} ({secs:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
