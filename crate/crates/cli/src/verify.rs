//! The `verify` subcommand: algebraic, statistical and reproducibility checks.
//!
//! Property checks draw from [`SUITE_SEED`] so their verdict does not depend
//! on the run seed; the reproducibility checks use the run seed.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix2, SymmetricEigen};
use serde::Serialize;

use qpol_core::analysis::{closed_form_plus_probability, histogram_chi_square};
use qpol_core::analyzer::sample_arg;
use qpol_core::experiments::{run_coincidence, run_malus};
use qpol_core::stokes::{
    eigenvalues, field_to_stokes, matrix_to_stokes, normalized_residuals, RESIDUAL_TOLERANCE,
};
use qpol_core::{
    AngleGrid, Channel, CoincidenceConfig, FieldState, HermitianAnalyzerMatrix, MalusConfig,
    RandomStream, SamplingDistribution, StreamLabel, Wing,
};

use crate::config::RunPlan;
use crate::error::CliError;
use crate::output::{
    checks_csv, coincidence_csv, malus_csv, summary_json, Artifacts, CheckOutcome,
};
use crate::run::{verdict, Outcome};

pub const SUITE_SEED: u64 = 0x5eed_7e57;
const MATRICES: usize = 10_000;
const HISTOGRAM_DRAWS: usize = 1_000_000;
const HISTOGRAM_BINS: usize = 50;
const REPRO_COUNT: u64 = 3_000;

fn check(name: &str, value: f64, threshold: f64, passed: bool) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        value,
        threshold,
        passed,
    }
}

fn at_most(name: &str, value: f64, threshold: f64) -> CheckOutcome {
    check(name, value, threshold, value <= threshold)
}

fn random_matrix(rng: &mut RandomStream) -> HermitianAnalyzerMatrix {
    let a = 20.0 * rng.unit() - 10.0;
    let d = 20.0 * rng.unit() - 10.0;
    let h = 10.0 * rng.unit();
    let phi = TAU * rng.unit();
    HermitianAnalyzerMatrix::new(a, d, h, phi).expect("h >= 0")
}

/// Worst normalized eigen-relation residual, with eigenvectors from a general
/// Hermitian solver, and worst relative error of `lambda+ - lambda- = p0`.
fn eigen_checks() -> Result<(f64, f64), CliError> {
    let mut rng = RandomStream::new(SUITE_SEED, StreamLabel::new(0, 0, Wing::Source));
    let (mut worst_residual, mut worst_gap) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < MATRICES {
        let m = random_matrix(&mut rng);
        let p = matrix_to_stokes(&m);
        let e = eigenvalues(&m);
        let gap_err = (e.gap() - p.p0).abs() / p.p0.max(f64::MIN_POSITIVE);
        worst_gap = worst_gap.max(if e.gap() == p.p0 { 0.0 } else { gap_err });
        if p.p0 <= 1e-9 {
            continue;
        }
        let ent = m.entries();
        let eig = SymmetricEigen::new(Matrix2::new(ent[0][0], ent[0][1], ent[1][0], ent[1][1]));
        for i in 0..2 {
            let v = eig.eigenvectors.column(i);
            let branch = if eig.eigenvalues[i] >= eig.eigenvalues[1 - i] {
                Channel::Plus
            } else {
                Channel::Minus
            };
            let s = field_to_stokes(&FieldState::from_amplitudes(v[0], v[1])?);
            let r = normalized_residuals(&s, &p, branch)?;
            worst_residual = r.iter().fold(worst_residual, |acc, x| acc.max(x.abs()));
        }
        done += 1;
    }
    Ok((worst_residual, worst_gap))
}

fn pure_state_check() -> Result<f64, CliError> {
    let mut rng = RandomStream::new(SUITE_SEED, StreamLabel::new(1, 0, Wing::Source));
    let mut worst = 0.0f64;
    for _ in 0..MATRICES {
        let f = FieldState::new(
            0.01 + 10.0 * rng.unit(),
            TAU * rng.unit(),
            TAU * rng.unit(),
            TAU * rng.unit(),
        )?;
        worst = worst.max(field_to_stokes(&f).purity_defect());
    }
    Ok(worst)
}

fn histogram_check() -> Result<f64, CliError> {
    let width = PI / HISTOGRAM_BINS as f64;
    let mut rng = RandomStream::new(SUITE_SEED, StreamLabel::new(0, 0, Wing::Analyzer1));
    let mut hist = vec![0u64; HISTOGRAM_BINS];
    for _ in 0..HISTOGRAM_DRAWS {
        let a = sample_arg(&SamplingDistribution::ArccosUniform, &mut rng);
        let bin = (((a + FRAC_PI_2) / width) as usize).min(HISTOGRAM_BINS - 1);
        hist[bin] += 1;
    }
    // P(lo <= arg < hi) = (sin hi - sin lo) / 2
    let probs: Vec<f64> = (0..HISTOGRAM_BINS)
        .map(|i| {
            let lo = -FRAC_PI_2 + i as f64 * width;
            0.5 * ((lo + width).sin() - lo.sin())
        })
        .collect();
    let (chi, dof) = histogram_chi_square(&hist, &probs)?;
    Ok(chi / dof as f64)
}

fn quadrature_check() -> f64 {
    (0..=180)
        .map(|deg| {
            let t = f64::from(deg);
            let exact = t.to_radians().cos().powi(2);
            (closed_form_plus_probability(t, &SamplingDistribution::ArccosUniform) - exact).abs()
        })
        .fold(0.0, f64::max)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Number of byte positions that differ, plus any length difference.
fn byte_difference(a: &str, b: &str) -> f64 {
    let differing = a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count();
    (differing + a.len().abs_diff(b.len())) as f64
}

fn reproducibility_checks(seed: u64) -> Result<(f64, f64), CliError> {
    let malus = MalusConfig::new(AngleGrid::default(), REPRO_COUNT, seed);
    let pairs = CoincidenceConfig::new(AngleGrid::default(), REPRO_COUNT, seed);
    let render = |threads| -> Result<(String, String), CliError> {
        with_threads(threads, || -> Result<(String, String), CliError> {
            Ok((
                malus_csv(&run_malus(&malus)?),
                coincidence_csv(&run_coincidence(&pairs)?),
            ))
        })?
    };
    let (m1, c1) = render(1)?;
    let (m8, c8) = render(8)?;
    Ok((byte_difference(&m1, &m8), byte_difference(&c1, &c8)))
}

/// Events that contradict the exact end-point outcomes of the deterministic
/// model: parallel analyzers never disagree, crossed analyzers never agree.
fn endpoint_violations(seed: u64) -> Result<f64, CliError> {
    let grid = AngleGrid::new(vec![0.0, 90.0])?;
    let malus = run_malus(&MalusConfig::new(grid.clone(), REPRO_COUNT, seed))?;
    let pairs = run_coincidence(&CoincidenceConfig::new(grid, REPRO_COUNT, seed))?;
    let mut bad = 0;
    for rows in [&malus, &pairs] {
        bad += rows[0].counts.n_pm + rows[0].counts.n_mp;
        bad += rows[1].counts.n_pp + rows[1].counts.n_mm;
    }
    Ok(bad as f64)
}

pub fn checks(seed: u64) -> Result<Vec<CheckOutcome>, CliError> {
    let (residual, gap) = eigen_checks()?;
    let chi_per_dof = histogram_check()?;
    let (malus_diff, pairs_diff) = reproducibility_checks(seed)?;
    Ok(vec![
        at_most("eigen_residual_max", residual, RESIDUAL_TOLERANCE),
        at_most("spectral_gap_rel_error_max", gap, 1e-12),
        at_most("pure_state_norm_defect_max", pure_state_check()?, 1e-12),
        check("sampler_chi2_per_dof", chi_per_dof, 1.5, chi_per_dof < 1.5),
        at_most("quadrature_vs_cos2_max", quadrature_check(), 1e-8),
        at_most("malus_csv_bytes_differing_1_vs_8_threads", malus_diff, 0.0),
        at_most(
            "coincidence_csv_bytes_differing_1_vs_8_threads",
            pairs_diff,
            0.0,
        ),
        at_most("endpoint_violations", endpoint_violations(seed)?, 0.0),
    ])
}

#[derive(Serialize)]
struct VerifySummary<'a> {
    experiment: &'static str,
    seed: u64,
    suite_seed: u64,
    checks: &'a [CheckOutcome],
    pass: bool,
}

pub fn run(plan: &RunPlan) -> Result<Outcome, CliError> {
    let results = checks(plan.seed)?;
    let pass = results.iter().all(|c| c.passed);
    let summary = VerifySummary {
        experiment: "verify",
        seed: plan.seed,
        suite_seed: SUITE_SEED,
        checks: &results,
        pass,
    };
    let mut artifacts = Artifacts::default();
    artifacts.push(crate::output::RESULTS_FILE, checks_csv(&results));
    artifacts.push(crate::output::SUMMARY_FILE, summary_json(&summary));

    let mut report = vec![format!("verify: seed {}", plan.seed)];
    for c in &results {
        report.push(format!(
            "  {:<48} {:>12.4e} (limit {:.1e})  {}",
            c.name,
            c.value,
            c.threshold,
            verdict(c.passed)
        ));
    }
    report.push(format!("  verdict: {}", verdict(pass)));
    Ok(Outcome {
        artifacts,
        report,
        passed: pass,
    })
}
