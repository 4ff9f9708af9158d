//! Statistical validation: binomial error bars, chi-square fits and the
//! quadrature oracle for channel probabilities.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::analyzer::{p1_for, Criterion, SamplingDistribution};
use crate::error::{Error, Result};
use crate::stokes::Channel;

/// Accepted range of reduced chi-square.
pub const REDUCED_CHI_SQUARE_BAND: (f64, f64) = (0.3, 2.5);
/// Largest accepted single-point residual, in standard deviations.
pub const MAX_RESIDUAL_SIGMAS: f64 = 4.0;

const QUADRATURE_TOLERANCE: f64 = 1e-13;
const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn bisect_root<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64) -> f64 {
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Integral of `density` over `{a in [lo, hi] : g(a) > 0}`. Break points of
/// `g` are located by scanning and bisection, then each piece is integrated
/// separately so the quadrature only ever sees a smooth integrand.
fn integrate_where_positive<D, G>(density: D, g: G, lo: f64, hi: f64) -> f64
where
    D: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    const SCAN: usize = 256;
    let mut breaks = vec![lo];
    let step = (hi - lo) / SCAN as f64;
    let mut x0 = lo;
    let mut g0 = g(x0);
    for i in 1..=SCAN {
        let x1 = if i == SCAN { hi } else { lo + i as f64 * step };
        let g1 = g(x1);
        if g0 == 0.0 {
            breaks.push(x0);
        } else if g0 * g1 < 0.0 {
            breaks.push(bisect_root(&g, x0, x1));
        }
        x0 = x1;
        g0 = g1;
    }
    breaks.push(hi);
    breaks.dedup();
    breaks
        .windows(2)
        .filter(|w| g(0.5 * (w[0] + w[1])) > 0.0)
        .map(|w| integrate(&density, w[0], w[1], QUADRATURE_TOLERANCE))
        .sum()
}

/// Mass the clamped Gaussian puts on each end point `+-pi/2`.
pub fn boundary_mass(dist: &SamplingDistribution) -> f64 {
    match dist {
        SamplingDistribution::ArccosUniform => 0.0,
        SamplingDistribution::Gaussian { .. } => {
            let inner = integrate(|a| dist.density(a), 0.0, FRAC_PI_2, QUADRATURE_TOLERANCE);
            (0.5 - inner).max(0.0)
        }
    }
}

/// Probability that an analyzer offset by the relative angle `theta_deg`
/// (vector kind, `q = 2 theta`) returns Plus for an eigenstate `s1 = +s0`
/// prepared by the frame-defining analyzer.
///
/// Computed by quadrature of the sampling density over the set where
/// `cos(arg + q) > 0`; clamped Gaussian end-point masses are decided with the
/// same tie rule the analyzer uses. For `ArccosUniform` this equals
/// `cos^2(theta)`.
pub fn closed_form_plus_probability(theta_deg: f64, dist: &SamplingDistribution) -> f64 {
    let q = 2.0 * theta_deg.to_radians();
    let continuous = integrate_where_positive(
        |a| dist.density(a),
        |a| (a + q).cos(),
        -FRAC_PI_2,
        FRAC_PI_2,
    );
    let edge = boundary_mass(dist);
    let edges: f64 = [-FRAC_PI_2, FRAC_PI_2]
        .iter()
        .filter(|&&a| Channel::from_sign_of(p1_for(1.0, a, q)) == Channel::Plus)
        .map(|_| edge)
        .sum();
    (continuous + edges).clamp(0.0, 1.0)
}

/// Probability that the second stage returns Plus for an eigenstate
/// `s1 = +s0`, under either criterion.
pub fn stage_plus_probability(
    theta_deg: f64,
    dist: &SamplingDistribution,
    criterion: Criterion,
) -> f64 {
    match criterion {
        Criterion::Deterministic => closed_form_plus_probability(theta_deg, dist),
        Criterion::MalusProbabilistic => theta_deg.to_radians().cos().powi(2),
    }
}

/// Expected fractions `(pp, pm, mp, mm)` of the incident photons in the
/// in-sequence experiment. The first analyzer splits evenly.
pub fn expected_malus_fractions(
    theta_deg: f64,
    dist: &SamplingDistribution,
    criterion: Criterion,
) -> [f64; 4] {
    let p = stage_plus_probability(theta_deg, dist, criterion);
    [0.5 * p, 0.5 * (1.0 - p), 0.5 * (1.0 - p), 0.5 * p]
}

/// Expected pair correlation `E(theta)` of the model under the given settings.
pub fn expected_correlation(
    theta_deg: f64,
    dist: &SamplingDistribution,
    criterion: Criterion,
    coupled: bool,
) -> f64 {
    if !coupled {
        return 0.0;
    }
    match criterion {
        Criterion::Deterministic => 2.0 * closed_form_plus_probability(theta_deg, dist) - 1.0,
        Criterion::MalusProbabilistic => 0.5 * (2.0 * theta_deg.to_radians()).cos(),
    }
}

pub fn binomial_sigma(n: u64, p: f64) -> f64 {
    let n = n as f64;
    (n * p * (1.0 - p)).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub reduced_chi_square: f64,
    pub max_abs_residual_sigmas: f64,
    /// Reduced chi-square inside [`REDUCED_CHI_SQUARE_BAND`].
    pub within_band: bool,
    pub pass: bool,
}

/// Chi-square of counts against expectations with binomial variance
/// `max(exp (1 - exp/trials), variance_floor)` per point.
///
/// `pass` requires every residual within [`MAX_RESIDUAL_SIGMAS`] and the
/// reduced chi-square inside the band; an exact match (chi-square 0) also
/// passes.
pub fn chi_square_fit(
    observed: &[u64],
    expected: &[f64],
    trials: u64,
    variance_floor: f64,
) -> Result<FitReport> {
    if observed.len() != expected.len() {
        return Err(Error::LengthMismatch {
            observed: observed.len(),
            expected: expected.len(),
        });
    }
    if observed.len() < 2 {
        return Err(Error::TooFewPoints(observed.len()));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    if !(variance_floor.is_finite() && variance_floor >= 0.0) {
        return Err(Error::invalid("variance_floor", "must be finite and >= 0"));
    }
    if let Some(bad) = expected.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::invalid(
            "expected",
            format!("values must be finite and >= 0, got {bad}"),
        ));
    }
    if variance_floor == 0.0 && expected.iter().all(|&e| e == 0.0) {
        return Err(Error::Degenerate(
            "all expected values are zero and the variance floor is zero",
        ));
    }

    let n = trials as f64;
    let mut chi_square = 0.0;
    let mut max_sigmas: f64 = 0.0;
    for (&obs, &exp) in observed.iter().zip(expected) {
        let diff = obs as f64 - exp;
        let variance = (exp * (1.0 - exp / n)).max(variance_floor);
        let (term, sigmas) = if diff == 0.0 {
            (0.0, 0.0)
        } else if variance > 0.0 {
            (diff * diff / variance, diff.abs() / variance.sqrt())
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        chi_square += term;
        max_sigmas = max_sigmas.max(sigmas);
    }
    let dof = observed.len() - 1;
    let reduced = chi_square / dof as f64;
    let (lo, hi) = REDUCED_CHI_SQUARE_BAND;
    let within_band = (lo..=hi).contains(&reduced);
    let pass = max_sigmas <= MAX_RESIDUAL_SIGMAS && (within_band || chi_square == 0.0);
    Ok(FitReport {
        chi_square,
        degrees_of_freedom: dof,
        reduced_chi_square: reduced,
        max_abs_residual_sigmas: max_sigmas,
        within_band,
        pass,
    })
}

/// Pearson chi-square of a histogram against bin probabilities; returns
/// `(chi_square, degrees_of_freedom)` with `dof = bins - 1`.
pub fn histogram_chi_square(observed: &[u64], probabilities: &[f64]) -> Result<(f64, usize)> {
    if observed.len() != probabilities.len() {
        return Err(Error::LengthMismatch {
            observed: observed.len(),
            expected: probabilities.len(),
        });
    }
    if observed.len() < 2 {
        return Err(Error::TooFewPoints(observed.len()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    let n = total as f64;
    let mut chi = 0.0;
    for (&o, &p) in observed.iter().zip(probabilities) {
        let e = n * p;
        if e <= 0.0 {
            if o > 0 {
                return Ok((f64::INFINITY, observed.len() - 1));
            }
            continue;
        }
        let d = o as f64 - e;
        chi += d * d / e;
    }
    Ok((chi, observed.len() - 1))
}
