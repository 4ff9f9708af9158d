//! Executes a resolved [`RunPlan`] and assembles its artifacts and verdicts.

use serde::Serialize;

use qpol_core::analysis::{
    chi_square_fit, expected_correlation, expected_malus_fractions, FitReport, MAX_RESIDUAL_SIGMAS,
};
use qpol_core::experiments::{chsh_s, run_coincidence, run_malus, ChshResult};
use qpol_core::{CoincidenceConfig, Criterion, MalusConfig, ResultRow, SamplingDistribution};

use crate::config::{ExperimentKind, RunPlan};
use crate::error::CliError;
use crate::output::{
    chsh_csv, coincidence_csv, malus_csv, sample_curve, summary_json, Artifacts, Chart, Marker,
    Series, RESULTS_FILE, SUMMARY_FILE,
};
use crate::verify;

/// Counts per angle below which a Malus chart is written as `fig1.svg`.
pub const SMALL_RUN_LIMIT: u64 = 1000;

/// Variance floor for count fits; keeps zero-expectation points finite.
const VARIANCE_FLOOR: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Artifacts,
    /// Human-readable summary, one entry per line.
    pub report: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub experiment: &'static str,
    pub seed: u64,
    pub count_per_angle: u64,
    pub distribution: String,
    pub criterion: &'static str,
}

fn distribution_label(d: &SamplingDistribution) -> String {
    match d {
        SamplingDistribution::ArccosUniform => "arccos_uniform".into(),
        SamplingDistribution::Gaussian { sigma } => format!("gaussian(sigma_rad={sigma})"),
    }
}

fn criterion_label(c: Criterion) -> &'static str {
    match c {
        Criterion::Deterministic => "deterministic",
        Criterion::MalusProbabilistic => "malus_probabilistic",
    }
}

impl RunInfo {
    fn from_plan(plan: &RunPlan) -> Self {
        RunInfo {
            experiment: plan.experiment.name(),
            seed: plan.seed,
            count_per_angle: plan.count_per_angle,
            distribution: distribution_label(&plan.distribution),
            criterion: criterion_label(plan.criterion),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MalusFits {
    /// `N++` against the configured model's expectation
    pub n_pp_model: FitReport,
    /// `N-+` against the configured model's expectation
    pub n_mp_model: FitReport,
    /// `N++` against `N_half cos^2(theta)`
    pub n_pp_malus: FitReport,
    /// `N-+` against `N_half sin^2(theta)`
    pub n_mp_malus: FitReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct MalusSummary {
    #[serde(flatten)]
    pub info: RunInfo,
    pub angles_deg: Vec<f64>,
    pub fits: MalusFits,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Deviation {
    pub max_abs: f64,
    pub rms: f64,
}

impl Deviation {
    fn of(diffs: impl Iterator<Item = f64>) -> Self {
        let (mut max_abs, mut sum, mut n) = (0.0f64, 0.0, 0usize);
        for d in diffs {
            max_abs = max_abs.max(d.abs());
            sum += d * d;
            n += 1;
        }
        Deviation {
            max_abs,
            rms: if n == 0 { 0.0 } else { (sum / n as f64).sqrt() },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoincidenceSummary {
    #[serde(flatten)]
    pub info: RunInfo,
    pub coupled: bool,
    pub angles_deg: Vec<f64>,
    /// Concordant counts `N++ + N--` against `N (1 + E_model) / 2`
    pub concordant_fit: FitReport,
    /// `gamma - cos 2 theta`
    pub gamma_vs_cos2theta: Deviation,
    /// `normalized_pp - cos^2 theta`
    pub norm_pp_vs_cos2: Deviation,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChshTermSummary {
    pub a_deg: f64,
    pub b_deg: f64,
    pub relative_deg: f64,
    pub correlation: f64,
    pub correlation_sigma: f64,
    pub correlation_expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChshSummary {
    #[serde(flatten)]
    pub info: RunInfo,
    pub coupled: bool,
    pub settings_deg: [f64; 4],
    pub s_value: f64,
    pub s_sigma: f64,
    pub s_expected: f64,
    pub exceeds_bell_limit: bool,
    pub bell_significance_sigmas: f64,
    pub terms: Vec<ChshTermSummary>,
    /// Concordant counts of the four terms against the model expectation
    pub concordant_fit: FitReport,
    pub pass: bool,
}

pub fn execute(plan: &RunPlan) -> Result<Outcome, CliError> {
    match plan.experiment {
        ExperimentKind::Malus => malus(plan),
        ExperimentKind::Coincidence => coincidence(plan),
        ExperimentKind::Chsh => chsh(plan),
        ExperimentKind::Verify => verify::run(plan),
    }
}

fn fit_line(label: &str, f: &FitReport) -> String {
    format!(
        "  {label:<24} chi2/dof {:>8.3}  max |res| {:>6.2} sigma  {}",
        f.reduced_chi_square,
        f.max_abs_residual_sigmas,
        verdict(f.pass)
    )
}

pub fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn header(plan: &RunPlan) -> String {
    format!(
        "{}: seed {}, {} per angle, {}, {}",
        plan.experiment,
        plan.seed,
        plan.count_per_angle,
        distribution_label(&plan.distribution),
        criterion_label(plan.criterion)
    )
}

fn malus(plan: &RunPlan) -> Result<Outcome, CliError> {
    let config = MalusConfig {
        grid: plan.grid.clone(),
        photons_per_angle: plan.count_per_angle,
        master_seed: plan.seed,
        distribution: plan.distribution,
        criterion: plan.criterion,
    };
    let rows = run_malus(&config)?;
    let n = plan.count_per_angle;
    let model: Vec<[f64; 4]> = rows
        .iter()
        .map(|r| expected_malus_fractions(r.theta_deg, &plan.distribution, plan.criterion))
        .collect();
    let obs_pp: Vec<u64> = rows.iter().map(|r| r.counts.n_pp).collect();
    let obs_mp: Vec<u64> = rows.iter().map(|r| r.counts.n_mp).collect();
    let nf = n as f64;
    let fits = MalusFits {
        n_pp_model: chi_square_fit(
            &obs_pp,
            &model.iter().map(|m| m[0] * nf).collect::<Vec<_>>(),
            n,
            VARIANCE_FLOOR,
        )?,
        n_mp_model: chi_square_fit(
            &obs_mp,
            &model.iter().map(|m| m[2] * nf).collect::<Vec<_>>(),
            n,
            VARIANCE_FLOOR,
        )?,
        n_pp_malus: chi_square_fit(
            &obs_pp,
            &rows
                .iter()
                .map(|r| r.reference.malus_plus)
                .collect::<Vec<_>>(),
            n,
            VARIANCE_FLOOR,
        )?,
        n_mp_malus: chi_square_fit(
            &obs_mp,
            &rows
                .iter()
                .map(|r| r.reference.malus_minus)
                .collect::<Vec<_>>(),
            n,
            VARIANCE_FLOOR,
        )?,
    };
    let pass = fits.n_pp_model.pass && fits.n_mp_model.pass;
    let summary = MalusSummary {
        info: RunInfo::from_plan(plan),
        angles_deg: plan.grid.angles().to_vec(),
        fits: fits.clone(),
        pass,
    };

    let mut artifacts = Artifacts::default();
    artifacts.push(RESULTS_FILE, malus_csv(&rows));
    artifacts.push(SUMMARY_FILE, summary_json(&summary));
    if plan.svg {
        let name = if n < SMALL_RUN_LIMIT {
            "fig1.svg"
        } else {
            "fig2.svg"
        };
        artifacts.push(name, malus_chart(&rows, n).render());
    }

    let report = vec![
        header(plan),
        format!("  {} angles", rows.len()),
        fit_line("N++ vs model", &fits.n_pp_model),
        fit_line("N-+ vs model", &fits.n_mp_model),
        fit_line("N++ vs cos^2", &fits.n_pp_malus),
        fit_line("N-+ vs sin^2", &fits.n_mp_malus),
        format!("  verdict: {}", verdict(pass)),
    ];
    Ok(Outcome {
        artifacts,
        report,
        passed: pass,
    })
}

fn theta_range(rows: &[ResultRow]) -> (f64, f64) {
    let lo = rows.first().map_or(0.0, |r| r.theta_deg);
    let hi = rows.last().map_or(90.0, |r| r.theta_deg);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, lo + 1.0)
    }
}

fn malus_chart(rows: &[ResultRow], n: u64) -> Chart {
    let half = 0.5 * n as f64;
    let (lo, hi) = theta_range(rows);
    Chart {
        title: format!("Two analyzers in sequence, {n} photons per angle"),
        x_label: "theta (deg)".into(),
        y_label: "counts".into(),
        x_range: (lo, hi),
        y_range: (0.0, (half * 1.1).max(1.0)),
        series: vec![
            Series {
                label: "N++".into(),
                points: rows
                    .iter()
                    .map(|r| (r.theta_deg, r.counts.n_pp as f64))
                    .collect(),
                color: "#1f77b4",
                marker: Marker::Circle,
            },
            Series {
                label: "N-+".into(),
                points: rows
                    .iter()
                    .map(|r| (r.theta_deg, r.counts.n_mp as f64))
                    .collect(),
                color: "#d62728",
                marker: Marker::Square,
            },
            Series {
                label: "N/2 cos^2".into(),
                points: sample_curve(lo, hi, 181, |t| half * t.to_radians().cos().powi(2)),
                color: "#1f77b4",
                marker: Marker::Line,
            },
            Series {
                label: "N/2 sin^2".into(),
                points: sample_curve(lo, hi, 181, |t| half * t.to_radians().sin().powi(2)),
                color: "#d62728",
                marker: Marker::DashedLine,
            },
        ],
    }
}

fn coincidence_config(plan: &RunPlan) -> CoincidenceConfig {
    CoincidenceConfig {
        grid: plan.grid.clone(),
        pairs_per_angle: plan.count_per_angle,
        master_seed: plan.seed,
        distribution: plan.distribution,
        criterion: plan.criterion,
        coupled: plan.coupled,
    }
}

fn concordant_fit(
    counts: impl Iterator<Item = (u64, u64)>,
    expected_e: impl Iterator<Item = f64>,
) -> Result<FitReport, CliError> {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut trials = 0;
    for ((concordant, total), e) in counts.zip(expected_e) {
        obs.push(concordant);
        exp.push(0.5 * total as f64 * (1.0 + e));
        trials = total;
    }
    Ok(chi_square_fit(&obs, &exp, trials, VARIANCE_FLOOR)?)
}

fn coincidence(plan: &RunPlan) -> Result<Outcome, CliError> {
    let rows = run_coincidence(&coincidence_config(plan))?;
    let fit = concordant_fit(
        rows.iter()
            .map(|r| (r.counts.concordant(), r.counts.total())),
        rows.iter().map(|r| {
            expected_correlation(
                r.theta_deg,
                &plan.distribution,
                plan.criterion,
                plan.coupled,
            )
        }),
    )?;
    let gamma_dev = Deviation::of(rows.iter().map(|r| r.gamma - r.reference.gamma_qm));
    let npp_dev = Deviation::of(rows.iter().map(|r| r.normalized_pp - r.normalized_pp_ref));
    let pass = fit.pass;
    let summary = CoincidenceSummary {
        info: RunInfo::from_plan(plan),
        coupled: plan.coupled,
        angles_deg: plan.grid.angles().to_vec(),
        concordant_fit: fit,
        gamma_vs_cos2theta: gamma_dev.clone(),
        norm_pp_vs_cos2: npp_dev.clone(),
        pass,
    };

    let mut artifacts = Artifacts::default();
    artifacts.push(RESULTS_FILE, coincidence_csv(&rows));
    artifacts.push(SUMMARY_FILE, summary_json(&summary));
    if plan.svg {
        let (lo, hi) = theta_range(&rows);
        let n = plan.count_per_angle;
        artifacts.push(
            "fig3.svg",
            Chart {
                title: format!("Normalized coincidences, {n} pairs per angle"),
                x_label: "theta (deg)".into(),
                y_label: "2 N++ / N".into(),
                x_range: (lo, hi),
                y_range: (0.0, 1.1),
                series: vec![
                    Series {
                        label: "simulation".into(),
                        points: rows
                            .iter()
                            .map(|r| (r.theta_deg, r.normalized_pp))
                            .collect(),
                        color: "#1f77b4",
                        marker: Marker::Circle,
                    },
                    Series {
                        label: "cos^2 theta".into(),
                        points: sample_curve(lo, hi, 181, |t| t.to_radians().cos().powi(2)),
                        color: "black",
                        marker: Marker::Line,
                    },
                ],
            }
            .render(),
        );
        artifacts.push(
            "fig4.svg",
            Chart {
                title: format!("Correlation, {n} pairs per angle"),
                x_label: "theta (deg)".into(),
                y_label: "gamma".into(),
                x_range: (lo, hi),
                y_range: (-1.1, 1.1),
                series: vec![
                    Series {
                        label: "simulation".into(),
                        points: rows.iter().map(|r| (r.theta_deg, r.gamma)).collect(),
                        color: "#1f77b4",
                        marker: Marker::Circle,
                    },
                    Series {
                        label: "cos 2 theta".into(),
                        points: sample_curve(lo, hi, 181, |t| (2.0 * t.to_radians()).cos()),
                        color: "black",
                        marker: Marker::Line,
                    },
                ],
            }
            .render(),
        );
    }

    let report = vec![
        header(plan),
        format!("  {} angles, coupled = {}", rows.len(), plan.coupled),
        fit_line("concordant vs model", &fit),
        format!(
            "  gamma - cos 2theta        max {:.4}  rms {:.4}",
            gamma_dev.max_abs, gamma_dev.rms
        ),
        format!(
            "  norm_pp - cos^2 theta     max {:.4}  rms {:.4}",
            npp_dev.max_abs, npp_dev.rms
        ),
        format!("  verdict: {}", verdict(pass)),
    ];
    Ok(Outcome {
        artifacts,
        report,
        passed: pass,
    })
}

/// Model expectation of each CHSH correlation.
pub fn expected_chsh_correlations(plan: &RunPlan, result: &ChshResult) -> [f64; 4] {
    result.terms.map(|t| {
        expected_correlation(
            t.relative_deg,
            &plan.distribution,
            plan.criterion,
            plan.coupled,
        )
    })
}

fn chsh(plan: &RunPlan) -> Result<Outcome, CliError> {
    let result = chsh_s(&coincidence_config(plan), &plan.chsh)?;
    let expected = expected_chsh_correlations(plan, &result);
    let fit = concordant_fit(
        result
            .terms
            .iter()
            .map(|t| (t.counts.concordant(), t.counts.total())),
        expected.iter().copied(),
    )?;
    // four points make the reduced chi-square band too noisy to gate on
    let pass = fit.max_abs_residual_sigmas <= MAX_RESIDUAL_SIGMAS;
    let s_expected = (expected[0] - expected[1]).abs() + (expected[2] + expected[3]).abs();
    let s = &plan.chsh;
    let summary = ChshSummary {
        info: RunInfo::from_plan(plan),
        coupled: plan.coupled,
        settings_deg: [s.a1, s.a2, s.b1, s.b2],
        s_value: result.s_value,
        s_sigma: result.s_sigma,
        s_expected,
        exceeds_bell_limit: result.exceeds_bell_limit(),
        bell_significance_sigmas: result.bell_significance(),
        terms: result
            .terms
            .iter()
            .zip(&expected)
            .map(|(t, &e)| ChshTermSummary {
                a_deg: t.a_deg,
                b_deg: t.b_deg,
                relative_deg: t.relative_deg,
                correlation: t.correlation,
                correlation_sigma: t.correlation_sigma,
                correlation_expected: e,
            })
            .collect(),
        concordant_fit: fit,
        pass,
    };

    let mut artifacts = Artifacts::default();
    artifacts.push(RESULTS_FILE, chsh_csv(&result, &expected));
    artifacts.push(SUMMARY_FILE, summary_json(&summary));

    let mut report = vec![header(plan)];
    for (t, e) in result.terms.iter().zip(&expected) {
        report.push(format!(
            "  E({:>6.2}, {:>6.2}) = {:+.4} +/- {:.4}  (model {:+.4})",
            t.a_deg, t.b_deg, t.correlation, t.correlation_sigma, e
        ));
    }
    report.push(format!(
        "  S = {:.4} +/- {:.4}  (model {:.4}), Bell limit exceeded: {} ({:.1} sigma)",
        result.s_value,
        result.s_sigma,
        s_expected,
        result.exceeds_bell_limit(),
        result.bell_significance()
    ));
    report.push(format!(
        "  max |res| vs model {:.2} sigma",
        fit.max_abs_residual_sigmas
    ));
    report.push(format!("  verdict: {}", verdict(pass)));
    Ok(Outcome {
        artifacts,
        report,
        passed: pass,
    })
}
