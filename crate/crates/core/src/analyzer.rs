//! The quasi-deterministic analyzer.
//!
//! For each incident photon the analyzer draws the free orientation of its
//! matrix Stokes vector, `2 alpha = arg + q`, where `arg` comes from the
//! sampling distribution and `q` is the Poincaré offset of this analyzer
//! relative to the frame the photon is expressed in. The channel is the sign
//! of `T(0) = S1(0) P1(0)`, and the photon leaves in that channel's eigenstate.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::stokes::{Channel, FieldKind, StokesP, StokesS};

/// Distribution of the sampled angle `arg` on `[-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SamplingDistribution {
    /// `arg = arccos(u) - pi/2` with `u` uniform on `[-1, 1]`; density `cos(a)/2`.
    ArccosUniform,
    /// Zero-mean normal, clamped to `[-pi/2, pi/2]`.
    Gaussian { sigma: f64 },
}

/// Gaussian width whose mean absolute deviation equals that of the
/// `cos(a)/2` density: `E|a| = pi/2 - 1` and `E|a| = sigma sqrt(2/pi)`.
pub fn default_gaussian_sigma() -> f64 {
    (FRAC_PI_2 - 1.0) * FRAC_PI_2.sqrt()
}

/// Gaussian width with the same second moment as `cos(a)/2`, `pi^2/4 - 2`.
pub fn moment_matched_gaussian_sigma() -> f64 {
    (PI * PI / 4.0 - 2.0).sqrt()
}

impl SamplingDistribution {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(
                "sigma",
                format!("Gaussian width must be finite and > 0, got {sigma}"),
            ));
        }
        Ok(SamplingDistribution::Gaussian { sigma })
    }

    pub fn default_gaussian() -> Self {
        SamplingDistribution::Gaussian {
            sigma: default_gaussian_sigma(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingDistribution::ArccosUniform => Ok(()),
            SamplingDistribution::Gaussian { sigma } => Self::gaussian(sigma).map(|_| ()),
        }
    }

    /// Density of the continuous part on the open support `(-pi/2, pi/2)`.
    /// Probability mass clamped onto the end points is not included.
    pub fn density(&self, a: f64) -> f64 {
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&a) {
            return 0.0;
        }
        match *self {
            SamplingDistribution::ArccosUniform => 0.5 * a.cos(),
            SamplingDistribution::Gaussian { sigma } => {
                let z = a / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criterion {
    /// Channel is the sign of `T(0)`.
    Deterministic,
    /// Control model: Plus with probability `cos^2` of the angle between the
    /// photon's polarization axis and the analyzer axis, drawn independently
    /// per analyzer.
    MalusProbabilistic,
}

/// `cos(phi) = +1` or `-1` for a linear polarizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhiSign {
    Positive,
    Negative,
}

impl PhiSign {
    pub fn phi(self) -> f64 {
        match self {
            PhiSign::Positive => 0.0,
            PhiSign::Negative => PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Analyzer {
    theta: f64,
    p0: f64,
    phi_sign: PhiSign,
    distribution: SamplingDistribution,
    criterion: Criterion,
    kind: FieldKind,
}

impl Analyzer {
    /// Vector-field analyzer at orientation 0 with `p0 = 1` and `cos(phi) = +1`.
    pub fn new(distribution: SamplingDistribution, criterion: Criterion) -> Result<Self> {
        distribution.validate()?;
        Ok(Analyzer {
            theta: 0.0,
            p0: 1.0,
            phi_sign: PhiSign::Positive,
            distribution,
            criterion,
            kind: FieldKind::Vector,
        })
    }

    /// Physical orientation in radians.
    pub fn with_orientation(mut self, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::invalid("theta", "orientation must be finite"));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn with_p0(mut self, p0: f64) -> Result<Self> {
        if !(p0.is_finite() && p0 > 0.0) {
            return Err(Error::invalid(
                "p0",
                format!("must be finite and > 0, got {p0}"),
            ));
        }
        self.p0 = p0;
        Ok(self)
    }

    pub fn with_phi_sign(mut self, phi_sign: PhiSign) -> Self {
        self.phi_sign = phi_sign;
        self
    }

    pub fn with_kind(mut self, kind: FieldKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn phi_sign(&self) -> PhiSign {
        self.phi_sign
    }

    pub fn distribution(&self) -> SamplingDistribution {
        self.distribution
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Poincaré offset `q` of this analyzer seen from `reference`'s frame.
    pub fn frame_offset(&self, reference: &Analyzer) -> f64 {
        self.kind.poincare_angle(self.theta - reference.theta)
    }

    /// Macroscopic matrix Stokes vector in the analyzer's own frame, i.e.
    /// the average orientation along the `P1` axis.
    pub fn axis_stokes(&self) -> StokesP {
        StokesP::new(self.p0, self.p0, 0.0, 0.0)
    }

    /// Full matrix Stokes vector for a sampled `2 alpha`.
    pub fn sampled_stokes(&self, two_alpha: f64) -> StokesP {
        StokesP::from_orientation(self.p0, two_alpha, self.phi_sign.phi())
    }
}

/// Result of one photon passing one analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelOutcome {
    pub channel: Channel,
    /// Eigenstate of the selected channel, `(s0, +-s0, 0, 0)`, expressed in
    /// the analyzer's own frame.
    pub post_state: StokesS,
    /// `T(0) = S1(0) P1(0)`.
    pub t_value: f64,
    pub drawn_arg: f64,
}

/// Maps `u` in `[-1, 1]` to `arccos(u) - pi/2`.
#[inline]
pub fn arg_from_uniform(u: f64) -> f64 {
    u.acos() - FRAC_PI_2
}

pub fn sample_arg(dist: &SamplingDistribution, rng: &mut RandomStream) -> f64 {
    match *dist {
        SamplingDistribution::ArccosUniform => arg_from_uniform(rng.symmetric_unit()),
        SamplingDistribution::Gaussian { sigma } => {
            (sigma * rng.standard_normal()).clamp(-FRAC_PI_2, FRAC_PI_2)
        }
    }
}

/// `P1` for a sampled orientation `2 alpha = arg + q`.
#[inline]
pub fn p1_for(p0: f64, arg: f64, frame_offset_q: f64) -> f64 {
    p0 * (arg + frame_offset_q).cos()
}

/// Returns `(p1, drawn_arg)`.
pub fn draw_p1(analyzer: &Analyzer, rng: &mut RandomStream, frame_offset_q: f64) -> (f64, f64) {
    let arg = sample_arg(&analyzer.distribution, rng);
    (p1_for(analyzer.p0, arg, frame_offset_q), arg)
}

/// Probability that the control model sends the photon to Plus: the Malus
/// projection `(1 + (s1 cos q + s2 sin q)/s0)/2`.
pub fn malus_plus_probability(s_in: &StokesS, frame_offset_q: f64) -> f64 {
    let (sinq, cosq) = frame_offset_q.sin_cos();
    let along = (s_in.s1 * cosq + s_in.s2 * sinq) / s_in.s0;
    (0.5 * (1.0 + along)).clamp(0.0, 1.0)
}

/// Passes one photon through the analyzer.
///
/// `s_in` is expressed in the reference frame; `frame_offset_q` is this
/// analyzer's Poincaré offset in that frame (0 when the analyzer defines it).
/// Stream consumption: one `arg` draw, then one uniform for the
/// probabilistic control model only.
pub fn transit(
    analyzer: &Analyzer,
    s_in: &StokesS,
    frame_offset_q: f64,
    rng: &mut RandomStream,
) -> Result<ChannelOutcome> {
    if s_in.s0.is_nan() || s_in.s0 <= 0.0 {
        return Err(Error::Degenerate("photon with s0 = 0 reached the analyzer"));
    }
    let (p1, drawn_arg) = draw_p1(analyzer, rng, frame_offset_q);
    let t_value = s_in.s1 * p1;
    let channel = match analyzer.criterion {
        Criterion::Deterministic => Channel::from_sign_of(t_value),
        Criterion::MalusProbabilistic => {
            if rng.unit() < malus_plus_probability(s_in, frame_offset_q) {
                Channel::Plus
            } else {
                Channel::Minus
            }
        }
    };
    Ok(ChannelOutcome {
        channel,
        post_state: StokesS::new(s_in.s0, channel.sign() * s_in.s0, 0.0, 0.0),
        t_value,
        drawn_arg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamLabel, Wing};
    use crate::stokes::{eigenstate_residuals, normalized_residuals, RESIDUAL_TOLERANCE};
    use approx::assert_abs_diff_eq;

    fn stream(seed: u64) -> RandomStream {
        RandomStream::new(seed, StreamLabel::new(0, 0, Wing::Analyzer1))
    }

    fn det() -> Analyzer {
        Analyzer::new(
            SamplingDistribution::ArccosUniform,
            Criterion::Deterministic,
        )
        .unwrap()
    }

    #[test]
    fn arg_endpoints() {
        assert_eq!(arg_from_uniform(0.0), 0.0);
        assert_abs_diff_eq!(arg_from_uniform(1.0), -FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(arg_from_uniform(-1.0), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn p1_examples() {
        assert_eq!(p1_for(1.0, 0.0, 0.0), 1.0);
        assert_abs_diff_eq!(p1_for(2.5, 0.0, PI), -2.5, epsilon = 1e-15);
    }

    #[test]
    fn sampled_args_stay_in_range() {
        let mut rng = stream(9);
        for dist in [
            SamplingDistribution::ArccosUniform,
            SamplingDistribution::default_gaussian(),
            SamplingDistribution::gaussian(5.0).unwrap(),
        ] {
            for _ in 0..20_000 {
                let a = sample_arg(&dist, &mut rng);
                assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&a));
                assert!(a.cos() >= 0.0);
            }
        }
    }

    #[test]
    fn default_sigma_matches_mean_absolute_deviation() {
        let s = default_gaussian_sigma();
        assert_abs_diff_eq!(s * (2.0 / PI).sqrt(), FRAC_PI_2 - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.715_387_1, epsilon = 1e-6);
        assert_abs_diff_eq!(moment_matched_gaussian_sigma(), 0.683_667_4, epsilon = 1e-6);
    }

    #[test]
    fn positive_fraction_at_quarter_turn() {
        // q = 2 * 45 deg; closed form cos^2(q/2) = 0.5
        let a = det();
        let mut rng = stream(11);
        let n = 100_000;
        let pos = (0..n)
            .filter(|_| draw_p1(&a, &mut rng, FRAC_PI_2).0 > 0.0)
            .count();
        let frac = pos as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.005, "fraction {frac}");
    }

    #[test]
    fn sign_rule_examples() {
        assert_eq!(Channel::from_sign_of(1.0 * 0.4), Channel::Plus);
        assert_eq!(Channel::from_sign_of(0.5 * -0.2), Channel::Minus);
        assert_abs_diff_eq!(0.5 * -0.2, -0.1, epsilon = 1e-15);
        assert_eq!(Channel::from_sign_of(0.0), Channel::Plus);
    }

    #[test]
    fn transit_uses_sign_of_t() {
        let a = det();
        let mut rng = stream(3);
        for _ in 0..1000 {
            let mut probe = rng.clone();
            let (p1, arg) = draw_p1(&a, &mut probe, 0.7);
            let s = StokesS::new(1.0, 0.5, 0.3, 0.0);
            let out = transit(&a, &s, 0.7, &mut rng).unwrap();
            assert_eq!(out.drawn_arg, arg);
            assert_eq!(out.t_value, 0.5 * p1);
            assert_eq!(out.channel, Channel::from_sign_of(out.t_value));
        }
    }

    #[test]
    fn own_frame_transit_follows_s1_sign() {
        let a = det();
        let mut rng = stream(5);
        for s1 in [-1.0, -0.3, 0.2, 1.0] {
            let s = StokesS::new(1.0, s1, (1.0 - s1 * s1).sqrt(), 0.0);
            for _ in 0..500 {
                let out = transit(&a, &s, 0.0, &mut rng).unwrap();
                assert_eq!(out.channel, Channel::from_sign_of(s1));
            }
        }
    }

    #[test]
    fn post_state_is_channel_eigenstate() {
        let a = det().with_p0(2.0).unwrap();
        let mut rng = stream(8);
        let s = StokesS::new(3.0, 1.0, -2.0, 2.0);
        for _ in 0..200 {
            let out = transit(&a, &s, 1.1, &mut rng).unwrap();
            let r = normalized_residuals(&out.post_state, &a.axis_stokes(), out.channel).unwrap();
            assert!(r.iter().all(|x| x.abs() <= RESIDUAL_TOLERANCE));
            let raw = eigenstate_residuals(&out.post_state, &a.axis_stokes(), out.channel).unwrap();
            assert!(raw.iter().all(|x| x.abs() <= 1e-12));
        }
    }

    #[test]
    fn transit_is_reproducible() {
        for criterion in [Criterion::Deterministic, Criterion::MalusProbabilistic] {
            let a = Analyzer::new(SamplingDistribution::ArccosUniform, criterion).unwrap();
            let s = StokesS::new(1.0, 0.1, 0.99, 0.0);
            let mut r1 = stream(77);
            let mut r2 = r1.clone();
            for _ in 0..100 {
                let o1 = transit(&a, &s, 0.4, &mut r1).unwrap();
                let o2 = transit(&a, &s, 0.4, &mut r2).unwrap();
                assert_eq!(o1, o2);
            }
        }
    }

    #[test]
    fn transit_rejects_dark_photon() {
        let mut rng = stream(1);
        let s = StokesS::new(0.0, 0.0, 0.0, 0.0);
        assert!(transit(&det(), &s, 0.0, &mut rng).is_err());
    }

    #[test]
    fn probabilistic_control_follows_malus_projection() {
        let a = Analyzer::new(
            SamplingDistribution::ArccosUniform,
            Criterion::MalusProbabilistic,
        )
        .unwrap();
        // photon polarized at 30 deg, analyzer axis at 0: P(Plus) = cos^2(30 deg)
        let beta = 30f64.to_radians();
        let s = StokesS::new(1.0, (2.0 * beta).cos(), (2.0 * beta).sin(), 0.0);
        assert_abs_diff_eq!(malus_plus_probability(&s, 0.0), 0.75, epsilon = 1e-12);
        let mut rng = stream(21);
        let n = 100_000;
        let plus = (0..n)
            .filter(|_| transit(&a, &s, 0.0, &mut rng).unwrap().channel == Channel::Plus)
            .count();
        let frac = plus as f64 / n as f64;
        let sigma = (0.75 * 0.25 / n as f64).sqrt();
        assert!((frac - 0.75).abs() < 4.0 * sigma, "fraction {frac}");
    }

    #[test]
    fn frame_offset_doubles_for_vectors() {
        let a1 = det();
        let a2 = det().with_orientation(0.3).unwrap();
        assert_abs_diff_eq!(a2.frame_offset(&a1), 0.6, epsilon = 1e-15);
        let s2 = a2.with_kind(FieldKind::Spinor);
        assert_abs_diff_eq!(s2.frame_offset(&a1), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SamplingDistribution::gaussian(0.0).is_err());
        assert!(SamplingDistribution::gaussian(f64::NAN).is_err());
        assert!(Analyzer::new(
            SamplingDistribution::Gaussian { sigma: -1.0 },
            Criterion::Deterministic
        )
        .is_err());
        assert!(det().with_p0(0.0).is_err());
        assert!(det().with_orientation(f64::INFINITY).is_err());
    }

    #[test]
    fn sampled_stokes_is_on_sphere() {
        let a = det().with_p0(1.5).unwrap().with_phi_sign(PhiSign::Negative);
        let p = a.sampled_stokes(0.8);
        assert!(p.purity_defect() < 1e-12);
        assert!(p.p2 < 0.0);
    }
}
