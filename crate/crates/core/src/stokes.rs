//! Stokes representation of the two-component Hermitian eigenvalue problem.
//!
//! A field `Psi = [A cos(beta) e^{i alpha_x}, A sin(beta) e^{i(alpha_x + delta)}]`
//! maps to the field Stokes vector `S`, and the Hermitian matrix
//! `[[a, h e^{-i phi}], [h e^{i phi}, d]]` maps to the matrix Stokes vector `P`.
//! Both live on Poincaré spheres with a common centre; the radius of the `P`
//! sphere is the eigenvalue gap.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance for an eigenstate residual to count as zero, applied
/// after normalizing `s0 = p0 = 1`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Output eigenchannel of an analyzer, equivalently the eigenvalue branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Channel {
    Plus,
    Minus,
}

impl Channel {
    pub fn sign(self) -> f64 {
        match self {
            Channel::Plus => 1.0,
            Channel::Minus => -1.0,
        }
    }

    /// Sign rule with the tie `value == 0` assigned to `Plus`.
    #[inline]
    pub fn from_sign_of(value: f64) -> Self {
        if value >= 0.0 {
            Channel::Plus
        } else {
            Channel::Minus
        }
    }
}

/// How Stokes coordinates respond to a rotation of the space coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldKind {
    /// Stokes angle equals the physical angle.
    Spinor,
    /// Stokes angle is twice the physical angle (photons).
    Vector,
}

impl FieldKind {
    /// Poincaré-sphere angle `q` for a physical rotation `theta` (radians).
    #[inline]
    pub fn poincare_angle(self, theta: f64) -> f64 {
        match self {
            FieldKind::Spinor => theta,
            FieldKind::Vector => 2.0 * theta,
        }
    }
}

fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Two-component field pulse; the hidden polarization state of a photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldState {
    amplitude: f64,
    beta: f64,
    alpha_x: f64,
    delta: f64,
}

impl FieldState {
    pub fn new(amplitude: f64, beta: f64, alpha_x: f64, delta: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::invalid(
                "amplitude",
                format!("must be finite and > 0, got {amplitude}"),
            ));
        }
        if !(beta.is_finite() && alpha_x.is_finite() && delta.is_finite()) {
            return Err(Error::invalid("field angle", "angles must be finite"));
        }
        Ok(Self::new_unchecked(amplitude, beta, alpha_x, delta))
    }

    pub(crate) fn new_unchecked(amplitude: f64, beta: f64, alpha_x: f64, delta: f64) -> Self {
        FieldState {
            amplitude,
            beta: reduce_angle(beta),
            alpha_x,
            delta: reduce_angle(delta),
        }
    }

    /// Recovers `(A, beta, alpha_x, delta)` from the complex components.
    pub fn from_amplitudes(psi_x: Complex64, psi_y: Complex64) -> Result<Self> {
        let amplitude = (psi_x.norm_sqr() + psi_y.norm_sqr()).sqrt();
        let beta = psi_y.norm().atan2(psi_x.norm());
        let alpha_x = psi_x.arg();
        let delta = psi_y.arg() - alpha_x;
        Self::new(amplitude, beta, alpha_x, delta)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha_x(&self) -> f64 {
        self.alpha_x
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn components(&self) -> (Complex64, Complex64) {
        let x = Complex64::from_polar(self.amplitude * self.beta.cos(), self.alpha_x);
        let y = Complex64::from_polar(self.amplitude * self.beta.sin(), self.alpha_x + self.delta);
        (x, y)
    }
}

/// Field Stokes vector `(S0, S1, S2, S3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StokesS {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesS {
    pub const fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        StokesS { s0, s1, s2, s3 }
    }

    /// `s1^2 + s2^2 + s3^2`
    pub fn polarized_norm_sqr(&self) -> f64 {
        self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3
    }

    /// Relative deviation from the pure-state identity `|S| = S0`.
    pub fn purity_defect(&self) -> f64 {
        let s0_sq = self.s0 * self.s0;
        if s0_sq == 0.0 {
            return self.polarized_norm_sqr();
        }
        (self.polarized_norm_sqr() - s0_sq).abs() / s0_sq
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.s0.is_nan() || self.s0 <= 0.0 {
            return Err(Error::Degenerate("field Stokes vector with s0 = 0"));
        }
        let k = self.s0.recip();
        Ok(StokesS::new(1.0, self.s1 * k, self.s2 * k, self.s3 * k))
    }
}

impl From<&FieldState> for StokesS {
    fn from(f: &FieldState) -> Self {
        field_to_stokes(f)
    }
}

/// Hermitian analyzer matrix `[[a, h e^{-i phi}], [h e^{i phi}, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianAnalyzerMatrix {
    pub a: f64,
    pub d: f64,
    pub h: f64,
    pub phi: f64,
}

impl HermitianAnalyzerMatrix {
    pub fn new(a: f64, d: f64, h: f64, phi: f64) -> Result<Self> {
        if !(a.is_finite() && d.is_finite() && h.is_finite() && phi.is_finite()) {
            return Err(Error::invalid(
                "matrix element",
                "all elements must be finite",
            ));
        }
        if h < 0.0 {
            return Err(Error::invalid(
                "h",
                format!("off-diagonal magnitude must be >= 0, got {h}"),
            ));
        }
        Ok(HermitianAnalyzerMatrix { a, d, h, phi })
    }

    /// Row-major complex entries.
    pub fn entries(&self) -> [[Complex64; 2]; 2] {
        [
            [
                Complex64::new(self.a, 0.0),
                Complex64::from_polar(self.h, -self.phi),
            ],
            [
                Complex64::from_polar(self.h, self.phi),
                Complex64::new(self.d, 0.0),
            ],
        ]
    }
}

/// Matrix Stokes vector `(P0, P1, P2, P3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StokesP {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl StokesP {
    pub const fn new(p0: f64, p1: f64, p2: f64, p3: f64) -> Self {
        StokesP { p0, p1, p2, p3 }
    }

    /// Point on the sphere of radius `p0` at polar coordinate `2 alpha`
    /// measured from the `P1` axis and azimuth `phi`.
    pub fn from_orientation(p0: f64, two_alpha: f64, phi: f64) -> Self {
        let (sin2a, cos2a) = two_alpha.sin_cos();
        StokesP::new(
            p0,
            p0 * cos2a,
            p0 * sin2a * phi.cos(),
            p0 * sin2a * phi.sin(),
        )
    }

    /// `2 alpha`, quadrant-correct, in `[0, pi]`.
    pub fn two_alpha(&self) -> f64 {
        self.p2.hypot(self.p3).atan2(self.p1)
    }

    pub fn purity_defect(&self) -> f64 {
        let p0_sq = self.p0 * self.p0;
        let n = self.p1 * self.p1 + self.p2 * self.p2 + self.p3 * self.p3;
        if p0_sq == 0.0 {
            return n;
        }
        (n - p0_sq).abs() / p0_sq
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.p0.is_nan() || self.p0 <= 0.0 {
            return Err(Error::Degenerate("matrix Stokes vector with p0 = 0"));
        }
        let k = self.p0.recip();
        Ok(StokesP::new(1.0, self.p1 * k, self.p2 * k, self.p3 * k))
    }
}

/// The two eigenvalues, `lambda_plus >= lambda_minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

impl EigenPair {
    pub fn gap(&self) -> f64 {
        self.lambda_plus - self.lambda_minus
    }

    pub fn for_channel(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Plus => self.lambda_plus,
            Channel::Minus => self.lambda_minus,
        }
    }
}

pub fn field_to_stokes(f: &FieldState) -> StokesS {
    let s0 = f.amplitude * f.amplitude;
    let (sin2b, cos2b) = (2.0 * f.beta).sin_cos();
    let (sind, cosd) = f.delta.sin_cos();
    StokesS::new(s0, s0 * cos2b, s0 * sin2b * cosd, s0 * sin2b * sind)
}

/// Matrix Stokes vector with `2 alpha = atan2(2h, a - d)`.
///
/// `p0 cos(2 alpha)` and `p0 sin(2 alpha)` reduce to `a - d` and `2h`, which
/// are used directly. The degenerate matrix `a = d, h = 0` yields the zero
/// vector; consumers reject `p0 = 0`.
pub fn matrix_to_stokes(m: &HermitianAnalyzerMatrix) -> StokesP {
    let diff = m.a - m.d;
    let off = 2.0 * m.h;
    let p0 = diff.hypot(off);
    if p0 == 0.0 {
        return StokesP::new(0.0, 0.0, 0.0, 0.0);
    }
    let (sinp, cosp) = m.phi.sin_cos();
    StokesP::new(p0, diff, off * cosp, off * sinp)
}

pub fn eigenvalues(m: &HermitianAnalyzerMatrix) -> EigenPair {
    let gap = (m.a - m.d).hypot(2.0 * m.h);
    let mean = 0.5 * (m.a + m.d);
    EigenPair {
        lambda_plus: mean + 0.5 * gap,
        lambda_minus: mean - 0.5 * gap,
    }
}

/// Residuals of the three eigenstate relations for the given branch:
///
/// - `r1 = P.S - branch p0 s0` (spatial dot product)
/// - `r2 = s3 p2 - s2 p3`
/// - `r3 = s1 p1 - branch p1^2 s0 / p0`
pub fn eigenstate_residuals(s: &StokesS, p: &StokesP, branch: Channel) -> Result<[f64; 3]> {
    if p.p0.is_nan() || p.p0 <= 0.0 {
        return Err(Error::Degenerate("eigenstate residuals need p0 > 0"));
    }
    if s.s0.is_nan() || s.s0 <= 0.0 {
        return Err(Error::Degenerate("eigenstate residuals need s0 > 0"));
    }
    let sign = branch.sign();
    let dot = p.p1 * s.s1 + p.p2 * s.s2 + p.p3 * s.s3;
    Ok([
        dot - sign * p.p0 * s.s0,
        s.s3 * p.p2 - s.s2 * p.p3,
        s.s1 * p.p1 - sign * p.p1 * p.p1 * s.s0 / p.p0,
    ])
}

/// Residuals after scaling both vectors to unit radius; compare against
/// [`RESIDUAL_TOLERANCE`].
pub fn normalized_residuals(s: &StokesS, p: &StokesP, branch: Channel) -> Result<[f64; 3]> {
    eigenstate_residuals(&s.normalized()?, &p.normalized()?, branch)
}

/// Rotates `(s1, s2)` by the Poincaré angle belonging to a physical rotation
/// `theta`; `s0` and `s3` are untouched.
pub fn rotate_stokes(s: &StokesS, theta: f64, kind: FieldKind) -> StokesS {
    let (sinq, cosq) = kind.poincare_angle(theta).sin_cos();
    StokesS::new(
        s.s0,
        s.s1 * cosq - s.s2 * sinq,
        s.s1 * sinq + s.s2 * cosq,
        s.s3,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, PI};

    fn assert_stokes(s: StokesS, expected: [f64; 4]) {
        assert_abs_diff_eq!(s.s0, expected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(s.s1, expected[1], epsilon = 1e-12);
        assert_abs_diff_eq!(s.s2, expected[2], epsilon = 1e-12);
        assert_abs_diff_eq!(s.s3, expected[3], epsilon = 1e-12);
    }

    #[test]
    fn field_to_stokes_examples() {
        let h = FieldState::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_stokes(field_to_stokes(&h), [1.0, 1.0, 0.0, 0.0]);

        let c = FieldState::new(1.0, FRAC_PI_4, 0.3, FRAC_PI_2).unwrap();
        assert_stokes(field_to_stokes(&c), [1.0, 0.0, 0.0, 1.0]);

        let f = FieldState::new(2.0, FRAC_PI_6, 0.0, 0.0).unwrap();
        let s = field_to_stokes(&f);
        assert_stokes(s, [4.0, 2.0, 2.0 * 3f64.sqrt(), 0.0]);
        assert_abs_diff_eq!(s.polarized_norm_sqr(), 16.0, epsilon = 1e-12);
    }

    #[test]
    fn field_angles_are_reduced() {
        let f = FieldState::new(1.0, -FRAC_PI_2, 0.0, 3.0 * PI).unwrap();
        assert!((0.0..TAU).contains(&f.beta()));
        assert_abs_diff_eq!(f.beta(), 1.5 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(f.delta(), PI, epsilon = 1e-15);
        let tiny = FieldState::new(1.0, -1e-20, 0.0, 0.0).unwrap();
        assert!(tiny.beta() < TAU);
    }

    #[test]
    fn field_rejects_bad_amplitude() {
        assert!(FieldState::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(FieldState::new(-1.0, 0.0, 0.0, 0.0).is_err());
        assert!(FieldState::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(FieldState::new(f64::INFINITY, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn amplitudes_round_trip() {
        let f = FieldState::new(1.7, 0.4, 0.9, 2.1).unwrap();
        let (x, y) = f.components();
        let g = FieldState::from_amplitudes(x, y).unwrap();
        assert_abs_diff_eq!(g.amplitude(), 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(g.beta(), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(g.delta(), 2.1, epsilon = 1e-12);
    }

    #[test]
    fn matrix_to_stokes_examples() {
        let m = HermitianAnalyzerMatrix::new(1.0, 1.0, 2.0, 0.0).unwrap();
        let p = matrix_to_stokes(&m);
        assert_eq!([p.p0, p.p1, p.p2, p.p3], [4.0, 0.0, 4.0, 0.0]);
        assert_abs_diff_eq!(p.two_alpha(), FRAC_PI_2, epsilon = 1e-15);

        let m = HermitianAnalyzerMatrix::new(2.0, 0.0, 0.0, 0.0).unwrap();
        let p = matrix_to_stokes(&m);
        assert_eq!([p.p0, p.p1, p.p2, p.p3], [2.0, 2.0, 0.0, 0.0]);

        let m = HermitianAnalyzerMatrix::new(3.0, 1.0, 2.0, 0.0).unwrap();
        let p = matrix_to_stokes(&m);
        assert_abs_diff_eq!(p.p0, 20f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.p1, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p2, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.p3, 0.0, epsilon = 1e-12);
        assert!(p.purity_defect() < 1e-12);
    }

    #[test]
    fn two_alpha_is_quadrant_correct() {
        // a < d: tan(2 alpha) alone would put 2 alpha in the wrong quadrant
        let m = HermitianAnalyzerMatrix::new(0.0, 2.0, 1.0, 0.0).unwrap();
        let p = matrix_to_stokes(&m);
        assert!(p.two_alpha() > FRAC_PI_2);
        assert!(p.p1 < 0.0);
        let back = StokesP::from_orientation(p.p0, p.two_alpha(), 0.0);
        assert_abs_diff_eq!(back.p1, p.p1, epsilon = 1e-12);
        assert_abs_diff_eq!(back.p2, p.p2, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_matrix_gives_zero_vector() {
        let m = HermitianAnalyzerMatrix::new(1.5, 1.5, 0.0, 0.7).unwrap();
        let p = matrix_to_stokes(&m);
        assert_eq!([p.p0, p.p1, p.p2, p.p3], [0.0; 4]);
        let s = StokesS::new(1.0, 1.0, 0.0, 0.0);
        assert!(matches!(
            eigenstate_residuals(&s, &p, Channel::Plus),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn matrix_rejects_negative_h() {
        assert!(HermitianAnalyzerMatrix::new(0.0, 0.0, -1.0, 0.0).is_err());
        assert!(HermitianAnalyzerMatrix::new(f64::NAN, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn eigenvalue_examples() {
        let e = eigenvalues(&HermitianAnalyzerMatrix::new(0.0, 0.0, 1.0, 1.234).unwrap());
        assert_eq!((e.lambda_plus, e.lambda_minus), (1.0, -1.0));
        let e = eigenvalues(&HermitianAnalyzerMatrix::new(2.0, 0.0, 0.0, 0.0).unwrap());
        assert_eq!((e.lambda_plus, e.lambda_minus), (2.0, 0.0));
        let e = eigenvalues(&HermitianAnalyzerMatrix::new(3.0, 1.0, 2.0, 0.0).unwrap());
        assert_abs_diff_eq!(e.lambda_plus, 2.0 + 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.lambda_minus, 2.0 - 5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn residual_examples() {
        let p = StokesP::new(2.0, 2.0, 0.0, 0.0);
        let r = eigenstate_residuals(&StokesS::new(1.0, 1.0, 0.0, 0.0), &p, Channel::Plus).unwrap();
        assert_eq!(r, [0.0; 3]);
        let r =
            eigenstate_residuals(&StokesS::new(1.0, -1.0, 0.0, 0.0), &p, Channel::Minus).unwrap();
        assert_eq!(r, [0.0; 3]);
        // wrong branch is detected
        let r =
            eigenstate_residuals(&StokesS::new(1.0, -1.0, 0.0, 0.0), &p, Channel::Plus).unwrap();
        assert!(r[0].abs() > 1.0);
    }

    #[test]
    fn residuals_reject_zero_intensity() {
        let p = StokesP::new(2.0, 2.0, 0.0, 0.0);
        let s = StokesS::new(0.0, 0.0, 0.0, 0.0);
        assert!(eigenstate_residuals(&s, &p, Channel::Plus).is_err());
    }

    #[test]
    fn rotation_examples() {
        let s = StokesS::new(1.0, 1.0, 0.0, 0.0);
        assert_stokes(
            rotate_stokes(&s, FRAC_PI_2, FieldKind::Vector),
            [1.0, -1.0, 0.0, 0.0],
        );
        for kind in [FieldKind::Spinor, FieldKind::Vector] {
            assert_eq!(rotate_stokes(&s, 0.0, kind), s);
        }
        assert_stokes(
            rotate_stokes(&s, FRAC_PI_8, FieldKind::Vector),
            [1.0, FRAC_PI_4.cos(), FRAC_PI_4.sin(), 0.0],
        );
        assert_stokes(
            rotate_stokes(&s, FRAC_PI_2, FieldKind::Spinor),
            [1.0, 0.0, 1.0, 0.0],
        );
    }

    #[test]
    fn tie_goes_to_plus() {
        assert_eq!(Channel::from_sign_of(0.0), Channel::Plus);
        assert_eq!(Channel::from_sign_of(-0.0), Channel::Plus);
        assert_eq!(Channel::from_sign_of(-1e-300), Channel::Minus);
    }
}
