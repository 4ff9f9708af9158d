//! The Stokes-form eigen algebra checked against an iterative complex
//! Hermitian eigen-solver that knows nothing about Stokes parameters.

use nalgebra::{Complex, Matrix2, SymmetricEigen};
use qpol_core::stokes::{
    eigenvalues, field_to_stokes, matrix_to_stokes, normalized_residuals, RESIDUAL_TOLERANCE,
};
use qpol_core::{Channel, FieldState, HermitianAnalyzerMatrix, RandomStream, StreamLabel, Wing};

struct OracleEigen {
    /// (eigenvalue, eigenvector components) sorted descending
    pairs: [(f64, Complex<f64>, Complex<f64>); 2],
}

fn oracle(m: &HermitianAnalyzerMatrix) -> OracleEigen {
    let e = m.entries();
    let h = Matrix2::new(e[0][0], e[0][1], e[1][0], e[1][1]);
    let eig = SymmetricEigen::new(h);
    let mut pairs = [0, 1].map(|i| {
        let v = eig.eigenvectors.column(i);
        (eig.eigenvalues[i], v[0], v[1])
    });
    if pairs[0].0 < pairs[1].0 {
        pairs.swap(0, 1);
    }
    OracleEigen { pairs }
}

fn random_matrix(rng: &mut RandomStream) -> HermitianAnalyzerMatrix {
    let a = 20.0 * rng.unit() - 10.0;
    let d = 20.0 * rng.unit() - 10.0;
    let h = 10.0 * rng.unit();
    let phi = std::f64::consts::TAU * rng.unit();
    HermitianAnalyzerMatrix::new(a, d, h, phi).unwrap()
}

fn rel_diff(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn worked_example_matches_oracle() {
    let m = HermitianAnalyzerMatrix::new(3.0, 1.0, 2.0, 0.0).unwrap();
    let o = oracle(&m);
    let ours = eigenvalues(&m);
    assert!((o.pairs[0].0 - (2.0 + 5f64.sqrt())).abs() < 1e-12);
    assert!((o.pairs[1].0 - (2.0 - 5f64.sqrt())).abs() < 1e-12);
    assert!((ours.lambda_plus - o.pairs[0].0).abs() < 1e-12);
    assert!((ours.lambda_minus - o.pairs[1].0).abs() < 1e-12);

    let p = matrix_to_stokes(&m);
    for (&(_, x, y), branch) in o.pairs.iter().zip([Channel::Plus, Channel::Minus]) {
        let s = field_to_stokes(&FieldState::from_amplitudes(x, y).unwrap());
        let r = normalized_residuals(&s, &p, branch).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-12), "{r:?}");
    }
}

#[test]
fn spectral_gap_identity_on_random_matrices() {
    let mut rng = RandomStream::new(2024, StreamLabel::new(0, 0, Wing::Source));
    for _ in 0..10_000 {
        let m = random_matrix(&mut rng);
        let e = eigenvalues(&m);
        let p = matrix_to_stokes(&m);
        assert!(e.lambda_plus >= e.lambda_minus);
        assert!(rel_diff(e.gap(), p.p0) <= 1e-12, "{m:?}");
        assert!(p.purity_defect() <= 1e-12);
        let o = oracle(&m);
        let scale = m.a.abs().max(m.d.abs()).max(m.h).max(1.0);
        assert!((e.lambda_plus - o.pairs[0].0).abs() <= 1e-12 * scale);
        assert!((e.lambda_minus - o.pairs[1].0).abs() <= 1e-12 * scale);
    }
}

#[test]
fn eigenvectors_satisfy_eigenstate_relations() {
    let mut rng = RandomStream::new(7, StreamLabel::new(1, 0, Wing::Source));
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 10_000 {
        let m = random_matrix(&mut rng);
        let p = matrix_to_stokes(&m);
        if p.p0 <= 1e-9 {
            continue;
        }
        let o = oracle(&m);
        for (&(_, x, y), branch) in o.pairs.iter().zip([Channel::Plus, Channel::Minus]) {
            let f = FieldState::from_amplitudes(x, y).unwrap();
            let s = field_to_stokes(&f);
            assert!(s.purity_defect() <= 1e-12);
            let r = normalized_residuals(&s, &p, branch).unwrap();
            let max = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            worst = worst.max(max);
            // the opposite branch must not fit
            let wrong = match branch {
                Channel::Plus => Channel::Minus,
                Channel::Minus => Channel::Plus,
            };
            let rw = normalized_residuals(&s, &p, wrong).unwrap();
            assert!(rw[0].abs() > 1.0);
        }
        checked += 1;
    }
    assert!(worst <= RESIDUAL_TOLERANCE, "worst residual {worst}");
}
