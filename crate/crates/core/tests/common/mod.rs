#![allow(dead_code)]

use gausskey::gaussian::{beamsplitter_apply, CovMat};
use nalgebra::DMatrix;
use rand::Rng;

/// Random `n`-mode physical state built from thermal modes with the given
/// symplectic eigenvalues, local squeezers and rotations, and beam splitters.
pub fn random_state<R: Rng>(rng: &mut R, nus: &[f64]) -> CovMat {
    let n = nus.len();
    let mut diag = Vec::with_capacity(2 * n);
    for &nu in nus {
        diag.push(nu);
        diag.push(nu);
    }
    let mut v = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    for _layer in 0..2 {
        let mut s = DMatrix::identity(2 * n, 2 * n);
        for mode in 0..n {
            let r: f64 = rng.random_range(-1.0..1.0);
            let (a, b) = (
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            let rot = |t: f64| nalgebra::Matrix2::new(t.cos(), t.sin(), -t.sin(), t.cos());
            let sq = nalgebra::Matrix2::new(r.exp(), 0.0, 0.0, (-r).exp());
            let local = rot(a) * sq * rot(b);
            for i in 0..2 {
                for j in 0..2 {
                    s[(2 * mode + i, 2 * mode + j)] = local[(i, j)];
                }
            }
        }
        v = &s * v * s.transpose();
        v = (&v + v.transpose()) * 0.5;
        let mut cm = CovMat::new(v).unwrap();
        if n > 1 {
            for _ in 0..n {
                let a = rng.random_range(0..n);
                let b = (a + 1 + rng.random_range(0..n - 1)) % n;
                cm = beamsplitter_apply(&cm, a, b, rng.random_range(0.0..=1.0)).unwrap();
            }
        }
        v = cm.into_matrix();
    }
    CovMat::new(v).unwrap()
}

/// Random symplectic eigenvalues in `[1, 1 + spread]`.
pub fn random_nus<R: Rng>(rng: &mut R, n: usize, spread: f64) -> Vec<f64> {
    (0..n)
        .map(|_| 1.0 + rng.random_range(0.0..spread))
        .collect()
}

/// Closed-form two-mode spectrum: `ν±² = (Δ ± √(Δ² - 4 det V))/2` with
/// `Δ = det A + det B + 2 det C`.
pub fn two_mode_spectrum(v: &CovMat) -> (f64, f64) {
    let det2 = |b: nalgebra::Matrix2<f64>| b.determinant();
    let delta = det2(v.block(0, 0)) + det2(v.block(1, 1)) + 2.0 * det2(v.block(0, 1));
    let det = v.matrix().determinant();
    let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
    (((delta + disc) / 2.0).sqrt(), ((delta - disc) / 2.0).sqrt())
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
