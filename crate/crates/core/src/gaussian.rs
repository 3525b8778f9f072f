//! Gaussian-state linear algebra in shot-noise units.
//!
//! Covariance matrices use the interleaved mode ordering `(q1, p1, ..., qn, pn)`
//! and the vacuum has unit quadrature variance. Everything here is a pure
//! function of its inputs.

use std::fmt;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on symplectic eigenvalues below the vacuum level.
pub const EPS_PHYS: f64 = 1e-9;

/// Relative tolerance on the symmetry of covariance matrices.
const SYMMETRY_TOL: f64 = 1e-12;

/// Relative tolerance on the pairing of the singular values of `V^½ Ω V^½`.
const PAIRING_TOL: f64 = 1e-9;

/// Smallest quadrature variance a homodyne measurement may condition on.
const MIN_HOMODYNE_VARIANCE: f64 = 1e-12;

/// Covariance matrix of an n-mode zero-mean Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMat {
    entries: DMatrix<f64>,
}

impl CovMat {
    /// Wraps a `2n x 2n` matrix, checking shape and symmetry.
    ///
    /// Symmetry is tested relative to the largest entry, so matrices built
    /// at large modulation are not rejected for last-bit asymmetries.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(Error::Domain(format!(
                "covariance matrix must be 2n x 2n, got {rows} x {cols}"
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(
                "covariance matrix has non-finite entries".into(),
            ));
        }
        let asym = max_asymmetry(&entries);
        let scale = entries.amax().max(1.0);
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { entries })
    }

    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::Domain(format!(
                "expected {} entries, got {}",
                dim * dim,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    /// Product of `n_modes` vacua.
    pub fn identity(n_modes: usize) -> Self {
        Self {
            entries: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    /// Product of thermal states with quadrature variance `variance`.
    pub fn thermal(n_modes: usize, variance: f64) -> Self {
        Self {
            entries: DMatrix::identity(2 * n_modes, 2 * n_modes) * variance,
        }
    }

    /// Symmetrizes `(M + Mᵀ)/2` before wrapping; used after congruences.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Result<Self> {
        let sym = (&m + m.transpose()) * 0.5;
        Self::new(sym)
    }

    pub fn n_modes(&self) -> usize {
        self.entries.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    /// The 2x2 block coupling `mode_i` and `mode_j`.
    pub fn block(&self, mode_i: usize, mode_j: usize) -> Matrix2<f64> {
        self.entries
            .fixed_view::<2, 2>(2 * mode_i, 2 * mode_j)
            .into_owned()
    }

    /// Covariance matrix of the uncorrelated joint state `self ⊗ other`.
    pub fn direct_sum(&self, other: &CovMat) -> CovMat {
        let (a, b) = (self.dim(), other.dim());
        let mut m = DMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.entries);
        m.view_mut((a, a), (b, b)).copy_from(&other.entries);
        CovMat { entries: m }
    }

    /// Reduced state on `modes`, in the given order.
    ///
    /// Dropping a mode is the partial trace; repeating the full index set in
    /// another order is a mode permutation.
    pub fn select_modes(&self, modes: &[usize]) -> Result<CovMat> {
        let n = self.n_modes();
        if modes.is_empty() {
            return Err(Error::Domain("mode selection is empty".into()));
        }
        for (i, &m) in modes.iter().enumerate() {
            if m >= n {
                return Err(Error::InvalidMode {
                    index: m,
                    n_modes: n,
                });
            }
            if modes[..i].contains(&m) {
                return Err(Error::IdenticalModes(m));
            }
        }
        let idx = quadrature_indices(modes);
        let k = idx.len();
        let m = DMatrix::from_fn(k, k, |r, c| self.entries[(idx[r], idx[c])]);
        Ok(CovMat { entries: m })
    }

    pub fn max_asymmetry(&self) -> f64 {
        max_asymmetry(&self.entries)
    }
}

impl fmt::Display for CovMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.entries)
    }
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

fn check_mode(v: &CovMat, mode: usize) -> Result<()> {
    if mode >= v.n_modes() {
        return Err(Error::InvalidMode {
            index: mode,
            n_modes: v.n_modes(),
        });
    }
    Ok(())
}

/// Symplectic form `Ω = ω ⊕ ... ⊕ ω` with `ω = [[0, 1], [-1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    n_modes: usize,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = 2 * self.n_modes;
        let mut m = DMatrix::zeros(d, d);
        for k in 0..self.n_modes {
            m[(2 * k, 2 * k + 1)] = 1.0;
            m[(2 * k + 1, 2 * k)] = -1.0;
        }
        m
    }
}

/// Symplectic eigenvalues, sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.last().copied().unwrap_or(f64::NAN)
    }

    /// Von Neumann entropy `Σ h(ν)` in bits.
    pub fn entropy(&self) -> Result<f64> {
        self.0.iter().map(|&x| entropy_h(x)).sum()
    }
}

/// Two-mode squeezed vacuum with local variance `mu`.
pub fn tmsv_cm(mu: f64) -> Result<CovMat> {
    if !mu.is_finite() || mu < 1.0 {
        return Err(Error::Domain(format!(
            "TMSV variance must be >= 1, got {mu}"
        )));
    }
    let c = (mu * mu - 1.0).sqrt();
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        mu,  0.0, c,   0.0,
        0.0, mu,  0.0, -c,
        c,   0.0, mu,  0.0,
        0.0, -c,  0.0, mu,
    ]);
    CovMat::new(m)
}

/// Symplectic spectrum of `v`.
///
/// The eigenvalues are the singular values of the antisymmetric matrix
/// `K = V^½ Ω V^½`, each of which appears twice. Only symmetric
/// decompositions are involved, which keeps the small eigenvalues accurate
/// when the matrix also carries entries of order 1e6.
pub fn symplectic_spectrum(v: &CovMat) -> Result<Spectrum> {
    let eig = SymmetricEigen::new(v.matrix().clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let sqrt_vals = eig.eigenvalues.map(f64::sqrt);
    let root =
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let omega = SymplecticForm::new(v.n_modes()).matrix();
    let k = &root * omega * &root;
    let k = (&k - k.transpose()) * 0.5;

    let mut sv: Vec<f64> = k.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let scale = sv.first().copied().unwrap_or(1.0).max(1.0);
    let mut nus = Vec::with_capacity(v.n_modes());
    for pair in sv.chunks(2) {
        let residual = (pair[0] - pair[1]).abs();
        if residual > PAIRING_TOL * scale {
            return Err(Error::NumericalDegeneracy(residual));
        }
        nus.push(0.5 * (pair[0] + pair[1]));
    }
    Ok(Spectrum::new(nus))
}

/// Entropy function `h(x)` of a thermal mode with symplectic eigenvalue `x`, in bits.
///
/// Inputs in `[1 - EPS_PHYS, 1]` are clamped to the pure-state value 0.
pub fn entropy_h(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("entropy of NaN".into()));
    }
    if x < 1.0 - EPS_PHYS {
        return Err(Error::UnphysicalEigenvalue(x));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let a = 0.5 * (x + 1.0);
    let b = 0.5 * (x - 1.0);
    if b < 1.0 {
        Ok(a * a.log2() - b * b.log2())
    } else {
        // a log a - b log b with a - b = 1, free of the large cancellation
        Ok(b.log2() + a * (1.0 / b).ln_1p() / std::f64::consts::LN_2)
    }
}

/// Large-argument form `log2((e/2) x)` of [`entropy_h`].
pub fn entropy_h_asymptotic(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "asymptotic entropy needs x > 0, got {x}"
        )));
    }
    Ok((0.5 * std::f64::consts::E * x).log2())
}

/// Von Neumann entropy of a Gaussian state, in bits.
pub fn von_neumann_entropy(v: &CovMat) -> Result<f64> {
    symplectic_spectrum(v)?.entropy()
}

/// Mixes `mode_a` and `mode_b` on a beam splitter of transmissivity `tau`.
///
/// The transmitted output `√τ a + √(1-τ) b` replaces `mode_a`; the
/// reflected output `-√(1-τ) a + √τ b` replaces `mode_b`.
pub fn beamsplitter_apply(v: &CovMat, mode_a: usize, mode_b: usize, tau: f64) -> Result<CovMat> {
    check_mode(v, mode_a)?;
    check_mode(v, mode_b)?;
    if mode_a == mode_b {
        return Err(Error::IdenticalModes(mode_a));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!(
            "beam-splitter transmissivity must lie in [0, 1], got {tau}"
        )));
    }
    let t = tau.sqrt();
    let r = (1.0 - tau).sqrt();
    let mut s = DMatrix::identity(v.dim(), v.dim());
    for k in 0..2 {
        let (ia, ib) = (2 * mode_a + k, 2 * mode_b + k);
        s[(ia, ia)] = t;
        s[(ia, ib)] = r;
        s[(ib, ia)] = -r;
        s[(ib, ib)] = t;
    }
    let out = &s * v.matrix() * s.transpose();
    CovMat::symmetrized(out)
}

/// Splits `v` into retained block `A`, cross block `B` and measured block `C`.
fn partition(v: &CovMat, mode: usize) -> Result<(DMatrix<f64>, DMatrix<f64>, Matrix2<f64>)> {
    check_mode(v, mode)?;
    if v.n_modes() < 2 {
        return Err(Error::Domain(
            "conditioning needs at least one retained mode".into(),
        ));
    }
    let keep: Vec<usize> = (0..v.n_modes()).filter(|&m| m != mode).collect();
    let idx = quadrature_indices(&keep);
    let k = idx.len();
    let m = v.matrix();
    let a = DMatrix::from_fn(k, k, |r, c| m[(idx[r], idx[c])]);
    let b = DMatrix::from_fn(k, 2, |r, c| m[(idx[r], 2 * mode + c)]);
    Ok((a, b, v.block(mode, mode)))
}

/// Conditional covariance matrix after heterodyning `mode`.
///
/// `A - B (C + I)⁻¹ Bᵀ`; independent of the measurement outcome.
pub fn heterodyne_condition(v: &CovMat, mode: usize) -> Result<CovMat> {
    let (a, b, c) = partition(v, mode)?;
    let inv = (c + Matrix2::identity())
        .try_inverse()
        .ok_or_else(|| Error::SingularMeasurement("C + I is not invertible".into()))?;
    let inv = DMatrix::from_column_slice(2, 2, inv.as_slice());
    CovMat::symmetrized(&a - &b * inv * b.transpose())
}

/// Quadrature measured by a homodyne detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Q,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::Q => 0,
            Quadrature::P => 1,
        }
    }
}

/// Conditional covariance matrix after homodyning one quadrature of `mode`.
///
/// `A - B (Π C Π)⁺ Bᵀ`; the pseudo-inverse of the rank-one `Π C Π` is
/// `1/C_xx` on the measured entry.
pub fn homodyne_condition(v: &CovMat, mode: usize, quadrature: Quadrature) -> Result<CovMat> {
    let (a, b, c) = partition(v, mode)?;
    let j = quadrature.offset();
    let var = c[(j, j)];
    if var < MIN_HOMODYNE_VARIANCE {
        return Err(Error::DegenerateMeasurement(var));
    }
    let col = b.column(j).into_owned();
    CovMat::symmetrized(&a - &col * col.transpose() / var)
}

/// Whether `v` satisfies the uncertainty principle `V + iΩ ≥ 0`.
pub fn is_physical(v: &CovMat) -> bool {
    match symplectic_spectrum(v) {
        Ok(s) => s.values().iter().all(|&x| x >= 1.0 - EPS_PHYS),
        Err(_) => false,
    }
}
