//! Two-mode entangling-cloner attack: ancilla covariance matrix, the
//! physical region of correlations `(g, g')`, its boundary and scan grids.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::CovMat;

/// Equality tolerance on the uncertainty constraint.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// The uncertainty-principle constraints on `(ω, g, g')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `|g| < ω`
    QCorrelation,
    /// `|g'| < ω`
    PCorrelation,
    /// `ω|g + g'| ≤ ω² + g g' - 1`
    Uncertainty,
}

impl Constraint {
    pub fn index(self) -> usize {
        match self {
            Constraint::QCorrelation => 1,
            Constraint::PCorrelation => 2,
            Constraint::Uncertainty => 3,
        }
    }

    pub fn expression(self) -> &'static str {
        match self {
            Constraint::QCorrelation => "|g| < omega",
            Constraint::PCorrelation => "|g'| < omega",
            Constraint::Uncertainty => "omega*|g+g'| <= omega^2 + g*g' - 1",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "constraint {} violated: {}",
            self.index(),
            self.expression()
        )
    }
}

/// A point of the attack: channel transmissivity, ancilla thermal noise and
/// the q/p correlations between the two ancillas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub tau: f64,
    pub omega: f64,
    pub g: f64,
    pub g_prime: f64,
}

impl AttackParams {
    /// Validates `τ ∈ (0, 1]` and `ω ≥ 1`. Physicality of `(g, g')` is
    /// checked separately by [`AttackParams::ensure_physical`].
    pub fn new(tau: f64, omega: f64, g: f64, g_prime: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Domain(format!(
                "transmissivity must lie in (0, 1], got {tau}"
            )));
        }
        if !(omega >= 1.0) || !omega.is_finite() {
            return Err(Error::Domain(format!(
                "thermal noise must be >= 1, got {omega}"
            )));
        }
        if !g.is_finite() || !g_prime.is_finite() {
            return Err(Error::Domain("correlations must be finite".into()));
        }
        Ok(Self {
            tau,
            omega,
            g,
            g_prime,
        })
    }

    /// Single-mode (uncorrelated) attack.
    pub fn collective(tau: f64, omega: f64) -> Result<Self> {
        Self::new(tau, omega, 0.0, 0.0)
    }

    pub fn with_correlations(&self, g: f64, g_prime: f64) -> Self {
        Self {
            g,
            g_prime,
            ..*self
        }
    }

    /// Mean thermal photon number `n̄` with `ω = 2n̄ + 1`.
    pub fn mean_photons(&self) -> f64 {
        0.5 * (self.omega - 1.0)
    }

    pub fn violated_constraint(&self) -> Option<Constraint> {
        violated_constraint(self.omega, self.g, self.g_prime, false)
    }

    pub fn ensure_physical(&self) -> Result<()> {
        match self.violated_constraint() {
            None => Ok(()),
            Some(c) => Err(Error::Unphysical(c)),
        }
    }

    pub fn cm(&self) -> CovMat {
        attack_cm(self.omega, self.g, self.g_prime)
    }
}

/// Ancilla covariance matrix `[[ωI, G], [G, ωI]]` with `G = diag(g, g')`.
pub fn attack_cm(omega: f64, g: f64, g_prime: f64) -> CovMat {
    let w = omega;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        w,   0.0, g,   0.0,
        0.0, w,   0.0, g_prime,
        g,   0.0, w,   0.0,
        0.0, g_prime, 0.0, w,
    ]);
    CovMat::new(m).expect("attack CM is symmetric by construction")
}

/// Signed slack of the uncertainty constraint, `ω|g+g'| - (ω² + gg' - 1)`.
/// Non-positive inside the region, zero on its boundary.
pub fn uncertainty_residual(omega: f64, g: f64, g_prime: f64) -> f64 {
    omega * (g + g_prime).abs() - (omega * omega + g * g_prime - 1.0)
}

fn violated_constraint(omega: f64, g: f64, g_prime: f64, strict: bool) -> Option<Constraint> {
    if g.abs() >= omega {
        return Some(Constraint::QCorrelation);
    }
    if g_prime.abs() >= omega {
        return Some(Constraint::PCorrelation);
    }
    let r = uncertainty_residual(omega, g, g_prime);
    let ok = if strict { r < 0.0 } else { r <= BOUNDARY_TOL };
    (!ok).then_some(Constraint::Uncertainty)
}

/// Whether `params` lies in the physical region (closed with tolerance when
/// `strict` is false, open when `strict` is true).
pub fn check_constraints(params: &AttackParams, strict: bool) -> Result<bool> {
    if !(params.omega >= 1.0) {
        return Err(Error::Domain(format!(
            "thermal noise must be >= 1, got {}",
            params.omega
        )));
    }
    Ok(violated_constraint(params.omega, params.g, params.g_prime, strict).is_none())
}

/// Sampled boundary `ω|g+g'| = ω² + gg' - 1` of the physical region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub omega: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Samples both branches of the boundary.
///
/// On the branch `s(g+g') ≥ 0`, `s = ±1`, the boundary is
/// `g' = (ω² - 1 - sωg)/(sω - g)`, valid for `|g| ≤ √(ω² - 1)`; the two
/// branches meet at `g = -g' = ±√(ω² - 1)`. Each branch gets `n_samples`
/// uniformly spaced values of `g` over that interval. The samples run along
/// the upper branch with increasing `g`, then back along the lower one.
pub fn boundary_curve(omega: f64, n_samples: usize) -> Result<BoundaryCurve> {
    if !(omega > 1.0) || !omega.is_finite() {
        return Err(Error::EmptyRegion(omega));
    }
    if n_samples < 2 {
        return Err(Error::Domain(format!(
            "boundary needs at least 2 samples per branch, got {n_samples}"
        )));
    }
    let reach = (omega * omega - 1.0).sqrt();
    let last = (n_samples - 1) as f64;
    let grid: Vec<f64> = (0..n_samples)
        .map(|i| reach * (2.0 * i as f64 - last) / last)
        .collect();

    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(2 * n_samples);
    for sign in [1.0, -1.0] {
        let branch = grid.iter().map(|&g| {
            let gp = (omega * omega - 1.0 - sign * omega * g) / (sign * omega - g);
            (g, gp)
        });
        let branch: Vec<_> = if sign > 0.0 {
            branch.collect()
        } else {
            branch.rev().collect()
        };
        for (g, gp) in branch {
            if gp.abs() >= omega || uncertainty_residual(omega, g, gp).abs() > BOUNDARY_TOL {
                continue;
            }
            let dup = samples
                .iter()
                .any(|&(a, b)| (a - g).abs() < 1e-12 && (b - gp).abs() < 1e-12);
            if !dup {
                samples.push((g, gp));
            }
        }
    }
    Ok(BoundaryCurve { omega, samples })
}

/// Uniform `resolution x resolution` grid over the open square `(-ω, ω)²`,
/// keeping physical points, sorted by `g` then `g'`. Always contains the origin.
pub fn physical_grid(omega: f64, resolution: usize) -> Vec<(f64, f64)> {
    let axis = open_axis(omega, resolution);
    let mut points = Vec::new();
    let mut has_origin = false;
    for &g in &axis {
        for &gp in &axis {
            if violated_constraint(omega, g, gp, false).is_none() {
                has_origin |= g == 0.0 && gp == 0.0;
                points.push((g, gp));
            }
        }
    }
    if !has_origin {
        points.push((0.0, 0.0));
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    points
}

/// `resolution` interior points of `(-ω, ω)`, symmetric about zero; the
/// middle point is exactly 0 for odd `resolution`.
fn open_axis(omega: f64, resolution: usize) -> Vec<f64> {
    let n = resolution.max(2);
    let denom = (n + 1) as f64;
    (0..n)
        .map(|i| omega * (2.0 * (i + 1) as f64 - denom) / denom)
        .collect()
}
