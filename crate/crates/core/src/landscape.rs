//! Critical-point and minimality analysis of the key rate over the `(g, g')`
//! plane.
//!
//! All closed-form derivatives here are with respect to the bits-per-use
//! rates of [`crate::rates`].

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::attack::{boundary_curve, physical_grid, uncertainty_residual, AttackParams};
use crate::error::{Error, Result};
use crate::rates::{key_rate, log_ratio, Protocol, LN2_SQ};

/// Relative gradient step, scaled by `max(1, ω)`.
pub const GRADIENT_STEP: f64 = 1e-5;
/// Hessian step per unit of `(ω² - 1)/ω`.
pub const HESSIAN_STEP: f64 = 5e-4;
/// A nonzero point must exceed the origin rate by at least this much.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Nonzero points closer than this to the origin rate are reported for review.
pub const NEAR_TIE: f64 = 1e-9;

/// `ln((1+x)/(1-x))` on `(0, 1)`.
pub fn f_log(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("f is defined on (0, 1), got {x}")));
    }
    Ok(log_ratio(x))
}

/// Rate as a function of `(g, g')` at fixed `τ`, `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSurface {
    pub protocol: Protocol,
    pub tau: f64,
    pub omega: f64,
}

impl RateSurface {
    pub fn new(protocol: Protocol, tau: f64, omega: f64) -> Result<Self> {
        AttackParams::collective(tau, omega)?;
        if tau >= 1.0 {
            return Err(Error::BoundaryTransmissivity(tau));
        }
        Ok(Self {
            protocol,
            tau,
            omega,
        })
    }

    pub fn params(&self, g: f64, g_prime: f64) -> Result<AttackParams> {
        AttackParams::new(self.tau, self.omega, g, g_prime)
    }

    pub fn rate(&self, g: f64, g_prime: f64) -> Result<f64> {
        key_rate(&self.params(g, g_prime)?, self.protocol)
    }
}

pub fn default_gradient_step(omega: f64) -> f64 {
    GRADIENT_STEP * omega.max(1.0)
}

/// Second differences are taken on the length scale of the physical region,
/// `(ω² - 1)/ω`: about `2e-4` near `ω = 1.2`, `1e-6` at `ω = 1.001`, `2.5e-2`
/// at `ω = 50`. A fixed step either truncates near `ω = 1` or drowns in
/// rounding at large `ω`.
pub fn default_hessian_step(omega: f64) -> f64 {
    HESSIAN_STEP * (omega * omega - 1.0) / omega
}

/// Whether every point of the square `[g ± reach] x [g' ± reach]` lies
/// strictly inside the physical region. The region is convex, so the corners
/// suffice.
fn square_inside(omega: f64, g: f64, g_prime: f64, reach: f64) -> bool {
    [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
        .iter()
        .all(|&(sa, sb)| {
            let (a, b) = (g + sa * reach, g_prime + sb * reach);
            a.abs() < omega && b.abs() < omega && uncertainty_residual(omega, a, b) < 0.0
        })
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    Ok(())
}

/// Central-difference gradient of `rate_fn` at `(g, g')`.
///
/// The stencil must stay more than `2·step` from the boundary of the region
/// at thermal noise `omega`.
pub fn finite_diff_gradient<F>(
    rate_fn: F,
    omega: f64,
    g: f64,
    g_prime: f64,
    step: Option<f64>,
) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let h = step.unwrap_or_else(|| default_gradient_step(omega));
    check_step(h)?;
    if !square_inside(omega, g, g_prime, 2.0 * h) {
        return Err(Error::StencilOutsideRegion { g, g_prime });
    }
    let dg = (rate_fn(g + h, g_prime)? - rate_fn(g - h, g_prime)?) / (2.0 * h);
    let dgp = (rate_fn(g, g_prime + h)? - rate_fn(g, g_prime - h)?) / (2.0 * h);
    Ok((dg, dgp))
}

/// Central second differences at `(g, g')`, as `[[∂²_g, ∂_g∂_g'], [∂_g'∂_g, ∂²_g']]`.
pub fn finite_diff_hessian<F>(
    rate_fn: F,
    omega: f64,
    g: f64,
    g_prime: f64,
    step: f64,
) -> Result<[[f64; 2]; 2]>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    check_step(step)?;
    if !square_inside(omega, g, g_prime, 2.0 * step) {
        return Err(Error::StencilOutsideRegion { g, g_prime });
    }
    let h = step;
    let at = |dx: f64, dy: f64| rate_fn(g + dx * h, g_prime + dy * h);
    let centre = at(0.0, 0.0)?;
    let gg = (at(1.0, 0.0)? - 2.0 * centre + at(-1.0, 0.0)?) / (h * h);
    let pp = (at(0.0, 1.0)? - 2.0 * centre + at(0.0, -1.0)?) / (h * h);
    let cross = (at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?) / (4.0 * h * h);
    Ok([[gg, cross], [cross, pp]])
}

fn require_open_region(omega: f64) -> Result<()> {
    if !(omega > 1.0) || !omega.is_finite() {
        return Err(Error::EmptyRegion(omega));
    }
    Ok(())
}

/// Finite-difference Hessian of the rate at the origin.
pub fn hessian_at_origin(surface: &RateSurface, step: Option<f64>) -> Result<[[f64; 2]; 2]> {
    require_open_region(surface.omega)?;
    let h = step.unwrap_or_else(|| default_hessian_step(surface.omega));
    finite_diff_hessian(|g, gp| surface.rate(g, gp), surface.omega, 0.0, 0.0, h)
}

/// Closed-form gradient of the same-quadrature switching rate:
///
/// `∂_g R̃ = [-g/(4(ω²-g²)) - f(1/ν+)ν+/(8(ω+g)) + f(1/ν-)ν-/(8(ω-g))] / ln2`,
/// and the same with `g'` for `∂_g' R̃`.
pub fn analytic_gradient_switching(p: &AttackParams) -> Result<(f64, f64)> {
    p.ensure_physical()?;
    let AttackParams {
        omega, g, g_prime, ..
    } = *p;
    let plus = ((omega + g) * (omega + g_prime)).sqrt();
    let minus = ((omega - g) * (omega - g_prime)).sqrt();
    if !(minus > 1.0 && plus > 1.0) {
        return Err(Error::Domain(format!(
            "gradient undefined on the boundary (nu- = {minus}, nu+ = {plus})"
        )));
    }
    let (fp, fm) = (log_ratio(1.0 / plus), log_ratio(1.0 / minus));
    let d = |c: f64| {
        (-c / (4.0 * (omega * omega - c * c)) - fp * plus / (8.0 * (omega + c))
            + fm * minus / (8.0 * (omega - c)))
            / LN_2
    };
    Ok((d(g), d(g_prime)))
}

/// `[[a, b], [b, a]]`
fn symmetric(a: f64, b: f64) -> [[f64; 2]; 2] {
    [[a, b], [b, a]]
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Hessian of the same-quadrature switching rate at the origin; independent of `τ`.
///
/// `∂²_g R̃ = [1/(4ω²(ω²-1)) + f(1/ω)/(8ω)] / ln2`,
/// `∂_g∂_g' R̃ = [1/(4(ω²-1)) - f(1/ω)/(8ω)] / ln2`.
pub fn analytic_hessian_switching(omega: f64) -> Result<[[f64; 2]; 2]> {
    require_open_region(omega)?;
    let w2 = omega * omega;
    let f = log_ratio(1.0 / omega);
    Ok(symmetric(
        (1.0 / (4.0 * w2 * (w2 - 1.0)) + f / (8.0 * omega)) / LN_2,
        (1.0 / (4.0 * (w2 - 1.0)) - f / (8.0 * omega)) / LN_2,
    ))
}

/// `det H = (ω²+1)(ω f(1/ω) - 1) / (16 ln²2 ω⁴ (ω²-1))`, positive because
/// `f(1/ω) > 1/ω`.
pub fn analytic_det_h_switching(omega: f64) -> Result<f64> {
    require_open_region(omega)?;
    let w2 = omega * omega;
    let f = log_ratio(1.0 / omega);
    Ok((w2 + 1.0) * (omega * f - 1.0) / (16.0 * LN2_SQ * w2 * w2 * (w2 - 1.0)))
}

/// Hessian of the mixed-quadrature rate at the origin.
pub fn analytic_hessian_switching_mixed(omega: f64) -> Result<[[f64; 2]; 2]> {
    require_open_region(omega)?;
    let w2 = omega * omega;
    let f = log_ratio(1.0 / omega);
    Ok(symmetric(
        (1.0 / (4.0 * (w2 - 1.0)) + f / (8.0 * omega)) / LN_2,
        (1.0 / (4.0 * (w2 - 1.0)) - f / (8.0 * omega)) / LN_2,
    ))
}

fn check_tau(tau: f64, allow_one: bool) -> Result<()> {
    let ok = tau > 0.0 && (tau < 1.0 || (allow_one && tau == 1.0));
    if !ok {
        return Err(Error::BoundaryTransmissivity(tau));
    }
    Ok(())
}

/// `(X, Y)` with `∂²_g R = (X + Y)/(2 ln2)` and `∂_g∂_g' R = (X - Y)/(2 ln2)`
/// for the no-switching rate at the origin:
/// `X = 1/((τ+λ̄)(ω²-1))`, `Y = f(1/ω)/(4ω) - (1-τ)² f(τ/λ̄)/(4τλ̄)`.
fn noswitching_curvature_terms(tau: f64, omega: f64) -> (f64, f64) {
    let lambda_bar = 1.0 + omega * (1.0 - tau);
    let x = 1.0 / ((tau + lambda_bar) * (omega * omega - 1.0));
    let mut y = log_ratio(1.0 / omega) / (4.0 * omega);
    if tau < 1.0 {
        y -= (1.0 - tau).powi(2) * log_ratio(tau / lambda_bar) / (4.0 * tau * lambda_bar);
    }
    (x, y)
}

/// Hessian of the no-switching rate at the origin.
pub fn analytic_hessian_noswitching(tau: f64, omega: f64) -> Result<[[f64; 2]; 2]> {
    check_tau(tau, false)?;
    require_open_region(omega)?;
    let (x, y) = noswitching_curvature_terms(tau, omega);
    Ok(symmetric((x + y) / (2.0 * LN_2), (x - y) / (2.0 * LN_2)))
}

/// Numerator terms `(D₁, D₂)` of the no-switching determinant:
/// `D₁ = τλ̄ f(1/ω)`, `D₂ = ω(1-τ)² f(τ/λ̄)`.
pub fn det_terms_noswitching(tau: f64, omega: f64) -> Result<(f64, f64)> {
    check_tau(tau, true)?;
    require_open_region(omega)?;
    let lambda_bar = 1.0 + omega * (1.0 - tau);
    let d2 = if tau < 1.0 {
        omega * (1.0 - tau).powi(2) * log_ratio(tau / lambda_bar)
    } else {
        0.0
    };
    Ok((tau * lambda_bar * log_ratio(1.0 / omega), d2))
}

/// `det H = (D₁ - D₂) / (4 ln²2 τ(λ̄+τ)λ̄ω(ω²-1))` at the origin.
pub fn analytic_det_h_noswitching(tau: f64, omega: f64) -> Result<f64> {
    check_tau(tau, false)?;
    let (d1, d2) = det_terms_noswitching(tau, omega)?;
    let lambda_bar = 1.0 + omega * (1.0 - tau);
    Ok((d1 - d2)
        / (4.0 * LN2_SQ * tau * (lambda_bar + tau) * lambda_bar * omega * (omega * omega - 1.0)))
}

/// Closed-form `∂²_g R` of the no-switching rate at the origin.
pub fn second_derivative_noswitching(tau: f64, omega: f64) -> Result<f64> {
    check_tau(tau, true)?;
    require_open_region(omega)?;
    let (x, y) = noswitching_curvature_terms(tau, omega);
    Ok((x + y) / (2.0 * LN_2))
}

/// Checks `2 ln2 ∂²_g R = X + Y > X = 1/((τ+λ̄)(ω²-1)) > 0`.
pub fn second_derivative_inequality_noswitching(tau: f64, omega: f64) -> Result<bool> {
    check_tau(tau, true)?;
    require_open_region(omega)?;
    let (x, y) = noswitching_curvature_terms(tau, omega);
    Ok(x + y > x && x > 0.0)
}

pub fn analytic_hessian(protocol: Protocol, tau: f64, omega: f64) -> Result<[[f64; 2]; 2]> {
    match protocol {
        Protocol::NoSwitching => analytic_hessian_noswitching(tau, omega),
        Protocol::Switching => analytic_hessian_switching(omega),
        Protocol::SwitchingMixed => analytic_hessian_switching_mixed(omega),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepOverrides {
    pub gradient: Option<f64>,
    pub hessian: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPointReport {
    pub protocol: Protocol,
    pub tau: f64,
    pub omega: f64,
    pub gradient_at_origin: (f64, f64),
    /// Present for the switching protocol only.
    pub analytic_gradient_at_origin: Option<(f64, f64)>,
    pub hessian_at_origin: [[f64; 2]; 2],
    pub analytic_hessian: [[f64; 2]; 2],
    pub det_h: f64,
    pub analytic_det_h: f64,
    /// `|det_h - analytic_det_h| / |analytic_det_h|`
    pub det_residual: f64,
    pub gradient_step: f64,
    pub hessian_step: f64,
    pub is_minimum: bool,
}

/// Gradient and Hessian at the origin, numeric next to closed form.
pub fn critical_point(surface: &RateSurface, steps: StepOverrides) -> Result<CriticalPointReport> {
    require_open_region(surface.omega)?;
    let gradient_step = steps
        .gradient
        .unwrap_or_else(|| default_gradient_step(surface.omega));
    let hessian_step = steps
        .hessian
        .unwrap_or_else(|| default_hessian_step(surface.omega));
    let rate = |g: f64, gp: f64| surface.rate(g, gp);
    let gradient_at_origin =
        finite_diff_gradient(rate, surface.omega, 0.0, 0.0, Some(gradient_step))?;
    let hessian = hessian_at_origin(surface, Some(hessian_step))?;
    let analytic = analytic_hessian(surface.protocol, surface.tau, surface.omega)?;
    let analytic_gradient_at_origin = match surface.protocol {
        Protocol::Switching => Some(analytic_gradient_switching(&surface.params(0.0, 0.0)?)?),
        _ => None,
    };
    let det_h = det2(&hessian);
    let analytic_det_h = match surface.protocol {
        Protocol::NoSwitching => analytic_det_h_noswitching(surface.tau, surface.omega)?,
        Protocol::Switching => analytic_det_h_switching(surface.omega)?,
        Protocol::SwitchingMixed => det2(&analytic),
    };
    Ok(CriticalPointReport {
        protocol: surface.protocol,
        tau: surface.tau,
        omega: surface.omega,
        gradient_at_origin,
        analytic_gradient_at_origin,
        hessian_at_origin: hessian,
        analytic_hessian: analytic,
        det_h,
        analytic_det_h,
        det_residual: (det_h - analytic_det_h).abs() / analytic_det_h.abs(),
        gradient_step,
        hessian_step,
        is_minimum: det_h > 0.0 && hessian[0][0] > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub g: f64,
    pub g_prime: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeReport {
    pub protocol: Protocol,
    pub tau: f64,
    pub omega: f64,
    pub resolution: usize,
    /// Sorted by `g`, then `g'`; includes the origin.
    pub grid_rates: Vec<RatePoint>,
    /// Upper branch by increasing `g`, then lower branch by decreasing `g`.
    pub boundary_rates: Vec<RatePoint>,
    pub origin_rate: f64,
    /// Smallest rate over nonzero grid and boundary points; `None` when the
    /// region is the single point `ω = 1`.
    pub min_over_grid: Option<f64>,
    /// Nonzero points within [`NEAR_TIE`] of the origin rate.
    pub near_ties: Vec<RatePoint>,
    pub degenerate_region: bool,
    /// Every nonzero point exceeds the origin rate by at least [`STRICT_MARGIN`].
    pub verdict: bool,
}

fn evaluate(surface: &RateSurface, points: &[(f64, f64)]) -> Result<Vec<RatePoint>> {
    points
        .par_iter()
        .map(|&(g, g_prime)| {
            Ok(RatePoint {
                g,
                g_prime,
                rate: surface.rate(g, g_prime)?,
            })
        })
        .collect()
}

/// Scans the rate over [`physical_grid`] and [`boundary_curve`] (with
/// `resolution` samples per branch) and checks that the origin is the
/// strict minimum.
pub fn verify_minimality(
    protocol: Protocol,
    tau: f64,
    omega: f64,
    resolution: usize,
) -> Result<LandscapeReport> {
    let surface = RateSurface::new(protocol, tau, omega)?;
    let degenerate_region = !(omega > 1.0);
    let grid: Vec<(f64, f64)> = if degenerate_region {
        vec![(0.0, 0.0)]
    } else {
        physical_grid(omega, resolution)
    };
    let boundary = if degenerate_region {
        Vec::new()
    } else {
        boundary_curve(omega, resolution)?.samples
    };
    let grid_rates = evaluate(&surface, &grid)?;
    let boundary_rates = evaluate(&surface, &boundary)?;
    let origin_rate = surface.rate(0.0, 0.0)?;

    let nonzero: Vec<&RatePoint> = grid_rates
        .iter()
        .chain(&boundary_rates)
        .filter(|p| p.g != 0.0 || p.g_prime != 0.0)
        .collect();
    let min_over_grid = nonzero.iter().map(|p| p.rate).reduce(f64::min);
    let near_ties = nonzero
        .iter()
        .filter(|p| (p.rate - origin_rate).abs() < NEAR_TIE)
        .map(|p| **p)
        .collect();
    let verdict = nonzero
        .iter()
        .all(|p| p.rate - origin_rate >= STRICT_MARGIN);
    Ok(LandscapeReport {
        protocol,
        tau,
        omega,
        resolution,
        grid_rates,
        boundary_rates,
        origin_rate,
        min_over_grid,
        near_ties,
        degenerate_region,
        verdict,
    })
}

/// Tolerance on `|R(τ*)|` for [`find_zero_rate_transmissivity`].
pub const ZERO_RATE_TOL: f64 = 1e-10;

/// Bisects `τ ↦ R(τ, ω, 0, 0)` on `bracket` until `|R| < 1e-10`.
pub fn find_zero_rate_transmissivity(
    protocol: Protocol,
    omega: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    let rate = |tau: f64| key_rate(&AttackParams::collective(tau, omega)?, protocol);
    let mut r_lo = rate(lo)?;
    let r_hi = rate(hi)?;
    if r_lo.abs() < ZERO_RATE_TOL {
        return Ok(lo);
    }
    if r_hi.abs() < ZERO_RATE_TOL {
        return Ok(hi);
    }
    if r_lo.signum() == r_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid)?;
        if r.abs() < ZERO_RATE_TOL || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if r.signum() == r_lo.signum() {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
        }
    }
}
