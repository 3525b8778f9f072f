//! Key-rate formulas for the no-switching (heterodyne) and switching
//! (homodyne) protocols under two-mode attacks, plus a finite-modulation
//! pipeline built only from [`crate::gaussian`] operations.
//!
//! Rates are in bits per channel use; mutual information and Holevo
//! quantities are per two-mode block. Negative rates are returned as-is.
//!
//! Mode layout of the Alice-Bob state is `(a, a', B, B')`: Alice's two
//! retained TMSV modes, then Bob's two received modes.

use std::f64::consts::{E, LN_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_cm, AttackParams};
use crate::error::{Error, Result};
use crate::gaussian::{
    beamsplitter_apply, entropy_h, heterodyne_condition, homodyne_condition, symplectic_spectrum,
    tmsv_cm, CovMat, Quadrature, Spectrum,
};

/// Modulation used when an asymptotic report still needs finite values for
/// the divergent quantities (mutual information, Holevo bound).
pub const REFERENCE_MU: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Bob heterodynes both modes.
    #[serde(rename = "noswitching")]
    NoSwitching,
    /// Bob homodynes the same random quadrature on both modes of a block.
    #[serde(rename = "switching")]
    Switching,
    /// Bob homodynes `q` on one mode and `p` on the other.
    #[serde(rename = "switching-mixed")]
    SwitchingMixed,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [
        Protocol::NoSwitching,
        Protocol::Switching,
        Protocol::SwitchingMixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::NoSwitching => "noswitching",
            Protocol::Switching => "switching",
            Protocol::SwitchingMixed => "switching-mixed",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown protocol '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub protocol: Protocol,
    /// Modulation parameter; Alice's TMSV has local variance `mu + 1`.
    pub mu: f64,
    /// Use the `mu -> ∞` closed forms.
    pub asymptotic: bool,
}

impl ProtocolSpec {
    pub fn asymptotic(protocol: Protocol) -> Self {
        Self {
            protocol,
            mu: REFERENCE_MU,
            asymptotic: true,
        }
    }

    pub fn finite(protocol: Protocol, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self {
            protocol,
            mu,
            asymptotic: false,
        })
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 1.0) || !mu.is_finite() {
        return Err(Error::Domain(format!(
            "modulation must be finite and > 1, got {mu}"
        )));
    }
    Ok(())
}

fn check_open_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::BoundaryTransmissivity(tau));
    }
    Ok(())
}

/// Scalar coefficients shared by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedCoefficients {
    /// Bob's quadrature variance `τ(μ+1) + (1-τ)ω`.
    pub lambda: f64,
    /// Alice-Bob correlation `√(τ[(μ+1)² - 1])`.
    pub phi: f64,
    pub lambda_tilde: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub lambda_prime_plus: f64,
    pub lambda_prime_minus: f64,
    /// `1 + ω(1-τ)`
    pub lambda_bar: f64,
    pub k: f64,
    pub k_tilde: f64,
    pub k_prime: f64,
    pub k_tilde_prime: f64,
    pub zeta: f64,
    pub zeta_prime: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
}

impl DerivedCoefficients {
    pub fn new(p: &AttackParams, mu: f64) -> Self {
        let AttackParams {
            tau,
            omega,
            g,
            g_prime,
        } = *p;
        let loss = 1.0 - tau;
        let lambda = tau * (mu + 1.0) + loss * omega;
        let lambda_bar = 1.0 + omega * loss;
        let (_, nu_minus) = total_pair(p);
        // numerator of a heterodyne-conditioned diagonal entry
        let k_of = |c: f64| {
            (lambda + 1.0) * ((mu + 1.0) * lambda_bar + tau) - (mu + 1.0) * c * c * loss * loss
        };
        let k_tilde_of = |c: f64| c * loss * tau * mu * (mu + 2.0);
        Self {
            lambda,
            phi: (tau * mu * (mu + 2.0)).sqrt(),
            lambda_tilde: lambda - tau,
            lambda_plus: 1.0 + loss * (omega + g),
            lambda_minus: 1.0 + loss * (omega - g),
            lambda_prime_plus: 1.0 + loss * (omega + g_prime),
            lambda_prime_minus: 1.0 + loss * (omega - g_prime),
            lambda_bar,
            k: k_of(g),
            k_tilde: k_tilde_of(g),
            k_prime: k_of(g_prime),
            k_tilde_prime: k_tilde_of(g_prime),
            zeta: nu_minus / (2.0 * (omega - g_prime)),
            zeta_prime: nu_minus / (2.0 * (omega - g)),
            kappa_plus: (omega + g_prime) / (omega + g),
            kappa_minus: (omega - g_prime) / (omega - g),
        }
    }

    /// Denominator `(Λ+1)² - c²(1-τ)²` of the heterodyne-conditioned CM.
    fn heterodyne_denominator(&self, tau: f64, c: f64) -> f64 {
        let x = c * (1.0 - tau);
        (self.lambda + 1.0).powi(2) - x * x
    }
}

/// `(ν+, ν-)`, the finite symplectic eigenvalues of the ancilla pair.
fn total_pair(p: &AttackParams) -> (f64, f64) {
    let AttackParams {
        omega, g, g_prime, ..
    } = *p;
    (
        ((omega + g) * (omega + g_prime)).sqrt(),
        ((omega - g) * (omega - g_prime)).sqrt(),
    )
}

/// Covariance matrix of `ρ_{a a' B B'}` in closed form.
pub fn total_cm(p: &AttackParams, mu: f64) -> Result<CovMat> {
    p.ensure_physical()?;
    check_mu(mu)?;
    let c = DerivedCoefficients::new(p, mu);
    let a = mu + 1.0;
    let loss = 1.0 - p.tau;
    let mut m = DMatrix::zeros(8, 8);
    for mode in 0..2 {
        let (ia, ib) = (2 * mode, 2 * mode + 4);
        m[(ia, ia)] = a;
        m[(ia + 1, ia + 1)] = a;
        m[(ib, ib)] = c.lambda;
        m[(ib + 1, ib + 1)] = c.lambda;
        for (r, col, v) in [(ia, ib, c.phi), (ia + 1, ib + 1, -c.phi)] {
            m[(r, col)] = v;
            m[(col, r)] = v;
        }
    }
    for (r, col, v) in [(4, 6, loss * p.g), (5, 7, loss * p.g_prime)] {
        m[(r, col)] = v;
        m[(col, r)] = v;
    }
    CovMat::new(m)
}

/// The same state built constructively: two TMSVs of variance `μ+1` mixed
/// with the correlated ancillas on two beam splitters, Eve's outputs traced out.
pub fn total_cm_pipeline(p: &AttackParams, mu: f64) -> Result<CovMat> {
    p.ensure_physical()?;
    check_mu(mu)?;
    let epr = tmsv_cm(mu + 1.0)?;
    // modes: a, A, a', A', e, E
    let v = epr
        .direct_sum(&epr)
        .direct_sum(&attack_cm(p.omega, p.g, p.g_prime));
    let v = beamsplitter_apply(&v, 1, 4, p.tau)?;
    let v = beamsplitter_apply(&v, 3, 5, p.tau)?;
    v.select_modes(&[0, 2, 1, 3])
}

/// Alice-Bob mutual information per block.
///
/// Independent of `g` and `g'`. The finite-`μ` forms use Bob's variance
/// `Λ = τ(μ+1) + (1-τ)ω` from the TMSV of variance `μ+1`.
pub fn mutual_information(p: &AttackParams, spec: &ProtocolSpec) -> Result<f64> {
    check_mu(spec.mu)?;
    let AttackParams { tau, omega, .. } = *p;
    let conditional = tau + (1.0 - tau) * omega;
    let lambda = tau * (spec.mu + 1.0) + (1.0 - tau) * omega;
    Ok(match (spec.protocol, spec.asymptotic) {
        (Protocol::NoSwitching, false) => 2.0 * ((lambda + 1.0) / (conditional + 1.0)).log2(),
        (Protocol::NoSwitching, true) => 2.0 * (tau * spec.mu / (1.0 + conditional)).log2(),
        (_, false) => (lambda / conditional).log2(),
        (_, true) => (tau * spec.mu / conditional).log2(),
    })
}

/// Large-`μ` symplectic spectrum of the total CM: `{ν+, ν-, (1-τ)μ, (1-τ)μ}`.
pub fn total_spectrum_asymptotic(p: &AttackParams, mu: f64) -> Result<Spectrum> {
    p.ensure_physical()?;
    let (plus, minus) = total_pair(p);
    let big = (1.0 - p.tau) * mu;
    Ok(Spectrum::new(vec![plus, minus, big, big]))
}

/// Conditional CM of `(a, a')` after Bob heterodynes `B` and `B'`.
///
/// q entries are `k/D`, `k̃/D`; p entries use `g'` throughout, with
/// `D = (Λ+1)² - g²(1-τ)²`, `k = (Λ+1)[(μ+1)λ̄ + τ] - (μ+1)g²(1-τ)²` and
/// `k̃ = g(1-τ)τμ(μ+2)`.
pub fn conditional_cm_noswitching(p: &AttackParams, mu: f64) -> Result<CovMat> {
    p.ensure_physical()?;
    check_mu(mu)?;
    let c = DerivedCoefficients::new(p, mu);
    let d = c.heterodyne_denominator(p.tau, p.g);
    let dp = c.heterodyne_denominator(p.tau, p.g_prime);
    let (kq, kpp) = (c.k / d, c.k_prime / dp);
    let (xq, xp) = (c.k_tilde / d, c.k_tilde_prime / dp);
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        kq,  0.0, xq,  0.0,
        0.0, kpp, 0.0, xp,
        xq,  0.0, kq,  0.0,
        0.0, xp,  0.0, kpp,
    ]);
    CovMat::new(m)
}

/// Exact symplectic spectrum of [`conditional_cm_noswitching`].
///
/// The conditional CM is diagonal in the `(a ± a')/√2` basis, giving
/// `ν±² = x(g) x(g')` with `x(c) = ((μ+1)λ(c) + τ)/(Λ + 1 ± (1-τ)c)`.
pub fn conditional_spectrum_noswitching_finite(p: &AttackParams, mu: f64) -> Result<Spectrum> {
    p.ensure_physical()?;
    check_mu(mu)?;
    let AttackParams {
        tau,
        omega,
        g,
        g_prime,
    } = *p;
    let loss = 1.0 - tau;
    let lambda = tau * (mu + 1.0) + loss * omega;
    let factor = |s: f64, c: f64| {
        ((mu + 1.0) * (1.0 + loss * (omega + s * c)) + tau) / (lambda + 1.0 + s * loss * c)
    };
    Ok(Spectrum::new(vec![
        (factor(1.0, g) * factor(1.0, g_prime)).sqrt(),
        (factor(-1.0, g) * factor(-1.0, g_prime)).sqrt(),
    ]))
}

/// Large-`μ` conditional spectrum `{√(λ+λ'+)/τ, √(λ-λ'-)/τ}`; independent of `μ`.
pub fn conditional_spectrum_noswitching(p: &AttackParams) -> Result<Spectrum> {
    p.ensure_physical()?;
    if !(p.tau > 0.0) {
        return Err(Error::BoundaryTransmissivity(p.tau));
    }
    let c = DerivedCoefficients::new(p, 0.0);
    Ok(Spectrum::new(vec![
        (c.lambda_plus * c.lambda_prime_plus).sqrt() / p.tau,
        (c.lambda_minus * c.lambda_prime_minus).sqrt() / p.tau,
    ]))
}

/// Asymptotic Holevo bound per block for the no-switching protocol.
pub fn holevo_noswitching(p: &AttackParams, mu: f64) -> Result<f64> {
    p.ensure_physical()?;
    check_mu(mu)?;
    check_open_tau(p.tau)?;
    let (plus, minus) = total_pair(p);
    let cond = conditional_spectrum_noswitching(p)?;
    let divergent = 2.0 * (0.5 * E * (1.0 - p.tau) * mu).log2();
    Ok(divergent + entropy_h(plus)? + entropy_h(minus)? - cond.entropy()?)
}

/// Asymptotic no-switching key rate, free of `μ`.
pub fn key_rate_noswitching(p: &AttackParams) -> Result<f64> {
    p.ensure_physical()?;
    check_open_tau(p.tau)?;
    let AttackParams { tau, omega, .. } = *p;
    let (plus, minus) = total_pair(p);
    let cond = conditional_spectrum_noswitching(p)?;
    let loss = 1.0 - tau;
    let head = (2.0 / E * tau / (loss * (1.0 + tau + loss * omega))).log2();
    Ok(head + 0.5 * (cond.entropy()? - entropy_h(plus)? - entropy_h(minus)?))
}

/// Conditional spectra of the switching protocol as coefficients of `√μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchingSpectra {
    /// Both modes homodyned in `q`: `√((1-τ)(ω ± g)/τ)`.
    pub q: Spectrum,
    /// Both modes homodyned in `p`: `√((1-τ)(ω ± g')/τ)`.
    pub p: Spectrum,
    /// One mode in `q`, the other in `p`: doubly degenerate `√((1-τ)ω/τ)`.
    pub mixed: Spectrum,
}

impl SwitchingSpectra {
    pub fn scaled(&self, mu: f64) -> (Spectrum, Spectrum, Spectrum) {
        let s = mu.sqrt();
        let scale = |sp: &Spectrum| Spectrum::new(sp.values().iter().map(|x| x * s).collect());
        (scale(&self.q), scale(&self.p), scale(&self.mixed))
    }
}

pub fn conditional_spectra_switching(p: &AttackParams) -> Result<SwitchingSpectra> {
    p.ensure_physical()?;
    if !(p.tau > 0.0) {
        return Err(Error::BoundaryTransmissivity(p.tau));
    }
    let AttackParams {
        tau,
        omega,
        g,
        g_prime,
    } = *p;
    let r = (1.0 - tau) / tau;
    let pair = |c: f64| Spectrum::new(vec![(r * (omega + c)).sqrt(), (r * (omega - c)).sqrt()]);
    let m = (r * omega).sqrt();
    Ok(SwitchingSpectra {
        q: pair(g),
        p: pair(g_prime),
        mixed: Spectrum::new(vec![m, m]),
    })
}

/// Exact conditional spectra of the switching protocol at finite `μ`.
///
/// Homodyning `x` on both modes leaves `ν±² = (μ+1)[(μ+1)(1-τ)(ω ± c) + τ]/(Λ ± (1-τ)c)`
/// with `c = g` for `q` and `c = g'` for `p`; the mixed case has the
/// doubly degenerate `ν² = (μ+1)[(μ+1)(1-τ)ω + τ]/Λ`.
pub fn conditional_spectra_switching_finite(
    p: &AttackParams,
    mu: f64,
) -> Result<(Spectrum, Spectrum, Spectrum)> {
    p.ensure_physical()?;
    check_mu(mu)?;
    let AttackParams {
        tau,
        omega,
        g,
        g_prime,
    } = *p;
    let loss = 1.0 - tau;
    let lambda = tau * (mu + 1.0) + loss * omega;
    let nu = |c: f64| {
        ((mu + 1.0) * ((mu + 1.0) * loss * (omega + c) + tau) / (lambda + loss * c)).sqrt()
    };
    let pair = |c: f64| Spectrum::new(vec![nu(c), nu(-c)]);
    let m = nu(0.0);
    Ok((pair(g), pair(g_prime), Spectrum::new(vec![m, m])))
}

/// `S_AB` minus the divergent `2 log2((e/2)(1-τ)μ)` term.
fn total_entropy_finite_part(p: &AttackParams) -> Result<f64> {
    let (plus, minus) = total_pair(p);
    Ok(entropy_h(plus)? + entropy_h(minus)?)
}

/// Asymptotic Holevo bound per block for same-quadrature switching.
///
/// `χ = h(ν+) + h(ν-) + log2(τ(1-τ)μ) - ½ log2(ν+ ν-)`, with the conditional
/// entropy averaged over the `q` and `p` branches and the `μ` terms combined
/// before evaluation.
pub fn holevo_switching(p: &AttackParams, mu: f64) -> Result<f64> {
    p.ensure_physical()?;
    check_mu(mu)?;
    check_open_tau(p.tau)?;
    let (plus, minus) = total_pair(p);
    Ok(
        total_entropy_finite_part(p)? + (p.tau * (1.0 - p.tau) * mu).log2()
            - 0.5 * (plus * minus).log2(),
    )
}

/// Asymptotic Holevo bound per block for mixed-quadrature switching.
pub fn holevo_switching_mixed(p: &AttackParams, mu: f64) -> Result<f64> {
    p.ensure_physical()?;
    check_mu(mu)?;
    check_open_tau(p.tau)?;
    Ok(total_entropy_finite_part(p)? + (p.tau * (1.0 - p.tau) * mu).log2() - p.omega.log2())
}

/// Same-quadrature switching rate
/// `½ log2(√(ν-ν+)/((1-τ)[τ + (1-τ)ω])) - (h(ν+) + h(ν-))/2`.
pub fn key_rate_switching(p: &AttackParams) -> Result<f64> {
    p.ensure_physical()?;
    check_open_tau(p.tau)?;
    let AttackParams { tau, omega, .. } = *p;
    let (plus, minus) = total_pair(p);
    let loss = 1.0 - tau;
    Ok(
        0.5 * ((plus * minus).sqrt() / (loss * (tau + loss * omega))).log2()
            - 0.5 * total_entropy_finite_part(p)?,
    )
}

/// Mixed-quadrature switching rate; `g` and `g'` enter only through `h(ν±)`.
pub fn key_rate_switching_mixed(p: &AttackParams) -> Result<f64> {
    p.ensure_physical()?;
    check_open_tau(p.tau)?;
    let AttackParams { tau, omega, .. } = *p;
    let loss = 1.0 - tau;
    Ok(0.5 * (omega / (loss * (tau + loss * omega))).log2() - 0.5 * total_entropy_finite_part(p)?)
}

/// Asymptotic rate of `protocol`.
pub fn key_rate(p: &AttackParams, protocol: Protocol) -> Result<f64> {
    match protocol {
        Protocol::NoSwitching => key_rate_noswitching(p),
        Protocol::Switching => key_rate_switching(p),
        Protocol::SwitchingMixed => key_rate_switching_mixed(p),
    }
}

pub fn holevo(p: &AttackParams, protocol: Protocol, mu: f64) -> Result<f64> {
    match protocol {
        Protocol::NoSwitching => holevo_noswitching(p, mu),
        Protocol::Switching => holevo_switching(p, mu),
        Protocol::SwitchingMixed => holevo_switching_mixed(p, mu),
    }
}

/// Everything that went into one rate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub protocol: Protocol,
    pub mu: f64,
    pub asymptotic: bool,
    /// bits per block
    pub mutual_information: f64,
    /// bits per block
    pub holevo: f64,
    /// bits per channel use, `(I_AB - χ)/2`
    pub rate: f64,
    pub total_spectrum: Spectrum,
    /// One entry for heterodyne and mixed homodyne; `[q, p]` for switching.
    pub conditional_spectra: Vec<Spectrum>,
    pub params: AttackParams,
}

/// Rate report from the closed forms (asymptotic spec) or the numeric pipeline.
pub fn rate_report(p: &AttackParams, spec: &ProtocolSpec) -> Result<RateReport> {
    if !spec.asymptotic {
        return key_rate_numeric(p, spec);
    }
    p.ensure_physical()?;
    check_open_tau(p.tau)?;
    let mu = spec.mu;
    let mutual_information = mutual_information(p, spec)?;
    let holevo = holevo(p, spec.protocol, mu)?;
    let conditional_spectra = match spec.protocol {
        Protocol::NoSwitching => vec![conditional_spectrum_noswitching(p)?],
        Protocol::Switching => {
            let (q, pp, _) = conditional_spectra_switching(p)?.scaled(mu);
            vec![q, pp]
        }
        Protocol::SwitchingMixed => vec![conditional_spectra_switching(p)?.scaled(mu).2],
    };
    Ok(RateReport {
        protocol: spec.protocol,
        mu,
        asymptotic: true,
        mutual_information,
        holevo,
        rate: 0.5 * (mutual_information - holevo),
        total_spectrum: total_spectrum_asymptotic(p, mu)?,
        conditional_spectra,
        params: *p,
    })
}

/// Mutual information of one channel use from the `(a, B)` reduced state.
///
/// Heterodyne contributes `½ log2((V+1)/(V|α+1))` per quadrature, homodyne
/// `½ log2(V/V|α)` for the measured quadrature.
fn single_use_information(
    v: &CovMat,
    alice: usize,
    bob: usize,
    measurement: Measurement,
) -> Result<f64> {
    let pair = v.select_modes(&[alice, bob])?;
    let cond = heterodyne_condition(&pair, 0)?;
    let var = |q: usize| (pair.get(2 + q, 2 + q), cond.get(q, q));
    Ok(match measurement {
        Measurement::Heterodyne => [0, 1]
            .iter()
            .map(|&q| {
                let (vb, vc) = var(q);
                0.5 * ((vb + 1.0) / (vc + 1.0)).log2()
            })
            .sum(),
        Measurement::Homodyne(quad) => {
            let (vb, vc) = var(quad as usize);
            0.5 * (vb / vc).log2()
        }
    })
}

#[derive(Debug, Clone, Copy)]
enum Measurement {
    Heterodyne,
    Homodyne(Quadrature),
}

/// Computes `I_AB`, `χ` and `R` at finite `μ` purely through Gaussian
/// calculus: beam-splitter construction, symplectic spectra and measurement
/// updates. No asymptotic formula is used.
pub fn key_rate_numeric(p: &AttackParams, spec: &ProtocolSpec) -> Result<RateReport> {
    if spec.asymptotic {
        return Err(Error::Domain(
            "numeric pipeline needs a finite modulation".into(),
        ));
    }
    check_mu(spec.mu)?;
    let v = total_cm_pipeline(p, spec.mu)?;
    let total_spectrum = symplectic_spectrum(&v)?;
    let s_total = total_spectrum.entropy()?;

    // B is mode 2 and B' is mode 3; conditioning B' first keeps B at index 2.
    let het =
        |v: &CovMat| -> Result<CovMat> { heterodyne_condition(&heterodyne_condition(v, 3)?, 2) };
    let hom = |v: &CovMat, first: Quadrature, second: Quadrature| -> Result<CovMat> {
        homodyne_condition(&homodyne_condition(v, 3, second)?, 2, first)
    };
    use Measurement::*;
    use Quadrature::{P, Q};

    let (mutual_information, conditional_spectra, s_cond) = match spec.protocol {
        Protocol::NoSwitching => {
            let i = single_use_information(&v, 0, 2, Heterodyne)?
                + single_use_information(&v, 1, 3, Heterodyne)?;
            let sp = symplectic_spectrum(&het(&v)?)?;
            let s = sp.entropy()?;
            (i, vec![sp], s)
        }
        Protocol::Switching => {
            let iq = single_use_information(&v, 0, 2, Homodyne(Q))?
                + single_use_information(&v, 1, 3, Homodyne(Q))?;
            let ip = single_use_information(&v, 0, 2, Homodyne(P))?
                + single_use_information(&v, 1, 3, Homodyne(P))?;
            let sq = symplectic_spectrum(&hom(&v, Q, Q)?)?;
            let spp = symplectic_spectrum(&hom(&v, P, P)?)?;
            let s = 0.5 * (sq.entropy()? + spp.entropy()?);
            (0.5 * (iq + ip), vec![sq, spp], s)
        }
        Protocol::SwitchingMixed => {
            let i = single_use_information(&v, 0, 2, Homodyne(Q))?
                + single_use_information(&v, 1, 3, Homodyne(P))?;
            let sp = symplectic_spectrum(&hom(&v, Q, P)?)?;
            let s = sp.entropy()?;
            (i, vec![sp], s)
        }
    };
    let holevo = s_total - s_cond;
    Ok(RateReport {
        protocol: spec.protocol,
        mu: spec.mu,
        asymptotic: false,
        mutual_information,
        holevo,
        rate: 0.5 * (mutual_information - holevo),
        total_spectrum,
        conditional_spectra,
        params: *p,
    })
}

/// `ln((1+x)/(1-x))`, the derivative kernel `2 ln2 · h'(1/x)`.
pub(crate) fn log_ratio(x: f64) -> f64 {
    (2.0 * x / (1.0 - x)).ln_1p()
}

pub(crate) const LN2_SQ: f64 = LN_2 * LN_2;

#[cfg(test)]
mod tests {
    use super::*;

    fn ap(tau: f64, omega: f64, g: f64, gp: f64) -> AttackParams {
        AttackParams::new(tau, omega, g, gp).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("het".parse::<Protocol>().is_err());
    }

    #[test]
    fn coefficient_identities() {
        let p = ap(0.6, 1.2, 0.3, -0.1);
        let c = DerivedCoefficients::new(&p, 9.0);
        assert!((c.lambda - 6.48).abs() < 1e-12);
        assert!((c.lambda_tilde - (c.lambda - 0.6)).abs() < 1e-15);
        assert!((c.lambda_bar - 1.48).abs() < 1e-15);
        let ratio = (1.44 - 0.01) / (1.44 - 0.09);
        assert!(rel(c.kappa_plus * c.kappa_minus, ratio) < 1e-14);
        assert!(c.k_tilde > 0.0 && c.k_tilde_prime < 0.0);
    }

    #[test]
    fn total_cm_transparent_channel() {
        let p = ap(1.0, 1.2, 0.3, -0.1);
        let v = total_cm(&p, 4.0).unwrap();
        let epr = tmsv_cm(5.0).unwrap();
        let expect = epr.direct_sum(&epr).select_modes(&[0, 2, 1, 3]).unwrap();
        for (x, y) in v.matrix().iter().zip(expect.matrix().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn total_cm_bob_variance() {
        let v = total_cm(&ap(0.6, 1.2, 0.0, 0.0), 9.0).unwrap();
        assert!((v.get(4, 4) - 6.48).abs() < 1e-12);
        assert!((v.get(7, 7) - 6.48).abs() < 1e-12);
    }

    #[test]
    fn total_cm_matches_pipeline() {
        for &(tau, omega, g, gp, mu) in &[
            (0.6, 1.2, 0.3, -0.1, 10.0),
            (0.1, 3.0, -1.2, 0.4, 1e3),
            (0.95, 1.01, 0.0, 0.0, 2.0),
        ] {
            let p = ap(tau, omega, g, gp);
            let a = total_cm(&p, mu).unwrap();
            let b = total_cm_pipeline(&p, mu).unwrap();
            let scale = a.matrix().amax();
            assert!((a.matrix() - b.matrix()).amax() <= 1e-12 * scale);
        }
    }

    #[test]
    fn unphysical_inputs_rejected() {
        let bad = ap(0.44, 1.2, 0.5, 0.5);
        assert!(matches!(total_cm(&bad, 10.0), Err(Error::Unphysical(_))));
        assert!(matches!(
            key_rate_noswitching(&bad),
            Err(Error::Unphysical(_))
        ));
        assert!(total_cm(&ap(0.5, 1.2, 0.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn mutual_information_values() {
        let p = ap(0.5, 1.0, 0.0, 0.0);
        let spec = ProtocolSpec::finite(Protocol::NoSwitching, 3.0).unwrap();
        // (0.5·4 + 0.5·1 + 1)/(1 + 0.5 + 0.5) = 1.75
        let i = mutual_information(&p, &spec).unwrap();
        assert!((i - 2.0 * 1.75f64.log2()).abs() < 1e-15);
        // with Bob's variance written as τμ + (1-τ)ω the same value appears at μ - 1
        let shifted = ProtocolSpec::finite(Protocol::NoSwitching, 2.0).unwrap();
        let i2 = mutual_information(&p, &shifted).unwrap();
        assert!((i2 - 2.0 * 1.5f64.log2()).abs() < 1e-15);
        assert!((i2 - 1.1699).abs() < 1e-4);

        let p = ap(0.44, 1.2, 0.0, 0.0);
        let asym = ProtocolSpec::asymptotic(Protocol::NoSwitching);
        let i = mutual_information(&p, &asym).unwrap();
        assert!((i - 2.0 * (0.44e6 / 2.112f64).log2()).abs() < 1e-12);

        for protocol in Protocol::ALL {
            for spec in [
                ProtocolSpec::asymptotic(protocol),
                ProtocolSpec::finite(protocol, 50.0).unwrap(),
            ] {
                let a = mutual_information(&p, &spec).unwrap();
                let b = mutual_information(&p.with_correlations(0.3, -0.3), &spec).unwrap();
                assert_eq!(a, b);
            }
        }
        let bad = ProtocolSpec {
            protocol: Protocol::NoSwitching,
            mu: 1.0,
            asymptotic: false,
        };
        assert!(mutual_information(&p, &bad).is_err());
    }

    #[test]
    fn total_spectrum_examples() {
        let p = ap(0.6, 1.2, 0.0, 0.0);
        let s = total_spectrum_asymptotic(&p, 100.0).unwrap();
        assert_eq!(s.values(), &[40.0, 40.0, 1.2, 1.2]);
        let p = ap(0.6, 1.2, 0.3, -0.1);
        let s = total_spectrum_asymptotic(&p, 1e6).unwrap();
        assert!((s.values()[2] - 1.65f64.sqrt()).abs() < 1e-15);
        assert!((s.values()[3] - 1.17f64.sqrt()).abs() < 1e-15);
        let numeric = symplectic_spectrum(&total_cm(&p, 1e6).unwrap()).unwrap();
        for (a, b) in s.values().iter().zip(numeric.values()) {
            assert!(rel(*b, *a) < 1e-4);
        }
    }

    #[test]
    fn conditional_cm_matches_double_heterodyne() {
        for &(tau, omega, g, gp, mu) in &[
            (0.6, 1.2, 0.3, -0.1, 1e6),
            (0.6, 1.2, 0.3, -0.1, 1e3),
            (0.3, 2.0, -0.8, 0.5, 50.0),
        ] {
            let p = ap(tau, omega, g, gp);
            let closed = conditional_cm_noswitching(&p, mu).unwrap();
            let v = total_cm_pipeline(&p, mu).unwrap();
            let numeric = heterodyne_condition(&heterodyne_condition(&v, 3).unwrap(), 2).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let (a, b) = (closed.get(i, j), numeric.get(i, j));
                    assert!(
                        (a - b).abs() <= 1e-6 * a.abs().max(1e-3),
                        "{i},{j}: {a} vs {b}"
                    );
                }
            }
            let exact = conditional_spectrum_noswitching_finite(&p, mu).unwrap();
            let sp = symplectic_spectrum(&closed).unwrap();
            for (a, b) in exact.values().iter().zip(sp.values()) {
                assert!(rel(*b, *a) < 1e-9);
            }
        }
    }

    #[test]
    fn conditional_spectrum_examples() {
        let s = conditional_spectrum_noswitching(&ap(0.44, 1.2, 0.0, 0.0)).unwrap();
        for &x in s.values() {
            assert!((x - 3.8).abs() < 1e-12);
        }
        let s = conditional_spectrum_noswitching(&ap(0.6, 1.2, 0.3, -0.1)).unwrap();
        assert!((s.values()[0] - (1.6f64 * 1.44).sqrt() / 0.6).abs() < 1e-12);
        assert!((s.values()[0] - 2.5298).abs() < 1e-4);

        let p = ap(0.44, 1.2, 0.0, 0.0);
        let finite = conditional_spectrum_noswitching_finite(&p, 1e6).unwrap();
        assert!(rel(finite.values()[0], 3.8) < 1e-5);
        // μ-independence of the large-μ limit
        let p = ap(0.6, 1.2, 0.3, -0.1);
        let a = conditional_spectrum_noswitching_finite(&p, 1e3).unwrap();
        let b = conditional_spectrum_noswitching_finite(&p, 1e6).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!(rel(*x, *y) < 1e-2);
        }
    }

    #[test]
    fn holevo_reduces_to_single_mode() {
        let p = ap(0.44, 1.2, 0.0, 0.0);
        let mu = 1e6;
        let chi = holevo_noswitching(&p, mu).unwrap();
        let nu_bar = (1.0 + 0.56 * 1.2) / 0.44;
        let s_ab = 2.0 * entropy_h(1.2).unwrap() + 2.0 * (0.5 * E * 0.56 * mu).log2();
        let s_cond = 2.0 * entropy_h(nu_bar).unwrap();
        assert!((chi - (s_ab - s_cond)).abs() < 1e-12);
        assert!(matches!(
            holevo_noswitching(&ap(1.0, 1.2, 0.0, 0.0), mu),
            Err(Error::BoundaryTransmissivity(_))
        ));
    }

    #[test]
    fn holevo_numeric_agreement() {
        let p = ap(0.6, 1.2, 0.3, -0.1);
        let mu = 1e6;
        let closed = holevo_noswitching(&p, mu).unwrap();
        let s_ab = symplectic_spectrum(&total_cm(&p, mu).unwrap())
            .unwrap()
            .entropy()
            .unwrap();
        let s_c = symplectic_spectrum(&conditional_cm_noswitching(&p, mu).unwrap())
            .unwrap()
            .entropy()
            .unwrap();
        assert!((s_ab - s_c - closed).abs() < 1e-3);
    }

    #[test]
    fn noswitching_rate_examples() {
        let r = key_rate_noswitching(&ap(0.44, 1.2, 0.0, 0.0)).unwrap();
        assert!(r.abs() < 2e-3);
        let tau: f64 = 0.01;
        let r = key_rate_noswitching(&ap(tau, 1.0, 0.0, 0.0)).unwrap();
        assert!((r / (tau / 4f64.ln()) - 1.0).abs() < 0.02);
        assert!(key_rate_noswitching(&ap(0.44, 1.2, 0.3, -0.3)).unwrap() > 0.0);
        assert!(matches!(
            key_rate_noswitching(&ap(1.0, 1.2, 0.0, 0.0)),
            Err(Error::BoundaryTransmissivity(_))
        ));
    }

    #[test]
    fn rate_block_is_twice_rate() {
        let p = ap(0.6, 1.2, 0.3, -0.1);
        let spec = ProtocolSpec {
            protocol: Protocol::NoSwitching,
            mu: 1e6,
            asymptotic: true,
        };
        let report = rate_report(&p, &spec).unwrap();
        let r = key_rate_noswitching(&p).unwrap();
        assert!((2.0 * report.rate - 2.0 * r).abs() < 1e-9);
        assert_eq!(
            report.rate,
            0.5 * (report.mutual_information - report.holevo)
        );
    }

    #[test]
    fn switching_spectra_examples() {
        let s = conditional_spectra_switching(&ap(0.5, 1.2, 0.0, 0.0)).unwrap();
        assert_eq!(s.q, s.p);
        assert_eq!(s.q, s.mixed);
        let s = conditional_spectra_switching(&ap(0.5, 1.2, 0.3, -0.1)).unwrap();
        assert!((s.q.values()[0] - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((s.q.values()[1] - 0.9f64.sqrt()).abs() < 1e-15);

        let p = ap(0.5, 1.2, 0.3, -0.1);
        let mu = 1e6;
        let v = total_cm_pipeline(&p, mu).unwrap();
        let cq = homodyne_condition(
            &homodyne_condition(&v, 3, Quadrature::Q).unwrap(),
            2,
            Quadrature::Q,
        )
        .unwrap();
        let numeric = symplectic_spectrum(&cq).unwrap();
        for (a, b) in numeric.values().iter().zip(s.q.values()) {
            assert!((a / mu.sqrt() - b).abs() < 1e-3);
        }
        let (fq, _, _) = conditional_spectra_switching_finite(&p, mu).unwrap();
        for (a, b) in numeric.values().iter().zip(fq.values()) {
            assert!(rel(*a, *b) < 1e-8);
        }
    }

    #[test]
    fn switching_rate_examples() {
        let p = ap(0.5, 1.0, 0.0, 0.0);
        assert!((key_rate_switching(&p).unwrap() - 0.5).abs() < 1e-15);
        let p = ap(0.37, 1.7, 0.0, 0.0);
        let expect = 0.5 * (1.7f64 / (0.63 * (0.37 + 0.63 * 1.7))).log2() - entropy_h(1.7).unwrap();
        assert!((key_rate_switching(&p).unwrap() - expect).abs() < 1e-14);
        assert_eq!(
            key_rate_switching(&p).unwrap(),
            key_rate_switching_mixed(&p).unwrap()
        );
        let base = key_rate_switching(&ap(0.44, 1.2, 0.0, 0.0)).unwrap();
        for &(g, gp) in &[(0.1, 0.0), (0.3, -0.3), (-0.05, -0.05), (0.0, 0.2)] {
            assert!(key_rate_switching(&ap(0.44, 1.2, g, gp)).unwrap() > base);
        }
    }

    #[test]
    fn mixed_rate_dominates_same_quadrature() {
        // R̄ - R̃ = ½ log2(ω / √(ν+ν-)) ≥ 0, zero only at the origin
        let p = ap(0.6, 1.2, 0.3, -0.3);
        let same = key_rate_switching(&p).unwrap();
        let mixed = key_rate_switching_mixed(&p).unwrap();
        let (plus, minus) = total_pair(&p);
        assert!(mixed > same);
        assert!((mixed - same - 0.5 * (1.2 / (plus * minus).sqrt()).log2()).abs() < 1e-14);
    }

    #[test]
    fn numeric_pipeline_lossless_channel() {
        let p = ap(1.0, 1.2, 0.0, 0.0);
        let spec = ProtocolSpec::finite(Protocol::NoSwitching, 100.0).unwrap();
        let r = key_rate_numeric(&p, &spec).unwrap();
        assert!(r.mutual_information.is_finite() && r.mutual_information > 0.0);
        assert!(r.holevo.abs() < 1e-6);
        assert!((r.rate - 0.5 * r.mutual_information).abs() < 1e-6);
        assert!(key_rate_numeric(&p, &ProtocolSpec::asymptotic(Protocol::NoSwitching)).is_err());
    }

    #[test]
    fn numeric_pipeline_converges() {
        let p = ap(0.44, 1.2, 0.0, 0.0);
        let closed = key_rate_noswitching(&p).unwrap();
        let errs: Vec<f64> = [1e3, 1e4, 1e5, 1e6]
            .iter()
            .map(|&mu| {
                let spec = ProtocolSpec::finite(Protocol::NoSwitching, mu).unwrap();
                (key_rate_numeric(&p, &spec).unwrap().rate - closed).abs()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[3] < 2e-3);
    }

    #[test]
    fn log_ratio_matches_definition() {
        for &x in &[1e-8, 0.1, 0.5, 0.9, 0.999] {
            let direct = 2.0 * f64::atanh(x);
            assert!(rel(log_ratio(x), direct) < 1e-13);
        }
    }
}
