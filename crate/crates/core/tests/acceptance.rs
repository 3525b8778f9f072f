//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the summary is always printed.

mod common;

use std::f64::consts::E;
use std::process::{Command, ExitCode};
use std::time::Instant;

use gausskey::attack::{check_constraints, AttackParams};
use gausskey::gaussian::{
    beamsplitter_apply, entropy_h, heterodyne_condition, homodyne_condition, is_physical,
    symplectic_spectrum, tmsv_cm, Quadrature,
};
use gausskey::landscape::{
    analytic_det_h_noswitching, analytic_det_h_switching, analytic_hessian_switching,
    find_zero_rate_transmissivity, hessian_at_origin, verify_minimality, RateSurface,
};
use gausskey::rates::{
    conditional_spectrum_noswitching, holevo_noswitching, key_rate, key_rate_noswitching,
    key_rate_numeric, key_rate_switching, Protocol, ProtocolSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_nus, random_state, rel, two_mode_spectrum};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn zero_rate_point() -> Outcome {
    let start = Instant::now();
    let tau = find_zero_rate_transmissivity(Protocol::NoSwitching, 1.2, (0.01, 0.99));
    let secs = start.elapsed().as_secs_f64();
    match tau {
        Ok(t) => outcome(
            (t - 0.44).abs() <= 0.005 && secs < 1.0,
            format!("tau* = {t:.6} in {secs:.3} s"),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn minimality() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut points = 0;
    for protocol in [Protocol::NoSwitching, Protocol::Switching] {
        for tau in [0.1, 0.3, 0.44, 0.6, 0.9] {
            for omega in [1.1, 1.2, 1.5, 2.0, 5.0] {
                match verify_minimality(protocol, tau, omega, 101) {
                    Ok(r) => {
                        points += r.grid_rates.len() + r.boundary_rates.len();
                        let boundary_ok = !r.boundary_rates.is_empty()
                            && r.boundary_rates.iter().all(|p| p.rate > r.origin_rate);
                        if !(r.verdict && boundary_ok) {
                            failures.push(format!("{protocol} tau={tau} omega={omega}"));
                        }
                    }
                    Err(e) => failures.push(format!("{protocol} tau={tau} omega={omega}: {e}")),
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 30.0,
        format!(
            "50 landscapes, {points} points, {} failures, {secs:.2} s {}",
            failures.len(),
            failures.join("; ")
        ),
    )
}

fn hessian_noswitching() -> Outcome {
    let mut min_det = f64::INFINITY;
    for i in 1..=50 {
        let tau = i as f64 / 51.0;
        for j in 1..=50 {
            let omega = 1.0 + 9.0 * j as f64 / 50.0;
            match analytic_det_h_noswitching(tau, omega) {
                Ok(d) => min_det = min_det.min(d),
                Err(e) => return outcome(false, e.to_string()),
            }
        }
    }
    let mut worst: f64 = 0.0;
    for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for omega in [1.05, 1.2, 1.5, 3.0, 10.0] {
            let s = RateSurface::new(Protocol::NoSwitching, tau, omega).unwrap();
            let fd = det2(&hessian_at_origin(&s, None).unwrap());
            worst = worst.max(rel(fd, analytic_det_h_noswitching(tau, omega).unwrap()));
        }
    }
    outcome(
        min_det > 0.0 && worst < 1e-4,
        format!(
            "min det H over 50x50 = {min_det:.3e}, worst FD residual over 25 points = {worst:.2e}"
        ),
    )
}

fn hessian_switching() -> Outcome {
    let mut min_det = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for omega in [1.001, 1.01, 1.1, 1.5, 2.0, 5.0, 50.0] {
        min_det = min_det.min(analytic_det_h_switching(omega).unwrap());
        let s = RateSurface::new(Protocol::Switching, 0.5, omega).unwrap();
        let fd = hessian_at_origin(&s, None).unwrap();
        let a = analytic_hessian_switching(omega).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            worst = worst.max(rel(fd[i][j], a[i][j]));
        }
    }
    outcome(
        min_det > 0.0 && worst < 1e-4,
        format!("min det H = {min_det:.3e}, worst second-derivative residual = {worst:.2e}"),
    )
}

fn long_distance() -> Outcome {
    let tau: f64 = 0.01;
    let r = key_rate_noswitching(&AttackParams::collective(tau, 1.0).unwrap()).unwrap();
    let ratio = r / (tau / 4f64.ln());
    outcome(
        (ratio - 1.0).abs() <= 0.02,
        format!("R/(tau/ln4) = {ratio:.5}"),
    )
}

fn random_physical(rng: &mut ChaCha8Rng) -> AttackParams {
    loop {
        let tau = rng.random_range(0.05..0.95);
        let omega = rng.random_range(1.0..3.0);
        let g = rng.random_range(-omega..omega);
        let gp = rng.random_range(-omega..omega);
        if let Ok(p) = AttackParams::new(tau, omega, g, gp) {
            if check_constraints(&p, true).unwrap() {
                return p;
            }
        }
    }
}

fn asymptotic_validation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..20 {
        let p = random_physical(&mut rng);
        for protocol in [Protocol::NoSwitching, Protocol::Switching] {
            let closed = key_rate(&p, protocol).unwrap();
            let err = |mu: f64| {
                let spec = ProtocolSpec::finite(protocol, mu).unwrap();
                (key_rate_numeric(&p, &spec).unwrap().rate - closed).abs()
            };
            let (e4, e6) = (err(1e4), err(1e6));
            worst = worst.max(e6);
            if !(e6 < 2e-3 && e6 < e4) {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!("40 comparisons, worst |dR| at mu=1e6 = {worst:.2e}, {failures} failures"),
    )
}

fn single_mode_reduction() -> Outcome {
    let mu = 1e6;
    let mut worst: f64 = 0.0;
    for &(tau, omega) in &[(0.44, 1.2), (0.1, 1.0), (0.8, 2.5), (0.6, 1.01)] {
        let p = AttackParams::collective(tau, omega).unwrap();
        let nu_bar = (1.0 + (1.0 - tau) * omega) / tau;
        let spec = conditional_spectrum_noswitching(&p).unwrap();
        for &x in spec.values() {
            worst = worst.max((x - nu_bar).abs());
        }
        // single-mode collective attack, two uses per block
        let h_w = entropy_h(omega).unwrap();
        let h_c = entropy_h(nu_bar).unwrap();
        let chi_single = (0.5 * E * (1.0 - tau) * mu).log2() + h_w - h_c;
        let chi = holevo_noswitching(&p, mu).unwrap();
        worst = worst.max((chi - 2.0 * chi_single).abs() / chi.abs().max(1.0));
        let loss = 1.0 - tau;
        let r_het = (2.0 * tau / (E * loss * (1.0 + tau + loss * omega))).log2() + h_c - h_w;
        worst = worst.max((key_rate_noswitching(&p).unwrap() - r_het).abs());
        let r_hom = 0.5 * (omega / (loss * (tau + loss * omega))).log2() - h_w;
        worst = worst.max((key_rate_switching(&p).unwrap() - r_hom).abs());
    }
    outcome(worst <= 1e-12, format!("worst deviation = {worst:.2e}"))
}

fn gaussian_properties() -> Outcome {
    const CASES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut passed = [0usize; 4];

    for _ in 0..CASES {
        let mu = 1.0 + rng.random_range(0.0f64..6.0).exp();
        let ok = tmsv_cm(mu)
            .and_then(|v| symplectic_spectrum(&v))
            .map(|s| s.values().iter().all(|&x| (x - 1.0).abs() < 1e-9))
            .unwrap_or(false);
        passed[0] += ok as usize;

        let nus = random_nus(&mut rng, 3, 4.0);
        let v = random_state(&mut rng, &nus);
        let (a, b) = (rng.random_range(0..3), rng.random_range(0..2));
        let b = if b >= a { b + 1 } else { b };
        let ok = beamsplitter_apply(&v, a, b, rng.random_range(0.0..=1.0))
            .and_then(|w| Ok((symplectic_spectrum(&v)?, symplectic_spectrum(&w)?)))
            .map(|(s, t)| {
                s.values()
                    .iter()
                    .zip(t.values())
                    .all(|(x, y)| (x - y).abs() <= 1e-9 * x.max(1.0))
            })
            .unwrap_or(false);
        passed[1] += ok as usize;

        let mode = rng.random_range(0..3);
        let quad = if rng.random_bool(0.5) {
            Quadrature::Q
        } else {
            Quadrature::P
        };
        let ok = heterodyne_condition(&v, mode)
            .map(|c| is_physical(&c))
            .unwrap_or(false)
            && homodyne_condition(&v, mode, quad)
                .map(|c| is_physical(&c))
                .unwrap_or(false);
        passed[2] += ok as usize;

        let nus2 = random_nus(&mut rng, 2, 4.0);
        let w = random_state(&mut rng, &nus2);
        let (hi, lo) = two_mode_spectrum(&w);
        let ok = symplectic_spectrum(&w)
            .map(|s| rel(s.values()[0], hi) < 1e-8 && rel(s.values()[1], lo) < 1e-8)
            .unwrap_or(false);
        passed[3] += ok as usize;
    }
    outcome(
        passed.iter().all(|&n| n == CASES),
        format!(
            "purity {}/{CASES}, beam splitter {}/{CASES}, conditioning {}/{CASES}, two-mode closed form {}/{CASES}",
            passed[0], passed[1], passed[2], passed[3]
        ),
    )
}

fn cli_contract() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_gausskey");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .env_remove("GAUSSKEY_THREADS")
            .output()
            .unwrap()
    };
    let scan = [
        "scan",
        "--tau",
        "0.44",
        "--omega",
        "1.2",
        "--grid-resolution",
        "41",
    ];
    let (a, b) = (run(&scan), run(&scan));
    let identical = a.status.success() && a.stdout == b.stdout;
    let text = String::from_utf8_lossy(&a.stdout);
    let header = text.lines().next() == Some("g,g_prime,rate,physical,on_boundary");
    let ok_code = run(&["rate", "--tau", "0.44", "--omega", "1.2"])
        .status
        .code()
        == Some(0);
    let config_code = run(&["rate", "--tau", "abc", "--omega", "1.2"])
        .status
        .code()
        == Some(1);
    let domain_code = run(&[
        "rate", "--tau", "0.44", "--omega", "1.2", "--g", "0.5", "--gprime", "0.5",
    ])
    .status
    .code()
        == Some(2);
    outcome(
        identical && header && ok_code && config_code && domain_code,
        format!(
            "byte-identical {identical}, header {header}, exit 0 {ok_code}, exit 1 {config_code}, exit 2 {domain_code}"
        ),
    )
}

type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Check; 9] = [
        ("zero-rate transmissivity", zero_rate_point),
        ("minimality over grid and boundary", minimality),
        ("no-switching Hessian positivity", hessian_noswitching),
        ("switching Hessian positivity", hessian_switching),
        ("long-distance scaling", long_distance),
        (
            "asymptotic formulas vs finite-mu pipeline",
            asymptotic_validation,
        ),
        ("single-mode reduction", single_mode_reduction),
        ("Gaussian calculus properties", gaussian_properties),
        ("CLI determinism and schema", cli_contract),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        all &= o.passed;
        println!(
            "criterion {} [{}] {name}: {}",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
