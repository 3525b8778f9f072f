//! Command-line front end: configuration, subcommands and CSV/JSON output.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 domain or
//! physicality error.

use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::attack::{uncertainty_residual, AttackParams, BOUNDARY_TOL};
use crate::error::Error;
use crate::landscape::{
    critical_point, verify_minimality, CriticalPointReport, RateSurface, StepOverrides,
};
use crate::rates::{key_rate, key_rate_numeric, rate_report, Protocol, ProtocolSpec, RateReport};

pub const DEFAULT_RESOLUTION: usize = 101;
pub const DEFAULT_MU_SWEEP: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];
pub const THREADS_ENV: &str = "GAUSSKEY_THREADS";

pub const SCAN_HEADER: &str = "g,g_prime,rate,physical,on_boundary";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuSetting {
    Asymptotic,
    Finite(f64),
}

impl FromStr for MuSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "asymptotic" {
            return Ok(MuSetting::Asymptotic);
        }
        let mu: f64 = s
            .parse()
            .map_err(|_| format!("expected a number or 'asymptotic', got '{s}'"))?;
        if !(mu > 1.0) || !mu.is_finite() {
            return Err(format!("modulation must be finite and > 1, got {s}"));
        }
        Ok(MuSetting::Finite(mu))
    }
}

impl Serialize for MuSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MuSetting::Asymptotic => s.serialize_str("asymptotic"),
            MuSetting::Finite(mu) => s.serialize_f64(*mu),
        }
    }
}

/// A configuration problem, reported with exit code 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub location: Option<String>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        Self {
            location: None,
            field: None,
            message: message.into(),
        }
    }

    fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            location: None,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("config error")?;
        if let Some(loc) = &self.location {
            write!(f, " at {loc}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field '{field}'")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Values set in a config file or on the command line; `None` means unset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub protocol: Option<Protocol>,
    pub tau: Option<f64>,
    pub omega: Option<f64>,
    pub g: Option<f64>,
    pub g_prime: Option<f64>,
    pub mu: Option<MuSetting>,
    pub grid_resolution: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub clamp_nonnegative: Option<bool>,
    pub gradient_step: Option<f64>,
    pub hessian_step: Option<f64>,
    pub mu_sweep: Option<Vec<f64>>,
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merge(self, other: Overrides) -> Overrides {
        Overrides {
            protocol: other.protocol.or(self.protocol),
            tau: other.tau.or(self.tau),
            omega: other.omega.or(self.omega),
            g: other.g.or(self.g),
            g_prime: other.g_prime.or(self.g_prime),
            mu: other.mu.or(self.mu),
            grid_resolution: other.grid_resolution.or(self.grid_resolution),
            output: other.output.or(self.output),
            format: other.format.or(self.format),
            clamp_nonnegative: other.clamp_nonnegative.or(self.clamp_nonnegative),
            gradient_step: other.gradient_step.or(self.gradient_step),
            hessian_step: other.hessian_step.or(self.hessian_step),
            mu_sweep: other.mu_sweep.or(self.mu_sweep),
        }
    }
}

fn parse_value<T: FromStr>(field: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| ConfigError::field(field, format!("invalid value '{raw}': {e}")))
}

fn parse_bool(field: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::field(
            field,
            format!("expected true or false, got '{raw}'"),
        )),
    }
}

fn parse_sweep(field: &str, raw: &str) -> Result<Vec<f64>, ConfigError> {
    raw.split(',')
        .map(|s| parse_value::<f64>(field, s.trim()))
        .collect()
}

/// Parses a flat `key = value` file. Blank lines and lines starting with `#`
/// are skipped; unknown and repeated keys are rejected.
pub fn parse_config(text: &str) -> Result<Overrides, ConfigError> {
    let mut out = Overrides::default();
    let mut seen: Vec<String> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let at_line = |mut e: ConfigError| {
            e.location = Some(format!("line {line_no}"));
            e
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            at_line(ConfigError::new(format!(
                "expected key = value, got '{trimmed}'"
            )))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if seen.iter().any(|k| k == key) {
            return Err(at_line(ConfigError::field(key, "repeated key")));
        }
        seen.push(key.to_string());
        let parsed: Result<(), ConfigError> = (|| {
            match key {
                "protocol" => out.protocol = Some(parse_value(key, value)?),
                "tau" => out.tau = Some(parse_value(key, value)?),
                "omega" => out.omega = Some(parse_value(key, value)?),
                "g" => out.g = Some(parse_value(key, value)?),
                "gprime" => out.g_prime = Some(parse_value(key, value)?),
                "mu" => out.mu = Some(parse_value(key, value)?),
                "grid_resolution" => out.grid_resolution = Some(parse_value(key, value)?),
                "output" => out.output = Some(PathBuf::from(value)),
                "format" => out.format = Some(parse_value(key, value)?),
                "clamp_nonnegative" => out.clamp_nonnegative = Some(parse_bool(key, value)?),
                "gradient_step" => out.gradient_step = Some(parse_value(key, value)?),
                "hessian_step" => out.hessian_step = Some(parse_value(key, value)?),
                "mu_sweep" => out.mu_sweep = Some(parse_sweep(key, value)?),
                _ => return Err(ConfigError::field(key, "unknown key")),
            }
            Ok(())
        })();
        parsed.map_err(at_line)?;
    }
    Ok(out)
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub tau: f64,
    pub omega: f64,
    pub g: f64,
    pub g_prime: f64,
    pub mu: MuSetting,
    pub grid_resolution: usize,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
    pub clamp_nonnegative: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hessian_step: Option<f64>,
    #[serde(skip)]
    pub mu_sweep: Vec<f64>,
}

impl RunConfig {
    pub fn resolve(o: Overrides) -> Result<RunConfig, ConfigError> {
        let tau = o
            .tau
            .ok_or_else(|| ConfigError::field("tau", "missing (set --tau or tau = ...)"))?;
        let omega = o
            .omega
            .ok_or_else(|| ConfigError::field("omega", "missing (set --omega or omega = ...)"))?;
        let grid_resolution = o.grid_resolution.unwrap_or(DEFAULT_RESOLUTION);
        if grid_resolution < 2 {
            return Err(ConfigError::field("grid_resolution", "must be at least 2"));
        }
        for (name, step) in [
            ("gradient_step", o.gradient_step),
            ("hessian_step", o.hessian_step),
        ] {
            if let Some(h) = step {
                if !(h > 0.0) || !h.is_finite() {
                    return Err(ConfigError::field(
                        name,
                        format!("must be positive, got {h}"),
                    ));
                }
            }
        }
        let mu_sweep = o.mu_sweep.unwrap_or_else(|| DEFAULT_MU_SWEEP.to_vec());
        if mu_sweep.is_empty() || mu_sweep.iter().any(|&m| !(m > 1.0) || !m.is_finite()) {
            return Err(ConfigError::field(
                "mu_sweep",
                "every entry must be finite and > 1",
            ));
        }
        Ok(RunConfig {
            protocol: o.protocol.unwrap_or(Protocol::NoSwitching),
            tau,
            omega,
            g: o.g.unwrap_or(0.0),
            g_prime: o.g_prime.unwrap_or(0.0),
            mu: o.mu.unwrap_or(MuSetting::Asymptotic),
            grid_resolution,
            output: o.output,
            format: o.format.unwrap_or(Format::Csv),
            clamp_nonnegative: o.clamp_nonnegative.unwrap_or(false),
            gradient_step: o.gradient_step,
            hessian_step: o.hessian_step,
            mu_sweep,
        })
    }

    pub fn params(&self) -> Result<AttackParams, Error> {
        AttackParams::new(self.tau, self.omega, self.g, self.g_prime)
    }

    fn spec(&self) -> ProtocolSpec {
        match self.mu {
            MuSetting::Asymptotic => ProtocolSpec::asymptotic(self.protocol),
            MuSetting::Finite(mu) => ProtocolSpec {
                protocol: self.protocol,
                mu,
                asymptotic: false,
            },
        }
    }

    fn clamp(&self, rate: f64) -> f64 {
        if self.clamp_nonnegative {
            rate.max(0.0)
        } else {
            rate
        }
    }

    fn steps(&self) -> StepOverrides {
        StepOverrides {
            gradient: self.gradient_step,
            hessian: self.hessian_step,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gausskey",
    version,
    about = "CV-QKD key rates under two-mode Gaussian attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    Rate,
    Scan,
    Boundary,
    Critical,
    Converge,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mutual information, Holevo bound, key rate and spectra at one point
    Rate(SharedArgs),
    /// Rate over the physical (g, g') grid plus the boundary
    Scan(SharedArgs),
    /// Rate along the boundary of the physical region
    Boundary(SharedArgs),
    /// Gradient and Hessian at the origin, numeric and closed form
    Critical(SharedArgs),
    /// Finite-modulation rate against the asymptotic rate over a sweep of mu
    Converge(SharedArgs),
}

#[derive(Debug, Clone, Args)]
struct SharedArgs {
    #[arg(long, value_parser = parse_protocol)]
    protocol: Option<Protocol>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gprime: Option<f64>,
    /// A number > 1, or `asymptotic`
    #[arg(long)]
    mu: Option<MuSetting>,
    #[arg(long)]
    grid_resolution: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Flat key = value file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report max(R, 0) instead of R
    #[arg(long)]
    clamp_nonnegative: bool,
    #[arg(long)]
    gradient_step: Option<f64>,
    #[arg(long)]
    hessian_step: Option<f64>,
    /// Comma-separated list of mu values for `converge`
    #[arg(long, value_delimiter = ',')]
    mu_sweep: Option<Vec<f64>>,
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse::<Protocol>().map_err(|e| e.to_string())
}

impl SharedArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            protocol: self.protocol,
            tau: self.tau,
            omega: self.omega,
            g: self.g,
            g_prime: self.gprime,
            mu: self.mu,
            grid_resolution: self.grid_resolution,
            output: self.output.clone(),
            format: self.format,
            clamp_nonnegative: self.clamp_nonnegative.then_some(true),
            gradient_step: self.gradient_step,
            hessian_step: self.hessian_step,
            mu_sweep: self.mu_sweep.clone(),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Domain(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Domain(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub g: f64,
    pub g_prime: f64,
    pub rate: f64,
    pub physical: bool,
    pub on_boundary: bool,
}

#[derive(Serialize)]
struct ScanDocument<'a> {
    params: &'a RunConfig,
    rows: &'a [ScanRow],
    origin_rate: f64,
    verdict: bool,
}

fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(SCAN_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(r.g),
            fmt_f64(r.g_prime),
            fmt_f64(r.rate),
            r.physical,
            r.on_boundary
        );
    }
    s
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn spectrum_field(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(";")
}

fn cmd_rate(cfg: &RunConfig) -> Result<String, CliError> {
    let p = cfg.params()?;
    let mut report: RateReport = rate_report(&p, &cfg.spec())?;
    report.rate = cfg.clamp(report.rate);
    match cfg.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut s = String::from(
                "protocol,tau,omega,g,g_prime,mu,asymptotic,mutual_information,holevo,rate,total_spectrum,conditional_spectra\n",
            );
            let conditional = report
                .conditional_spectra
                .iter()
                .map(|sp| spectrum_field(sp.values()))
                .collect::<Vec<_>>()
                .join("|");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                report.protocol,
                fmt_f64(p.tau),
                fmt_f64(p.omega),
                fmt_f64(p.g),
                fmt_f64(p.g_prime),
                fmt_f64(report.mu),
                report.asymptotic,
                fmt_f64(report.mutual_information),
                fmt_f64(report.holevo),
                fmt_f64(report.rate),
                spectrum_field(report.total_spectrum.values()),
                conditional
            );
            Ok(s)
        }
    }
}

fn require_asymptotic(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    if let MuSetting::Finite(_) = cfg.mu {
        return Err(ConfigError::field(
            "mu",
            format!("{command} uses the asymptotic rates; finite mu applies to rate and converge"),
        )
        .into());
    }
    Ok(())
}

fn on_boundary(omega: f64, g: f64, g_prime: f64) -> bool {
    uncertainty_residual(omega, g, g_prime).abs() <= BOUNDARY_TOL
}

fn render_rows(
    cfg: &RunConfig,
    rows: &[ScanRow],
    origin_rate: f64,
    verdict: bool,
) -> Result<String, CliError> {
    match cfg.format {
        Format::Csv => Ok(scan_csv(rows)),
        Format::Json => to_json(&ScanDocument {
            params: cfg,
            rows,
            origin_rate: cfg.clamp(origin_rate),
            verdict,
        }),
    }
}

fn cmd_scan(cfg: &RunConfig, boundary_only: bool) -> Result<String, CliError> {
    require_asymptotic(cfg, if boundary_only { "boundary" } else { "scan" })?;
    let report = verify_minimality(cfg.protocol, cfg.tau, cfg.omega, cfg.grid_resolution)?;
    let row = |p: &crate::landscape::RatePoint| ScanRow {
        g: p.g,
        g_prime: p.g_prime,
        rate: cfg.clamp(p.rate),
        physical: true,
        on_boundary: on_boundary(cfg.omega, p.g, p.g_prime),
    };
    let mut rows: Vec<ScanRow> = report.boundary_rates.iter().map(row).collect();
    let origin_rate = report.origin_rate;
    let verdict = if boundary_only {
        report.boundary_rates.iter().all(|p| p.rate > origin_rate)
    } else {
        rows.extend(report.grid_rates.iter().map(row));
        rows.sort_by(|a, b| a.g.total_cmp(&b.g).then(a.g_prime.total_cmp(&b.g_prime)));
        report.verdict
    };
    render_rows(cfg, &rows, origin_rate, verdict)
}

fn cmd_critical(cfg: &RunConfig) -> Result<String, CliError> {
    require_asymptotic(cfg, "critical")?;
    if !(cfg.omega > 1.0) {
        return Err(Error::EmptyRegion(cfg.omega).into());
    }
    let surface = RateSurface::new(cfg.protocol, cfg.tau, cfg.omega)?;
    let r: CriticalPointReport = critical_point(&surface, cfg.steps())?;
    match cfg.format {
        Format::Json => to_json(&r),
        Format::Csv => {
            let mut s = String::from(
                "protocol,tau,omega,grad_g,grad_gprime,h_gg,h_ggprime,h_gprimegprime,analytic_h_gg,analytic_h_ggprime,det_h,analytic_det_h,det_residual,is_minimum\n",
            );
            let h = r.hessian_at_origin;
            let a = r.analytic_hessian;
            let cols = [
                r.tau,
                r.omega,
                r.gradient_at_origin.0,
                r.gradient_at_origin.1,
                h[0][0],
                h[0][1],
                h[1][1],
                a[0][0],
                a[0][1],
                r.det_h,
                r.analytic_det_h,
                r.det_residual,
            ];
            let joined: Vec<String> = cols.iter().map(|&x| fmt_f64(x)).collect();
            let _ = writeln!(s, "{},{},{}", r.protocol, joined.join(","), r.is_minimum);
            Ok(s)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub mu: f64,
    pub rate_numeric: f64,
    pub rate_asymptotic: f64,
    pub abs_delta: f64,
}

#[derive(Serialize)]
struct ConvergenceDocument<'a> {
    params: &'a RunConfig,
    rows: &'a [ConvergenceRow],
    monotone: bool,
}

pub fn convergence_rows(
    p: &AttackParams,
    protocol: Protocol,
    sweep: &[f64],
) -> Result<Vec<ConvergenceRow>, Error> {
    let asymptotic = key_rate(p, protocol)?;
    sweep
        .iter()
        .map(|&mu| {
            let numeric = key_rate_numeric(p, &ProtocolSpec::finite(protocol, mu)?)?.rate;
            Ok(ConvergenceRow {
                mu,
                rate_numeric: numeric,
                rate_asymptotic: asymptotic,
                abs_delta: (numeric - asymptotic).abs(),
            })
        })
        .collect()
}

fn cmd_converge(cfg: &RunConfig) -> Result<String, CliError> {
    let p = cfg.params()?;
    let rows = convergence_rows(&p, cfg.protocol, &cfg.mu_sweep)?;
    let monotone = rows.windows(2).all(|w| w[1].abs_delta < w[0].abs_delta);
    match cfg.format {
        Format::Json => to_json(&ConvergenceDocument {
            params: cfg,
            rows: &rows,
            monotone,
        }),
        Format::Csv => {
            let mut s = String::from("mu,rate_numeric,rate_asymptotic,abs_delta\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    fmt_f64(r.mu),
                    fmt_f64(r.rate_numeric),
                    fmt_f64(r.rate_asymptotic),
                    fmt_f64(r.abs_delta)
                );
            }
            Ok(s)
        }
    }
}

fn read_config(path: &Path) -> Result<Overrides, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|mut e| {
        e.location = Some(match e.location {
            Some(loc) => format!("{}:{}", path.display(), loc.trim_start_matches("line ")),
            None => path.display().to_string(),
        });
        e
    })
}

/// Applies `GAUSSKEY_THREADS` to the global rayon pool.
pub fn configure_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        ConfigError::field(
            THREADS_ENV,
            format!("expected a positive integer, got '{raw}'"),
        )
    })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn execute(kind: CommandKind, args: &SharedArgs) -> Result<(String, Option<PathBuf>), CliError> {
    configure_threads()?;
    let base = match &args.config {
        Some(path) => read_config(path)?,
        None => Overrides::default(),
    };
    let cfg = RunConfig::resolve(base.merge(args.overrides()))?;
    let text = match kind {
        CommandKind::Rate => cmd_rate(&cfg)?,
        CommandKind::Scan => cmd_scan(&cfg, false)?,
        CommandKind::Boundary => cmd_scan(&cfg, true)?,
        CommandKind::Critical => cmd_critical(&cfg)?,
        CommandKind::Converge => cmd_converge(&cfg)?,
    };
    Ok((text, cfg.output))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    1
                }
            };
        }
    };
    let (kind, args) = match &cli.command {
        Command::Rate(a) => (CommandKind::Rate, a),
        Command::Scan(a) => (CommandKind::Scan, a),
        Command::Boundary(a) => (CommandKind::Boundary, a),
        Command::Critical(a) => (CommandKind::Critical, a),
        Command::Converge(a) => (CommandKind::Converge, a),
    };
    let result = execute(kind, args).and_then(|(text, output)| match output {
        Some(path) => std::fs::write(&path, text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
