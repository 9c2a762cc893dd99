//! `qkdfk` — finite-key bound evaluation, curve generation, session
//! simulation and session-log audits from the command line.
//!
//! Exit codes: 0 success, 2 violated precondition or flag misuse, 3
//! unparseable session log, 1 other I/O failure. Security findings in an
//! audit are data, not process failures: an audit that finds uncovered
//! records still exits 0.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use qkdfk_core::epsilon::{
    log_spaced, optimize_epsilons_with_mode, DEFAULT_TOLERANCE,
};
use qkdfk_core::keyrate::{
    asymptotic_key_bound, detection_prob, finite_key_bound_with_mode, multi_photon_prob,
    single_photon_fraction, BoundBreakdown, BoundMode, ChannelParams, SecurityEpsilons,
};
use qkdfk_core::sim::{
    run_campaign, AttackSchedule, Firmware as SimFirmware, SubtractionPolicy, SystemConfig,
};
use qkdfk_core::audit::summary_text;
use qkdfk_core::{audit, load_session_log_path, write_report, write_session_log};

#[derive(Parser)]
#[command(
    name = "qkdfk",
    version,
    about = "Finite-key security analysis for plug-and-play BB84 systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the finite-size and asymptotic secret-key bounds once.
    Bound(BoundArgs),
    /// Write bound-versus-n curves for one or more total security parameters.
    Curve(CurveArgs),
    /// Run a seeded campaign of key-exchange sessions and write its log.
    Simulate(SimulateArgs),
    /// Audit a session log against the bounds and write report files.
    Audit(AuditArgs),
}

#[derive(Args)]
struct BoundArgs {
    /// Sifted-key length in bits (plain or scientific, e.g. 4e6).
    #[arg(long, value_parser = parse_bits)]
    n: u64,
    /// Observed error rate.
    #[arg(long)]
    error: f64,
    /// Single-photon fraction, given directly. Conflicts with the channel
    /// flags below, which derive it from the channel model instead.
    #[arg(long, conflicts_with_all = ["mu", "loss", "eta_det", "p_dark"])]
    a: Option<f64>,
    /// Mean photon number per pulse.
    #[arg(long)]
    mu: Option<f64>,
    /// Line loss in dB.
    #[arg(long)]
    loss: Option<f64>,
    /// Detector efficiency.
    #[arg(long = "eta-det")]
    eta_det: Option<f64>,
    /// Per-gate dark-count probability per detector.
    #[arg(long = "p-dark")]
    p_dark: Option<f64>,
    /// Error-correction efficiency factor.
    #[arg(long = "f-ec")]
    f_ec: f64,
    /// Total security parameter, split evenly unless --optimize.
    #[arg(long)]
    epsilon: f64,
    /// Search for the split of epsilon that maximizes the bound.
    #[arg(long)]
    optimize: bool,
    /// Stricter leakage accounting: leak scaled by A and log2(8/eps_ec).
    #[arg(long = "strict-eq4")]
    strict_eq4: bool,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    loss: f64,
    #[arg(long)]
    error: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long = "eta-det")]
    eta_det: f64,
    #[arg(long = "p-dark")]
    p_dark: f64,
    #[arg(long = "f-ec")]
    f_ec: f64,
    /// Comma-separated totals, e.g. 1e-10,1e-1.
    #[arg(long = "eps-list", value_delimiter = ',', required = true)]
    eps_list: Vec<f64>,
    #[arg(long = "n-min", value_parser = parse_bits)]
    n_min: u64,
    #[arg(long = "n-max", value_parser = parse_bits)]
    n_max: u64,
    /// Number of log-spaced samples per curve.
    #[arg(long)]
    points: usize,
    /// Output CSV path (long format: eps,n,l).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Firmware {
    Legacy,
    Patched,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    loss: f64,
    /// True channel error rate.
    #[arg(long)]
    error: f64,
    #[arg(long, value_enum)]
    firmware: Firmware,
    /// Interruption times: a comma list (10,40,90) or a range a:b:step.
    #[arg(long, value_parser = parse_taus)]
    taus: Option<TauSpec>,
    /// Number of undisturbed sessions when --taus is absent.
    #[arg(long, default_value_t = 8)]
    sessions: usize,
    /// Campaign seed; falls back to QKDFK_SEED, then 0.
    #[arg(long, env = "QKDFK_SEED", default_value_t = 0)]
    seed: u64,
    /// Output session-log CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    mu: f64,
    #[arg(long = "eta-det", default_value_t = 0.9)]
    eta_det: f64,
    #[arg(long = "p-dark", default_value_t = 2e-5)]
    p_dark: f64,
    #[arg(long = "f-ec", default_value_t = 1.2)]
    f_ec: f64,
    /// Raw bits per second at the 2 dB reference loss.
    #[arg(long = "pulse-rate")]
    pulse_rate: Option<f64>,
    /// Legacy minimum raw key to distill.
    #[arg(long = "raw-min", value_parser = parse_bits)]
    raw_min: Option<u64>,
    /// Raw-key buffer cap; defaults to the loss-dependent map.
    #[arg(long = "buffer-limit", value_parser = parse_bits)]
    buffer_limit: Option<u64>,
    #[arg(long = "detection-threshold")]
    detection_threshold: Option<f64>,
    /// Patched-firmware sifted accumulation threshold.
    #[arg(long = "patched-threshold", value_parser = parse_bits)]
    patched_threshold: Option<u64>,
    /// Post-processing subtraction fraction.
    #[arg(long = "subtract-fraction")]
    subtract_fraction: Option<f64>,
    /// Post-processing subtraction offset in bits.
    #[arg(long = "subtract-offset", value_parser = parse_bits)]
    subtract_offset: Option<u64>,
    /// Attenuation imposed at tau.
    #[arg(long = "attack-loss", default_value_t = 40.0)]
    attack_loss: f64,
    /// Poisson rate of natural drift terminations (events per second).
    #[arg(long = "drift-rate")]
    drift_rate: Option<f64>,
}

#[derive(Args)]
struct AuditArgs {
    /// Session-log CSV to audit.
    #[arg(long)]
    log: PathBuf,
    /// Total security parameter of the audit.
    #[arg(long)]
    epsilon: f64,
    /// Audit mean photon number (per-record values take precedence).
    #[arg(long, default_value_t = 0.2)]
    mu: f64,
    #[arg(long = "eta-det", default_value_t = 0.9)]
    eta_det: f64,
    #[arg(long = "p-dark", default_value_t = 2e-5)]
    p_dark: f64,
    #[arg(long = "f-ec", default_value_t = 1.2)]
    f_ec: f64,
    /// Use each record's disclosed_bits/n as the leakage instead of
    /// f_ec * h(E).
    #[arg(long = "measured-leak")]
    measured_leak: bool,
    /// Directory for verdicts.csv, curve.csv and summary.txt.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Clone)]
enum TauSpec {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

fn parse_bits(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s
        .parse()
        .map_err(|_| format!("`{s}` is not a bit count"))?;
    if f.is_finite() && f >= 0.0 && f < u64::MAX as f64 {
        Ok(f.round() as u64)
    } else {
        Err(format!("`{s}` is not a representable bit count"))
    }
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{part}` is not a number"))
        })
        .collect()
}

fn parse_taus(s: &str) -> Result<TauSpec, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range spec must be start:stop:step, got `{s}`"));
        }
        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
        let nums = nums.map_err(|_| format!("range spec `{s}` has non-numeric parts"))?;
        if nums[2] <= 0.0 || nums[1] < nums[0] {
            return Err(format!("range spec `{s}` must satisfy start <= stop, step > 0"));
        }
        Ok(TauSpec::Range {
            start: nums[0],
            stop: nums[1],
            step: nums[2],
        })
    } else {
        parse_f64_list(s).map(TauSpec::List)
    }
}

enum AppError {
    Domain(qkdfk_core::DomainError),
    Log(qkdfk_core::LogError),
    Io(std::io::Error, PathBuf),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Domain(_) => 2,
            AppError::Log(_) => 3,
            AppError::Io(..) => 1,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Domain(e) => write!(f, "{e}"),
            AppError::Log(e) => write!(f, "{e}"),
            AppError::Io(e, path) => write!(f, "{}: {e}", path.display()),
        }
    }
}

impl From<qkdfk_core::DomainError> for AppError {
    fn from(e: qkdfk_core::DomainError) -> Self {
        AppError::Domain(e)
    }
}

impl From<qkdfk_core::LogError> for AppError {
    fn from(e: qkdfk_core::LogError) -> Self {
        AppError::Log(e)
    }
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |e| AppError::Io(e, path.to_path_buf())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bound(args) => cmd_bound(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Audit(args) => cmd_audit(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

/// Single-photon fraction from the channel model.
fn a_from_channel(channel: &ChannelParams) -> Result<f64, qkdfk_core::DomainError> {
    single_photon_fraction(detection_prob(channel), multi_photon_prob(channel.mu())?)
}

fn cmd_bound(args: BoundArgs) -> Result<(), AppError> {
    let mode = if args.strict_eq4 {
        BoundMode::Strict
    } else {
        BoundMode::Standard
    };

    let a = match args.a {
        Some(a) => a,
        None => match (args.mu, args.loss, args.eta_det, args.p_dark) {
            (Some(mu), Some(loss), Some(eta), Some(dark)) => {
                let channel = ChannelParams::new(loss, mu, eta, dark, args.f_ec)?;
                a_from_channel(&channel)?
            }
            _ => {
                return Err(AppError::Domain(qkdfk_core::DomainError::new(
                    "a",
                    f64::NAN,
                    "either --a or all of --mu --loss --eta-det --p-dark",
                )))
            }
        },
    };

    let (breakdown, eps) = if args.optimize {
        let r = optimize_epsilons_with_mode(
            args.n,
            args.error,
            a,
            args.f_ec,
            args.epsilon,
            DEFAULT_TOLERANCE,
            mode,
        )?;
        (r.best_bound, r.best_eps)
    } else {
        let eps = SecurityEpsilons::equal_split(args.epsilon)?;
        (
            finite_key_bound_with_mode(args.n, args.error, a, args.f_ec, &eps, mode)?,
            eps,
        )
    };

    print!("{}", render_breakdown(&breakdown, &eps));
    Ok(())
}

fn render_breakdown(b: &BoundBreakdown, eps: &SecurityEpsilons) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n_sifted: {}", b.n_sifted);
    let _ = writeln!(out, "a_fraction: {}", b.a_fraction);
    let _ = writeln!(out, "e_observed: {}", b.e_observed);
    let _ = writeln!(out, "e_tilde: {}", b.e_tilde);
    let _ = writeln!(out, "term_entropy: {}", b.term_entropy);
    let _ = writeln!(out, "term_leak: {}", b.term_leak);
    let _ = writeln!(out, "term_smoothing: {}", b.term_smoothing);
    let _ = writeln!(out, "term_pa: {}", b.term_pa);
    let _ = writeln!(out, "term_ec: {}", b.term_ec);
    let _ = writeln!(out, "l_finite: {}", b.l_finite);
    let _ = writeln!(out, "l_asymptotic: {}", b.l_asymptotic);
    let _ = writeln!(out, "aborted: {}", b.aborted);
    let _ = writeln!(
        out,
        "eps_split: pe={:e} smooth={:e} pa={:e} ec={:e}",
        eps.eps_pe(),
        eps.eps_smooth(),
        eps.eps_pa(),
        eps.eps_ec()
    );
    let _ = writeln!(
        out,
        "# n,a_fraction,e_observed,e_tilde,term_entropy,term_leak,term_smoothing,term_pa,term_ec,l_finite,l_asymptotic,aborted"
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        b.n_sifted,
        b.a_fraction,
        b.e_observed,
        b.e_tilde,
        b.term_entropy,
        b.term_leak,
        b.term_smoothing,
        b.term_pa,
        b.term_ec,
        b.l_finite,
        b.l_asymptotic,
        b.aborted
    );
    out
}

fn cmd_curve(args: CurveArgs) -> Result<(), AppError> {
    if args.n_min < 1 || args.n_max < args.n_min {
        return Err(AppError::Domain(qkdfk_core::DomainError::new(
            "n_min",
            args.n_min as f64,
            "1 <= n_min <= n_max",
        )));
    }
    if args.points < 1 {
        return Err(AppError::Domain(qkdfk_core::DomainError::new(
            "points",
            args.points as f64,
            "points >= 1",
        )));
    }
    if args.eps_list.is_empty() {
        return Err(AppError::Domain(qkdfk_core::DomainError::new(
            "eps_list",
            0.0,
            "at least one epsilon",
        )));
    }
    let channel = ChannelParams::new(args.loss, args.mu, args.eta_det, args.p_dark, args.f_ec)?;
    let a = a_from_channel(&channel)?;
    let ns = log_spaced(args.n_min, args.n_max, args.points);

    // Everything is computed before the output file is opened, so a domain
    // failure leaves no partial file behind.
    let mut body = String::from("eps,n,l\n");
    for &eps_total in &args.eps_list {
        for point in qkdfk_core::bound_curve(&ns, args.error, a, args.f_ec, eps_total) {
            let point = point?;
            let _ = writeln!(body, "{:e},{},{:.3}", eps_total, point.n, point.l_finite);
        }
    }
    for &n in &ns {
        let l = asymptotic_key_bound(n, args.error, a, args.f_ec)?;
        let _ = writeln!(body, "asymptotic,{n},{l:.3}");
    }

    std::fs::write(&args.out, body).map_err(io_at(&args.out))?;
    println!("wrote {} curves over {} samples to {}", args.eps_list.len() + 1, ns.len(), args.out.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), AppError> {
    let channel = ChannelParams::new(args.loss, args.mu, args.eta_det, args.p_dark, args.f_ec)?;
    let mut config = SystemConfig::new(channel, args.error);
    config.firmware = match args.firmware {
        Firmware::Legacy => SimFirmware::Legacy,
        Firmware::Patched => SimFirmware::Patched,
    };
    if let Some(rate) = args.pulse_rate {
        config.pulse_rate = rate;
    }
    if let Some(min) = args.raw_min {
        config.raw_min_bits = min;
    }
    config.buffer_limit_bits = args.buffer_limit.or(config.buffer_limit_bits);
    if let Some(thr) = args.detection_threshold {
        config.detection_threshold = thr;
    }
    if let Some(thr) = args.patched_threshold {
        config.patched_sifted_threshold_bits = thr;
    }
    let default_sub = SubtractionPolicy::default();
    config.legacy_subtraction = SubtractionPolicy {
        fraction: args.subtract_fraction.unwrap_or(default_sub.fraction),
        offset_bits: args.subtract_offset.unwrap_or(default_sub.offset_bits),
    };
    config.drift_rate = args.drift_rate;

    let attacks: Vec<AttackSchedule> = match &args.taus {
        Some(TauSpec::List(taus)) => taus
            .iter()
            .map(|&tau| AttackSchedule {
                tau_s: Some(tau),
                attack_loss_db: args.attack_loss,
            })
            .collect(),
        Some(TauSpec::Range { start, stop, step }) => {
            let mut out = Vec::new();
            let mut tau = *start;
            while tau <= stop + 1e-9 {
                out.push(AttackSchedule {
                    tau_s: Some(tau),
                    attack_loss_db: args.attack_loss,
                });
                tau += step;
            }
            out
        }
        None => vec![
            AttackSchedule {
                tau_s: None,
                attack_loss_db: args.attack_loss,
            };
            args.sessions
        ],
    };

    let records = run_campaign(&config, &attacks, args.seed)?;

    let mut buf = Vec::new();
    write_session_log(&records, &mut buf).map_err(io_at(&args.out))?;
    std::fs::write(&args.out, buf).map_err(io_at(&args.out))?;
    println!(
        "wrote {} records from {} sessions to {}",
        records.len(),
        attacks.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_audit(args: AuditArgs) -> Result<(), AppError> {
    let records = load_session_log_path(&args.log)?;
    let channel = ChannelParams::new(0.0, args.mu, args.eta_det, args.p_dark, args.f_ec)?;
    let report = audit(&records, args.epsilon, &channel, args.measured_leak)?;
    write_report(&report, &args.out_dir).map_err(io_at(&args.out_dir))?;
    print!("{}", summary_text(&report));
    Ok(())
}
