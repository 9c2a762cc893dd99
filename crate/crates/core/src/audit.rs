//! Classifying distilled-key records against the finite-size bound.
//!
//! The pipeline ingests session logs (CSV), computes a split-optimized
//! finite bound and the asymptotic bound per record at a chosen total
//! security parameter, and classifies each record:
//!
//! * `covered` — the reported secret length fits under the finite bound;
//! * `not_covered` — it exceeds the finite bound, so its security is not
//!   established by the finite-size analysis;
//! * `asymptotic_violation` — it exceeds even the asymptotic bound;
//! * `aborted` — the bound is vacuous for the record's parameters.
//!
//! Verdicts use each record's own error rate; the plot-ready curve uses the
//! campaign-average error rate, sampled at 64 log-spaced sifted lengths
//! spanning the record range.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::epsilon::{
    bound_curve_from_leak, log_spaced, optimize_epsilons_from_leak, CurvePoint, DEFAULT_TOLERANCE,
};
use crate::error::DomainError;
use crate::keyrate::{
    asymptotic_key_bound_from_leak, detection_prob, leak_ec_fraction, multi_photon_prob,
    single_photon_fraction, ChannelParams,
};
use crate::sim::{SessionRecord, TerminationCause};

/// Number of samples in the plot-ready curve.
const CURVE_SAMPLES: usize = 64;

/// Session-log CSV header, fixed column order.
pub const SESSION_LOG_HEADER: [&str; 8] = [
    "session_id",
    "sifted_bits",
    "qber",
    "disclosed_bits",
    "secret_bits",
    "loss_db",
    "mu",
    "terminated_by",
];

/// A session log could not be parsed or violated a record invariant.
#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error reading session log: {0}")]
    Io(#[from] io::Error),
    #[error("session log line {line}: {message}")]
    Schema { line: u64, message: String },
}

/// Classification of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Covered,
    NotCovered,
    AsymptoticViolation,
    Aborted,
}

impl VerdictStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictStatus::Covered => "covered",
            VerdictStatus::NotCovered => "not_covered",
            VerdictStatus::AsymptoticViolation => "asymptotic_violation",
            VerdictStatus::Aborted => "aborted",
        }
    }
}

/// One record's bounds and classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub session_id: u64,
    /// The record's sifted length.
    pub n: u64,
    pub secret_bits: u64,
    /// Split-optimized finite bound at the audit's total epsilon.
    pub l_finite_bound: f64,
    pub l_asymptotic_bound: f64,
    pub status: VerdictStatus,
}

/// Counts per status. `fraction_not_covered` counts both `not_covered` and
/// `asymptotic_violation` records (the latter are a fortiori uncovered).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuditSummary {
    pub records: usize,
    pub covered: usize,
    pub not_covered: usize,
    pub asymptotic_violation: usize,
    pub aborted: usize,
    pub fraction_not_covered: f64,
}

/// Everything an audit produced.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub eps_total: f64,
    pub verdicts: Vec<Verdict>,
    pub summary: AuditSummary,
    /// Plot-ready curve at the campaign-average error rate.
    pub curve: Vec<CurvePoint>,
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub verdicts_csv: PathBuf,
    pub curve_csv: PathBuf,
    pub summary_txt: PathBuf,
}

/// Parses a session log from any reader.
///
/// The schema is one header row and comma-separated UTF-8 data rows with
/// '.' decimals (see [`SESSION_LOG_HEADER`]). The first malformed or
/// invariant-violating row fails the load with its line number.
pub fn load_session_log<R: Read>(reader: R) -> Result<Vec<SessionRecord>, LogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    {
        let headers = rdr.headers().map_err(csv_error)?;
        let got: Vec<&str> = headers.iter().collect();
        if got != SESSION_LOG_HEADER {
            return Err(LogError::Schema {
                line: 1,
                message: format!(
                    "header must be `{}`, got `{}`",
                    SESSION_LOG_HEADER.join(","),
                    got.join(",")
                ),
            });
        }
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |idx: usize| -> &str { row.get(idx).unwrap_or("") };

        let session_id = parse_u64(field(0), "session_id", line)?;
        let sifted_bits = parse_u64(field(1), "sifted_bits", line)?;
        let qber = parse_f64(field(2), "qber", line)?;
        let disclosed_bits = parse_u64(field(3), "disclosed_bits", line)?;
        let secret_bits = parse_u64(field(4), "secret_bits", line)?;
        let loss_db = parse_f64(field(5), "loss_db", line)?;
        let mu = parse_f64(field(6), "mu", line)?;
        let terminated_by = TerminationCause::from_token(field(7)).ok_or_else(|| {
            LogError::Schema {
                line,
                message: format!(
                    "terminated_by must be one of eve_attack|natural_drift|buffer_full, got `{}`",
                    field(7)
                ),
            }
        })?;

        if !(0.0..0.5).contains(&qber) {
            return Err(LogError::Schema {
                line,
                message: format!("qber = {qber} violates `0 <= qber < 1/2`"),
            });
        }
        if loss_db.is_nan() || loss_db < 0.0 {
            return Err(LogError::Schema {
                line,
                message: format!("loss_db = {loss_db} violates `loss_db >= 0`"),
            });
        }
        if mu.is_nan() || mu <= 0.0 {
            return Err(LogError::Schema {
                line,
                message: format!("mu = {mu} violates `mu > 0`"),
            });
        }

        records.push(SessionRecord {
            session_id,
            sifted_bits,
            qber,
            disclosed_bits,
            secret_bits,
            loss_db,
            mu,
            terminated_by,
        });
    }
    Ok(records)
}

/// [`load_session_log`] from a file path.
pub fn load_session_log_path(path: &Path) -> Result<Vec<SessionRecord>, LogError> {
    load_session_log(File::open(path)?)
}

fn csv_error(err: csv::Error) -> LogError {
    let line = err.position().map_or(0, |p| p.line());
    match err.kind() {
        csv::ErrorKind::Io(_) => {
            LogError::Io(io::Error::other(err.to_string()))
        }
        _ => LogError::Schema {
            line,
            message: err.to_string(),
        },
    }
}

fn parse_u64(s: &str, name: &str, line: u64) -> Result<u64, LogError> {
    s.parse::<u64>().map_err(|_| LogError::Schema {
        line,
        message: format!("field `{name}`: `{s}` is not a non-negative integer"),
    })
}

fn parse_f64(s: &str, name: &str, line: u64) -> Result<f64, LogError> {
    s.parse::<f64>().map_err(|_| LogError::Schema {
        line,
        message: format!("field `{name}`: `{s}` is not a number"),
    })
}

/// Writes records in the session-log CSV schema. Float fields use the
/// shortest representation that parses back to the same value, so a write
/// followed by [`load_session_log`] is lossless.
pub fn write_session_log<W: Write>(records: &[SessionRecord], mut writer: W) -> io::Result<()> {
    writeln!(writer, "{}", SESSION_LOG_HEADER.join(","))?;
    for r in records {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{}",
            r.session_id,
            r.sifted_bits,
            r.qber,
            r.disclosed_bits,
            r.secret_bits,
            r.loss_db,
            r.mu,
            r.terminated_by.as_str()
        )?;
    }
    Ok(())
}

/// Single-photon fraction for a record's channel context plus the audit's
/// detector constants.
fn record_a_fraction(
    loss_db: f64,
    mu: f64,
    detector: &ChannelParams,
) -> Result<f64, DomainError> {
    let ch = ChannelParams::new(
        loss_db,
        mu,
        detector.eta_det(),
        detector.p_dark(),
        detector.f_ec(),
    )?;
    single_photon_fraction(detection_prob(&ch), multi_photon_prob(mu)?)
}

fn verdict_for(
    rec: &SessionRecord,
    eps_total: f64,
    channel: &ChannelParams,
    use_measured_leak: bool,
) -> Result<Verdict, DomainError> {
    if rec.sifted_bits == 0 {
        // No sample, no bound: vacuous.
        return Ok(Verdict {
            session_id: rec.session_id,
            n: 0,
            secret_bits: rec.secret_bits,
            l_finite_bound: 0.0,
            l_asymptotic_bound: 0.0,
            status: VerdictStatus::Aborted,
        });
    }
    let a = record_a_fraction(rec.loss_db, rec.mu, channel)?;
    let leak = if use_measured_leak {
        rec.disclosed_bits as f64 / rec.sifted_bits as f64
    } else {
        leak_ec_fraction(rec.qber, channel.f_ec())?
    };
    let opt = optimize_epsilons_from_leak(
        rec.sifted_bits,
        rec.qber,
        a,
        leak,
        eps_total,
        DEFAULT_TOLERANCE,
    )?;
    let l_finite = opt.best_bound.l_finite;
    let l_asymptotic = asymptotic_key_bound_from_leak(rec.sifted_bits, rec.qber, a, leak)?;
    let secret = rec.secret_bits as f64;

    let status = if opt.best_bound.aborted {
        VerdictStatus::Aborted
    } else if secret > l_asymptotic {
        VerdictStatus::AsymptoticViolation
    } else if secret > l_finite {
        VerdictStatus::NotCovered
    } else {
        VerdictStatus::Covered
    };

    Ok(Verdict {
        session_id: rec.session_id,
        n: rec.sifted_bits,
        secret_bits: rec.secret_bits,
        l_finite_bound: l_finite,
        l_asymptotic_bound: l_asymptotic,
        status,
    })
}

/// Audits records against the finite-size analysis at total security
/// parameter `eps_total`.
///
/// `channel` supplies the detector constants (`eta_det`, `p_dark`) and the
/// error-correction model `f_ec`; per-record loss and mean photon number
/// come from the records themselves. With `use_measured_leak` the leakage
/// is each record's `disclosed_bits / n` instead of `f_ec * h(E)`.
pub fn audit(
    records: &[SessionRecord],
    eps_total: f64,
    channel: &ChannelParams,
    use_measured_leak: bool,
) -> Result<AuditReport, DomainError> {
    let mut verdicts = Vec::with_capacity(records.len());
    for rec in records {
        verdicts.push(verdict_for(rec, eps_total, channel, use_measured_leak)?);
    }
    verdicts.sort_by_key(|v| v.session_id);

    let mut summary = AuditSummary {
        records: verdicts.len(),
        ..AuditSummary::default()
    };
    for v in &verdicts {
        match v.status {
            VerdictStatus::Covered => summary.covered += 1,
            VerdictStatus::NotCovered => summary.not_covered += 1,
            VerdictStatus::AsymptoticViolation => summary.asymptotic_violation += 1,
            VerdictStatus::Aborted => summary.aborted += 1,
        }
    }
    if summary.records > 0 {
        summary.fraction_not_covered =
            (summary.not_covered + summary.asymptotic_violation) as f64 / summary.records as f64;
    }

    let curve = audit_curve(records, eps_total, channel, use_measured_leak)?;

    Ok(AuditReport {
        eps_total,
        verdicts,
        summary,
        curve,
    })
}

/// The plot-ready curve: campaign-average error rate and channel context,
/// 64 log-spaced sifted lengths spanning the record range.
fn audit_curve(
    records: &[SessionRecord],
    eps_total: f64,
    channel: &ChannelParams,
    use_measured_leak: bool,
) -> Result<Vec<CurvePoint>, DomainError> {
    let with_n: Vec<&SessionRecord> = records.iter().filter(|r| r.sifted_bits > 0).collect();
    if with_n.is_empty() {
        return Ok(Vec::new());
    }
    let count = with_n.len() as f64;
    let e_avg = with_n.iter().map(|r| r.qber).sum::<f64>() / count;
    let loss_avg = with_n.iter().map(|r| r.loss_db).sum::<f64>() / count;
    let mu_avg = with_n.iter().map(|r| r.mu).sum::<f64>() / count;
    let a = record_a_fraction(loss_avg, mu_avg, channel)?;
    let leak = if use_measured_leak {
        with_n
            .iter()
            .map(|r| r.disclosed_bits as f64 / r.sifted_bits as f64)
            .sum::<f64>()
            / count
    } else {
        leak_ec_fraction(e_avg, channel.f_ec())?
    };

    let n_min = with_n.iter().map(|r| r.sifted_bits).min().unwrap();
    let n_max = with_n.iter().map(|r| r.sifted_bits).max().unwrap();
    let ns = log_spaced(n_min, n_max, CURVE_SAMPLES);
    bound_curve_from_leak(&ns, e_avg, a, leak, eps_total)
        .into_iter()
        .collect()
}

/// Writes the verdicts CSV, curve CSV and a text summary into `out_dir`
/// (created if missing). Output is byte-stable for identical reports.
pub fn write_report(report: &AuditReport, out_dir: &Path) -> io::Result<ReportPaths> {
    std::fs::create_dir_all(out_dir)?;
    let paths = ReportPaths {
        verdicts_csv: out_dir.join("verdicts.csv"),
        curve_csv: out_dir.join("curve.csv"),
        summary_txt: out_dir.join("summary.txt"),
    };

    let mut verdicts = String::from("session_id,n,secret_bits,l_finite,l_asymptotic,status\n");
    for v in &report.verdicts {
        verdicts.push_str(&format!(
            "{},{},{},{:.3},{:.3},{}\n",
            v.session_id,
            v.n,
            v.secret_bits,
            v.l_finite_bound,
            v.l_asymptotic_bound,
            v.status.as_str()
        ));
    }
    std::fs::write(&paths.verdicts_csv, verdicts)?;

    let mut curve = String::from("n,l_finite,l_asymptotic\n");
    for p in &report.curve {
        curve.push_str(&format!("{},{:.3},{:.3}\n", p.n, p.l_finite, p.l_asymptotic));
    }
    std::fs::write(&paths.curve_csv, curve)?;

    std::fs::write(&paths.summary_txt, summary_text(report))?;
    Ok(paths)
}

/// The human-readable summary block, also printed by the CLI.
pub fn summary_text(report: &AuditReport) -> String {
    let s = &report.summary;
    format!(
        "eps_total: {:e}\nrecords: {}\ncovered: {}\nnot_covered: {}\nasymptotic_violation: {}\naborted: {}\nfraction_not_covered: {:.6}\n",
        report.eps_total,
        s.records,
        s.covered,
        s.not_covered,
        s.asymptotic_violation,
        s.aborted,
        s.fraction_not_covered
    )
}
