//! Discrete-event model of a plug-and-play system's raw-key exchange and
//! distillation lifecycle.
//!
//! A session accrues raw key in one-second ticks at a rate calibrated
//! against a 2 dB reference channel, with ±10% multiplicative jitter per
//! tick. The exchange halts when the receiver's buffer fills, when an
//! interruption at time `tau` collapses the detection rate below the
//! recalibration threshold, or (optionally) when a natural timing-drift
//! event fires. What happens next depends on the firmware generation:
//!
//! * `legacy` distills whatever raw key has accumulated, as long as it
//!   meets the 80 kbit minimum — an interruption early in the session
//!   therefore forces distillation from a short sample;
//! * `patched` carries sifted key across sessions and only distills once
//!   the accumulated amount crosses a 2 Mbit threshold.
//!
//! Distillation reports the secret-key length of the modeled vendor
//! post-processing: the asymptotic bound for the session's channel, reduced
//! by a configurable fraction and offset. All randomness is drawn from a
//! per-session seeded stream, so campaigns are reproducible bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{require, DomainError};
use crate::keyrate::{
    asymptotic_key_bound, binary_entropy, detection_prob, multi_photon_prob,
    single_photon_fraction, ChannelParams,
};

/// Raw bits per second at the 2 dB reference loss; fills a 4 Mbit buffer in
/// 280 s.
pub const DEFAULT_PULSE_RATE: f64 = 4.0e6 / 280.0;

/// Minimum raw key the legacy firmware will distill from.
pub const DEFAULT_RAW_MIN_BITS: u64 = 80_000;

/// Fraction of the nominal detection rate below which the exchange
/// terminates for recalibration.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.5;

/// Sifted-key threshold of the patched firmware's cross-session
/// accumulator.
pub const DEFAULT_PATCHED_THRESHOLD_BITS: u64 = 2_000_000;

/// Attenuation the interrupting party applies at `tau`.
pub const DEFAULT_ATTACK_LOSS_DB: f64 = 40.0;

/// Loss value at which `pulse_rate` is calibrated.
pub const REFERENCE_LOSS_DB: f64 = 2.0;

/// Sessions are capped at this many simulated seconds.
const MAX_TICKS: u64 = 100_000_000;

/// Firmware generation of the modeled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Firmware {
    /// Distills each session independently once raw >= `raw_min_bits`.
    Legacy,
    /// Accumulates sifted key across sessions and distills on crossing
    /// `patched_sifted_threshold_bits`.
    Patched,
}

/// Vendor post-processing reduction applied after the asymptotic formula:
/// `secret = max(0, l_inf * (1 - fraction) - offset_bits)`.
///
/// The real reduction is proprietary; these defaults are calibrated only to
/// reproduce the qualitative behavior of both firmware generations, not the
/// vendor's internals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubtractionPolicy {
    /// Relative reduction, in `[0, 1)`.
    pub fraction: f64,
    /// Additional flat reduction in bits.
    pub offset_bits: u64,
}

impl Default for SubtractionPolicy {
    fn default() -> Self {
        Self {
            fraction: 0.12,
            offset_bits: 1_000,
        }
    }
}

/// Full configuration of one simulated system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Channel and detector parameters.
    pub channel: ChannelParams,
    /// True error rate of the channel; per-distillation observations jitter
    /// around it by up to ±0.5%.
    pub error_rate: f64,
    /// Raw bits per second at the reference loss.
    pub pulse_rate: f64,
    /// Legacy minimum raw key to distill.
    pub raw_min_bits: u64,
    /// Raw-key buffer cap; `None` uses the loss-dependent default map.
    pub buffer_limit_bits: Option<u64>,
    /// Fraction of nominal detection rate that triggers termination.
    pub detection_threshold: f64,
    pub firmware: Firmware,
    /// Sifted-bit threshold of the patched accumulator.
    pub patched_sifted_threshold_bits: u64,
    /// Post-processing key reduction (applies to both firmware modes).
    pub legacy_subtraction: SubtractionPolicy,
    /// Poisson rate (events per second) of natural drift terminations;
    /// `None` disables them.
    pub drift_rate: Option<f64>,
}

impl SystemConfig {
    /// A configuration with all defaults for the given channel and true
    /// error rate.
    pub fn new(channel: ChannelParams, error_rate: f64) -> Self {
        Self {
            channel,
            error_rate,
            pulse_rate: DEFAULT_PULSE_RATE,
            raw_min_bits: DEFAULT_RAW_MIN_BITS,
            buffer_limit_bits: None,
            detection_threshold: DEFAULT_DETECTION_THRESHOLD,
            firmware: Firmware::Legacy,
            patched_sifted_threshold_bits: DEFAULT_PATCHED_THRESHOLD_BITS,
            legacy_subtraction: SubtractionPolicy::default(),
            drift_rate: None,
        }
    }

    /// The effective raw-key buffer cap for this configuration.
    pub fn buffer_limit(&self) -> u64 {
        self.buffer_limit_bits
            .unwrap_or_else(|| default_buffer_limit(self.channel.loss_db()))
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        require(
            self.error_rate >= 0.0 && self.error_rate < 0.5,
            "error_rate",
            self.error_rate,
            "0 <= error_rate < 1/2",
        )?;
        require(
            self.pulse_rate > 0.0,
            "pulse_rate",
            self.pulse_rate,
            "pulse_rate > 0",
        )?;
        require(
            self.detection_threshold > 0.0 && self.detection_threshold < 1.0,
            "detection_threshold",
            self.detection_threshold,
            "0 < detection_threshold < 1",
        )?;
        require(
            self.raw_min_bits < self.buffer_limit(),
            "raw_min_bits",
            self.raw_min_bits as f64,
            "raw_min_bits < buffer_limit_bits",
        )?;
        require(
            self.legacy_subtraction.fraction >= 0.0 && self.legacy_subtraction.fraction < 1.0,
            "subtraction.fraction",
            self.legacy_subtraction.fraction,
            "0 <= fraction < 1",
        )?;
        require(
            self.patched_sifted_threshold_bits >= 1,
            "patched_sifted_threshold_bits",
            self.patched_sifted_threshold_bits as f64,
            "patched_sifted_threshold_bits >= 1",
        )?;
        if let Some(rate) = self.drift_rate {
            require(rate > 0.0, "drift_rate", rate, "drift_rate > 0")?;
        }
        Ok(())
    }
}

/// Timing of the channel interruption; `tau_s = None` leaves the session
/// undisturbed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSchedule {
    /// Seconds into the exchange at which the attenuation jumps.
    pub tau_s: Option<f64>,
    /// The attenuation imposed from `tau_s` on.
    pub attack_loss_db: f64,
}

impl AttackSchedule {
    /// Interrupt at `tau` seconds with the default 40 dB attenuation.
    pub fn at(tau_s: f64) -> Self {
        Self {
            tau_s: Some(tau_s),
            attack_loss_db: DEFAULT_ATTACK_LOSS_DB,
        }
    }

    /// No interruption.
    pub fn none() -> Self {
        Self {
            tau_s: None,
            attack_loss_db: DEFAULT_ATTACK_LOSS_DB,
        }
    }

    pub fn validate(&self, channel_loss_db: f64) -> Result<(), DomainError> {
        if let Some(tau) = self.tau_s {
            require(tau > 0.0, "tau_s", tau, "tau_s > 0")?;
            require(
                self.attack_loss_db > channel_loss_db,
                "attack_loss_db",
                self.attack_loss_db,
                "attack_loss_db > channel loss_db",
            )?;
        }
        Ok(())
    }
}

/// Why a raw-key exchange stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationCause {
    EveAttack,
    NaturalDrift,
    BufferFull,
}

impl TerminationCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationCause::EveAttack => "eve_attack",
            TerminationCause::NaturalDrift => "natural_drift",
            TerminationCause::BufferFull => "buffer_full",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "eve_attack" => Some(TerminationCause::EveAttack),
            "natural_drift" => Some(TerminationCause::NaturalDrift),
            "buffer_full" => Some(TerminationCause::BufferFull),
            _ => None,
        }
    }
}

/// One distillation event as the system would log it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionRecord {
    /// 1-based index of the session that triggered the distillation.
    pub session_id: u64,
    /// Sifted-key length (half the raw key).
    pub sifted_bits: u64,
    /// Observed error rate of this distillation.
    pub qber: f64,
    /// Bits disclosed during error correction.
    pub disclosed_bits: u64,
    /// Secret-key length the system reported.
    pub secret_bits: u64,
    /// Line loss at exchange time.
    pub loss_db: f64,
    /// Mean photon number at exchange time.
    pub mu: f64,
    pub terminated_by: TerminationCause,
}

/// What a single session produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SessionOutcome {
    Distilled(SessionRecord),
    /// The exchange ended without meeting the firmware's distillation
    /// threshold.
    NoDistillation {
        raw_bits: u64,
        terminated_by: TerminationCause,
    },
}

/// Default raw-buffer cap versus line loss: 4.0 Mbit at 2 dB, 2.6 Mbit at
/// 3 dB, 1.6 Mbit at 4 dB, linear between the anchors and clamped outside.
pub fn default_buffer_limit(loss_db: f64) -> u64 {
    let limit = if loss_db <= 2.0 {
        4.0e6
    } else if loss_db <= 3.0 {
        4.0e6 + (2.6e6 - 4.0e6) * (loss_db - 2.0)
    } else if loss_db <= 4.0 {
        2.6e6 + (1.6e6 - 2.6e6) * (loss_db - 3.0)
    } else {
        1.6e6
    };
    limit.round() as u64
}

fn relative_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-(loss_db - REFERENCE_LOSS_DB) / 10.0)
}

fn session_rng(seed: u64, session_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(session_index.wrapping_add(1));
    rng
}

struct Exchange {
    raw_bits: u64,
    terminated_by: TerminationCause,
}

/// Accrues raw key tick by tick until something stops the exchange.
fn exchange(config: &SystemConfig, attack: &AttackSchedule, rng: &mut ChaCha8Rng) -> Exchange {
    let buffer = config.buffer_limit() as f64;
    let loss = config.channel.loss_db();
    let mut rate = config.pulse_rate * relative_transmittance(loss);
    let mut raw = 0.0f64;
    let mut attack_pending = attack.tau_s;
    let mut tick: u64 = 0;

    let finish = |raw: f64, cause: TerminationCause| Exchange {
        raw_bits: raw.min(buffer).floor() as u64,
        terminated_by: cause,
    };

    loop {
        let jitter = rng.gen_range(0.9..1.1);
        if let Some(drift) = config.drift_rate {
            let p_event = -f64::exp_m1(-drift);
            if rng.gen_range(0.0..1.0) < p_event {
                return finish(raw, TerminationCause::NaturalDrift);
            }
        }
        let t0 = tick as f64;
        match attack_pending {
            Some(tau) if tau < t0 + 1.0 => {
                let pre = (tau - t0).max(0.0);
                raw += rate * jitter * pre;
                if raw >= buffer {
                    return finish(raw, TerminationCause::BufferFull);
                }
                let detection_ratio =
                    relative_transmittance(attack.attack_loss_db) / relative_transmittance(loss);
                if detection_ratio < config.detection_threshold {
                    return finish(raw, TerminationCause::EveAttack);
                }
                // Too gentle to trip the recalibration threshold: the
                // exchange continues at the attenuated rate.
                rate = config.pulse_rate * relative_transmittance(attack.attack_loss_db);
                raw += rate * jitter * (1.0 - pre);
                attack_pending = None;
            }
            _ => raw += rate * jitter,
        }
        if raw >= buffer {
            return finish(raw, TerminationCause::BufferFull);
        }
        tick += 1;
        if tick >= MAX_TICKS {
            return finish(raw, TerminationCause::BufferFull);
        }
    }
}

struct Distillation {
    qber: f64,
    disclosed_bits: u64,
    secret_bits: u64,
}

/// Models the post-processing the system runs on `sifted_bits` of key:
/// observed error rate, error-correction disclosure and the reported secret
/// length.
fn distill(config: &SystemConfig, sifted_bits: u64, rng: &mut ChaCha8Rng) -> Distillation {
    let qber = (config.error_rate + rng.gen_range(-0.005..0.005)).clamp(0.0, 0.499_999_999);
    let f_prime = rng.gen_range(1.1..1.3);
    let nf = sifted_bits as f64;

    let h = binary_entropy(qber).expect("qber clamped into [0, 1/2)");
    let disclosed_bits = ((f_prime * h * nf).round() as u64).min(sifted_bits);

    let p_det = detection_prob(&config.channel);
    let p_multi = multi_photon_prob(config.channel.mu()).expect("mu validated");
    let a = single_photon_fraction(p_det, p_multi).expect("p_det in (0, 1]");
    let l_asym = asymptotic_key_bound(sifted_bits.max(1), qber, a, f_prime)
        .expect("inputs validated");

    let reduced = l_asym * (1.0 - config.legacy_subtraction.fraction)
        - config.legacy_subtraction.offset_bits as f64;
    let secret_bits = reduced.max(0.0).floor() as u64;

    Distillation {
        qber,
        disclosed_bits,
        secret_bits,
    }
}

fn record_from(
    config: &SystemConfig,
    session_id: u64,
    sifted_bits: u64,
    cause: TerminationCause,
    d: Distillation,
) -> SessionRecord {
    SessionRecord {
        session_id,
        sifted_bits,
        qber: d.qber,
        disclosed_bits: d.disclosed_bits,
        secret_bits: d.secret_bits,
        loss_db: config.channel.loss_db(),
        mu: config.channel.mu(),
        terminated_by: cause,
    }
}

/// Runs a single session. Equivalent to the first session of a campaign
/// with the same seed.
pub fn run_session(
    config: &SystemConfig,
    attack: &AttackSchedule,
    seed: u64,
) -> Result<SessionOutcome, DomainError> {
    config.validate()?;
    attack.validate(config.channel.loss_db())?;
    let mut rng = session_rng(seed, 0);
    Ok(run_session_inner(config, attack, &mut rng, 1, &mut 0))
}

fn run_session_inner(
    config: &SystemConfig,
    attack: &AttackSchedule,
    rng: &mut ChaCha8Rng,
    session_id: u64,
    patched_accumulator: &mut u64,
) -> SessionOutcome {
    let ex = exchange(config, attack, rng);
    match config.firmware {
        Firmware::Legacy => {
            if ex.raw_bits >= config.raw_min_bits {
                let sifted = ex.raw_bits / 2;
                let d = distill(config, sifted, rng);
                SessionOutcome::Distilled(record_from(
                    config,
                    session_id,
                    sifted,
                    ex.terminated_by,
                    d,
                ))
            } else {
                SessionOutcome::NoDistillation {
                    raw_bits: ex.raw_bits,
                    terminated_by: ex.terminated_by,
                }
            }
        }
        Firmware::Patched => {
            *patched_accumulator += ex.raw_bits / 2;
            if *patched_accumulator >= config.patched_sifted_threshold_bits {
                let sifted = *patched_accumulator;
                *patched_accumulator = 0;
                let d = distill(config, sifted, rng);
                SessionOutcome::Distilled(record_from(
                    config,
                    session_id,
                    sifted,
                    ex.terminated_by,
                    d,
                ))
            } else {
                SessionOutcome::NoDistillation {
                    raw_bits: ex.raw_bits,
                    terminated_by: ex.terminated_by,
                }
            }
        }
    }
}

/// Runs one session per attack schedule with per-session derived seeds and
/// collects the distillation records.
///
/// Under patched firmware the sifted accumulator persists across sessions,
/// so records appear only at threshold crossings; leftover key below the
/// threshold at campaign end is not distilled.
pub fn run_campaign(
    config: &SystemConfig,
    attacks: &[AttackSchedule],
    seed: u64,
) -> Result<Vec<SessionRecord>, DomainError> {
    config.validate()?;
    for attack in attacks {
        attack.validate(config.channel.loss_db())?;
    }
    let mut records = Vec::new();
    let mut accumulator: u64 = 0;
    for (i, attack) in attacks.iter().enumerate() {
        let mut rng = session_rng(seed, i as u64);
        let outcome =
            run_session_inner(config, attack, &mut rng, (i + 1) as u64, &mut accumulator);
        if let SessionOutcome::Distilled(rec) = outcome {
            records.push(rec);
        }
    }
    Ok(records)
}

/// Attack schedules at each tau of an inclusive `start..=stop` range with
/// the given stride, default attack attenuation.
pub fn tau_range(start: f64, stop: f64, step: f64) -> Vec<AttackSchedule> {
    assert!(step > 0.0, "step must be positive");
    let mut out = Vec::new();
    let mut tau = start;
    // Tolerate float drift at the top of the range.
    while tau <= stop + 1e-9 {
        out.push(AttackSchedule::at(tau));
        tau += step;
    }
    out
}
