//! Key-rate bounds for non-decoy BB84 with a weak coherent source.
//!
//! Everything in this module is a pure function of its inputs: binary
//! entropy, Poisson photon statistics, the statistical deviation applied to
//! an observed error rate, the error-correction leakage model, and the two
//! secret-key bounds (finite-size and asymptotic). All quantities are bits,
//! probabilities live in `[0, 1]`, attenuation is in dB.
//!
//! The finite bound for a sifted key of `n` bits with observed error rate
//! `E`, single-photon fraction `A` and a four-way security budget
//! `(eps_pe, eps_smooth, eps_pa, eps_ec)` is
//!
//! ```text
//! l <= n*A*(1 - h(E~/A)) - n*leak_EC
//!      - 7*sqrt(n * log2(2/eps_smooth))
//!      - 2*log2(1/eps_pa) - log2(2/eps_ec)
//! ```
//!
//! where `E~ = E + sqrt((2*ln(1/eps_pe) + 2*ln(n+1)) / n) / 2` is the
//! deviation-corrected error rate and `leak_EC = f_EC * h(E)` unless a
//! measured disclosure fraction is supplied. Dropping the statistical terms
//! and replacing `E~` by `E` gives the asymptotic bound
//! `l_inf <= n*A*(1 - h(E/A)) - n*leak_EC`.

use crate::error::{require, DomainError};

/// Optical and post-processing parameters of one channel configuration.
///
/// `f_ec` is the inefficiency of the error-correction code relative to the
/// Shannon limit; the remaining fields describe the quantum channel and
/// Bob's detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    loss_db: f64,
    mu: f64,
    eta_det: f64,
    p_dark: f64,
    f_ec: f64,
}

impl ChannelParams {
    /// Validates and builds a parameter set.
    ///
    /// Requires `loss_db >= 0`, `mu > 0`, `0 < eta_det <= 1`,
    /// `0 <= p_dark < 1` and `f_ec >= 1`.
    pub fn new(
        loss_db: f64,
        mu: f64,
        eta_det: f64,
        p_dark: f64,
        f_ec: f64,
    ) -> Result<Self, DomainError> {
        require(loss_db >= 0.0, "loss_db", loss_db, "loss_db >= 0")?;
        require(mu > 0.0, "mu", mu, "mu > 0")?;
        require(
            eta_det > 0.0 && eta_det <= 1.0,
            "eta_det",
            eta_det,
            "0 < eta_det <= 1",
        )?;
        require(
            (0.0..1.0).contains(&p_dark),
            "p_dark",
            p_dark,
            "0 <= p_dark < 1",
        )?;
        require(f_ec >= 1.0, "f_ec", f_ec, "f_ec >= 1")?;
        Ok(Self {
            loss_db,
            mu,
            eta_det,
            p_dark,
            f_ec,
        })
    }

    pub fn loss_db(&self) -> f64 {
        self.loss_db
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta_det(&self) -> f64 {
        self.eta_det
    }

    pub fn p_dark(&self) -> f64 {
        self.p_dark
    }

    pub fn f_ec(&self) -> f64 {
        self.f_ec
    }

    /// Channel transmittance `10^(-loss_db/10)`.
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    /// Returns a copy with a different line loss, detector settings unchanged.
    pub fn with_loss(&self, loss_db: f64) -> Result<Self, DomainError> {
        Self::new(loss_db, self.mu, self.eta_det, self.p_dark, self.f_ec)
    }
}

/// The four-way failure-probability budget of the finite bound.
///
/// `eps_pe` covers parameter estimation, `eps_smooth` the smooth-min-entropy
/// deviation, `eps_pa` the hash-collision probability of privacy
/// amplification and `eps_ec` an undetected error-correction failure. The
/// overall security parameter is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityEpsilons {
    eps_pe: f64,
    eps_smooth: f64,
    eps_pa: f64,
    eps_ec: f64,
}

impl SecurityEpsilons {
    /// Validates and builds a budget. Each component must lie strictly in
    /// `(0, 1)` and the total must stay below 1.
    pub fn new(
        eps_pe: f64,
        eps_smooth: f64,
        eps_pa: f64,
        eps_ec: f64,
    ) -> Result<Self, DomainError> {
        require(
            eps_pe > 0.0 && eps_pe < 1.0,
            "eps_pe",
            eps_pe,
            "0 < eps_pe < 1",
        )?;
        require(
            eps_smooth > 0.0 && eps_smooth < 1.0,
            "eps_smooth",
            eps_smooth,
            "0 < eps_smooth < 1",
        )?;
        require(
            eps_pa > 0.0 && eps_pa < 1.0,
            "eps_pa",
            eps_pa,
            "0 < eps_pa < 1",
        )?;
        require(
            eps_ec > 0.0 && eps_ec < 1.0,
            "eps_ec",
            eps_ec,
            "0 < eps_ec < 1",
        )?;
        let total = eps_pe + eps_smooth + eps_pa + eps_ec;
        require(total < 1.0, "total", total, "eps_pe + eps_smooth + eps_pa + eps_ec < 1")?;
        Ok(Self {
            eps_pe,
            eps_smooth,
            eps_pa,
            eps_ec,
        })
    }

    /// Splits a total security parameter evenly across the four components.
    pub fn equal_split(eps_total: f64) -> Result<Self, DomainError> {
        require(
            eps_total > 0.0 && eps_total < 1.0,
            "eps_total",
            eps_total,
            "0 < eps_total < 1",
        )?;
        let q = eps_total / 4.0;
        Self::new(q, q, q, q)
    }

    pub fn eps_pe(&self) -> f64 {
        self.eps_pe
    }

    pub fn eps_smooth(&self) -> f64 {
        self.eps_smooth
    }

    pub fn eps_pa(&self) -> f64 {
        self.eps_pa
    }

    pub fn eps_ec(&self) -> f64 {
        self.eps_ec
    }

    /// Sum of the four components.
    pub fn total(&self) -> f64 {
        self.eps_pe + self.eps_smooth + self.eps_pa + self.eps_ec
    }
}

/// Which leakage accounting the finite bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMode {
    /// The evaluated bound: leakage term `n * leak_EC`, error-correction
    /// failure term `log2(2 / eps_ec)`.
    #[default]
    Standard,
    /// Alternative constants: leakage scaled by the single-photon fraction
    /// (`n * leak_EC * A`) and failure term `log2(8 / eps_ec)`.
    Strict,
}

/// Every term of the finite bound, itemized, plus the asymptotic bound for
/// the same inputs.
///
/// When `aborted` is set the entropy argument left its meaningful range
/// (`E~/A >= 1/2`, or `A = 0`) and both `term_entropy` and `l_finite` are
/// zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundBreakdown {
    /// Sifted-key length in bits.
    pub n_sifted: u64,
    /// Single-photon fraction used for the bound.
    pub a_fraction: f64,
    /// Observed error rate.
    pub e_observed: f64,
    /// Deviation-corrected error rate.
    pub e_tilde: f64,
    /// `n * A * (1 - h(e_tilde / A))`, zero when aborted.
    pub term_entropy: f64,
    /// Error-correction leakage in bits.
    pub term_leak: f64,
    /// `7 * sqrt(n * log2(2 / eps_smooth))`.
    pub term_smoothing: f64,
    /// `2 * log2(1 / eps_pa)`.
    pub term_pa: f64,
    /// `log2(2 / eps_ec)` (`log2(8 / eps_ec)` in strict mode).
    pub term_ec: f64,
    /// Finite-size secret-key bound, clamped at zero.
    pub l_finite: f64,
    /// Asymptotic secret-key bound for the same inputs, clamped at zero.
    pub l_asymptotic: f64,
    /// Whether the finite bound is vacuous for these inputs.
    pub aborted: bool,
}

/// Binary Shannon entropy in bits, `h(x) = -x log2 x - (1-x) log2(1-x)`,
/// with the continuous extension `h(0) = h(1) = 0`.
///
/// # Example
///
/// ```
/// use qkdfk_core::keyrate::binary_entropy;
/// assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
/// assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
/// ```
pub fn binary_entropy(x: f64) -> Result<f64, DomainError> {
    require((0.0..=1.0).contains(&x), "x", x, "0 <= x <= 1")?;
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Probability that a Poissonian weak coherent pulse of mean photon number
/// `mu` carries two or more photons: `1 - e^-mu - mu e^-mu`.
pub fn multi_photon_prob(mu: f64) -> Result<f64, DomainError> {
    require(mu > 0.0, "mu", mu, "mu > 0")?;
    // -exp_m1(-mu) = 1 - e^-mu without cancellation for small mu.
    Ok(-f64::exp_m1(-mu) - mu * (-mu).exp())
}

/// Detection probability per gate for the modeled channel:
/// `1 - e^(-mu * eta_tot) * (1 - p_dark)^2` with
/// `eta_tot = 10^(-loss_db/10) * eta_det`.
///
/// This is a plumbing-level channel model: it is strictly increasing in
/// `mu` and `eta_det` and strictly decreasing in `loss_db`, which is all the
/// simulator and audit need from it.
pub fn detection_prob(params: &ChannelParams) -> f64 {
    let eta_tot = params.transmittance() * params.eta_det;
    1.0 - (-params.mu * eta_tot).exp() * (1.0 - params.p_dark).powi(2)
}

/// Conservative fraction of detections attributable to single-photon
/// pulses, `(p_det - p_multi) / p_det`, clamped below at zero.
///
/// # Example
///
/// ```
/// use qkdfk_core::keyrate::single_photon_fraction;
/// // All detections could stem from multi-photon pulses: nothing is left.
/// assert_eq!(single_photon_fraction(0.01, 0.01).unwrap(), 0.0);
/// ```
pub fn single_photon_fraction(p_det: f64, p_multi: f64) -> Result<f64, DomainError> {
    require(p_det > 0.0 && p_det <= 1.0, "p_det", p_det, "0 < p_det <= 1")?;
    require(
        (0.0..=1.0).contains(&p_multi),
        "p_multi",
        p_multi,
        "0 <= p_multi <= 1",
    )?;
    Ok(((p_det - p_multi) / p_det).max(0.0))
}

/// Deviation-corrected error rate
/// `E~ = E + sqrt((2 ln(1/eps_pe) + 2 ln(n+1)) / n) / 2`.
///
/// Accounts for the chance (at most `eps_pe`) that an error rate estimated
/// from `n` sifted bits deviates from the true value. Always exceeds the
/// observed rate and converges to it as `n` grows.
pub fn corrected_error_rate(e_obs: f64, n: u64, eps_pe: f64) -> Result<f64, DomainError> {
    require(
        (0.0..0.5).contains(&e_obs),
        "e_obs",
        e_obs,
        "0 <= e_obs < 1/2",
    )?;
    require(n >= 1, "n", n as f64, "n >= 1")?;
    require(
        eps_pe > 0.0 && eps_pe < 1.0,
        "eps_pe",
        eps_pe,
        "0 < eps_pe < 1",
    )?;
    let nf = n as f64;
    Ok(e_obs + 0.5 * ((2.0 * (1.0 / eps_pe).ln() + 2.0 * (nf + 1.0).ln()) / nf).sqrt())
}

/// Modeled fraction of the key disclosed during error correction,
/// `leak_EC = f_EC * h(E)`.
pub fn leak_ec_fraction(e_obs: f64, f_ec: f64) -> Result<f64, DomainError> {
    require(
        (0.0..=0.5).contains(&e_obs),
        "e_obs",
        e_obs,
        "0 <= e_obs <= 1/2",
    )?;
    require(f_ec >= 1.0, "f_ec", f_ec, "f_ec >= 1")?;
    Ok(f_ec * binary_entropy(e_obs)?)
}

/// Finite-size secret-key bound with the modeled leakage `f_EC * h(E)`.
///
/// Returns every term itemized in a [`BoundBreakdown`]. The bound aborts
/// (reports zero) when the single-photon fraction is zero or the corrected
/// error rate reaches half of it.
///
/// # Example
///
/// ```
/// use qkdfk_core::keyrate::{finite_key_bound, SecurityEpsilons};
/// let eps = SecurityEpsilons::equal_split(1e-10).unwrap();
/// let b = finite_key_bound(1_000_000, 0.025, 0.8, 1.2, &eps).unwrap();
/// assert!((b.l_finite - 3.737e5).abs() < 1e3);
/// assert!(b.l_finite <= b.l_asymptotic);
/// ```
pub fn finite_key_bound(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    f_ec: f64,
    eps: &SecurityEpsilons,
) -> Result<BoundBreakdown, DomainError> {
    finite_key_bound_with_mode(n, e_obs, a_fraction, f_ec, eps, BoundMode::Standard)
}

/// [`finite_key_bound`] with an explicit leakage-accounting mode.
pub fn finite_key_bound_with_mode(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    f_ec: f64,
    eps: &SecurityEpsilons,
    mode: BoundMode,
) -> Result<BoundBreakdown, DomainError> {
    let leak = leak_ec_fraction(e_obs, f_ec)?;
    finite_key_bound_from_leak(n, e_obs, a_fraction, leak, eps, mode)
}

/// Finite-size bound with an explicit per-bit leakage fraction, e.g. a
/// measured `disclosed_bits / n` from a session log.
pub fn finite_key_bound_from_leak(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    leak_fraction: f64,
    eps: &SecurityEpsilons,
    mode: BoundMode,
) -> Result<BoundBreakdown, DomainError> {
    require(n >= 1, "n", n as f64, "n >= 1")?;
    require(
        (0.0..0.5).contains(&e_obs),
        "e_obs",
        e_obs,
        "0 <= e_obs < 1/2",
    )?;
    require(
        (0.0..=1.0).contains(&a_fraction),
        "a_fraction",
        a_fraction,
        "0 <= a_fraction <= 1",
    )?;
    require(
        leak_fraction >= 0.0,
        "leak_fraction",
        leak_fraction,
        "leak_fraction >= 0",
    )?;

    let nf = n as f64;
    let e_tilde = corrected_error_rate(e_obs, n, eps.eps_pe)?;

    let term_leak = match mode {
        BoundMode::Standard => nf * leak_fraction,
        BoundMode::Strict => nf * leak_fraction * a_fraction,
    };
    let term_smoothing = 7.0 * (nf * (2.0 / eps.eps_smooth).log2()).sqrt();
    let term_pa = 2.0 * (1.0 / eps.eps_pa).log2();
    let term_ec = match mode {
        BoundMode::Standard => (2.0 / eps.eps_ec).log2(),
        BoundMode::Strict => (8.0 / eps.eps_ec).log2(),
    };

    // NaN-safe: 0/0 or x/0 fail the affirmative test and abort.
    let entropy_arg_meaningful = a_fraction > 0.0 && e_tilde / a_fraction < 0.5;
    let aborted = !entropy_arg_meaningful;
    let term_entropy = if aborted {
        0.0
    } else {
        nf * a_fraction * (1.0 - binary_entropy(e_tilde / a_fraction)?)
    };
    let l_finite = if aborted {
        0.0
    } else {
        (term_entropy - term_leak - term_smoothing - term_pa - term_ec).max(0.0)
    };
    let l_asymptotic = asymptotic_key_bound_from_leak(n, e_obs, a_fraction, leak_fraction)?;

    Ok(BoundBreakdown {
        n_sifted: n,
        a_fraction,
        e_observed: e_obs,
        e_tilde,
        term_entropy,
        term_leak,
        term_smoothing,
        term_pa,
        term_ec,
        l_finite,
        l_asymptotic,
        aborted,
    })
}

/// Asymptotic secret-key bound `l_inf = n*A*(1 - h(E/A)) - n*leak_EC`,
/// clamped at zero. Scales linearly in `n`.
pub fn asymptotic_key_bound(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    f_ec: f64,
) -> Result<f64, DomainError> {
    let leak = leak_ec_fraction(e_obs, f_ec)?;
    asymptotic_key_bound_from_leak(n, e_obs, a_fraction, leak)
}

/// Asymptotic bound with an explicit per-bit leakage fraction.
pub fn asymptotic_key_bound_from_leak(
    n: u64,
    e_obs: f64,
    a_fraction: f64,
    leak_fraction: f64,
) -> Result<f64, DomainError> {
    require(n >= 1, "n", n as f64, "n >= 1")?;
    require(
        (0.0..0.5).contains(&e_obs),
        "e_obs",
        e_obs,
        "0 <= e_obs < 1/2",
    )?;
    require(
        (0.0..=1.0).contains(&a_fraction),
        "a_fraction",
        a_fraction,
        "0 <= a_fraction <= 1",
    )?;
    require(
        leak_fraction >= 0.0,
        "leak_fraction",
        leak_fraction,
        "leak_fraction >= 0",
    )?;
    let nf = n as f64;
    let entropy_arg_meaningful = a_fraction > 0.0 && e_obs / a_fraction < 0.5;
    if !entropy_arg_meaningful {
        return Ok(0.0);
    }
    let per_bit = a_fraction * (1.0 - binary_entropy(e_obs / a_fraction)?) - leak_fraction;
    Ok((nf * per_bit).max(0.0))
}
