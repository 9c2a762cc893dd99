//! Finite-key security analysis for plug-and-play BB84 QKD systems.
//!
//! The crate has four layers, each usable on its own:
//!
//! * [`keyrate`] — pure evaluation of the secret-key bounds: binary
//!   entropy, Poisson photon statistics, the finite-size deviation of an
//!   observed error rate, error-correction leakage, and the finite and
//!   asymptotic key-length bounds with every term itemized.
//! * [`epsilon`] — optimization of the four-way security-parameter budget
//!   `(eps_pe, eps_smooth, eps_pa, eps_ec)` for a fixed total, plus
//!   bound-versus-`n` curves.
//! * [`sim`] — a discrete-event model of the system's raw-key exchange
//!   under channel interruption, with legacy and patched firmware
//!   behaviors.
//! * [`audit`] — session-log ingestion and classification of distilled
//!   keys against the bounds.
//!
//! All operations are pure functions of their inputs (the simulator takes
//! an explicit seed), so everything here is safe to call concurrently and
//! reproduces bit-identically.
//!
//! ```
//! use qkdfk_core::keyrate::{finite_key_bound, SecurityEpsilons};
//!
//! let eps = SecurityEpsilons::equal_split(1e-10)?;
//! let bound = finite_key_bound(1_000_000, 0.025, 0.8, 1.2, &eps)?;
//! assert!(bound.l_finite > 0.0 && bound.l_finite <= bound.l_asymptotic);
//! # Ok::<(), qkdfk_core::DomainError>(())
//! ```

pub mod audit;
pub mod epsilon;
pub mod error;
pub mod keyrate;
pub mod sim;

pub use audit::{
    audit, load_session_log, load_session_log_path, write_report, write_session_log, AuditReport,
    AuditSummary, LogError, ReportPaths, Verdict, VerdictStatus,
};
pub use epsilon::{
    bound_curve, log_spaced, optimize_epsilons, optimize_epsilons_with_mode, CurvePoint,
    OptimizationResult, DEFAULT_TOLERANCE,
};
pub use error::DomainError;
pub use keyrate::{
    asymptotic_key_bound, binary_entropy, corrected_error_rate, detection_prob, finite_key_bound,
    leak_ec_fraction, multi_photon_prob, single_photon_fraction, BoundBreakdown, BoundMode,
    ChannelParams, SecurityEpsilons,
};
pub use sim::{
    run_campaign, run_session, tau_range, AttackSchedule, Firmware, SessionOutcome, SessionRecord,
    SubtractionPolicy, SystemConfig, TerminationCause,
};
