//! Desk-scale laboratory for the diversity-multiplexing-delay behavior of
//! block Rayleigh MIMO links whose transmitter learns one causal bit of
//! channel state per coherence interval.
//!
//! Two routes to the same quantities are kept side by side and
//! cross-checked:
//!
//! * closed forms — the no-CSI tradeoff curve, the unbounded- and
//!   bounded-deadline diversity lower bounds with and without power
//!   control, threshold exponents, power schedules, and rank-1 outage
//!   probabilities through the regularized incomplete gamma function;
//! * simulation — a deferral protocol state machine driven by per-trial
//!   random streams, aggregated into reproducible Monte Carlo summaries,
//!   with diversity read off as the log-log slope of the averaged
//!   random-coding error bound over an SNR sweep, plus a long-term power
//!   audit.

pub mod channel;
pub mod dmt;
pub mod error;
pub mod gamma;
pub mod outage;
pub mod protocol;
pub mod rng;

pub use channel::{
    mutual_info, random_coding_error_bound, sample_channel, AntennaConfig, ChannelRealization,
    MutualInfo, SnrPoint,
};
pub use dmt::{
    delay_for_epsilon, dmt_no_csi, equivalent_delay, long_term_bound, long_term_bound_with,
    miso_long_term_bound, miso_short_term_printed, power_schedule_exponent, power_schedule_printed,
    printed_stage_threshold, segment_coefficients, short_term_bound, threshold_exponent,
    unbounded_delay_bound, AlphaConvention, Deadline, DelayRequirement, DmtCurve, PowerMode,
    SchemeConfig,
};
pub use error::{Error, Result};
pub use gamma::regularized_lower_gamma;
pub use outage::{
    is_outage, outage_prob_mc, outage_prob_rank1, threshold_value, OutageMethod, OutageProbability,
    ThresholdKind, ThresholdSpec,
};
pub use protocol::{
    audit_power, empirical_multiplexing, estimate_diversity, estimate_diversity_from_points,
    run_batch, run_trial, AuditEntry, AuditReport, CalibrationConfig, ProtocolPlan, SimSummary,
    SlopeEstimate, SlopePoint, StageContribution, StageThresholdMode, TrialOutcome,
};
pub use rng::{trial_stream, TrialRng};
