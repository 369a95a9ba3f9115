//! Outage predicates and outage probabilities.
//!
//! Three threshold families drive the deferral protocol: the
//! unbounded-deadline event with its `log log rho` correction, the
//! bounded-deadline short-term event at `f(r, D) log rho`, and the
//! power-controlled per-stage events at `f log rho` with boosted transmit
//! exponent. Rank-1 channels admit a noise-free closed form through the
//! regularized incomplete gamma function; everything else is estimated by
//! Monte Carlo with a binomial standard error.

use rayon::prelude::*;

use crate::channel::{mutual_info, sample_channel, AntennaConfig, ChannelRealization, SnrPoint};
use crate::dmt::threshold_exponent;
use crate::error::{Error, Result};
use crate::gamma::regularized_lower_gamma;
use crate::rng::trial_stream;

/// Which outage event family a threshold belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdKind {
    /// Unbounded deadline: `min(M,N) (log rho - 2 log log rho)`.
    Unbounded,
    /// Bounded deadline, short-term power: `f(r, D) log rho`.
    ShortTerm,
    /// Bounded deadline, long-term power, stage `i` (1-based).
    LongTermStage(u32),
}

/// A threshold event `log det(I + rho^g H H*) <= f log rho + c min(M,N) log log rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    pub kind: ThresholdKind,
    /// Coefficient of `log rho`.
    pub exponent_f: f64,
    /// Coefficient of `min(M,N) log log rho`; 0 except for the unbounded
    /// event, where -2 tightens the threshold.
    pub loglog_correction: f64,
    /// Transmit power exponent `g >= 1` inside the determinant.
    pub power_exponent: f64,
    /// `min(M, N)` of the link the event is defined for.
    pub min_mn: usize,
}

impl ThresholdSpec {
    /// The unbounded-deadline event for a link.
    pub fn unbounded(config: &AntennaConfig) -> Self {
        Self {
            kind: ThresholdKind::Unbounded,
            exponent_f: config.min_mn() as f64,
            loglog_correction: -2.0,
            power_exponent: 1.0,
            min_mn: config.min_mn(),
        }
    }

    /// The short-term bounded-deadline event at threshold `f(r, D)`.
    pub fn short_term(
        config: &AntennaConfig,
        blocklength: u32,
        deadline: u32,
        r: f64,
    ) -> Result<Self> {
        let f = threshold_exponent(config, blocklength, deadline, r)?;
        Ok(Self {
            kind: ThresholdKind::ShortTerm,
            exponent_f: f,
            loglog_correction: 0.0,
            power_exponent: 1.0,
            min_mn: config.min_mn(),
        })
    }

    /// A long-term stage event with an explicit threshold exponent and
    /// power exponent taken from a schedule.
    pub fn long_term_stage(
        config: &AntennaConfig,
        stage: u32,
        exponent_f: f64,
        power_exponent: f64,
    ) -> Self {
        Self {
            kind: ThresholdKind::LongTermStage(stage),
            exponent_f,
            loglog_correction: 0.0,
            power_exponent,
            min_mn: config.min_mn(),
        }
    }
}

/// How an outage probability was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageMethod {
    ClosedForm,
    MonteCarlo,
}

/// Outage probability with its uncertainty (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageProbability {
    pub value: f64,
    pub stderr: f64,
    pub method: OutageMethod,
}

/// Threshold value in nats:
/// `f log rho + c min(M,N) log log rho`.
///
/// The unbounded event needs `rho > e` so its `log log rho` term is
/// defined and positive.
pub fn threshold_value(spec: &ThresholdSpec, snr: SnrPoint) -> Result<f64> {
    let base = spec.exponent_f * snr.log_rho();
    if spec.loglog_correction == 0.0 {
        return Ok(base);
    }
    if snr.log_rho() <= 1.0 {
        return Err(Error::Domain(format!(
            "unbounded-deadline threshold needs rho > e, got rho = {}",
            snr.rho()
        )));
    }
    Ok(base + spec.loglog_correction * spec.min_mn as f64 * snr.log_rho().ln())
}

/// Outage predicate: mutual information at the event's power exponent is
/// at or below the threshold. Ties count as outage.
pub fn is_outage(h: &ChannelRealization, spec: &ThresholdSpec, snr: SnrPoint) -> Result<bool> {
    let info = mutual_info(h, snr, spec.power_exponent)?;
    let threshold = threshold_value(spec, snr)?;
    Ok(info.nats() <= threshold)
}

/// Closed-form outage probability for rank-1 channels.
///
/// With one antenna on one side, `||h||^2` is a sum of `m = max(M, N)`
/// unit-mean exponentials, so the outage probability is the regularized
/// lower incomplete gamma `P(m, t)` at `t = (e^threshold - 1) / rho^g`.
pub fn outage_prob_rank1(
    m: usize,
    snr: SnrPoint,
    spec: &ThresholdSpec,
) -> Result<OutageProbability> {
    if m == 0 {
        return Err(Error::Precondition("antenna count must be >= 1".into()));
    }
    if spec.min_mn != 1 {
        return Err(Error::Precondition(
            "closed-form outage requires a rank-1 link (N = 1 or M = 1)".into(),
        ));
    }
    let threshold = threshold_value(spec, snr)?;
    let rho_g = (spec.power_exponent * snr.log_rho()).exp();
    let t = threshold.exp_m1() / rho_g;
    let value = if t <= 0.0 {
        0.0
    } else {
        regularized_lower_gamma(m as f64, t)?
    };
    Ok(OutageProbability {
        value,
        stderr: 0.0,
        method: OutageMethod::ClosedForm,
    })
}

const MC_CHUNK: u64 = 8192;

/// Monte Carlo outage probability for an arbitrary link.
///
/// Trials are split into fixed-size chunks with one random stream per
/// trial index, and counts merge associatively, so the estimate is
/// deterministic under `(seed, trials)` regardless of worker count.
pub fn outage_prob_mc(
    config: &AntennaConfig,
    spec: &ThresholdSpec,
    snr: SnrPoint,
    trials: u64,
    seed: u64,
) -> Result<OutageProbability> {
    if trials == 0 {
        return Err(Error::Precondition("trial count must be >= 1".into()));
    }
    let chunks = trials.div_ceil(MC_CHUNK);
    let counts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * MC_CHUNK;
            let end = ((chunk + 1) * MC_CHUNK).min(trials);
            let mut count = 0u64;
            for trial in start..end {
                let mut rng = trial_stream(seed, trial);
                let h = sample_channel(config, &mut rng);
                if is_outage(&h, spec, snr)? {
                    count += 1;
                }
            }
            Ok(count)
        })
        .collect::<Result<_>>()?;
    let outages: u64 = counts.iter().sum();
    let value = outages as f64 / trials as f64;
    let stderr = (value * (1.0 - value) / trials as f64).sqrt();
    Ok(OutageProbability {
        value,
        stderr,
        method: OutageMethod::MonteCarlo,
    })
}
