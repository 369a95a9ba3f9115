//! The one-bit-CSI deferral protocol as an explicit state machine, plus
//! message-level Monte Carlo aggregation, empirical diversity-slope
//! estimation over an SNR sweep, and the long-term power audit.
//!
//! A trial walks coherence intervals: while the feedback bit reports the
//! channel below the stage threshold the transmitter defers; it transmits
//! on the first good interval, or is forced at the deadline. The trial's
//! error proxy is the per-realization random-coding bound at the stage's
//! power exponent, which is exactly the quantity the analytic bounds
//! average.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::channel::{random_coding_error_bound, sample_channel, AntennaConfig, SnrPoint};
use crate::dmt::{
    power_schedule_exponent, power_schedule_printed, threshold_exponent, Deadline, PowerMode,
    SchemeConfig,
};
use crate::error::{Error, Result};
use crate::outage::{is_outage, outage_prob_mc, outage_prob_rank1, ThresholdSpec};
use crate::rng::{trial_stream, TrialRng};

/// Which per-stage threshold exponent the long-term plan uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageThresholdMode {
    /// The bounded-deadline exponent `f(r, D)` at every stage.
    #[default]
    Canonical,
    /// The literal per-stage formula, kept for cross-reference despite its
    /// missing stage dependence.
    Printed,
}

/// Calibration settings for the printed power schedule, whose stage
/// exponents depend on the stage outage probabilities themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrationConfig {
    /// Monte Carlo trials per stage when no closed form applies.
    pub trials: u64,
    /// Seed for calibration streams, independent of the batch seed.
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            trials: 200_000,
            seed: 0x5EED_CA1B,
        }
    }
}

/// Per-stage thresholds and power exponents, fully determined before any
/// trial runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolPlan {
    deadline: Deadline,
    stages: Vec<ThresholdSpec>,
}

impl ProtocolPlan {
    /// Builds the plan for a scheme with canonical thresholds and default
    /// calibration.
    pub fn build(config: &AntennaConfig, scheme: &SchemeConfig, snr: SnrPoint) -> Result<Self> {
        Self::build_with(
            config,
            scheme,
            snr,
            StageThresholdMode::Canonical,
            CalibrationConfig::default(),
        )
    }

    /// Builds the plan with explicit threshold mode and calibration.
    pub fn build_with(
        config: &AntennaConfig,
        scheme: &SchemeConfig,
        snr: SnrPoint,
        threshold_mode: StageThresholdMode,
        calibration: CalibrationConfig,
    ) -> Result<Self> {
        if scheme.multiplexing > config.min_mn() as f64 {
            return Err(Error::InvalidConfig(format!(
                "multiplexing gain {} exceeds min(M,N) = {}",
                scheme.multiplexing,
                config.min_mn()
            )));
        }
        let stages = match (scheme.deadline, scheme.power_mode) {
            (Deadline::Unbounded, PowerMode::ShortTerm) => {
                let spec = ThresholdSpec::unbounded(config);
                // The threshold must be evaluable at this SNR; fail now
                // rather than on the first trial.
                crate::outage::threshold_value(&spec, snr)?;
                vec![spec]
            }
            (Deadline::Unbounded, _) => {
                return Err(Error::InvalidConfig(
                    "the unbounded-deadline scheme has no power-controlled variant".into(),
                ));
            }
            (Deadline::Bounded(d), PowerMode::ShortTerm) => {
                let spec =
                    ThresholdSpec::short_term(config, scheme.blocklength, d, scheme.multiplexing)?;
                vec![spec; d as usize]
            }
            (Deadline::Bounded(d), PowerMode::LongTermExponent) => {
                let schedule =
                    power_schedule_exponent(config, scheme.blocklength, d, scheme.multiplexing)?;
                build_long_term_stages(config, scheme, d, &schedule, threshold_mode)?
            }
            (Deadline::Bounded(d), PowerMode::LongTermPrinted) => {
                let probs = calibrate_stage_outage_probs(
                    config,
                    scheme,
                    snr,
                    d,
                    threshold_mode,
                    calibration,
                )?;
                let schedule = power_schedule_printed(d, &probs)?;
                build_long_term_stages(config, scheme, d, &schedule, threshold_mode)?
            }
        };
        Ok(Self {
            deadline: scheme.deadline,
            stages,
        })
    }

    /// Threshold spec governing stage `i` (1-based).
    pub fn stage(&self, i: u32) -> &ThresholdSpec {
        match self.deadline {
            Deadline::Unbounded => &self.stages[0],
            Deadline::Bounded(_) => &self.stages[(i as usize - 1).min(self.stages.len() - 1)],
        }
    }

    /// Power exponents per stage (a single entry for unbounded plans).
    pub fn schedule(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.power_exponent).collect()
    }

    pub fn deadline(&self) -> Deadline {
        self.deadline
    }
}

fn stage_threshold_exponent(
    config: &AntennaConfig,
    scheme: &SchemeConfig,
    deadline: u32,
    mode: StageThresholdMode,
) -> Result<f64> {
    match mode {
        StageThresholdMode::Canonical => {
            threshold_exponent(config, scheme.blocklength, deadline, scheme.multiplexing)
        }
        StageThresholdMode::Printed => crate::dmt::printed_stage_threshold(
            config,
            scheme.blocklength,
            deadline,
            scheme.multiplexing,
            crate::dmt::AlphaConvention::VertexConsistent,
        ),
    }
}

fn build_long_term_stages(
    config: &AntennaConfig,
    scheme: &SchemeConfig,
    deadline: u32,
    schedule: &[f64],
    mode: StageThresholdMode,
) -> Result<Vec<ThresholdSpec>> {
    let f = stage_threshold_exponent(config, scheme, deadline, mode)?;
    Ok(schedule
        .iter()
        .enumerate()
        .map(|(i, &g)| ThresholdSpec::long_term_stage(config, i as u32 + 1, f, g))
        .collect())
}

/// Stage-by-stage outage probabilities feeding the printed schedule:
/// stage `i`'s power exponent depends on the probabilities of stages
/// `1..i`, so they are resolved sequentially. Rank-1 links use the closed
/// form; anything else falls back to Monte Carlo calibration.
fn calibrate_stage_outage_probs(
    config: &AntennaConfig,
    scheme: &SchemeConfig,
    snr: SnrPoint,
    deadline: u32,
    mode: StageThresholdMode,
    calibration: CalibrationConfig,
) -> Result<Vec<f64>> {
    let f = stage_threshold_exponent(config, scheme, deadline, mode)?;
    let mut probs = Vec::with_capacity(deadline as usize - 1);
    let mut cumulative = 0.0;
    for stage in 1..deadline {
        let g = 1.0 + cumulative;
        let spec = ThresholdSpec::long_term_stage(config, stage, f, g);
        let p = if config.is_rank_one() {
            outage_prob_rank1(config.max_mn(), snr, &spec)?.value
        } else {
            outage_prob_mc(
                config,
                &spec,
                snr,
                calibration.trials,
                calibration.seed.wrapping_add(u64::from(stage)),
            )?
            .value
        };
        probs.push(p);
        cumulative += p;
    }
    Ok(probs)
}

/// Outcome of one message attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    /// Decoding delay in channel uses: blocklength times intervals consumed.
    pub delay_t: u64,
    /// Coherence interval in which transmission happened (1-based).
    pub transmitted_stage: u32,
    /// Power exponent used at transmission.
    pub power_exponent_used: f64,
    /// Random-coding error bound of the transmitted block, in [0, 1].
    pub error_bound: f64,
    /// True when the deadline forced the transmission.
    pub forced: bool,
}

/// Monte Carlo aggregate over one `(scheme, SNR)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    /// Sample mean of the per-trial error bounds.
    pub mean_error_bound: f64,
    /// Mean decoding delay in channel uses; at least the blocklength.
    pub mean_delay: f64,
    /// Count of trials per transmission stage.
    pub delay_histogram: BTreeMap<u32, u64>,
    /// Realized rate exponent `r l / E[T]`, at most `r`.
    pub empirical_rate_exponent: f64,
    /// Sample mean of `rho^{g_used}` normalized by `rho`; exactly 1 for
    /// short-term schemes.
    pub avg_power_linear: f64,
    pub trials: u64,
    pub snr: SnrPoint,
}

/// Runs a single trial against a prepared plan, consuming one fading draw
/// per stage from the caller's stream.
pub fn run_trial(
    config: &AntennaConfig,
    scheme: &SchemeConfig,
    plan: &ProtocolPlan,
    snr: SnrPoint,
    rng: &mut TrialRng,
) -> Result<TrialOutcome> {
    let mut stage: u32 = 1;
    loop {
        let h = sample_channel(config, rng);
        let spec = plan.stage(stage);
        let forced = matches!(scheme.deadline, Deadline::Bounded(d) if stage >= d);
        let transmit = forced || !is_outage(&h, spec, snr)?;
        if transmit {
            let error_bound = random_coding_error_bound(
                &h,
                snr,
                spec.power_exponent,
                scheme.multiplexing,
                scheme.blocklength,
            )?;
            return Ok(TrialOutcome {
                delay_t: u64::from(scheme.blocklength) * u64::from(stage),
                transmitted_stage: stage,
                power_exponent_used: spec.power_exponent,
                error_bound,
                forced,
            });
        }
        if matches!(scheme.deadline, Deadline::Unbounded) && stage >= scheme.stage_cap {
            return Err(Error::StageCapExceeded {
                cap: scheme.stage_cap,
                rho: snr.rho(),
            });
        }
        stage += 1;
    }
}

const BATCH_CHUNK: u64 = 8192;

#[derive(Default)]
struct BatchAccumulator {
    sum_error_bound: f64,
    sum_stages: u64,
    sum_power_ratio: f64,
    histogram: BTreeMap<u32, u64>,
}

impl BatchAccumulator {
    fn add(&mut self, outcome: &TrialOutcome, log_rho: f64) {
        self.sum_error_bound += outcome.error_bound;
        self.sum_stages += u64::from(outcome.transmitted_stage);
        self.sum_power_ratio += ((outcome.power_exponent_used - 1.0) * log_rho).exp();
        *self.histogram.entry(outcome.transmitted_stage).or_insert(0) += 1;
    }

    fn merge(&mut self, other: BatchAccumulator) {
        self.sum_error_bound += other.sum_error_bound;
        self.sum_stages += other.sum_stages;
        self.sum_power_ratio += other.sum_power_ratio;
        for (stage, count) in other.histogram {
            *self.histogram.entry(stage).or_insert(0) += count;
        }
    }
}

/// Runs a batch of independent trials and aggregates them.
///
/// Trial `t` owns stream `(seed, t)`. Work is chunked at a fixed size and
/// partial sums merge in chunk order, so the summary is bitwise
/// reproducible for a given `(seed, trials)` on any worker count.
pub fn run_batch(
    config: &AntennaConfig,
    scheme: &SchemeConfig,
    plan: &ProtocolPlan,
    snr: SnrPoint,
    trials: u64,
    seed: u64,
) -> Result<SimSummary> {
    if trials == 0 {
        return Err(Error::Precondition("trial count must be >= 1".into()));
    }
    let chunks = trials.div_ceil(BATCH_CHUNK);
    let partials: Vec<BatchAccumulator> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * BATCH_CHUNK;
            let end = ((chunk + 1) * BATCH_CHUNK).min(trials);
            let mut acc = BatchAccumulator::default();
            for trial in start..end {
                let mut rng = trial_stream(seed, trial);
                let outcome = run_trial(config, scheme, plan, snr, &mut rng)?;
                acc.add(&outcome, snr.log_rho());
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut total = BatchAccumulator::default();
    for partial in partials {
        total.merge(partial);
    }

    let n = trials as f64;
    let mean_delay = f64::from(scheme.blocklength) * (total.sum_stages as f64 / n);
    Ok(SimSummary {
        mean_error_bound: total.sum_error_bound / n,
        mean_delay,
        delay_histogram: total.histogram,
        empirical_rate_exponent: scheme.multiplexing * f64::from(scheme.blocklength) / mean_delay,
        avg_power_linear: total.sum_power_ratio / n,
        trials,
        snr,
    })
}

/// Realized multiplexing gain of a summary: `r l / E[T]`.
pub fn empirical_multiplexing(summary: &SimSummary, multiplexing: f64, blocklength: u32) -> f64 {
    multiplexing * f64::from(blocklength) / summary.mean_delay
}

/// One point of a diversity-slope regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopePoint {
    /// Natural log of the linear SNR.
    pub log_rho: f64,
    /// A positive error-probability-like value at that SNR.
    pub value: f64,
}

/// Result of the slope regression.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimate {
    /// Diversity estimate: OLS slope of `-ln value` against `ln rho`.
    pub slope: f64,
    /// Standard error of the slope from the regression residuals.
    pub stderr: f64,
    /// OLS intercept.
    pub intercept: f64,
    /// `ln rho` of the points used.
    pub snr_points: Vec<f64>,
    /// `ln rho` of points excluded (zero or below the resolvability floor).
    pub excluded: Vec<f64>,
}

/// Diversity estimate from Monte Carlo summaries.
///
/// Points with a zero mean bound carry no slope information and are
/// excluded; so are points at or below the resolvability floor
/// `10 / trials`, where the estimate is quantization-dominated. At least
/// three points must survive.
pub fn estimate_diversity(summaries: &[SimSummary]) -> Result<SlopeEstimate> {
    let mut points = Vec::with_capacity(summaries.len());
    let mut excluded = Vec::new();
    for s in summaries {
        let floor = 10.0 / s.trials as f64;
        if s.mean_error_bound > 0.0 && s.mean_error_bound > floor {
            points.push(SlopePoint {
                log_rho: s.snr.log_rho(),
                value: s.mean_error_bound,
            });
        } else {
            excluded.push(s.snr.log_rho());
        }
    }
    let mut estimate = estimate_diversity_from_points(&points)?;
    estimate.excluded.extend(excluded);
    estimate.excluded.sort_by(f64::total_cmp);
    Ok(estimate)
}

/// OLS of `-ln value` against `ln rho` over explicit points. Non-positive
/// values are excluded with a diagnostic; at least three usable points are
/// required.
pub fn estimate_diversity_from_points(points: &[SlopePoint]) -> Result<SlopeEstimate> {
    let mut usable: Vec<SlopePoint> = Vec::with_capacity(points.len());
    let mut excluded = Vec::new();
    for p in points {
        if p.value > 0.0 && p.value.is_finite() && p.log_rho.is_finite() {
            usable.push(*p);
        } else {
            excluded.push(p.log_rho);
        }
    }
    usable.sort_by(|a, b| a.log_rho.total_cmp(&b.log_rho));
    let n = usable.len();
    if n < 3 {
        return Err(Error::Estimation(format!(
            "need at least 3 usable SNR points, have {n} ({} excluded)",
            excluded.len()
        )));
    }
    let nf = n as f64;
    let xs: Vec<f64> = usable.iter().map(|p| p.log_rho).collect();
    let ys: Vec<f64> = usable.iter().map(|p| -p.value.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Estimation("SNR points are not distinct".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fitted = intercept + slope * x;
            (y - fitted).powi(2)
        })
        .sum();
    let stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeEstimate {
        slope,
        stderr,
        intercept,
        snr_points: xs,
        excluded,
    })
}

/// Per-stage budget contribution in a power audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageContribution {
    pub stage: u32,
    pub power_exponent: f64,
    /// `rho^{g_i - 1} * Pr(reach stage i)`, the stage's share of the
    /// long-term budget in units of the budget itself.
    pub contribution: f64,
    pub pass: bool,
}

/// Audit of one summary against the long-term power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    pub snr_db: f64,
    pub avg_power_linear: f64,
    pub stage_contributions: Vec<StageContribution>,
    pub pass: bool,
}

/// Full power audit across an SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub budget_multiplier: f64,
    pub entries: Vec<AuditEntry>,
    pub pass: bool,
}

/// Checks realized average power against a budget multiplier, and for
/// boosted schedules also each stage's expected contribution
/// `rho^{g_i - 1} * Pr(reach stage i)`.
pub fn audit_power(
    summaries: &[SimSummary],
    plan: &ProtocolPlan,
    budget_multiplier: f64,
) -> AuditReport {
    let schedule = plan.schedule();
    let boosted = schedule.iter().any(|&g| g > 1.0);
    let entries: Vec<AuditEntry> = summaries
        .iter()
        .map(|summary| {
            let avg_pass = summary.avg_power_linear <= budget_multiplier;
            let mut stage_contributions = Vec::new();
            if boosted {
                let trials = summary.trials as f64;
                for (idx, &g) in schedule.iter().enumerate() {
                    let stage = idx as u32 + 1;
                    let reach: u64 = summary
                        .delay_histogram
                        .iter()
                        .filter(|&(&s, _)| s >= stage)
                        .map(|(_, &c)| c)
                        .sum();
                    let contribution = if reach == 0 {
                        0.0
                    } else {
                        ((g - 1.0) * summary.snr.log_rho()).exp() * (reach as f64 / trials)
                    };
                    stage_contributions.push(StageContribution {
                        stage,
                        power_exponent: g,
                        contribution,
                        pass: contribution <= budget_multiplier,
                    });
                }
            }
            let pass = avg_pass && stage_contributions.iter().all(|c| c.pass);
            AuditEntry {
                snr_db: summary.snr.db(),
                avg_power_linear: summary.avg_power_linear,
                stage_contributions,
                pass,
            }
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    AuditReport {
        budget_multiplier,
        entries,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::mutual_info;
    use crate::outage::threshold_value;

    fn cfg(tx: usize, rx: usize) -> AntennaConfig {
        AntennaConfig::new(tx, rx).unwrap()
    }

    fn scheme(l: u32, deadline: Deadline, r: f64, mode: PowerMode) -> SchemeConfig {
        SchemeConfig::new(l, deadline, r, mode).unwrap()
    }

    #[test]
    fn deadline_one_matches_no_csi_baseline_trial_by_trial() {
        // With D = 1 the bit is never used: outcomes must equal a plain
        // always-transmit simulation on the same streams, bitwise.
        let c = cfg(2, 2);
        let s = scheme(8, Deadline::Bounded(1), 0.5, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(316.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        for trial in 0..1000u64 {
            let mut rng = trial_stream(11, trial);
            let outcome = run_trial(&c, &s, &plan, snr, &mut rng).unwrap();
            let mut rng = trial_stream(11, trial);
            let h = sample_channel(&c, &mut rng);
            let baseline = random_coding_error_bound(&h, snr, 1.0, 0.5, 8).unwrap();
            assert_eq!(outcome.error_bound, baseline);
            assert_eq!(outcome.transmitted_stage, 1);
            assert!(outcome.forced);
        }
    }

    #[test]
    fn unbounded_deferral_fraction_matches_oracle() {
        let c = cfg(1, 1);
        let s = scheme(4, Deadline::Unbounded, 0.25, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(10.0f64.exp()).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let trials = 100_000u64;
        let summary = run_batch(&c, &s, &plan, snr, trials, 21).unwrap();
        let deferred: u64 = summary
            .delay_histogram
            .iter()
            .filter(|&(&stage, _)| stage > 1)
            .map(|(_, &c)| c)
            .sum();
        let fraction = deferred as f64 / trials as f64;
        let p = outage_prob_rank1(1, snr, &ThresholdSpec::unbounded(&c))
            .unwrap()
            .value;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (fraction - p).abs() <= 3.0 * se,
            "deferral fraction {fraction} vs oracle {p} (se {se})"
        );
    }

    #[test]
    fn bounded_delay_histogram_is_truncated_geometric() {
        // Stage outage probability p known in closed form; the histogram
        // must match p^{i-1}(1-p) for i < D and p^{D-1} at D by a
        // chi-square test at the 1% level (3 dof, critical 11.345).
        let c = cfg(1, 1);
        let d = 4u32;
        let s = scheme(8, Deadline::Bounded(d), 0.0, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(100.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let p = outage_prob_rank1(1, snr, plan.stage(1)).unwrap().value;
        let trials = 100_000u64;
        let summary = run_batch(&c, &s, &plan, snr, trials, 5).unwrap();
        let mut chi2 = 0.0;
        for stage in 1..=d {
            let expected = if stage < d {
                p.powi(stage as i32 - 1) * (1.0 - p)
            } else {
                p.powi(d as i32 - 1)
            } * trials as f64;
            let observed = *summary.delay_histogram.get(&stage).unwrap_or(&0) as f64;
            chi2 += (observed - expected).powi(2) / expected;
        }
        assert!(chi2 < 11.345, "chi-square statistic {chi2}");
    }

    #[test]
    fn delays_respect_the_deadline() {
        let c = cfg(2, 2);
        let d = 3u32;
        let s = scheme(8, Deadline::Bounded(d), 1.0, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(20.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        for trial in 0..2000u64 {
            let mut rng = trial_stream(31, trial);
            let o = run_trial(&c, &s, &plan, snr, &mut rng).unwrap();
            assert!(o.delay_t <= u64::from(s.blocklength) * u64::from(d));
            assert_eq!(
                o.delay_t,
                u64::from(s.blocklength) * u64::from(o.transmitted_stage)
            );
            assert_eq!(o.forced, o.transmitted_stage == d);
        }
    }

    #[test]
    fn deferral_trace_replays_consistently() {
        // A transmission at stage i < D implies stages 1..i-1 were in
        // outage and stage i was not; replay the stream to check.
        let c = cfg(2, 1);
        let d = 4u32;
        let s = scheme(6, Deadline::Bounded(d), 0.5, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(25.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        for trial in 0..2000u64 {
            let mut rng = trial_stream(47, trial);
            let o = run_trial(&c, &s, &plan, snr, &mut rng).unwrap();
            let mut replay = trial_stream(47, trial);
            for stage in 1..=o.transmitted_stage {
                let h = sample_channel(&c, &mut replay);
                let outage = is_outage(&h, plan.stage(stage), snr).unwrap();
                if stage < o.transmitted_stage {
                    assert!(outage, "trial {trial}: stage {stage} should have deferred");
                } else if !o.forced {
                    assert!(!outage, "trial {trial}: transmitted in outage");
                }
            }
        }
    }

    #[test]
    fn single_trial_batch_equals_the_trial() {
        let c = cfg(1, 1);
        let s = scheme(4, Deadline::Bounded(2), 0.25, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(50.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let summary = run_batch(&c, &s, &plan, snr, 1, 9).unwrap();
        let mut rng = trial_stream(9, 0);
        let outcome = run_trial(&c, &s, &plan, snr, &mut rng).unwrap();
        assert_eq!(summary.mean_error_bound, outcome.error_bound);
        assert_eq!(summary.mean_delay, outcome.delay_t as f64);
        assert_eq!(summary.trials, 1);
        assert_eq!(
            summary.delay_histogram.get(&outcome.transmitted_stage),
            Some(&1)
        );
    }

    #[test]
    fn short_term_average_power_is_exactly_one() {
        let c = cfg(2, 2);
        let s = scheme(8, Deadline::Bounded(3), 0.5, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(100.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let summary = run_batch(&c, &s, &plan, snr, 10_000, 13).unwrap();
        assert_eq!(summary.avg_power_linear, 1.0);
    }

    #[test]
    fn batches_are_bitwise_deterministic() {
        let c = cfg(2, 2);
        let s = scheme(8, Deadline::Bounded(2), 0.75, PowerMode::LongTermExponent);
        let snr = SnrPoint::from_linear(200.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let a = run_batch(&c, &s, &plan, snr, 30_000, 99).unwrap();
        let b = run_batch(&c, &s, &plan, snr, 30_000, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unbounded_mean_delay_matches_geometric_law() {
        // At rho = e^12, E[T]/l - 1 = p/(1-p) with p on the 1/144 scale.
        let c = cfg(1, 1);
        let s = scheme(4, Deadline::Unbounded, 0.25, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(12.0f64.exp()).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let summary = run_batch(&c, &s, &plan, snr, 100_000, 17).unwrap();
        let excess = summary.mean_delay / f64::from(s.blocklength) - 1.0;
        assert!(
            (0.5 / 144.0..=2.0 / 144.0).contains(&excess),
            "excess delay {excess}"
        );
        // Realized multiplexing sits just below r.
        let emp = empirical_multiplexing(&summary, 0.25, 4);
        assert!(
            (0.25 * (1.0 - 2.0 / 144.0) * 0.999..=0.25).contains(&emp),
            "emp {emp}"
        );
        assert!(summary.empirical_rate_exponent <= 0.25);
    }

    #[test]
    fn empirical_multiplexing_exact_cases() {
        let summary = |mean_delay: f64| SimSummary {
            mean_error_bound: 0.1,
            mean_delay,
            delay_histogram: BTreeMap::new(),
            empirical_rate_exponent: 0.0,
            avg_power_linear: 1.0,
            trials: 1,
            snr: SnrPoint::from_linear(100.0).unwrap(),
        };
        // No deferrals: realized multiplexing is exactly r.
        assert_eq!(empirical_multiplexing(&summary(4.0), 0.25, 4), 0.25);
        // Every trial deferred to the deadline D: exactly r / D.
        let d = 5.0;
        assert_eq!(empirical_multiplexing(&summary(4.0 * d), 0.25, 4), 0.25 / d);
    }

    #[test]
    fn empirical_multiplexing_deviation_shrinks_with_snr() {
        let c = cfg(1, 1);
        let s = scheme(4, Deadline::Unbounded, 0.25, PowerMode::ShortTerm);
        let mut deviations = Vec::new();
        for &log_rho in &[6.0f64, 9.0, 12.0] {
            let snr = SnrPoint::from_linear(log_rho.exp()).unwrap();
            let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
            let summary = run_batch(&c, &s, &plan, snr, 100_000, 23).unwrap();
            deviations.push(0.25 - empirical_multiplexing(&summary, 0.25, 4));
        }
        assert!(
            deviations[0] > deviations[1] && deviations[1] > deviations[2],
            "{deviations:?}"
        );
    }

    #[test]
    fn stage_cap_aborts_pathological_unbounded_runs() {
        let c = cfg(1, 1);
        let mut s = scheme(4, Deadline::Unbounded, 0.0, PowerMode::ShortTerm);
        s.stage_cap = 4;
        // Just above e: deferral probability ~0.45, so a cap of 4 is hit
        // quickly across a few thousand trials.
        let snr = SnrPoint::from_linear(1.2f64.exp()).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let result = run_batch(&c, &s, &plan, snr, 5_000, 3);
        assert!(matches!(
            result,
            Err(Error::StageCapExceeded { cap: 4, .. })
        ));
    }

    #[test]
    fn unbounded_plan_rejects_low_snr_and_power_control() {
        let c = cfg(1, 1);
        let s = scheme(4, Deadline::Unbounded, 0.0, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(2.0).unwrap();
        assert!(matches!(
            ProtocolPlan::build(&c, &s, snr),
            Err(Error::Domain(_))
        ));
        let s = scheme(4, Deadline::Unbounded, 0.0, PowerMode::LongTermExponent);
        let snr = SnrPoint::from_linear(100.0).unwrap();
        assert!(matches!(
            ProtocolPlan::build(&c, &s, snr),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn long_term_stage_thresholds_follow_the_schedule() {
        let c = cfg(3, 1);
        let s = scheme(10, Deadline::Bounded(3), 0.0, PowerMode::LongTermExponent);
        let snr = SnrPoint::from_linear(1000.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let expected = power_schedule_exponent(&c, 10, 3, 0.0).unwrap();
        assert_eq!(plan.schedule(), expected);
        // Thresholds share the canonical exponent but climb in power.
        let f = threshold_exponent(&c, 10, 3, 0.0).unwrap();
        for stage in 1..=3u32 {
            let spec = plan.stage(stage);
            assert_eq!(spec.exponent_f, f);
            assert_eq!(spec.power_exponent, expected[stage as usize - 1]);
        }
        // Boosted stages see more mutual information for the same channel.
        let h = sample_channel(&c, &mut trial_stream(1, 1));
        let i1 = mutual_info(&h, snr, plan.stage(1).power_exponent).unwrap();
        let i2 = mutual_info(&h, snr, plan.stage(2).power_exponent).unwrap();
        assert!(i2 >= i1);
        let thr = threshold_value(plan.stage(2), snr).unwrap();
        assert!(thr > 0.0);
    }

    #[test]
    fn printed_schedule_calibrates_to_small_boosts() {
        let c = cfg(3, 1);
        let s = scheme(10, Deadline::Bounded(3), 0.0, PowerMode::LongTermPrinted);
        let snr = SnrPoint::from_linear(1000.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let schedule = plan.schedule();
        assert_eq!(schedule[0], 1.0);
        // The literal schedule adds bare probabilities: barely above 1.
        assert!(schedule[1] > 1.0 && schedule[1] < 1.01, "{schedule:?}");
        assert!(schedule[2] >= schedule[1] && schedule[2] < 1.01);
        let summary = run_batch(&c, &s, &plan, snr, 50_000, 41).unwrap();
        let report = audit_power(&[summary], &plan, 2.0);
        assert!(report.pass);
        let entry = &report.entries[0];
        assert!(entry.avg_power_linear < 1.01);
    }

    #[test]
    fn exponent_schedule_passes_the_budget_audit() {
        let c = cfg(3, 1);
        let s = scheme(10, Deadline::Bounded(3), 0.0, PowerMode::LongTermExponent);
        let snr = SnrPoint::from_linear(1000.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let summary = run_batch(&c, &s, &plan, snr, 200_000, 43).unwrap();
        let report = audit_power(&[summary], &plan, 2.0);
        assert!(report.pass, "{report:?}");
        for contribution in &report.entries[0].stage_contributions {
            assert!(contribution.contribution <= 2.0);
        }
    }

    #[test]
    fn short_term_audit_trivially_passes() {
        let c = cfg(2, 2);
        let s = scheme(8, Deadline::Bounded(2), 0.5, PowerMode::ShortTerm);
        let snr = SnrPoint::from_linear(100.0).unwrap();
        let plan = ProtocolPlan::build(&c, &s, snr).unwrap();
        let summary = run_batch(&c, &s, &plan, snr, 5_000, 2).unwrap();
        let report = audit_power(&[summary], &plan, 2.0);
        assert!(report.pass);
        assert_eq!(report.entries[0].avg_power_linear, 1.0);
        assert!(report.entries[0].stage_contributions.is_empty());
    }

    #[test]
    fn slope_of_exact_power_law_is_exact() {
        let points: Vec<SlopePoint> = [1e2, 1e3, 1e4, 1e5]
            .iter()
            .map(|&rho: &f64| SlopePoint {
                log_rho: rho.ln(),
                value: rho.powf(-2.0),
            })
            .collect();
        let est = estimate_diversity_from_points(&points).unwrap();
        assert!((est.slope - 2.0).abs() < 1e-9, "slope {}", est.slope);
        assert!(est.stderr < 1e-6);
        assert_eq!(est.snr_points.len(), 4);
    }

    #[test]
    fn slope_of_log_corrected_law_lands_below_the_exponent() {
        // value = rho^{-d} (ln rho)^{2l} with d = 2, l = 2: the slope
        // approaches d from below on a finite grid.
        let points: Vec<SlopePoint> = (0..5)
            .map(|i| {
                let log_rho = (4.0 + i as f64) * 10.0f64.ln();
                SlopePoint {
                    log_rho,
                    value: (-2.0 * log_rho).exp() * log_rho.powi(4),
                }
            })
            .collect();
        let est = estimate_diversity_from_points(&points).unwrap();
        assert!(
            est.slope >= 1.5 && est.slope <= 2.0,
            "slope {} outside [1.5, 2.0]",
            est.slope
        );
    }

    #[test]
    fn slope_estimation_excludes_and_errors() {
        let snr = |rho: f64| SnrPoint::from_linear(rho).unwrap();
        let summary = |rho: f64, mean: f64, trials: u64| SimSummary {
            mean_error_bound: mean,
            mean_delay: 4.0,
            delay_histogram: BTreeMap::new(),
            empirical_rate_exponent: 0.0,
            avg_power_linear: 1.0,
            trials,
            snr: snr(rho),
        };
        // A zero point is excluded but the rest carry the regression.
        let summaries = vec![
            summary(1e2, 1e-2, 1_000_000),
            summary(1e3, 1e-3, 1_000_000),
            summary(1e4, 1e-4, 1_000_000),
            summary(1e5, 0.0, 1_000_000),
        ];
        let est = estimate_diversity(&summaries).unwrap();
        assert_eq!(est.snr_points.len(), 3);
        assert_eq!(est.excluded.len(), 1);
        assert!((est.slope - 1.0).abs() < 1e-9);
        // Below the resolvability floor 10/trials the point is dropped too.
        let summaries = vec![
            summary(1e2, 1e-2, 100),
            summary(1e3, 1e-3, 100),
            summary(1e4, 1e-4, 100),
        ];
        assert!(matches!(
            estimate_diversity(&summaries),
            Err(Error::Estimation(_))
        ));
    }
}
