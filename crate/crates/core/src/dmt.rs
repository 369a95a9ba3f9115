//! Closed-form diversity-multiplexing curves and the delay-tradeoff bounds:
//! the no-CSI baseline curve, the unbounded-delay bound, the short-term and
//! long-term bounded-delay bounds with their N=1 specializations, the
//! threshold exponent, the per-stage power schedules, and the delay needed
//! to come within a target fraction of the unbounded-delay diversity.
//!
//! Two printed-form variants are kept available for cross-reference: the
//! segment coefficient `alpha_k` (which contradicts the curve's vertices)
//! and the N=1 short-term specialization whose numerator differs from the
//! general bound by one. The canonical paths never use them.

use crate::channel::AntennaConfig;
use crate::error::{Error, Result};

/// Piecewise-linear diversity-vs-multiplexing curve, stored as vertices
/// with strictly increasing multiplexing coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DmtCurve {
    vertices: Vec<(f64, f64)>,
}

impl DmtCurve {
    /// Vertex list `(r, d)`.
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Largest multiplexing gain in the curve's domain.
    pub fn max_multiplexing(&self) -> f64 {
        self.vertices.last().map(|&(r, _)| r).unwrap_or(0.0)
    }

    /// Linear interpolation between vertices; exact at vertices.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !r.is_finite() || r < 0.0 || r > self.max_multiplexing() {
            return Err(Error::Domain(format!(
                "multiplexing gain {r} outside curve domain [0, {}]",
                self.max_multiplexing()
            )));
        }
        let idx = self
            .vertices
            .windows(2)
            .position(|w| r <= w[1].0)
            .unwrap_or(self.vertices.len().saturating_sub(2));
        let (r0, d0) = self.vertices[idx];
        let (r1, d1) = self.vertices[idx + 1];
        if r == r0 {
            return Ok(d0);
        }
        if r == r1 {
            return Ok(d1);
        }
        Ok(d0 + (d1 - d0) * (r - r0) / (r1 - r0))
    }
}

/// Which segment coefficient convention to use for the long-term bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaConvention {
    /// `alpha_k` derived from the curve's vertices: `d(k) + k * beta_k`.
    /// This is the convention every consistency reduction agrees with.
    #[default]
    VertexConsistent,
    /// The literal `alpha_k = MN - 2k(M+N) + 3k^2 - k`, kept only so the
    /// discrepancy with the vertices stays inspectable.
    Printed,
}

/// Deadline on the number of coherence intervals a message may wait.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deadline {
    /// Transmission forced in interval `D` at the latest.
    Bounded(u32),
    /// Wait for a good interval indefinitely.
    Unbounded,
}

/// Power constraint regime of a deferral scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// Every transmission at power `rho`.
    ShortTerm,
    /// Long-term constraint with the literal probability-sum schedule.
    LongTermPrinted,
    /// Long-term constraint with the exponent-domain schedule that keeps
    /// each stage's expected power contribution at O(rho).
    LongTermExponent,
}

/// Full description of a deferral scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    /// Codeword blocklength `l` in channel uses.
    pub blocklength: u32,
    /// Worst-case decoding deadline in coherence intervals.
    pub deadline: Deadline,
    /// Target multiplexing gain `r`.
    pub multiplexing: f64,
    /// Power constraint regime.
    pub power_mode: PowerMode,
    /// Abort guard for unbounded-deadline simulation.
    pub stage_cap: u32,
}

impl SchemeConfig {
    pub const DEFAULT_STAGE_CAP: u32 = 1_000_000;

    pub fn new(
        blocklength: u32,
        deadline: Deadline,
        multiplexing: f64,
        power_mode: PowerMode,
    ) -> Result<Self> {
        if blocklength == 0 {
            return Err(Error::InvalidConfig("blocklength must be >= 1".into()));
        }
        if let Deadline::Bounded(0) = deadline {
            return Err(Error::InvalidConfig("deadline must be >= 1".into()));
        }
        if !multiplexing.is_finite() || multiplexing < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "multiplexing gain must be >= 0, got {multiplexing}"
            )));
        }
        Ok(Self {
            blocklength,
            deadline,
            multiplexing,
            power_mode,
            stage_cap: Self::DEFAULT_STAGE_CAP,
        })
    }
}

/// Deadline needed to reach a `(1 - epsilon)` fraction of the
/// unbounded-delay diversity, with or without power control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRequirement {
    pub epsilon: f64,
    pub required_d: u32,
    pub power_control: bool,
}

/// The no-CSI tradeoff curve: vertices `(k, (M-k)(N-k))` for
/// `k = 0..min(M,N)`.
pub fn dmt_no_csi(config: &AntennaConfig) -> DmtCurve {
    let m = config.tx() as f64;
    let n = config.rx() as f64;
    let vertices = (0..=config.min_mn())
        .map(|k| {
            let k = k as f64;
            (k, (m - k) * (n - k))
        })
        .collect();
    DmtCurve { vertices }
}

/// Unbounded-deadline diversity lower bound `l (min(M,N) - r)`.
pub fn unbounded_delay_bound(config: &AntennaConfig, blocklength: u32, r: f64) -> f64 {
    f64::from(blocklength) * (config.min_mn() as f64 - r)
}

/// Threshold exponent for the bounded-deadline short-term scheme:
/// `f = r + [d(r) + (D-1) M_eq (min(M,N) - r)] / [l + (D-1) M_eq]`.
pub fn threshold_exponent(
    config: &AntennaConfig,
    blocklength: u32,
    deadline: u32,
    r: f64,
) -> Result<f64> {
    if deadline == 0 {
        return Err(Error::Precondition("deadline must be >= 1".into()));
    }
    let d_r = dmt_no_csi(config).eval(r)?;
    let m_eq = config.m_eq() as f64;
    let min_mn = config.min_mn() as f64;
    let l = f64::from(blocklength);
    let extra = f64::from(deadline - 1) * m_eq;
    Ok(r + (d_r + extra * (min_mn - r)) / (l + extra))
}

/// Bounded-deadline short-term diversity lower bound `l (f(r, D) - r)`.
///
/// Requires `l >= M + N`.
pub fn short_term_bound(
    config: &AntennaConfig,
    blocklength: u32,
    deadline: u32,
    r: f64,
) -> Result<f64> {
    let min_len = config.tx() + config.rx();
    if (blocklength as usize) < min_len {
        return Err(Error::Precondition(format!(
            "short-term bound requires blocklength >= M + N = {min_len}, got {blocklength}"
        )));
    }
    let f = threshold_exponent(config, blocklength, deadline, r)?;
    Ok(f64::from(blocklength) * (f - r))
}

/// N=1 short-term specialization exactly as printed:
/// `l (M D - 1) (1 - r) / (l + M (D - 1))`.
///
/// The general bound reduces to `M D` in the numerator instead of
/// `M D - 1`; both are kept, neither silently corrected.
pub fn miso_short_term_printed(tx: usize, blocklength: u32, deadline: u32, r: f64) -> f64 {
    let m = tx as f64;
    let l = f64::from(blocklength);
    let d = f64::from(deadline);
    l * (m * d - 1.0) * (1.0 - r) / (l + m * (d - 1.0))
}

/// Equivalent delay of the power-controlled scheme.
///
/// `D(D+1)/2` when `M = N`; otherwise
/// `(1/(M-1)) (sum_{i=1..D} M_eq^i - D) - 1`, which is singular for
/// `M = 1, N != 1`.
pub fn equivalent_delay(config: &AntennaConfig, deadline: u32) -> Result<f64> {
    if deadline == 0 {
        return Err(Error::Precondition("deadline must be >= 1".into()));
    }
    let d = f64::from(deadline);
    if config.tx() == config.rx() {
        return Ok(d * (d + 1.0) / 2.0);
    }
    if config.tx() == 1 {
        return Err(Error::Domain(
            "equivalent delay is undefined for M=1 with M != N (1/(M-1) singular)".into(),
        ));
    }
    let m_eq = config.m_eq() as f64;
    let geom: f64 = (1..=deadline).map(|i| m_eq.powi(i as i32)).sum();
    Ok((geom - d) / (config.tx() as f64 - 1.0) - 1.0)
}

/// Segment index for a multiplexing gain: the segment to the right of `r`,
/// except at the curve's right endpoint where the left segment is used.
fn segment_index(config: &AntennaConfig, r: f64) -> usize {
    let min_mn = config.min_mn();
    if r >= min_mn as f64 {
        min_mn
    } else {
        (r.floor() as usize + 1).clamp(1, min_mn)
    }
}

/// Segment coefficients `(alpha_k, beta_k)` so that `d(r) = alpha_k - beta_k r`
/// on segment `k`, under the chosen convention.
pub fn segment_coefficients(
    config: &AntennaConfig,
    k: usize,
    convention: AlphaConvention,
) -> (f64, f64) {
    let m = config.tx() as f64;
    let n = config.rx() as f64;
    let kf = k as f64;
    let beta = m + n - 2.0 * kf + 1.0;
    let alpha = match convention {
        AlphaConvention::VertexConsistent => (m - kf) * (n - kf) + kf * beta,
        AlphaConvention::Printed => m * n - 2.0 * kf * (m + n) + 3.0 * kf * kf - kf,
    };
    (alpha, beta)
}

/// Long-term (power-controlled) diversity lower bound
/// `l / (l + D_eq M_eq) * (min(M,N) M_eq D_eq + alpha_k - (D_eq + beta_k) r)`
/// under the vertex-consistent coefficients.
///
/// Can go negative at large `r`; the raw value is returned and comparisons
/// clamp at zero where needed.
pub fn long_term_bound(
    config: &AntennaConfig,
    blocklength: u32,
    deadline: u32,
    r: f64,
) -> Result<f64> {
    long_term_bound_with(
        config,
        blocklength,
        deadline,
        r,
        AlphaConvention::VertexConsistent,
    )
}

/// Long-term bound with an explicit coefficient convention.
pub fn long_term_bound_with(
    config: &AntennaConfig,
    blocklength: u32,
    deadline: u32,
    r: f64,
    convention: AlphaConvention,
) -> Result<f64> {
    if !r.is_finite() || r < 0.0 || r > config.min_mn() as f64 {
        return Err(Error::Domain(format!(
            "multiplexing gain {r} outside [0, {}]",
            config.min_mn()
        )));
    }
    let deq = equivalent_delay(config, deadline)?;
    let m_eq = config.m_eq() as f64;
    let min_mn = config.min_mn() as f64;
    let l = f64::from(blocklength);
    let k = segment_index(config, r);
    let (alpha, beta) = segment_coefficients(config, k, convention);
    Ok(l / (l + deq * m_eq) * (min_mn * m_eq * deq + alpha - (deq + beta) * r))
}

/// N=1 long-term specialization: `l S / (l + S - M) * (1 - r)` with
/// `S = (M/(M-1)) (sum_{i=1..D} M^i - D)`. Requires `M >= 2`.
pub fn miso_long_term_bound(tx: usize, blocklength: u32, deadline: u32, r: f64) -> Result<f64> {
    if tx < 2 {
        return Err(Error::Domain(
            "N=1 long-term specialization requires M >= 2 (1/(M-1) singular)".into(),
        ));
    }
    if deadline == 0 {
        return Err(Error::Precondition("deadline must be >= 1".into()));
    }
    let m = tx as f64;
    let l = f64::from(blocklength);
    let geom: f64 = (1..=deadline).map(|i| m.powi(i as i32)).sum();
    let s = m / (m - 1.0) * (geom - f64::from(deadline));
    Ok(l * s / (l + s - m) * (1.0 - r))
}

/// Literal per-stage threshold exponent of the long-term scheme as printed.
/// Its right-hand side does not depend on the stage index and does not
/// reduce to the N=1 specialization; it exists behind a flag for
/// cross-reference only.
pub fn printed_stage_threshold(
    config: &AntennaConfig,
    blocklength: u32,
    deadline: u32,
    r: f64,
    convention: AlphaConvention,
) -> Result<f64> {
    if config.tx() < 2 {
        return Err(Error::Domain(
            "printed stage threshold requires M >= 2 (1/(M-1) singular)".into(),
        ));
    }
    if deadline == 0 {
        return Err(Error::Precondition("deadline must be >= 1".into()));
    }
    let m = config.tx() as f64;
    let m_eq = config.m_eq() as f64;
    let l = f64::from(blocklength);
    let k = segment_index(config, r);
    let (alpha, beta) = segment_coefficients(config, k, convention);
    let geom: f64 = (1..=deadline).map(|i| m_eq.powi(i as i32)).sum();
    let s = m / (m - 1.0) * (geom - f64::from(deadline));
    Ok(((l - beta) * r - s - alpha) / (l + s * (1.0 + alpha)))
}

/// Power-exponent schedule exactly as printed: `g_1 = 1` and
/// `g_i = 1 + sum_{j<i} Pr(outage at stage j)`.
///
/// `outage_probs` must supply at least `D - 1` entries in `[0, 1]`.
pub fn power_schedule_printed(deadline: u32, outage_probs: &[f64]) -> Result<Vec<f64>> {
    if deadline == 0 {
        return Err(Error::Precondition("deadline must be >= 1".into()));
    }
    let needed = deadline as usize - 1;
    if outage_probs.len() < needed {
        return Err(Error::Precondition(format!(
            "need {needed} stage outage probabilities, got {}",
            outage_probs.len()
        )));
    }
    if outage_probs[..needed]
        .iter()
        .any(|p| !(0.0..=1.0).contains(p))
    {
        return Err(Error::Precondition(
            "outage probabilities must lie in [0, 1]".into(),
        ));
    }
    let mut schedule = Vec::with_capacity(deadline as usize);
    let mut cumulative = 0.0;
    schedule.push(1.0);
    for &p in &outage_probs[..needed] {
        cumulative += p;
        schedule.push(1.0 + cumulative);
    }
    Ok(schedule)
}

/// Exponent-domain power schedule: `g_1 = 1` and
/// `g_{i+1} = 1 + sum_{j<=i} d_j`, where `d_j = M_eq (min(M,N) g_j - f)` is
/// the (conservative, steepest-segment) outage exponent of stage `j`'s
/// threshold event. By construction `rho^{g_i} * Pr(reach stage i)` stays
/// O(rho), so the long-term budget is preserved at exponent level.
pub fn power_schedule_exponent(
    config: &AntennaConfig,
    blocklength: u32,
    deadline: u32,
    r: f64,
) -> Result<Vec<f64>> {
    let f = threshold_exponent(config, blocklength, deadline, r)?;
    let m_eq = config.m_eq() as f64;
    let min_mn = config.min_mn() as f64;
    let mut schedule = Vec::with_capacity(deadline as usize);
    let mut cumulative = 0.0;
    schedule.push(1.0);
    for i in 1..deadline as usize {
        let g_prev = schedule[i - 1];
        cumulative += m_eq * (min_mn * g_prev - f);
        schedule.push(1.0 + cumulative);
    }
    Ok(schedule)
}

/// Deadline required to achieve a `(1 - epsilon)` fraction of the
/// unbounded-delay diversity: `l / (eps M)` without power control,
/// `log_M(l / (eps M))` with it, rounded up to a whole interval.
pub fn delay_for_epsilon(
    blocklength: u32,
    tx: usize,
    epsilon: f64,
    power_control: bool,
) -> Result<DelayRequirement> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Precondition(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if tx == 0 {
        return Err(Error::InvalidConfig("antenna count must be >= 1".into()));
    }
    if power_control && tx < 2 {
        return Err(Error::Domain(
            "power-control delay formula requires M >= 2 (log base M)".into(),
        ));
    }
    let raw = f64::from(blocklength) / (epsilon * tx as f64);
    let value = if power_control {
        raw.ln() / (tx as f64).ln()
    } else {
        raw
    };
    // Tiny guard so values that are whole numbers up to float noise do not
    // get bumped a full interval.
    let required_d = (value - 1e-9).ceil().max(1.0) as u32;
    Ok(DelayRequirement {
        epsilon,
        required_d,
        power_control,
    })
}
