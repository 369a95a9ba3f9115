//! Block Rayleigh MIMO channel layer: complex Gaussian sampling, mutual
//! information, and the per-realization random-coding error bound.
//!
//! All logarithms are natural. Diversity exponents are ratios of logs, so
//! the base cancels; callers that want bits divide by `ln 2` at the edge.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Antenna counts of a MIMO link plus the derived quantities the tradeoff
/// formulas keep reaching for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AntennaConfig {
    tx: usize,
    rx: usize,
}

impl AntennaConfig {
    /// `tx` transmit and `rx` receive antennas; both must be at least 1.
    pub fn new(tx: usize, rx: usize) -> Result<Self> {
        if tx == 0 || rx == 0 {
            return Err(Error::InvalidConfig(format!(
                "antenna counts must be positive, got tx={tx} rx={rx}"
            )));
        }
        Ok(Self { tx, rx })
    }

    /// Number of transmit antennas (M).
    pub fn tx(&self) -> usize {
        self.tx
    }

    /// Number of receive antennas (N).
    pub fn rx(&self) -> usize {
        self.rx
    }

    /// Equivalent antenna count `|M - N| + 1` governing the steepest
    /// tradeoff segment.
    pub fn m_eq(&self) -> usize {
        self.tx.abs_diff(self.rx) + 1
    }

    /// `min(M, N)`, the maximum multiplexing gain.
    pub fn min_mn(&self) -> usize {
        self.tx.min(self.rx)
    }

    /// `max(M, N)`; for rank-1 links this is the diversity order.
    pub fn max_mn(&self) -> usize {
        self.tx.max(self.rx)
    }

    /// True when the channel matrix has rank 1 (single row or column).
    pub fn is_rank_one(&self) -> bool {
        self.min_mn() == 1
    }
}

/// Average transmit power point, kept together with its natural log so the
/// exponent arithmetic never recomputes it inconsistently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    rho: f64,
    log_rho: f64,
}

impl SnrPoint {
    /// From linear power `rho > 0`.
    pub fn from_linear(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "SNR must be positive and finite, got {rho}"
            )));
        }
        Ok(Self {
            rho,
            log_rho: rho.ln(),
        })
    }

    /// From a decibel value, `rho = 10^(db/10)`.
    pub fn from_db(db: f64) -> Result<Self> {
        if !db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "SNR in dB must be finite, got {db}"
            )));
        }
        Self::from_linear(10f64.powf(db / 10.0))
    }

    /// Linear average transmit power.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Natural log of the linear power.
    pub fn log_rho(&self) -> f64 {
        self.log_rho
    }

    /// Decibel representation.
    pub fn db(&self) -> f64 {
        10.0 * self.rho.log10()
    }
}

/// One coherence block's fading matrix: `rx x tx` complex gains, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    rx: usize,
    tx: usize,
    entries: Vec<Complex64>,
}

impl ChannelRealization {
    /// Wraps explicit entries; dimensions must match and entries be finite.
    pub fn from_entries(rx: usize, tx: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rx == 0 || tx == 0 || entries.len() != rx * tx {
            return Err(Error::InvalidConfig(format!(
                "channel matrix needs rx*tx = {} entries, got {}",
                rx * tx,
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFiniteInput("channel entries"));
        }
        Ok(Self { rx, tx, entries })
    }

    /// All-zero channel of the given dimensions.
    pub fn zeros(config: &AntennaConfig) -> Self {
        Self {
            rx: config.rx(),
            tx: config.tx(),
            entries: vec![Complex64::new(0.0, 0.0); config.rx() * config.tx()],
        }
    }

    pub fn rx(&self) -> usize {
        self.rx
    }

    pub fn tx(&self) -> usize {
        self.tx
    }

    /// Entry `(i, j)` with `i` the receive index.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.tx + j]
    }

    /// Squared Frobenius norm, `sum |h_ij|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Mutual information of one realization in nats per channel use.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MutualInfo(f64);

impl MutualInfo {
    /// Value in nats.
    pub fn nats(&self) -> f64 {
        self.0
    }

    /// Value in bits.
    pub fn bits(&self) -> f64 {
        self.0 / std::f64::consts::LN_2
    }
}

/// Draws one fading matrix with i.i.d. zero-mean unit-variance complex
/// circular Gaussian entries (real and imaginary parts each N(0, 1/2)).
///
/// Entries are filled row-major, real part before imaginary part, so a
/// caller holding the same stream can replay the draw exactly.
pub fn sample_channel<R: Rng + ?Sized>(config: &AntennaConfig, rng: &mut R) -> ChannelRealization {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let entries = (0..config.rx() * config.tx())
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    ChannelRealization {
        rx: config.rx(),
        tx: config.tx(),
        entries,
    }
}

/// Which Gram form to factor. The two give the same determinant; keeping
/// both routes testable anchors the numerics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GramSide {
    /// `I_N + rho^g H H*` (N x N).
    Rx,
    /// `I_M + rho^g H* H` (M x M).
    Tx,
}

/// `log det(I + rho^g H H*)` in nats, computed through a Cholesky
/// factorization of the smaller Gram matrix.
///
/// Requires finite entries and `g >= 1`.
pub fn mutual_info(
    h: &ChannelRealization,
    snr: SnrPoint,
    power_exponent: f64,
) -> Result<MutualInfo> {
    let side = if h.rx() <= h.tx() {
        GramSide::Rx
    } else {
        GramSide::Tx
    };
    mutual_info_via(h, snr, power_exponent, side)
}

fn mutual_info_via(
    h: &ChannelRealization,
    snr: SnrPoint,
    power_exponent: f64,
    side: GramSide,
) -> Result<MutualInfo> {
    if !h.is_finite() {
        return Err(Error::NonFiniteInput("channel entries"));
    }
    if !power_exponent.is_finite() || power_exponent < 1.0 {
        return Err(Error::Precondition(format!(
            "power exponent must be >= 1, got {power_exponent}"
        )));
    }
    let rho_g = (power_exponent * snr.log_rho()).exp();
    if !rho_g.is_finite() {
        return Err(Error::Domain(format!(
            "rho^g overflows: g={power_exponent}, log rho={}",
            snr.log_rho()
        )));
    }

    let n = match side {
        GramSide::Rx => h.rx(),
        GramSide::Tx => h.tx(),
    };
    // A = I + rho^g * Gram, Hermitian positive definite by construction.
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = Complex64::new(0.0, 0.0);
            match side {
                GramSide::Rx => {
                    for k in 0..h.tx() {
                        s += h.entry(i, k) * h.entry(j, k).conj();
                    }
                }
                GramSide::Tx => {
                    for k in 0..h.rx() {
                        s += h.entry(k, i).conj() * h.entry(k, j);
                    }
                }
            }
            let mut v = s * rho_g;
            if i == j {
                v += Complex64::new(1.0, 0.0);
            }
            a[i * n + j] = v;
        }
    }

    let logdet = cholesky_logdet(&mut a, n)?;
    Ok(MutualInfo(logdet.max(0.0)))
}

/// In-place lower Cholesky of a Hermitian positive definite matrix given by
/// its lower triangle; returns `log det`.
fn cholesky_logdet(a: &mut [Complex64], n: usize) -> Result<f64> {
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::Domain(format!(
                "Cholesky pivot {j} not positive definite (d={d})"
            )));
        }
        let l_jj = d.sqrt();
        a[j * n + j] = Complex64::new(l_jj, 0.0);
        logdet += d.ln();
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / l_jj;
        }
    }
    Ok(logdet)
}

/// Per-realization random-coding error bound
/// `min(1, rho^{r l} * exp(-l * I(H)))`, saturated at 1 before any
/// averaging so low-SNR slope estimates are not distorted.
///
/// Requires `0 <= r <= min(M, N)` and `l >= 1`.
pub fn random_coding_error_bound(
    h: &ChannelRealization,
    snr: SnrPoint,
    power_exponent: f64,
    multiplexing: f64,
    blocklength: u32,
) -> Result<f64> {
    let min_mn = h.rx().min(h.tx()) as f64;
    if !multiplexing.is_finite() || multiplexing < 0.0 || multiplexing > min_mn {
        return Err(Error::Precondition(format!(
            "multiplexing gain must lie in [0, {min_mn}], got {multiplexing}"
        )));
    }
    if blocklength == 0 {
        return Err(Error::Precondition("blocklength must be >= 1".into()));
    }
    let info = mutual_info(h, snr, power_exponent)?;
    let l = f64::from(blocklength);
    let log_bound = multiplexing * l * snr.log_rho() - l * info.nats();
    if log_bound >= 0.0 {
        Ok(1.0)
    } else {
        Ok(log_bound.exp())
    }
}
