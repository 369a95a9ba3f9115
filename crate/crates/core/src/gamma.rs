//! Regularized lower incomplete gamma function.
//!
//! `P(a, x) = gamma(a, x) / Gamma(a)` is the CDF of a Gamma(a, 1) variable;
//! with integer `a = m` it is the outage CDF of a sum of `m` unit-mean
//! exponential channel gains. Series expansion for `x < a + 1`, Lentz
//! continued fraction otherwise, relative error below 1e-10 across the
//! range the outage oracle uses.

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-15;

/// Lanczos g=7, n=9 coefficients, kept at their canonical published digits.
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `z > 0`.
pub fn ln_gamma(z: f64) -> f64 {
    // Reflection keeps the Lanczos sum on z >= 0.5.
    if z < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Regularized lower incomplete gamma `P(a, x)` for `a > 0`, `x >= 0`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!(
            "gamma shape must be positive, got {a}"
        )));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!(
            "gamma argument must be >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    // exp(-x + a ln x - ln Gamma(a)), the common prefactor of both branches.
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        series_lower(a, x, log_prefactor)
    } else {
        Ok(1.0 - continued_fraction_upper(a, x, log_prefactor)?)
    }
}

/// P(a, x) = prefactor * sum_{n>=0} x^n / (a (a+1) ... (a+n)).
fn series_lower(a: f64, x: f64, log_prefactor: f64) -> Result<f64> {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok((log_prefactor + sum.ln()).exp());
        }
    }
    Err(Error::Convergence("incomplete gamma series"))
}

/// Q(a, x) by the modified Lentz continued fraction.
fn continued_fraction_upper(a: f64, x: f64, log_prefactor: f64) -> Result<f64> {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut f = d;
    for n in 1..=MAX_ITER {
        let an = -(n as f64) * (n as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok((log_prefactor + f.ln()).exp());
        }
    }
    Err(Error::Convergence("incomplete gamma continued fraction"))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle for integer shape: Erlang CDF
    /// P(m, x) = 1 - e^{-x} sum_{k<m} x^k / k!.
    fn erlang_cdf(m: u32, x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..m {
            term *= x / k as f64;
            sum += term;
        }
        1.0 - (-x).exp() * sum
    }

    #[test]
    fn matches_erlang_closed_form() {
        for m in 1..=8u32 {
            for &x in &[0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
                let got = regularized_lower_gamma(f64::from(m), x).unwrap();
                let expect = erlang_cdf(m, x);
                if expect > 1e-300 {
                    // The Erlang form subtracts values near 1, so for tiny
                    // probabilities its own rounding dominates; allow an
                    // absolute slack on that cancellation scale.
                    assert!(
                        (got - expect).abs() < 1e-10 * expect + 1e-14,
                        "P({m}, {x}) = {got} vs Erlang {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn half_integer_shape_matches_erf() {
        // P(1/2, x) = erf(sqrt(x)); reference values for erf(0.5), erf(1).
        let got = regularized_lower_gamma(0.5, 0.25).unwrap();
        assert!((got - 0.5204998778130465).abs() < 1e-12, "got {got}");
        let got = regularized_lower_gamma(0.5, 1.0).unwrap();
        assert!((got - 0.8427007929497149).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn boundary_behavior() {
        assert_eq!(regularized_lower_gamma(3.0, 0.0).unwrap(), 0.0);
        let near_one = regularized_lower_gamma(2.0, 60.0).unwrap();
        assert!((near_one - 1.0).abs() < 1e-12);
        assert!(regularized_lower_gamma(0.0, 1.0).is_err());
        assert!(regularized_lower_gamma(-1.0, 1.0).is_err());
        assert!(regularized_lower_gamma(1.0, -0.5).is_err());
    }

    #[test]
    fn ln_gamma_integer_values() {
        // Gamma(n) = (n-1)!
        let mut fact = 1.0f64;
        for n in 1..=12u32 {
            if n > 1 {
                fact *= f64::from(n - 1);
            }
            let got = ln_gamma(f64::from(n));
            assert!((got - fact.ln()).abs() < 1e-11, "ln_gamma({n}) = {got}");
        }
    }
}
