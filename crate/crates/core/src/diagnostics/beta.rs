//! The Beta law of conditional coverage.
//!
//! Given a calibration set of size `n` and level `α`, coverage of the
//! conformal set is distributed as `Beta(n + 1 − l, l)` with
//! `l = ⌊(n + 1)α⌋`, whose mean `(n + 1 − l)/(n + 1)` equals
//! `rank/(n + 1)` for the conformal rank `⌈(n + 1)(1 − α)⌉`.

use serde::Serialize;

use crate::error::check_alpha;
use crate::quantile::snap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
    pub l: usize,
    pub n_cal: usize,
    pub alpha: f64,
}

impl BetaParams {
    /// An arbitrary Beta distribution (no calibration bookkeeping).
    pub fn shape(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            l: 0,
            n_cal: 0,
            alpha: f64::NAN,
        }
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }
}

pub fn beta_params(n_cal: usize, alpha: f64) -> Result<BetaParams> {
    check_alpha(alpha)?;
    if n_cal == 0 {
        return Err(Error::EmptyCalibration);
    }
    let l = snap((n_cal as f64 + 1.0) * alpha).floor() as usize;
    if l == 0 {
        return Err(Error::AlphaTooSmall { n_cal, alpha });
    }
    Ok(BetaParams {
        a: (n_cal + 1 - l) as f64,
        b: l as f64,
        l,
        n_cal,
        alpha,
    })
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("x={x} outside [0, 1]")))
    }
}

pub fn beta_cdf(params: &BetaParams, x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(regularized_incomplete_beta(params.a, params.b, x))
}

pub fn beta_pdf(params: &BetaParams, x: f64) -> Result<f64> {
    check_unit(x)?;
    let (a, b) = (params.a, params.b);
    if x == 0.0 || x == 1.0 {
        let edge_exp = if x == 0.0 { a } else { b };
        return Ok(match edge_exp.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => (-ln_beta(a, b)).exp(),
            _ => 0.0,
        });
    }
    Ok(((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)).exp())
}

/// Inverse CDF by safeguarded Newton iteration on `[0, 1]`.
pub fn beta_quantile(params: &BetaParams, p: f64) -> Result<f64> {
    check_unit(p)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = params.mean().clamp(1e-12, 1.0 - 1e-12);
    for _ in 0..200 {
        let f = regularized_incomplete_beta(params.a, params.b, x) - p;
        if f.abs() < 1e-14 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = beta_pdf(params, x)?;
        let newton = x - f / dens;
        x = if dens > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Beta as StatrsBeta, ContinuousCDF};

    #[test]
    fn params_examples() {
        let p = beta_params(126, 0.1).unwrap();
        assert_eq!((p.l, p.a, p.b), (12, 115.0, 12.0));
        assert!((p.mean() - 115.0 / 127.0).abs() < 1e-15);
        assert!((p.mean() - 0.9055).abs() < 5e-5);

        let p = beta_params(9, 0.1).unwrap();
        assert_eq!((p.l, p.a, p.b), (1, 9.0, 1.0));
        assert_eq!(p.mean(), 0.9);

        assert!(matches!(beta_params(5, 0.1), Err(Error::AlphaTooSmall { .. })));
        assert!(beta_params(0, 0.1).is_err());
        assert!(beta_params(10, 1.5).is_err());
    }

    #[test]
    fn mean_equals_rank_over_n_plus_one() {
        for n in [19usize, 50, 99, 126, 500, 1249] {
            for alpha in [0.05, 0.1, 0.2, 0.3] {
                let p = beta_params(n, alpha).unwrap();
                let rank = crate::quantile::conformal_rank(n, alpha).unwrap();
                assert_eq!(p.a as usize, rank, "n={n} alpha={alpha}");
                assert_eq!(p.mean(), (n + 1 - p.l) as f64 / (n + 1) as f64);
            }
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        // ln(126!) via direct summation
        let direct: f64 = (1..=126).map(|k| (k as f64).ln()).sum();
        assert!((ln_gamma(127.0) - direct).abs() < 1e-10);
    }

    #[test]
    fn cdf_closed_forms() {
        let uniform = BetaParams::shape(1.0, 1.0);
        for x in [0.25, 0.5, 0.75] {
            assert!((beta_cdf(&uniform, x).unwrap() - x).abs() < 1e-10);
        }
        let b22 = BetaParams::shape(2.0, 2.0);
        for x in [0.1, 0.25, 0.5, 0.9] {
            let closed = 3.0 * x * x - 2.0 * x * x * x;
            assert!((beta_cdf(&b22, x).unwrap() - closed).abs() < 1e-10);
        }
        assert!((beta_cdf(&b22, 0.25).unwrap() - 0.15625).abs() < 1e-10);
        for p in [uniform, b22, beta_params(126, 0.1).unwrap()] {
            assert_eq!(beta_cdf(&p, 0.0).unwrap(), 0.0);
            assert_eq!(beta_cdf(&p, 1.0).unwrap(), 1.0);
        }
        assert!(beta_cdf(&b22, 1.5).is_err());
        assert!(beta_pdf(&b22, -0.1).is_err());
    }

    #[test]
    fn cdf_agrees_with_statrs() {
        for (a, b) in [(115.0, 12.0), (0.5, 0.5), (3.0, 7.0), (450.0, 51.0), (9.0, 1.0)] {
            let reference = StatrsBeta::new(a, b).unwrap();
            let ours = BetaParams::shape(a, b);
            for i in 1..100 {
                let x = i as f64 / 100.0;
                let diff = (beta_cdf(&ours, x).unwrap() - reference.cdf(x)).abs();
                assert!(diff < 1e-10, "a={a} b={b} x={x} diff={diff}");
            }
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        for p in [
            beta_params(126, 0.1).unwrap(),
            BetaParams::shape(2.0, 5.0),
            BetaParams::shape(1.0, 1.0),
            beta_params(500, 0.2).unwrap(),
        ] {
            let n = 10_000;
            let h = 1.0 / n as f64;
            let mut area = 0.5 * (beta_pdf(&p, 0.0).unwrap() + beta_pdf(&p, 1.0).unwrap());
            for i in 1..n {
                area += beta_pdf(&p, i as f64 * h).unwrap();
            }
            assert!((area * h - 1.0).abs() < 1e-6, "{p:?}: {}", area * h);
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let p = beta_params(126, 0.1).unwrap();
        let values: Vec<f64> = (0..=1000).map(|i| beta_cdf(&p, i as f64 / 1000.0).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [beta_params(126, 0.1).unwrap(), BetaParams::shape(2.0, 2.0), BetaParams::shape(0.7, 3.0)] {
            for level in [0.001, 0.01, 0.3, 0.5, 0.9, 0.999] {
                let x = beta_quantile(&p, level).unwrap();
                assert!((beta_cdf(&p, x).unwrap() - level).abs() < 1e-10);
            }
        }
    }
}
