//! Distribution helpers and empirical-distribution utilities.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided p-value of a standard-normal statistic.
pub fn two_sided_normal_p(z: f64) -> f64 {
    (2.0 * normal_sf(z.abs())).min(1.0)
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(stat: f64, df: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    dist.sf(stat).clamp(0.0, 1.0)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor n - 1.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (x.len() as f64 - 1.0)
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fraction of samples strictly greater than `y`.
pub fn empirical_survivor(samples: &[f64], y: f64) -> f64 {
    samples.iter().filter(|&&s| s > y).count() as f64 / samples.len() as f64
}

/// Fraction of samples less than or equal to `y`.
pub fn empirical_cdf(samples: &[f64], y: f64) -> f64 {
    1.0 - empirical_survivor(samples, y)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Three-sigma Dvoretzky–Kiefer–Wolfowitz envelope for an empirical CDF of
/// `n` draws.
pub fn dkw_envelope(n: usize) -> f64 {
    3.0 * (std::f64::consts::LN_2 / (2.0 * n as f64)).sqrt()
}

/// Standard error of a rejection rate (or any proportion) estimated from
/// `n` Bernoulli trials at true rate `p`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tails() {
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((two_sided_normal_p(1.959963984540054) - 0.05).abs() < 1e-12);
        assert!((normal_cdf(0.3) + normal_sf(0.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chi_square_tail() {
        // 3.841458820694124 is the 0.95 quantile of chi-square(1).
        assert!((chi_square_sf(3.841458820694124, 1) - 0.05).abs() < 1e-10);
        // chi-square(2) survival is exp(-x/2).
        assert!((chi_square_sf(3.0, 2) - (-1.5f64).exp()).abs() < 1e-12);
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [0.1, 0.5, 0.2, 0.9];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert!((ks_distance(&[0.0, 1.0], &[2.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
