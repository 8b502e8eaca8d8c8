//! One-sample Kolmogorov–Smirnov test against a normal distribution.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

use super::metrics::mean_and_sd;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub normal_at_alpha_05: bool,
}

/// `sup |F_n − F|` for an arbitrary continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

pub fn ks_statistic_against_normal(samples: &[f64], mu: f64, sigma: f64) -> Result<f64> {
    let normal =
        Normal::new(mu, sigma).map_err(|e| Error::Evaluation(format!("invalid reference normal: {e}")))?;
    Ok(ks_statistic(samples, |x| normal.cdf(x)))
}

/// Survival function of the Kolmogorov distribution, `Pr[K > λ]`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form converges quickly for small λ
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * c).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                let k = k as f64;
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Tests `scores` against a normal with their own mean and unbiased standard
/// deviation. Uses the plain asymptotic distribution of `√n · D` without a
/// Lilliefors correction, so the p-value is conservative.
pub fn ks_normality_test(scores: &[f64]) -> Result<KsResult> {
    if scores.len() < 3 {
        return Err(Error::Evaluation(format!(
            "normality test needs at least 3 samples, got {}",
            scores.len()
        )));
    }
    let (mu, sigma) = mean_and_sd(scores);
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Evaluation("normality test on constant scores".into()));
    }
    let statistic = ks_statistic_against_normal(scores, mu, sigma)?;
    let p_value = kolmogorov_survival((scores.len() as f64).sqrt() * statistic);
    Ok(KsResult {
        statistic,
        p_value,
        normal_at_alpha_05: p_value > 0.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_sample() {
        let d = ks_statistic_against_normal(&[1.0, -1.0, 0.0], 0.0, 1.0).unwrap();
        // Φ(−1) = 0.158655, so the largest gap is 1/3 − 0.158655
        assert!((d - (1.0 / 3.0 - 0.158_655_253_931_457)).abs() < 1e-9);
        assert!((d - 0.1746).abs() < 1e-4);
    }

    #[test]
    fn quantile_sample_is_close() {
        let n = 40;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (1..=n).map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64)).collect();
        let d = ks_statistic_against_normal(&xs, 0.0, 1.0).unwrap();
        assert!(d <= 0.5 / n as f64 + 1e-9, "{d}");
    }

    #[test]
    fn survival_known_values() {
        // classic critical values of the Kolmogorov distribution
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2238) - 0.10).abs() < 1e-4);
        assert!((kolmogorov_survival(0.8276) - 0.50).abs() < 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        // both series agree at the switch point
        let lo = {
            let l: f64 = 1.18;
            let c = std::f64::consts::PI.powi(2) / (8.0 * l * l);
            1.0 - (2.0 * std::f64::consts::PI).sqrt() / l
                * (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum::<f64>()
        };
        assert!((lo - kolmogorov_survival(1.18)).abs() < 1e-12);
    }

    #[test]
    fn decision_schema() {
        let normal = Normal::new(3.0, 2.0).unwrap();
        let xs: Vec<f64> = (1..=200).map(|i| normal.inverse_cdf((i as f64 - 0.5) / 200.0)).collect();
        let r = ks_normality_test(&xs).unwrap();
        assert!(r.normal_at_alpha_05 && r.p_value > 0.9);
        let skewed: Vec<f64> = (1..=200).map(|i| ((i as f64) / 20.0).exp()).collect();
        assert!(!ks_normality_test(&skewed).unwrap().normal_at_alpha_05);
        assert!(ks_normality_test(&[1.0, 2.0]).is_err());
    }
}
