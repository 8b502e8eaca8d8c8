use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-timestep `beta`, `alpha = 1 − beta` and cumulative `alpha_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

/// Serializable description of a linear schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub num_timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            num_timesteps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.num_timesteps, self.beta_start, self.beta_end)
    }
}

impl NoiseSchedule {
    /// Betas interpolated linearly from `beta_start` to `beta_end`, both inclusive.
    pub fn linear(num_timesteps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if num_timesteps < 2 {
            return Err(Error::Config(format!(
                "schedule needs at least 2 timesteps, got {num_timesteps}"
            )));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Config(format!(
                "linear schedule needs 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
            )));
        }
        let last = (num_timesteps - 1) as f64;
        let beta = (0..num_timesteps)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / last)
            .collect();
        Self::from_betas(beta)
    }

    /// Arbitrary betas in `[0, 1)`. Zero betas give flat `alpha_bar` steps,
    /// which is useful for analysing degenerate cases; [`Self::is_strict`]
    /// tells whether the result is a proper diffusion schedule.
    pub fn from_betas(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::Config("empty beta schedule".into()));
        }
        if let Some(b) = beta.iter().find(|b| !(0.0..1.0).contains(*b)) {
            return Err(Error::Config(format!("beta {b} outside [0, 1)")));
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let alpha_bar = alpha
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            beta,
            alpha,
            alpha_bar,
        })
    }

    pub fn num_timesteps(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn alpha_bar_at(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// `alpha_bar` strictly decreasing and inside `(0, 1)`.
    pub fn is_strict(&self) -> bool {
        self.alpha_bar.iter().all(|&a| a > 0.0 && a < 1.0)
            && self.alpha_bar.windows(2).all(|w| w[1] < w[0])
    }

    pub(crate) fn check_timestep(&self, t: usize) -> Result<()> {
        if t < self.num_timesteps() {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "timestep {t} outside schedule of length {}",
                self.num_timesteps()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_constant_schedule() {
        let s = NoiseSchedule::linear(2, 0.1, 0.1).unwrap();
        assert!((s.alpha_bar()[0] - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar()[1] - 0.81).abs() < 1e-15);
    }

    #[test]
    fn default_schedule_is_strict_and_ends_noisy() {
        let s = ScheduleConfig::default().build().unwrap();
        assert!(s.is_strict());
        assert_eq!(s.num_timesteps(), 1000);
        assert!(*s.alpha_bar().last().unwrap() < 0.01);
        assert_eq!(s.beta()[0], 1e-4);
        assert!((s.beta()[999] - 0.02).abs() < 1e-15);
        for t in 0..1000 {
            assert_eq!(s.alpha()[t], 1.0 - s.beta()[t]);
            if t > 0 {
                assert!((s.alpha_bar()[t] - s.alpha_bar()[t - 1] * s.alpha()[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_ranges_are_config_errors() {
        for (t, a, b) in [(1000, 0.0, 0.02), (1000, 0.03, 0.02), (1000, 1e-4, 1.0), (1, 1e-4, 0.02)] {
            assert!(matches!(NoiseSchedule::linear(t, a, b), Err(Error::Config(_))));
        }
        assert!(NoiseSchedule::from_betas(vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn zero_beta_makes_a_non_strict_schedule() {
        let s = NoiseSchedule::from_betas(vec![0.0, 0.1, 0.0]).unwrap();
        assert_eq!(s.alpha_bar()[0], 1.0);
        assert_eq!(s.alpha_bar()[1], s.alpha_bar()[2]);
        assert!(!s.is_strict());
    }
}
