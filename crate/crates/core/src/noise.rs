//! Gaussian measurement noise on the forcing and/or displacement channel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{NarxError, Result};
use crate::series::{rms, variance, TimeSeries};

/// Which measured channel is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseTrial {
    /// Trial 1.
    OutputOnly,
    /// Trial 2.
    InputOnly,
    /// Trial 3.
    Both,
}

impl NoiseTrial {
    pub fn number(self) -> u8 {
        match self {
            NoiseTrial::OutputOnly => 1,
            NoiseTrial::InputOnly => 2,
            NoiseTrial::Both => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(NoiseTrial::OutputOnly),
            2 => Ok(NoiseTrial::InputOnly),
            3 => Ok(NoiseTrial::Both),
            _ => Err(NarxError::config("noise.trial", format!("unknown trial {n}"))),
        }
    }

    fn corrupts_input(self) -> bool {
        matches!(self, NoiseTrial::InputOnly | NoiseTrial::Both)
    }

    fn corrupts_output(self) -> bool {
        matches!(self, NoiseTrial::OutputOnly | NoiseTrial::Both)
    }
}

/// Noise levels used across the experiments: 1%, 10%, 30%, 50%, 100%, 150%.
pub const CANONICAL_FRACTIONS: [f64; 6] = [0.01, 0.1, 0.3, 0.5, 1.0, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub trial: NoiseTrial,
    /// Noise standard deviation as a fraction of the channel's RMS (force)
    /// or standard deviation (displacement).
    pub fraction: f64,
    pub rng_seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            trial: NoiseTrial::OutputOnly,
            fraction: 0.01,
            rng_seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction.is_finite() && (0.0..=2.0).contains(&self.fraction)) {
            return Err(NarxError::config(
                "noise.fraction",
                format!("must lie in [0, 2], got {}", self.fraction),
            ));
        }
        Ok(())
    }
}

/// `(a·RMS(x), a·σ_y)`.
pub fn noise_scales(x: &TimeSeries, y: &TimeSeries, fraction: f64) -> (f64, f64) {
    (fraction * rms(x.values()), fraction * variance(y.values()).sqrt())
}

fn corrupt(values: &[f64], scale: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if scale == 0.0 {
        return Ok(values.to_vec());
    }
    let normal =
        Normal::new(0.0, scale).map_err(|e| NarxError::config("noise.fraction", e.to_string()))?;
    Ok(values.iter().map(|v| v + normal.sample(rng)).collect())
}

/// Add zero-mean Gaussian noise to the channel(s) selected by the trial.
/// Unselected channels are returned unchanged.
pub fn apply_noise(
    x: &TimeSeries,
    y: &TimeSeries,
    spec: &NoiseSpec,
) -> Result<(TimeSeries, TimeSeries)> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(NarxError::config(
            "series",
            format!("length mismatch: x has {}, y has {}", x.len(), y.len()),
        ));
    }
    let (scale_x, scale_y) = noise_scales(x, y, spec.fraction);
    // Separate streams so Trial 3's output noise matches Trial 1's for the same seed.
    let mut rng_x = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng_x.set_stream(1);
    let mut rng_y = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng_y.set_stream(2);

    let x_noisy = if spec.trial.corrupts_input() {
        x.with_values(corrupt(x.values(), scale_x, &mut rng_x)?)?
    } else {
        x.clone()
    };
    let y_noisy = if spec.trial.corrupts_output() {
        y.with_values(corrupt(y.values(), scale_y, &mut rng_y)?)?
    } else {
        y.clone()
    };
    Ok((x_noisy, y_noisy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(vals: Vec<f64>) -> TimeSeries {
        TimeSeries::new(0.002, vals).unwrap()
    }

    fn sinusoids(n: usize) -> (TimeSeries, TimeSeries) {
        let x = (0..n).map(|i| (i as f64 * 0.1).sin() * 4.0).collect();
        let y = (0..n).map(|i| (i as f64 * 0.037).cos() * 1e-3 + 2e-4).collect();
        (series(x), series(y))
    }

    #[test]
    fn scales_by_definition() {
        let c = series(vec![3.0; 10]);
        let alt = series((0..10).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect());
        assert_eq!(noise_scales(&c, &alt, 0.0), (0.0, 0.0));
        let (sx, sy) = noise_scales(&c, &alt, 0.5);
        assert!((sx - 1.5).abs() < 1e-15);
        assert!((sy - 0.5).abs() < 1e-15);
        let (_, sy) = noise_scales(&c, &alt, 1.0);
        assert!((sy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trial_one_leaves_forcing_untouched() {
        let (x, y) = sinusoids(500);
        let spec = NoiseSpec {
            trial: NoiseTrial::OutputOnly,
            fraction: 0.3,
            rng_seed: 1,
        };
        let (xn, yn) = apply_noise(&x, &y, &spec).unwrap();
        assert_eq!(xn, x);
        assert_ne!(yn, y);
    }

    #[test]
    fn zero_fraction_is_identity() {
        let (x, y) = sinusoids(200);
        for trial in [NoiseTrial::OutputOnly, NoiseTrial::InputOnly, NoiseTrial::Both] {
            let spec = NoiseSpec {
                trial,
                fraction: 0.0,
                rng_seed: 9,
            };
            let (xn, yn) = apply_noise(&x, &y, &spec).unwrap();
            assert_eq!(xn, x);
            assert_eq!(yn, y);
        }
    }

    #[test]
    fn realized_scale_both_channels() {
        let (x, y) = sinusoids(4000);
        let spec = NoiseSpec {
            trial: NoiseTrial::Both,
            fraction: 0.3,
            rng_seed: 5,
        };
        let (xn, yn) = apply_noise(&x, &y, &spec).unwrap();
        let (sx, sy) = noise_scales(&x, &y, 0.3);
        let dy: Vec<f64> = yn.values().iter().zip(y.values()).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = xn.values().iter().zip(x.values()).map(|(a, b)| a - b).collect();
        assert!((variance(&dy).sqrt() - sy).abs() / sy < 0.05);
        assert!((variance(&dx).sqrt() - sx).abs() / sx < 0.05);
    }

    #[test]
    fn realized_scale_large_sample() {
        let (x, y) = sinusoids(100_000);
        let spec = NoiseSpec {
            trial: NoiseTrial::OutputOnly,
            fraction: 1.0,
            rng_seed: 11,
        };
        let (_, yn) = apply_noise(&x, &y, &spec).unwrap();
        let (_, sy) = noise_scales(&x, &y, 1.0);
        let dy: Vec<f64> = yn.values().iter().zip(y.values()).map(|(a, b)| a - b).collect();
        assert!((variance(&dy).sqrt() - sy).abs() / sy < 0.01);
    }

    #[test]
    fn length_mismatch_rejected() {
        let x = series(vec![1.0; 10]);
        let y = series(vec![1.0; 11]);
        let spec = NoiseSpec {
            trial: NoiseTrial::Both,
            fraction: 0.1,
            rng_seed: 0,
        };
        assert!(matches!(apply_noise(&x, &y, &spec), Err(NarxError::Config { .. })));
    }

    #[test]
    fn fraction_range_checked() {
        let (x, y) = sinusoids(10);
        let spec = NoiseSpec {
            trial: NoiseTrial::Both,
            fraction: 2.5,
            rng_seed: 0,
        };
        assert!(apply_noise(&x, &y, &spec).is_err());
    }

    #[test]
    fn trial_numbering() {
        for n in 1..=3 {
            assert_eq!(NoiseTrial::from_number(n).unwrap().number(), n);
        }
        assert!(NoiseTrial::from_number(4).is_err());
    }
}
