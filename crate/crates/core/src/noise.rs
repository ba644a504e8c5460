//! Gaussian noise at a requested signal-to-noise ratio.
//!
//! Signal power is the variance of every 2D coordinate in the sequence pooled
//! together. One noise level is used for all joints and both axes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{Pose, PoseSequence, PoseSequence2D};

/// SNR points (dB) swept when none are configured.
pub const DEFAULT_SNR_POINTS: [f64; 3] = [1.0, 9.0, 17.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Requested SNR in decibels. `+inf` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::Config(format!("SNR must be a number of dB, got {snr_db}")));
        }
        Ok(NoiseSpec { snr_db, seed })
    }

    pub fn noiseless() -> Self {
        NoiseSpec {
            snr_db: f64::INFINITY,
            seed: 0,
        }
    }
}

/// Noise variance giving `snr_db` against `signal_power`.
pub fn noise_variance(signal_power: f64, snr_db: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// Variance of all coordinate values pooled over the sequence.
pub fn signal_power(seq: &PoseSequence2D) -> f64 {
    let values = || seq.frames().iter().flat_map(|f| f.coords().iter().flatten());
    let n = seq.len() * seq.topology().len() * 2;
    let mean = values().sum::<f64>() / n as f64;
    values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

/// Adds i.i.d. zero-mean Gaussian noise to every coordinate. Each frame draws
/// from its own stream of the seeded generator, so the result does not depend
/// on evaluation order.
pub fn add_noise(seq: &PoseSequence2D, spec: &NoiseSpec) -> Result<PoseSequence2D> {
    if spec.snr_db.is_nan() || spec.snr_db == f64::NEG_INFINITY {
        return Err(Error::Noise(format!("invalid SNR {}", spec.snr_db)));
    }
    if spec.snr_db == f64::INFINITY {
        return Ok(seq.clone());
    }
    let power = signal_power(seq);
    if !(power > 0.0) {
        return Err(Error::Noise(
            "sequence has zero coordinate variance; SNR is undefined".into(),
        ));
    }
    let sigma = noise_variance(power, spec.snr_db).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Noise(e.to_string()))?;

    let frames = seq
        .frames()
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(t as u64);
            let coords = f
                .coords()
                .iter()
                .map(|&[x, y]| [x + normal.sample(&mut rng), y + normal.sample(&mut rng)])
                .collect();
            Pose::new(seq.topology().clone(), coords)
        })
        .collect::<Result<Vec<_>>>()?;
    PoseSequence::new(frames)
}

/// The SNR sweep: the configured list verbatim, or the default points.
pub fn snr_sweep_points(configured: Option<&[f64]>) -> Result<Vec<f64>> {
    match configured {
        None => Ok(DEFAULT_SNR_POINTS.to_vec()),
        Some([]) => Err(Error::Config("SNR sweep list is empty".into())),
        Some(points) => {
            if let Some(p) = points.iter().find(|p| p.is_nan()) {
                return Err(Error::Config(format!("invalid SNR point {p}")));
            }
            Ok(points.to_vec())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::JointTopology;
    use std::sync::Arc;

    fn wavy(n: usize) -> PoseSequence2D {
        let topo = Arc::new(JointTopology::canonical());
        let frames = (0..n)
            .map(|t| {
                (0..15)
                    .map(|j| {
                        let a = 0.1 * t as f64 + j as f64;
                        [a.sin() + 0.1 * j as f64, a.cos() - 0.2 * j as f64]
                    })
                    .collect()
            })
            .collect();
        PoseSequence::from_coords(topo, frames).unwrap()
    }

    #[test]
    fn variance_formula() {
        assert!((noise_variance(5.0, 10.0) - 0.5).abs() < 1e-15);
        assert_eq!(noise_variance(3.0, 0.0), 3.0);
    }

    #[test]
    fn infinite_snr_is_noiseless() {
        let s = wavy(4);
        assert_eq!(add_noise(&s, &NoiseSpec::noiseless()).unwrap(), s);
    }

    #[test]
    fn same_seed_same_output() {
        let s = wavy(20);
        let spec = NoiseSpec::new(9.0, 42).unwrap();
        assert_eq!(add_noise(&s, &spec).unwrap(), add_noise(&s, &spec).unwrap());
        let other = NoiseSpec::new(9.0, 43).unwrap();
        assert_ne!(add_noise(&s, &spec).unwrap(), add_noise(&s, &other).unwrap());
    }

    #[test]
    fn constant_sequence_is_an_error() {
        let topo = Arc::new(JointTopology::canonical());
        let s = PoseSequence::from_coords(topo, vec![vec![[1.0, 1.0]; 15]; 3]).unwrap();
        assert!(matches!(
            add_noise(&s, &NoiseSpec::new(9.0, 0).unwrap()),
            Err(Error::Noise(_))
        ));
    }

    #[test]
    fn sweep_points() {
        assert_eq!(snr_sweep_points(None).unwrap(), vec![1.0, 9.0, 17.0]);
        assert_eq!(snr_sweep_points(Some(&[5.0, 10.0])).unwrap(), vec![5.0, 10.0]);
        assert!(snr_sweep_points(Some(&[])).is_err());
    }
}
