mod common;

use common::*;
use poselift::camera::orthographic_project_sequence;
use poselift::noise::{add_noise, noise_variance, signal_power, snr_sweep_points, NoiseSpec};
use poselift::skeleton::{PoseSequence, PoseSequence2D};
use proptest::prelude::*;

fn projected(seed: u64, frames: usize) -> PoseSequence2D {
    let mut r = rng(seed);
    let seq = motion_sequence(&MotionParams::random(&mut r), frames, 0.0);
    orthographic_project_sequence(&seq, &random_camera(&mut r))
}

fn values(seq: &PoseSequence2D) -> Vec<f64> {
    seq.frames().iter().flat_map(|f| f.coords().iter().flatten().copied()).collect()
}

fn residuals(clean: &PoseSequence2D, noisy: &PoseSequence2D) -> Vec<f64> {
    values(noisy).iter().zip(values(clean)).map(|(a, b)| a - b).collect()
}

#[test]
fn signal_power_is_pooled_variance() {
    let seq = projected(1, 50);
    let v = values(&seq);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let two_pass = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!((signal_power(&seq) - two_pass).abs() < 1e-12 * two_pass);
    assert!((noise_variance(2.0, 10.0) - 0.2).abs() < 1e-15);
    assert!((noise_variance(2.0, -3.0) - 2.0 * 10f64.powf(0.3)).abs() < 1e-12);
}

/// Fixed seeds keep the statistical bounds deterministic.
#[test]
fn noise_statistics_match_the_request() {
    for seed in 0..24u64 {
        let snr = -5.0 + 30.0 * seed as f64 / 23.0;
        let clean = projected(seed, 400);
        let noisy = add_noise(&clean, &NoiseSpec::new(snr, seed).unwrap()).unwrap();
        let e = residuals(&clean, &noisy);
        let n = e.len() as f64;
        let sigma2 = noise_variance(signal_power(&clean), snr);
        let mean = e.iter().sum::<f64>() / n;
        let var = e.iter().map(|x| x * x).sum::<f64>() / n;
        assert!(mean.abs() <= 3.0 * (sigma2 / n).sqrt(), "seed {seed}: mean {mean}");
        assert!((var / sigma2 - 1.0).abs() <= 0.05, "seed {seed}: variance ratio {}", var / sigma2);
        let realized = 10.0 * (signal_power(&clean) / var).log10();
        assert!((realized - snr).abs() <= 0.5, "seed {seed}: realized {realized} dB");
    }
}

proptest! {
    #[test]
    fn same_seed_same_noise(seed in any::<u64>()) {
        let clean = projected(3, 40);
        let spec = NoiseSpec::new(9.0, seed).unwrap();
        prop_assert_eq!(add_noise(&clean, &spec).unwrap(), add_noise(&clean, &spec).unwrap());
        let other = NoiseSpec::new(9.0, seed.wrapping_add(1)).unwrap();
        prop_assert_ne!(add_noise(&clean, &spec).unwrap(), add_noise(&clean, &other).unwrap());
    }
}

#[test]
fn frames_draw_independent_streams() {
    let clean = projected(4, 100);
    let e = residuals(&clean, &add_noise(&clean, &NoiseSpec::new(5.0, 7).unwrap()).unwrap());
    let per_frame = 30;
    let first = &e[..per_frame];
    for t in 1..100 {
        assert_ne!(first, &e[t * per_frame..(t + 1) * per_frame]);
    }
}

#[test]
fn edge_cases() {
    let clean = projected(5, 10);
    assert_eq!(add_noise(&clean, &NoiseSpec::noiseless()).unwrap(), clean);
    assert!(NoiseSpec::new(f64::NAN, 0).is_err());
    assert!(NoiseSpec::new(f64::NEG_INFINITY, 0).is_err());

    let still = PoseSequence::from_coords(topology(), vec![vec![[1.0, 1.0]; 15]; 4]).unwrap();
    assert!(add_noise(&still, &NoiseSpec::new(10.0, 0).unwrap()).is_err());

    assert_eq!(snr_sweep_points(None).unwrap(), vec![1.0, 9.0, 17.0]);
    assert_eq!(snr_sweep_points(Some(&[-3.0, 40.0])).unwrap(), vec![-3.0, 40.0]);
    assert!(snr_sweep_points(Some(&[])).is_err());
    assert!(snr_sweep_points(Some(&[f64::NAN])).is_err());
}
