use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectra_mi::spectrogram::{
    blackman_window, frame_count, log_power, stft, FrameFit, Stft, StftConfig, StftFrames, WindowWeights,
    IMAGE_SIZE,
};

/// Direct evaluation of the windowed, time-aliased DFT, one bin at a time.
fn naive_stft(signal: &[f64], cfg: &StftConfig) -> Vec<Complex64> {
    let win = cfg.window.values();
    let n = cfg.n_dft;
    let frames = (signal.len() - win.len()) / cfg.hop + 1;
    let bins = if cfg.one_sided { n / 2 + 1 } else { n };
    let mut out = vec![Complex64::new(0.0, 0.0); bins * frames];
    for m in 0..frames {
        let mut folded = vec![0.0; n];
        for k in 0..win.len() {
            let v = signal[m * cfg.hop + k] * win[k];
            match cfg.frame_fit {
                FrameFit::Fold => folded[k % n] += v,
                FrameFit::Truncate if k < n => folded[k] = v,
                FrameFit::Truncate => {}
            }
        }
        for b in 0..bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &y) in folded.iter().enumerate() {
                let phase = -2.0 * PI * ((b * k) % n) as f64 / n as f64;
                acc += Complex64::from_polar(y, phase);
            }
            out[b * frames + m] = acc;
        }
    }
    out
}

fn rel_frobenius(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn random_config(rng: &mut ChaCha8Rng, len: usize) -> StftConfig {
    let win_len = rng.random_range(2..=len.min(300));
    let window = if rng.random_bool(0.5) {
        blackman_window(win_len).unwrap()
    } else {
        WindowWeights::rectangular(win_len).unwrap()
    };
    StftConfig {
        window,
        hop: rng.random_range(1..=win_len),
        n_dft: rng.random_range(1..=win_len + 40),
        one_sided: rng.random_bool(0.7),
        frame_fit: if rng.random_bool(0.8) { FrameFit::Fold } else { FrameFit::Truncate },
        fs_hz: 512.0,
    }
}

#[test]
fn stft_matches_direct_dft_on_random_signals() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let len = if i == 0 { 788 } else { rng.random_range(16..=1024) };
        let signal: Vec<f64> = (0..len).map(|_| rng.random_range(-100.0..100.0)).collect();
        let cfg = if i == 0 { StftConfig::standard() } else { random_config(&mut rng, len) };
        let fast = stft(&signal, &cfg).unwrap();
        let slow = naive_stft(&signal, &cfg);
        worst = worst.max(rel_frobenius(&fast.data, &slow));
    }
    assert!(worst <= 1e-9, "worst relative Frobenius error {worst}");
}

#[test]
fn hop_one_blackman_matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..40 {
        let win_len = rng.random_range(32..=400);
        let len = win_len + rng.random_range(0..300);
        let signal: Vec<f64> = (0..len).map(|_| rng.random_range(-100.0..100.0)).collect();
        let cfg = StftConfig {
            window: blackman_window(win_len).unwrap(),
            hop: 1,
            n_dft: rng.random_range(1..=win_len + 40),
            one_sided: rng.random_bool(0.5),
            frame_fit: if rng.random_bool(0.5) { FrameFit::Fold } else { FrameFit::Truncate },
            fs_hz: 512.0,
        };
        let err = rel_frobenius(&stft(&signal, &cfg).unwrap().data, &naive_stft(&signal, &cfg));
        assert!(err <= 1e-9, "{cfg:?}: {err}");
    }
}

#[test]
fn standard_geometry_matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let signal: Vec<f64> = (0..788).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cfg = StftConfig::standard();
    let fast = stft(&signal, &cfg).unwrap();
    assert_eq!((fast.n_bins, fast.n_frames), (IMAGE_SIZE, IMAGE_SIZE));
    assert!(rel_frobenius(&fast.data, &naive_stft(&signal, &cfg)) <= 1e-9);
    let mut truncated = cfg.clone();
    truncated.frame_fit = FrameFit::Truncate;
    let t = stft(&signal, &truncated).unwrap();
    assert!(rel_frobenius(&t.data, &naive_stft(&signal, &truncated)) <= 1e-9);
    assert!(rel_frobenius(&t.data, &fast.data) > 1e-3);
}

fn frame_energy(frames: &StftFrames, m: usize) -> f64 {
    (0..frames.n_bins).map(|b| frames.get(b, m).norm_sqr()).sum()
}

#[test]
fn parseval_per_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for &n in &[8usize, 64, 447, 512, 1000] {
        let n_frames = 5;
        let signal: Vec<f64> = (0..n * n_frames).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cfg = StftConfig {
            window: WindowWeights::rectangular(n).unwrap(),
            hop: n,
            n_dft: n,
            one_sided: false,
            frame_fit: FrameFit::Fold,
            fs_hz: 512.0,
        };
        let frames = stft(&signal, &cfg).unwrap();
        assert_eq!(frames.n_frames, n_frames);
        for m in 0..n_frames {
            let time: f64 = signal[m * n..(m + 1) * n].iter().map(|v| v * v).sum();
            let freq = frame_energy(&frames, m) / n as f64;
            assert!((time - freq).abs() / time <= 1e-9, "n={n} m={m}: {time} vs {freq}");
        }
    }
}

#[test]
fn hop_two_halves_frames() {
    assert_eq!(frame_count(788, 565, 2).unwrap(), 112);
    assert_eq!(frame_count(565, 565, 1).unwrap(), 1);
    assert_eq!(frame_count(788, 565, 1).unwrap(), 224);
    assert!(frame_count(564, 565, 1).is_err());
    assert!(frame_count(788, 565, 0).is_err());
}

#[test]
fn geometry_error_for_hop_zero() {
    assert!(StftConfig::from_geometry(565, 565, 447, 512.0).is_err());
}

proptest! {
    #[test]
    fn last_frame_ends_within_one_hop(w in 1usize..400, extra in 0usize..600, h in 1usize..64) {
        let l = w + extra;
        let n = frame_count(l, w, h).unwrap();
        let last_start = (n - 1) * h;
        let tail = l - last_start - w;
        prop_assert!(tail < h);
    }

    #[test]
    fn stft_is_linear_in_scale(
        signal in prop::collection::vec(-10.0f64..10.0, 64..256),
        alpha in -50.0f64..50.0,
    ) {
        let cfg = StftConfig {
            window: blackman_window(40).unwrap(),
            hop: 7,
            n_dft: 31,
            one_sided: true,
            frame_fit: FrameFit::Fold,
            fs_hz: 512.0,
        };
        let base = stft(&signal, &cfg).unwrap();
        let scaled_signal: Vec<f64> = signal.iter().map(|v| alpha * v).collect();
        let scaled = stft(&scaled_signal, &cfg).unwrap();
        let peak = base.data.iter().map(|v| v.norm()).fold(0.0, f64::max) * alpha.abs();
        for (a, b) in base.data.iter().zip(&scaled.data) {
            prop_assert!((b - a * alpha).norm() <= 1e-12 * peak);
        }
    }
}

#[test]
fn fused_log_power_matches_two_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = StftConfig::standard();
    let engine = Stft::new(cfg.clone()).unwrap();
    for len in [788usize, 789, 1000] {
        let signal: Vec<f64> = (0..len).map(|_| rng.random_range(-30.0..30.0)).collect();
        let two_step = log_power(&engine.process(&signal).unwrap(), 1e-12).unwrap();
        assert_eq!(engine.log_power(&signal, 1e-12).unwrap(), two_step);
    }
    assert!(engine.log_power(&[0.0; 788], 0.0).is_err());
}
