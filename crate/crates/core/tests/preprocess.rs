use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spectra_mi::preprocess::{
    apply_filter_zero_phase, design_bandpass, design_notch, frequency_response, poly_roots,
    FilterCoefficients,
};

const FS: f64 = 512.0;

fn bandpass() -> FilterCoefficients {
    design_bandpass(0.01, 200.0, 4, 0.5, FS).unwrap()
}

fn notch() -> FilterCoefficients {
    design_notch(50.0, 30.0, FS).unwrap()
}

fn cosine(freq: f64, len: usize) -> Vec<f64> {
    (0..len).map(|n| (2.0 * PI * freq * n as f64 / FS).cos()).collect()
}

/// Complex amplitude of `freq` in `y`, over a span holding whole periods.
fn measure(y: &[f64], freq: f64) -> Complex64 {
    let n = y.len() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &v) in y.iter().enumerate() {
        acc += v * Complex64::from_polar(1.0, -2.0 * PI * freq * k as f64 / FS);
    }
    acc * 2.0 / n
}

#[test]
fn notch_zero_at_center_analytically() {
    let h = frequency_response(&notch(), 50.0, FS).norm();
    assert!(h < 1e-6, "|H(50)| = {h}");
    assert!(frequency_response(&notch(), 10.0, FS).norm() > 0.99);
    assert!(design_notch(300.0, 30.0, FS).is_err());
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|s| s * s).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn notch_removes_sixty_seconds_of_mains() {
    let x = cosine(50.0, 60 * 512);
    let y = apply_filter_zero_phase(&notch(), &x).unwrap();
    let edge = 100;
    let ratio = rms(&y[edge..x.len() - edge]) / rms(&x[edge..x.len() - edge]);
    assert!(ratio < 0.01, "residual ratio {ratio}");
}

#[test]
fn notch_suppression_beyond_transient() {
    let x = cosine(50.0, 8192);
    let y = apply_filter_zero_phase(&notch(), &x).unwrap();
    let edge = 512;
    let ratio = rms(&y[edge..x.len() - edge]) / rms(&x[edge..x.len() - edge]);
    let db = -20.0 * ratio.log10();
    assert!(db >= 40.0, "suppression {db} dB");
}

#[test]
fn bandpass_passes_midband_and_blocks_dc() {
    let c = bandpass();
    let h100 = frequency_response(&c, 100.0, FS).norm();
    assert!((10f64.powf(-0.5 / 20.0)..=1.0 + 1e-12).contains(&h100), "|H(100)| = {h100}");
    assert!(frequency_response(&c, 0.0, FS).norm() < 0.01);
    assert!(design_bandpass(200.0, 0.01, 4, 0.5, FS).is_err());
    assert!(design_bandpass(0.01, 300.0, 4, 0.5, FS).is_err());
}

#[test]
fn dc_offset_is_removed() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let offset = 50.0;
    let x: Vec<f64> = (0..30720)
        .map(|_| offset + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let y = apply_filter_zero_phase(&bandpass(), &x).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!(mean.abs() < 0.05 * offset, "residual mean {mean}");
}

#[test]
fn poles_inside_unit_circle() {
    for c in [bandpass(), notch(), design_bandpass(1.0, 40.0, 5, 1.0, FS).unwrap()] {
        assert!(c.max_pole_magnitude() < 1.0 - 1e-12);
        for s in &c.sections {
            let mut from_roots = poly_roots(&s.a);
            let mut direct = s.poles().to_vec();
            let key = |z: &Complex64| (z.re, z.im);
            from_roots.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            direct.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
            for (r, d) in from_roots.iter().zip(&direct) {
                assert!((r - d).norm() < 1e-9);
                assert!(r.norm() < 1.0 - 1e-12);
            }
        }
    }
    let notch_roots = poly_roots(&notch().a);
    assert_eq!(notch_roots.len(), 2);
    assert!(notch_roots.iter().all(|p| p.norm() < 1.0 - 1e-12));
}

#[test]
fn zero_phase_gain_is_squared_magnitude() {
    let span = 512 * 8;
    for (c, seconds, freqs) in [
        (notch(), 40, vec![10.0, 45.0, 48.0, 49.0, 50.0, 51.0, 52.0, 60.0, 120.0]),
        (bandpass(), 3600, vec![2.0, 10.0, 60.0, 150.0, 190.0, 200.0, 210.0, 240.0]),
    ] {
        let len = 512 * seconds;
        let start = (len - span) / 2;
        for f in freqs {
            let y = apply_filter_zero_phase(&c, &cosine(f, len)).unwrap();
            let got = measure(&y[start..start + span], f);
            let shifted = measure(&cosine(f, len)[start..start + span], f);
            let gain = got / shifted;
            let expect = frequency_response(&c, f, FS).norm_sqr();
            assert!((gain.re - expect).abs() < 1e-6, "{f} Hz: {gain} vs {expect}");
            assert!(gain.im.abs() < 1e-6, "{f} Hz: phase {}", gain.arg());
        }
    }
}

#[test]
fn too_short_signal_rejected() {
    let c = notch();
    assert!(apply_filter_zero_phase(&c, &vec![0.0; 3 * c.len()]).is_err());
    assert!(apply_filter_zero_phase(&c, &vec![0.0; 3 * c.len() + 1]).is_ok());
}

#[test]
fn text_format_round_trips_exactly() {
    for c in [bandpass(), notch()] {
        let text = c.to_string();
        assert!(text.lines().any(|l| l == "b"));
        assert!(text.lines().any(|l| l == "a"));
        let back: FilterCoefficients = text.parse().unwrap();
        assert_eq!(back.b, c.b);
        assert_eq!(back.a, c.a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_phase_filter_is_linear(
        seed in any::<u64>(),
        alpha in -10.0f64..10.0,
        beta in -10.0f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..2048).map(|_| rng.random_range(-50.0..50.0)).collect();
        let y: Vec<f64> = (0..2048).map(|_| rng.random_range(-50.0..50.0)).collect();
        for c in [bandpass(), notch()] {
            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = apply_filter_zero_phase(&c, &combo).unwrap();
            let fx = apply_filter_zero_phase(&c, &x).unwrap();
            let fy = apply_filter_zero_phase(&c, &y).unwrap();
            let rhs: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| alpha * a + beta * b).collect();
            let num: f64 = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = rhs.iter().map(|b| b * b).sum();
            prop_assert!(num.sqrt() <= 1e-9 * den.sqrt());
        }
    }
}
