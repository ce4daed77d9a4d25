//! Short-time Fourier transform and the 224×224 log-power spectrogram images.
//!
//! With 788-sample trials, a 565-sample Blackman window advanced one sample
//! at a time gives 224 frames, and a 447-point one-sided DFT gives 224 bins.
//! Because the window is longer than the DFT, each windowed frame is folded
//! (time-aliased) onto 447 samples before the transform, which samples the
//! frame's DTFT at 447 equally spaced frequencies.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::types::{MovementClass7, Provenance, Trial, TRIAL_LEN};

/// Side length of every spectrogram image.
pub const IMAGE_SIZE: usize = 224;

pub const DEFAULT_WINDOW_LEN: usize = 565;
pub const DEFAULT_OVERLAP: usize = 564;
pub const DEFAULT_N_DFT: usize = 447;
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Window weights `w(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowWeights {
    values: Vec<f64>,
}

impl WindowWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSize("window must not be empty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v > 1.0) {
            return Err(Error::InvalidArgument(
                "window values must be finite and at most 1".into(),
            ));
        }
        Ok(WindowWeights { values })
    }

    pub fn rectangular(len: usize) -> Result<Self> {
        WindowWeights::new(vec![1.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Symmetric Blackman window.
pub fn blackman_window(win_len: usize) -> Result<WindowWeights> {
    if win_len < 2 {
        return Err(Error::InvalidSize(format!(
            "Blackman window needs at least 2 points, got {win_len}"
        )));
    }
    let denom = (win_len - 1) as f64;
    let values = (0..win_len)
        .map(|n| {
            // Mirror so the window is exactly symmetric in floating point.
            let n = n.min(win_len - 1 - n) as f64;
            let x = 2.0 * PI * n / denom;
            // 0.42 - 0.5 cos x + 0.08 cos 2x, arranged to be exact at both ends and the middle.
            0.5 * (1.0 - x.cos()) - 0.08 * (1.0 - (2.0 * x).cos())
        })
        .collect();
    WindowWeights::new(values)
}

/// How a windowed frame longer than the DFT is reduced to `n_dft` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameFit {
    /// Sum the frame modulo `n_dft` (time aliasing).
    #[default]
    Fold,
    /// Keep only the first `n_dft` samples.
    Truncate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub window: WindowWeights,
    pub hop: usize,
    pub n_dft: usize,
    pub one_sided: bool,
    pub frame_fit: FrameFit,
    pub fs_hz: f64,
}

impl StftConfig {
    /// Blackman 565, overlap 564, 447-point one-sided DFT at 512 Hz.
    pub fn standard() -> Self {
        StftConfig::from_geometry(DEFAULT_WINDOW_LEN, DEFAULT_OVERLAP, DEFAULT_N_DFT, 512.0)
            .expect("default geometry is valid")
    }

    /// Blackman window of `window_len` with `overlap` samples shared between frames.
    pub fn from_geometry(window_len: usize, overlap: usize, n_dft: usize, fs_hz: f64) -> Result<Self> {
        if overlap >= window_len {
            return Err(Error::InvalidArgument(format!(
                "overlap {overlap} must be smaller than window {window_len} (hop would be 0)"
            )));
        }
        if n_dft == 0 {
            return Err(Error::InvalidSize("DFT length must be at least 1".into()));
        }
        Ok(StftConfig {
            window: blackman_window(window_len)?,
            hop: window_len - overlap,
            n_dft,
            one_sided: true,
            frame_fit: FrameFit::Fold,
            fs_hz,
        })
    }

    pub fn n_bins(&self) -> usize {
        if self.one_sided {
            self.n_dft / 2 + 1
        } else {
            self.n_dft
        }
    }
}

/// Complex STFT frames, `data[bin * n_frames + frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StftFrames {
    pub data: Vec<Complex64>,
    pub n_bins: usize,
    pub n_frames: usize,
    pub bin_hz: f64,
    pub frame_step_s: f64,
}

impl StftFrames {
    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.n_frames + frame]
    }
}

/// `floor((signal_len - win_len) / hop) + 1`.
pub fn frame_count(signal_len: usize, win_len: usize, hop: usize) -> Result<usize> {
    if hop == 0 {
        return Err(Error::InvalidArgument("hop must be at least 1".into()));
    }
    if win_len == 0 {
        return Err(Error::InvalidSize("window length must be at least 1".into()));
    }
    if signal_len < win_len {
        return Err(Error::InsufficientSamples {
            len: signal_len,
            needed: win_len,
        });
    }
    Ok((signal_len - win_len) / hop + 1)
}

/// Reusable STFT engine holding a planned FFT.
pub struct Stft {
    config: StftConfig,
    fft: Arc<dyn Fft<f64>>,
    sliding: Option<Sliding>,
}

/// Blackman coefficients of `e^{iqφk}` for q = 0, ±1, ±2, φ = 2π/(L − 1).
const BLACKMAN_TERMS: [(i64, f64); 5] = [(0, 0.42), (1, -0.25), (-1, -0.25), (2, 0.04), (-2, 0.04)];

/// Hop-1 Blackman STFT as five sliding rectangular DFTs per bin.
///
/// With `S_m(θ) = Σ_{k<K} x[m+k] e^{-iθk}` the windowed bin is
/// `Σ_q c_q S_m(ω_b − qφ)`, and `S_{m+1}(θ) = e^{iθ}(S_m(θ) − x[m] + x[m+K] e^{-iθK})`.
/// The first frame comes from three FFTs; the rest costs O(1) per entry.
struct Sliding {
    /// Summed samples per frame, `K`.
    span: usize,
    /// `e^{iθ}` and `e^{-iθK}`, term-major: `[term * n_bins + bin]`.
    rot: Vec<Complex64>,
    tail: Vec<Complex64>,
}

/// `e^{2πi·num/den}` with the numerator reduced exactly first.
fn unit_phasor(num: i64, den: usize) -> Complex64 {
    let r = num.rem_euclid(den as i64) as f64;
    Complex64::from_polar(1.0, 2.0 * PI * r / den as f64)
}

impl Sliding {
    fn new(config: &StftConfig) -> Result<Option<Self>> {
        let len = config.window.len();
        // Short windows are cheaper by FFT, and their near-zero taps leave
        // the five-term cancellation relatively inexact.
        if config.hop != 1 || len < 32 || config.window != blackman_window(len)? {
            return Ok(None);
        }
        let n = config.n_dft;
        let span = match config.frame_fit {
            FrameFit::Fold => len,
            FrameFit::Truncate => len.min(n),
        };
        let period = len - 1;
        let n_bins = config.n_bins();
        let mut rot = Vec::with_capacity(5 * n_bins);
        let mut tail = Vec::with_capacity(5 * n_bins);
        for &(q, _) in &BLACKMAN_TERMS {
            for b in 0..n_bins as i64 {
                rot.push(unit_phasor(b, n) * unit_phasor(-q, period));
                let k = span as i64;
                tail.push(unit_phasor(-b * k, n) * unit_phasor(q * k, period));
            }
        }
        Ok(Some(Sliding { span, rot, tail }))
    }
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self> {
        if config.hop == 0 {
            return Err(Error::InvalidArgument("hop must be at least 1".into()));
        }
        if config.n_dft == 0 {
            return Err(Error::InvalidSize("DFT length must be at least 1".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(config.n_dft);
        let sliding = Sliding::new(&config)?;
        Ok(Stft { config, fft, sliding })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn process(&self, signal: &[f64]) -> Result<StftFrames> {
        let cfg = &self.config;
        let n_frames = frame_count(signal.len(), cfg.window.len(), cfg.hop)?;
        let mut data = vec![Complex64::new(0.0, 0.0); cfg.n_bins() * n_frames];
        self.for_each_bin(signal, |i, z| data[i] = z)?;
        Ok(StftFrames {
            data,
            n_bins: cfg.n_bins(),
            n_frames,
            bin_hz: cfg.fs_hz / cfg.n_dft as f64,
            frame_step_s: cfg.hop as f64 / cfg.fs_hz,
        })
    }

    /// `ln(|X|^2 + epsilon)` in the layout of [`StftFrames::data`], without
    /// materializing the complex frames.
    pub fn log_power(&self, signal: &[f64], epsilon: f64) -> Result<Vec<f64>> {
        check_epsilon(epsilon)?;
        let cfg = &self.config;
        let n_frames = frame_count(signal.len(), cfg.window.len(), cfg.hop)?;
        let mut out = vec![0.0; cfg.n_bins() * n_frames];
        self.for_each_bin(signal, |i, z| out[i] = z.norm_sqr())?;
        out.iter_mut().for_each(|v| *v = (*v + epsilon).ln());
        Ok(out)
    }

    /// Calls `emit(bin * n_frames + frame, value)` once per output entry.
    fn for_each_bin(&self, signal: &[f64], mut emit: impl FnMut(usize, Complex64)) -> Result<()> {
        let cfg = &self.config;
        let win = cfg.window.values();
        let n_frames = frame_count(signal.len(), win.len(), cfg.hop)?;
        if signal.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("STFT input".into()));
        }
        if let Some(sliding) = &self.sliding {
            self.slide(sliding, signal, n_frames, &mut emit);
            return Ok(());
        }
        let n_bins = cfg.n_bins();
        let n = cfg.n_dft;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut folded = vec![0.0; n];
        // Two real frames per complex transform: frame m in the real part,
        // frame m + 1 in the imaginary part, separated by conjugate symmetry.
        for m in (0..n_frames).step_by(2) {
            let pair = (m + 1 < n_frames) as usize + 1;
            for j in 0..pair {
                let start = (m + j) * cfg.hop;
                self.fit_frame(&signal[start..start + win.len()], &mut folded);
                for (b, &v) in buf.iter_mut().zip(&folded) {
                    if j == 0 {
                        *b = Complex64::new(v, 0.0);
                    } else {
                        b.im = v;
                    }
                }
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for bin in 0..n_bins {
                let z = buf[bin % n];
                if pair == 1 {
                    emit(bin * n_frames + m, z);
                    continue;
                }
                let zc = buf[(n - bin % n) % n].conj();
                emit(bin * n_frames + m, (z + zc) * 0.5);
                emit(bin * n_frames + m + 1, Complex64::new(0.0, -0.5) * (z - zc));
            }
        }
        Ok(())
    }

    fn slide(&self, sl: &Sliding, signal: &[f64], n_frames: usize, emit: &mut impl FnMut(usize, Complex64)) {
        let n = self.config.n_dft;
        let n_bins = self.config.n_bins();
        let period = (self.config.window.len() - 1) as i64;
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        // S_0 for q = 0, 1, 2 by FFT; -q is the conjugate mirror of +q.
        let mut first: Vec<Vec<Complex64>> = Vec::with_capacity(3);
        for q in 0..3i64 {
            let mut y = vec![Complex64::new(0.0, 0.0); n];
            for (k, &x) in signal[..sl.span].iter().enumerate() {
                y[k % n] += unit_phasor(q * k as i64, period as usize) * x;
            }
            self.fft.process_with_scratch(&mut y, &mut scratch);
            first.push(y);
        }
        let mut state = Vec::with_capacity(5 * n_bins);
        for &(q, _) in &BLACKMAN_TERMS {
            let y = &first[q.unsigned_abs() as usize];
            for b in 0..n_bins {
                state.push(if q >= 0 { y[b % n] } else { y[(n - b % n) % n].conj() });
            }
        }
        for m in 0..n_frames {
            for b in 0..n_bins {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &(_, c)) in BLACKMAN_TERMS.iter().enumerate() {
                    acc += state[t * n_bins + b] * c;
                }
                emit(b * n_frames + m, acc);
            }
            if m + 1 == n_frames {
                break;
            }
            let (leave, enter) = (signal[m], signal[m + sl.span]);
            for ((s, &r), &e) in state.iter_mut().zip(&sl.rot).zip(&sl.tail) {
                *s = r * (*s - leave + e * enter);
            }
        }
    }

    /// Windows one frame and folds or truncates it onto `n_dft` samples.
    fn fit_frame(&self, frame: &[f64], out: &mut [f64]) {
        let cfg = &self.config;
        let win = cfg.window.values();
        out.iter_mut().for_each(|v| *v = 0.0);
        match cfg.frame_fit {
            FrameFit::Fold => {
                for (xs, ws) in frame.chunks(cfg.n_dft).zip(win.chunks(cfg.n_dft)) {
                    for ((o, x), w) in out.iter_mut().zip(xs).zip(ws) {
                        *o += x * w;
                    }
                }
            }
            FrameFit::Truncate => {
                for ((o, x), w) in out.iter_mut().zip(frame).zip(win) {
                    *o = x * w;
                }
            }
        }
    }
}

pub fn stft(signal: &[f64], config: &StftConfig) -> Result<StftFrames> {
    Stft::new(config.clone())?.process(signal)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")))
    }
}

/// `ln(|X|^2 + epsilon)` for every entry, same layout as the frames.
pub fn log_power(frames: &StftFrames, epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    Ok(frames
        .data
        .iter()
        .map(|x| (x.norm_sqr() + epsilon).ln())
        .collect())
}

/// Log-power image of one channel of one trial; rows are frequency bins, columns frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<f64>,
    pub label: MovementClass7,
    pub channel_index: u16,
    pub channel_name: String,
    pub provenance: Provenance,
}

impl Spectrogram {
    pub fn new(
        data: Vec<f64>,
        label: MovementClass7,
        channel_index: u16,
        channel_name: String,
        provenance: Provenance,
    ) -> Result<Self> {
        if data.len() != IMAGE_SIZE * IMAGE_SIZE {
            return Err(Error::Shape(format!(
                "spectrogram needs {} values, got {}",
                IMAGE_SIZE * IMAGE_SIZE,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrogram value".into()));
        }
        Ok(Spectrogram {
            data,
            label,
            channel_index,
            channel_name,
            provenance,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * IMAGE_SIZE + col]
    }
}

/// One spectrogram per channel, in channel order.
pub fn trial_to_spectrograms(
    trial: &Trial,
    config: &StftConfig,
    epsilon: f64,
    exec: Exec,
) -> Result<Vec<Spectrogram>> {
    let n_frames = frame_count(TRIAL_LEN, config.window.len(), config.hop)?;
    let n_bins = config.n_bins();
    if n_frames != IMAGE_SIZE || n_bins != IMAGE_SIZE {
        return Err(Error::Geometry {
            rows: n_bins,
            cols: n_frames,
            expected: IMAGE_SIZE,
        });
    }
    let engine = Stft::new(config.clone())?;
    let channels: Vec<usize> = (0..trial.n_channels()).collect();
    exec::try_map(exec, channels, |&c| {
        let data = engine.log_power(trial.channel(c), epsilon)?;
        Spectrogram::new(
            data,
            trial.label,
            c as u16,
            trial.channel_names()[c].clone(),
            trial.provenance,
        )
    })
}

/// Floor on the standard deviation used when standardizing an image.
pub const STD_FLOOR: f64 = 1e-8;

/// Zero-mean, unit-variance copy of a plane (population std, floored).
pub fn standardize<T: Copy + Into<f64>>(plane: &[T]) -> Vec<f64> {
    let n = plane.len() as f64;
    let mean = plane.iter().map(|&v| v.into()).sum::<f64>() / n;
    let var = plane
        .iter()
        .map(|&v| {
            let d = v.into() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let std = var.sqrt().max(STD_FLOOR);
    plane.iter().map(|&v| (v.into() - mean) / std).collect()
}

/// Standardized plane replicated into three identical channels, `[3 × H × W]`.
pub fn replicate3(plane: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * plane.len());
    for _ in 0..3 {
        out.extend_from_slice(plane);
    }
    out
}

/// Model input tensor `[3 × 224 × 224]` for one spectrogram.
pub fn to_input_image(spec: &Spectrogram) -> Vec<f64> {
    replicate3(&standardize(spec.data()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SubjectId;

    fn prov() -> Provenance {
        Provenance::new(SubjectId::new(1).unwrap(), 1, 1).unwrap()
    }

    #[test]
    fn blackman_endpoints_and_midpoint() {
        let w = blackman_window(565).unwrap();
        assert_eq!(w.values()[0], 0.0);
        assert_eq!(w.values()[564], 0.0);
        assert_eq!(w.values()[282], 1.0);
        for n in 0..565 {
            assert_eq!(w.values()[n], w.values()[564 - n]);
        }
        assert!(blackman_window(1).is_err());
    }

    #[test]
    fn frame_counts() {
        assert_eq!(frame_count(788, 565, 1).unwrap(), 224);
        assert_eq!(frame_count(565, 565, 1).unwrap(), 1);
        assert_eq!(frame_count(788, 565, 2).unwrap(), 112);
        assert!(matches!(
            frame_count(500, 565, 1),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        let cfg = StftConfig {
            window: WindowWeights::rectangular(8).unwrap(),
            hop: 8,
            n_dft: 8,
            one_sided: true,
            frame_fit: FrameFit::Fold,
            fs_hz: 8.0,
        };
        let frames = stft(&x, &cfg).unwrap();
        assert_eq!(frames.n_frames, 1);
        for bin in 0..frames.n_bins {
            assert_eq!(frames.get(bin, 0), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn integer_bin_cosine() {
        let x: Vec<f64> = (0..256)
            .map(|k| (2.0 * PI * 32.0 * k as f64 / 256.0).cos())
            .collect();
        let cfg = StftConfig {
            window: WindowWeights::rectangular(256).unwrap(),
            hop: 256,
            n_dft: 256,
            one_sided: true,
            frame_fit: FrameFit::Fold,
            fs_hz: 256.0,
        };
        let frames = stft(&x, &cfg).unwrap();
        assert_eq!(frames.n_bins, 129);
        for bin in 0..frames.n_bins {
            let mag = frames.get(bin, 0).norm();
            if bin == 32 {
                assert!((mag - 128.0).abs() < 1e-9);
            } else {
                assert!(mag < 1e-9, "bin {bin}: {mag}");
            }
        }
    }

    #[test]
    fn standard_geometry_is_224_square() {
        let cfg = StftConfig::standard();
        assert_eq!(cfg.hop, 1);
        let x: Vec<f64> = (0..788).map(|k| (k as f64 * 0.1).sin()).collect();
        let frames = stft(&x, &cfg).unwrap();
        assert_eq!((frames.n_bins, frames.n_frames), (224, 224));
        assert!((frames.bin_hz - 512.0 / 447.0).abs() < 1e-12);
    }

    #[test]
    fn zero_overlap_equal_to_window_rejected() {
        assert!(StftConfig::from_geometry(565, 565, 447, 512.0).is_err());
    }

    #[test]
    fn log_power_values() {
        let frames = StftFrames {
            data: vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, std::f64::consts::E),
            ],
            n_bins: 1,
            n_frames: 3,
            bin_hz: 1.0,
            frame_step_s: 1.0,
        };
        let lp = log_power(&frames, 1e-12).unwrap();
        assert!(lp[0].abs() < 1e-9);
        assert!((lp[1] - (-27.631021115928547)).abs() < 1e-9);
        assert!((lp[2] - 2.0).abs() < 1e-9);
        assert!(log_power(&frames, 0.0).is_err());
    }

    fn trial(n_channels: usize, f: impl Fn(usize, usize) -> f64) -> Trial {
        let rows = (0..n_channels)
            .map(|c| (0..TRIAL_LEN).map(|k| f(c, k)).collect())
            .collect();
        let names: Arc<[String]> = (0..n_channels).map(|c| format!("C{c}")).collect();
        Trial::new(rows, names, MovementClass7::Pronation, prov(), 0).unwrap()
    }

    #[test]
    fn one_spectrogram_per_channel() {
        let t = trial(61, |c, k| ((c + 1) as f64 * k as f64 * 0.01).sin());
        let specs = trial_to_spectrograms(&t, &StftConfig::standard(), 1e-12, Exec::default()).unwrap();
        assert_eq!(specs.len(), 61);
        assert_eq!(specs[5].channel_index, 5);
        assert_eq!(specs[5].channel_name, "C5");
        assert!(specs.iter().all(|s| s.label == MovementClass7::Pronation));
    }

    #[test]
    fn zero_trial_gives_ln_epsilon() {
        let t = trial(2, |_, _| 0.0);
        let specs = trial_to_spectrograms(&t, &StftConfig::standard(), 1e-12, Exec::default()).unwrap();
        let expected = 1e-12f64.ln();
        assert!(specs.iter().all(|s| s.data().iter().all(|&v| v == expected)));
    }

    #[test]
    fn wrong_geometry_is_an_error() {
        let t = trial(1, |_, k| k as f64);
        let cfg = StftConfig::from_geometry(565, 563, 447, 512.0).unwrap();
        assert!(matches!(
            trial_to_spectrograms(&t, &cfg, 1e-12, Exec::Sequential),
            Err(Error::Geometry { rows: 224, cols: 112, .. })
        ));
    }

    #[test]
    fn input_image_replicates_standardized_plane() {
        let data: Vec<f64> = (0..IMAGE_SIZE * IMAGE_SIZE).map(|i| (i % 97) as f64 * 0.3 - 4.0).collect();
        let spec = Spectrogram::new(data, MovementClass7::Rest, 0, "FC1".into(), prov()).unwrap();
        let img = to_input_image(&spec);
        let plane = IMAGE_SIZE * IMAGE_SIZE;
        assert_eq!(img.len(), 3 * plane);
        assert_eq!(img[..plane], img[plane..2 * plane]);
        assert_eq!(img[..plane], img[2 * plane..]);
        let mean = img[..plane].iter().sum::<f64>() / plane as f64;
        let var = img[..plane].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / plane as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_image_standardizes_to_zero() {
        let spec = Spectrogram::new(
            vec![-3.5; IMAGE_SIZE * IMAGE_SIZE],
            MovementClass7::Rest,
            0,
            "FC1".into(),
            prov(),
        )
        .unwrap();
        assert!(to_input_image(&spec).iter().all(|&v| v == 0.0));
    }
}
