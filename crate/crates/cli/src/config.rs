//! Flat `key=value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use spectra_mi::dataset::SplitSpec;
use spectra_mi::model::{ArchitectureSpec, TrainConfig};
use spectra_mi::preprocess::FilterConfig;
use spectra_mi::spectrogram::{
    frame_count, FrameFit, StftConfig, WindowWeights, IMAGE_SIZE,
};
use spectra_mi::types::{N_SUBJECTS, TRIAL_LEN};

trait Value: Sized {
    fn parse_value(s: &str) -> Result<Self>;
    fn format_value(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse_value(s: &str) -> Result<Self> {
                <$t>::from_str(s).map_err(|e| anyhow!("{e}"))
            }
            fn format_value(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_value!(u64, usize, u16, f64, bool, String);

impl Value for PathBuf {
    fn parse_value(s: &str) -> Result<Self> {
        Ok(PathBuf::from(s))
    }
    fn format_value(&self) -> String {
        self.display().to_string()
    }
}

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $field:ident : $ty:ty = $default:expr,)*) => {
        /// Every stage parameter of a run. Defaults are the standard protocol.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $field: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $($field: $default,)* }
            }
        }

        impl RunConfig {
            /// Recognized keys, in dump order.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            /// Sets one key from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let value = value.trim();
                match key.trim() {
                    $(stringify!($field) => {
                        self.$field = <$ty as Value>::parse_value(value)
                            .with_context(|| format!("bad value {value:?} for {}", stringify!($field)))?;
                    })*
                    other => bail!("unknown config key {other:?}"),
                }
                Ok(())
            }

            /// One `key=value` line per key.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(let _ = writeln!(s, "{}={}", stringify!($field), self.$field.format_value());)*
                s
            }
        }
    };
}

run_config! {
    /// Root of all inputs and outputs.
    work_dir: PathBuf = PathBuf::from("spectra-mi-work"),
    seed: u64 = 0,
    /// Subjects S1..=Sn are processed.
    subjects: u16 = N_SUBJECTS,
    /// Synthetic trials per class and subject (10 runs x 6 sessions).
    trials_per_class: usize = 60,
    channels: usize = 61,
    fs: f64 = 512.0,
    band_low_hz: f64 = 0.01,
    band_high_hz: f64 = 200.0,
    band_order: usize = 4,
    band_ripple_db: f64 = 0.5,
    notch_hz: f64 = 50.0,
    notch_q: f64 = 30.0,
    trial_samples: usize = TRIAL_LEN,
    /// `blackman` or `rectangular`.
    window: String = "blackman".into(),
    window_len: usize = 565,
    overlap: usize = 564,
    n_dft: usize = 447,
    one_sided: bool = true,
    /// `fold` (time-alias frames longer than the DFT) or `truncate`.
    frame_fit: String = "fold".into(),
    log_epsilon: f64 = 1e-12,
    /// Spectrograms per subject also written as PGM images.
    pgm_per_subject: usize = 0,
    train_frac: f64 = 0.7,
    valid_frac: f64 = 0.1,
    test_frac: f64 = 0.2,
    group_by_trial: bool = false,
    /// `vgg16` or `minivgg`.
    arch: String = "vgg16".into(),
    /// 7, or 4 after merging movement pairs.
    classes: usize = 7,
    batch_size: usize = 16,
    epochs: usize = 20,
    lr: f64 = 0.001,
    momentum: f64 = 0.9,
    /// Split scored by `eval`: `test`, `valid` or `train`.
    eval_split: String = "test".into(),
}

impl RunConfig {
    /// Applies `key=value` lines; `#` starts a comment, blank lines are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value, got {raw:?}", n + 1))?;
            self.set(k, v).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        RunConfig::from_text(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("override {kv:?} is not key=value"))?;
        self.set(k, v)
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            fs_hz: self.fs,
            low_hz: self.band_low_hz,
            high_hz: self.band_high_hz,
            order: self.band_order,
            ripple_db: self.band_ripple_db,
            notch_hz: self.notch_hz,
            notch_q: self.notch_q,
        }
    }

    /// STFT settings, checked to produce 224x224 images from one trial.
    pub fn stft_config(&self) -> Result<StftConfig> {
        let mut cfg = StftConfig::from_geometry(self.window_len, self.overlap, self.n_dft, self.fs)?;
        cfg.window = match self.window.as_str() {
            "blackman" => cfg.window,
            "rectangular" => WindowWeights::rectangular(self.window_len)?,
            other => bail!("unknown window {other:?} (blackman, rectangular)"),
        };
        cfg.frame_fit = match self.frame_fit.as_str() {
            "fold" => FrameFit::Fold,
            "truncate" => FrameFit::Truncate,
            other => bail!("unknown frame_fit {other:?} (fold, truncate)"),
        };
        cfg.one_sided = self.one_sided;
        if self.trial_samples != TRIAL_LEN {
            bail!("trial_samples must be {TRIAL_LEN}, got {}", self.trial_samples);
        }
        let cols = frame_count(self.trial_samples, self.window_len, cfg.hop)?;
        let rows = cfg.n_bins();
        if rows != IMAGE_SIZE || cols != IMAGE_SIZE {
            bail!("spectrogram geometry is {rows}x{cols}, expected {IMAGE_SIZE}x{IMAGE_SIZE}");
        }
        Ok(cfg)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_frac: self.train_frac,
            valid_frac: self.valid_frac,
            test_frac: self.test_frac,
            seed: self.seed,
            group_by_trial: self.group_by_trial,
        }
    }

    /// Training settings for one subject; the shuffle seed differs per subject.
    pub fn train_config(&self, subject: u16) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: derive_seed(self.seed, subject as u64),
            lr: self.lr,
            momentum: self.momentum,
        }
    }

    pub fn architecture(&self) -> Result<ArchitectureSpec> {
        if !matches!(self.classes, 4 | 7) {
            bail!("classes must be 7 or 4, got {}", self.classes);
        }
        Ok(ArchitectureSpec::preset(
            &self.arch,
            (3, IMAGE_SIZE, IMAGE_SIZE),
            self.classes,
        )?)
    }

    /// Checks everything that does not need input files.
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.subjects > N_SUBJECTS {
            bail!("subjects must be in 1..={N_SUBJECTS}, got {}", self.subjects);
        }
        if self.channels == 0 {
            bail!("channels must be at least 1");
        }
        self.stft_config()?;
        self.split_spec().validate()?;
        self.architecture()?;
        if !matches!(self.eval_split.as_str(), "test" | "valid" | "train") {
            bail!("eval_split must be test, valid or train, got {:?}", self.eval_split);
        }
        if !(self.log_epsilon > 0.0) {
            bail!("log_epsilon must be positive");
        }
        Ok(())
    }
}

/// Mixes a run seed with a stream number (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
