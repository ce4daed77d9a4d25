//! Trial extraction, synthetic subjects, labeled image datasets, stratified
//! splitting, 7→4 class merging and mini-batch ordering.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::preprocess::Preprocessor;
use crate::spectrogram::{replicate3, standardize, trial_to_spectrograms, Spectrogram, StftConfig};
use crate::types::{
    Marker, MovementClass7, MultichannelRecording, Provenance, SubjectId, Trial, N_RUNS,
    N_SESSIONS, SAMPLE_RATE_HZ, TRIAL_LEN,
};

/// Electrode labels of the 61-channel montage, in recording order.
pub const CHANNEL_NAMES: [&str; 61] = [
    "F3", "F1", "Fz", "F2", "F4", "FFC5h", "FFC3h", "FFC1h", "FFC2h", "FFC4h", "FFC6h", "FC5",
    "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FTT7h", "FCC5h", "FCC3h", "FCC1h", "FCC2h",
    "FCC4h", "FCC6h", "FTT8h", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "TTP7h", "CCP5h",
    "CCP3h", "CCP1h", "CCP2h", "CCP4h", "CCP6h", "TTP8h", "CP5", "CP3", "CP1", "CPz", "CP2",
    "CP4", "CP6", "CPP5h", "CPP3h", "CPP1h", "CPP2h", "CPP4h", "CPP6h", "P3", "P1", "Pz", "P2",
    "P4", "PPO1h", "PPO2h",
];

pub fn channel_names(n_channels: usize) -> Vec<String> {
    (0..n_channels)
        .map(|i| match CHANNEL_NAMES.get(i) {
            Some(name) => name.to_string(),
            None => format!("Ch{}", i + 1),
        })
        .collect()
}

/// Run and session of the `ordinal`-th trial of a class, counting from the
/// recording's own run: six sessions per run, runs wrapping after ten.
pub fn trial_run_session(first_run: u16, ordinal: usize) -> (u16, u16) {
    let session = (ordinal % N_SESSIONS as usize) as u16 + 1;
    let run = ((first_run as usize - 1 + ordinal / N_SESSIONS as usize) % N_RUNS as usize) as u16 + 1;
    (run, session)
}

/// Cuts one 788-sample trial per marker. Run/session come from each marker's
/// ordinal among markers of the same class.
pub fn extract_trials(recording: &MultichannelRecording, markers: &[Marker]) -> Result<Vec<Trial>> {
    let n_samples = recording.n_samples();
    let names: Arc<[String]> = recording.channels().to_vec().into();
    let base = recording.provenance();
    let mut seen = [0usize; 7];
    markers
        .iter()
        .map(|m| {
            if m.onset_index + TRIAL_LEN > n_samples {
                return Err(Error::OutOfBounds {
                    onset: m.onset_index,
                    trial_len: TRIAL_LEN,
                    n_samples,
                });
            }
            let ordinal = seen[m.label.code()];
            seen[m.label.code()] += 1;
            let (run, session) = trial_run_session(base.run, ordinal);
            let rows = (0..recording.n_channels())
                .map(|c| recording.channel(c)[m.onset_index..m.onset_index + TRIAL_LEN].to_vec())
                .collect();
            Trial::new(
                rows,
                names.clone(),
                m.label,
                Provenance::new(base.subject, run, session)?,
                m.onset_index,
            )
        })
        .collect()
}

/// Filters the whole recording, cuts one trial per marker and hands each
/// trial's per-channel spectrograms to `sink`, in marker order. Returns the
/// number of spectrograms produced.
pub fn recording_spectrograms<F>(
    recording: &MultichannelRecording,
    markers: &[Marker],
    preprocessor: &Preprocessor,
    config: &StftConfig,
    epsilon: f64,
    exec: Exec,
    mut sink: F,
) -> Result<usize>
where
    F: FnMut(Vec<Spectrogram>) -> Result<()>,
{
    let filtered = recording.map_channels(|row| preprocessor.apply(row))?;
    let trials = extract_trials(&filtered, markers)?;
    drop(filtered);
    let mut produced = 0;
    for trial in &trials {
        let specs = trial_to_spectrograms(trial, config, epsilon, exec)?;
        produced += specs.len();
        sink(specs)?;
    }
    Ok(produced)
}

/// Layout and signal levels of synthetic recordings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Samples per trial segment; the trial sits in the middle.
    pub segment_len: usize,
    /// RMS of the class-specific band-limited component, µV.
    pub signal_rms_uv: f64,
    /// Background power relative to the class component, dB.
    pub background_db: f64,
    /// Half-width of each class band, Hz.
    pub half_bandwidth_hz: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            segment_len: 1024,
            signal_rms_uv: 10.0,
            background_db: -10.0,
            half_bandwidth_hz: 4.0,
        }
    }
}

/// Carrier frequency of a movement class's synthetic signature; `None` for Rest.
pub fn class_center_hz(label: MovementClass7) -> Option<f64> {
    match label {
        MovementClass7::Rest => None,
        other => Some(10.0 + 25.0 * other.code() as f64),
    }
}

/// A continuous synthetic recording with one trial segment per marker.
///
/// Every channel carries 1/f background throughout. Inside each trial segment
/// movement classes add band-limited noise around their carrier; Rest adds
/// nothing. Segments cycle through the seven classes in code order.
pub fn synth_recording(
    seed: u64,
    subject: SubjectId,
    trials_per_class: usize,
    n_channels: usize,
    config: &SynthConfig,
) -> Result<(MultichannelRecording, Vec<Marker>)> {
    if n_channels == 0 {
        return Err(Error::InvalidArgument("at least one channel is required".into()));
    }
    if config.segment_len < TRIAL_LEN {
        return Err(Error::InvalidArgument(format!(
            "segment length {} shorter than a trial",
            config.segment_len
        )));
    }
    let seg = config.segment_len;
    let n_segments = trials_per_class * 7;
    let total = (n_segments * seg).max(seg);
    let offset = (seg - TRIAL_LEN) / 2;
    let markers: Vec<Marker> = (0..n_segments)
        .map(|s| Marker {
            onset_index: s * seg + offset,
            label: MovementClass7::ALL[s % 7],
        })
        .collect();

    let background_rms = config.signal_rms_uv * 10f64.powf(config.background_db / 20.0);
    let rows: Vec<Vec<f64>> = crate::exec::map(
        crate::exec::Exec::default(),
        &(0..n_channels).collect::<Vec<_>>(),
        |&c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let mut row = pink_noise(&mut rng, total, background_rms);
            let ifft = FftPlanner::new().plan_fft_inverse(seg);
            for (s, m) in markers.iter().enumerate() {
                if let Some(fc) = class_center_hz(m.label) {
                    let start = s * seg;
                    add_band_noise(
                        &mut rng,
                        ifft.as_ref(),
                        &mut row[start..start + seg],
                        fc,
                        config.half_bandwidth_hz,
                        config.signal_rms_uv,
                    );
                }
            }
            row
        },
    );
    let provenance = Provenance::new(subject, 1, 1)?;
    let recording =
        MultichannelRecording::new(SAMPLE_RATE_HZ, channel_names(n_channels), rows, provenance)?;
    Ok((recording, markers))
}

/// Synthetic trials for one subject (unfiltered).
pub fn synth_subject(seed: u64, trials_per_class: usize, n_channels: usize) -> Result<Vec<Trial>> {
    if trials_per_class == 0 {
        return Ok(Vec::new());
    }
    let subject = SubjectId::new(1)?;
    let (rec, markers) = synth_recording(
        seed,
        subject,
        trials_per_class,
        n_channels,
        &SynthConfig::default(),
    )?;
    extract_trials(&rec, &markers)
}

/// 1/f noise with the requested RMS, shaped in the frequency domain.
fn pink_noise(rng: &mut ChaCha8Rng, len: usize, rms: f64) -> Vec<f64> {
    let mut spec: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut spec);
    let df = SAMPLE_RATE_HZ / len as f64;
    let f_min = 0.5;
    for (k, v) in spec.iter_mut().enumerate() {
        let f = k.min(len - k) as f64 * df;
        *v = if k == 0 { Complex64::new(0.0, 0.0) } else { *v / f.max(f_min).sqrt() };
    }
    planner.plan_fft_inverse(len).process(&mut spec);
    let mut out: Vec<f64> = spec.iter().map(|v| v.re).collect();
    let mean = out.iter().sum::<f64>() / len as f64;
    let cur = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len as f64).sqrt();
    let scale = if cur > 0.0 { rms / cur } else { 0.0 };
    out.iter_mut().for_each(|v| *v = (*v - mean) * scale);
    out
}

/// Adds random-phase sinusoids on the segment's frequency grid within
/// `center ± half_bw`, amplitudes tapered by a half cosine towards the band
/// edges, scaled to the requested RMS. `ifft` is an inverse FFT of the
/// segment length.
fn add_band_noise(
    rng: &mut ChaCha8Rng,
    ifft: &dyn Fft<f64>,
    seg: &mut [f64],
    center: f64,
    half_bw: f64,
    rms: f64,
) {
    let n = seg.len();
    let df = SAMPLE_RATE_HZ / n as f64;
    let lo = ((center - half_bw) / df).ceil().max(1.0) as usize;
    let hi = (((center + half_bw) / df).floor() as usize).min((n - 1) / 2);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let mut power = 0.0;
    for k in lo..=hi {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let taper = (0.5 * PI * (k as f64 * df - center) / half_bw).cos().max(0.0);
        let amp = taper * (re * re + im * im).sqrt();
        power += amp * amp / 2.0;
        spec[k] = Complex64::from_polar(amp / 2.0, im.atan2(re));
        spec[n - k] = spec[k].conj();
    }
    if power == 0.0 {
        return;
    }
    // a·cos(2πki/n + φ) is the sum of bins k and n − k
    ifft.process(&mut spec);
    let scale = rms / power.sqrt();
    for (v, z) in seg.iter_mut().zip(&spec) {
        *v += scale * z.re;
    }
}

/// Where a dataset item came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemSource {
    pub provenance: Provenance,
    pub channel_index: u16,
    pub label7: MovementClass7,
}

impl ItemSource {
    /// Identifies the trial an item was cut from.
    pub fn trial_key(&self) -> (Provenance, MovementClass7) {
        (self.provenance, self.label7)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    /// Log-power plane, `height × width`, row-major.
    pub plane: Arc<[f32]>,
    pub label: usize,
    pub source: ItemSource,
}

/// Labeled image items with a fixed plane geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub items: Vec<Item>,
    pub n_classes: usize,
    pub height: usize,
    pub width: usize,
}

impl LabeledDataset {
    pub fn new(items: Vec<Item>, n_classes: usize, height: usize, width: usize) -> Result<Self> {
        for it in &items {
            if it.label >= n_classes {
                return Err(Error::InvalidLabel {
                    code: it.label,
                    n_classes,
                });
            }
            if it.plane.len() != height * width {
                return Err(Error::Shape(format!(
                    "item plane has {} values, expected {height}x{width}",
                    it.plane.len()
                )));
            }
        }
        Ok(LabeledDataset {
            items,
            n_classes,
            height,
            width,
        })
    }

    /// Seven-class dataset from spectrograms.
    pub fn from_spectrograms(specs: &[Spectrogram]) -> Result<Self> {
        let side = crate::spectrogram::IMAGE_SIZE;
        let items = specs
            .iter()
            .map(|s| Item {
                plane: s.data().iter().map(|&v| v as f32).collect(),
                label: s.label.code(),
                source: ItemSource {
                    provenance: s.provenance,
                    channel_index: s.channel_index,
                    label7: s.label,
                },
            })
            .collect();
        LabeledDataset::new(items, 7, side, side)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for it in &self.items {
            counts[it.label] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
            n_classes: self.n_classes,
            height: self.height,
            width: self.width,
        }
    }

    /// Model input `[B × 3 × H × W]` and labels for the given items.
    pub fn assemble(&self, indices: &[usize]) -> (Vec<f64>, Vec<usize>) {
        let mut input = Vec::with_capacity(indices.len() * 3 * self.height * self.width);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let item = &self.items[i];
            input.extend(replicate3(&standardize(&item.plane)));
            labels.push(item.label);
        }
        (input, labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    /// Keep all channels of one trial in the same split.
    pub group_by_trial: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.7,
            valid_frac: 0.1,
            test_frac: 0.2,
            seed: 0,
            group_by_trial: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.valid_frac, self.test_frac];
        if fr.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::InvalidArgument("split fractions must be positive".into()));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("split fractions must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: LabeledDataset,
    pub valid: LabeledDataset,
    pub test: LabeledDataset,
    /// Split of every input item, by input index.
    pub assignment: Vec<SplitName>,
}

impl DatasetSplit {
    /// `item_index,split` lines with a header.
    pub fn manifest_csv(&self) -> String {
        let mut out = String::from("item_index,split\n");
        for (i, s) in self.assignment.iter().enumerate() {
            out.push_str(&format!("{i},{}\n", s.as_str()));
        }
        out
    }
}

/// Stratified split. Per class, `round(frac * n)` items go to train and to
/// valid; test takes the remainder. Each split keeps input order.
pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::InsufficientData("cannot split an empty dataset".into()));
    }
    let mut assignment = vec![SplitName::Test; ds.len()];
    for class in 0..ds.n_classes {
        let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.items[i].label == class).collect();
        if members.len() < 10 {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} items, need at least 10",
                members.len()
            )));
        }
        // Units are single items, or whole trials when grouping.
        let mut units: Vec<Vec<usize>> = if spec.group_by_trial {
            let mut keys: Vec<_> = members.iter().map(|&i| ds.items[i].source.trial_key()).collect();
            keys.sort();
            keys.dedup();
            keys.iter()
                .map(|k| {
                    members
                        .iter()
                        .copied()
                        .filter(|&i| ds.items[i].source.trial_key() == *k)
                        .collect()
                })
                .collect()
        } else {
            members.iter().map(|&i| vec![i]).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(class as u64);
        units.shuffle(&mut rng);
        let n = units.len() as f64;
        let n_train = (spec.train_frac * n).round() as usize;
        let n_valid = ((spec.valid_frac * n).round() as usize).min(units.len() - n_train);
        for (u, unit) in units.iter().enumerate() {
            let name = if u < n_train {
                SplitName::Train
            } else if u < n_train + n_valid {
                SplitName::Valid
            } else {
                SplitName::Test
            };
            for &i in unit {
                assignment[i] = name;
            }
        }
    }
    let pick = |name| {
        let idx: Vec<usize> = (0..ds.len()).filter(|&i| assignment[i] == name).collect();
        ds.subset(&idx)
    };
    Ok(DatasetSplit {
        train: pick(SplitName::Train),
        valid: pick(SplitName::Valid),
        test: pick(SplitName::Test),
        assignment,
    })
}

/// Relabels a seven-class dataset with the merged four classes.
pub fn merge_to_4class(ds: &LabeledDataset) -> Result<LabeledDataset> {
    if ds.n_classes != 7 {
        return Err(Error::InvalidArgument(format!(
            "class merging needs a 7-class dataset, got {}",
            ds.n_classes
        )));
    }
    let items = ds
        .items
        .iter()
        .map(|it| {
            Ok(Item {
                label: MovementClass7::from_code(it.label)?.merged().code(),
                ..it.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(items, 4, ds.height, ds.width)
}

/// Item indices per batch for one epoch; the order depends only on `(seed, epoch)`.
pub fn batches(ds: &LabeledDataset, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if ds.is_empty() {
        return Err(Error::InsufficientData("no items to batch".into()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}
