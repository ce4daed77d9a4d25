//! Shared domain vocabulary: movement classes, subjects, recordings and trials.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Samples taken from each trial.
pub const TRIAL_LEN: usize = 788;

/// Sampling rate of the source recordings.
pub const SAMPLE_RATE_HZ: f64 = 512.0;

/// Channels in the recording headband.
pub const N_CHANNELS: usize = 61;

pub const N_RUNS: u16 = 10;
pub const N_SESSIONS: u16 = 6;
pub const N_SUBJECTS: u16 = 15;

/// The seven imagined upper-limb movements. Codes follow declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MovementClass7 {
    ElbowFlexion,
    ElbowExtension,
    Pronation,
    Supination,
    HandClose,
    HandOpen,
    Rest,
}

impl MovementClass7 {
    pub const ALL: [MovementClass7; 7] = [
        MovementClass7::ElbowFlexion,
        MovementClass7::ElbowExtension,
        MovementClass7::Pronation,
        MovementClass7::Supination,
        MovementClass7::HandClose,
        MovementClass7::HandOpen,
        MovementClass7::Rest,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL
            .get(code)
            .copied()
            .ok_or(Error::InvalidLabel { code, n_classes: 7 })
    }

    /// Two-letter abbreviation used in confusion-matrix headers.
    pub fn short_name(self) -> &'static str {
        match self {
            MovementClass7::ElbowFlexion => "EF",
            MovementClass7::ElbowExtension => "EE",
            MovementClass7::Pronation => "PR",
            MovementClass7::Supination => "SU",
            MovementClass7::HandClose => "HC",
            MovementClass7::HandOpen => "HO",
            MovementClass7::Rest => "RS",
        }
    }

    /// Coarse class after merging movement pairs of the same joint.
    pub fn merged(self) -> MovementClass4 {
        match self {
            MovementClass7::ElbowFlexion | MovementClass7::ElbowExtension => MovementClass4::Elbow,
            MovementClass7::Pronation | MovementClass7::Supination => MovementClass4::Forearm,
            MovementClass7::HandClose | MovementClass7::HandOpen => MovementClass4::Hand,
            MovementClass7::Rest => MovementClass4::Rest,
        }
    }
}

impl fmt::Display for MovementClass7 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Movement classes after merging the elbow, forearm and hand pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MovementClass4 {
    Elbow,
    Forearm,
    Hand,
    Rest,
}

impl MovementClass4 {
    pub const ALL: [MovementClass4; 4] = [
        MovementClass4::Elbow,
        MovementClass4::Forearm,
        MovementClass4::Hand,
        MovementClass4::Rest,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL
            .get(code)
            .copied()
            .ok_or(Error::InvalidLabel { code, n_classes: 4 })
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MovementClass4::Elbow => "EL",
            MovementClass4::Forearm => "FA",
            MovementClass4::Hand => "HA",
            MovementClass4::Rest => "RS",
        }
    }
}

/// Short class names for an `n_classes`-way problem (7 or 4).
pub fn class_names(n_classes: usize) -> Vec<String> {
    match n_classes {
        7 => MovementClass7::ALL.iter().map(|c| c.short_name().to_string()).collect(),
        4 => MovementClass4::ALL.iter().map(|c| c.short_name().to_string()).collect(),
        n => (0..n).map(|i| format!("C{i}")).collect(),
    }
}

/// Subject index, 1..=15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubjectId(u16);

impl SubjectId {
    pub fn new(index: u16) -> Result<Self> {
        if (1..=N_SUBJECTS).contains(&index) {
            Ok(SubjectId(index))
        } else {
            Err(Error::InvalidArgument(format!(
                "subject index {index} outside 1..={N_SUBJECTS}"
            )))
        }
    }

    pub fn index(self) -> u16 {
        self.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

/// Where a trial or spectrogram came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub subject: SubjectId,
    pub run: u16,
    pub session: u16,
}

impl Provenance {
    pub fn new(subject: SubjectId, run: u16, session: u16) -> Result<Self> {
        if !(1..=N_RUNS).contains(&run) {
            return Err(Error::InvalidArgument(format!("run {run} outside 1..={N_RUNS}")));
        }
        if !(1..=N_SESSIONS).contains(&session) {
            return Err(Error::InvalidArgument(format!(
                "session {session} outside 1..={N_SESSIONS}"
            )));
        }
        Ok(Provenance {
            subject,
            run,
            session,
        })
    }
}

/// Fixed-rate multichannel time series, stored row-major `[channel][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelRecording {
    sample_rate_hz: f64,
    channels: Vec<String>,
    n_samples: usize,
    samples: Vec<f64>,
    provenance: Provenance,
}

impl MultichannelRecording {
    /// Builds a recording from per-channel rows, which must all have the same length.
    pub fn new(
        sample_rate_hz: f64,
        channels: Vec<String>,
        rows: Vec<Vec<f64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if channels.is_empty() || channels.len() != rows.len() {
            return Err(Error::Shape(format!(
                "{} channel names for {} rows",
                channels.len(),
                rows.len()
            )));
        }
        let n_samples = rows[0].len();
        if rows.iter().any(|r| r.len() != n_samples) {
            return Err(Error::Shape("channel rows differ in length".into()));
        }
        let samples = rows.into_iter().flatten().collect();
        Ok(MultichannelRecording {
            sample_rate_hz,
            channels,
            n_samples,
            samples,
            provenance,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.samples[index * self.n_samples..(index + 1) * self.n_samples]
    }

    /// Replaces every channel row through `f`, keeping the metadata.
    pub fn map_channels<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        let rows = crate::exec::try_map(
            crate::exec::Exec::default(),
            (0..self.n_channels()).collect::<Vec<_>>(),
            |&c| f(self.channel(c)),
        )?;
        MultichannelRecording::new(self.sample_rate_hz, self.channels.clone(), rows, self.provenance)
    }
}

/// A trial onset and its label, as listed in a marker file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Marker {
    pub onset_index: usize,
    pub label: MovementClass7,
}

/// One labeled 788-sample epoch across all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    samples: Vec<f64>,
    n_channels: usize,
    channel_names: Arc<[String]>,
    pub label: MovementClass7,
    pub provenance: Provenance,
    pub onset_index: usize,
}

impl Trial {
    pub fn new(
        rows: Vec<Vec<f64>>,
        channel_names: Arc<[String]>,
        label: MovementClass7,
        provenance: Provenance,
        onset_index: usize,
    ) -> Result<Self> {
        if rows.is_empty() || rows.len() != channel_names.len() {
            return Err(Error::Shape(format!(
                "{} rows for {} channel names",
                rows.len(),
                channel_names.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != TRIAL_LEN) {
            return Err(Error::Shape(format!(
                "trial rows must have {TRIAL_LEN} samples, got {}",
                bad.len()
            )));
        }
        let n_channels = rows.len();
        Ok(Trial {
            samples: rows.into_iter().flatten().collect(),
            n_channels,
            channel_names,
            label,
            provenance,
            onset_index,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.samples[index * TRIAL_LEN..(index + 1) * TRIAL_LEN]
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class7_codes_are_declaration_order() {
        assert_eq!(MovementClass7::ElbowFlexion.code(), 0);
        assert_eq!(MovementClass7::Rest.code(), 6);
        for code in 0..7 {
            assert_eq!(MovementClass7::from_code(code).unwrap().code(), code);
        }
        assert!(MovementClass7::from_code(7).is_err());
    }

    #[test]
    fn class4_codes() {
        assert_eq!(MovementClass4::ALL.len(), 4);
        for code in 0..4 {
            assert_eq!(MovementClass4::from_code(code).unwrap().code(), code);
        }
        assert!(MovementClass4::from_code(4).is_err());
    }

    #[test]
    fn merge_pairs() {
        use MovementClass4 as C4;
        use MovementClass7 as C7;
        assert_eq!(C7::ElbowFlexion.merged(), C4::Elbow);
        assert_eq!(C7::ElbowExtension.merged(), C4::Elbow);
        assert_eq!(C7::Pronation.merged(), C4::Forearm);
        assert_eq!(C7::Supination.merged(), C4::Forearm);
        assert_eq!(C7::HandClose.merged(), C4::Hand);
        assert_eq!(C7::HandOpen.merged(), C4::Hand);
        assert_eq!(C7::Rest.merged(), C4::Rest);
    }

    #[test]
    fn subject_bounds() {
        assert!(SubjectId::new(0).is_err());
        assert!(SubjectId::new(16).is_err());
        assert_eq!(SubjectId::new(15).unwrap().index(), 15);
    }

    #[test]
    fn recording_rejects_ragged_rows() {
        let prov = Provenance::new(SubjectId::new(1).unwrap(), 1, 1).unwrap();
        let err = MultichannelRecording::new(
            512.0,
            vec!["A".into(), "B".into()],
            vec![vec![0.0; 10], vec![0.0; 9]],
            prov,
        );
        assert!(err.is_err());
        assert!(MultichannelRecording::new(0.0, vec!["A".into()], vec![vec![0.0; 4]], prov).is_err());
    }

    #[test]
    fn trial_requires_788_samples() {
        let prov = Provenance::new(SubjectId::new(1).unwrap(), 1, 1).unwrap();
        let names: Arc<[String]> = vec!["A".to_string()].into();
        assert!(Trial::new(vec![vec![0.0; 787]], names.clone(), MovementClass7::Rest, prov, 0).is_err());
        assert!(Trial::new(vec![vec![0.0; 788]], names, MovementClass7::Rest, prov, 0).is_ok());
    }
}
