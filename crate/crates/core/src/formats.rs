//! On-disk formats: EEGR v1 recordings, marker CSV sidecars, SPEC v1
//! spectrogram batches and 8-bit PGM images. All binary fields are
//! little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::dataset::{channel_names, Item, ItemSource, LabeledDataset};
use crate::error::{Error, Result};
use crate::spectrogram::{Spectrogram, IMAGE_SIZE};
use crate::types::{Marker, MovementClass7, MultichannelRecording, Provenance, SubjectId};

pub const EEGR_MAGIC: &[u8; 4] = b"EEGR";
pub const SPEC_MAGIC: &[u8; 4] = b"SPEC";
pub const VERSION: u32 = 1;

const PLANE: usize = IMAGE_SIZE * IMAGE_SIZE;

fn check_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

fn provenance(subject: u16, run: u16, session: u16) -> Result<Provenance> {
    Provenance::new(SubjectId::new(subject)?, run, session)
}

// EEGR

/// Channel names are prefixed by a u16 byte length.
pub fn write_eegr<W: Write>(rec: &MultichannelRecording, mut w: W) -> Result<()> {
    w.write_all(EEGR_MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_u32::<LE>(rec.n_channels() as u32)?;
    w.write_u64::<LE>(rec.n_samples() as u64)?;
    w.write_f64::<LE>(rec.sample_rate_hz())?;
    let p = rec.provenance();
    w.write_u16::<LE>(p.subject.index())?;
    w.write_u16::<LE>(p.run)?;
    w.write_u16::<LE>(p.session)?;
    for name in rec.channels() {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("channel name of {} bytes", name.len())))?;
        w.write_u16::<LE>(len)?;
        w.write_all(name.as_bytes())?;
    }
    for c in 0..rec.n_channels() {
        for &v in rec.channel(c) {
            w.write_f32::<LE>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_eegr<R: Read>(mut r: R) -> Result<MultichannelRecording> {
    check_header(&mut r, EEGR_MAGIC)?;
    let n_ch = r.read_u32::<LE>()? as usize;
    let n_samples = usize::try_from(r.read_u64::<LE>()?)
        .map_err(|_| Error::Format("sample count does not fit in memory".into()))?;
    let fs = r.read_f64::<LE>()?;
    let subject = r.read_u16::<LE>()?;
    let run = r.read_u16::<LE>()?;
    let session = r.read_u16::<LE>()?;
    let prov = provenance(subject, run, session)?;
    let mut names = Vec::with_capacity(n_ch.min(4096));
    for _ in 0..n_ch {
        let len = r.read_u16::<LE>()? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        names.push(String::from_utf8(buf).map_err(|_| Error::Format("channel name is not UTF-8".into()))?);
    }
    let mut rows = Vec::with_capacity(n_ch);
    for _ in 0..n_ch {
        let mut raw = vec![0f32; n_samples];
        r.read_f32_into::<LE>(&mut raw)?;
        rows.push(raw.into_iter().map(f64::from).collect());
    }
    MultichannelRecording::new(fs, names, rows, prov)
}

pub fn save_eegr(rec: &MultichannelRecording, path: &Path) -> Result<()> {
    write_eegr(rec, BufWriter::new(File::create(path)?))
}

pub fn load_eegr(path: &Path) -> Result<MultichannelRecording> {
    read_eegr(BufReader::new(File::open(path)?))
}

// Markers

pub const MARKER_HEADER: &str = "onset_index,label_code";

pub fn markers_to_csv(markers: &[Marker]) -> String {
    let mut s = String::from(MARKER_HEADER);
    s.push('\n');
    for m in markers {
        s.push_str(&format!("{},{}\n", m.onset_index, m.label.code()));
    }
    s
}

/// Parses marker CSV text; the header line is optional, blank lines are skipped.
pub fn markers_from_csv<R: BufRead>(r: R) -> Result<Vec<Marker>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (n == 0 && line == MARKER_HEADER) {
            continue;
        }
        let bad = || Error::Format(format!("marker line {}: {line:?}", n + 1));
        let (onset, code) = line.split_once(',').ok_or_else(bad)?;
        let onset_index = onset.trim().parse::<usize>().map_err(|_| bad())?;
        let code = code.trim().parse::<usize>().map_err(|_| bad())?;
        out.push(Marker {
            onset_index,
            label: MovementClass7::from_code(code)?,
        });
    }
    Ok(out)
}

pub fn save_markers(markers: &[Marker], path: &Path) -> Result<()> {
    std::fs::write(path, markers_to_csv(markers))?;
    Ok(())
}

pub fn load_markers(path: &Path) -> Result<Vec<Marker>> {
    markers_from_csv(BufReader::new(File::open(path)?))
}

// SPEC

/// One stored spectrogram at f32 precision.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecRecord {
    pub provenance: Provenance,
    pub channel_index: u16,
    pub label: MovementClass7,
    pub plane: Arc<[f32]>,
}

impl SpecRecord {
    pub fn from_spectrogram(s: &Spectrogram) -> Self {
        SpecRecord {
            provenance: s.provenance,
            channel_index: s.channel_index,
            label: s.label,
            plane: s.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_spectrogram(&self) -> Result<Spectrogram> {
        let name = channel_names(self.channel_index as usize + 1).pop().unwrap_or_default();
        Spectrogram::new(
            self.plane.iter().map(|&v| f64::from(v)).collect(),
            self.label,
            self.channel_index,
            name,
            self.provenance,
        )
    }

    /// Seven-class dataset item sharing this record's plane.
    pub fn to_item(&self) -> Item {
        Item {
            plane: Arc::clone(&self.plane),
            label: self.label.code(),
            source: ItemSource {
                provenance: self.provenance,
                channel_index: self.channel_index,
                label7: self.label,
            },
        }
    }
}

/// Streams records into a SPEC v1 file whose count is fixed up front.
pub struct SpecWriter<W: Write> {
    inner: W,
    expected: u32,
    written: u32,
}

impl<W: Write> SpecWriter<W> {
    pub fn new(mut inner: W, count: usize) -> Result<Self> {
        let expected = u32::try_from(count).map_err(|_| Error::Format(format!("{count} records")))?;
        inner.write_all(SPEC_MAGIC)?;
        inner.write_u32::<LE>(VERSION)?;
        inner.write_u32::<LE>(expected)?;
        Ok(SpecWriter {
            inner,
            expected,
            written: 0,
        })
    }

    pub fn write(&mut self, rec: &SpecRecord) -> Result<()> {
        if self.written == self.expected {
            return Err(Error::Format(format!("more than {} records", self.expected)));
        }
        if rec.plane.len() != PLANE {
            return Err(Error::Shape(format!("record plane has {} values", rec.plane.len())));
        }
        let w = &mut self.inner;
        w.write_u16::<LE>(rec.provenance.subject.index())?;
        w.write_u16::<LE>(rec.provenance.run)?;
        w.write_u16::<LE>(rec.provenance.session)?;
        w.write_u16::<LE>(rec.channel_index)?;
        w.write_u8(rec.label.code() as u8)?;
        let mut buf = vec![0u8; PLANE * 4];
        for (chunk, &v) in buf.chunks_exact_mut(4).zip(rec.plane.iter()) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.expected {
            return Err(Error::Format(format!(
                "wrote {} of {} declared records",
                self.written, self.expected
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Iterates over the records of a SPEC v1 stream.
pub struct SpecReader<R: Read> {
    inner: R,
    remaining: u32,
    count: u32,
}

impl<R: Read> SpecReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        check_header(&mut inner, SPEC_MAGIC)?;
        let count = inner.read_u32::<LE>()?;
        Ok(SpecReader {
            inner,
            remaining: count,
            count,
        })
    }

    /// Record count from the header.
    pub fn declared_count(&self) -> usize {
        self.count as usize
    }

    fn next_record(&mut self) -> Result<SpecRecord> {
        let r = &mut self.inner;
        let subject = r.read_u16::<LE>()?;
        let run = r.read_u16::<LE>()?;
        let session = r.read_u16::<LE>()?;
        let channel_index = r.read_u16::<LE>()?;
        let label = MovementClass7::from_code(r.read_u8()? as usize)?;
        let mut plane = vec![0f32; PLANE];
        r.read_f32_into::<LE>(&mut plane)?;
        if plane.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SPEC record value".into()));
        }
        Ok(SpecRecord {
            provenance: provenance(subject, run, session)?,
            channel_index,
            label,
            plane: plane.into(),
        })
    }
}

impl<R: Read> Iterator for SpecReader<R> {
    type Item = Result<SpecRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let rec = self.next_record();
        if rec.is_err() {
            self.remaining = 0;
        }
        Some(rec)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining as usize, Some(self.remaining as usize))
    }
}

pub fn save_spec(records: &[SpecRecord], path: &Path) -> Result<()> {
    let mut w = SpecWriter::new(BufWriter::new(File::create(path)?), records.len())?;
    for rec in records {
        w.write(rec)?;
    }
    w.finish()?;
    Ok(())
}

pub fn load_spec(path: &Path) -> Result<Vec<SpecRecord>> {
    SpecReader::new(BufReader::new(File::open(path)?))?.collect()
}

/// Seven-class dataset holding every record of a SPEC file.
pub fn load_spec_dataset(path: &Path) -> Result<LabeledDataset> {
    let items = SpecReader::new(BufReader::new(File::open(path)?))?
        .map(|r| r.map(|rec| rec.to_item()))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(items, 7, IMAGE_SIZE, IMAGE_SIZE)
}

// PGM

/// Binary (P5) greyscale image, maxval 255.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Min-max scales a `rows × cols` plane to 0..=255 with row 0 (lowest
/// frequency) at the bottom of the image. A constant plane maps to black.
pub fn plane_to_pgm(plane: &[f64], rows: usize, cols: usize) -> Result<Vec<u8>> {
    if plane.len() != rows * cols || rows == 0 {
        return Err(Error::Shape(format!("{} values for a {rows}x{cols} image", plane.len())));
    }
    let (lo, hi) = plane
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite("image value".into()));
    }
    let span = hi - lo;
    let mut px = Vec::with_capacity(plane.len());
    for row in plane.chunks(cols).rev() {
        px.extend(row.iter().map(|&v| {
            if span > 0.0 {
                (255.0 * (v - lo) / span).round() as u8
            } else {
                0
            }
        }));
    }
    Ok(encode_pgm(cols, rows, &px))
}

pub fn spectrogram_pgm(s: &Spectrogram) -> Vec<u8> {
    plane_to_pgm(s.data(), IMAGE_SIZE, IMAGE_SIZE).expect("spectrograms are square and finite")
}
