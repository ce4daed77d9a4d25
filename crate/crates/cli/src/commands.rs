//! Pipeline stages. Each reads its inputs from and writes its outputs under
//! `work_dir`, so stages can be rerun independently.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};

use spectra_mi::dataset::{
    merge_to_4class, recording_spectrograms, split, synth_recording, DatasetSplit, LabeledDataset,
    SynthConfig,
};
use spectra_mi::formats::{
    load_eegr, load_markers, load_spec_dataset, save_eegr, save_markers, spectrogram_pgm,
    SpecRecord, SpecWriter,
};
use spectra_mi::metrics::{build_report, parse_report_csv, render_table, SubjectResult};
use spectra_mi::model::{checkpoint, predict, train_with_progress, CnnModel, TrainOutcome};
use spectra_mi::preprocess::Preprocessor;
use spectra_mi::types::SubjectId;
use spectra_mi::Exec;

use crate::config::{derive_seed, RunConfig};

/// Parameter snapshots written by `train` and scored by `eval`.
pub const SNAPSHOTS: [&str; 2] = ["best", "final"];

/// Output file locations below `work_dir`.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &RunConfig) -> Self {
        Layout {
            root: cfg.work_dir.clone(),
        }
    }

    fn tag(subject: u16) -> String {
        format!("S{subject:02}")
    }

    pub fn eegr(&self, s: u16) -> PathBuf {
        self.root.join("synth").join(format!("{}.eegr", Self::tag(s)))
    }

    pub fn markers(&self, s: u16) -> PathBuf {
        self.root.join("synth").join(format!("{}.markers.csv", Self::tag(s)))
    }

    pub fn spec(&self, s: u16) -> PathBuf {
        self.root.join("spec").join(format!("{}.spec", Self::tag(s)))
    }

    pub fn pgm_dir(&self) -> PathBuf {
        self.root.join("spec").join("pgm")
    }

    pub fn checkpoint(&self, s: u16, snapshot: &str) -> PathBuf {
        self.root.join("models").join(format!("{}.{snapshot}.ckpt", Self::tag(s)))
    }

    pub fn history(&self, s: u16) -> PathBuf {
        self.root.join("models").join(format!("{}.history.csv", Self::tag(s)))
    }

    pub fn manifest(&self, s: u16) -> PathBuf {
        self.root.join("models").join(format!("{}.split.csv", Self::tag(s)))
    }

    pub fn report_csv(&self, snapshot: &str) -> PathBuf {
        self.root.join("reports").join(format!("{snapshot}.csv"))
    }

    pub fn report_table(&self, snapshot: &str) -> PathBuf {
        self.root.join("reports").join(format!("{snapshot}.txt"))
    }

    pub fn confusion(&self, s: u16, snapshot: &str, ext: &str) -> PathBuf {
        self.root
            .join("reports")
            .join(format!("{}.{snapshot}.confusion.{ext}", Self::tag(s)))
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("reports").join("summary.txt")
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn subjects(cfg: &RunConfig) -> impl Iterator<Item = u16> {
    1..=cfg.subjects
}

fn seconds(t: Instant) -> String {
    format!("{:.1} s", t.elapsed().as_secs_f64())
}

/// Writes one synthetic EEGR recording and marker CSV per subject.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    for s in subjects(cfg) {
        let t = Instant::now();
        let (rec, markers) = synth_recording(
            derive_seed(cfg.seed, 1000 + s as u64),
            SubjectId::new(s)?,
            cfg.trials_per_class,
            cfg.channels,
            &SynthConfig::default(),
        )?;
        let (eegr, csv) = (layout.eegr(s), layout.markers(s));
        create_parent(&eegr)?;
        save_eegr(&rec, &eegr).with_context(|| format!("writing {}", eegr.display()))?;
        save_markers(&markers, &csv).with_context(|| format!("writing {}", csv.display()))?;
        eprintln!(
            "synth: S{s} {} channels x {} samples, {} trials ({})",
            rec.n_channels(),
            rec.n_samples(),
            markers.len(),
            seconds(t)
        );
    }
    Ok(())
}

/// Filters every recording and writes one SPEC file per subject.
pub fn cmd_spectrogram(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let stft = cfg.stft_config()?;
    let pre = Preprocessor::new(&cfg.filter_config())?;
    let layout = Layout::new(cfg);
    for s in subjects(cfg) {
        let t = Instant::now();
        let (eegr, csv) = (layout.eegr(s), layout.markers(s));
        let rec = load_eegr(&eegr).with_context(|| format!("reading {}", eegr.display()))?;
        let markers = load_markers(&csv).with_context(|| format!("reading {}", csv.display()))?;
        ensure!(
            rec.sample_rate_hz() == cfg.fs,
            "{} is sampled at {} Hz, config fs is {}",
            eegr.display(),
            rec.sample_rate_hz(),
            cfg.fs
        );
        let out = layout.spec(s);
        create_parent(&out)?;
        let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
        let mut writer = SpecWriter::new(BufWriter::new(file), markers.len() * rec.n_channels())?;
        let mut pgm_left = cfg.pgm_per_subject;
        let n = recording_spectrograms(&rec, &markers, &pre, &stft, cfg.log_epsilon, Exec::default(), |specs| {
            for sp in &specs {
                writer.write(&SpecRecord::from_spectrogram(sp))?;
                if pgm_left > 0 {
                    pgm_left -= 1;
                    let p = sp.provenance;
                    let name = format!(
                        "S{:02}_r{:02}_s{}_{}_ch{:02}.pgm",
                        s,
                        p.run,
                        p.session,
                        sp.label.short_name(),
                        sp.channel_index
                    );
                    let path = layout.pgm_dir().join(name);
                    create_parent(&path).map_err(|e| std::io::Error::other(e.to_string()))?;
                    fs::write(&path, spectrogram_pgm(sp))?;
                }
            }
            Ok(())
        })
        .with_context(|| format!("computing spectrograms for S{s}"))?;
        writer
            .finish()?
            .flush()
            .with_context(|| format!("writing {}", out.display()))?;
        eprintln!("spectrogram: S{s} {n} records ({})", seconds(t));
    }
    Ok(())
}

/// Loads a subject's SPEC file as a dataset with the configured class count.
fn load_subject_dataset(cfg: &RunConfig, layout: &Layout, s: u16) -> Result<LabeledDataset> {
    let path = layout.spec(s);
    let ds = load_spec_dataset(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(if cfg.classes == 4 { merge_to_4class(&ds)? } else { ds })
}

fn subject_split(cfg: &RunConfig, layout: &Layout, s: u16) -> Result<DatasetSplit> {
    let ds = load_subject_dataset(cfg, layout, s)?;
    split(&ds, &cfg.split_spec()).with_context(|| format!("splitting S{s}"))
}

fn history_csv(outcome: &TrainOutcome) -> String {
    let mut s = String::from("epoch,train_loss,valid_accuracy,best\n");
    for r in &outcome.history {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch,
            r.train_loss,
            r.valid_accuracy,
            u8::from(r.epoch == outcome.best_epoch)
        ));
    }
    s
}

/// Trains one model per subject and stores best-validation and final checkpoints.
pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let spec = cfg.architecture()?;
    for s in subjects(cfg) {
        let t = Instant::now();
        let parts = subject_split(cfg, &layout, s)?;
        write_file(&layout.manifest(s), parts.manifest_csv())?;
        let model = CnnModel::new(spec.clone(), derive_seed(cfg.seed, 2000 + s as u64))?;
        eprintln!(
            "train: S{s} {} train / {} valid items, {} epochs",
            parts.train.len(),
            parts.valid.len(),
            cfg.epochs
        );
        let outcome = train_with_progress(
            &model,
            &parts.train,
            &parts.valid,
            &cfg.train_config(s),
            Exec::default(),
            &mut |r| {
                eprintln!(
                    "  S{s} epoch {:>3}: loss {:.5}, valid {:.2}%",
                    r.epoch, r.train_loss, r.valid_accuracy
                )
            },
        )
        .with_context(|| format!("training S{s}"))?;
        for (snapshot, m) in SNAPSHOTS.iter().zip([&outcome.best, &outcome.last]) {
            let path = layout.checkpoint(s, snapshot);
            create_parent(&path)?;
            checkpoint::save(m, &path).with_context(|| format!("writing {}", path.display()))?;
        }
        write_file(&layout.history(s), history_csv(&outcome))?;
        eprintln!("train: S{s} best epoch {} ({})", outcome.best_epoch, seconds(t));
    }
    Ok(())
}

fn load_checked_model(cfg: &RunConfig, path: &Path) -> Result<CnnModel> {
    let model = checkpoint::load(path).with_context(|| format!("reading {}", path.display()))?;
    let expected = cfg.architecture()?;
    if model.spec() != &expected {
        bail!(
            "checkpoint {} holds {} ({} classes), config expects {} ({} classes)",
            path.display(),
            model.spec(),
            model.n_classes(),
            expected,
            cfg.classes
        );
    }
    Ok(model)
}

/// Scores both snapshots of every subject on the configured split.
pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let mut rows: Vec<Vec<SubjectResult>> = vec![Vec::new(); SNAPSHOTS.len()];
    for s in subjects(cfg) {
        let models: Vec<CnnModel> = SNAPSHOTS
            .iter()
            .map(|snapshot| load_checked_model(cfg, &layout.checkpoint(s, snapshot)))
            .collect::<Result<_>>()?;
        let parts = subject_split(cfg, &layout, s)?;
        let manifest = layout.manifest(s);
        if read_file(&manifest)? != parts.manifest_csv() {
            bail!("{} does not match the split derived from the config", manifest.display());
        }
        let ds = match cfg.eval_split.as_str() {
            "train" => &parts.train,
            "valid" => &parts.valid,
            _ => &parts.test,
        };
        for (k, (snapshot, model)) in SNAPSHOTS.iter().zip(&models).enumerate() {
            let preds = predict(model, ds, Exec::default())?;
            let result = SubjectResult::from_predictions(SubjectId::new(s)?, &preds, &ds.labels(), cfg.classes)?;
            write_file(&layout.confusion(s, snapshot, "csv"), result.confusion.to_csv())?;
            write_file(&layout.confusion(s, snapshot, "pgm"), result.confusion.to_pgm(16))?;
            eprintln!("eval: S{s} {snapshot} {:.2}% on {} {} items", result.accuracy, ds.len(), cfg.eval_split);
            rows[k].push(result);
        }
    }
    for (snapshot, rows) in SNAPSHOTS.iter().zip(rows) {
        let report = build_report(rows, cfg.classes, &cfg.arch, cfg.seed, snapshot)?;
        write_file(&layout.report_csv(snapshot), report.to_csv())?;
        write_file(&layout.report_table(snapshot), report.to_table())?;
    }
    Ok(())
}

/// Rebuilds the accuracy tables from the eval CSVs and prints them.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let layout = Layout::new(cfg);
    let mut out = String::new();
    for snapshot in SNAPSHOTS {
        let path = layout.report_csv(snapshot);
        let (rows, average) =
            parse_report_csv(&read_file(&path)?).with_context(|| format!("parsing {}", path.display()))?;
        let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
        ensure!(
            (mean - average).abs() <= 1e-9,
            "{}: average {average} differs from the row mean {mean}",
            path.display()
        );
        let header = format!(
            "model={snapshot} preset={} classes={} seed={} split={}",
            cfg.arch, cfg.classes, cfg.seed, cfg.eval_split
        );
        out.push_str(&render_table(&header, &rows, average));
        out.push('\n');
    }
    write_file(&layout.summary(), &out)?;
    Ok(out)
}

/// Runs every stage in order.
pub fn cmd_all(cfg: &RunConfig) -> Result<String> {
    let t = Instant::now();
    cmd_synth(cfg).context("synth stage")?;
    cmd_spectrogram(cfg).context("spectrogram stage")?;
    cmd_train(cfg).context("train stage")?;
    cmd_eval(cfg).context("eval stage")?;
    let summary = cmd_report(cfg).context("report stage")?;
    eprintln!("all: done ({})", seconds(t));
    Ok(summary)
}
