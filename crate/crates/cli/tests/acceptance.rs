//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectra_mi::dataset::{
    merge_to_4class, recording_spectrograms, split, synth_recording, Item, ItemSource,
    LabeledDataset, SplitName, SplitSpec, SynthConfig,
};
use spectra_mi::formats::load_spec_dataset;
use spectra_mi::model::gradcheck::grad_check;
use spectra_mi::model::layers::softmax_cross_entropy;
use spectra_mi::model::{sgd_step, ArchitectureSpec, CnnModel, OptimizerState, ParamKind};
use spectra_mi::preprocess::{
    apply_filter_zero_phase, design_bandpass, design_notch, frequency_response, FilterConfig,
    Preprocessor,
};
use spectra_mi::spectrogram::{
    frame_count, stft, trial_to_spectrograms, FrameFit, StftConfig, WindowWeights,
    DEFAULT_EPSILON, IMAGE_SIZE,
};
use spectra_mi::types::{MovementClass4, MovementClass7, Provenance, SubjectId, Trial};
use spectra_mi::Exec;
use spectra_mi_cli::{cmd_all, init_thread_pool, RunConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let e = t.elapsed();
    ensure(e <= limit, || format!("took {:.1} s, limit {} s", e.as_secs_f64(), limit.as_secs()))
}

fn geometry() -> Check {
    let t = Instant::now();
    let cfg = StftConfig::from_geometry(565, 564, 447, 512.0).map_err(|e| e.to_string())?;
    let frames = frame_count(788, 565, cfg.hop).map_err(|e| e.to_string())?;
    ensure(frames == 224 && cfg.n_bins() == 224, || format!("{}x{frames}", cfg.n_bins()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let signal: Vec<f64> = (0..788).map(|_| rng.random_range(-1.0..1.0)).collect();
    let trial = Trial::new(
        vec![signal],
        vec!["C1".to_string()].into(),
        MovementClass7::Rest,
        Provenance::new(SubjectId::new(1).unwrap(), 1, 1).unwrap(),
        0,
    )
    .map_err(|e| e.to_string())?;
    let specs = trial_to_spectrograms(&trial, &cfg, DEFAULT_EPSILON, Exec::default())
        .map_err(|e| e.to_string())?;
    let n = specs[0].data().len();
    ensure(n == IMAGE_SIZE * IMAGE_SIZE, || format!("plane has {n} values"))?;
    within(t, Duration::from_secs(1))?;
    Ok(format!("{}x{frames}", cfg.n_bins()))
}

fn count() -> Check {
    let t = Instant::now();
    let subject = SubjectId::new(1).unwrap();
    let (rec, markers) = synth_recording(42, subject, 60, 61, &SynthConfig::default())
        .map_err(|e| e.to_string())?;
    let pre = Preprocessor::new(&FilterConfig::default()).map_err(|e| e.to_string())?;
    let mut per_class = [0usize; 7];
    let mut bad_shape = 0;
    recording_spectrograms(
        &rec,
        &markers,
        &pre,
        &StftConfig::standard(),
        DEFAULT_EPSILON,
        Exec::default(),
        |specs| {
            for s in specs {
                per_class[s.label.code()] += 1;
                bad_shape += usize::from(s.data().len() != IMAGE_SIZE * IMAGE_SIZE);
            }
            Ok(())
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(per_class.iter().all(|&c| c == 3660), || format!("per class {per_class:?}"))?;
    ensure(bad_shape == 0, || format!("{bad_shape} planes of the wrong size"))?;
    within(t, Duration::from_secs(60))?;
    Ok(format!("3660 per class, {} total", per_class.iter().sum::<usize>()))
}

/// Windowed, time-aliased DFT evaluated bin by bin.
fn naive_stft(signal: &[f64], cfg: &StftConfig) -> Vec<Complex64> {
    let win = cfg.window.values();
    let n = cfg.n_dft;
    let frames = (signal.len() - win.len()) / cfg.hop + 1;
    let bins = if cfg.one_sided { n / 2 + 1 } else { n };
    let mut out = vec![Complex64::new(0.0, 0.0); bins * frames];
    for m in 0..frames {
        let mut folded = vec![0.0; n];
        for (k, &w) in win.iter().enumerate() {
            let v = signal[m * cfg.hop + k] * w;
            match cfg.frame_fit {
                FrameFit::Fold => folded[k % n] += v,
                FrameFit::Truncate if k < n => folded[k] = v,
                FrameFit::Truncate => {}
            }
        }
        for b in 0..bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &y) in folded.iter().enumerate() {
                acc += Complex64::from_polar(y, -2.0 * PI * ((b * k) % n) as f64 / n as f64);
            }
            out[b * frames + m] = acc;
        }
    }
    out
}

fn stft_oracle() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let len = if i == 0 { 788 } else { rng.random_range(16..=1024) };
        let signal: Vec<f64> = (0..len).map(|_| rng.random_range(-100.0..100.0)).collect();
        let cfg = if i == 0 {
            StftConfig::standard()
        } else {
            let win_len = rng.random_range(2..=len.min(300));
            StftConfig {
                window: WindowWeights::new((0..win_len).map(|_| rng.random_range(0.0..1.0)).collect())
                    .map_err(|e| e.to_string())?,
                hop: rng.random_range(1..=win_len),
                n_dft: rng.random_range(1..=win_len + 40),
                one_sided: rng.random_bool(0.7),
                frame_fit: if rng.random_bool(0.8) { FrameFit::Fold } else { FrameFit::Truncate },
                fs_hz: 512.0,
            }
        };
        let fast = stft(&signal, &cfg).map_err(|e| e.to_string())?;
        let slow = naive_stft(&signal, &cfg);
        let num: f64 = fast.data.iter().zip(&slow).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = slow.iter().map(|b| b.norm_sqr()).sum();
        worst = worst.max((num / den).sqrt());
    }
    ensure(worst <= 1e-9, || format!("worst relative error {worst:.3e}"))?;
    within(t, Duration::from_secs(30))?;
    Ok(format!("worst relative Frobenius error {worst:.2e}"))
}

fn parseval() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let mut worst: f64 = 0.0;
    for n in [16usize, 447, 512, 1000] {
        let signal: Vec<f64> = (0..n * 4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let cfg = StftConfig {
            window: WindowWeights::rectangular(n).map_err(|e| e.to_string())?,
            hop: n,
            n_dft: n,
            one_sided: false,
            frame_fit: FrameFit::Fold,
            fs_hz: 512.0,
        };
        let frames = stft(&signal, &cfg).map_err(|e| e.to_string())?;
        for m in 0..frames.n_frames {
            let time: f64 = signal[m * n..(m + 1) * n].iter().map(|v| v * v).sum();
            let freq: f64 = (0..frames.n_bins).map(|b| frames.get(b, m).norm_sqr()).sum::<f64>() / n as f64;
            worst = worst.max((time - freq).abs() / time);
        }
    }
    ensure(worst <= 1e-9, || format!("worst relative deviation {worst:.3e}"))?;
    Ok(format!("worst relative deviation {worst:.2e}"))
}

fn filters() -> Check {
    let fs = 512.0;
    let notch = design_notch(50.0, 30.0, fs).map_err(|e| e.to_string())?;
    let band = design_bandpass(0.01, 200.0, 4, 0.5, fs).map_err(|e| e.to_string())?;
    let h50 = frequency_response(&notch, 50.0, fs).norm();
    ensure(h50 < 1e-6, || format!("|H(50 Hz)| = {h50:.3e}"))?;
    let x: Vec<f64> = (0..8192).map(|n| (2.0 * PI * 50.0 * n as f64 / fs).cos()).collect();
    let y = apply_filter_zero_phase(&notch, &x).map_err(|e| e.to_string())?;
    let edge = 512;
    let rms = |v: &[f64]| (v.iter().map(|s| s * s).sum::<f64>() / v.len() as f64).sqrt();
    let db = -20.0 * (rms(&y[edge..y.len() - edge]) / rms(&x[edge..x.len() - edge])).log10();
    ensure(db >= 40.0, || format!("50 Hz suppression {db:.1} dB"))?;
    let dc = frequency_response(&band, 0.0, fs).norm();
    ensure(dc < 0.01, || format!("band-pass DC gain {dc:.3e}"))?;
    let pole = band.max_pole_magnitude().max(notch.max_pole_magnitude());
    ensure(pole < 1.0, || format!("pole magnitude {pole}"))?;
    Ok(format!(
        "|H(50)|={h50:.1e}, suppression {db:.0} dB, DC gain {dc:.1e}, max |pole| 1-{:.1e}",
        1.0 - pole
    ))
}

fn gradients() -> Check {
    let t = Instant::now();
    let spec = ArchitectureSpec::minivgg((3, 16, 16), 7).map_err(|e| e.to_string())?;
    let model = CnnModel::new(spec, 5).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(609);
    let x: Vec<f64> = (0..4 * 3 * 16 * 16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let report = grad_check(&model, &x, &[0, 2, 4, 6], 64, 1e-5, 11, Exec::default())
        .map_err(|e| e.to_string())?;
    ensure(report.probes.len() >= 50, || format!("{} probes", report.probes.len()))?;
    for kind in [ParamKind::ConvWeight, ParamKind::BnGamma, ParamKind::BnBeta, ParamKind::LinearWeight, ParamKind::LinearBias] {
        ensure(report.covers(kind), || format!("{kind:?} not probed"))?;
    }
    ensure(report.max_rel_error <= 1e-4, || format!("max relative error {:.3e}", report.max_rel_error))?;
    within(t, Duration::from_secs(120))?;
    Ok(format!("{} probes, max relative error {:.2e}", report.probes.len(), report.max_rel_error))
}

fn loss_identity() -> Check {
    let mut worst: f64 = 0.0;
    for k in [7usize, 4] {
        let (loss, _) = softmax_cross_entropy(&vec![0.3; 3 * k], &[0, k - 1, 1], k);
        let err = (loss - (k as f64).ln()).abs();
        ensure(err <= 1e-12, || format!("k={k}: loss {loss}"))?;
        worst = worst.max(err);
    }
    Ok(format!("ln 7 and ln 4 within {worst:.1e}"))
}

fn sgd_unroll() -> Check {
    let mut w = vec![0.0];
    let mut state = OptimizerState::new([w.as_slice()], 0.001, 0.9);
    for _ in 0..2 {
        sgd_step(&mut [&mut w], &[vec![1.0]], &mut state).map_err(|e| e.to_string())?;
    }
    let err = (w[0] - -0.0029).abs();
    ensure(err <= 1e-15, || format!("delta w = {}", w[0]))?;
    Ok(format!("delta w = {}", w[0]))
}

fn desk_config(work_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    for kv in [
        "seed=2024",
        "subjects=2",
        "trials_per_class=10",
        "channels=20",
        "arch=minivgg",
        "classes=4",
        "epochs=2",
    ] {
        cfg.apply_override(kv).unwrap();
    }
    cfg.work_dir = work_dir.to_path_buf();
    cfg
}

fn accuracies(csv: &str) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.starts_with("average"))
        .filter_map(|l| l.split(',').nth(1)?.parse().ok())
        .collect()
}

fn end_to_end(root: &Path) -> Check {
    use MovementClass4 as C4;
    use MovementClass7 as C7;
    let pairs = [
        (C7::ElbowFlexion, C4::Elbow),
        (C7::ElbowExtension, C4::Elbow),
        (C7::Pronation, C4::Forearm),
        (C7::Supination, C4::Forearm),
        (C7::HandClose, C4::Hand),
        (C7::HandOpen, C4::Hand),
        (C7::Rest, C4::Rest),
    ];
    for (c7, c4) in pairs {
        ensure(c7.merged() == c4, || format!("{c7} merges to {:?}", c7.merged()))?;
    }

    let t = Instant::now();
    let cfg = desk_config(&root.join("run1"));
    cmd_all(&cfg).map_err(|e| format!("{e:#}"))?;
    let elapsed = t.elapsed();

    let ds = load_spec_dataset(&cfg.work_dir.join("spec/S01.spec")).map_err(|e| e.to_string())?;
    ensure(ds.class_counts() == vec![200; 7], || format!("7-class counts {:?}", ds.class_counts()))?;
    let merged = merge_to_4class(&ds).map_err(|e| e.to_string())?;
    for (a, b) in ds.items.iter().zip(&merged.items) {
        ensure(C7::from_code(a.label).unwrap().merged().code() == b.label, || "merged label".into())?;
    }
    ensure(merged.class_counts() == vec![400, 400, 400, 200], || {
        format!("4-class counts {:?}", merged.class_counts())
    })?;

    let csv = fs::read_to_string(cfg.work_dir.join("reports/best.csv")).map_err(|e| e.to_string())?;
    let accs = accuracies(&csv);
    ensure(accs.len() == 2, || format!("report rows: {csv}"))?;
    ensure(accs.iter().all(|&a| a >= 90.0), || format!("test accuracy {accs:?}"))?;
    ensure(elapsed <= Duration::from_secs(15 * 60), || format!("took {:.0} s", elapsed.as_secs_f64()))?;
    Ok(format!(
        "test accuracy {:.2}% / {:.2}% after {} epochs, {:.0} s",
        accs[0],
        accs[1],
        cfg.epochs,
        elapsed.as_secs_f64()
    ))
}

fn determinism(root: &Path) -> Check {
    let first = desk_config(&root.join("run1"));
    let second = desk_config(&root.join("run2"));
    cmd_all(&second).map_err(|e| format!("{e:#}"))?;
    let mut compared = 0;
    for dir in ["spec", "models", "reports"] {
        let a = first.work_dir.join(dir);
        let mut names: Vec<_> = fs::read_dir(&a)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name())
            .collect();
        names.sort();
        for name in names {
            let x = fs::read(a.join(&name)).map_err(|e| e.to_string())?;
            let y = fs::read(second.work_dir.join(dir).join(&name))
                .map_err(|e| format!("{}: {e}", name.to_string_lossy()))?;
            ensure(x == y, || format!("{dir}/{} differs", name.to_string_lossy()))?;
            compared += 1;
        }
    }
    ensure(compared >= 10, || format!("only {compared} files compared"))?;
    Ok(format!("{compared} SPEC, CKPT and report files byte-identical"))
}

fn split_contract() -> Check {
    let subject = SubjectId::new(1).unwrap();
    let mut items = Vec::new();
    for label in 0..7 {
        for i in 0..3660 {
            items.push(Item {
                plane: vec![0.0f32].into(),
                label,
                source: ItemSource {
                    provenance: Provenance::new(subject, (i % 10) as u16 + 1, (i / 10 % 6) as u16 + 1)
                        .unwrap(),
                    channel_index: (i % 61) as u16,
                    label7: MovementClass7::from_code(label).unwrap(),
                },
            });
        }
    }
    let ds = LabeledDataset::new(items, 7, 1, 1).map_err(|e| e.to_string())?;
    let s = split(&ds, &SplitSpec::default()).map_err(|e| e.to_string())?;
    for (name, part, want) in [("train", &s.train, 2562), ("valid", &s.valid, 366), ("test", &s.test, 732)] {
        ensure(part.class_counts() == vec![want; 7], || format!("{name} {:?}", part.class_counts()))?;
    }
    let assigned = [SplitName::Train, SplitName::Valid, SplitName::Test]
        .map(|n| s.assignment.iter().filter(|&&a| a == n).count());
    ensure(assigned.iter().sum::<usize>() == ds.len(), || "assignment incomplete".into())?;
    ensure(
        s.train.len() + s.valid.len() + s.test.len() == ds.len(),
        || "parts do not cover the input".into(),
    )?;
    Ok("2562/366/732 per class, disjoint and complete".into())
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let threads = init_thread_pool().unwrap_or(1);
    let scratch = tempfile::tempdir().expect("scratch directory");
    let root = scratch.path();
    let checks: Vec<(&str, Box<dyn FnOnce() -> Check + '_>)> = vec![
        ("geometry reproduction", Box::new(geometry)),
        ("count reproduction", Box::new(count)),
        ("stft oracle", Box::new(stft_oracle)),
        ("parseval", Box::new(parseval)),
        ("filter contracts", Box::new(filters)),
        ("gradient check", Box::new(gradients)),
        ("loss identity", Box::new(loss_identity)),
        ("sgd unroll", Box::new(sgd_unroll)),
        ("end-to-end desk run", Box::new(|| end_to_end(root))),
        ("determinism", Box::new(|| determinism(root))),
        ("split contract", Box::new(split_contract)),
    ];
    println!("acceptance: {} checks, {threads} thread(s)", checks.len());
    let mut failed = 0;
    for (name, check) in checks {
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1} s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} ({secs:.1} s)");
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
