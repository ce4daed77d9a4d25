//! Central-difference check of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;

use super::layers::softmax_cross_entropy;
use super::{CnnModel, ParamKind};

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub tensor: String,
    pub kind: ParamKind,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub probes: Vec<Probe>,
}

impl GradCheckReport {
    pub fn covers(&self, kind: ParamKind) -> bool {
        self.probes.iter().any(|p| p.kind == kind)
    }
}

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

fn loss(model: &CnnModel, input: &[f64], labels: &[usize], exec: Exec) -> Result<f64> {
    let logits = model.logits(input, exec)?;
    Ok(softmax_cross_entropy(&logits, labels, model.n_classes()).0)
}

/// Compares analytic gradients with central differences of step `h` at
/// `probes` parameters. Every trainable tensor gets at least one probe; the
/// rest are drawn uniformly over tensors, then over entries.
pub fn grad_check(
    model: &CnnModel,
    input: &[f64],
    labels: &[usize],
    probes: usize,
    h: f64,
    seed: u64,
    exec: Exec,
) -> Result<GradCheckReport> {
    let analytic = model.loss_and_grad(input, labels, exec)?.grads;
    let meta: Vec<(String, ParamKind, usize)> = model
        .params()
        .into_iter()
        .map(|(name, kind, p)| (name, kind, p.len()))
        .collect();
    if meta.is_empty() {
        return Err(Error::InvalidArgument("model has no parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<(usize, usize)> = Vec::with_capacity(probes.max(meta.len()));
    for (t, (_, _, len)) in meta.iter().enumerate() {
        picks.push((t, rng.random_range(0..*len)));
    }
    while picks.len() < probes {
        let t = rng.random_range(0..meta.len());
        picks.push((t, rng.random_range(0..meta[t].2)));
    }

    let mut work = model.clone();
    let mut out = Vec::with_capacity(picks.len());
    for (t, i) in picks {
        let original = work.params()[t].2[i];
        work.params_mut()[t][i] = original + h;
        let plus = loss(&work, input, labels, exec)?;
        work.params_mut()[t][i] = original - h;
        let minus = loss(&work, input, labels, exec)?;
        work.params_mut()[t][i] = original;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[t][i];
        out.push(Probe {
            tensor: meta[t].0.clone(),
            kind: meta[t].1,
            index: i,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    let max_rel_error = out.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        probes: out,
    })
}
