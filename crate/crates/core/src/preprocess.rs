//! IIR filter design and zero-phase filtering.
//!
//! Band-pass designs are Chebyshev type I, built in zero/pole/gain form from the
//! analog prototype, moved to band-pass, and mapped through the bilinear
//! transform with pre-warped corners. The result is kept both as second-order
//! sections (used for filtering) and as expanded transfer-function polynomials
//! (used for export and inspection). With a 0.01 Hz lower corner at 512 Hz the
//! low-frequency poles sit within ~1e-4 of z = 1, where the expanded polynomial
//! form loses most of its precision; the section form does not.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest allowed distance between a pole and the unit circle.
pub const STABILITY_MARGIN: f64 = 1e-12;

/// One biquad: `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Roots of the denominator quadratic.
    pub fn poles(&self) -> [Complex64; 2] {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = self.a[0] + z_inv * (self.a[1] + z_inv * self.a[2]);
        num / den
    }
}

/// Transfer-function coefficients with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    /// Cascade form of the same filter. Empty for filters given only as polynomials.
    pub sections: Vec<Biquad>,
    pub design_meta: String,
}

impl FilterCoefficients {
    /// Wraps raw polynomials, normalizing so that `a[0] == 1`.
    pub fn from_tf(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(Error::InvalidDesign("empty coefficient list".into()));
        }
        let a0 = a[0];
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::InvalidDesign("a[0] must be finite and nonzero".into()));
        }
        if b.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("filter coefficient".into()));
        }
        let (b, a) = if a0 == 1.0 {
            (b, a)
        } else {
            (
                b.iter().map(|v| v / a0).collect(),
                a.iter().map(|v| v / a0).collect(),
            )
        };
        Ok(FilterCoefficients {
            b,
            a,
            sections: Vec::new(),
            design_meta: "transfer function".into(),
        })
    }

    fn from_sections(sections: Vec<Biquad>, design_meta: String) -> Self {
        let mut b = vec![1.0];
        let mut a = vec![1.0];
        for s in &sections {
            b = poly_mul(&b, &s.b);
            a = poly_mul(&a, &s.a);
        }
        FilterCoefficients {
            b,
            a,
            sections,
            design_meta,
        }
    }

    /// `max(len(a), len(b))`.
    pub fn len(&self) -> usize {
        self.a.len().max(self.b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Poles from the section quadratics, or from the full denominator when
    /// the filter has no section form.
    pub fn poles(&self) -> Vec<Complex64> {
        if self.sections.is_empty() {
            poly_roots(&self.a)
        } else {
            self.sections.iter().flat_map(|s| s.poles()).collect()
        }
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    fn check_stable(self) -> Result<Self> {
        let magnitude = self.max_pole_magnitude();
        if magnitude < 1.0 - STABILITY_MARGIN && magnitude.is_finite() {
            Ok(self)
        } else {
            Err(Error::Unstable { magnitude })
        }
    }
}

/// Writes `# meta`, then a `b` line followed by one coefficient per line, then
/// the same for `a`. Values use shortest round-trip formatting.
impl fmt::Display for FilterCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.design_meta)?;
        writeln!(f, "b")?;
        for v in &self.b {
            writeln!(f, "{v:e}")?;
        }
        writeln!(f, "a")?;
        for v in &self.a {
            writeln!(f, "{v:e}")?;
        }
        Ok(())
    }
}

impl FromStr for FilterCoefficients {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut meta = String::new();
        let mut b = Vec::new();
        let mut a = Vec::new();
        let mut current: Option<&mut Vec<f64>> = None;
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(m) = line.strip_prefix('#') {
                meta = m.trim().to_string();
            } else if line == "b" {
                current = Some(&mut b);
            } else if line == "a" {
                current = Some(&mut a);
            } else {
                let v: f64 = line
                    .parse()
                    .map_err(|_| Error::Format(format!("bad coefficient {line:?}")))?;
                current
                    .as_deref_mut()
                    .ok_or_else(|| Error::Format("coefficient before section header".into()))?
                    .push(v);
            }
        }
        let mut coeffs = FilterCoefficients::from_tf(b, a)?;
        if !meta.is_empty() {
            coeffs.design_meta = meta;
        }
        Ok(coeffs)
    }
}

/// Chebyshev type I band-pass of prototype order `order` (the digital filter has order `2 * order`).
pub fn design_bandpass(
    low_hz: f64,
    high_hz: f64,
    order: usize,
    ripple_db: f64,
    fs_hz: f64,
) -> Result<FilterCoefficients> {
    let nyquist = fs_hz / 2.0;
    if !(fs_hz > 0.0) {
        return Err(Error::InvalidDesign(format!("sample rate {fs_hz} must be positive")));
    }
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(Error::InvalidDesign(format!(
            "corners must satisfy 0 < low < high < {nyquist} Hz, got {low_hz}..{high_hz}"
        )));
    }
    if order == 0 {
        return Err(Error::InvalidDesign("order must be at least 1".into()));
    }
    if !(ripple_db > 0.0) || !ripple_db.is_finite() {
        return Err(Error::InvalidDesign(format!("ripple {ripple_db} dB must be positive")));
    }

    let (proto_poles, proto_gain) = chebyshev1_prototype(order, ripple_db);

    // Pre-warp the corners so they land exactly after the bilinear map.
    let fs2 = 2.0 * fs_hz;
    let warp = |f: f64| fs2 * (std::f64::consts::PI * f / fs_hz).tan();
    let (wl, wh) = (warp(low_hz), warp(high_hz));
    let bw = wh - wl;
    let w0 = (wl * wh).sqrt();

    // Low-pass to band-pass: each prototype pole splits into two; `order` zeros land at s = 0.
    let mut analog_poles = Vec::with_capacity(2 * order);
    for &p in &proto_poles {
        let p_lp = p * (bw / 2.0);
        let root = (p_lp * p_lp - w0 * w0).sqrt();
        analog_poles.push(p_lp + root);
        analog_poles.push(p_lp - root);
    }
    let analog_gain = proto_gain * bw.powi(order as i32);

    // Bilinear transform. Zeros at s = 0 map to z = 1, zeros at infinity to z = -1.
    let digital_poles: Vec<Complex64> = analog_poles
        .iter()
        .map(|&p| (fs2 + p) / (fs2 - p))
        .collect();
    let mut gain_ratio = Complex64::new(fs2.powi(order as i32), 0.0);
    for &p in &analog_poles {
        gain_ratio /= fs2 - p;
    }
    let digital_gain = analog_gain * gain_ratio.re;

    let pole_pairs = pair_poles(&digital_poles)?;
    let mut sections: Vec<Biquad> = pole_pairs
        .into_iter()
        .map(|a| Biquad {
            b: [1.0, 0.0, -1.0],
            a,
        })
        .collect();
    for v in sections[0].b.iter_mut() {
        *v *= digital_gain;
    }

    let meta = format!(
        "chebyshev1 bandpass order={order} ripple_db={ripple_db} low_hz={low_hz} high_hz={high_hz} fs_hz={fs_hz}"
    );
    FilterCoefficients::from_sections(sections, meta).check_stable()
}

/// Second-order notch with quality factor `q` (−3 dB width `center_hz / q`).
pub fn design_notch(center_hz: f64, q: f64, fs_hz: f64) -> Result<FilterCoefficients> {
    if !(fs_hz > 0.0) {
        return Err(Error::InvalidDesign(format!("sample rate {fs_hz} must be positive")));
    }
    if !(center_hz > 0.0 && center_hz < fs_hz / 2.0) {
        return Err(Error::InvalidDesign(format!(
            "notch center {center_hz} Hz outside (0, {}) Hz",
            fs_hz / 2.0
        )));
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidDesign(format!("quality factor {q} must be positive")));
    }
    let w0 = 2.0 * std::f64::consts::PI * center_hz / fs_hz;
    let bw = w0 / q;
    let gain = 1.0 / (1.0 + (bw / 2.0).tan());
    let cos_w0 = w0.cos();
    let section = Biquad {
        b: [gain, -2.0 * gain * cos_w0, gain],
        a: [1.0, -2.0 * gain * cos_w0, 2.0 * gain - 1.0],
    };
    let meta = format!("notch center_hz={center_hz} q={q} fs_hz={fs_hz}");
    FilterCoefficients::from_sections(vec![section], meta).check_stable()
}

/// Complex gain at `freq_hz`.
pub fn frequency_response(coeffs: &FilterCoefficients, freq_hz: f64, fs_hz: f64) -> Complex64 {
    let omega = 2.0 * std::f64::consts::PI * freq_hz / fs_hz;
    let z_inv = Complex64::from_polar(1.0, -omega);
    if coeffs.sections.is_empty() {
        poly_eval(&coeffs.b, z_inv) / poly_eval(&coeffs.a, z_inv)
    } else {
        coeffs
            .sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }
}

/// Forward-backward filtering with odd-reflection padding of `3 * coeffs.len()`
/// samples at each end and steady-state initial conditions.
pub fn apply_filter_zero_phase(coeffs: &FilterCoefficients, signal: &[f64]) -> Result<Vec<f64>> {
    let pad = 3 * coeffs.len();
    if signal.len() <= pad {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            min: pad,
        });
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("filter input".into()));
    }
    let n = signal.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let (first, last) = (signal[0], signal[n - 1]);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let runner = Runner::new(coeffs);
    runner.filter_in_place(&mut ext);
    ext.reverse();
    runner.filter_in_place(&mut ext);
    ext.reverse();
    ext.drain(..pad);
    ext.truncate(n);
    Ok(ext)
}

/// Causal filtering from rest, single pass.
pub fn apply_filter(coeffs: &FilterCoefficients, signal: &[f64]) -> Vec<f64> {
    let mut out = signal.to_vec();
    Runner::new(coeffs).filter_from_rest(&mut out);
    out
}

enum Runner<'a> {
    Sections(&'a [Biquad]),
    Direct { b: Vec<f64>, a: Vec<f64> },
}

impl<'a> Runner<'a> {
    fn new(coeffs: &'a FilterCoefficients) -> Self {
        if coeffs.sections.is_empty() {
            let n = coeffs.len();
            let mut b = coeffs.b.clone();
            let mut a = coeffs.a.clone();
            b.resize(n, 0.0);
            a.resize(n, 0.0);
            Runner::Direct { b, a }
        } else {
            Runner::Sections(&coeffs.sections)
        }
    }

    fn filter_in_place(&self, x: &mut [f64]) {
        let x0 = x[0];
        match self {
            Runner::Sections(sections) => {
                let mut level = x0;
                for s in sections.iter() {
                    let gain = s.dc_gain();
                    let y0 = gain * level;
                    let z2 = s.b[2] * level - s.a[2] * y0;
                    let z1 = y0 - s.b[0] * level;
                    run_biquad(s, x, z1, z2);
                    level = y0;
                }
            }
            Runner::Direct { b, a } => {
                let mut state = steady_state(b, a);
                for v in state.iter_mut() {
                    *v *= x0;
                }
                run_direct(b, a, x, state);
            }
        }
    }

    fn filter_from_rest(&self, x: &mut [f64]) {
        match self {
            Runner::Sections(sections) => {
                for s in sections.iter() {
                    run_biquad(s, x, 0.0, 0.0);
                }
            }
            Runner::Direct { b, a } => run_direct(b, a, x, vec![0.0; b.len() - 1]),
        }
    }
}

// Direct form II transposed. Sections with poles close to z = 1 carry the
// state as an unevaluated sum of two doubles: at ~1e-5 from z = 1 plain f64
// rounding in the state grows to ~1e-8 relative over a few thousand samples.
fn run_biquad(s: &Biquad, x: &mut [f64], z1: f64, z2: f64) {
    let [b0, b1, b2] = s.b;
    let [_, a1, a2] = s.a;
    if s.poles().iter().all(|p| (Complex64::new(1.0, 0.0) - p).norm() > 1e-2) {
        let (mut z1, mut z2) = (z1, z2);
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
        return;
    }
    let (mut z1, mut z2) = (Dd::from(z1), Dd::from(z2));
    for v in x.iter_mut() {
        let input = *v;
        let y = Dd::product(b0, input).add(z1);
        z1 = Dd::product(b1, input).add(y.scale(-a1)).add(z2);
        z2 = Dd::product(b2, input).add(y.scale(-a2));
        *v = y.hi + y.lo;
    }
}

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }
}

impl Dd {
    fn renorm(a: f64, b: f64) -> Self {
        let hi = a + b;
        Dd { hi, lo: b - (hi - a) }
    }

    fn product(a: f64, b: f64) -> Self {
        let p = a * b;
        Dd { hi: p, lo: a.mul_add(b, -p) }
    }

    fn add(self, o: Dd) -> Self {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let e = (self.hi - (s - bb)) + (o.hi - bb);
        Dd::renorm(s, e + self.lo + o.lo)
    }

    fn scale(self, c: f64) -> Self {
        let p = Dd::product(c, self.hi);
        Dd::renorm(p.hi, p.lo + c * self.lo)
    }
}

fn run_direct(b: &[f64], a: &[f64], x: &mut [f64], mut state: Vec<f64>) {
    let order = b.len() - 1;
    for v in x.iter_mut() {
        let input = *v;
        let y = b[0] * input + state.first().copied().unwrap_or(0.0);
        for k in 0..order {
            let next = if k + 1 < order { state[k + 1] } else { 0.0 };
            state[k] = b[k + 1] * input - a[k + 1] * y + next;
        }
        *v = y;
    }
}

/// Direct-form state that yields a steady output for a unit step.
fn steady_state(b: &[f64], a: &[f64]) -> Vec<f64> {
    let order = b.len() - 1;
    if order == 0 {
        return Vec::new();
    }
    // (I - A^T) zi = b[1..] - a[1..] * b[0], with A the companion matrix of `a`.
    let mut m = vec![vec![0.0; order]; order];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += 1.0;
        row[0] += a[i + 1];
        if i + 1 < order {
            row[i + 1] -= 1.0;
        }
    }
    let rhs: Vec<f64> = (0..order).map(|i| b[i + 1] - a[i + 1] * b[0]).collect();
    solve_linear(m, rhs)
}

fn solve_linear(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let d = m[col][col];
        if d == 0.0 {
            continue;
        }
        for row in col + 1..n {
            let f = m[row][col] / d;
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = if m[row][row] == 0.0 {
            0.0
        } else {
            (rhs[row] - s) / m[row][row]
        };
    }
    x
}

/// Analog Chebyshev type I low-pass prototype (unit passband edge): poles and gain.
fn chebyshev1_prototype(order: usize, ripple_db: f64) -> (Vec<Complex64>, f64) {
    let eps = (10f64.powf(0.1 * ripple_db) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / order as f64;
    let poles: Vec<Complex64> = (0..order)
        .map(|k| {
            let m = -(order as f64) + 1.0 + 2.0 * k as f64;
            let theta = std::f64::consts::PI * m / (2.0 * order as f64);
            -Complex64::new(mu, theta).sinh()
        })
        .collect();
    let mut gain = poles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, &p| acc * -p)
        .re;
    if order % 2 == 0 {
        gain /= (1.0 + eps * eps).sqrt();
    }
    (poles, gain)
}

/// Groups poles into real-coefficient quadratics `[1, a1, a2]`.
fn pair_poles(poles: &[Complex64]) -> Result<Vec<[f64; 3]>> {
    let scale = poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= tol)
        .map(|p| p.re)
        .collect();
    let n_lower = poles.iter().filter(|p| p.im < -tol).count();
    if n_lower != complex.len() || real.len() % 2 != 0 {
        return Err(Error::InvalidDesign("poles do not form conjugate pairs".into()));
    }
    // Sections closest to the unit circle last.
    complex.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    real.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let mut out: Vec<[f64; 3]> = real
        .chunks(2)
        .map(|r| [1.0, -(r[0] + r[1]), r[0] * r[1]])
        .collect();
    out.extend(complex.iter().map(|p| [1.0, -2.0 * p.re, p.norm_sqr()]));
    Ok(out)
}

fn poly_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            out[i + j] += xi * yj;
        }
    }
    out
}

/// Evaluates `Σ c_k w^k`.
fn poly_eval(coeffs: &[f64], w: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
}

/// Roots in z of `Σ a_k z^-k`, by Durand–Kerner iteration.
pub fn poly_roots(a: &[f64]) -> Vec<Complex64> {
    let mut coeffs = a.to_vec();
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let lead = coeffs[0];
    // Monic polynomial in z: z^n + (a1/a0) z^{n-1} + ... + an/a0.
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |z: Complex64| {
        monic
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..degree {
            let zi = roots[i];
            let denom = roots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, (_, &zj)| acc * (zi - zj));
            let step = eval(zi) / denom;
            roots[i] = zi - step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Band-pass followed by notch, as used on every raw channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pub bandpass: FilterCoefficients,
    pub notch: FilterCoefficients,
}

/// Filter parameters; defaults are the pipeline's standard settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub fs_hz: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub ripple_db: f64,
    pub notch_hz: f64,
    pub notch_q: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            fs_hz: 512.0,
            low_hz: 0.01,
            high_hz: 200.0,
            order: 4,
            ripple_db: 0.5,
            notch_hz: 50.0,
            notch_q: 30.0,
        }
    }
}

impl Preprocessor {
    pub fn new(config: &FilterConfig) -> Result<Self> {
        Ok(Preprocessor {
            bandpass: design_bandpass(
                config.low_hz,
                config.high_hz,
                config.order,
                config.ripple_db,
                config.fs_hz,
            )?,
            notch: design_notch(config.notch_hz, config.notch_q, config.fs_hz)?,
        })
    }

    pub fn apply(&self, signal: &[f64]) -> Result<Vec<f64>> {
        let band = apply_filter_zero_phase(&self.bandpass, signal)?;
        apply_filter_zero_phase(&self.notch, &band)
    }
}
