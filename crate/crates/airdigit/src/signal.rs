//! Three-axis sampled signals and the preprocessing chain: zero-phase
//! Butterworth low-pass filtering, Fourier-method resampling, differentiation
//! and integration between channels, and the flat feature layout fed to the
//! classifier.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Samples per axis after resampling, fixed by the classifier input width.
pub const SAMPLES_PER_AXIS: usize = 100;
/// Total classifier input width: three axes of [`SAMPLES_PER_AXIS`].
pub const FEATURE_LEN: usize = 3 * SAMPLES_PER_AXIS;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("axes have mismatched lengths ({x}/{y}/{z})")]
    MismatchedAxes { x: usize, y: usize, z: usize },
    #[error("signal too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("signal contains a non-finite sample")]
    NonFinite,
    #[error("invalid filter spec: {0}")]
    InvalidFilterSpec(String),
    #[error("invalid resample length {0}, need at least 2")]
    InvalidLength(usize),
    #[error("axis length {got} does not match required {want}")]
    WrongLength { got: usize, want: usize },
}

/// Which physical quantity a channel or feature vector carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Acceleration,
    Velocity,
    Trajectory,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 3] = [
        ChannelKind::Acceleration,
        ChannelKind::Velocity,
        ChannelKind::Trajectory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Acceleration => "acceleration",
            ChannelKind::Velocity => "velocity",
            ChannelKind::Trajectory => "trajectory",
        }
    }

    /// Unit of the raw samples for this channel.
    pub fn unit(self) -> &'static str {
        match self {
            ChannelKind::Acceleration => "m/s^2",
            ChannelKind::Velocity => "m/s",
            ChannelKind::Trajectory => "m",
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "accel" | "acceleration" | "acc" => Ok(ChannelKind::Acceleration),
            "vel" | "velocity" => Ok(ChannelKind::Velocity),
            "traj" | "trajectory" => Ok(ChannelKind::Trajectory),
            other => Err(format!("unknown channel '{other}' (expected accel|vel|traj)")),
        }
    }
}

/// Uniformly sampled three-axis time series with an explicit sample rate.
///
/// Invariants (checked at construction): all three axes the same length, at
/// least 2 samples, positive rate, all samples finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal3 {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    rate_hz: f64,
}

impl SampledSignal3 {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, rate_hz: f64) -> Result<Self, SignalError> {
        if x.len() != y.len() || x.len() != z.len() {
            return Err(SignalError::MismatchedAxes { x: x.len(), y: y.len(), z: z.len() });
        }
        if x.len() < 2 {
            return Err(SignalError::TooShort { len: x.len(), min: 2 });
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(SignalError::BadRate(rate_hz));
        }
        if [&x, &y, &z].iter().any(|axis| axis.iter().any(|v| !v.is_finite())) {
            return Err(SignalError::NonFinite);
        }
        Ok(SampledSignal3 { x, y, z, rate_hz })
    }

    /// Builds a signal whose axes are all the given function of sample time.
    pub fn from_fn(
        len: usize,
        rate_hz: f64,
        mut f: impl FnMut(f64) -> (f64, f64, f64),
    ) -> Result<Self, SignalError> {
        let mut x = Vec::with_capacity(len);
        let mut y = Vec::with_capacity(len);
        let mut z = Vec::with_capacity(len);
        for k in 0..len {
            let (a, b, c) = f(k as f64 / rate_hz);
            x.push(a);
            y.push(b);
            z.push(c);
        }
        SampledSignal3::new(x, y, z, rate_hz)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    fn map_axes(
        &self,
        rate_hz: f64,
        mut f: impl FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<Self, SignalError> {
        SampledSignal3::new(f(&self.x), f(&self.y), f(&self.z), rate_hz)
    }

    /// Low-pass filter each axis independently. With `zero_phase` the filter
    /// runs forward then backward, so the passband is delayed by zero samples
    /// and the effective attenuation is the single-pass response squared.
    pub fn lowpass(&self, spec: &FilterSpec) -> Result<Self, SignalError> {
        spec.validate_for_rate(self.rate_hz)?;
        let sections = butterworth_lowpass(spec.cutoff_hz, self.rate_hz, spec.order);
        let pad = (3 * spec.order).min(self.len() - 1);
        self.map_axes(self.rate_hz, |axis| {
            if spec.zero_phase {
                filtfilt(&sections, axis, pad)
            } else {
                filter_once(&sections, axis)
            }
        })
    }

    /// Resample every axis to exactly `n` samples by spectrum truncation /
    /// zero-padding; the rate is rescaled by `n / len`.
    pub fn resample_fourier(&self, n: usize) -> Result<Self, SignalError> {
        if n < 2 {
            return Err(SignalError::InvalidLength(n));
        }
        let new_rate = self.rate_hz * n as f64 / self.len() as f64;
        if n == self.len() {
            return Ok(self.clone());
        }
        self.map_axes(new_rate, |axis| resample_axis(axis, n))
    }

    /// First derivative: central differences in the interior, one-sided at
    /// the boundaries. Exact for linear signals.
    pub fn differentiate(&self) -> Result<Self, SignalError> {
        if self.len() < 3 {
            return Err(SignalError::TooShort { len: self.len(), min: 3 });
        }
        let rate = self.rate_hz;
        self.map_axes(rate, |axis| {
            let n = axis.len();
            let mut out = vec![0.0; n];
            out[0] = (axis[1] - axis[0]) * rate;
            out[n - 1] = (axis[n - 1] - axis[n - 2]) * rate;
            for i in 1..n - 1 {
                out[i] = (axis[i + 1] - axis[i - 1]) * rate * 0.5;
            }
            out
        })
    }

    /// Trapezoidal cumulative integral starting at zero. With `detrend` the
    /// per-axis least-squares line is removed, which absorbs integration
    /// drift from sensor bias.
    pub fn integrate(&self, detrend: bool) -> Self {
        let rate = self.rate_hz;
        let dt = 1.0 / rate;
        self.map_axes(rate, |axis| {
            let mut out = Vec::with_capacity(axis.len());
            let mut acc = 0.0;
            out.push(0.0);
            for w in axis.windows(2) {
                acc += 0.5 * (w[0] + w[1]) * dt;
                out.push(acc);
            }
            if detrend {
                let (intercept, slope) = linear_fit(&out, dt);
                for (i, v) in out.iter_mut().enumerate() {
                    *v -= intercept + slope * (i as f64 * dt);
                }
            }
            out
        })
        .expect("integration preserves signal invariants")
    }

    /// Flatten into the classifier layout `[x0..x99, y0..y99, z0..z99]`.
    /// Every axis must hold exactly [`SAMPLES_PER_AXIS`] samples.
    pub fn to_feature_vector(&self, kind: ChannelKind) -> Result<FeatureVector, SignalError> {
        if self.len() != SAMPLES_PER_AXIS {
            return Err(SignalError::WrongLength { got: self.len(), want: SAMPLES_PER_AXIS });
        }
        let mut values = Vec::with_capacity(FEATURE_LEN);
        values.extend_from_slice(&self.x);
        values.extend_from_slice(&self.y);
        values.extend_from_slice(&self.z);
        Ok(FeatureVector { values, kind })
    }
}

/// Low-pass filter parameters. Defaults match the preprocessing chain:
/// 20 Hz cutoff, 4th order, zero phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub cutoff_hz: f64,
    pub order: usize,
    pub zero_phase: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec { cutoff_hz: 20.0, order: 4, zero_phase: true }
    }
}

impl FilterSpec {
    pub fn validate_for_rate(&self, rate_hz: f64) -> Result<(), SignalError> {
        if self.order == 0 {
            return Err(SignalError::InvalidFilterSpec("order must be >= 1".into()));
        }
        if !(self.cutoff_hz.is_finite() && self.cutoff_hz > 0.0) {
            return Err(SignalError::InvalidFilterSpec(format!(
                "cutoff must be positive, got {}",
                self.cutoff_hz
            )));
        }
        if self.cutoff_hz >= rate_hz / 2.0 {
            return Err(SignalError::InvalidFilterSpec(format!(
                "cutoff {} Hz at or above Nyquist ({} Hz)",
                self.cutoff_hz,
                rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// 300-element classifier input: x, y, z axes concatenated in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    kind: ChannelKind,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, kind: ChannelKind) -> Result<Self, SignalError> {
        if values.len() != FEATURE_LEN {
            return Err(SignalError::WrongLength { got: values.len(), want: FEATURE_LEN });
        }
        Ok(FeatureVector { values, kind })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    /// Slice the flat layout back into (x, y, z) axes.
    pub fn axes(&self) -> (&[f64], &[f64], &[f64]) {
        (
            &self.values[..SAMPLES_PER_AXIS],
            &self.values[SAMPLES_PER_AXIS..2 * SAMPLES_PER_AXIS],
            &self.values[2 * SAMPLES_PER_AXIS..],
        )
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// One second-order section (biquad) in direct form II transposed.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }
}

/// Butterworth low-pass as a cascade of bilinear-transformed analog pole
/// pairs (plus one first-order section for odd orders), pre-warped so the
/// -3 dB point lands exactly on `cutoff_hz`.
fn butterworth_lowpass(cutoff_hz: f64, rate_hz: f64, order: usize) -> Vec<Biquad> {
    let k = 2.0 * rate_hz;
    let wa = k * (std::f64::consts::PI * cutoff_hz / rate_hz).tan();
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    let pairs = order / 2;
    for i in 0..pairs {
        // Analog pole angle in the left half plane for this conjugate pair.
        let theta = std::f64::consts::PI * (2.0 * (i as f64 + 1.0) + order as f64 - 1.0)
            / (2.0 * order as f64);
        let re = theta.cos(); // negative
        let a = k * k;
        let b = -2.0 * re * wa * k;
        let c = wa * wa;
        let d0 = a + b + c;
        sections.push(Biquad {
            b0: c / d0,
            b1: 2.0 * c / d0,
            b2: c / d0,
            a1: (2.0 * c - 2.0 * a) / d0,
            a2: (a - b + c) / d0,
        });
    }
    if order % 2 == 1 {
        let d0 = k + wa;
        sections.push(Biquad {
            b0: wa / d0,
            b1: wa / d0,
            b2: 0.0,
            a1: (wa - k) / d0,
            a2: 0.0,
        });
    }
    sections
}

/// Run the cascade over `x` once, with each section's state initialized to
/// its steady-state response for the first input value (suppresses the
/// start-up step transient).
fn filter_once(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let mut data = x.to_vec();
    for s in sections {
        let g = s.dc_gain();
        let first = data.first().copied().unwrap_or(0.0);
        let mut z1 = (g - s.b0) * first;
        let mut z2 = (s.b2 - s.a2 * g) * first;
        for v in data.iter_mut() {
            let input = *v;
            let out = s.b0 * input + z1;
            z1 = s.b1 * input - s.a1 * out + z2;
            z2 = s.b2 * input - s.a2 * out;
            *v = out;
        }
    }
    data
}

/// Forward-backward filtering over an odd-reflected extension of `x`;
/// the extension of `pad` samples at each end is stripped afterwards.
fn filtfilt(sections: &[Biquad], x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let first = x[0];
    let last = x[n - 1];
    for i in (1..=pad).rev() {
        ext.push(2.0 * first - x[i]);
    }
    ext.extend_from_slice(x);
    for i in (n - 1 - pad..n - 1).rev() {
        ext.push(2.0 * last - x[i]);
    }
    let mut fwd = filter_once(sections, &ext);
    fwd.reverse();
    let mut back = filter_once(sections, &fwd);
    back.reverse();
    back[pad..pad + n].to_vec()
}

/// Fourier-method resampling of one axis to `n` samples: transform, keep the
/// symmetric low half of the spectrum (summing or splitting the Nyquist bin
/// across even-length transitions), inverse-transform, rescale by `n / len`.
fn resample_axis(x: &[f64], n: usize) -> Vec<f64> {
    let m = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let mut spectrum: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut spectrum);

    let keep = m.min(n);
    let nyq = keep / 2 + 1;
    let mut out_spec = vec![Complex::new(0.0, 0.0); n];
    out_spec[..nyq].copy_from_slice(&spectrum[..nyq]);
    if keep > 2 {
        let neg = keep - nyq;
        out_spec[n - neg..].copy_from_slice(&spectrum[m - neg..]);
    }
    if keep.is_multiple_of(2) {
        let h = keep / 2;
        if n < m {
            // Fold the conjugate partner of the Nyquist bin in.
            out_spec[h] *= 2.0;
        } else if n > m {
            // Split the Nyquist bin between its two slots.
            out_spec[h] *= 0.5;
            out_spec[n - h] = out_spec[h];
        }
    }

    let ifft = planner.plan_fft_inverse(n);
    ifft.process(&mut out_spec);
    // Unnormalized transforms: forward left a factor len, inverse another; the
    // combined 1/m puts amplitude right including the n/len rescale.
    out_spec.iter().map(|c| c.re / m as f64).collect()
}

/// Least-squares line fit over uniformly spaced samples; returns
/// (intercept, slope-per-second).
pub(crate) fn linear_fit(values: &[f64], dt: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mut st = 0.0;
    let mut sv = 0.0;
    let mut stt = 0.0;
    let mut stv = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let t = i as f64 * dt;
        st += t;
        sv += v;
        stt += t * t;
        stv += t * v;
    }
    let denom = n * stt - st * st;
    if denom.abs() < 1e-300 {
        return (sv / n, 0.0);
    }
    let slope = (n * stv - st * sv) / denom;
    let intercept = (sv - slope * st) / n;
    (intercept, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, len: usize, rate: f64) -> SampledSignal3 {
        SampledSignal3::from_fn(len, rate, |t| {
            let v = (2.0 * PI * freq * t).sin();
            (v, v, v)
        })
        .unwrap()
    }

    /// Least-squares amplitude of the `freq` component over the central 80%.
    fn fitted_amplitude(samples: &[f64], rate: f64, freq: f64) -> f64 {
        let n = samples.len();
        let lo = n / 10;
        let hi = n - n / 10;
        let mut ss = 0.0;
        let mut sc = 0.0;
        let mut scc = 0.0;
        let mut sss = 0.0;
        let mut ssc = 0.0;
        for i in lo..hi {
            let t = i as f64 / rate;
            let s = (2.0 * PI * freq * t).sin();
            let c = (2.0 * PI * freq * t).cos();
            ss += s * samples[i];
            sc += c * samples[i];
            sss += s * s;
            scc += c * c;
            ssc += s * c;
        }
        // Solve the 2x2 normal equations for a*sin + b*cos.
        let det = sss * scc - ssc * ssc;
        let a = (ss * scc - sc * ssc) / det;
        let b = (sc * sss - ss * ssc) / det;
        (a * a + b * b).sqrt()
    }

    fn rel_rms(got: &[f64], want: &[f64]) -> f64 {
        let err: f64 = got.iter().zip(want).map(|(g, w)| (g - w) * (g - w)).sum();
        let den: f64 = want.iter().map(|w| w * w).sum();
        (err / den.max(1e-300)).sqrt()
    }

    fn rms(values: &[f64]) -> f64 {
        (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(
            SampledSignal3::new(vec![0.0, 1.0], vec![0.0], vec![0.0, 1.0], 100.0),
            Err(SignalError::MismatchedAxes { .. })
        ));
        assert!(matches!(
            SampledSignal3::new(vec![0.0], vec![0.0], vec![0.0], 100.0),
            Err(SignalError::TooShort { .. })
        ));
        assert!(matches!(
            SampledSignal3::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0], 0.0),
            Err(SignalError::BadRate(_))
        ));
        assert!(matches!(
            SampledSignal3::new(vec![0.0, f64::NAN], vec![0.0, 1.0], vec![0.0, 1.0], 10.0),
            Err(SignalError::NonFinite)
        ));
    }

    #[test]
    fn lowpass_preserves_constant() {
        let sig = SampledSignal3::from_fn(200, 100.0, |_| (3.7, -1.2, 0.0)).unwrap();
        let out = sig.lowpass(&FilterSpec::default()).unwrap();
        assert_eq!(out.len(), 200);
        assert_eq!(out.rate_hz(), 100.0);
        for i in 0..200 {
            assert!((out.x()[i] - 3.7).abs() < 1e-9);
            assert!((out.y()[i] + 1.2).abs() < 1e-9);
            assert!(out.z()[i].abs() < 1e-9);
        }
    }

    #[test]
    fn lowpass_attenuates_stopband_tone() {
        // Analytic double-pass Butterworth magnitude at 40 Hz is ~1e-5 of the
        // input; 0.01 leaves room for bilinear warping and edge effects.
        let sig = tone(40.0, 200, 100.0);
        let out = sig.lowpass(&FilterSpec::default()).unwrap();
        let amp = fitted_amplitude(out.x(), 100.0, 40.0);
        assert!(amp <= 0.01, "stopband residual {amp}");
    }

    #[test]
    fn lowpass_passes_passband_tone() {
        let sig = tone(5.0, 400, 100.0);
        let out = sig.lowpass(&FilterSpec::default()).unwrap();
        let amp = fitted_amplitude(out.x(), 100.0, 5.0);
        assert!(amp >= 0.999, "passband amplitude {amp}");
    }

    #[test]
    fn lowpass_rejects_cutoff_at_nyquist() {
        let sig = tone(5.0, 100, 30.0);
        let err = sig
            .lowpass(&FilterSpec { cutoff_hz: 20.0, ..FilterSpec::default() })
            .unwrap_err();
        assert!(matches!(err, SignalError::InvalidFilterSpec(_)));
    }

    #[test]
    fn zero_phase_has_no_group_delay() {
        // Cross-correlation between a passband tone and its filtered copy
        // must peak at lag zero.
        let sig = tone(5.0, 400, 100.0);
        let out = sig.lowpass(&FilterSpec::default()).unwrap();
        let xs = sig.x();
        let ys = out.x();
        let corr_at = |lag: i64| -> f64 {
            let mut acc = 0.0;
            for i in 0..xs.len() as i64 {
                let j = i + lag;
                if j >= 0 && (j as usize) < ys.len() {
                    acc += xs[i as usize] * ys[j as usize];
                }
            }
            acc
        };
        let at_zero = corr_at(0);
        for lag in -20..=20i64 {
            assert!(corr_at(lag) <= at_zero + 1e-9, "lag {lag} beats lag 0");
        }
    }

    #[test]
    fn resample_constant_stays_constant() {
        let sig = SampledSignal3::from_fn(173, 100.0, |_| (2.5, 2.5, 2.5)).unwrap();
        let out = sig.resample_fourier(100).unwrap();
        assert_eq!(out.len(), 100);
        for &v in out.x() {
            assert!((v - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_integer_bin_tone_is_exact() {
        // 5 Hz over 2 s occupies bin 10 exactly; truncation keeps it intact.
        let sig = tone(5.0, 200, 100.0);
        let out = sig.resample_fourier(100).unwrap();
        assert_eq!(out.len(), 100);
        assert!((out.rate_hz() - 50.0).abs() < 1e-12);
        let want: Vec<f64> = (0..100).map(|k| (2.0 * PI * 5.0 * k as f64 / 50.0).sin()).collect();
        let err: f64 = out
            .x()
            .iter()
            .zip(&want)
            .map(|(g, w)| (g - w) * (g - w))
            .sum::<f64>()
            / 100.0;
        assert!(err.sqrt() <= 1e-6, "rms {}", err.sqrt());
    }

    #[test]
    fn resample_identity_length() {
        let sig = tone(7.0, 150, 100.0);
        let out = sig.resample_fourier(150).unwrap();
        for (a, b) in out.x().iter().zip(sig.x()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_rejects_tiny_target() {
        let sig = tone(5.0, 100, 100.0);
        assert_eq!(sig.resample_fourier(1).unwrap_err(), SignalError::InvalidLength(1));
    }

    #[test]
    fn resample_upsamples_tone_exactly() {
        let sig = tone(3.0, 100, 50.0);
        let out = sig.resample_fourier(200).unwrap();
        assert_eq!(out.len(), 200);
        assert!((out.rate_hz() - 100.0).abs() < 1e-12);
        let want: Vec<f64> = (0..200).map(|k| (2.0 * PI * 3.0 * k as f64 / 100.0).sin()).collect();
        assert!(rel_rms(out.x(), &want) < 1e-9);
    }

    #[test]
    fn differentiate_linear_ramp() {
        let sig = SampledSignal3::from_fn(100, 100.0, |t| (2.5 * t, -1.0 * t, 0.25 * t)).unwrap();
        let out = sig.differentiate().unwrap();
        for i in 0..100 {
            assert!((out.x()[i] - 2.5).abs() < 1e-9);
            assert!((out.y()[i] + 1.0).abs() < 1e-9);
            assert!((out.z()[i] - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn differentiate_constant_is_zero() {
        let sig = SampledSignal3::from_fn(50, 100.0, |_| (4.0, 4.0, 4.0)).unwrap();
        let out = sig.differentiate().unwrap();
        assert!(out.x().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn differentiate_sine_matches_analytic() {
        let sig = tone(2.0, 400, 100.0);
        let out = sig.differentiate().unwrap();
        let want: Vec<f64> =
            (0..400).map(|k| 4.0 * PI * (2.0 * PI * 2.0 * k as f64 / 100.0).cos()).collect();
        let err = rel_rms(out.x(), &want);
        assert!(err < 1e-2, "relative rms {err}");
    }

    #[test]
    fn differentiate_needs_three_samples() {
        let sig = SampledSignal3::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0], 10.0).unwrap();
        assert!(matches!(sig.differentiate(), Err(SignalError::TooShort { .. })));
    }

    #[test]
    fn integrate_constant_reaches_k_times_t() {
        // 201 samples at 100 Hz puts the last sample exactly at t = 2 s.
        let k = 1.2;
        let sig = SampledSignal3::from_fn(201, 100.0, |_| (k, k, k)).unwrap();
        let out = sig.integrate(false);
        let last = out.x()[200];
        assert!((last - k * 2.0).abs() < 1e-9, "got {last}");
    }

    #[test]
    fn integrate_after_differentiate_round_trips() {
        let sig = SampledSignal3::from_fn(400, 100.0, |t| {
            let v = (2.0 * PI * 1.5 * t).sin() + 0.5 * (2.0 * PI * 3.0 * t).cos();
            (v, v, v)
        })
        .unwrap();
        let back = sig.differentiate().unwrap().integrate(false);
        let want: Vec<f64> = sig.x().iter().map(|v| v - sig.x()[0]).collect();
        let err = rel_rms(back.x(), &want);
        assert!(err < 1e-2, "relative rms {err}");
    }

    #[test]
    fn integrate_detrend_kills_line() {
        let sig = SampledSignal3::from_fn(300, 100.0, |t| {
            ((2.0 * PI * 2.0 * t).sin() + 3.0, t * 0.7 - 1.0, -2.0)
        })
        .unwrap();
        let out = sig.integrate(true);
        for i in 0..3 {
            let (intercept, slope) = linear_fit(out.axis(i), 0.01);
            assert!(slope.abs() < 1e-9, "axis {i} slope {slope}");
            assert!(intercept.abs() < 1e-9, "axis {i} intercept {intercept}");
        }
    }

    #[test]
    fn feature_vector_layout() {
        let sig = SampledSignal3::from_fn(100, 50.0, |_| (1.0, 2.0, 3.0)).unwrap();
        let fv = sig.to_feature_vector(ChannelKind::Velocity).unwrap();
        assert_eq!(fv.values().len(), FEATURE_LEN);
        assert!(fv.values()[..100].iter().all(|&v| v == 1.0));
        assert!(fv.values()[100..200].iter().all(|&v| v == 2.0));
        assert!(fv.values()[200..].iter().all(|&v| v == 3.0));
    }

    #[test]
    fn feature_vector_round_trips_axes() {
        let sig = SampledSignal3::from_fn(100, 100.0, |t| (t, t * t, -t)).unwrap();
        let fv = sig.to_feature_vector(ChannelKind::Trajectory).unwrap();
        let (x, y, z) = fv.axes();
        assert_eq!(x, sig.x());
        assert_eq!(y, sig.y());
        assert_eq!(z, sig.z());
    }

    #[test]
    fn feature_vector_rejects_wrong_length() {
        let sig = SampledSignal3::from_fn(99, 100.0, |_| (0.0, 0.0, 0.0)).unwrap();
        assert!(matches!(
            sig.to_feature_vector(ChannelKind::Acceleration),
            Err(SignalError::WrongLength { got: 99, want: 100 })
        ));
    }

    #[test]
    fn two_second_capture_resamples_to_300_features() {
        let sig = tone(5.0, 200, 100.0);
        let fv = sig
            .resample_fourier(SAMPLES_PER_AXIS)
            .unwrap()
            .to_feature_vector(ChannelKind::Acceleration)
            .unwrap();
        assert_eq!(fv.values().len(), 300);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Integer-bin tones below both Nyquist rates survive resampling.
        #[test]
        fn resample_preserves_integer_bin_tones(bin in 1usize..20, n in 60usize..160) {
            let len = 200usize;
            let rate = 100.0;
            let freq = bin as f64 * rate / len as f64; // integer bin of the input
            let new_rate = rate * n as f64 / len as f64;
            prop_assume!(freq < rate / 2.0 && freq < new_rate / 2.0);
            // Also an integer bin of the output only if n*bin/len is integral;
            // Fourier resampling is exact regardless, since the bin is kept.
            let sig = tone(freq, len, rate);
            let out = sig.resample_fourier(n).unwrap();
            let want: Vec<f64> = (0..n)
                .map(|k| (2.0 * PI * freq * k as f64 / new_rate).sin())
                .collect();
            prop_assert!(rms(&out.x().iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-6);
        }

        /// Filtering then resampling commutes with resampling then filtering
        /// for signals band-limited under both the cutoff and the new Nyquist.
        #[test]
        fn lowpass_and_resample_commute_on_bandlimited(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let len = 200usize;
            let rate = 100.0;
            let n = 120usize; // new Nyquist 30 Hz; cutoff 20 Hz
            // Bilinear warping separates the two rates' responses near the
            // cutoff, so keep content at or below half of it.
            let comps: Vec<(f64, f64, f64)> = (1..=5)
                .map(|_| {
                    (
                        rng.random_range(0.5..8.0f64).round(),
                        rng.random_range(0.2..1.0),
                        rng.random_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            let sig = SampledSignal3::from_fn(len, rate, |t| {
                let v: f64 = comps.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum();
                (v, v, v)
            }).unwrap();
            let spec = FilterSpec::default();
            let a = sig.lowpass(&spec).unwrap().resample_fourier(n).unwrap();
            let b = sig.resample_fourier(n).unwrap().lowpass(&spec).unwrap();
            // Compare away from the ends: the two orderings leave different
            // (tiny) filter edge transients there.
            let lo = n / 8;
            let hi = n - n / 8;
            let diff: Vec<f64> = a.x()[lo..hi].iter().zip(&b.x()[lo..hi]).map(|(p, q)| p - q).collect();
            let scale = rms(sig.x()).max(1e-9);
            prop_assert!(rms(&diff) / scale <= 1e-3, "commute error {}", rms(&diff) / scale);
        }

        /// Slicing a feature vector back into axes is the identity.
        #[test]
        fn feature_round_trip_identity(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let mut axes: Vec<Vec<f64>> = Vec::new();
            for _ in 0..3 {
                axes.push((0..SAMPLES_PER_AXIS).map(|_| rng.random_range(-5.0..5.0)).collect());
            }
            let sig = SampledSignal3::new(axes[0].clone(), axes[1].clone(), axes[2].clone(), 100.0).unwrap();
            let fv = sig.to_feature_vector(ChannelKind::Acceleration).unwrap();
            let (x, y, z) = fv.axes();
            prop_assert_eq!(x, sig.x());
            prop_assert_eq!(y, sig.y());
            prop_assert_eq!(z, sig.z());
        }
    }
}
