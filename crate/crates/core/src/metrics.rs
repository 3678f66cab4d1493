//! Relative grid errors and short-time Fourier magnitudes.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::panel_count;
use crate::scalar::Scalar;

/// Grid `{a + γn : a + γn < b}`.
pub fn eval_grid<T: Scalar>(interval: (T, T), step: T) -> Result<Vec<T>> {
    let (a, b) = interval;
    if !(step > T::zero()) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
    }
    if !(b > a) {
        return Err(Error::EmptyInterval(a.to_f64_lossy(), b.to_f64_lossy()));
    }
    let count = panel_count(b - a, step);
    Ok((0..count).map(|n| a + step * T::from_int(n as i64)).filter(|&x| x < b).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `‖f̃ - f‖₂ / ‖f‖₂` over the grid.
    pub e2: f64,
    /// `max|f̃ - f| / max|f|` over the grid.
    pub einf: f64,
    pub grid_step: f64,
    pub interval: [f64; 2],
    pub points: usize,
}

/// Relative ℓ² and ℓ^∞ errors of `f_tilde` against `f` on the half-open
/// grid over `interval`.
pub fn relative_errors<T: Scalar>(
    f: impl Fn(T) -> T,
    f_tilde: impl Fn(T) -> T,
    interval: (T, T),
    step: T,
) -> Result<ErrorReport> {
    let grid = eval_grid(interval, step)?;
    let reference: Vec<T> = grid.iter().map(|&x| f(x)).collect();
    let approx: Vec<T> = grid.iter().map(|&x| f_tilde(x)).collect();
    let mut report = errors_from_values(&reference, &approx)?;
    report.grid_step = step.to_f64_lossy();
    report.interval = [interval.0.to_f64_lossy(), interval.1.to_f64_lossy()];
    Ok(report)
}

/// Relative errors from already evaluated grids (`grid_step` and `interval`
/// left at zero).
pub fn errors_from_values<T: Scalar>(reference: &[T], approx: &[T]) -> Result<ErrorReport> {
    if reference.len() != approx.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), got: approx.len() });
    }
    let mut num2 = T::zero();
    let mut den2 = T::zero();
    let mut num_inf = T::zero();
    let mut den_inf = T::zero();
    for (&f, &g) in reference.iter().zip(approx) {
        let d = (g - f).abs();
        num2 = num2 + d * d;
        den2 = den2 + f * f;
        num_inf = num_inf.max(d);
        den_inf = den_inf.max(f.abs());
    }
    if den_inf == T::zero() {
        return Err(Error::ZeroReference);
    }
    if !num2.is_finite() || !den2.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(ErrorReport {
        e2: (num2.sqrt() / den2.sqrt()).to_f64_lossy(),
        einf: (num_inf / den_inf).to_f64_lossy(),
        grid_step: 0.0,
        interval: [0.0, 0.0],
        points: reference.len(),
    })
}

/// Largest `|f̃ - f|` on the grid over `interval`.
pub fn max_abs_error<T: Scalar>(f: impl Fn(T) -> T, f_tilde: impl Fn(T) -> T, interval: (T, T), step: T) -> Result<T> {
    Ok(eval_grid(interval, step)?.into_iter().map(|x| (f_tilde(x) - f(x)).abs()).fold(T::zero(), T::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrogramParams {
    pub win_len: f64,
    pub hop: f64,
    /// Samples per window; must be a power of two.
    pub fft_size: usize,
    /// Drop frequency rows above this value.
    pub max_freq: Option<f64>,
}

impl Default for SpectrogramParams {
    fn default() -> Self {
        Self { win_len: 0.25, hop: 0.01, fft_size: 4096, max_freq: None }
    }
}

/// Magnitudes `mag[frame][bin]` of Hann-windowed frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
    pub mag: Vec<Vec<f64>>,
}

impl Spectrogram {
    /// Frequency of the largest magnitude in each frame.
    pub fn ridge(&self) -> Vec<f64> {
        self.mag
            .iter()
            .map(|frame| {
                let k = frame
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0;
                self.freqs[k]
            })
            .collect()
    }

    /// Long-form `t,f,mag` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,f,mag")?;
        for (t, frame) in self.times.iter().zip(&self.mag) {
            for (f, m) in self.freqs.iter().zip(frame) {
                writeln!(out, "{t:?},{f:?},{m:?}")?;
            }
        }
        Ok(())
    }
}

/// Short-time Fourier magnitudes of `f` on `interval`.
///
/// Each frame samples `fft_size` points across a window of length `win_len`,
/// so the sampling rate is `fft_size / win_len` and bins are `1 / win_len`
/// apart. Frame centres start at `a + win_len/2` and advance by `hop` while
/// the frame fits in the interval. Magnitudes are scaled so a unit sine
/// peaks near 1.
pub fn spectrogram(f: impl Fn(f64) -> f64, interval: (f64, f64), params: &SpectrogramParams) -> Result<Spectrogram> {
    let SpectrogramParams { win_len, hop, fft_size, max_freq } = *params;
    if !fft_size.is_power_of_two() || fft_size < 2 {
        return Err(Error::FftSize(fft_size));
    }
    if !(win_len > 0.0) || !(hop > 0.0) {
        return Err(Error::InvalidParameter(format!("win_len and hop must be positive, got {win_len} and {hop}")));
    }
    let (a, b) = interval;
    if !(b - a >= win_len) {
        return Err(Error::InvalidParameter(format!("interval [{a}, {b}] is shorter than the window {win_len}")));
    }
    let dt = win_len / fft_size as f64;
    let hann: Vec<f64> =
        (0..fft_size).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / fft_size as f64).cos()).collect();
    let gain = 2.0 / hann.iter().sum::<f64>();
    let bins = fft_size / 2 + 1;
    let mut freqs: Vec<f64> = (0..bins).map(|k| k as f64 / win_len).collect();
    if let Some(fmax) = max_freq {
        freqs.retain(|&fr| fr <= fmax);
    }
    let keep = freqs.len();
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let frames = ((b - a - win_len) / hop + 1e-9).floor() as usize + 1;
    let mut times = Vec::with_capacity(frames);
    let mut mag = Vec::with_capacity(frames);
    for fr in 0..frames {
        let start = a + hop * fr as f64;
        times.push(start + win_len / 2.0);
        for (i, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(f(start + dt * i as f64) * hann[i], 0.0);
        }
        fft.process(&mut buf);
        mag.push(buf[..keep].iter().map(|c| c.norm() * gain).collect());
    }
    Ok(Spectrogram { times, freqs, mag })
}
