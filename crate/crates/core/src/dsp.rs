//! Band-pass front end: fast-ripple filtering, 35 kHz oversampling, and the
//! baseline amplitude estimate that anchors the spike-conversion threshold.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Lower edge of the fast-ripple band in Hz.
pub const FAST_RIPPLE_LOW_HZ: f64 = 250.0;
/// Upper edge of the fast-ripple band in Hz.
pub const FAST_RIPPLE_HIGH_HZ: f64 = 500.0;
/// Rate the analog input is oversampled to before spike conversion.
pub const OVERSAMPLE_RATE_HZ: f64 = 35_000.0;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("invalid band: need 0 < low < high < fs/2, got low={low} Hz, high={high} Hz, fs={fs} Hz")]
    InvalidBand { low: f64, high: f64, fs: f64 },
    #[error("filter design order must be >= 1")]
    InvalidOrder,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("signal too short: need {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
}

/// Band-pass design request. `order` is the design order of the underlying
/// low-pass prototype: the realized band-pass has `order` poles per band edge
/// (`2 * order` total, i.e. four poles for the default order 2).
#[derive(Debug, Clone, Copy)]
pub struct FilterSpec {
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    pub order: usize,
    pub sample_rate_hz: f64,
}

impl FilterSpec {
    /// The 250-500 Hz fast-ripple band at the given sample rate.
    pub fn fast_ripple(sample_rate_hz: f64) -> Self {
        FilterSpec {
            low_cut_hz: FAST_RIPPLE_LOW_HZ,
            high_cut_hz: FAST_RIPPLE_HIGH_HZ,
            order: 2,
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if self.order == 0 {
            return Err(DspError::InvalidOrder);
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.low_cut_hz > 0.0
            && self.low_cut_hz < self.high_cut_hz
            && self.high_cut_hz < nyquist
            && self.sample_rate_hz.is_finite())
        {
            return Err(DspError::InvalidBand {
                low: self.low_cut_hz,
                high: self.high_cut_hz,
                fs: self.sample_rate_hz,
            });
        }
        Ok(())
    }
}

/// One second-order section, normalized so a0 = 1.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Complex response of this section at `freq_hz`.
    pub fn response_at(&self, freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let z1 = Complex64::new(w.cos(), -w.sin());
        let z2 = z1 * z1;
        let num = Complex64::new(self.b0, 0.0) + z1 * self.b1 + z2 * self.b2;
        let den = Complex64::new(1.0, 0.0) + z1 * self.a1 + z2 * self.a2;
        num / den
    }

    /// Magnitudes of the two poles of this section.
    pub fn pole_magnitudes(&self) -> [f64; 2] {
        // roots of z^2 + a1 z + a2
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc >= 0.0 {
            let r = disc.sqrt();
            [((-self.a1 + r) / 2.0).abs(), ((-self.a1 - r) / 2.0).abs()]
        } else {
            let m = ((self.a1 / 2.0).powi(2) + (-disc).sqrt().powi(2) / 4.0).sqrt();
            [m, m]
        }
    }
}

/// Cascade of biquad sections.
#[derive(Debug, Clone)]
pub struct FilterCoefficients {
    pub sections: Vec<Biquad>,
    pub sample_rate_hz: f64,
}

impl FilterCoefficients {
    /// Complex response of the full cascade at `freq_hz`.
    pub fn response_at(&self, freq_hz: f64) -> Complex64 {
        self.sections
            .iter()
            .map(|s| s.response_at(freq_hz, self.sample_rate_hz))
            .product()
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        self.response_at(freq_hz).norm()
    }

    pub fn pole_magnitudes(&self) -> Vec<f64> {
        self.sections
            .iter()
            .flat_map(|s| s.pole_magnitudes())
            .collect()
    }
}

/// Designs a Butterworth band-pass as a cascade of `spec.order` biquads.
///
/// The analog prototype is transformed low-pass -> band-pass and discretized
/// with the bilinear transform using prewarped edges, so the magnitude at the
/// band edges is exactly 1/sqrt(2) of the passband peak.
pub fn design_bandpass(spec: &FilterSpec) -> Result<FilterCoefficients, DspError> {
    spec.validate()?;
    let fs = spec.sample_rate_hz;
    let n = spec.order;
    let k = 2.0 * fs;

    // prewarped analog band edges
    let w_low = k * (PI * spec.low_cut_hz / fs).tan();
    let w_high = k * (PI * spec.high_cut_hz / fs).tan();
    let w0_sq = w_low * w_high;
    let bw = w_high - w_low;

    // Butterworth prototype poles on the unit circle (left half plane),
    // each mapped through s -> (s^2 + w0^2) / (bw * s).
    let mut z_poles: Vec<Complex64> = Vec::with_capacity(2 * n);
    for m in 0..n {
        let theta = PI / 2.0 + PI * (2.0 * m as f64 + 1.0) / (2.0 * n as f64);
        let proto = Complex64::new(theta.cos(), theta.sin());
        let pb = proto * bw;
        let disc = (pb * pb - Complex64::new(4.0 * w0_sq, 0.0)).sqrt();
        for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
            // bilinear: z = (k + s) / (k - s)
            z_poles.push((Complex64::new(k, 0.0) + s) / (Complex64::new(k, 0.0) - s));
        }
    }

    // Pair poles into real-coefficient sections. Complex poles pair with
    // their conjugates (which come from the mirrored prototype pole), real
    // poles pair among themselves.
    let mut sections: Vec<Biquad> = Vec::with_capacity(n);
    let mut real_poles: Vec<f64> = Vec::new();
    for z in &z_poles {
        if z.im.abs() < 1e-10 {
            real_poles.push(z.re);
        } else if z.im > 0.0 {
            sections.push(Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -2.0 * z.re,
                a2: z.norm_sqr(),
            });
        }
    }
    real_poles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for pair in real_poles.chunks(2) {
        debug_assert_eq!(pair.len(), 2);
        sections.push(Biquad {
            b0: 1.0,
            b1: 0.0,
            b2: -1.0,
            a1: -(pair[0] + pair[1]),
            a2: pair[0] * pair[1],
        });
    }
    debug_assert_eq!(sections.len(), n);

    // Normalize each section to unit magnitude at the digital frequency the
    // analog center maps to; the cascade then peaks at exactly 1 there.
    let f_center = (fs / PI) * (w0_sq.sqrt() / k).atan();
    for sec in &mut sections {
        let g = 1.0 / sec.response_at(f_center, fs).norm();
        sec.b0 *= g;
        sec.b1 *= g;
        sec.b2 *= g;
    }

    Ok(FilterCoefficients {
        sections,
        sample_rate_hz: fs,
    })
}

/// Causal single-pass filtering from zero initial state (transposed DF-II).
/// Output length equals input length.
pub fn filter_signal(samples: &[f64], coeffs: &FilterCoefficients) -> Result<Vec<f64>, DspError> {
    if let Some(idx) = samples.iter().position(|v| !v.is_finite()) {
        return Err(DspError::NonFiniteSample(idx));
    }
    let mut out = samples.to_vec();
    for sec in &coeffs.sections {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for x in out.iter_mut() {
            let y = sec.b0 * *x + s1;
            s1 = sec.b1 * *x - sec.a1 * y + s2;
            s2 = sec.b2 * *x - sec.a2 * y;
            *x = y;
        }
    }
    Ok(out)
}

/// Linear interpolation of `samples` (at `rate_in_hz`) onto the exact output
/// timestamps `k / rate_out_hz`. The output holds `floor(duration * rate_out)`
/// samples; timestamps past the final input sample hold its value.
pub fn oversample(samples: &[f64], rate_in_hz: f64, rate_out_hz: f64) -> Result<Vec<f64>, DspError> {
    if samples.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let n_in = samples.len();
    let n_out = (n_in as f64 * rate_out_hz / rate_in_hz).floor() as usize;
    let ratio = rate_in_hz / rate_out_hz;
    let mut out = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let pos = k as f64 * ratio;
        let i = pos.floor() as usize;
        let v = if i + 1 < n_in {
            let frac = pos - i as f64;
            samples[i] + frac * (samples[i + 1] - samples[i])
        } else {
            samples[n_in - 1]
        };
        out.push(v);
    }
    Ok(out)
}

/// Baseline amplitude over one window: absolute sub-window maxima, sorted
/// ascending, averaged over the lowest quartile.
#[derive(Debug, Clone)]
pub struct BaselineEstimate {
    pub amplitude_uv: f64,
    pub window_start_s: f64,
    pub sub_window_maxima: Vec<f64>,
}

/// Estimates the baseline amplitude from the first `window_s` of `filtered`.
pub fn estimate_baseline(
    filtered: &[f64],
    sample_rate_hz: f64,
    window_s: f64,
    sub_window_s: f64,
) -> Result<BaselineEstimate, DspError> {
    estimate_baseline_at(filtered, sample_rate_hz, 0.0, window_s, sub_window_s)
}

/// Same as [`estimate_baseline`] but over the window starting at
/// `window_start_s` (used by the rolling baseline mode).
pub fn estimate_baseline_at(
    filtered: &[f64],
    sample_rate_hz: f64,
    window_start_s: f64,
    window_s: f64,
    sub_window_s: f64,
) -> Result<BaselineEstimate, DspError> {
    let win = (window_s * sample_rate_hz).round() as usize;
    let sub = (sub_window_s * sample_rate_hz).round() as usize;
    let start = (window_start_s * sample_rate_hz).round() as usize;
    if sub == 0 || win < sub {
        return Err(DspError::SignalTooShort { needed: sub.max(1), got: win });
    }
    if filtered.len() < start + win {
        return Err(DspError::SignalTooShort {
            needed: start + win,
            got: filtered.len(),
        });
    }
    let n_sub = win / sub;
    let mut maxima: Vec<f64> = (0..n_sub)
        .map(|j| {
            filtered[start + j * sub..start + (j + 1) * sub]
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .collect();
    maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = (n_sub / 4).max(1);
    let amplitude_uv = maxima[..q].iter().sum::<f64>() / q as f64;
    Ok(BaselineEstimate {
        amplitude_uv,
        window_start_s,
        sub_window_maxima: maxima,
    })
}
