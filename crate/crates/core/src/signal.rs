//! From an irregular iPPG series to per-minute rates.
//!
//! The chain is: linear resampling onto a uniform grid, mean removal, a Hann
//! window, a zero-padded DFT, and a band-limited argmax refined by parabolic
//! interpolation. [`band_filter`] isolates a band in the time domain by
//! masking DFT bins, which is what the inspection plots use.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roi::{Channel, RoiSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("insufficient data: need at least {needed} samples, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("series timestamps must be strictly increasing (sample {index})")]
    NotIncreasing { index: usize },
    #[error("series value at sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("resample rate {rate_hz} Hz does not clear the Nyquist limit of {min_hz} Hz")]
    RateTooLow { rate_hz: f64, min_hz: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no spectrum bin falls inside band ({lo_hz}, {hi_hz}) Hz")]
    EmptyBand { lo_hz: f64, hi_hz: f64 },
}

/// Checks that a resample rate can represent every frequency in `bands`.
pub fn check_nyquist(rate_hz: f64, bands: &[Band]) -> Result<(), SignalError> {
    let top = bands.iter().map(|b| b.hi_hz).fold(0.0, f64::max);
    let min_hz = 2.0 * top;
    if rate_hz.is_finite() && rate_hz > min_hz {
        Ok(())
    } else {
        Err(SignalError::RateTooLow { rate_hz, min_hz })
    }
}

/// Minimum length accepted by [`spectrum`] and [`band_filter`].
pub const MIN_SPECTRUM_LEN: usize = 8;

/// Timestamped scalar observations, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct IppgSeries {
    samples: Vec<(f64, f64)>,
    channel: Channel,
}

impl IppgSeries {
    pub fn new(samples: Vec<(f64, f64)>, channel: Channel) -> Result<Self, SignalError> {
        for (i, &(t, v)) in samples.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(SignalError::NonFinite { index: i });
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(SignalError::NotIncreasing { index: i });
            }
        }
        Ok(Self { samples, channel })
    }

    /// Builds a series from ROI samples, skipping unusable ones.
    pub fn from_roi_samples<'a>(
        samples: impl IntoIterator<Item = &'a RoiSample>,
        channel: Channel,
    ) -> Result<Self, SignalError> {
        Self::new(
            samples
                .into_iter()
                .filter(|s| s.is_usable())
                .map(|s| (s.timestamp_s, s.value))
                .collect(),
            channel,
        )
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Seconds between first and last sample.
    pub fn span_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.0 - a.0,
            _ => 0.0,
        }
    }
}

/// A uniformly sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    pub start_s: f64,
    pub rate_hz: f64,
    pub values: Vec<f64>,
    /// `true` where the value was held from the nearest sample because no
    /// real sample lay within the gap threshold.
    pub gap_flags: Vec<bool>,
}

impl UniformSeries {
    pub fn new(start_s: f64, rate_hz: f64, values: Vec<f64>) -> Self {
        let gap_flags = vec![false; values.len()];
        Self {
            start_s,
            rate_hz,
            values,
            gap_flags,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.rate_hz
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.start_s + i as f64 / self.rate_hz
    }

    pub fn gap_count(&self) -> usize {
        self.gap_flags.iter().filter(|&&g| g).count()
    }
}

/// Linearly interpolates `s` onto a grid of `rate_hz` starting at the first
/// sample.
///
/// Grid points farther than `max_gap_s` from every real sample hold the
/// nearest sample's value and are flagged in [`UniformSeries::gap_flags`].
///
/// ```
/// use huevitals::roi::Channel;
/// use huevitals::signal::{resample_uniform, IppgSeries};
///
/// let s = IppgSeries::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], Channel::Hue).unwrap();
/// let u = resample_uniform(&s, 4.5, 0.5).unwrap();
/// assert_eq!(u.len(), 10);
/// assert!((u.values[9] - 2.0).abs() < 1e-12);
/// ```
pub fn resample_uniform(s: &IppgSeries, rate_hz: f64, max_gap_s: f64) -> Result<UniformSeries, SignalError> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(SignalError::InvalidParameter(format!(
            "resample rate must be positive, got {rate_hz}"
        )));
    }
    if !(max_gap_s > 0.0) {
        return Err(SignalError::InvalidParameter(format!(
            "max_gap_s must be positive, got {max_gap_s}"
        )));
    }
    let pts = &s.samples;
    if pts.len() < 2 {
        return Err(SignalError::InsufficientData {
            needed: 2,
            have: pts.len(),
        });
    }
    let t0 = pts[0].0;
    let span = pts[pts.len() - 1].0 - t0;
    // The epsilon keeps grids like 2 s × 2 Hz from losing their last point
    // to rounding.
    let n = (span * rate_hz + 1e-9).floor() as usize + 1;

    let mut values = Vec::with_capacity(n);
    let mut gap_flags = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let t = t0 + i as f64 / rate_hz;
        while seg + 2 < pts.len() && pts[seg + 1].0 <= t {
            seg += 1;
        }
        let (ta, va) = pts[seg];
        let (tb, vb) = pts[seg + 1];
        let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        let (da, db) = ((t - ta).abs(), (tb - t).abs());
        if da.min(db) > max_gap_s {
            values.push(if da <= db { va } else { vb });
            gap_flags.push(true);
        } else {
            values.push(va + (vb - va) * frac);
            gap_flags.push(false);
        }
    }
    Ok(UniformSeries {
        start_s: t0,
        rate_hz,
        values,
        gap_flags,
    })
}

/// One-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin centers `k · rate / fft_len` for `k = 0..=fft_len/2`.
    pub freqs_hz: Vec<f64>,
    /// Unnormalized DFT magnitudes `|X_k|`.
    pub mags: Vec<f64>,
    pub window_len_s: f64,
    pub fft_len: usize,
}

impl Spectrum {
    pub fn bin_width_hz(&self) -> f64 {
        self.freqs_hz.get(1).copied().unwrap_or(0.0)
    }

    /// Signal energy recovered from the one-sided magnitudes via Parseval:
    /// equals the sum of squared windowed time samples.
    pub fn parseval_energy(&self) -> f64 {
        let n = self.fft_len;
        let last = self.mags.len() - 1;
        let mut acc = 0.0;
        for (k, m) in self.mags.iter().enumerate() {
            let w = if k == 0 || (k == last && n % 2 == 0) { 1.0 } else { 2.0 };
            acc += w * m * m;
        }
        acc / n as f64
    }

    /// Renders `freq_hz,magnitude` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,magnitude\n");
        for (f, m) in self.freqs_hz.iter().zip(&self.mags) {
            out.push_str(&format!("{f},{m}\n"));
        }
        out
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mean-removed, Hann-windowed samples that [`spectrum`] transforms.
pub fn windowed(values: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values
        .iter()
        .zip(hann(values.len()))
        .map(|(v, w)| (v - mean) * w)
        .collect()
}

/// Magnitude spectrum of `u` after mean removal and a Hann window, zero padded
/// to the next power of two at or above `len × zero_pad_factor`.
pub fn spectrum(u: &UniformSeries, zero_pad_factor: usize) -> Result<Spectrum, SignalError> {
    let n = u.values.len();
    if n < MIN_SPECTRUM_LEN {
        return Err(SignalError::InsufficientData {
            needed: MIN_SPECTRUM_LEN,
            have: n,
        });
    }
    if zero_pad_factor == 0 {
        return Err(SignalError::InvalidParameter("zero_pad_factor must be ≥ 1".into()));
    }
    let fft_len = (n * zero_pad_factor).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = windowed(&u.values)
        .into_iter()
        .map(|x| Complex::new(x, 0.0))
        .collect();
    buf.resize(fft_len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(fft_len).process(&mut buf);

    let half = fft_len / 2;
    let df = u.rate_hz / fft_len as f64;
    Ok(Spectrum {
        freqs_hz: (0..=half).map(|k| k as f64 * df).collect(),
        mags: buf[..=half].iter().map(|c| c.norm()).collect(),
        window_len_s: n as f64 / u.rate_hz,
        fft_len,
    })
}

/// A physiological frequency band, inclusive at both ends when picking bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    /// Heart rate, 48–132 per minute.
    pub const HEART: Band = Band {
        lo_hz: 0.8,
        hi_hz: 2.2,
    };
    /// Respiration, 10.8–30 per minute.
    pub const RESPIRATION: Band = Band {
        lo_hz: 0.18,
        hi_hz: 0.5,
    };

    pub fn new(lo_hz: f64, hi_hz: f64) -> Result<Self, SignalError> {
        if !(lo_hz.is_finite() && hi_hz.is_finite() && lo_hz > 0.0 && lo_hz < hi_hz) {
            return Err(SignalError::InvalidParameter(format!(
                "band needs 0 < lo < hi, got ({lo_hz}, {hi_hz})"
            )));
        }
        Ok(Self { lo_hz, hi_hz })
    }

    #[inline]
    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo_hz && f <= self.hi_hz
    }

    /// Per-minute bounds of the band.
    pub fn per_minute(&self) -> (f64, f64) {
        (self.lo_hz * 60.0, self.hi_hz * 60.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPeak {
    pub freq_hz: f64,
    pub mag: f64,
    pub rate_per_min: f64,
}

/// Strongest in-band bin, refined by a parabola through it and its two
/// neighbors and clamped back into the band. Ties go to the lower frequency.
pub fn band_peak(sp: &Spectrum, band: &Band) -> Result<BandPeak, SignalError> {
    let mut best: Option<usize> = None;
    for (k, &f) in sp.freqs_hz.iter().enumerate() {
        if band.contains(f) && best.is_none_or(|b| sp.mags[k] > sp.mags[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or(SignalError::EmptyBand {
        lo_hz: band.lo_hz,
        hi_hz: band.hi_hz,
    })?;

    let b = sp.mags[k];
    let (mut offset, mut mag) = (0.0, b);
    if k > 0 && k + 1 < sp.mags.len() {
        let (a, c) = (sp.mags[k - 1], sp.mags[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            mag = b - 0.25 * (a - c) * offset;
        }
    }
    let freq_hz = ((k as f64 + offset) * sp.bin_width_hz()).clamp(band.lo_hz, band.hi_hz);
    Ok(BandPeak {
        freq_hz,
        mag,
        rate_per_min: 60.0 * freq_hz,
    })
}

/// Zero-phase band isolation: zeroes every DFT bin (and its mirror) whose
/// frequency lies outside `band`, then inverts.
pub fn band_filter(u: &UniformSeries, band: &Band) -> Result<UniformSeries, SignalError> {
    let n = u.values.len();
    if n < MIN_SPECTRUM_LEN {
        return Err(SignalError::InsufficientData {
            needed: MIN_SPECTRUM_LEN,
            have: n,
        });
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = u.values.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * u.rate_hz / n as f64;
        if !band.contains(f) {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(UniformSeries {
        start_s: u.start_s,
        rate_hz: u.rate_hz,
        values: buf.iter().map(|c| c.re * scale).collect(),
        gap_flags: u.gap_flags.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Direct O(n²) DFT magnitudes of the zero-padded, windowed input.
    fn dft_oracle(values: &[f64], pad: usize) -> Vec<f64> {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let x: Vec<f64> = (0..n)
            .map(|i| (values[i] - mean) * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
            .collect();
        let big_n = (n * pad).next_power_of_two();
        (0..=big_n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, xi) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * i % big_n) as f64 / big_n as f64;
                    re += xi * ang.cos();
                    im += xi * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    fn tone(freq: f64, rate: f64, n: usize, phase: f64) -> UniformSeries {
        UniformSeries::new(
            0.0,
            rate,
            (0..n)
                .map(|i| (2.0 * PI * freq * i as f64 / rate + phase).cos())
                .collect(),
        )
    }

    fn series(pts: &[(f64, f64)]) -> IppgSeries {
        IppgSeries::new(pts.to_vec(), Channel::Hue).unwrap()
    }

    #[test]
    fn series_validation() {
        assert!(matches!(
            IppgSeries::new(vec![(0.0, 1.0), (0.0, 2.0)], Channel::Hue),
            Err(SignalError::NotIncreasing { index: 1 })
        ));
        assert!(matches!(
            IppgSeries::new(vec![(0.0, f64::NAN)], Channel::Hue),
            Err(SignalError::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn linear_ramp() {
        let s = series(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        let u = resample_uniform(&s, 2.0, 0.5).unwrap();
        assert_eq!(u.values, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(u.gap_count(), 0);
        assert!(resample_uniform(&s, 0.0, 0.5).is_err());
        assert!(resample_uniform(&s, 2.0, 0.0).is_err());
    }

    #[test]
    fn nyquist_check() {
        assert!(check_nyquist(9.0, &[Band::HEART, Band::RESPIRATION]).is_ok());
        assert!(matches!(
            check_nyquist(4.4, &[Band::HEART]),
            Err(SignalError::RateTooLow { .. })
        ));
    }

    #[test]
    fn output_length_formula() {
        let s = series(&[(0.3, 1.0), (1.0, 1.0), (3.55, 1.0)]);
        let u = resample_uniform(&s, 9.0, 10.0).unwrap();
        assert_eq!(u.len(), ((3.55f64 - 0.3) * 9.0).floor() as usize + 1);
        assert_eq!(u.start_s, 0.3);
    }

    #[test]
    fn constant_series_survives_gaps() {
        let s = series(&[(0.0, 3.5), (0.1, 3.5), (4.0, 3.5), (4.1, 3.5)]);
        let u = resample_uniform(&s, 9.0, 0.5).unwrap();
        assert!(u.values.iter().all(|&v| v == 3.5));
        assert!(u.gap_count() > 0);
    }

    #[test]
    fn gap_holds_nearest_sample() {
        let s = series(&[(0.0, 0.0), (3.0, 9.0)]);
        let u = resample_uniform(&s, 5.0, 0.5).unwrap();
        // t = 0.4 is within 0.5 s of the first sample: interpolated.
        assert!(!u.gap_flags[2]);
        assert!((u.values[2] - 1.2).abs() < 1e-12);
        // t = 1.0 is 1 s from the first sample: held and flagged.
        assert!(u.gap_flags[5]);
        assert_eq!(u.values[5], 0.0);
        // t = 2.8 is nearest the second sample.
        assert!(!u.gap_flags[14]);
        assert!(u.gap_flags[11]);
        assert_eq!(u.values[11], 9.0);
    }

    #[test]
    fn too_few_samples() {
        let s = series(&[(0.0, 1.0)]);
        assert!(matches!(
            resample_uniform(&s, 9.0, 0.5),
            Err(SignalError::InsufficientData { needed: 2, have: 1 })
        ));
    }

    #[test]
    fn jittered_eleven_second_window_peaks_at_1_1_hz() {
        // 99 irregular samples spread over 11 s
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t: Vec<f64> = (0..99).map(|i| i as f64 * 11.0 / 99.0 + rng.random_range(0.0..0.09)).collect();
        t.sort_by(f64::total_cmp);
        let pts: Vec<_> = t.iter().map(|&t| (t, (2.0 * PI * 1.1 * t).sin())).collect();
        let u = resample_uniform(&series(&pts), 9.0, 0.5).unwrap();
        let sp = spectrum(&u, 1).unwrap();
        let k = sp
            .mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((sp.freqs_hz[k] - 1.1).abs() <= sp.bin_width_hz(), "{}", sp.freqs_hz[k]);
    }

    #[test]
    fn pure_bin_tone_has_no_far_leakage() {
        let (n, rate) = (64, 8.0);
        let k0 = 10;
        let u = tone(k0 as f64 * rate / n as f64, rate, n, 0.3);
        let sp = spectrum(&u, 1).unwrap();
        assert_eq!(sp.fft_len, 64);
        let peak = sp.mags[k0];
        assert!(sp.mags.iter().all(|&m| m <= peak));
        for (k, &m) in sp.mags.iter().enumerate() {
            if k.abs_diff(k0) > 1 {
                assert!(m < 0.01 * peak, "bin {k}: {m}");
            }
        }
    }

    #[test]
    fn constant_input_has_empty_spectrum() {
        let u = UniformSeries::new(0.0, 9.0, vec![0.42; 50]);
        let sp = spectrum(&u, 4).unwrap();
        assert!(sp.mags.iter().all(|&m| m < 1e-12));
    }

    #[test]
    fn spectrum_too_short() {
        let u = UniformSeries::new(0.0, 9.0, vec![1.0; 7]);
        assert!(matches!(spectrum(&u, 4), Err(SignalError::InsufficientData { .. })));
        assert!(matches!(band_filter(&u, &Band::HEART), Err(SignalError::InsufficientData { .. })));
    }

    #[test]
    fn spectrum_geometry() {
        let u = UniformSeries::new(0.0, 9.0, vec![0.0; 99]);
        let sp = spectrum(&u, 4).unwrap();
        assert_eq!(sp.fft_len, 512);
        assert_eq!(sp.mags.len(), 257);
        assert_eq!(sp.freqs_hz[0], 0.0);
        assert!((sp.freqs_hz.last().unwrap() - 4.5).abs() < 1e-12);
        assert!((sp.window_len_s - 11.0).abs() < 1e-12);
    }

    #[test]
    fn random_64_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let vals: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = UniformSeries::new(0.0, 9.0, vals.clone());
        for pad in [1, 4] {
            let sp = spectrum(&u, pad).unwrap();
            let oracle = dft_oracle(&vals, pad);
            let scale = oracle.iter().cloned().fold(0.0, f64::max);
            for (a, b) in sp.mags.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn heart_peak_at_1_1_hz_is_66() {
        let u = tone(1.1, 9.0, 99, 0.0);
        let p = band_peak(&spectrum(&u, 4).unwrap(), &Band::HEART).unwrap();
        assert!((p.rate_per_min - 66.0).abs() <= 1.0, "{}", p.rate_per_min);
        assert_eq!(p.rate_per_min, 60.0 * p.freq_hz);
    }

    #[test]
    fn respiration_peak_at_0_3_hz_is_18() {
        let u = tone(0.3, 9.0, 99, 0.7);
        let p = band_peak(&spectrum(&u, 4).unwrap(), &Band::RESPIRATION).unwrap();
        assert!((p.rate_per_min - 18.0).abs() <= 1.0, "{}", p.rate_per_min);
    }

    #[test]
    fn two_hertz_is_120() {
        // integer number of cycles on a bin-aligned grid: interpolation is exact
        let u = tone(2.0, 8.0, 64, 0.0);
        let p = band_peak(&spectrum(&u, 1).unwrap(), &Band::HEART).unwrap();
        assert!((p.rate_per_min - 120.0).abs() < 1e-9, "{}", p.rate_per_min);
    }

    #[test]
    fn peak_ties_go_low() {
        let sp = Spectrum {
            freqs_hz: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            mags: vec![0.0, 5.0, 1.0, 5.0, 0.0],
            window_len_s: 1.0,
            fft_len: 8,
        };
        let p = band_peak(&sp, &Band::new(0.5, 3.5).unwrap()).unwrap();
        assert!(p.freq_hz < 1.5);
    }

    #[test]
    fn peak_is_clamped_into_band() {
        // Rising toward the upper band edge: the parabola would put the peak
        // above 2.2 Hz.
        let sp = Spectrum {
            freqs_hz: (0..6).map(|k| k as f64 * 0.5).collect(),
            mags: vec![0.0, 0.0, 1.0, 2.0, 10.0, 9.0],
            window_len_s: 1.0,
            fft_len: 10,
        };
        let p = band_peak(&sp, &Band::new(0.8, 2.2).unwrap()).unwrap();
        assert!(p.freq_hz <= 2.2 && p.freq_hz >= 0.8);
    }

    #[test]
    fn empty_band_is_an_error() {
        let sp = Spectrum {
            freqs_hz: vec![0.0, 1.0, 2.0],
            mags: vec![0.0, 1.0, 0.0],
            window_len_s: 1.0,
            fft_len: 4,
        };
        assert!(matches!(
            band_peak(&sp, &Band::new(1.2, 1.8).unwrap()),
            Err(SignalError::EmptyBand { .. })
        ));
    }

    #[test]
    fn band_validation() {
        assert!(Band::new(0.0, 1.0).is_err());
        assert!(Band::new(1.0, 1.0).is_err());
        assert!(Band::new(0.8, 2.2).is_ok());
        assert_eq!(Band::HEART.per_minute(), (48.0, 132.0));
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma).powi(2);
            sbb += (y - mb).powi(2);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn band_filter_separates_two_tones() {
        let (rate, n) = (9.0, 99);
        let t = |i: usize| i as f64 / rate;
        let heart: Vec<f64> = (0..n).map(|i| (2.0 * PI * 1.1 * t(i)).sin()).collect();
        let mixed: Vec<f64> = (0..n)
            .map(|i| heart[i] + 0.8 * (2.0 * PI * 0.3 * t(i)).sin())
            .collect();
        let out = band_filter(&UniformSeries::new(0.0, rate, mixed), &Band::HEART).unwrap();
        assert_eq!(out.len(), n);
        let edge = n / 10;
        let r = correlation(&out.values[edge..n - edge], &heart[edge..n - edge]);
        assert!(r > 0.99, "correlation {r}");
    }

    #[test]
    fn band_filter_removes_out_of_band_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 256;
        let white: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = band_filter(&UniformSeries::new(0.0, 9.0, white), &Band::HEART).unwrap();
        let mut buf: Vec<Complex<f64>> = out.values.iter().map(|&x| Complex::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let (mut inside, mut total) = (0.0, 0.0);
        for (k, c) in buf.iter().enumerate() {
            let f = k.min(n - k) as f64 * 9.0 / n as f64;
            let e = c.norm_sqr();
            total += e;
            if Band::HEART.contains(f) {
                inside += e;
            }
        }
        assert!((total - inside) < 0.01 * total);
    }

    #[test]
    fn band_filter_kills_constant() {
        let out = band_filter(&UniformSeries::new(0.0, 9.0, vec![7.0; 40]), &Band::RESPIRATION).unwrap();
        assert!(out.values.iter().all(|v| v.abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn parseval_holds(vals in proptest::collection::vec(-100.0f64..100.0, 8..200), pad in 1usize..5) {
            let u = UniformSeries::new(0.0, 9.0, vals.clone());
            let sp = spectrum(&u, pad).unwrap();
            let time: f64 = windowed(&vals).iter().map(|x| x * x).sum();
            let freq = sp.parseval_energy();
            prop_assert!((time - freq).abs() <= 1e-6 * time.max(1e-300), "{time} vs {freq}");
        }

        #[test]
        fn peak_frequency_is_scale_invariant(
            vals in proptest::collection::vec(-1.0f64..1.0, 16..128),
            k in 1e-3f64..1e3,
        ) {
            let u = UniformSeries::new(0.0, 9.0, vals.clone());
            let scaled = UniformSeries::new(0.0, 9.0, vals.iter().map(|v| v * k).collect());
            let a = band_peak(&spectrum(&u, 4).unwrap(), &Band::HEART).unwrap();
            let b = band_peak(&spectrum(&scaled, 4).unwrap(), &Band::HEART).unwrap();
            prop_assert!((a.freq_hz - b.freq_hz).abs() < 1e-9);
        }

        #[test]
        fn spectrum_matches_brute_force(vals in proptest::collection::vec(-1.0f64..1.0, 8..=256)) {
            let u = UniformSeries::new(0.0, 9.0, vals.clone());
            let sp = spectrum(&u, 1).unwrap();
            let oracle = dft_oracle(&vals, 1);
            let scale = oracle.iter().cloned().fold(0.0, f64::max);
            for (a, b) in sp.mags.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-9 * scale);
            }
        }
    }
}
