//! Streaming HR/RR estimation.
//!
//! [`Estimator`] consumes per-frame observations in time order and keeps a
//! sliding window of recent samples. Whenever an observation crosses a
//! whole-second boundary it analyzes the window and emits one
//! [`VitalsEstimate`] for that second:
//!
//! 1. nothing is reported until the warm-up for a rate has elapsed (2 s for
//!    HR, 6 s for RR by default);
//! 2. the window is resampled, transformed and peak-picked per band, giving
//!    this second's raw HR and RR;
//! 3. the reported values are the mean of the last `smooth_n` raws.
//!
//! Absent values always carry a [`Reason`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roi::{Channel, HueMask, RoiSample};
use crate::signal::{self, Band, IppgSeries, SignalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("observation at {got} s arrived after {last} s")]
    OutOfOrder { last: f64, got: f64 },
    #[error("non-finite timestamp")]
    BadTimestamp,
    #[error("invalid estimator config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub channel: Channel,
    /// Seconds of history analyzed per estimate.
    pub window_s: f64,
    pub hr_band: Band,
    pub rr_band: Band,
    pub hr_warmup_s: f64,
    pub rr_warmup_s: f64,
    /// Number of trailing raw estimates averaged into the reported value.
    pub smooth_n: usize,
    pub resample_hz: f64,
    pub zero_pad_factor: usize,
    pub max_gap_s: f64,
    pub hue_mask: HueMask,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            channel: Channel::Hue,
            window_s: 11.0,
            hr_band: Band::HEART,
            rr_band: Band::RESPIRATION,
            hr_warmup_s: 2.0,
            rr_warmup_s: 6.0,
            smooth_n: 10,
            resample_hz: 9.0,
            zero_pad_factor: 4,
            max_gap_s: 0.5,
            hue_mask: HueMask::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |m: String| Err(EstimatorError::Config(m));
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return bad(format!("window_s must be positive, got {}", self.window_s));
        }
        if !(self.hr_warmup_s >= 0.0 && self.hr_warmup_s <= self.rr_warmup_s && self.rr_warmup_s <= self.window_s) {
            return bad(format!(
                "need 0 ≤ hr_warmup_s ≤ rr_warmup_s ≤ window_s, got {} / {} / {}",
                self.hr_warmup_s, self.rr_warmup_s, self.window_s
            ));
        }
        if self.smooth_n == 0 {
            return bad("smooth_n must be ≥ 1".into());
        }
        if self.zero_pad_factor == 0 {
            return bad("zero_pad_factor must be ≥ 1".into());
        }
        if !(self.max_gap_s > 0.0) {
            return bad(format!("max_gap_s must be positive, got {}", self.max_gap_s));
        }
        for band in [self.hr_band, self.rr_band] {
            Band::new(band.lo_hz, band.hi_hz).map_err(|e| EstimatorError::Config(e.to_string()))?;
        }
        signal::check_nyquist(self.resample_hz, &[self.hr_band, self.rr_band])
            .map_err(|e| EstimatorError::Config(e.to_string()))
    }
}

/// Why a rate is missing from an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    WarmingUp,
    FlatSignal,
    NoFace,
    InsufficientBandResolution,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::WarmingUp => "warming-up",
            Reason::FlatSignal => "flat-signal",
            Reason::NoFace => "no-face",
            Reason::InsufficientBandResolution => "insufficient-band-resolution",
        }
    }
}

/// One second's output. Serializes to the JSON-lines record
/// `{"t", "hr", "rr", "hr_raw", "rr_raw", "reason", "channel", "samples"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalsEstimate {
    #[serde(rename = "t")]
    pub t_s: u64,
    #[serde(rename = "hr")]
    pub hr_bpm: Option<f64>,
    #[serde(rename = "rr")]
    pub rr_bpm: Option<f64>,
    pub hr_raw: Option<f64>,
    pub rr_raw: Option<f64>,
    pub reason: Option<Reason>,
    pub channel: Channel,
    #[serde(rename = "samples")]
    pub sample_count: usize,
    #[serde(skip)]
    pub window_used_s: f64,
}

/// Trailing mean over at most `cap` values.
#[derive(Debug, Clone)]
struct Trailing {
    cap: usize,
    values: VecDeque<f64>,
}

impl Trailing {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            values: VecDeque::with_capacity(cap),
        }
    }

    fn push(&mut self, v: f64) -> f64 {
        if self.values.len() == self.cap {
            self.values.pop_front();
        }
        self.values.push_back(v);
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct Estimator {
    cfg: EstimatorConfig,
    window: VecDeque<(f64, f64)>,
    last_t: Option<f64>,
    current_second: Option<u64>,
    first_sample_t: Option<f64>,
    second_samples: usize,
    second_missing: usize,
    hr_hist: Trailing,
    rr_hist: Trailing,
}

impl Estimator {
    pub fn new(cfg: EstimatorConfig) -> Result<Self, EstimatorError> {
        cfg.validate()?;
        Ok(Self {
            window: VecDeque::new(),
            last_t: None,
            current_second: None,
            first_sample_t: None,
            second_samples: 0,
            second_missing: 0,
            hr_hist: Trailing::new(cfg.smooth_n),
            rr_hist: Trailing::new(cfg.smooth_n),
            cfg,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// Feeds one observation. Samples with no contributing pixels count as a
    /// frame without a usable face.
    ///
    /// Returns the estimate for the latest whole second crossed by this
    /// observation, if any. Seconds skipped entirely by a gap in the input do
    /// not get their own estimate.
    pub fn push_sample(&mut self, s: &RoiSample) -> Result<Option<VitalsEstimate>, EstimatorError> {
        if !s.is_usable() {
            return self.push_missing(s.timestamp_s);
        }
        let out = self.advance(s.timestamp_s)?;
        self.window.push_back((s.timestamp_s, s.value));
        self.first_sample_t.get_or_insert(s.timestamp_s);
        self.second_samples += 1;
        Ok(out)
    }

    /// Records a frame at `timestamp_s` that produced no observation.
    pub fn push_missing(&mut self, timestamp_s: f64) -> Result<Option<VitalsEstimate>, EstimatorError> {
        let out = self.advance(timestamp_s)?;
        self.second_missing += 1;
        Ok(out)
    }

    fn advance(&mut self, t: f64) -> Result<Option<VitalsEstimate>, EstimatorError> {
        if !t.is_finite() || t < 0.0 {
            return Err(EstimatorError::BadTimestamp);
        }
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(EstimatorError::OutOfOrder { last, got: t });
            }
        }
        self.last_t = Some(t);
        let sec = t.floor() as u64;
        match self.current_second {
            None => {
                self.current_second = Some(sec);
                Ok(None)
            }
            Some(cur) if sec > cur => {
                let est = self.estimate_at(sec);
                self.current_second = Some(sec);
                self.second_samples = 0;
                self.second_missing = 0;
                Ok(Some(est))
            }
            Some(_) => Ok(None),
        }
    }

    fn estimate_at(&mut self, boundary: u64) -> VitalsEstimate {
        let b = boundary as f64;
        let horizon = b - self.cfg.window_s;
        while self.window.front().is_some_and(|&(t, _)| t < horizon) {
            self.window.pop_front();
        }
        let mut est = VitalsEstimate {
            t_s: boundary,
            hr_bpm: None,
            rr_bpm: None,
            hr_raw: None,
            rr_raw: None,
            reason: None,
            channel: self.cfg.channel,
            sample_count: self.window.len(),
            window_used_s: match (self.window.front(), self.window.back()) {
                (Some(a), Some(z)) => z.0 - a.0,
                _ => 0.0,
            },
        };

        let elapsed = self.first_sample_t.map(|t0| b - t0.floor());
        let ready = |warmup: f64| b >= warmup && elapsed.is_some_and(|e| e >= warmup);
        let (hr_ready, rr_ready) = (ready(self.cfg.hr_warmup_s), ready(self.cfg.rr_warmup_s));

        if self.second_samples == 0 && self.second_missing > 0 {
            est.reason = Some(Reason::NoFace);
            return est;
        }
        if self.first_sample_t.is_none() {
            est.reason = Some(Reason::NoFace);
            return est;
        }
        if !hr_ready {
            est.reason = Some(Reason::WarmingUp);
            return est;
        }

        let (hr, rr) = match self.analyze(rr_ready) {
            Ok(pair) => pair,
            Err(reason) => {
                est.reason = Some(reason);
                return est;
            }
        };
        let mut reasons = Vec::new();
        match hr {
            Ok(raw) => {
                est.hr_raw = Some(raw);
                est.hr_bpm = Some(self.hr_hist.push(raw));
            }
            Err(r) => reasons.push(r),
        }
        match rr {
            Some(Ok(raw)) => {
                est.rr_raw = Some(raw);
                est.rr_bpm = Some(self.rr_hist.push(raw));
            }
            Some(Err(r)) => reasons.push(r),
            None => reasons.push(Reason::WarmingUp),
        }
        est.reason = reasons.first().copied();
        est
    }

    /// Raw per-minute rates for the current window. The outer error means
    /// neither rate can be computed.
    #[allow(clippy::type_complexity)]
    fn analyze(&self, want_rr: bool) -> Result<(Result<f64, Reason>, Option<Result<f64, Reason>>), Reason> {
        let series = IppgSeries::new(self.window.iter().copied().collect(), self.cfg.channel)
            .map_err(|_| Reason::InsufficientBandResolution)?;
        let uniform = signal::resample_uniform(&series, self.cfg.resample_hz, self.cfg.max_gap_s)
            .map_err(|_| Reason::InsufficientBandResolution)?;
        if is_flat(&uniform.values) {
            return Err(Reason::FlatSignal);
        }
        let sp = signal::spectrum(&uniform, self.cfg.zero_pad_factor).map_err(|_| Reason::InsufficientBandResolution)?;
        let pick = |band: &Band| {
            signal::band_peak(&sp, band)
                .map(|p| p.rate_per_min)
                .map_err(|e| match e {
                    SignalError::EmptyBand { .. } => Reason::InsufficientBandResolution,
                    _ => Reason::InsufficientBandResolution,
                })
        };
        let hr = pick(&self.cfg.hr_band);
        let rr = want_rr.then(|| pick(&self.cfg.rr_band));
        Ok((hr, rr))
    }
}

/// True when the window carries no variation to analyze.
fn is_flat(values: &[f64]) -> bool {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scale = lo.abs().max(hi.abs());
    hi - lo <= 16.0 * f64::EPSILON * scale
}

/// Drives an estimator over an ordered sample sequence, collecting every
/// emitted estimate.
pub fn estimate_series<'a>(
    cfg: &EstimatorConfig,
    samples: impl IntoIterator<Item = &'a RoiSample>,
) -> Result<Vec<VitalsEstimate>, EstimatorError> {
    let mut est = Estimator::new(cfg.clone())?;
    let mut out = Vec::new();
    for s in samples {
        if let Some(e) = est.push_sample(s)? {
            out.push(e);
        }
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_jsonl<W: std::io::Write>(mut out: W, estimates: &[VitalsEstimate]) -> std::io::Result<()> {
    for e in estimates {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: std::io::BufRead>(reader: R) -> Result<Vec<VitalsEstimate>, String> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

/// CSV with the JSON-lines fields as columns; absent values are blank.
pub fn write_csv<W: std::io::Write>(mut out: W, estimates: &[VitalsEstimate]) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writeln!(out, "t,hr,rr,hr_raw,rr_raw,reason,channel,samples")?;
    for e in estimates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.t_s,
            opt(e.hr_bpm),
            opt(e.rr_bpm),
            opt(e.hr_raw),
            opt(e.rr_raw),
            e.reason.map_or("", Reason::as_str),
            e.channel.as_str(),
            e.sample_count
        )?;
    }
    out.flush()
}
