//! Offline runs: frames in, per-second estimates out.

use rayon::prelude::*;

use crate::estimator::{Estimator, EstimatorConfig, VitalsEstimate};
use crate::ingest::{Frame, IngestError};
use crate::roi::{self, ForeheadRect, LandmarkTrack, RoiSample};
use crate::signal::{self, IppgSeries, Spectrum};
use crate::Error;

/// Frames reduced in parallel before their samples are fed in order.
const CHUNK: usize = 64;

/// Where the forehead rectangle comes from.
#[derive(Debug, Clone)]
pub enum RoiSource {
    /// Per-frame landmarks. Frames without an entry count as no face.
    Landmarks(LandmarkTrack),
    /// The same rectangle on every frame.
    Fixed(ForeheadRect),
}

impl RoiSource {
    fn rect_for(&self, frame: &Frame) -> Result<Option<ForeheadRect>, Error> {
        match self {
            RoiSource::Fixed(rect) => {
                if !rect.fits(frame.width, frame.height) {
                    return Err(Error::FrameRoi {
                        frame: frame.index,
                        source: roi::RoiError::Geometry {
                            left: rect.left as i64,
                            top: rect.top as i64,
                            right: rect.right as i64,
                            bottom: rect.bottom as i64,
                        },
                    });
                }
                Ok(Some(*rect))
            }
            RoiSource::Landmarks(track) => match track.get(frame.index) {
                None => Ok(None),
                Some(lm) => roi::forehead_from_landmarks(lm, frame.width, frame.height)
                    .map(Some)
                    .map_err(|source| Error::FrameRoi {
                        frame: frame.index,
                        source,
                    }),
            },
        }
    }
}

/// What one frame contributed.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Sample(RoiSample),
    NoFace { timestamp_s: f64 },
}

impl Observation {
    pub fn timestamp_s(&self) -> f64 {
        match self {
            Observation::Sample(s) => s.timestamp_s,
            Observation::NoFace { timestamp_s } => *timestamp_s,
        }
    }
}

pub fn observe_frame(frame: &Frame, source: &RoiSource, cfg: &EstimatorConfig) -> Result<Observation, Error> {
    Ok(match source.rect_for(frame)? {
        None => Observation::NoFace {
            timestamp_s: frame.timestamp_s,
        },
        Some(rect) => Observation::Sample(roi::observe(frame, &rect, cfg.channel, &cfg.hue_mask)),
    })
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub estimates: Vec<VitalsEstimate>,
    /// Every per-frame sample, usable or not, in stream order.
    pub samples: Vec<RoiSample>,
    pub frames: u64,
}

/// Runs the whole chain over a frame stream.
///
/// ROI reduction is spread over the rayon pool; estimates are identical
/// whatever the thread count.
pub fn run_offline<I>(frames: I, source: &RoiSource, cfg: &EstimatorConfig) -> Result<RunOutput, Error>
where
    I: IntoIterator<Item = Result<Frame, IngestError>>,
{
    let mut est = Estimator::new(cfg.clone())?;
    let mut out = RunOutput::default();
    let mut frames = frames.into_iter();
    loop {
        let chunk = frames.by_ref().take(CHUNK).collect::<Result<Vec<Frame>, _>>()?;
        if chunk.is_empty() {
            break;
        }
        out.frames += chunk.len() as u64;
        let observed = chunk
            .par_iter()
            .map(|f| observe_frame(f, source, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        for obs in observed {
            let emitted = match &obs {
                Observation::Sample(s) => {
                    out.samples.push(s.clone());
                    est.push_sample(s)?
                }
                Observation::NoFace { timestamp_s } => est.push_missing(*timestamp_s)?,
            };
            out.estimates.extend(emitted);
        }
    }
    if out.frames == 0 {
        return Err(Error::InsufficientData("the input contains no frames".into()));
    }
    Ok(out)
}

/// Spectrum of the last `cfg.window_s` seconds of samples ending at `end_s`
/// (default: the last sample), prepared as the estimator would.
pub fn window_spectrum(samples: &[RoiSample], cfg: &EstimatorConfig, end_s: Option<f64>) -> Result<Spectrum, Error> {
    let usable: Vec<&RoiSample> = samples.iter().filter(|s| s.is_usable()).collect();
    let end = match (end_s, usable.last()) {
        (Some(e), _) => e,
        (None, Some(s)) => s.timestamp_s,
        (None, None) => return Err(Error::InsufficientData("no usable samples".into())),
    };
    let picked: Vec<(f64, f64)> = usable
        .iter()
        .filter(|s| s.timestamp_s <= end && s.timestamp_s >= end - cfg.window_s)
        .map(|s| (s.timestamp_s, s.value))
        .collect();
    let series = IppgSeries::new(picked, cfg.channel)?;
    let uniform = signal::resample_uniform(&series, cfg.resample_hz, cfg.max_gap_s)?;
    Ok(signal::spectrum(&uniform, cfg.zero_pad_factor)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roi::Channel;

    fn flat_frame(index: u64, fps: f64, rgb: [u8; 3]) -> Frame {
        let (w, h) = (16, 12);
        let pixels = rgb.iter().copied().cycle().take(w * h * 3).collect();
        Frame::new(index, index as f64 / fps, w, h, pixels).unwrap()
    }

    #[test]
    fn empty_stream_is_an_error() {
        let r = run_offline(
            std::iter::empty(),
            &RoiSource::Fixed(ForeheadRect::new(0, 0, 4, 4).unwrap()),
            &EstimatorConfig::default(),
        );
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn fixed_rect_outside_frame_is_an_error() {
        let frames = (0..3).map(|i| Ok(flat_frame(i, 9.0, [230, 180, 160])));
        let r = run_offline(
            frames,
            &RoiSource::Fixed(ForeheadRect::new(0, 0, 40, 4).unwrap()),
            &EstimatorConfig::default(),
        );
        assert!(matches!(r, Err(Error::FrameRoi { frame: 0, .. })));
    }

    #[test]
    fn missing_landmarks_mean_no_face() {
        let frames = (0..30).map(|i| Ok(flat_frame(i, 9.0, [230, 180, 160])));
        let out = run_offline(
            frames,
            &RoiSource::Landmarks(LandmarkTrack::default()),
            &EstimatorConfig::default(),
        )
        .unwrap();
        assert!(out.samples.is_empty());
        assert_eq!(out.frames, 30);
        assert!(out.estimates.iter().all(|e| e.hr_bpm.is_none()));
        assert!(out
            .estimates
            .iter()
            .all(|e| e.reason == Some(crate::estimator::Reason::NoFace)));
    }

    #[test]
    fn ingest_errors_propagate() {
        let frames = vec![
            Ok(flat_frame(0, 9.0, [1, 2, 3])),
            Err(IngestError::Unsupported("boom".into())),
        ];
        let r = run_offline(
            frames,
            &RoiSource::Fixed(ForeheadRect::new(0, 0, 4, 4).unwrap()),
            &EstimatorConfig::default(),
        );
        assert!(matches!(r, Err(Error::Ingest(_))));
    }

    #[test]
    fn green_channel_runs() {
        let frames = (0..40).map(|i| Ok(flat_frame(i, 9.0, [230, 180 + (i % 3) as u8, 160])));
        let cfg = EstimatorConfig::default().with_channel(Channel::Green);
        let out = run_offline(frames, &RoiSource::Fixed(ForeheadRect::new(2, 2, 10, 8).unwrap()), &cfg).unwrap();
        assert_eq!(out.samples.len(), 40);
        assert!(out.samples.iter().all(|s| s.channel == Channel::Green));
        let sp = window_spectrum(&out.samples, &cfg, None).unwrap();
        assert!(sp.mags.iter().any(|&m| m > 0.0));
    }
}
