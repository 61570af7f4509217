//! Forehead region of interest and per-frame observables.
//!
//! Face geometry arrives from outside (a landmark sidecar in the 68-point
//! iBUG layout, or a fixed rectangle). The forehead is the strip spanning
//! horizontally from landmark 21 to landmark 24 and vertically from the top of
//! the face box down to the higher of those two eyebrow points.
//!
//! Each frame is then reduced to one scalar: the mean Hue of forehead pixels
//! whose hue falls inside a mask, or the plain mean of the Green channel.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{rgb_to_hsv, RgbPixel};
use crate::ingest::Frame;

/// Landmark count of the iBUG 300-W layout.
pub const LANDMARK_COUNT: usize = 68;
/// Inner end of the right eyebrow (image left).
pub const BROW_LEFT: usize = 21;
/// Middle of the left eyebrow (image right).
pub const BROW_RIGHT: usize = 24;

#[derive(Debug, Error)]
pub enum RoiError {
    #[error("degenerate forehead rectangle ({left}, {top}, {right}, {bottom})")]
    Geometry {
        left: i64,
        top: i64,
        right: i64,
        bottom: i64,
    },
    #[error("invalid landmark set: {0}")]
    Landmarks(String),
    #[error("{path}:{line}: {message}")]
    Sidecar {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Which per-frame observable feeds the iPPG series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    #[default]
    Hue,
    Green,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Hue => "hue",
            Channel::Green => "green",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hue" => Ok(Channel::Hue),
            "green" => Ok(Channel::Green),
            other => Err(format!("unknown channel {other:?} (expected hue or green)")),
        }
    }
}

/// Axis-aligned box in pixel coordinates, `left < right`, `top < bottom`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

/// 68 facial landmarks plus the detector's face box for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub frame_index: u64,
    pub face_box: FaceBox,
    pub points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    pub fn new(frame_index: u64, face_box: FaceBox, points: Vec<[f64; 2]>) -> Result<Self, RoiError> {
        if points.len() != LANDMARK_COUNT {
            return Err(RoiError::Landmarks(format!(
                "expected {LANDMARK_COUNT} points, got {}",
                points.len()
            )));
        }
        if !(face_box.right > face_box.left && face_box.bottom > face_box.top) {
            return Err(RoiError::Landmarks("face box has no area".into()));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(RoiError::Landmarks("non-finite coordinate".into()));
        }
        Ok(Self {
            frame_index,
            face_box,
            points,
        })
    }
}

/// Half-open pixel rectangle: columns `left..right`, rows `top..bottom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForeheadRect {
    pub left: usize,
    pub top: usize,
    pub right: usize,
    pub bottom: usize,
}

impl ForeheadRect {
    pub fn new(left: usize, top: usize, right: usize, bottom: usize) -> Result<Self, RoiError> {
        if left >= right || top >= bottom {
            return Err(RoiError::Geometry {
                left: left as i64,
                top: top as i64,
                right: right as i64,
                bottom: bottom as i64,
            });
        }
        Ok(Self {
            left,
            top,
            right,
            bottom,
        })
    }

    pub fn area(&self) -> usize {
        (self.right - self.left) * (self.bottom - self.top)
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.right <= width && self.bottom <= height
    }

    /// Clamps to a `width × height` frame, failing if nothing is left.
    pub fn clamped(&self, width: usize, height: usize) -> Result<Self, RoiError> {
        Self::new(
            self.left.min(width),
            self.top.min(height),
            self.right.min(width),
            self.bottom.min(height),
        )
    }
}

/// Forehead rectangle spanning landmark 21 to landmark 24 horizontally and
/// the face-box top down to the higher eyebrow point.
///
/// ```
/// use huevitals::roi::{forehead_from_landmarks, FaceBox, LandmarkSet, ForeheadRect};
///
/// let mut points = vec![[0.0, 300.0]; 68];
/// points[21] = [200.0, 180.0];
/// points[24] = [260.0, 178.0];
/// let face = FaceBox { left: 150.0, top: 100.0, right: 310.0, bottom: 320.0 };
/// let lm = LandmarkSet::new(0, face, points).unwrap();
/// let rect = forehead_from_landmarks(&lm, 640, 480).unwrap();
/// assert_eq!(rect, ForeheadRect::new(200, 100, 260, 178).unwrap());
/// ```
pub fn forehead_from_landmarks(
    lm: &LandmarkSet,
    frame_w: usize,
    frame_h: usize,
) -> Result<ForeheadRect, RoiError> {
    let [x21, y21] = lm.points[BROW_LEFT];
    let [x24, y24] = lm.points[BROW_RIGHT];
    let left = x21.round() as i64;
    let right = x24.round() as i64;
    let top = lm.face_box.top.round() as i64;
    let bottom = y21.min(y24).round() as i64;

    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64);
    let (cl, ct) = (clamp(left, frame_w), clamp(top, frame_h));
    let (cr, cb) = (clamp(right, frame_w), clamp(bottom, frame_h));
    if cl >= cr || ct >= cb {
        return Err(RoiError::Geometry {
            left,
            top,
            right,
            bottom,
        });
    }
    Ok(ForeheadRect {
        left: cl as usize,
        top: ct as usize,
        right: cr as usize,
        bottom: cb as usize,
    })
}

/// Open hue interval `(lo, hi)` on the unit circle.
///
/// When `wrap` is set the interval runs from `lo` up through 1 ≡ 0 to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HueMask {
    pub lo: f64,
    pub hi: f64,
    pub wrap: bool,
}

impl HueMask {
    pub fn new(lo: f64, hi: f64) -> Result<Self, String> {
        if !(lo.is_finite() && hi.is_finite()) || lo == hi {
            return Err(format!("invalid hue mask ({lo}, {hi})"));
        }
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
            return Err(format!("hue mask bounds must lie in [0, 1], got ({lo}, {hi})"));
        }
        Ok(Self {
            lo,
            hi,
            wrap: lo > hi,
        })
    }

    #[inline]
    pub fn contains(&self, h: f64) -> bool {
        if self.wrap {
            h > self.lo || h < self.hi
        } else {
            h > self.lo && h < self.hi
        }
    }
}

impl Default for HueMask {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 0.1,
            wrap: false,
        }
    }
}

/// One frame's reduced observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiSample {
    pub timestamp_s: f64,
    /// Mean hue on `[0, 1)` or mean green on `[0, 255]`; meaningless when
    /// `pixel_count` is zero.
    pub value: f64,
    pub pixel_count: usize,
    pub channel: Channel,
}

impl RoiSample {
    pub fn is_usable(&self) -> bool {
        self.pixel_count > 0 && self.value.is_finite()
    }
}

/// Arithmetic mean hue over ROI pixels whose hue lies strictly inside `mask`.
pub fn mean_hue_masked(frame: &Frame, rect: &ForeheadRect, mask: &HueMask) -> RoiSample {
    debug_assert!(rect.fits(frame.width, frame.height));
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in rect.top..rect.bottom {
        for px in frame.row_span(y, rect.left, rect.right).chunks_exact(3) {
            let h = rgb_to_hsv(RgbPixel::from_slice(px)).h;
            if mask.contains(h) {
                sum += h;
                count += 1;
            }
        }
    }
    RoiSample {
        timestamp_s: frame.timestamp_s,
        value: if count > 0 { sum / count as f64 } else { f64::NAN },
        pixel_count: count,
        channel: Channel::Hue,
    }
}

/// Mean green channel over every ROI pixel.
pub fn mean_green(frame: &Frame, rect: &ForeheadRect) -> RoiSample {
    debug_assert!(rect.fits(frame.width, frame.height));
    let mut sum = 0u64;
    for y in rect.top..rect.bottom {
        sum += frame
            .row_span(y, rect.left, rect.right)
            .chunks_exact(3)
            .map(|px| u64::from(px[1]))
            .sum::<u64>();
    }
    let n = rect.area();
    RoiSample {
        timestamp_s: frame.timestamp_s,
        value: sum as f64 / n as f64,
        pixel_count: n,
        channel: Channel::Green,
    }
}

/// Reduces `frame` to the observable selected by `channel`.
pub fn observe(frame: &Frame, rect: &ForeheadRect, channel: Channel, mask: &HueMask) -> RoiSample {
    match channel {
        Channel::Hue => mean_hue_masked(frame, rect, mask),
        Channel::Green => mean_green(frame, rect),
    }
}

// ---------------------------------------------------------------------------
// Sidecar

#[derive(Debug, Serialize, Deserialize)]
struct SidecarRow {
    frame: u64,
    face_box: [f64; 4],
    points: Vec<[f64; 2]>,
}

/// Landmarks for a stream, keyed by frame index. Frames without an entry
/// have no detected face.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkTrack {
    sets: BTreeMap<u64, LandmarkSet>,
}

impl LandmarkTrack {
    pub fn get(&self, frame_index: u64) -> Option<&LandmarkSet> {
        self.sets.get(&frame_index)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LandmarkSet> {
        self.sets.values()
    }

    pub fn insert(&mut self, set: LandmarkSet) {
        self.sets.insert(set.frame_index, set);
    }
}

impl FromIterator<LandmarkSet> for LandmarkTrack {
    fn from_iter<T: IntoIterator<Item = LandmarkSet>>(iter: T) -> Self {
        let mut track = Self::default();
        for s in iter {
            track.insert(s);
        }
        track
    }
}

/// Parses a JSON-lines landmark sidecar:
/// `{"frame": 0, "face_box": [l, t, r, b], "points": [[x, y], ...68]}`.
pub fn parse_landmark_sidecar(path: &Path) -> Result<LandmarkTrack, RoiError> {
    let file = File::open(path).map_err(|source| RoiError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_landmark_sidecar(BufReader::new(file), path)
}

pub fn read_landmark_sidecar<R: BufRead>(reader: R, origin: &Path) -> Result<LandmarkTrack, RoiError> {
    let mut track = LandmarkTrack::default();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let err = |message: String| RoiError::Sidecar {
            path: origin.to_owned(),
            line: lineno,
            message,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: SidecarRow = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let [l, t, r, b] = row.face_box;
        let set = LandmarkSet::new(
            row.frame,
            FaceBox {
                left: l,
                top: t,
                right: r,
                bottom: b,
            },
            row.points,
        )
        .map_err(|e| err(e.to_string()))?;
        if track.get(set.frame_index).is_some() {
            return Err(err(format!("duplicate entry for frame {}", set.frame_index)));
        }
        track.insert(set);
    }
    Ok(track)
}

pub fn write_landmark_sidecar<'a, W: Write>(
    mut out: W,
    sets: impl IntoIterator<Item = &'a LandmarkSet>,
) -> io::Result<()> {
    for s in sets {
        let row = SidecarRow {
            frame: s.frame_index,
            face_box: [s.face_box.left, s.face_box.top, s.face_box.right, s.face_box.bottom],
            points: s.points.clone(),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
