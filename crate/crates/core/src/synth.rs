//! Synthetic faces with planted heart and respiration rates.
//!
//! A [`Scene`] is a flat-colored ellipse face on a blue background, with a
//! forehead rectangle bounded by two dark eyebrows. Skin hue follows
//!
//! ```text
//! h(t) = base_h + A sin(2π hr t) + (A/2) sin(2π rr t)
//! ```
//!
//! and the green channel carries `green_amp` times the same waveform. The
//! green term is added together with a red offset chosen so that the hue is
//! left untouched, so each mode sees exactly its own planted signal plus
//! whatever the other modulation does to it through the color model.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{hsv_to_rgb_f64, HsvPixel, RangeMode};
use crate::ingest::{Frame, SequenceMeta, Y4mChroma, Y4mHeader, Y4mWriter};
use crate::roi::{self, FaceBox, ForeheadRect, LandmarkSet, LANDMARK_COUNT};
use crate::signal::Band;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Spec(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {message}")]
    Encode { path: PathBuf, message: String },
}

/// Multiplicative gain `min..max` oscillating at `freq_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightnessDrift {
    pub min_gain: f64,
    pub max_gain: f64,
    pub freq_hz: f64,
    /// Phase in cycles.
    #[serde(default)]
    pub phase: f64,
}

impl Default for BrightnessDrift {
    fn default() -> Self {
        Self {
            min_gain: 0.7,
            max_gain: 1.0,
            freq_hz: 0.05,
            phase: 0.0,
        }
    }
}

impl BrightnessDrift {
    pub fn gain(&self, t: f64) -> f64 {
        let mid = 0.5 * (self.min_gain + self.max_gain);
        let half = 0.5 * (self.max_gain - self.min_gain);
        mid + half * (2.0 * PI * (self.freq_hz * t + self.phase)).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub hr_hz: f64,
    pub rr_hz: f64,
    pub hue_amp: f64,
    pub green_amp: f64,
    /// Skin color, each component on [0, 1].
    pub base_hsv: [f64; 3],
    pub noise_sigma: f64,
    pub brightness_drift: Option<BrightnessDrift>,
    pub fps: f64,
    pub duration_s: f64,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            hr_hz: 1.1,
            rr_hz: 0.3,
            hue_amp: 0.008,
            green_amp: 2.0,
            base_hsv: [0.05, 0.35, 0.8],
            noise_sigma: 0.0,
            brightness_drift: None,
            fps: 9.0,
            duration_s: 11.0,
            width: 160,
            height: 120,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Spec(m));
        let open = |b: Band, f: f64| f > b.lo_hz && f < b.hi_hz;
        if !open(Band::HEART, self.hr_hz) {
            return fail(format!("hr_hz {} outside (0.8, 2.2)", self.hr_hz));
        }
        if !open(Band::RESPIRATION, self.rr_hz) {
            return fail(format!("rr_hz {} outside (0.18, 0.5)", self.rr_hz));
        }
        let [h, s, v] = self.base_hsv;
        // largest excursion of the planted waveform is 1.5 A
        let swing = 1.5 * self.hue_amp;
        if !(self.hue_amp >= 0.0 && h - swing > 0.0 && h + swing < 0.1) {
            return fail(format!("hue {h} ± {swing} leaves the skin mask (0, 0.1)"));
        }
        if !((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&v) && s > 0.0) {
            return fail(format!("base saturation/value out of range: {s}, {v}"));
        }
        if !(self.green_amp >= 0.0 && self.noise_sigma >= 0.0) {
            return fail("amplitudes and noise must be non-negative".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0 && self.duration_s.is_finite() && self.duration_s > 0.0) {
            return fail(format!("fps {} / duration {} must be positive", self.fps, self.duration_s));
        }
        if self.width < 32 || self.height < 32 {
            return fail(format!("frame {}x{} smaller than 32x32", self.width, self.height));
        }
        if let Some(d) = &self.brightness_drift {
            if !(d.min_gain > 0.0 && d.min_gain <= d.max_gain && d.max_gain <= 1.0 && d.freq_hz >= 0.0) {
                return fail(format!("bad brightness drift {d:?}"));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> u64 {
        (self.duration_s * self.fps + 1e-9).floor() as u64
    }

    /// Planted waveform, unit HR amplitude.
    pub fn waveform(&self, t: f64) -> f64 {
        (2.0 * PI * self.hr_hz * t).sin() + 0.5 * (2.0 * PI * self.rr_hz * t).sin()
    }

    pub fn planted_hue(&self, t: f64) -> f64 {
        self.base_hsv[0] + self.hue_amp * self.waveform(t)
    }

    /// Skin RGB before noise and quantization.
    pub fn skin_rgb(&self, t: f64) -> [f64; 3] {
        let [r, g, b] = hsv_to_rgb_f64(HsvPixel {
            h: self.planted_hue(t),
            s: self.base_hsv[1],
            v: self.base_hsv[2],
        })
        .map(|c| c * 255.0);
        // Red is the max and blue the min for skin hues, so hue is
        // (g - b) / (r - b) / 6; moving red by dg (r - b) / (g - b) keeps it.
        let dg = self.green_amp * self.waveform(t);
        let dr = dg * (r - b) / (g - b);
        let gain = self.gain(t);
        [(r + dr) * gain, (g + dg) * gain, b * gain]
    }

    pub fn gain(&self, t: f64) -> f64 {
        self.brightness_drift.map_or(1.0, |d| d.gain(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub hr_bpm: f64,
    pub rr_bpm: f64,
    /// `[left, top, right, bottom]`, half-open.
    pub forehead_rect: [usize; 4],
    pub mean_hue_trace: Vec<f64>,
}

impl GroundTruth {
    pub fn rect(&self) -> ForeheadRect {
        let [l, t, r, b] = self.forehead_rect;
        ForeheadRect {
            left: l,
            top: t,
            right: r,
            bottom: b,
        }
    }
}

const BACKGROUND: [f64; 3] = [70.0, 90.0, 140.0];
const BROW: [f64; 3] = [40.0, 40.0, 40.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Paint {
    Background,
    Skin,
    Brow,
}

/// A validated spec plus its precomputed geometry.
#[derive(Debug, Clone)]
pub struct Scene {
    spec: SynthSpec,
    paint: Vec<Paint>,
    face_box: FaceBox,
    points: Vec<[f64; 2]>,
    forehead: ForeheadRect,
}

impl Scene {
    pub fn new(spec: SynthSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let (w, h) = (spec.width as i64, spec.height as i64);
        let (cx, cy) = (w / 2, h * 11 / 20);
        let (a, b) = (w * 3 / 10, h * 2 / 5);
        let brow_y = cy - b * 2 / 5;
        let (x21, x24) = (cx - w / 10, cx + w / 10);
        let brow_len = w / 8;

        let face_box = FaceBox {
            left: (cx - a) as f64,
            top: (cy - b) as f64,
            right: (cx + a) as f64,
            bottom: (cy + b) as f64,
        };
        let p = |x: f64, y: f64| [x.round(), y.round()];
        let (fx, fy, fa, fb) = (cx as f64, cy as f64, a as f64, b as f64);
        let mut points = Vec::with_capacity(LANDMARK_COUNT);
        // jaw, left ear round the chin to the right ear
        for k in 0..17 {
            let th = PI - k as f64 * PI / 16.0;
            points.push(p(fx + fa * th.cos(), fy + fb * th.sin()));
        }
        for k in 0..5 {
            let x = (x21 - brow_len) as f64 + k as f64 * brow_len as f64 / 4.0;
            points.push(p(x, brow_y as f64));
        }
        for k in 0..5 {
            let x = x24 as f64 + k as f64 * brow_len as f64 / 4.0;
            points.push(p(x, brow_y as f64));
        }
        for k in 0..4 {
            points.push(p(fx, (brow_y + 2) as f64 + k as f64 * fb / 12.0));
        }
        for k in -2..=2 {
            points.push(p(fx + k as f64 * w as f64 / 40.0, fy + fb / 4.0));
        }
        for ex in [fx - w as f64 / 8.0, fx + w as f64 / 8.0] {
            for k in 0..6 {
                let th = k as f64 * PI / 3.0;
                points.push(p(ex + w as f64 / 20.0 * th.cos(), brow_y as f64 + fb / 5.0 + fb / 16.0 * th.sin()));
            }
        }
        for (n, scale) in [(12, 1.0), (8, 0.5)] {
            for k in 0..n {
                let th = k as f64 * 2.0 * PI / n as f64;
                points.push(p(fx + scale * w as f64 / 10.0 * th.cos(), fy + fb / 2.0 + scale * fb / 10.0 * th.sin()));
            }
        }
        debug_assert_eq!(points.len(), LANDMARK_COUNT);
        points[roi::BROW_LEFT] = [x21 as f64, brow_y as f64];
        points[roi::BROW_RIGHT] = [x24 as f64, brow_y as f64];

        let forehead = ForeheadRect::new(x21 as usize, (cy - b) as usize, x24 as usize, brow_y as usize)
            .map_err(|e| SynthError::Spec(e.to_string()))?;

        let mut paint = vec![Paint::Background; spec.width * spec.height];
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = ((x - cx) as f64 / fa, (y - cy) as f64 / fb);
                let in_rect = (forehead.left as i64..forehead.right as i64).contains(&x)
                    && (forehead.top as i64..forehead.bottom as i64).contains(&y);
                let in_brow = (brow_y..brow_y + 2).contains(&y)
                    && ((x21 - brow_len..x21).contains(&x) || (x24..x24 + brow_len).contains(&x));
                let i = (y * w + x) as usize;
                if in_brow {
                    paint[i] = Paint::Brow;
                } else if in_rect || dx * dx + dy * dy <= 1.0 {
                    paint[i] = Paint::Skin;
                }
            }
        }
        Ok(Self {
            spec,
            paint,
            face_box,
            points,
            forehead,
        })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn forehead(&self) -> ForeheadRect {
        self.forehead
    }

    pub fn frame_count(&self) -> u64 {
        self.spec.frame_count()
    }

    pub fn timestamp(&self, index: u64) -> f64 {
        index as f64 / self.spec.fps
    }

    pub fn landmarks(&self, index: u64) -> LandmarkSet {
        LandmarkSet {
            frame_index: index,
            face_box: self.face_box,
            points: self.points.clone(),
        }
    }

    /// Renders frame `index`. Noise is drawn from a stream keyed by
    /// `(seed, index)`, so frames can be rendered in any order.
    pub fn frame(&self, index: u64) -> Frame {
        let t = self.timestamp(index);
        let gain = self.spec.gain(t);
        let skin = self.spec.skin_rgb(t);
        let bg = BACKGROUND.map(|c| c * gain);
        let brow = BROW.map(|c| c * gain);
        let mut pixels = Vec::with_capacity(self.paint.len() * 3);
        let sigma = self.spec.noise_sigma;
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
            rng.set_stream(index);
            let normal = Normal::new(0.0, sigma).expect("sigma checked by validate");
            for &paint in &self.paint {
                let base = match paint {
                    Paint::Skin => &skin,
                    Paint::Background => &bg,
                    Paint::Brow => &brow,
                };
                for &c in base {
                    pixels.push(quantize(c + normal.sample(&mut rng)));
                }
            }
        } else {
            for &paint in &self.paint {
                let base = match paint {
                    Paint::Skin => &skin,
                    Paint::Background => &bg,
                    Paint::Brow => &brow,
                };
                pixels.extend(base.iter().map(|&c| quantize(c)));
            }
        }
        Frame {
            index,
            timestamp_s: t,
            width: self.spec.width,
            height: self.spec.height,
            pixels,
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = Frame> + '_ {
        (0..self.frame_count()).map(|i| self.frame(i))
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let r = self.forehead;
        GroundTruth {
            hr_bpm: 60.0 * self.spec.hr_hz,
            rr_bpm: 60.0 * self.spec.rr_hz,
            forehead_rect: [r.left, r.top, r.right, r.bottom],
            mean_hue_trace: (0..self.frame_count())
                .map(|i| self.spec.planted_hue(self.timestamp(i)))
                .collect(),
        }
    }
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthFormat {
    /// Y4M with full chroma.
    #[default]
    Y4m444,
    /// Y4M with 4:2:0 chroma.
    Y4m420,
    /// Lossless PPM image sequence with a `meta.json`.
    Ppm,
}

impl FromStr for SynthFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "y4m" | "y4m444" => Ok(Self::Y4m444),
            "y4m420" => Ok(Self::Y4m420),
            "ppm" => Ok(Self::Ppm),
            other => Err(format!("unknown synth format {other:?} (y4m, y4m420, ppm)")),
        }
    }
}

/// Paths written by [`generate`].
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub truth: GroundTruth,
    /// `clip.y4m`, or the directory holding the PPM frames.
    pub video: PathBuf,
    pub landmarks: PathBuf,
    pub truth_path: PathBuf,
}

/// Rational approximation of a frame rate for the Y4M header.
fn fps_fraction(fps: f64) -> (u32, u32) {
    if (fps - fps.round()).abs() < 1e-9 {
        return (fps.round() as u32, 1);
    }
    let num = (fps * 1000.0).round() as u32;
    let (mut a, mut b) = (num, 1000u32);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    (num / a, 1000 / a)
}

/// Writes the clip, a landmark sidecar and `truth.json` under `out_dir`.
pub fn generate(spec: &SynthSpec, out_dir: &Path, format: SynthFormat) -> Result<SynthOutput, SynthError> {
    let scene = Scene::new(spec.clone())?;
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;

    let video = match format {
        SynthFormat::Ppm => out_dir.join("frames"),
        _ => out_dir.join("clip.y4m"),
    };
    let (w, h) = (spec.width, spec.height);
    let n = scene.frame_count();
    let chunks = (0..n).collect::<Vec<_>>();
    match format {
        SynthFormat::Y4m444 | SynthFormat::Y4m420 => {
            let (fps_num, fps_den) = fps_fraction(spec.fps);
            let header = Y4mHeader {
                width: w,
                height: h,
                fps_num,
                fps_den,
                chroma: if format == SynthFormat::Y4m444 {
                    Y4mChroma::C444
                } else {
                    Y4mChroma::C420
                },
                range: RangeMode::Full,
            };
            let file = File::create(&video).map_err(io(&video))?;
            let encode = |e: crate::ingest::IngestError| SynthError::Encode {
                path: video.clone(),
                message: e.to_string(),
            };
            let mut writer = Y4mWriter::new(BufWriter::new(file), header).map_err(encode)?;
            for chunk in chunks.chunks(32) {
                let frames: Vec<Frame> = chunk.par_iter().map(|&i| scene.frame(i)).collect();
                for f in &frames {
                    writer.write_frame(f).map_err(encode)?;
                }
            }
            writer.finish().map_err(encode)?;
        }
        SynthFormat::Ppm => {
            fs::create_dir_all(&video).map_err(io(&video))?;
            let pattern = "frame_%05d.ppm";
            chunks.par_iter().try_for_each(|&i| {
                let path = video.join(format!("frame_{i:05}.ppm"));
                let f = scene.frame(i);
                image::RgbImage::from_raw(w as u32, h as u32, f.pixels)
                    .expect("frame buffer sized by render")
                    .save(&path)
                    .map_err(|e| SynthError::Encode {
                        path: path.clone(),
                        message: e.to_string(),
                    })
            })?;
            let meta = SequenceMeta {
                fps: spec.fps,
                width: w,
                height: h,
                pattern: pattern.into(),
                pixel_format: None,
            };
            let meta_path = video.join("meta.json");
            let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
            fs::write(&meta_path, text).map_err(io(&meta_path))?;
        }
    }

    let landmarks = out_dir.join("clip.lmjsonl");
    let sets: Vec<LandmarkSet> = (0..n).map(|i| scene.landmarks(i)).collect();
    let file = File::create(&landmarks).map_err(io(&landmarks))?;
    roi::write_landmark_sidecar(BufWriter::new(file), &sets).map_err(io(&landmarks))?;

    let truth = scene.ground_truth();
    let truth_path = out_dir.join("truth.json");
    let mut file = BufWriter::new(File::create(&truth_path).map_err(io(&truth_path))?);
    serde_json::to_writer(&mut file, &truth).expect("truth serializes");
    file.write_all(b"\n").map_err(io(&truth_path))?;
    file.flush().map_err(io(&truth_path))?;

    Ok(SynthOutput {
        truth,
        video,
        landmarks,
        truth_path,
    })
}
