//! Frame-stream decoding.
//!
//! Three containers are understood, none of which needs a codec:
//!
//! * YUV4MPEG2 (`.y4m`), 4:2:0 or 4:4:4, limited or full range;
//! * numbered PPM/PNG image sequences described by a JSON meta file;
//! * raw interleaved RGB24 described by a JSON meta file.
//!
//! Every source yields [`Frame`]s whose timestamps are `index / fps`. Use
//! [`simulate_drops`] to thin a stream the way a slow real-time consumer
//! would.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{self, ColorError, RangeMode, RgbPixel};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("frame {index} is {got_w}x{got_h}, stream is {want_w}x{want_h}")]
    InconsistentFrameSize {
        index: u64,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("truncated frame {index}: expected {expected} bytes, got {got}")]
    TruncatedFrame {
        index: u64,
        expected: usize,
        got: usize,
    },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("bad meta file {path}: {message}")]
    Meta { path: PathBuf, message: String },
    #[error("image decode failed for {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error(transparent)]
    Format(#[from] ColorError),
    #[error("keep rate must lie in (0, 1], got {0}")]
    KeepRate(f64),
}

/// One decoded RGB image with its capture time.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub timestamp_s: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major interleaved RGB8, `width * height * 3` bytes.
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(
        index: u64,
        timestamp_s: f64,
        width: usize,
        height: usize,
        pixels: Vec<u8>,
    ) -> Result<Self, IngestError> {
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(IngestError::TruncatedFrame {
                index,
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            index,
            timestamp_s,
            width,
            height,
            pixels,
        })
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> RgbPixel {
        let i = (y * self.width + x) * 3;
        RgbPixel::from_slice(&self.pixels[i..i + 3])
    }

    /// Interleaved bytes of row `y`, columns `x0..x1`.
    #[inline]
    pub fn row_span(&self, y: usize, x0: usize, x1: usize) -> &[u8] {
        let base = y * self.width * 3;
        &self.pixels[base + x0 * 3..base + x1 * 3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Y4m,
    ImageSequence,
    RawRgb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamMeta {
    pub nominal_fps: f64,
    pub width: usize,
    pub height: usize,
    pub frame_count: Option<u64>,
    pub source_kind: SourceKind,
}

/// Overrides container detection in [`open_stream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormatHint {
    #[default]
    Auto,
    Y4m,
    ImageSequence,
    RawRgb,
}

pub type FrameStream = Box<dyn Iterator<Item = Result<Frame, IngestError>> + Send>;

/// Opens a frame source.
///
/// `path` may be a `.y4m` file, a directory holding `meta.json`, a meta JSON
/// file, or a raw `.rgb` file with a sibling `<stem>.json`.
pub fn open_stream(path: &Path, hint: FormatHint) -> Result<(StreamMeta, FrameStream), IngestError> {
    let kind = match hint {
        FormatHint::Y4m => SourceKind::Y4m,
        FormatHint::ImageSequence => SourceKind::ImageSequence,
        FormatHint::RawRgb => SourceKind::RawRgb,
        FormatHint::Auto => detect_kind(path)?,
    };
    match kind {
        SourceKind::Y4m => {
            let file = File::open(path).map_err(|source| IngestError::Unreadable {
                path: path.to_owned(),
                source,
            })?;
            let reader = Y4mReader::new(BufReader::new(file))?;
            let meta = reader.meta();
            Ok((meta, Box::new(reader)))
        }
        SourceKind::ImageSequence => {
            let (meta_path, meta) = load_meta(path)?;
            let seq = ImageSequence::new(&meta_path, meta)?;
            let sm = seq.meta();
            Ok((sm, Box::new(seq)))
        }
        SourceKind::RawRgb => {
            let (meta_path, meta) = load_meta(path)?;
            let raw = RawRgbReader::new(&meta_path, meta)?;
            let sm = raw.meta();
            Ok((sm, Box::new(raw)))
        }
    }
}

fn detect_kind(path: &Path) -> Result<SourceKind, IngestError> {
    if path.is_dir() {
        return Ok(SourceKind::ImageSequence);
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("y4m") => return Ok(SourceKind::Y4m),
        Some("rgb") | Some("raw") => return Ok(SourceKind::RawRgb),
        Some("json") => {
            let (_, meta) = load_meta(path)?;
            return Ok(if meta.pixel_format.as_deref() == Some("rgb24") {
                SourceKind::RawRgb
            } else {
                SourceKind::ImageSequence
            });
        }
        _ => {}
    }
    let mut magic = [0u8; 9];
    let mut file = File::open(path).map_err(|source| IngestError::Unreadable {
        path: path.to_owned(),
        source,
    })?;
    let n = file.read(&mut magic)?;
    if &magic[..n] == b"YUV4MPEG2" {
        Ok(SourceKind::Y4m)
    } else {
        Err(IngestError::Unsupported(format!(
            "cannot detect container of {}",
            path.display()
        )))
    }
}

// ---------------------------------------------------------------------------
// YUV4MPEG2

/// Chroma layouts understood by the Y4M reader and writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Y4mChroma {
    C420,
    C444,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Y4mHeader {
    pub width: usize,
    pub height: usize,
    pub fps_num: u32,
    pub fps_den: u32,
    pub chroma: Y4mChroma,
    pub range: RangeMode,
}

impl Y4mHeader {
    pub fn fps(&self) -> f64 {
        f64::from(self.fps_num) / f64::from(self.fps_den)
    }

    fn frame_bytes(&self) -> usize {
        let luma = self.width * self.height;
        match self.chroma {
            Y4mChroma::C444 => luma * 3,
            Y4mChroma::C420 => {
                let (cw, ch) = color::chroma420_dims(self.width, self.height);
                luma + 2 * cw * ch
            }
        }
    }

    /// Parses the text of a stream header line (without the trailing newline).
    pub fn parse(line: &str) -> Result<Self, IngestError> {
        let mut tokens = line.split(' ');
        if tokens.next() != Some("YUV4MPEG2") {
            return Err(IngestError::MalformedHeader("missing YUV4MPEG2 signature".into()));
        }
        let bad = |msg: String| IngestError::MalformedHeader(msg);
        let (mut width, mut height, mut fps) = (None, None, None);
        let mut chroma = Y4mChroma::C420;
        let mut range = RangeMode::Limited;
        for tok in tokens.filter(|t| !t.is_empty()) {
            let (tag, val) = tok.split_at(1);
            match tag {
                "W" => width = Some(val.parse::<usize>().map_err(|_| bad(format!("bad width {val:?}")))?),
                "H" => height = Some(val.parse::<usize>().map_err(|_| bad(format!("bad height {val:?}")))?),
                "F" => {
                    let (n, d) = val
                        .split_once(':')
                        .ok_or_else(|| bad(format!("bad frame rate {val:?}")))?;
                    let n: u32 = n.parse().map_err(|_| bad(format!("bad frame rate {val:?}")))?;
                    let d: u32 = d.parse().map_err(|_| bad(format!("bad frame rate {val:?}")))?;
                    if n == 0 || d == 0 {
                        return Err(bad(format!("frame rate must be positive, got {val}")));
                    }
                    fps = Some((n, d));
                }
                "C" => {
                    chroma = match val {
                        "420" | "420jpeg" | "420paldv" | "420mpeg2" => Y4mChroma::C420,
                        "444" => Y4mChroma::C444,
                        other => return Err(IngestError::Unsupported(format!("Y4M colorspace C{other}"))),
                    }
                }
                "X" => match val {
                    "COLORRANGE=FULL" => range = RangeMode::Full,
                    "COLORRANGE=LIMITED" => range = RangeMode::Limited,
                    _ => {}
                },
                // interlacing, aspect ratio
                "I" | "A" => {}
                _ => return Err(bad(format!("unknown header token {tok:?}"))),
            }
        }
        let width = width.ok_or_else(|| bad("missing W".into()))?;
        let height = height.ok_or_else(|| bad("missing H".into()))?;
        let (fps_num, fps_den) = fps.ok_or_else(|| bad("missing F".into()))?;
        if width == 0 || height == 0 {
            return Err(bad("zero frame dimension".into()));
        }
        Ok(Self {
            width,
            height,
            fps_num,
            fps_den,
            chroma,
            range,
        })
    }

    pub fn to_line(&self) -> String {
        let c = match self.chroma {
            Y4mChroma::C420 => "420jpeg",
            Y4mChroma::C444 => "444",
        };
        let mut s = format!(
            "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 C{}",
            self.width, self.height, self.fps_num, self.fps_den, c
        );
        if self.range == RangeMode::Full {
            s.push_str(" XCOLORRANGE=FULL");
        }
        s
    }
}

fn read_line<R: BufRead>(r: &mut R, limit: usize) -> Result<Option<String>, IngestError> {
    let mut buf = Vec::new();
    let n = r.by_ref().take(limit as u64).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        return Err(IngestError::MalformedHeader("unterminated header line".into()));
    }
    buf.pop();
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| IngestError::MalformedHeader("header is not ASCII".into()))
}

/// Streaming YUV4MPEG2 decoder.
pub struct Y4mReader<R> {
    inner: R,
    header: Y4mHeader,
    next_index: u64,
    plane_buf: Vec<u8>,
    failed: bool,
}

impl<R: BufRead> Y4mReader<R> {
    pub fn new(mut inner: R) -> Result<Self, IngestError> {
        let line = read_line(&mut inner, 4096)?
            .ok_or_else(|| IngestError::MalformedHeader("empty stream".into()))?;
        let header = Y4mHeader::parse(&line)?;
        Ok(Self {
            inner,
            plane_buf: vec![0; header.frame_bytes()],
            header,
            next_index: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> &Y4mHeader {
        &self.header
    }

    pub fn meta(&self) -> StreamMeta {
        StreamMeta {
            nominal_fps: self.header.fps(),
            width: self.header.width,
            height: self.header.height,
            frame_count: None,
            source_kind: SourceKind::Y4m,
        }
    }

    pub fn read_frame(&mut self) -> Result<Option<Frame>, IngestError> {
        let Some(line) = read_line(&mut self.inner, 1024)? else {
            return Ok(None);
        };
        if line != "FRAME" && !line.starts_with("FRAME ") {
            return Err(IngestError::MalformedHeader(format!(
                "expected FRAME marker before frame {}, found {line:?}",
                self.next_index
            )));
        }
        let index = self.next_index;
        let mut filled = 0;
        while filled < self.plane_buf.len() {
            match self.inner.read(&mut self.plane_buf[filled..])? {
                0 => {
                    return Err(IngestError::TruncatedFrame {
                        index,
                        expected: self.plane_buf.len(),
                        got: filled,
                    })
                }
                n => filled += n,
            }
        }
        let h = &self.header;
        let luma = h.width * h.height;
        let (y, rest) = self.plane_buf.split_at(luma);
        let pixels = match h.chroma {
            Y4mChroma::C444 => {
                let (u, v) = rest.split_at(luma);
                color::yuv444_to_rgb(y, u, v, h.width, h.height, h.range)?
            }
            Y4mChroma::C420 => {
                let (u, v) = rest.split_at(rest.len() / 2);
                color::yuv420_to_rgb(y, u, v, h.width, h.height, h.range)?
            }
        };
        self.next_index += 1;
        let timestamp_s = index as f64 * f64::from(h.fps_den) / f64::from(h.fps_num);
        Frame::new(index, timestamp_s, h.width, h.height, pixels).map(Some)
    }
}

impl<R: BufRead> Iterator for Y4mReader<R> {
    type Item = Result<Frame, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let r = self.read_frame().transpose();
        if matches!(r, Some(Err(_))) {
            self.failed = true;
        }
        r
    }
}

/// YUV4MPEG2 encoder.
pub struct Y4mWriter<W: Write> {
    inner: W,
    header: Y4mHeader,
}

impl<W: Write> Y4mWriter<W> {
    pub fn new(mut inner: W, header: Y4mHeader) -> Result<Self, IngestError> {
        writeln!(inner, "{}", header.to_line())?;
        Ok(Self { inner, header })
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<(), IngestError> {
        let h = &self.header;
        if frame.width != h.width || frame.height != h.height {
            return Err(IngestError::InconsistentFrameSize {
                index: frame.index,
                got_w: frame.width,
                got_h: frame.height,
                want_w: h.width,
                want_h: h.height,
            });
        }
        let planes = match h.chroma {
            Y4mChroma::C444 => color::rgb_to_yuv444(&frame.pixels, h.width, h.height, h.range)?,
            Y4mChroma::C420 => color::rgb_to_yuv420(&frame.pixels, h.width, h.height, h.range)?,
        };
        self.inner.write_all(b"FRAME\n")?;
        self.inner.write_all(&planes.y)?;
        self.inner.write_all(&planes.u)?;
        self.inner.write_all(&planes.v)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, IngestError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

// ---------------------------------------------------------------------------
// Meta-described sources

/// Meta file shared by image sequences and raw RGB24 streams.
///
/// For image sequences `pattern` is a printf-style file name such as
/// `frame_%05d.ppm`; for raw streams it names the data file and
/// `pixel_format` is `"rgb24"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_format: Option<String>,
}

fn load_meta(path: &Path) -> Result<(PathBuf, SequenceMeta), IngestError> {
    let meta_path = if path.is_dir() {
        path.join("meta.json")
    } else if path.extension().is_some_and(|e| e == "json") {
        path.to_owned()
    } else {
        path.with_extension("json")
    };
    let text = std::fs::read_to_string(&meta_path).map_err(|source| IngestError::Unreadable {
        path: meta_path.clone(),
        source,
    })?;
    let meta: SequenceMeta = serde_json::from_str(&text).map_err(|e| IngestError::Meta {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    if !(meta.fps.is_finite() && meta.fps > 0.0) {
        return Err(IngestError::Meta {
            path: meta_path,
            message: format!("fps must be positive, got {}", meta.fps),
        });
    }
    if meta.width == 0 || meta.height == 0 {
        return Err(IngestError::Meta {
            path: meta_path,
            message: "zero frame dimension".into(),
        });
    }
    Ok((meta_path, meta))
}

/// Expands the first `%d` / `%0Nd` directive in `pattern`.
pub fn expand_pattern(pattern: &str, index: u64) -> Result<String, IngestError> {
    let start = pattern
        .find('%')
        .ok_or_else(|| IngestError::Unsupported(format!("pattern {pattern:?} has no %d")))?;
    let rest = &pattern[start + 1..];
    let d = rest
        .find('d')
        .ok_or_else(|| IngestError::Unsupported(format!("pattern {pattern:?} has no %d")))?;
    let spec = &rest[..d];
    let width: usize = if spec.is_empty() {
        0
    } else if spec.bytes().all(|b| b.is_ascii_digit()) {
        spec.parse().unwrap_or(0)
    } else {
        return Err(IngestError::Unsupported(format!("pattern directive %{spec}d")));
    };
    Ok(format!(
        "{}{:0width$}{}",
        &pattern[..start],
        index,
        &rest[d + 1..],
        width = width
    ))
}

struct ImageSequence {
    dir: PathBuf,
    meta: SequenceMeta,
    first: u64,
    count: u64,
    next: u64,
    failed: bool,
}

impl ImageSequence {
    fn new(meta_path: &Path, meta: SequenceMeta) -> Result<Self, IngestError> {
        let dir = meta_path.parent().unwrap_or(Path::new(".")).to_owned();
        let exists = |i: u64| -> Result<bool, IngestError> {
            Ok(dir.join(expand_pattern(&meta.pattern, i)?).is_file())
        };
        // Sequences may be numbered from 0 or 1.
        let first = if exists(0)? { 0 } else { 1 };
        let mut count = 0;
        while exists(first + count)? {
            count += 1;
        }
        Ok(Self {
            dir,
            meta,
            first,
            count,
            next: 0,
            failed: false,
        })
    }

    fn meta(&self) -> StreamMeta {
        StreamMeta {
            nominal_fps: self.meta.fps,
            width: self.meta.width,
            height: self.meta.height,
            frame_count: Some(self.count),
            source_kind: SourceKind::ImageSequence,
        }
    }

    fn load(&self, index: u64) -> Result<Frame, IngestError> {
        let path = self.dir.join(expand_pattern(&self.meta.pattern, self.first + index)?);
        let img = image::open(&path).map_err(|e| IngestError::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        if w != self.meta.width || h != self.meta.height {
            return Err(IngestError::InconsistentFrameSize {
                index,
                got_w: w,
                got_h: h,
                want_w: self.meta.width,
                want_h: self.meta.height,
            });
        }
        Frame::new(index, index as f64 / self.meta.fps, w, h, rgb.into_raw())
    }
}

impl Iterator for ImageSequence {
    type Item = Result<Frame, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.count {
            return None;
        }
        let r = self.load(self.next);
        self.next += 1;
        self.failed = r.is_err();
        Some(r)
    }
}

struct RawRgbReader {
    inner: BufReader<File>,
    meta: SequenceMeta,
    frame_count: u64,
    next: u64,
    failed: bool,
}

impl RawRgbReader {
    fn new(meta_path: &Path, meta: SequenceMeta) -> Result<Self, IngestError> {
        if meta.pixel_format.as_deref() != Some("rgb24") {
            return Err(IngestError::Meta {
                path: meta_path.to_owned(),
                message: format!("pixel_format must be \"rgb24\", got {:?}", meta.pixel_format),
            });
        }
        let dir = meta_path.parent().unwrap_or(Path::new("."));
        let data_path = dir.join(&meta.pattern);
        let file = File::open(&data_path).map_err(|source| IngestError::Unreadable {
            path: data_path.clone(),
            source,
        })?;
        let len = file.metadata()?.len();
        let frame_bytes = (meta.width * meta.height * 3) as u64;
        Ok(Self {
            inner: BufReader::new(file),
            frame_count: len.div_ceil(frame_bytes),
            meta,
            next: 0,
            failed: false,
        })
    }

    fn meta(&self) -> StreamMeta {
        StreamMeta {
            nominal_fps: self.meta.fps,
            width: self.meta.width,
            height: self.meta.height,
            frame_count: Some(self.frame_count),
            source_kind: SourceKind::RawRgb,
        }
    }

    fn read_frame(&mut self) -> Result<Option<Frame>, IngestError> {
        let expected = self.meta.width * self.meta.height * 3;
        let mut buf = vec![0u8; expected];
        let mut filled = 0;
        while filled < expected {
            match self.inner.read(&mut buf[filled..])? {
                0 if filled == 0 => return Ok(None),
                0 => {
                    return Err(IngestError::TruncatedFrame {
                        index: self.next,
                        expected,
                        got: filled,
                    })
                }
                n => filled += n,
            }
        }
        let index = self.next;
        self.next += 1;
        Frame::new(
            index,
            index as f64 / self.meta.fps,
            self.meta.width,
            self.meta.height,
            buf,
        )
        .map(Some)
    }
}

impl Iterator for RawRgbReader {
    type Item = Result<Frame, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let r = self.read_frame().transpose();
        self.failed = matches!(r, Some(Err(_)));
        r
    }
}

// ---------------------------------------------------------------------------
// Frame-drop simulation

/// Iterator adapter returned by [`simulate_drops`].
pub struct DropSimulator<I> {
    inner: I,
    keep_rate: f64,
    rng: ChaCha8Rng,
}

impl<I: Iterator> Iterator for DropSimulator<I> {
    type Item = I::Item;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let item = self.inner.next()?;
            // One draw per input item keeps the pattern a pure function of
            // the seed and the item position.
            if self.rng.random::<f64>() < self.keep_rate {
                return Some(item);
            }
        }
    }
}

/// Keeps each item independently with probability `keep_rate`.
///
/// Items pass through untouched, so frames keep their original index and
/// timestamp and the surviving sequence is irregularly sampled. A keep rate
/// of `1.0` is the identity.
pub fn simulate_drops<I: IntoIterator>(
    items: I,
    keep_rate: f64,
    seed: u64,
) -> Result<DropSimulator<I::IntoIter>, IngestError> {
    if !(keep_rate > 0.0 && keep_rate <= 1.0) {
        return Err(IngestError::KeepRate(keep_rate));
    }
    Ok(DropSimulator {
        inner: items.into_iter(),
        keep_rate,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn gradient_frame(index: u64, fps: f64, w: usize, h: usize) -> Frame {
        let mut px = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                px.extend_from_slice(&[
                    (40 + 2 * x) as u8,
                    (60 + 3 * y) as u8,
                    (90 + x + y + index as usize) as u8,
                ]);
            }
        }
        Frame::new(index, index as f64 / fps, w, h, px).unwrap()
    }

    fn y4m_bytes(header: &Y4mHeader, frames: &[Frame]) -> Vec<u8> {
        let mut w = Y4mWriter::new(Vec::new(), header.clone()).unwrap();
        for f in frames {
            w.write_frame(f).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn parses_webcam_header() {
        let h = Y4mHeader::parse("YUV4MPEG2 W640 H480 F30:1 C420").unwrap();
        assert_eq!((h.width, h.height), (640, 480));
        assert_eq!(h.fps(), 30.0);
        assert_eq!(h.chroma, Y4mChroma::C420);
        assert_eq!(h.range, RangeMode::Limited);

        let reader = Y4mReader::new(Cursor::new(b"YUV4MPEG2 W640 H480 F30:1 C420\n".to_vec())).unwrap();
        let meta = reader.meta();
        assert_eq!(meta.source_kind, SourceKind::Y4m);
        assert_eq!((meta.width, meta.height, meta.nominal_fps), (640, 480, 30.0));
    }

    #[test]
    fn ntsc_rate_and_full_range() {
        let h = Y4mHeader::parse("YUV4MPEG2 W8 H6 F30000:1001 Ip A1:1 C444 XCOLORRANGE=FULL").unwrap();
        assert!((h.fps() - 29.97).abs() < 1e-3);
        assert_eq!(h.chroma, Y4mChroma::C444);
        assert_eq!(h.range, RangeMode::Full);
    }

    #[test]
    fn empty_stream_is_malformed() {
        let err = Y4mReader::new(Cursor::new(Vec::new())).err().unwrap();
        assert!(matches!(err, IngestError::MalformedHeader(_)));
    }

    #[test]
    fn bad_headers_rejected() {
        for line in [
            "YUV4MPEG W2 H2 F1:1",
            "YUV4MPEG2 H2 F1:1",
            "YUV4MPEG2 W2 H2 F0:1",
            "YUV4MPEG2 W2 H2",
            "YUV4MPEG2 W2 H2 F1:1 Q7",
        ] {
            assert!(Y4mHeader::parse(line).is_err(), "{line}");
        }
        assert!(matches!(
            Y4mHeader::parse("YUV4MPEG2 W2 H2 F1:1 C422"),
            Err(IngestError::Unsupported(_))
        ));
    }

    #[test]
    fn truncated_frame_is_reported() {
        let mut bytes = b"YUV4MPEG2 W2 H2 F25:1 C420jpeg\nFRAME\n".to_vec();
        bytes.extend_from_slice(&[128; 5]);
        let mut r = Y4mReader::new(Cursor::new(bytes)).unwrap();
        assert!(matches!(r.next(), Some(Err(IngestError::TruncatedFrame { index: 0, .. }))));
        assert!(r.next().is_none());
    }

    #[test]
    fn y4m_timestamps_follow_header_rate() {
        let header = Y4mHeader {
            width: 4,
            height: 2,
            fps_num: 9,
            fps_den: 1,
            chroma: Y4mChroma::C420,
            range: RangeMode::Limited,
        };
        let frames: Vec<_> = (0..5).map(|i| gradient_frame(i, 9.0, 4, 2)).collect();
        let bytes = y4m_bytes(&header, &frames);
        let back: Vec<Frame> = Y4mReader::new(Cursor::new(bytes))
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(back.len(), 5);
        for (i, f) in back.iter().enumerate() {
            assert_eq!(f.index, i as u64);
            assert!((f.timestamp_s - i as f64 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn y4m_444_round_trip_of_decodable_frames_is_exact() {
        let header = Y4mHeader {
            width: 12,
            height: 8,
            fps_num: 30,
            fps_den: 1,
            chroma: Y4mChroma::C444,
            range: RangeMode::Limited,
        };
        let originals: Vec<_> = (0..3).map(|i| gradient_frame(i, 30.0, 12, 8)).collect();
        // First pass lands every pixel on a decodable color.
        let first: Vec<Frame> = Y4mReader::new(Cursor::new(y4m_bytes(&header, &originals)))
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        for (a, b) in originals.iter().zip(&first) {
            for (x, y) in a.pixels.iter().zip(&b.pixels) {
                assert!(x.abs_diff(*y) <= 2);
            }
        }
        let second: Vec<Frame> = Y4mReader::new(Cursor::new(y4m_bytes(&header, &first)))
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn y4m_420_round_trip_within_three() {
        for range in [RangeMode::Limited, RangeMode::Full] {
            let header = Y4mHeader {
                width: 16,
                height: 10,
                fps_num: 30,
                fps_den: 1,
                chroma: Y4mChroma::C420,
                range,
            };
            let frames: Vec<_> = (0..2).map(|i| gradient_frame(i, 30.0, 16, 10)).collect();
            let back: Vec<Frame> = Y4mReader::new(Cursor::new(y4m_bytes(&header, &frames)))
                .unwrap()
                .collect::<Result<_, _>>()
                .unwrap();
            for (a, b) in frames.iter().zip(&back) {
                let worst = a
                    .pixels
                    .iter()
                    .zip(&b.pixels)
                    .map(|(x, y)| x.abs_diff(*y))
                    .max()
                    .unwrap();
                assert!(worst <= 3, "{range:?}: worst channel error {worst}");
            }
        }
    }

    #[test]
    fn writer_rejects_mismatched_frame() {
        let header = Y4mHeader::parse("YUV4MPEG2 W4 H4 F30:1 C444").unwrap();
        let mut w = Y4mWriter::new(Vec::new(), header).unwrap();
        let f = gradient_frame(0, 30.0, 3, 4);
        assert!(matches!(
            w.write_frame(&f),
            Err(IngestError::InconsistentFrameSize { .. })
        ));
    }

    #[test]
    fn pattern_expansion() {
        assert_eq!(expand_pattern("frame_%05d.ppm", 42).unwrap(), "frame_00042.ppm");
        assert_eq!(expand_pattern("f%d.png", 7).unwrap(), "f7.png");
        assert!(expand_pattern("frame.ppm", 1).is_err());
    }

    #[test]
    fn image_sequence_of_99_frames_at_9_fps() {
        let dir = tempfile::tempdir().unwrap();
        let meta = SequenceMeta {
            fps: 9.0,
            width: 4,
            height: 3,
            pattern: "frame_%05d.ppm".into(),
            pixel_format: None,
        };
        std::fs::write(dir.path().join("meta.json"), serde_json::to_string(&meta).unwrap()).unwrap();
        for i in 0..99u64 {
            let f = gradient_frame(i, 9.0, 4, 3);
            let img = image::RgbImage::from_raw(4, 3, f.pixels).unwrap();
            img.save(dir.path().join(expand_pattern(&meta.pattern, i).unwrap())).unwrap();
        }
        let (sm, stream) = open_stream(dir.path(), FormatHint::Auto).unwrap();
        assert_eq!(sm.source_kind, SourceKind::ImageSequence);
        assert_eq!(sm.frame_count, Some(99));
        let frames: Vec<Frame> = stream.collect::<Result<_, _>>().unwrap();
        assert_eq!(frames.len(), 99);
        let last = frames.last().unwrap();
        assert!((last.timestamp_s - 98.0 / 9.0).abs() < 1e-12);
        assert!((last.timestamp_s - 10.89).abs() < 0.01);
        assert_eq!(frames[5], gradient_frame(5, 9.0, 4, 3));
    }

    #[test]
    fn image_sequence_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let meta = SequenceMeta {
            fps: 9.0,
            width: 4,
            height: 3,
            pattern: "f%03d.png".into(),
            pixel_format: None,
        };
        std::fs::write(dir.path().join("meta.json"), serde_json::to_string(&meta).unwrap()).unwrap();
        image::RgbImage::new(4, 3).save(dir.path().join("f000.png")).unwrap();
        image::RgbImage::new(5, 3).save(dir.path().join("f001.png")).unwrap();
        let (_, stream) = open_stream(&dir.path().join("meta.json"), FormatHint::Auto).unwrap();
        let results: Vec<_> = stream.collect();
        assert_eq!(results.len(), 2);
        assert!(results[0].is_ok());
        assert!(matches!(results[1], Err(IngestError::InconsistentFrameSize { index: 1, .. })));
    }

    #[test]
    fn raw_rgb_stream() {
        let dir = tempfile::tempdir().unwrap();
        let meta = SequenceMeta {
            fps: 30.0,
            width: 2,
            height: 2,
            pattern: "clip.rgb".into(),
            pixel_format: Some("rgb24".into()),
        };
        std::fs::write(dir.path().join("clip.json"), serde_json::to_string(&meta).unwrap()).unwrap();
        let data: Vec<u8> = (0..36).collect();
        std::fs::write(dir.path().join("clip.rgb"), &data).unwrap();
        let (sm, stream) = open_stream(&dir.path().join("clip.rgb"), FormatHint::Auto).unwrap();
        assert_eq!(sm.source_kind, SourceKind::RawRgb);
        assert_eq!(sm.frame_count, Some(3));
        let frames: Vec<Frame> = stream.collect::<Result<_, _>>().unwrap();
        assert_eq!(frames.len(), 3);
        assert_eq!(frames[2].pixels, (24..36).collect::<Vec<u8>>());
        assert!((frames[2].timestamp_s - 2.0 / 30.0).abs() < 1e-12);

        // a trailing partial frame is an error, not silently dropped
        std::fs::write(dir.path().join("clip.rgb"), &data[..30]).unwrap();
        let (_, stream) = open_stream(&dir.path().join("clip.json"), FormatHint::Auto).unwrap();
        let results: Vec<_> = stream.collect();
        assert!(matches!(results.last(), Some(Err(IngestError::TruncatedFrame { .. }))));
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = open_stream(Path::new("/nonexistent/clip.y4m"), FormatHint::Auto).err().unwrap();
        assert!(matches!(err, IngestError::Unreadable { .. }));
    }

    #[test]
    fn empty_y4m_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.y4m");
        std::fs::write(&p, b"").unwrap();
        let err = open_stream(&p, FormatHint::Auto).err().unwrap();
        assert!(matches!(err, IngestError::MalformedHeader(_)));
    }

    #[test]
    fn keep_rate_one_is_identity() {
        let v: Vec<u32> = (0..500).collect();
        let kept: Vec<u32> = simulate_drops(v.clone(), 1.0, 3).unwrap().collect();
        assert_eq!(kept, v);
    }

    #[test]
    fn seeded_drop_count() {
        let kept = simulate_drops(0..300, 0.3, 7).unwrap().count();
        assert!((70..=110).contains(&kept), "kept {kept}");
    }

    #[test]
    fn drops_give_about_nine_fps() {
        let frames = (0..300u64).map(|i| (i, i as f64 / 30.0));
        let mut total = 0usize;
        for seed in 0..40 {
            let kept: Vec<_> = simulate_drops(frames.clone(), 0.3, seed).unwrap().collect();
            assert!(kept.windows(2).all(|w| w[1].1 > w[0].1));
            total += kept.len();
        }
        let mean_fps = total as f64 / 40.0 / 10.0;
        assert!((mean_fps - 9.0).abs() < 0.3, "{mean_fps}");
    }

    #[test]
    fn invalid_keep_rate() {
        assert!(simulate_drops(0..3, 0.0, 1).is_err());
        assert!(simulate_drops(0..3, 1.5, 1).is_err());
        assert!(simulate_drops(0..3, f64::NAN, 1).is_err());
    }
}
