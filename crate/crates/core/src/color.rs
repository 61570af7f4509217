//! Pixel color conversions.
//!
//! Hue is normalized to the unit interval `[0, 1)` rather than degrees, so a
//! skin-tone mask such as `(0, 0.1)` corresponds to `(0°, 36°)`.
//!
//! The YUV routines implement BT.601 in both limited (studio, 16–235) and full
//! (0–255) range. They exist to ingest and emit YUV4MPEG streams.

use std::collections::HashMap;

use thiserror::Error;

/// BT.601 luma coefficients.
const KR: f64 = 0.299;
const KB: f64 = 0.114;
const KG: f64 = 1.0 - KR - KB;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ColorError {
    #[error("{plane} plane has {actual} bytes, expected {expected}")]
    PlaneSize {
        plane: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("rgb buffer has {actual} bytes, expected {expected}")]
    RgbSize { expected: usize, actual: usize },
}

/// An 8-bit RGB pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RgbPixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl RgbPixel {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    /// Reads the pixel at the start of an interleaved RGB8 slice.
    #[inline]
    pub fn from_slice(px: &[u8]) -> Self {
        Self {
            r: px[0],
            g: px[1],
            b: px[2],
        }
    }

    #[inline]
    pub fn green(self) -> u8 {
        self.g
    }
}

/// A pixel in the hexcone HSV model with every component on the unit interval.
///
/// `h` is circular on `[0, 1)`; achromatic pixels (`s == 0`) carry `h == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Converts an 8-bit RGB pixel into hexcone HSV.
///
/// ```
/// use huevitals::color::{rgb_to_hsv, RgbPixel};
///
/// let skin = rgb_to_hsv(RgbPixel::new(230, 180, 160));
/// assert!((skin.h - 1.0 / 21.0).abs() < 1e-12);
/// ```
pub fn rgb_to_hsv(p: RgbPixel) -> HsvPixel {
    let (r, g, b) = (i32::from(p.r), i32::from(p.g), i32::from(p.b));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;

    let v = f64::from(max) / 255.0;
    if delta == 0 {
        return HsvPixel { h: 0.0, s: 0.0, v };
    }
    let s = f64::from(delta) / f64::from(max);

    // Sector offset and signed numerator, both in units of `delta`.
    let (sector, num) = if max == r {
        (0, g - b)
    } else if max == g {
        (2, b - r)
    } else {
        (4, r - g)
    };
    let mut h = (f64::from(sector * delta + num)) / f64::from(6 * delta);
    if h < 0.0 {
        h += 1.0;
    }
    if h >= 1.0 {
        h -= 1.0;
    }
    HsvPixel { h, s, v }
}

/// Inverse of [`rgb_to_hsv`] on the continuous cube; returns channels in
/// `[0, 1]` without quantization.
pub fn hsv_to_rgb_f64(hsv: HsvPixel) -> [f64; 3] {
    let h6 = hsv.h.rem_euclid(1.0) * 6.0;
    let c = hsv.v * hsv.s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let m = hsv.v - c;
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// Quantization range of a YUV signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangeMode {
    /// Luma 16–235, chroma 16–240.
    #[default]
    Limited,
    /// All components 0–255.
    Full,
}

#[inline]
fn clamp_u8(x: f64) -> u8 {
    x.round().clamp(0.0, 255.0) as u8
}

/// BT.601 YUV → RGB for a single sample triple.
#[inline]
pub fn yuv_to_rgb(y: u8, u: u8, v: u8, range: RangeMode) -> RgbPixel {
    let (luma, cb, cr) = match range {
        RangeMode::Limited => (
            (f64::from(y) - 16.0) * 255.0 / 219.0,
            (f64::from(u) - 128.0) * 255.0 / 224.0,
            (f64::from(v) - 128.0) * 255.0 / 224.0,
        ),
        RangeMode::Full => (f64::from(y), f64::from(u) - 128.0, f64::from(v) - 128.0),
    };
    let r = luma + 2.0 * (1.0 - KR) * cr;
    let b = luma + 2.0 * (1.0 - KB) * cb;
    let g = luma - (2.0 * KB * (1.0 - KB) / KG) * cb - (2.0 * KR * (1.0 - KR) / KG) * cr;
    RgbPixel::new(clamp_u8(r), clamp_u8(g), clamp_u8(b))
}

/// BT.601 RGB → YUV, rounded to the nearest code values.
#[inline]
pub fn rgb_to_yuv(p: RgbPixel, range: RangeMode) -> (u8, u8, u8) {
    let [y, cb, cr] = rgb_to_yuv_f64(p);
    match range {
        RangeMode::Limited => (
            clamp_u8(16.0 + y * 219.0 / 255.0),
            clamp_u8(128.0 + cb * 224.0 / 255.0),
            clamp_u8(128.0 + cr * 224.0 / 255.0),
        ),
        RangeMode::Full => (clamp_u8(y), clamp_u8(128.0 + cb), clamp_u8(128.0 + cr)),
    }
}

fn rgb_to_yuv_f64(p: RgbPixel) -> [f64; 3] {
    let (r, g, b) = (f64::from(p.r), f64::from(p.g), f64::from(p.b));
    let y = KR * r + KG * g + KB * b;
    let cb = (b - y) / (2.0 * (1.0 - KB));
    let cr = (r - y) / (2.0 * (1.0 - KR));
    [y, cb, cr]
}

fn l1(a: RgbPixel, b: RgbPixel) -> u32 {
    u32::from(a.r.abs_diff(b.r)) + u32::from(a.g.abs_diff(b.g)) + u32::from(a.b.abs_diff(b.b))
}

/// Encodes one pixel, searching the code values around the rounded
/// conversion for the triple whose decode lands closest to `p`. Whenever `p`
/// is itself the decode of some triple, that decode is reproduced exactly.
fn encode_nearest(p: RgbPixel, range: RangeMode) -> (u8, u8, u8) {
    let (y0, u0, v0) = rgb_to_yuv(p, range);
    let mut best = (y0, u0, v0);
    let mut best_err = l1(yuv_to_rgb(y0, u0, v0, range), p);
    if best_err == 0 {
        return best;
    }
    for dy in -2i16..=2 {
        for du in -2i16..=2 {
            for dv in -2i16..=2 {
                let cand = (
                    (i16::from(y0) + dy).clamp(0, 255) as u8,
                    (i16::from(u0) + du).clamp(0, 255) as u8,
                    (i16::from(v0) + dv).clamp(0, 255) as u8,
                );
                let err = l1(yuv_to_rgb(cand.0, cand.1, cand.2, range), p);
                if err < best_err {
                    best = cand;
                    best_err = err;
                    if err == 0 {
                        return best;
                    }
                }
            }
        }
    }
    best
}

fn check_rgb(rgb: &[u8], width: usize, height: usize) -> Result<(), ColorError> {
    let expected = width * height * 3;
    if rgb.len() != expected {
        return Err(ColorError::RgbSize {
            expected,
            actual: rgb.len(),
        });
    }
    Ok(())
}

fn check_plane(plane: &'static str, data: &[u8], expected: usize) -> Result<(), ColorError> {
    if data.len() != expected {
        return Err(ColorError::PlaneSize {
            plane,
            expected,
            actual: data.len(),
        });
    }
    Ok(())
}

/// Chroma plane dimensions for 4:2:0 subsampling (odd sizes round up).
pub fn chroma420_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(2), height.div_ceil(2))
}

/// Converts planar 4:2:0 YUV into an interleaved RGB8 buffer.
///
/// Chroma is upsampled by nearest neighbor.
pub fn yuv420_to_rgb(
    y_plane: &[u8],
    u_plane: &[u8],
    v_plane: &[u8],
    width: usize,
    height: usize,
    range: RangeMode,
) -> Result<Vec<u8>, ColorError> {
    let (cw, ch) = chroma420_dims(width, height);
    check_plane("Y", y_plane, width * height)?;
    check_plane("U", u_plane, cw * ch)?;
    check_plane("V", v_plane, cw * ch)?;

    let mut out = Vec::with_capacity(width * height * 3);
    for row in 0..height {
        let crow = (row / 2) * cw;
        for col in 0..width {
            let c = crow + col / 2;
            let p = yuv_to_rgb(y_plane[row * width + col], u_plane[c], v_plane[c], range);
            out.extend_from_slice(&[p.r, p.g, p.b]);
        }
    }
    Ok(out)
}

/// Converts planar 4:4:4 YUV into an interleaved RGB8 buffer.
pub fn yuv444_to_rgb(
    y_plane: &[u8],
    u_plane: &[u8],
    v_plane: &[u8],
    width: usize,
    height: usize,
    range: RangeMode,
) -> Result<Vec<u8>, ColorError> {
    let n = width * height;
    check_plane("Y", y_plane, n)?;
    check_plane("U", u_plane, n)?;
    check_plane("V", v_plane, n)?;
    let mut out = Vec::with_capacity(n * 3);
    for i in 0..n {
        let p = yuv_to_rgb(y_plane[i], u_plane[i], v_plane[i], range);
        out.extend_from_slice(&[p.r, p.g, p.b]);
    }
    Ok(out)
}

/// Planar YUV buffers produced by the encoders below.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YuvPlanes {
    pub y: Vec<u8>,
    pub u: Vec<u8>,
    pub v: Vec<u8>,
}

/// Encodes interleaved RGB8 into planar 4:4:4 YUV.
pub fn rgb_to_yuv444(
    rgb: &[u8],
    width: usize,
    height: usize,
    range: RangeMode,
) -> Result<YuvPlanes, ColorError> {
    check_rgb(rgb, width, height)?;
    let n = width * height;
    let mut planes = YuvPlanes {
        y: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
    };
    let mut cache: HashMap<RgbPixel, (u8, u8, u8)> = HashMap::new();
    for px in rgb.chunks_exact(3) {
        let p = RgbPixel::from_slice(px);
        let (y, u, v) = *cache.entry(p).or_insert_with(|| encode_nearest(p, range));
        planes.y.push(y);
        planes.u.push(u);
        planes.v.push(v);
    }
    Ok(planes)
}

/// Encodes interleaved RGB8 into planar 4:2:0 YUV, averaging chroma over each
/// 2×2 block.
pub fn rgb_to_yuv420(
    rgb: &[u8],
    width: usize,
    height: usize,
    range: RangeMode,
) -> Result<YuvPlanes, ColorError> {
    check_rgb(rgb, width, height)?;
    let (cw, ch) = chroma420_dims(width, height);
    let mut y = Vec::with_capacity(width * height);
    let mut cb_sum = vec![0.0f64; cw * ch];
    let mut cr_sum = vec![0.0f64; cw * ch];
    let mut counts = vec![0u32; cw * ch];

    for row in 0..height {
        for col in 0..width {
            let i = (row * width + col) * 3;
            let p = RgbPixel::from_slice(&rgb[i..i + 3]);
            let [luma, cb, cr] = rgb_to_yuv_f64(p);
            y.push(match range {
                RangeMode::Limited => clamp_u8(16.0 + luma * 219.0 / 255.0),
                RangeMode::Full => clamp_u8(luma),
            });
            let c = (row / 2) * cw + col / 2;
            cb_sum[c] += cb;
            cr_sum[c] += cr;
            counts[c] += 1;
        }
    }

    let scale = match range {
        RangeMode::Limited => 224.0 / 255.0,
        RangeMode::Full => 1.0,
    };
    let chroma = |sum: &[f64]| -> Vec<u8> {
        sum.iter()
            .zip(&counts)
            .map(|(s, &n)| clamp_u8(128.0 + s / f64::from(n) * scale))
            .collect()
    };
    let u = chroma(&cb_sum);
    let v = chroma(&cr_sum);
    Ok(YuvPlanes { y, u, v })
}
