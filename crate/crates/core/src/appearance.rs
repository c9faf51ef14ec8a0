//! HSV color histograms, Bhattacharyya distance and the appearance
//! likelihood used by the particle filter and the scene scoring.
//!
//! A histogram has 110 bins: a 10×10 hue/saturation grid (indices 0–99,
//! `hue_bin * 10 + sat_bin`) filled by chromatic pixels, followed by 10
//! value bins (indices 100–109) filled by pixels too dark or too grey for
//! hue to be reliable.

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub const HUE_BINS: usize = 10;
pub const SAT_BINS: usize = 10;
pub const VALUE_BINS: usize = 10;
pub const HIST_BINS: usize = HUE_BINS * SAT_BINS + VALUE_BINS;

/// Chromatic pixels need saturation above this...
pub const SATURATION_THRESHOLD: f64 = 0.1;
/// ...and value above this.
pub const VALUE_THRESHOLD: f64 = 0.2;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// An RGB image held in memory, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!("frame size {width}x{height}")));
        }
        Ok(Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        })
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Input(format!(
                "frame size {width}x{height} does not match {} pixels",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    /// Integer pixel window `[x0, x1) × [y0, y1)` covered by `bbox`, clipped
    /// to the frame. `None` when nothing of the box is inside.
    pub fn window(&self, bbox: &BBox) -> Option<(usize, usize, usize, usize)> {
        let clip = |v: f64, hi: usize| v.round().clamp(0.0, hi as f64) as usize;
        let x0 = clip(bbox.left(), self.width);
        let x1 = clip(bbox.right(), self.width);
        let y0 = clip(bbox.top(), self.height);
        let y1 = clip(bbox.bottom(), self.height);
        (x0 < x1 && y0 < y1).then_some((x0, y0, x1, y1))
    }

    /// Fills the clipped box with a flat color.
    pub fn fill_box(&mut self, bbox: &BBox, rgb: [u8; 3]) {
        if let Some((x0, y0, x1, y1)) = self.window(bbox) {
            for y in y0..y1 {
                self.pixels[y * self.width + x0..y * self.width + x1].fill(rgb);
            }
        }
    }

    pub fn to_image(&self) -> image::RgbImage {
        let raw = self.pixels.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer matches dimensions")
    }

    pub fn from_image(img: &image::RgbImage) -> Result<Self> {
        let pixels = img.pixels().map(|p| p.0).collect();
        Self::from_pixels(img.width() as usize, img.height() as usize, pixels)
    }
}

/// RGB to HSV with `h ∈ [0, 1)`, `s, v ∈ [0, 1]`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (if h >= 1.0 { 0.0 } else { h }, s, v)
}

fn unit_bin(value: f64, bins: usize) -> usize {
    ((value * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Histogram bin receiving a pixel with the given HSV components.
pub fn hsv_bin(h: f64, s: f64, v: f64) -> usize {
    if s > SATURATION_THRESHOLD && v > VALUE_THRESHOLD {
        unit_bin(h, HUE_BINS) * SAT_BINS + unit_bin(s, SAT_BINS)
    } else {
        HUE_BINS * SAT_BINS + unit_bin(v, VALUE_BINS)
    }
}

pub fn pixel_bin(rgb: [u8; 3]) -> usize {
    let (h, s, v) = rgb_to_hsv(rgb);
    hsv_bin(h, s, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    bins: [f64; HIST_BINS],
}

impl Default for ColorHistogram {
    fn default() -> Self {
        Self { bins: [0.0; HIST_BINS] }
    }
}

impl ColorHistogram {
    pub fn from_bins(bins: [f64; HIST_BINS]) -> Result<Self> {
        if bins.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::NonFinite("histogram bins"));
        }
        Ok(Self { bins })
    }

    /// Normalized histogram with all mass in one bin.
    pub fn single_bin(index: usize) -> Self {
        let mut h = Self::default();
        h.bins[index] = 1.0;
        h
    }

    pub fn bins(&self) -> &[f64; HIST_BINS] {
        &self.bins
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }

    fn normalize_counts(counts: &[u32; HIST_BINS]) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total == 0 {
            return Err(Error::EmptyRegion);
        }
        let mut h = Self::default();
        for (dst, &c) in h.bins.iter_mut().zip(counts) {
            *dst = c as f64 / total as f64;
        }
        Ok(h)
    }
}

/// Histogram of the pixels of `frame` inside `bbox` (clipped to the frame),
/// by direct pixel counting.
pub fn extract_histogram(frame: &Frame, bbox: &BBox) -> Result<ColorHistogram> {
    let (x0, y0, x1, y1) = frame.window(bbox).ok_or(Error::EmptyRegion)?;
    let mut counts = [0u32; HIST_BINS];
    for y in y0..y1 {
        for x in x0..x1 {
            counts[pixel_bin(frame.pixel(x, y))] += 1;
        }
    }
    ColorHistogram::normalize_counts(&counts)
}

/// Per-frame precomputation answering box-histogram queries in time
/// proportional to the number of distinct bins present in the frame.
///
/// Holds one summed-area table per occupied bin. Results are identical to
/// [`extract_histogram`].
pub struct FrameFeatures<'a> {
    frame: &'a Frame,
    present: Vec<usize>,
    stride: usize,
    // present.len() tables of (w+1)*(h+1) entries, concatenated
    integrals: Vec<u32>,
}

impl<'a> FrameFeatures<'a> {
    pub fn new(frame: &'a Frame) -> Self {
        let (w, h) = (frame.width(), frame.height());
        let bin_map: Vec<u8> = frame.pixels().iter().map(|&p| pixel_bin(p) as u8).collect();
        let mut slot = [usize::MAX; HIST_BINS];
        let mut present = Vec::new();
        for &b in &bin_map {
            if slot[b as usize] == usize::MAX {
                slot[b as usize] = present.len();
                present.push(b as usize);
            }
        }
        let stride = w + 1;
        let plane = stride * (h + 1);
        let mut integrals = vec![0u32; plane * present.len()];
        let mut row = vec![0u32; present.len()];
        for y in 0..h {
            row.fill(0);
            for x in 0..w {
                row[slot[bin_map[y * w + x] as usize]] += 1;
                let above = y * stride + x + 1;
                let here = (y + 1) * stride + x + 1;
                for (k, r) in row.iter().enumerate() {
                    integrals[k * plane + here] = integrals[k * plane + above] + r;
                }
            }
        }
        Self {
            frame,
            present,
            stride,
            integrals,
        }
    }

    pub fn frame(&self) -> &Frame {
        self.frame
    }

    pub fn histogram(&self, bbox: &BBox) -> Result<ColorHistogram> {
        let (x0, y0, x1, y1) = self.frame.window(bbox).ok_or(Error::EmptyRegion)?;
        let plane = self.stride * (self.frame.height() + 1);
        let mut counts = [0u32; HIST_BINS];
        for (k, &bin) in self.present.iter().enumerate() {
            let t = &self.integrals[k * plane..(k + 1) * plane];
            let at = |x: usize, y: usize| t[y * self.stride + x];
            counts[bin] = at(x1, y1) + at(x0, y0) - at(x0, y1) - at(x1, y0);
        }
        ColorHistogram::normalize_counts(&counts)
    }
}

fn coefficient(h1: &ColorHistogram, h2: &ColorHistogram) -> f64 {
    h1.bins.iter().zip(&h2.bins).map(|(a, b)| (a * b).sqrt()).sum()
}

/// Bhattacharyya distance `sqrt(1 - Σ sqrt(h1·h2))` between normalized
/// histograms, clamped to `[0, 1]`.
pub fn bhattacharyya(h1: &ColorHistogram, h2: &ColorHistogram) -> Result<f64> {
    for h in [h1, h2] {
        if !h.is_normalized() {
            return Err(Error::NotNormalized(h.total()));
        }
    }
    Ok((1.0 - coefficient(h1, h2)).clamp(0.0, 1.0).sqrt())
}

/// Observation likelihood `exp(-d_B² / (2σ²))`.
pub fn likelihood(h_model: &ColorHistogram, h_obs: &ColorHistogram, sigma_b: f64) -> Result<f64> {
    if !(sigma_b > 0.0) {
        return Err(Error::Config(format!("sigma_b must be positive, got {sigma_b}")));
    }
    let d = bhattacharyya(h_model, h_obs)?;
    Ok(likelihood_from_distance(d, sigma_b))
}

pub fn likelihood_from_distance(distance: f64, sigma_b: f64) -> f64 {
    (-(distance * distance) / (2.0 * sigma_b * sigma_b)).exp()
}

/// Likelihood of the box in the current frame against a reference model;
/// boxes entirely outside the frame score 0.
pub fn box_likelihood(features: &FrameFeatures<'_>, model: &ColorHistogram, bbox: &BBox, sigma_b: f64) -> f64 {
    match features.histogram(bbox) {
        Ok(h) => {
            let d = (1.0 - coefficient(model, &h)).clamp(0.0, 1.0).sqrt();
            likelihood_from_distance(d, sigma_b)
        }
        Err(_) => 0.0,
    }
}
