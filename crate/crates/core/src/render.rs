//! Gaussian-spot rendering of occupation patterns to 16-bit grayscale.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::ProbabilitySeries;
use crate::lattice::Lattice;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub pixels_per_spacing: u32,
    /// Spot width in lattice spacings.
    pub spot_sigma: f64,
    /// Border around the lattice bounding box, in lattice spacings.
    pub margin: f64,
    /// Display exponent applied to the normalized intensity.
    pub gamma: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            pixels_per_spacing: 24,
            spot_sigma: 0.35,
            margin: 1.0,
            gamma: 0.5,
        }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pixels_per_spacing < 4 {
            return Err(Error::bounds(
                "pixels per spacing",
                self.pixels_per_spacing,
                ">= 4",
            ));
        }
        for (name, v) in [("spot sigma", self.spot_sigma), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Domain(format!(
                "margin must be non-negative, got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

/// Pixel grid geometry: pixel `(col, row)` has its centre at lattice
/// coordinates `(x0 + (col + 0.5) / pps, y0 - (row + 0.5) / pps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    x0: f64,
    y0: f64,
    pps: f64,
}

impl Frame {
    pub fn new(lattice: &Lattice, spec: &RenderSpec) -> Result<Self> {
        spec.validate()?;
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for s in lattice.sites() {
            xmin = xmin.min(s.x);
            xmax = xmax.max(s.x);
            ymin = ymin.min(s.y);
            ymax = ymax.max(s.y);
        }
        let pps = f64::from(spec.pixels_per_spacing);
        let extent = |lo: f64, hi: f64| {
            ((hi - lo + 2.0 * spec.margin) * pps - 1e-9).ceil().max(1.0) as usize
        };
        Ok(Frame {
            width: extent(xmin, xmax),
            height: extent(ymin, ymax),
            x0: xmin - spec.margin,
            y0: ymax + spec.margin,
            pps,
        })
    }

    pub fn pixel_centre(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.x0 + (col as f64 + 0.5) / self.pps,
            self.y0 - (row as f64 + 0.5) / self.pps,
        )
    }

    /// Pixel containing lattice point `(x, y)`, if inside the frame.
    pub fn pixel_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = ((x - self.x0) * self.pps).floor();
        let row = ((self.y0 - y) * self.pps).floor();
        (col >= 0.0 && row >= 0.0 && (col as usize) < self.width && (row as usize) < self.height)
            .then_some((col as usize, row as usize))
    }
}

/// Row-major linear intensity `Σ_j p_j exp(-r_j² / 2σ²)`, before normalization.
pub fn spot_intensity(
    lattice: &Lattice,
    probabilities: &[f64],
    frame: &Frame,
    spot_sigma: f64,
) -> Result<Vec<f64>> {
    if probabilities.len() != lattice.len() {
        return Err(Error::Shape(format!(
            "{} probabilities for {} sites",
            probabilities.len(),
            lattice.len()
        )));
    }
    let inv = 1.0 / (2.0 * spot_sigma * spot_sigma);
    let reach = 6.0 * spot_sigma;
    let mut img = vec![0.0; frame.width * frame.height];
    for (site, &p) in lattice.sites().iter().zip(probabilities) {
        if p == 0.0 {
            continue;
        }
        let cols = pixel_span(
            site.x - reach - frame.x0,
            site.x + reach - frame.x0,
            frame.pps,
            frame.width,
        );
        let rows = pixel_span(
            frame.y0 - site.y - reach,
            frame.y0 - site.y + reach,
            frame.pps,
            frame.height,
        );
        for row in rows {
            for col in cols.clone() {
                let (x, y) = frame.pixel_centre(col, row);
                let r2 = (x - site.x).powi(2) + (y - site.y).powi(2);
                img[row * frame.width + col] += p * (-r2 * inv).exp();
            }
        }
    }
    Ok(img)
}

fn pixel_span(lo: f64, hi: f64, pps: f64, len: usize) -> std::ops::Range<usize> {
    let a = (lo * pps).floor().max(0.0) as usize;
    let b = ((hi * pps).ceil().max(0.0) as usize).min(len);
    a.min(b)..b
}

/// 16-bit grayscale image, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray16 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u16>,
}

impl Gray16 {
    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    /// Binary PGM (P5) with 16-bit big-endian samples.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().flat_map(|p| p.to_be_bytes()).collect();
        out.write_all(&bytes)?;
        out.flush()?;
        Ok(())
    }
}

/// Renders the occupation at `time_index` as Gaussian spots, normalized to
/// a peak of 1, gamma-mapped and quantized to 16 bits.
pub fn render_frame(
    series: &ProbabilitySeries,
    lattice: &Lattice,
    time_index: usize,
    spec: &RenderSpec,
) -> Result<Gray16> {
    let row = series.probabilities.get(time_index).ok_or_else(|| {
        Error::bounds("time index", time_index, format!("0..{}", series.n_times()))
    })?;
    let frame = Frame::new(lattice, spec)?;
    let img = spot_intensity(lattice, row, &frame, spec.spot_sigma)?;
    let peak = img.iter().copied().fold(0.0, f64::max);
    let pixels = img
        .iter()
        .map(|&v| {
            let level = if peak > 0.0 {
                (v / peak).clamp(0.0, 1.0).powf(spec.gamma)
            } else {
                0.0
            };
            (level * 65535.0).round() as u16
        })
        .collect();
    Ok(Gray16 {
        width: frame.width,
        height: frame.height,
        pixels,
    })
}
