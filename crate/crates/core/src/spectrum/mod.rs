//! Spectral statistics linking an image's high-frequency content to its edge count.

mod fft;
pub mod fixtures;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{GrayImage, Grid};
use crate::semantics::{canny_edges, CannyParams, SemanticsError};

pub use fft::{dft_in_place, transform_2d, DftMethod};

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("threshold {0} outside [0, 0.5)")]
    BadThreshold(f64),
    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),
    #[error(transparent)]
    Canny(#[from] SemanticsError),
}

/// 2D DFT coefficients, DC at `(0, 0)`, indexed `[v * width + u]` with `u` the horizontal
/// frequency index.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    pub coefficients: Grid<Complex64>,
}

impl Spectrum2D {
    pub fn width(&self) -> usize {
        self.coefficients.width()
    }

    pub fn height(&self) -> usize {
        self.coefficients.height()
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse_real(&self) -> GrayImage {
        let (w, h) = self.coefficients.dims();
        let mut data = self.coefficients.as_slice().to_vec();
        transform_2d(&mut data, w, h, true, DftMethod::Auto);
        Grid::from_vec(w, h, data.into_iter().map(|c| c.re).collect()).unwrap()
    }

    /// Signed normalized frequency (cycles/pixel) of bin `(u, v)`.
    pub fn frequency(&self, u: usize, v: usize) -> (f64, f64) {
        (
            signed_frequency(u, self.width()),
            signed_frequency(v, self.height()),
        )
    }

    /// Radial frequency of bin `(u, v)` in cycles/pixel.
    pub fn radius(&self, u: usize, v: usize) -> f64 {
        let (fu, fv) = self.frequency(u, v);
        fu.hypot(fv)
    }
}

/// Index `k` of an `n`-point transform as a signed frequency in `(-0.5, 0.5]`.
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if 2 * k <= n {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

pub fn dft2(image: &GrayImage) -> Spectrum2D {
    dft2_with(image, DftMethod::Auto)
}

pub fn dft2_with(image: &GrayImage, method: DftMethod) -> Spectrum2D {
    let (w, h) = image.dims();
    let mut data: Vec<Complex64> = image
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    if w > 0 && h > 0 {
        transform_2d(&mut data, w, h, false, method);
    }
    Spectrum2D {
        coefficients: Grid::from_vec(w, h, data).unwrap(),
    }
}

/// Discrete form of `∫₀^{π/2} ∫ ρ·|f(ρ,θ)| dρ dθ`: the sum of `ρ·|F|` over non-DC bins of
/// the non-negative frequency quadrant. Each bin is weighted by 2 for its conjugate mirror
/// unless it is its own mirror.
pub fn naive_magnitude_stat(spec: &Spectrum2D) -> f64 {
    let (w, h) = spec.coefficients.dims();
    let mut total = 0.0;
    for v in 0..h {
        for u in 0..w {
            let (fu, fv) = spec.frequency(u, v);
            if fu < 0.0 || fv < 0.0 || (u == 0 && v == 0) {
                continue;
            }
            let self_mirror = (w - u) % w == u && (h - v) % h == v;
            let weight = if self_mirror { 1.0 } else { 2.0 };
            total += weight * fu.hypot(fv) * spec.coefficients.get(u, v).norm();
        }
    }
    total
}

/// Energy of the ideal high-passed image: `Σ_{ρ ≥ T} |F|² / (H·W)`.
pub fn highpass_energy(spec: &Spectrum2D, threshold: f64) -> Result<f64, SpectrumError> {
    if !(0.0..0.5).contains(&threshold) {
        return Err(SpectrumError::BadThreshold(threshold));
    }
    let (w, h) = spec.coefficients.dims();
    let mut total = 0.0;
    for v in 0..h {
        for u in 0..w {
            if spec.radius(u, v) >= threshold {
                total += spec.coefficients.get(u, v).norm_sqr();
            }
        }
    }
    Ok(total / (w * h) as f64)
}

/// `|Σ x² − Σ|F|²/(HW)| / Σ x²` (0 for an all-zero image).
pub fn parseval_relative_error(image: &GrayImage) -> f64 {
    let spatial: f64 = image.as_slice().iter().map(|v| v * v).sum();
    let spec = dft2(image);
    let spectral: f64 = spec
        .coefficients
        .as_slice()
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        / image.len() as f64;
    if spatial == 0.0 {
        spectral
    } else {
        (spatial - spectral).abs() / spatial
    }
}

/// Per-image quantities compared across a corpus.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImageSpectralStats {
    pub edge_count: usize,
    pub highpass_energy: f64,
    pub naive_stat: f64,
}

pub fn image_stats(
    image: &GrayImage,
    threshold: f64,
    canny: &CannyParams,
) -> Result<ImageSpectralStats, SpectrumError> {
    let spec = dft2(image);
    Ok(ImageSpectralStats {
        edge_count: canny_edges(image, canny)?.count,
        highpass_energy: highpass_energy(&spec, threshold)?,
        naive_stat: naive_magnitude_stat(&spec),
    })
}

/// Pearson correlation; `None` when either series has zero variance or lengths differ.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between per-image Canny edge counts and high-pass energies.
pub fn edge_energy_correlation(
    corpus: &[GrayImage],
    threshold: f64,
    canny: &CannyParams,
) -> Result<f64, SpectrumError> {
    let stats = corpus_stats(corpus, threshold, canny)?;
    correlation_of(&stats)
}

pub fn corpus_stats(
    corpus: &[GrayImage],
    threshold: f64,
    canny: &CannyParams,
) -> Result<Vec<ImageSpectralStats>, SpectrumError> {
    if !(0.0..0.5).contains(&threshold) {
        return Err(SpectrumError::BadThreshold(threshold));
    }
    corpus
        .par_iter()
        .map(|img| image_stats(img, threshold, canny))
        .collect()
}

/// Edge-count vs high-pass-energy correlation of precomputed statistics.
pub fn correlation_of(stats: &[ImageSpectralStats]) -> Result<f64, SpectrumError> {
    if stats.len() < 10 {
        return Err(SpectrumError::DegenerateCorpus(format!(
            "need at least 10 images, got {}",
            stats.len()
        )));
    }
    let edges: Vec<f64> = stats.iter().map(|s| s.edge_count as f64).collect();
    let energy: Vec<f64> = stats.iter().map(|s| s.highpass_energy).collect();
    pearson(&edges, &energy).ok_or_else(|| {
        SpectrumError::DegenerateCorpus("zero variance in edge counts or energies".into())
    })
}
