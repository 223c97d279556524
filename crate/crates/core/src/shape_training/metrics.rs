use crate::grid::{GrayImage, RgbImage};

use super::ShapeTrainingError;

const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// Normalized 1D Gaussian taps of the SSIM window. The 2D window is their outer product.
pub fn ssim_window() -> [f64; WINDOW] {
    let c = (WINDOW / 2) as f64;
    let mut w = [0.0; WINDOW];
    for (k, v) in w.iter_mut().enumerate() {
        let d = k as f64 - c;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Separable windowed mean with zero padding and same-size output.
fn filter(img: &GrayImage, w: &[f64; WINDOW]) -> GrayImage {
    let (width, height) = img.dims();
    let r = (WINDOW / 2) as isize;
    let tap = |g: &GrayImage, x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= width as isize || y >= height as isize {
            0.0
        } else {
            *g.get(x as usize, y as usize)
        }
    };
    let horiz = GrayImage::from_fn(width, height, |x, y| {
        (0..WINDOW)
            .map(|k| w[k] * tap(img, x as isize + k as isize - r, y as isize))
            .sum()
    });
    GrayImage::from_fn(width, height, |x, y| {
        (0..WINDOW)
            .map(|k| w[k] * tap(&horiz, x as isize, y as isize + k as isize - r))
            .sum()
    })
}

fn check_dims(a: &RgbImage, b: &RgbImage) -> Result<(), ShapeTrainingError> {
    if a.dims() == b.dims() {
        Ok(())
    } else {
        Err(ShapeTrainingError::DimensionMismatch(a.dims(), b.dims()))
    }
}

fn zip_map(a: &GrayImage, b: &GrayImage, f: impl Fn(f64, f64) -> f64) -> GrayImage {
    GrayImage::from_fn(a.width(), a.height(), |x, y| f(*a.get(x, y), *b.get(x, y)))
}

/// Mean SSIM over all pixels and channels, Gaussian window (11 taps, σ = 1.5), zero-padded
/// borders.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64, ShapeTrainingError> {
    check_dims(a, b)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    let w = ssim_window();
    let mut total = 0.0;
    for (ca, cb) in a.channels().iter().zip(b.channels().iter()) {
        let mu1 = filter(ca, &w);
        let mu2 = filter(cb, &w);
        let e11 = filter(&zip_map(ca, ca, |p, q| p * q), &w);
        let e22 = filter(&zip_map(cb, cb, |p, q| p * q), &w);
        let e12 = filter(&zip_map(ca, cb, |p, q| p * q), &w);
        for i in 0..mu1.len() {
            let (m1, m2) = (mu1.as_slice()[i], mu2.as_slice()[i]);
            let s11 = e11.as_slice()[i] - m1 * m1;
            let s22 = e22.as_slice()[i] - m2 * m2;
            let s12 = e12.as_slice()[i] - m1 * m2;
            total += ((2.0 * m1 * m2 + C1) * (2.0 * s12 + C2))
                / ((m1 * m1 + m2 * m2 + C1) * (s11 + s22 + C2));
        }
    }
    Ok(total / (3 * a.len()) as f64)
}

/// `(1 − SSIM) / 2`.
pub fn dssim(a: &RgbImage, b: &RgbImage) -> Result<f64, ShapeTrainingError> {
    Ok((1.0 - ssim(a, b)?) / 2.0)
}

fn mean_channel_diff(
    a: &RgbImage,
    b: &RgbImage,
    f: impl Fn(f64) -> f64,
) -> Result<f64, ShapeTrainingError> {
    check_dims(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(p, q)| (0..3).map(|c| f(p[c] - q[c])).sum::<f64>())
        .sum();
    Ok(sum / (3 * a.len()) as f64)
}

/// Mean absolute difference over all channel values.
pub fn l1(a: &RgbImage, b: &RgbImage) -> Result<f64, ShapeTrainingError> {
    mean_channel_diff(a, b, f64::abs)
}

/// `10·log10(1 / MSE)` for images in `[0, 1]`; `+∞` when the images are identical.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64, ShapeTrainingError> {
    let mse = mean_channel_diff(a, b, |d| d * d)?;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}
