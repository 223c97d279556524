//! Generated image corpora for validating the edge/high-pass relationship.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{GrayImage, Grid};

use super::{signed_frequency, transform_2d, DftMethod};

/// A centred white square of side `side` on a black `size × size` canvas.
pub fn square_image(size: usize, side: usize) -> GrayImage {
    let lo = (size.saturating_sub(side)) / 2;
    Grid::from_fn(size, size, |x, y| {
        if (lo..lo + side).contains(&x) && (lo..lo + side).contains(&y) {
            1.0
        } else {
            0.0
        }
    })
}

/// `count` squares whose perimeters run linearly from 16 px up to 512 px (or less when the
/// canvas cannot hold them).
pub fn square_corpus(count: usize, size: usize) -> Vec<GrayImage> {
    let min_side = 4.0;
    let max_side = 128.0f64.min(size as f64 - 8.0).max(min_side);
    (0..count)
        .map(|i| {
            let t = if count > 1 {
                i as f64 / (count - 1) as f64
            } else {
                0.0
            };
            let side = (min_side + t * (max_side - min_side)).round() as usize;
            square_image(size, side)
        })
        .collect()
}

/// Uniform white noise around mid-grey with peak-to-peak amplitude growing linearly
/// from `amp_min` to `amp_max`.
pub fn noise_corpus(
    count: usize,
    size: usize,
    amp_min: f64,
    amp_max: f64,
    seed: u64,
) -> Vec<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let t = if count > 1 {
                i as f64 / (count - 1) as f64
            } else {
                0.0
            };
            let amp = amp_min + t * (amp_max - amp_min);
            Grid::from_fn(size, size, |_, _| 0.5 + amp * (rng.random::<f64>() - 0.5))
        })
        .collect()
}

/// Random-phase image whose amplitude spectrum falls off as `ρ^(-exponent)`.
pub fn power_law_image(size: usize, exponent: f64, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data: Vec<Complex64> = (0..size * size)
        .map(|i| {
            let (u, v) = (i % size, i / size);
            let rho = signed_frequency(u, size).hypot(signed_frequency(v, size));
            if rho == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                let phase = rng.random::<f64>() * std::f64::consts::TAU;
                Complex64::from_polar(rho.powf(-exponent), phase)
            }
        })
        .collect();
    transform_2d(&mut data, size, size, true, DftMethod::Auto);
    Grid::from_vec(size, size, data.into_iter().map(|c| c.re).collect()).unwrap()
}
