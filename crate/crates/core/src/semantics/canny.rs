//! Canny edge detection: Gaussian blur, Sobel gradients, non-maximum suppression over
//! four direction bins, and 8-connected hysteresis.

use crate::grid::{GrayImage, Grid};

use super::SemanticsError;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CannyParams {
    pub sigma: f64,
    /// Hysteresis thresholds on gradient magnitude, in intensity units per pixel.
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            low: 0.1,
            high: 0.3,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<(), SemanticsError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(SemanticsError::BadSigma(self.sigma));
        }
        if !(self.low > 0.0 && self.low < self.high && self.high.is_finite()) {
            return Err(SemanticsError::BadThresholds {
                low: self.low,
                high: self.high,
            });
        }
        Ok(())
    }
}

/// Binary edge image with its pixel count.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub edges: Grid<bool>,
    pub count: usize,
}

impl EdgeMap {
    pub fn from_grid(edges: Grid<bool>) -> Self {
        let count = edges.as_slice().iter().filter(|&&e| e).count();
        Self { edges, count }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(image: &GrayImage, sigma: f64) -> GrayImage {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (w, h) = image.dims();
    let horiz: GrayImage = Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * image.get_clamped(x as isize + i as isize - r, y as isize))
            .sum()
    });
    Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * horiz.get_clamped(x as isize, y as isize + i as isize - r))
            .sum()
    })
}

/// Sobel derivatives scaled by 1/8, so a unit-slope ramp has unit magnitude.
pub fn sobel(image: &GrayImage) -> (GrayImage, GrayImage) {
    let (w, h) = image.dims();
    let px = |x: usize, y: usize, dx: isize, dy: isize| {
        image.get_clamped(x as isize + dx, y as isize + dy)
    };
    let gx = Grid::from_fn(w, h, |x, y| {
        ((px(x, y, 1, -1) + 2.0 * px(x, y, 1, 0) + px(x, y, 1, 1))
            - (px(x, y, -1, -1) + 2.0 * px(x, y, -1, 0) + px(x, y, -1, 1)))
            / 8.0
    });
    let gy = Grid::from_fn(w, h, |x, y| {
        ((px(x, y, -1, 1) + 2.0 * px(x, y, 0, 1) + px(x, y, 1, 1))
            - (px(x, y, -1, -1) + 2.0 * px(x, y, 0, -1) + px(x, y, 1, -1)))
            / 8.0
    });
    (gx, gy)
}

/// Offset toward the positive side of the gradient, quantized to one of four bins.
fn direction_step(gx: f64, gy: f64) -> (isize, isize) {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        (1, 0)
    } else if angle < 67.5 {
        (1, 1)
    } else if angle < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Thin ridges of gradient magnitude. On a two-pixel plateau (a step edge between pixel
/// centres) exactly one pixel survives: the one on the positive side of the gradient.
fn non_maximum_suppression(mag: &GrayImage, gx: &GrayImage, gy: &GrayImage) -> GrayImage {
    let (w, h) = mag.dims();
    let at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            *mag.get(x as usize, y as usize)
        }
    };
    Grid::from_fn(w, h, |x, y| {
        let m = *mag.get(x, y);
        if m <= 0.0 {
            return 0.0;
        }
        let (dx, dy) = direction_step(*gx.get(x, y), *gy.get(x, y));
        let (xi, yi) = (x as isize, y as isize);
        let next = at(xi + dx, yi + dy);
        let prev = at(xi - dx, yi - dy);
        if m >= prev && m > next {
            m
        } else {
            0.0
        }
    })
}

fn hysteresis(thin: &GrayImage, low: f64, high: f64) -> Grid<bool> {
    let (w, h) = thin.dims();
    let mut out = Grid::filled(w, h, false);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if *thin.get(x, y) >= high && !*out.get(x, y) {
                *out.get_mut(x, y) = true;
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for ny in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
                        for nx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                            if !*out.get(nx, ny) && *thin.get(nx, ny) >= low {
                                *out.get_mut(nx, ny) = true;
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Runs the full Canny pipeline on a grayscale image.
pub fn canny_edges(image: &GrayImage, params: &CannyParams) -> Result<EdgeMap, SemanticsError> {
    params.validate()?;
    if image.is_empty() {
        return Ok(EdgeMap::from_grid(Grid::filled(
            image.width(),
            image.height(),
            false,
        )));
    }
    let blurred = gaussian_blur(image, params.sigma);
    let (gx, gy) = sobel(&blurred);
    let mag = Grid::from_fn(image.width(), image.height(), |x, y| {
        gx.get(x, y).hypot(*gy.get(x, y))
    });
    let thin = non_maximum_suppression(&mag, &gx, &gy);
    Ok(EdgeMap::from_grid(hysteresis(
        &thin,
        params.low,
        params.high,
    )))
}
